use std::fs;
use std::path::Path;

use polywalk_core::backtest::{
    quintile_baseline, report, run_backtest, synth_market, write_paths_csv, BacktestConfig, BacktestResult, MarketData,
    RebalanceStatus, SynthConfig, Weighting,
};
use polywalk_core::densities::DensitySpec;
use polywalk_core::diagnostics::gate;
use polywalk_core::exact::rp_linear_cdf;
use polywalk_core::geometry::BodySpec;
use polywalk_core::rounding::round_isotropic;
use polywalk_core::walks::{sample, sample_embedded, WalkConfig, WalkKind};
use polywalk_core::{DMatrix, TargetDensity, SCHEMA_VERSION};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{BacktestArgs, CdfArgs, DiagnoseArgs, QuintileWeighting, RoundArgs, SampleArgs, SynthArgs};
use crate::output::{csv_sink, io_err, num, read_text, write_json, CliError, CliResult};

/// A path to a JSON file, or the JSON itself.
fn json_arg(arg: &str) -> CliResult<Value> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(serde_json::from_str(arg)?);
    }
    Ok(serde_json::from_str(&read_text(Path::new(arg))?)?)
}

fn load_body(path: &Path) -> CliResult<BodySpec> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

fn load_target(arg: &str) -> CliResult<TargetDensity> {
    if matches!(arg, "flat" | "uniform") {
        return Ok(TargetDensity::Uniform);
    }
    let spec: DensitySpec = serde_json::from_value(json_arg(arg)?)?;
    Ok(spec.build()?)
}

pub fn sample_cmd(args: &SampleArgs) -> CliResult<()> {
    let mut cfg = match &args.walk_config {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => WalkConfig::new(args.walk.unwrap_or(WalkKind::Biw)),
    };
    if let Some(kind) = args.walk {
        cfg.kind = kind;
    }
    cfg.seed = args.seed;
    if let Some(b) = args.burn_in {
        cfg.burn_in = Some(b);
    }
    if let Some(t) = args.thinning {
        cfg.thinning = t;
    }
    cfg.validate()?;

    let (body, emb) = load_body(&args.body)?.reduced()?;
    let base = load_target(&args.target)?;
    let set = match &emb {
        Some(e) => {
            let target = if base.is_uniform() { base } else { TargetDensity::transformed(base, e)? };
            sample_embedded(&body, e, &target, &cfg, args.k, args.chains)?
        }
        None => sample(&body, &base, &cfg, args.k, args.chains)?,
    };
    let points = set.lifted.as_ref().unwrap_or(&set.draws);

    let mut w = csv_sink(args.out.as_deref())?;
    let mut header = vec!["chain".to_string()];
    header.extend((1..=points.ncols()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for meta in &set.chains {
        for r in meta.start_row..meta.start_row + meta.len {
            let mut rec = vec![meta.chain.to_string()];
            rec.extend(points.row(r).iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| io_err(args.out.as_deref(), e))?;

    let needs_report = args.gate || args.summary.is_some();
    let report = if needs_report && set.chains.iter().all(|c| c.len >= 4) {
        Some(gate(&set.chain_matrices(), body.dim())?)
    } else {
        None
    };
    if let Some(path) = &args.summary {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "walk": cfg.kind,
            "seed": args.seed,
            "dim": body.dim(),
            "ambient_dim": points.ncols(),
            "draws": set.len(),
            "chains": set.chains,
            "gate": report,
        });
        write_json(Some(path), &doc)?;
    }
    if args.gate {
        match &report {
            Some(r) if r.pass => {}
            Some(r) => return Err(CliError::gate(r.reasons.join("; "))),
            None => return Err(CliError::gate("too few draws per chain to run diagnostics")),
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CdfInput {
    z: Vec<f64>,
    #[serde(default)]
    gammas: Option<Vec<f64>>,
}

fn parse_gammas(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |what: &str| CliError::usage(format!("gamma grid {spec:?}: {what}"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad("need start <= end and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        [_] => spec.split(',').map(parse).collect(),
        _ => Err(bad("expected start:end:step or a comma-separated list")),
    }
}

pub fn cdf_cmd(args: &CdfArgs) -> CliResult<()> {
    let input: CdfInput = match json_arg(&args.z)? {
        Value::Array(z) => CdfInput { z: serde_json::from_value(Value::Array(z))?, gammas: None },
        other => serde_json::from_value(other)?,
    };
    let gammas = match (&args.gammas, input.gammas) {
        (Some(g), _) => parse_gammas(g)?,
        (None, Some(g)) => g,
        (None, None) => return Err(CliError::usage("no gammas given")),
    };
    let probs = rp_linear_cdf(&input.z, &gammas)?;
    let mut w = csv_sink(args.out.as_deref())?;
    w.write_record(["gamma", "probability"])?;
    for (g, p) in gammas.iter().zip(&probs) {
        w.write_record([num(*g), num(*p)])?;
    }
    w.flush().map_err(|e| io_err(args.out.as_deref(), e))
}

pub fn round_cmd(args: &RoundArgs) -> CliResult<()> {
    let (body, emb) = load_body(&args.body)?.reduced()?;
    let base = load_target(&args.target)?;
    let target = match &emb {
        Some(e) if !base.is_uniform() => TargetDensity::transformed(base, e)?,
        _ => base,
    };
    let kind = if target.is_uniform() { WalkKind::Biw } else { WalkKind::Rehmc };
    let cfg = WalkConfig::new(kind).with_seed(args.seed);
    let rounded = round_isotropic(&body, &target, &cfg, args.max_phases, args.chains)?;
    let embedding = emb.as_ref().map(|e| {
        json!({
            "basis": rows(e.basis()),
            "anchor": e.anchor().iter().collect::<Vec<_>>(),
        })
    });
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "seed": args.seed,
        "dim": body.dim(),
        "converged": rounded.converged,
        "final_ratio": rounded.final_ratio(),
        "phases": rounded.phases,
        "transform": rounded.transform,
        "embedding": embedding,
    });
    write_json(args.out.as_deref(), &doc)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn diagnose_cmd(args: &DiagnoseArgs) -> CliResult<()> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&args.samples)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(&args.samples, io),
            other => CliError::usage(format!("{other:?}")),
        })?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("chain") || headers.len() < 2 {
        return Err(CliError::usage("sample CSV must start with a chain column followed by coordinates"));
    }
    let d = headers.len() - 1;
    let mut by_chain: Vec<(usize, Vec<f64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let chain: usize = rec[0].parse().map_err(|_| CliError::usage(format!("bad chain id {:?}", &rec[0])))?;
        let pos = match by_chain.iter().position(|(c, _)| *c == chain) {
            Some(p) => p,
            None => {
                by_chain.push((chain, Vec::new()));
                by_chain.len() - 1
            }
        };
        for v in rec.iter().skip(1) {
            let x: f64 = v.parse().map_err(|_| CliError::usage(format!("bad value {v:?}")))?;
            by_chain[pos].1.push(x);
        }
    }
    by_chain.sort_by_key(|(c, _)| *c);
    let chains: Vec<DMatrix<f64>> =
        by_chain.iter().map(|(_, v)| DMatrix::from_row_slice(v.len() / d, d, v)).collect();
    let report = gate(&chains, args.dim.unwrap_or(d))?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "chains": chains.len(),
        "draws_per_chain": chains.iter().map(|c| c.nrows()).collect::<Vec<_>>(),
        "report": report,
    });
    write_json(args.out.as_deref(), &doc)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::gate(report.reasons.join("; ")))
    }
}

fn write_backtest(result: &BacktestResult, dir: &Path, stem: &str) -> CliResult<()> {
    write_paths_csv(&result.paths, Some(&result.benchmark), &dir.join(format!("{stem}paths.csv")))?;
    let summary = report(&result.paths, Some(&result.benchmark))?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "sort_factor": result.sort_factor,
        "summary": summary,
        "rebalances": result.records,
        "order": result.paths.order,
    });
    write_json(Some(&dir.join(format!("{stem}summary.json"))), &doc)
}

pub fn backtest_cmd(args: &BacktestArgs) -> CliResult<()> {
    let mut cfg = BacktestConfig::from_toml(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(kind) = args.walk {
        cfg.walk.kind = kind;
    }
    cfg.validate()?;
    let data = MarketData::read_dir(&args.data)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let result = run_backtest(&data, &cfg)?;
    write_backtest(&result, &args.out, "")?;
    if let Some(q) = args.quintiles {
        let weighting = match q {
            QuintileWeighting::Equal => Weighting::Equal,
            QuintileWeighting::Cap => Weighting::Cap,
        };
        write_backtest(&quintile_baseline(&data, &cfg, weighting)?, &args.out, "quintile_")?;
    }
    let failed: Vec<String> = result
        .records
        .iter()
        .filter(|r| r.status == RebalanceStatus::GateFailed)
        .map(|r| r.date.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::gate(format!("diagnostics gate failed at {} rebalance(s): {}", failed.len(), failed.join(", "))))
    }
}

pub fn synth_cmd(args: &SynthArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::usage(format!("synth config: {e}")))?,
        None => SynthConfig::default(),
    };
    if let Some(n) = args.assets {
        cfg.n_assets = n;
    }
    if let Some(y) = args.years {
        cfg.years = y;
    }
    for (name, premium) in &args.premia {
        cfg = cfg.with_premium(name, *premium);
    }
    cfg.seed = args.seed;
    let market = synth_market(&cfg)?;
    market.write_dir(&args.out)?;
    let doc = json!({ "schema_version": SCHEMA_VERSION, "config": cfg });
    write_json(Some(&args.out.join("synth.json")), &doc)
}
