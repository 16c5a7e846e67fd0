//! Small dense solvers: a two-phase tableau simplex for linear programs and a
//! damped-Newton log-barrier method for the ball-constrained Chebyshev problem.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// `max c^T x` subject to `A x <= b`, with `x_j >= 0` unless `free[j]`.
pub fn maximize(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, free: &[bool]) -> LpOutcome {
    let (m, n) = a.shape();
    // Column layout: one column per nonnegative variable, two (plus/minus) per free one.
    let mut col_of = Vec::with_capacity(n);
    let mut ncols = 0;
    for &f in free {
        col_of.push(ncols);
        ncols += if f { 2 } else { 1 };
    }
    let n_art = b.iter().filter(|v| **v < 0.0).count();
    let slack0 = ncols;
    let art0 = slack0 + m;
    let width = art0 + n_art + 1;
    let rhs = width - 1;

    let mut t = Tableau { rows: vec![vec![0.0; width]; m + 1], basis: vec![0; m], rhs };
    let mut art = art0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            let v = sign * a[(i, j)];
            t.rows[i][col_of[j]] = v;
            if free[j] {
                t.rows[i][col_of[j] + 1] = -v;
            }
        }
        t.rows[i][slack0 + i] = sign;
        t.rows[i][rhs] = sign * b[i];
        if sign < 0.0 {
            t.rows[i][art] = 1.0;
            t.basis[i] = art;
            art += 1;
        } else {
            t.basis[i] = slack0 + i;
        }
    }

    if n_art > 0 {
        // Phase one: maximize -sum(artificials).
        let mut obj = vec![0.0; width];
        obj[art0..art0 + n_art].iter_mut().for_each(|v| *v = 1.0);
        t.set_objective(&obj);
        if t.run(art0 + n_art).is_err() {
            return LpOutcome::Infeasible;
        }
        let scale = 1.0 + b.amax();
        if t.rows[m][rhs] < -1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // Drive artificials out of the basis.
        for i in 0..m {
            if t.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                    t.pivot(i, j);
                }
            }
        }
        for row in t.rows.iter_mut() {
            for v in row[art0..art0 + n_art].iter_mut() {
                *v = 0.0;
            }
        }
    }

    let mut obj = vec![0.0; width];
    for j in 0..n {
        obj[col_of[j]] = -c[j];
        if free[j] {
            obj[col_of[j] + 1] = c[j];
        }
    }
    t.set_objective(&obj);
    if t.run(art0).is_err() {
        return LpOutcome::Unbounded;
    }

    let mut cols = vec![0.0; art0];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < art0 {
            cols[bi] = t.rows[i][rhs];
        }
    }
    let x = DVector::from_fn(n, |j, _| {
        let v = cols[col_of[j]];
        if free[j] {
            v - cols[col_of[j] + 1]
        } else {
            v
        }
    });
    let value = c.dot(&x);
    LpOutcome::Optimal { x, value }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    rhs: usize,
}

struct UnboundedDirection;

impl Tableau {
    /// Install a minimization-form cost row (`reduced = cost - c_B B^-1 A`).
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.basis.len();
        let mut obj = cost.to_vec();
        obj[self.rhs] = 0.0;
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (o, r) in obj.iter_mut().zip(self.rows[i].iter()) {
                    *o -= cb * r;
                }
            }
        }
        self.rows[m] = obj;
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
            }
        }
        self.basis[r] = e;
    }

    /// Minimize the installed cost with Bland's rule over the first `ncols` columns.
    fn run(&mut self, ncols: usize) -> Result<(), UnboundedDirection> {
        let m = self.basis.len();
        loop {
            let Some(e) = (0..ncols).find(|&j| self.rows[m][j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][e];
                if a > PIVOT_TOL {
                    let ratio = self.rows[i][self.rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, e),
                None => return Err(UnboundedDirection),
            }
        }
    }
}

/// Solve `max r` s.t. `a_i^T x + r ||a_i|| <= b_i`, `||x|| <= 1 - r` by a
/// log-barrier path-following method. Returns `(x, r)`; `r <= 0` means the
/// polytope and the unit ball have no common interior.
pub fn ball_chebyshev(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    let norms: Vec<f64> = a.row_iter().map(|r| r.norm()).collect();
    let mut r0 = 0.0f64;
    for i in 0..m {
        if norms[i] > 0.0 {
            r0 = r0.min(b[i] / norms[i]);
        }
    }
    // Strictly feasible start for the relaxed problem where r may be negative.
    let mut w = DVector::zeros(n + 1);
    w[n] = r0 - 1.0;

    let barrier = |w: &DVector<f64>, t: f64| -> Option<f64> {
        let x = w.rows(0, n);
        let r = w[n];
        let mut f = -t * r;
        for i in 0..m {
            let s = b[i] - a.row(i).dot(&x.transpose()) - r * norms[i];
            if s <= 0.0 {
                return None;
            }
            f -= s.ln();
        }
        let u = 1.0 - r;
        let q = u * u - x.norm_squared();
        if u <= 0.0 || q <= 0.0 {
            return None;
        }
        Some(f - q.ln())
    };

    let nu = (m + 2) as f64;
    let mut t = 1.0;
    for _outer in 0..60 {
        for _newton in 0..100 {
            let x = w.rows(0, n).into_owned();
            let r = w[n];
            let mut g = DVector::zeros(n + 1);
            let mut h = DMatrix::zeros(n + 1, n + 1);
            g[n] = -t;
            for i in 0..m {
                let s = b[i] - a.row(i).transpose().dot(&x) - r * norms[i];
                let mut ai = DVector::zeros(n + 1);
                ai.rows_mut(0, n).copy_from(&a.row(i).transpose());
                ai[n] = norms[i];
                g += &ai / s;
                h += &ai * ai.transpose() / (s * s);
            }
            let u = 1.0 - r;
            let q = u * u - x.norm_squared();
            let mut dq = DVector::zeros(n + 1);
            dq.rows_mut(0, n).copy_from(&(&x * -2.0));
            dq[n] = -2.0 * u;
            g -= &dq / q;
            h += &dq * dq.transpose() / (q * q);
            for j in 0..n {
                h[(j, j)] += 2.0 / q;
            }
            h[(n, n)] -= 2.0 / q;

            let step = match h.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => match h.clone().lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => break,
                },
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 < 1e-12 {
                break;
            }
            let f0 = barrier(&w, t).expect("iterate stays feasible");
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &w + &step * alpha;
                if let Some(f1) = barrier(&cand, t) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        w = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if nu / t < 1e-10 {
            break;
        }
        t *= 10.0;
    }
    let r = w[n];
    (w.rows(0, n).into_owned(), r)
}
