//! Small numerical optimizers: golden-section search and Levenberg–Marquardt.

use crate::error::{Error, Result};

/// Minimizes a unimodal `f` on [a, b]; stops when the bracket is below
/// `rel_tol` relative to its midpoint. Returns (x, f(x)).
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if (b - a).abs() <= rel_tol * (0.5 * (a + b)).abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Solves the symmetric positive-definite system `a·x = b` by Cholesky.
/// `a` is row-major n×n. Returns None when not positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let l = cholesky(a, n)?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = cholesky_solve(a, &e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step of the finite-difference Jacobian, floored at 1e-3·fd_step
    /// absolute; parameters are expected to be scaled to order one.
    pub fd_step: f64,
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            fd_step: 1e-6,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// (JᵀJ)⁻¹ at the solution, row-major; None if singular.
    pub jtj_inverse: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and a forward-difference
/// Jacobian. `project` maps a trial point back into the feasible region.
pub fn levenberg_marquardt<R, P>(
    mut residuals: R,
    mut project: P,
    x0: &[f64],
    opts: &LmOptions,
) -> Result<LmResult>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);
    let mut r = residuals(&x);
    let cost_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::FitFailure {
            iterations: 0,
            cost,
            reason: "non-finite residuals at the starting point".into(),
        });
    }
    let mut mu = 1e-3;
    let mut jac = vec![0.0; r.len() * n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        jacobian(&mut residuals, &x, &r, opts.fd_step, &mut jac);
        let (jtj, jtr) = normal_equations(&jac, &r, n);
        let grad_norm = jtr.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if grad_norm <= opts.tolerance * cost.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i * n + i] += mu * jtj[i * n + i].max(1e-300);
            }
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = cholesky_solve(&a, &neg) else {
                mu *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            project(&mut trial);
            let rt = residuals(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct < cost {
                let rel_change = (cost - ct) / cost;
                let step_small = x
                    .iter()
                    .zip(&trial)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1e-300));
                x = trial;
                r = rt;
                cost = ct;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel_change < opts.tolerance || step_small {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No downhill step exists at any damping: stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure {
            iterations,
            cost,
            reason: "iteration limit reached".into(),
        });
    }
    jacobian(&mut residuals, &x, &r, opts.fd_step, &mut jac);
    let (jtj, _) = normal_equations(&jac, &r, n);
    Ok(LmResult {
        jtj_inverse: spd_inverse(&jtj, n),
        params: x,
        cost,
        iterations,
        residuals: r,
    })
}

fn jacobian<R: FnMut(&[f64]) -> Vec<f64>>(f: &mut R, x: &[f64], r0: &[f64], h: f64, out: &mut [f64]) {
    let n = x.len();
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * x[j].abs().max(1e-3);
        xp[j] = x[j] + step;
        let rp = f(&xp);
        for (i, (a, b)) in rp.iter().zip(r0).enumerate() {
            out[i * n + j] = (a - b) / step;
        }
        xp[j] = x[j];
    }
}

fn normal_equations(jac: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for (i, ri) in r.iter().enumerate() {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            jtr[a] += row[a] * ri;
            for b in 0..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}
