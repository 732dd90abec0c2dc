//! Small derivative-free minimizers used by the shooting and scanning solvers.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop when the spread of function values across the simplex drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evals: 4000, f_tol: 1e-16, x_tol: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2).
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], opts: SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for k in 0..dim {
        let mut x = x0.to_vec();
        x[k] += steps[k];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = dim + 1;

    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= opts.x_tol || worst - best <= opts.f_tol {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let (worst_x, worst_v) = simplex[dim].clone();
        let reflected = blend(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = blend(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded);
            evals += 1;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst_v {
            let x = blend(&centroid, &reflected, 0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = blend(&centroid, &worst_x, 0.5);
            let v = eval(&x);
            (x, v)
        };
        evals += 1;
        if fc < worst_v.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let x = blend(&anchor, &entry.0, 0.5);
            let v = eval(&x);
            *entry = (x, v);
        }
        evals += dim;
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}

/// Levenberg-Marquardt on a residual vector with a central-difference
/// Jacobian. Returns the point with the smallest `|r|^2` seen.
pub fn levenberg_marquardt<F>(residual: F, x0: &[f64], max_iters: usize, tol: f64) -> Minimum
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut cost = sq(&r);
    let mut evals = 1;
    let mut damping = 1e-3;
    for _ in 0..max_iters {
        if cost <= tol || !cost.is_finite() {
            break;
        }
        let m = r.len();
        let n = x.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let rp = residual(&xp);
            let rm = residual(&xm);
            evals += 2;
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.svd(true, true).solve(&(-&jtr), 1e-14).ok() else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residual(&trial);
            evals += 1;
            let ct = sq(&rt);
            if ct < cost {
                x = trial;
                r = rt;
                let gain = cost - ct;
                cost = ct;
                damping = (damping * 0.3).max(1e-12);
                improved = gain > 0.0;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Minimum { x, value: cost, evals }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= tol || m == a || m == b {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
