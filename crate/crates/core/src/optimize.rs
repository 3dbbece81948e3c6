//! Small derivative-free and least-squares minimizers.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the simplex's function spread falls below this.
    pub ftol: f64,
    /// Stop when the simplex diameter falls below this.
    pub xtol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 2000, ftol: 1e-14, xtol: 1e-10 }
    }
}

/// Minimizes `f` from `x0` with an initial simplex of edge `step`.
/// Non-finite values are treated as `+inf`, so infeasible points can be
/// signalled by returning NaN.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, opts: NelderMeadOptions) -> (Vec<f64>, f64) {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut evals = n + 1;
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        // a flat spread alone is not enough: symmetric simplices can tie
        let flat = spread.is_finite() && spread <= opts.ftol * (1.0 + values[0].abs());
        if diameter <= opts.xtol || (flat && diameter <= 1e-6) {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|x| x[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };

        let xr = along(-alpha);
        let fr = eval(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(-gamma);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n).map(|k| simplex[0][k] + sigma * (simplex[i][k] - simplex[0][k])).collect();
                    values[i] = eval(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))).unwrap_or(0);
    (simplex[best].clone(), values[best])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged once the squared residual norm is below this.
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 200, tol: 1e-30, fd_step: 1e-7 }
    }
}

/// Levenberg–Marquardt on the residual map `r`, with a central-difference
/// Jacobian. Returns the final point and its squared residual norm.
pub fn levenberg_marquardt(r: impl Fn(&DVector<f64>) -> DVector<f64>, x0: &DVector<f64>, opts: LmOptions) -> (DVector<f64>, f64) {
    let n = x0.len();
    let mut x = x0.clone();
    let mut res = r(&x);
    let mut cost = res.norm_squared();
    if !cost.is_finite() {
        return (x, f64::INFINITY);
    }
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iter {
        if cost <= opts.tol {
            break;
        }
        let m = res.len();
        let mut jac = DMatrix::zeros(m, n);
        for j in 0..n {
            let h = opts.fd_step * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            jac.set_column(j, &((r(&xp) - r(&xm)) / (2.0 * h)));
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &res;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.lu().solve(&grad) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x - step;
            let trial_res = r(&trial);
            let trial_cost = trial_res.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                x = trial;
                res = trial_res;
                cost = trial_cost;
                lambda = (lambda * 0.2).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}
