//! BFGS quasi-Newton minimizer with a backtracking line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant of the approximate Wolfe test.
    pub sigma: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            c1: 1e-4,
            sigma: 0.9,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `objective` starting from `x0`.
///
/// `objective` returns the value and gradient, or `None` when the point is
/// outside the domain. `h0` is the initial inverse-Hessian approximation and
/// is also the matrix the iteration falls back to after a failed line search.
/// `done(x, value, gradient)` decides convergence.
pub fn minimize<F, C>(
    mut objective: F,
    x0: DVector<f64>,
    h0: DMatrix<f64>,
    opts: &BfgsOptions,
    done: C,
) -> Option<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    C: Fn(&DVector<f64>, f64, &DVector<f64>) -> bool,
{
    let k = x0.len();
    let (mut f, mut g) = objective(&x0)?;
    let mut x = x0;
    let mut h = h0.clone();
    let mut reset_pending = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if done(&x, f, &g) {
            return Some(BfgsOutcome { x, value: f, gradient: g, iterations, converged: true });
        }
        if k == 0 {
            break;
        }

        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h.copy_from(&h0);
            d = -(&h * &g);
            slope = g.dot(&d);
            if !(slope < 0.0) {
                break;
            }
        }

        let noise = 1e-12 * (1.0 + f.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = &x + t * &d;
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite() {
                    let armijo = ft <= f + opts.c1 * t * slope;
                    // Near the optimum function differences drown in rounding;
                    // the directional derivative still carries information.
                    let dslope = gt.dot(&d);
                    let approx_wolfe = ft <= f + noise
                        && dslope >= opts.sigma * slope
                        && dslope <= -(1.0 - 2.0 * opts.c1) * slope;
                    if armijo || approx_wolfe {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if reset_pending {
                break;
            }
            // retry once from the initial curvature model
            h.copy_from(&h0);
            reset_pending = true;
            continue;
        };
        reset_pending = false;
        iterations += 1;

        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (Hy s' + s y'H) + (rho^2 y'Hy + rho) s s'
            h -= rho * (&hy * s.transpose() + &s * hy.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }

    let converged = done(&x, f, &g);
    Some(BfgsOutcome { x, value: f, gradient: g, iterations, converged })
}
