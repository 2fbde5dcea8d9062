//! Derivative-free local search over a box: coordinate descent with
//! shrinking steps and a finite-difference Newton polish.

use nalgebra::{DMatrix, DVector};

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Cell-centred grid with `n[i]` points along axis `i`, in lexicographic order.
    pub fn grid(&self, n: &[usize]) -> Vec<Vec<f64>> {
        let total: usize = n.iter().product();
        (0..total)
            .map(|mut idx| {
                (0..self.dim())
                    .map(|i| {
                        let k = idx % n[i];
                        idx /= n[i];
                        self.lo[i] + (k as f64 + 0.5) / n[i] as f64 * self.width(i)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Evaluation budget of one descent; the Newton polish finishes the job.
const DESCENT_BUDGET: usize = 20_000;

/// Coordinate descent from `x0` with initial steps `step`.
///
/// Each sweep tries `x_i +- step_i` for every axis and keeps strict
/// improvements. An axis that improves grows its step by half (up to the
/// initial step) so the search can follow curved valleys, and an axis that
/// fails halves it. Stops when every step is below `min_rel` times its axis
/// width, after a sweep that improved by less than `improvement_tol` at the
/// finest scale, or when the evaluation budget is spent.
pub fn coordinate_descent(
    f: &mut dyn FnMut(&[f64]) -> f64,
    bounds: &Bounds,
    x0: &[f64],
    step: &[f64],
    improvement_tol: f64,
    min_rel: f64,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut h = step.to_vec();
    let mut evals = 1;
    loop {
        let mut improved = false;
        let before = fx;
        for i in 0..x.len() {
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * h[i];
                bounds.clamp(&mut y);
                if y[i] == x[i] {
                    continue;
                }
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
            }
            if moved {
                h[i] = (1.5 * h[i]).min(step[i]);
                improved = true;
            } else {
                h[i] *= 0.5;
            }
        }
        let fine = (0..x.len()).all(|i| h[i] <= min_rel * bounds.width(i).max(1e-300));
        let stalled = improved && before - fx < improvement_tol && h.iter().all(|&hi| hi < 1e-6);
        if fine || stalled || evals >= DESCENT_BUDGET {
            break;
        }
    }
    (x, fx)
}

/// Newton iterations on finite-difference gradient and Hessian with
/// backtracking; a step is accepted only if it lowers `f`.
pub fn newton_polish(
    f: &mut dyn FnMut(&[f64]) -> f64,
    bounds: &Bounds,
    x0: &[f64],
    h: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() || d == 0 {
        return (x, fx);
    }
    let shifted = |x: &[f64], moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, dv) in moves {
            y[i] += dv;
        }
        y
    };
    for _ in 0..max_iter {
        let mut g = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        let mut ok = true;
        for i in 0..d {
            let fp = f(&shifted(&x, &[(i, h)]));
            let fm = f(&shifted(&x, &[(i, -h)]));
            ok &= fp.is_finite() && fm.is_finite();
            g[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * fx + fm) / (h * h);
            for j in 0..i {
                let fpp = f(&shifted(&x, &[(i, h), (j, h)]));
                let fpm = f(&shifted(&x, &[(i, h), (j, -h)]));
                let fmp = f(&shifted(&x, &[(i, -h), (j, h)]));
                let fmm = f(&shifted(&x, &[(i, -h), (j, -h)]));
                ok &= fpp.is_finite() && fpm.is_finite() && fmp.is_finite() && fmm.is_finite();
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        if !ok {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => {
                // Not positive definite: scaled gradient step.
                let scale = (0..d).map(|i| hess[(i, i)].abs()).fold(1e-12, f64::max);
                -&g / scale
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut y: Vec<f64> = (0..d).map(|i| x[i] + alpha * step[i]).collect();
            bounds.clamp(&mut y);
            let fy = f(&y);
            if fy < fx {
                let moved = (0..d).map(|i| (y[i] - x[i]).abs()).fold(0.0, f64::max);
                x = y;
                fx = fy;
                accepted = moved > 1e-13;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, fx)
}
