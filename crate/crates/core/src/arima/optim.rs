//! Quasi-Newton (BFGS) minimizer with Armijo backtracking.

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once an accepted step improves the objective by less than this
    /// fraction of its current value.
    pub rel_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("objective is not finite at the initial point")]
pub struct NonFiniteStart;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and its gradient.
///
/// Points where `f` is non-finite are rejected by the line search, so the
/// returned value is always finite and never above the initial value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Result<BfgsOutcome, NonFiniteStart>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(NonFiniteStart);
    }
    let initial_value = fx;
    let outcome = |x: Vec<f64>, value: f64, iterations: usize, converged: bool| BfgsOutcome {
        x,
        value,
        initial_value,
        iterations,
        converged,
    };
    if n == 0 {
        return Ok(outcome(x, fx, 0, true));
    }

    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..n).for_each(|i| h[i * n + i] = 1.0);
    };
    reset(&mut h);
    let mut first_step = true;

    for iter in 0..opts.max_iter {
        if fx == 0.0 || g.iter().all(|v| v.abs() < 1e-14) {
            return Ok(outcome(x, fx, iter, true));
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            reset(&mut h);
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * t * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            // no descent possible at working precision
            return Ok(outcome(x, fx, iter, true));
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if first_step {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                first_step = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        let improvement = fx - fnew;
        x = xn;
        g = gn;
        let prev = fx;
        fx = fnew;
        if improvement <= opts.rel_tol * prev.abs() {
            return Ok(outcome(x, fx, iter + 1, true));
        }
    }
    Ok(outcome(x, fx, opts.max_iter, false))
}
