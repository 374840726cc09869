//! Conditional sum of squares for ARMA(p, q) with an optional constant.
//!
//! The first `p` observations are conditioned on, so innovations are
//! defined from index `p`; every pre-sample innovation is zero. Parameter
//! vectors are laid out as `[c, phi_1..phi_p, theta_1..theta_q]`, with `c`
//! omitted when the constant is excluded.

/// Parameter layout for an ARMA(p, q) objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmaShape {
    pub p: usize,
    pub q: usize,
    pub include_constant: bool,
}

impl ArmaShape {
    pub fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.include_constant)
    }

    /// Splits a parameter vector into `(c, phi, theta)`.
    pub fn split<'a>(&self, params: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter count");
        let off = usize::from(self.include_constant);
        let c = if self.include_constant { params[0] } else { 0.0 };
        (c, &params[off..off + self.p], &params[off + self.p..])
    }
}

/// Innovations for the differenced series `w`; entries before `p` are zero.
pub fn residuals(w: &[f64], shape: ArmaShape, params: &[f64]) -> Vec<f64> {
    let (c, phi, theta) = shape.split(params);
    let mut e = vec![0.0; w.len()];
    for t in shape.p..w.len() {
        let mut pred = c;
        for (i, phi_i) in phi.iter().enumerate() {
            pred += phi_i * w[t - i - 1];
        }
        for (j, theta_j) in theta.iter().enumerate() {
            if t > j {
                pred += theta_j * e[t - j - 1];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

pub fn css(w: &[f64], shape: ArmaShape, params: &[f64]) -> f64 {
    residuals(w, shape, params).iter().map(|e| e * e).sum()
}

/// CSS and its analytic gradient.
///
/// Each innovation's sensitivity obeys the same MA recursion as the
/// innovations themselves: `de_t = -x_t - sum_j theta_j de_{t-j}`, where
/// `x_t` is 1 for the constant, `w_{t-i}` for `phi_i` and `e_{t-k}` for
/// `theta_k`.
pub fn css_with_gradient(w: &[f64], shape: ArmaShape, params: &[f64]) -> (f64, Vec<f64>) {
    let (_, _, theta) = shape.split(params);
    let k = shape.n_params();
    let off = usize::from(shape.include_constant);
    let e = residuals(w, shape, params);
    let n = w.len();
    let mut de = vec![0.0; n * k];
    let mut grad = vec![0.0; k];
    let mut value = 0.0;
    for t in shape.p..n {
        let row = t * k;
        if shape.include_constant {
            de[row] = -1.0;
        }
        for i in 0..shape.p {
            de[row + off + i] = -w[t - i - 1];
        }
        for kk in 0..shape.q {
            if t > kk {
                de[row + off + shape.p + kk] = -e[t - kk - 1];
            }
        }
        for (j, theta_j) in theta.iter().enumerate() {
            if t > j {
                let prev = (t - j - 1) * k;
                for b in 0..k {
                    de[row + b] -= theta_j * de[prev + b];
                }
            }
        }
        value += e[t] * e[t];
        for b in 0..k {
            grad[b] += 2.0 * e[t] * de[row + b];
        }
    }
    (value, grad)
}
