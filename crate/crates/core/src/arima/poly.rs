//! Root-location checks for lag polynomials.

/// True when every root of `1 - sum_i phi_i z^i` lies strictly outside the
/// unit circle, tested by the Levinson step-down recursion: the polynomial
/// qualifies iff every reflection coefficient has magnitude below one.
pub fn ar_is_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&kappa) = a.last() {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - kappa * kappa;
        let next: Vec<f64> = (0..k - 1).map(|i| (a[i] + kappa * a[k - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

/// True when every root of `1 + sum_i theta_i z^i` lies outside the unit circle.
pub fn ma_is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    ar_is_stationary(&neg)
}

/// Coefficients `a_i` (i >= 1) of `(1 - sum phi_i B^i)(1 - B)^d` written as
/// `1 - sum a_i B^i`.
pub fn integrated_ar(phi: &[f64], d: usize) -> Vec<f64> {
    // full polynomial with leading 1
    let mut poly = vec![1.0];
    poly.extend(phi.iter().map(|p| -p));
    for _ in 0..d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}
