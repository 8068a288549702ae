//! Student's t distribution: CDF and quantile through the regularized
//! incomplete beta function.

use statrs::function::beta::beta_reg;

/// `P(T <= t)` for Student's t with `dof` degrees of freedom.
pub fn cdf(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of `x -> I_x(a, b)` on `[0, 1]`.
///
/// `I_x(a, b)` is monotone increasing in `x`; bisection runs until the
/// bracket stops shrinking at `f64` resolution.
pub fn inverse_beta_reg(a: f64, b: f64, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile function of Student's t.
pub fn quantile(p: f64, dof: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if p == 0.5 {
        return 0.0;
    }
    let upper = p > 0.5;
    // two-sided tail mass beyond |t|
    let tail = 2.0 * if upper { 1.0 - p } else { p };
    let x = inverse_beta_reg(dof / 2.0, 0.5, tail);
    let t = (dof * (1.0 - x) / x).sqrt();
    if upper {
        t
    } else {
        -t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_is_symmetric() {
        for &dof in &[1.0, 3.0, 30.0] {
            for &t in &[0.1, 1.0, 2.5] {
                assert_relative_eq!(cdf(t, dof) + cdf(-t, dof), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cauchy_closed_form() {
        // dof = 1 is the standard Cauchy distribution
        for &t in &[-3.0, -0.5, 0.0, 0.7, 12.0] {
            let expected = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert_relative_eq!(cdf(t, 1.0), expected, epsilon = 1e-13);
        }
        assert_relative_eq!(quantile(0.975, 1.0), f64::tan(std::f64::consts::PI * 0.475), max_relative = 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &dof in &[1.0, 2.0, 7.0, 50.0, 1000.0] {
            for &p in &[0.6, 0.8, 0.85, 0.975, 0.999] {
                let t = quantile(p, dof);
                assert_relative_eq!(cdf(t, dof), p, epsilon = 1e-12);
                assert_relative_eq!(quantile(1.0 - p, dof), -t, max_relative = 1e-10);
            }
        }
    }
}
