use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `theta`: independent oracle for
/// every analytic gradient in this crate.
pub fn finite_diff_gradient<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::OracleFailure(format!(
                "non-finite objective at coordinate {i}: f(+h)={up}, f(-h)={down}"
            )));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// `max_i |a_i - b_i| / max(1e-6, |a_i|, |b_i|)`. The absolute floor makes
/// mathematically-zero gradients compare by absolute size; central
/// differences cannot resolve anything below ~1e-11 anyway.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_point_of_quadratic_is_zero() {
        let g = finite_diff_gradient(|t| t.iter().map(|x| x * x).sum(), &[0.0; 4], 1e-5).unwrap();
        for v in g {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn exact_on_linear_functions() {
        let slope = [1.5, -2.0, 0.25];
        let f = |t: &[f64]| t.iter().zip(&slope).map(|(x, s)| x * s).sum::<f64>();
        let g = finite_diff_gradient(f, &[0.3, 0.7, -1.1], 1e-5).unwrap();
        for (got, want) in g.iter().zip(&slope) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_oracle_failure_on_non_finite_objective() {
        // ln is NaN at the negative probe point.
        let f = |t: &[f64]| t[0].ln();
        assert!(matches!(
            finite_diff_gradient(f, &[0.0], 1e-5),
            Err(Error::OracleFailure(_))
        ));
    }
}
