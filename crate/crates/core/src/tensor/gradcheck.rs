//! Central finite-difference gradient checking.

use super::Tensor;

/// Default probe step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Magnitude below which gradients are compared absolutely rather than
/// relatively.
pub const GRAD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, GRAD_FLOOR)`.
    pub max_rel_error: f64,
    /// `(operand, element)` where the largest error occurred.
    pub worst: (usize, usize),
    pub tolerance: f64,
    pub checked: usize,
    pub passed: bool,
}

/// Compares `analytic[k]` with central differences of the scalar function
/// `loss` with respect to every element of `inputs[k]`.
pub fn finite_difference_check<F>(
    loss: F,
    inputs: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    step: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: Fn(&[Tensor<f64>]) -> f64,
{
    assert_eq!(inputs.len(), analytic.len(), "one analytic gradient per input");
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        tolerance,
        checked: 0,
        passed: true,
    };
    for (k, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.dims(), inputs[k].dims(), "gradient {k} has the wrong shape");
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            probe[k].data_mut()[i] = orig + step;
            let plus = loss(&probe);
            probe[k].data_mut()[i] = orig - step;
            let minus = loss(&probe);
            probe[k].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst = (k, i);
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    report
}

/// `sum(a * b)`, the scalar used to turn a tensor-valued op into a loss.
pub fn weighted_sum(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratic() {
        let x = Tensor::from_slice(&[1.0, -2.0, 0.5]);
        let grad = x.map(|v| 2.0 * v);
        let report = finite_difference_check(
            |t| t[0].data().iter().map(|v| v * v).sum(),
            &[x],
            &[grad],
            DEFAULT_STEP,
            1e-8,
        );
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checked, 3);
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let x = Tensor::from_slice(&[1.0, 2.0]);
        let wrong = Tensor::from_slice(&[1.0, 1.0]);
        let report = finite_difference_check(
            |t| t[0].data().iter().map(|v| v * v).sum(),
            &[x],
            &[wrong],
            DEFAULT_STEP,
            1e-4,
        );
        assert!(!report.passed);
        assert_eq!(report.worst, (0, 1));
    }
}
