//! Finite-difference verification of the backward pass.
//!
//! The numeric side never touches the tape's gradient code: it re-runs the
//! forward pass with perturbed copies of each parameter, so it is an
//! independent oracle for the analytic gradients.

use crate::error::{Error, Result};
use crate::model::{mount, SgruParams};
use crate::tensor::{Tape, Tensor};

pub const DEFAULT_CHECK_EPSILON: f64 = 1e-5;

/// Scale-free discrepancy between an analytic and a numeric derivative.
/// The additive floor keeps tiny gradients (saturated activations) from
/// amplifying finite-difference noise into spurious failures while still
/// exposing sign flips and dropped terms.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-3)
}

/// Worst relative error over one parameter tensor.
#[derive(Debug, Clone)]
pub struct GroupReport {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

fn objective(params: &SgruParams, input: &Tensor) -> Result<f64> {
    let tape = Tape::new();
    let out = mount(&tape, params).forward(input)?;
    Ok(out.data().iter().sum())
}

/// Central-difference check of every parameter element against the tape
/// gradients of `sum(forward(input))`. Returns one report per leaf tensor,
/// in registration order.
pub fn check_model_gradients(
    params: &SgruParams,
    input: &Tensor,
    epsilon: f64,
) -> Result<Vec<GroupReport>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "gradient check epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let tape = Tape::new();
    let model = mount(&tape, params);
    model.forward(input)?.sum_all().backward()?;
    let analytic: Vec<(String, Vec<f64>)> = model
        .leaves()
        .iter()
        .map(|(name, var)| {
            let grad = var
                .grad()
                .ok_or_else(|| Error::Graph(format!("no gradient recorded for {name}")))?;
            Ok((name.clone(), grad))
        })
        .collect::<Result<_>>()?;

    let mut work = params.clone();
    let leaf_count = analytic.len();
    let mut reports = Vec::with_capacity(leaf_count);
    for (li, (name, grads)) in analytic.iter().enumerate() {
        let mut max_rel_err: f64 = 0.0;
        for (ei, &analytic_grad) in grads.iter().enumerate() {
            let base = work.leaves()[li].1.data()[ei];
            work.leaves_mut()[li].1.data_mut()[ei] = base + epsilon;
            let plus = objective(&work, input)?;
            work.leaves_mut()[li].1.data_mut()[ei] = base - epsilon;
            let minus = objective(&work, input)?;
            work.leaves_mut()[li].1.data_mut()[ei] = base;
            let numeric = (plus - minus) / (2.0 * epsilon);
            max_rel_err = max_rel_err.max(relative_error(analytic_grad, numeric));
        }
        reports.push(GroupReport {
            name: name.clone(),
            max_rel_err,
            checked: grads.len(),
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelDims, Variant};

    fn tiny_dims() -> ModelDims {
        ModelDims {
            input_steps: 2,
            output_steps: 2,
            num_nodes: 2,
            input_channels: 1,
            output_channels: 1,
            adjacency_dim: 2,
            embed_dim: 2,
            hidden_dim: 2,
        }
    }

    fn tiny_input(dims: &ModelDims) -> Tensor {
        let numel = dims.input_steps * dims.num_nodes * dims.input_channels;
        let data: Vec<f64> = (0..numel).map(|i| 0.3 * (i as f64) - 0.4).collect();
        Tensor::new(
            vec![dims.input_steps, dims.num_nodes, dims.input_channels],
            data,
        )
        .unwrap()
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        // Sign flips stand out even for small magnitudes.
        assert!(relative_error(0.01, -0.01) > 0.6);
        // Noise far below the floor is forgiven.
        assert!(relative_error(1e-9, 3e-9) < 1e-5);
        let e = relative_error(2.0, 1.0);
        assert!((e - 1.0 / 3.000999999).abs() < 1e-6);
    }

    #[test]
    fn tiny_model_gradients_match_finite_differences() {
        let dims = tiny_dims();
        let input = tiny_input(&dims);
        for variant in [Variant::Simple, Variant::Sgru] {
            let params = SgruParams::init_seeded(variant, dims, 17).unwrap();
            let reports =
                check_model_gradients(&params, &input, DEFAULT_CHECK_EPSILON).unwrap();
            assert_eq!(reports.len(), params.leaves().len());
            for r in &reports {
                assert!(
                    r.max_rel_err < 1e-4,
                    "{variant}: {} rel err {}",
                    r.name,
                    r.max_rel_err
                );
            }
        }
    }

    #[test]
    fn broken_gradient_is_detected() {
        // Scaling one analytic gradient must push its group over tolerance,
        // which we simulate by checking a deliberately mismatched epsilon
        // against a sabotaged parameter copy instead: perturb the forward
        // by replacing a weight with an unrelated value after the analytic
        // pass would have run. The cheap equivalent: compare analytic grads
        // of one parameter set against numeric grads of another.
        let dims = tiny_dims();
        let input = tiny_input(&dims);
        let params = SgruParams::init_seeded(Variant::Simple, dims, 3).unwrap();
        let tape = Tape::new();
        let model = mount(&tape, &params);
        model.forward(&input).unwrap().sum_all().backward().unwrap();
        let honest = model.leaves()[2].1.grad().unwrap();

        let mut other = params.clone();
        for (_, tensor) in other.leaves_mut() {
            for v in tensor.data_mut() {
                *v = -*v * 1.7 + 0.05;
            }
        }
        let eps = DEFAULT_CHECK_EPSILON;
        let mut worst: f64 = 0.0;
        for (ei, &honest_grad) in honest.iter().enumerate() {
            let base = other.leaves()[2].1.data()[ei];
            other.leaves_mut()[2].1.data_mut()[ei] = base + eps;
            let plus = objective(&other, &input).unwrap();
            other.leaves_mut()[2].1.data_mut()[ei] = base - eps;
            let minus = objective(&other, &input).unwrap();
            other.leaves_mut()[2].1.data_mut()[ei] = base;
            worst = worst.max(relative_error(honest_grad, (plus - minus) / (2.0 * eps)));
        }
        assert!(worst > 1e-2, "mismatched parameters should disagree: {worst}");
    }

    #[test]
    fn invalid_epsilon_is_rejected() {
        let dims = tiny_dims();
        let params = SgruParams::init_seeded(Variant::Simple, dims, 1).unwrap();
        let input = tiny_input(&dims);
        assert!(check_model_gradients(&params, &input, 0.0).is_err());
        assert!(check_model_gradients(&params, &input, f64::NAN).is_err());
    }
}
