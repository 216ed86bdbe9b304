//! Training objective.

use crate::error::{Error, Result};
use crate::tensor::Var;

/// Mean absolute deviation over all entries, as a tape scalar. Shapes must
/// match exactly; the subgradient at exact ties is 0.
pub fn mae_loss(prediction: &Var, target: &Var) -> Result<Var> {
    if prediction.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mae_loss",
            lhs: prediction.shape(),
            rhs: target.shape(),
        });
    }
    let numel = prediction.numel() as f64;
    Ok(prediction
        .sub(target)?
        .abs()
        .sum_all()
        .affine(1.0 / numel, 0.0))
}
