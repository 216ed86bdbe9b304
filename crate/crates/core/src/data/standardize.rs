//! Per-channel affine scaling fit on the training segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population mean and standard deviation per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on values laid out `[..., channels]` row-major, e.g. a
    /// `[steps, nodes, channels]` block flattened. Uses the population
    /// standard deviation.
    pub fn fit(values: &[f64], channels: usize) -> Result<Self> {
        if channels == 0 || values.is_empty() || !values.len().is_multiple_of(channels) {
            return Err(Error::Data(format!(
                "cannot fit standardizer on {} values with {channels} channels",
                values.len()
            )));
        }
        let per_channel = (values.len() / channels) as f64;
        let mut mean = vec![0.0; channels];
        for (i, v) in values.iter().enumerate() {
            mean[i % channels] += v;
        }
        for m in &mut mean {
            *m /= per_channel;
        }
        let mut var = vec![0.0; channels];
        for (i, v) in values.iter().enumerate() {
            let d = v - mean[i % channels];
            var[i % channels] += d * d;
        }
        let std: Vec<f64> = var.iter().map(|v| (v / per_channel).sqrt()).collect();
        if let Some(c) = std.iter().position(|&s| s < 1e-8) {
            return Err(Error::Data(format!(
                "constant series: channel {c} has zero spread"
            )));
        }
        Ok(Standardizer { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, values: &mut [f64]) -> Result<()> {
        self.check_layout(values.len())?;
        let c = self.channels();
        for (i, v) in values.iter_mut().enumerate() {
            *v = (*v - self.mean[i % c]) / self.std[i % c];
        }
        Ok(())
    }

    pub fn invert_in_place(&self, values: &mut [f64]) -> Result<()> {
        self.check_layout(values.len())?;
        let c = self.channels();
        for (i, v) in values.iter_mut().enumerate() {
            *v = *v * self.std[i % c] + self.mean[i % c];
        }
        Ok(())
    }

    fn check_layout(&self, len: usize) -> Result<()> {
        if !len.is_multiple_of(self.channels()) {
            return Err(Error::Data(format!(
                "{len} values do not tile {} channels",
                self.channels()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_point_oracle() {
        // mean 2, population std sqrt(2/3).
        let s = Standardizer::fit(&[1.0, 2.0, 3.0], 1).unwrap();
        assert!((s.mean[0] - 2.0).abs() < 1e-15);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let mut v = [1.0, 2.0, 3.0];
        s.apply_in_place(&mut v).unwrap();
        assert!((v[0] + 1.224745).abs() < 1e-6);
        assert!(v[1].abs() < 1e-15);
        assert!((v[2] - 1.224745).abs() < 1e-6);
    }

    #[test]
    fn constant_channel_is_rejected() {
        match Standardizer::fit(&[5.0, 5.0, 5.0], 1) {
            Err(Error::Data(msg)) => assert!(msg.contains("constant series")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn channels_fit_independently() {
        // Channel 0: 1,3 -> mean 2, std 1. Channel 1: 10,30 -> mean 20, std 10.
        let s = Standardizer::fit(&[1.0, 10.0, 3.0, 30.0], 2).unwrap();
        assert_eq!(s.mean, vec![2.0, 20.0]);
        assert_eq!(s.std, vec![1.0, 10.0]);
    }

    #[test]
    fn fit_rejects_bad_layout() {
        assert!(Standardizer::fit(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(Standardizer::fit(&[], 1).is_err());
        assert!(Standardizer::fit(&[1.0], 0).is_err());
    }

    #[test]
    fn standardized_fit_data_has_zero_mean_unit_std() {
        let values: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() * 30.0 + 100.0).collect();
        let s = Standardizer::fit(&values, 1).unwrap();
        let mut scaled = values.clone();
        s.apply_in_place(&mut scaled).unwrap();
        let n = scaled.len() as f64;
        let mean: f64 = scaled.iter().sum::<f64>() / n;
        let var: f64 = scaled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn invert_undoes_apply(
            values in proptest::collection::vec(-1e4f64..1e4, 2..60),
        ) {
            prop_assume!(Standardizer::fit(&values, 1).is_ok());
            let s = Standardizer::fit(&values, 1).unwrap();
            let mut work = values.clone();
            s.apply_in_place(&mut work).unwrap();
            s.invert_in_place(&mut work).unwrap();
            for (a, b) in work.iter().zip(&values) {
                prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
