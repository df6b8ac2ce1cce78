//! Binary cross-entropy supervision with side-output weighting.

use crate::error::{Error, Result};
use crate::metrics::{GroundTruthMap, SaliencyMap};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub const BCE_EPS: f64 = 1e-7;

fn check(p: &SaliencyMap, g: &GroundTruthMap) -> Result<()> {
    if p.height() != g.height() || p.width() != g.width() {
        return Err(Error::shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            p.height(),
            p.width(),
            g.height(),
            g.width()
        )));
    }
    Ok(())
}

fn clamp(v: f64) -> f64 {
    v.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// Unaveraged loss of every pixel.
pub fn bce_per_pixel(p: &SaliencyMap, g: &GroundTruthMap) -> Result<Vec<f64>> {
    check(p, g)?;
    Ok(p.data()
        .iter()
        .zip(g.data())
        .map(|(&v, &t)| {
            let c = clamp(v);
            if t {
                -c.ln()
            } else {
                -(1.0 - c).ln()
            }
        })
        .collect())
}

pub fn bce_loss(p: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    let per = bce_per_pixel(p, g)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// `dL/dP` in raster order, evaluated on the clamped probabilities.
pub fn bce_grad(p: &SaliencyMap, g: &GroundTruthMap) -> Result<Vec<f64>> {
    check(p, g)?;
    let n = p.data().len() as f64;
    Ok(p.data()
        .iter()
        .zip(g.data())
        .map(|(&v, &t)| {
            let c = clamp(v);
            let target = if t { 1.0 } else { 0.0 };
            (c - target) / (c * (1.0 - c)) / n
        })
        .collect())
}

/// Weights of the three side-output losses.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: [f64; 3],
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: [1.0; 3] }
    }
}

impl LossWeights {
    pub fn new(alpha: [f64; 3]) -> Result<Self> {
        let w = LossWeights { alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().all(|a| a.is_finite() && *a >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "loss weights must be finite and nonnegative, got {:?}",
                self.alpha
            )))
        }
    }
}

pub fn total_loss(dominant: f64, sides: [f64; 3], w: &LossWeights) -> f64 {
    dominant + sides.iter().zip(w.alpha).map(|(l, a)| a * l).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::rng::ParamRng;

    #[test]
    fn half_prediction_costs_ln2() {
        let g = GroundTruthMap::new(3, 3, vec![true, false, true, false, false, true, true, true, false])
            .unwrap();
        let p = SaliencyMap::new(3, 3, vec![0.5; 9]).unwrap();
        assert!((bce_loss(&p, &g).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_costs_clamp_only() {
        let g = GroundTruthMap::new(2, 2, vec![true, false, false, true]).unwrap();
        let l = bce_loss(&g.to_saliency(), &g).unwrap();
        assert!((l - (-(1.0 - BCE_EPS).ln())).abs() < 1e-15);
        assert!(l < 2e-7);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ParamRng::new(11, "bce");
        for _ in 0..50 {
            let g: Vec<bool> = (0..16).map(|_| rng.coin(0.5)).collect();
            let p: Vec<f64> = (0..16).map(|_| rng.uniform_f64(0.05, 0.95)).collect();
            let gm = GroundTruthMap::new(4, 4, g.clone()).unwrap();
            let grad = bce_grad(&SaliencyMap::new(4, 4, p.clone()).unwrap(), &gm).unwrap();
            let fd = oracle::finite_difference_gradient(|x| oracle::bce_naive(x, &g, BCE_EPS), &p, 1e-6);
            for (a, b) in grad.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_is_mean_of_pixels_and_nonnegative() {
        let mut rng = ParamRng::new(12, "bce-mean");
        for _ in 0..50 {
            let g = GroundTruthMap::new(5, 3, (0..15).map(|_| rng.coin(0.3)).collect()).unwrap();
            let p = SaliencyMap::new(5, 3, (0..15).map(|_| rng.uniform_f64(0.0, 1.0)).collect())
                .unwrap();
            let l = bce_loss(&p, &g).unwrap();
            let per = bce_per_pixel(&p, &g).unwrap();
            assert!(l >= 0.0);
            assert!((l - per.iter().sum::<f64>() / 15.0).abs() < 1e-9);
            assert!((l - oracle::bce_naive(p.data(), g.data(), BCE_EPS)).abs() < 1e-12);
        }
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights::default();
        assert!((total_loss(0.1, [0.2, 0.3, 0.4], &w) - 1.0).abs() < 1e-12);
        assert_eq!(total_loss(0.7, [0.0; 3], &w), 0.7);
        assert_eq!(total_loss(0.7, [5.0; 3], &LossWeights::new([0.0; 3]).unwrap()), 0.7);
        assert!(LossWeights::new([1.0, -0.1, 0.0]).is_err());
    }

    #[test]
    fn mismatched_dims_rejected() {
        let p = SaliencyMap::new(2, 2, vec![0.5; 4]).unwrap();
        let g = GroundTruthMap::new(1, 4, vec![true; 4]).unwrap();
        assert!(bce_loss(&p, &g).is_err());
        assert!(bce_grad(&p, &g).is_err());
    }
}
