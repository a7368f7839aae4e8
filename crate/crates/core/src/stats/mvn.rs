use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trivariate normal `N(μ, L·Lᵀ)` stored by its Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct TriNormal {
    pub mean: [f64; 3],
    /// Lower-triangular factor, row-major.
    pub chol: [[f64; 3]; 3],
}

impl TriNormal {
    pub fn new(mean: [f64; 3], chol: [[f64; 3]; 3]) -> Result<Self> {
        let m = TriNormal { mean, chol };
        m.validate()?;
        Ok(m)
    }

    /// Point mass at `mean`; sampling returns `mean` exactly. Not a valid
    /// density.
    pub fn degenerate(mean: [f64; 3]) -> Self {
        TriNormal { mean, chol: [[0.0; 3]; 3] }
    }

    pub fn from_covariance(mean: [f64; 3], cov: [[f64; 3]; 3]) -> Result<Self> {
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::DegenerateModel("covariance is not positive definite".into()));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Self::new(mean, l)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.mean.iter().chain(self.chol.iter().flatten()).all(|v| v.is_finite());
        let lower = self.chol[0][1] == 0.0 && self.chol[0][2] == 0.0 && self.chol[1][2] == 0.0;
        let diag = (0..3).all(|i| self.chol[i][i] > 0.0);
        if finite && lower && diag {
            Ok(())
        } else {
            Err(Error::DegenerateModel(format!("invalid Cholesky factor {:?}", self.chol)))
        }
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let l = &self.chol;
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| l[i][k] * l[j][k]).sum();
            }
        }
        c
    }

    pub fn std_devs(&self) -> [f64; 3] {
        let c = self.covariance();
        [c[0][0].sqrt(), c[1][1].sqrt(), c[2][2].sqrt()]
    }

    /// `det Σ = (∏ diag L)²`.
    pub fn det(&self) -> f64 {
        (self.chol[0][0] * self.chol[1][1] * self.chol[2][2]).powi(2)
    }

    /// `μ + L·z`.
    pub fn transform(&self, z: [f64; 3]) -> [f64; 3] {
        let l = &self.chol;
        [
            self.mean[0] + l[0][0] * z[0],
            self.mean[1] + l[1][0] * z[0] + l[1][1] * z[1],
            self.mean[2] + l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
        ]
    }

    /// Whether every component is above 1e-12 of its mean.
    pub fn admissible(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|i| x[i] > 1e-12 * self.mean[i].abs())
    }

    pub fn log_pdf(&self, x: &[f64; 3]) -> f64 {
        // Forward substitution L·y = x − μ.
        let l = &self.chol;
        let d = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        let y0 = d[0] / l[0][0];
        let y1 = (d[1] - l[1][0] * y0) / l[1][1];
        let y2 = (d[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        let q = y0 * y0 + y1 * y1 + y2 * y2;
        let log_det_half = (l[0][0] * l[1][1] * l[2][2]).ln();
        -1.5 * (2.0 * std::f64::consts::PI).ln() - log_det_half - 0.5 * q
    }
}

pub fn mvn_pdf(model: &TriNormal, x: &[f64; 3]) -> f64 {
    model.log_pdf(x).exp()
}

/// Draw `μ + L·z`, redrawing (at most 100 times) when a component falls
/// below 1e-12 of its mean.
pub fn mvn_sample<R: Rng + ?Sized>(model: &TriNormal, rng: &mut R) -> Result<[f64; 3]> {
    for _ in 0..100 {
        let z = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let x = model.transform(z);
        if model.admissible(&x) {
            return Ok(x);
        }
    }
    Err(Error::DegenerateModel("truncated normal sampling failed 100 times".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn standard_peak() {
        let m = TriNormal::new([5.0, 5.0, 5.0], IDENTITY).unwrap();
        assert_relative_eq!(mvn_pdf(&m, &[5.0, 5.0, 5.0]), 0.063494, max_relative = 1e-5);
    }

    #[test]
    fn determinant_identity() {
        let m = TriNormal::new([0.0; 3], [[2.0, 0.0, 0.0], [0.3, 0.5, 0.0], [-0.1, 0.2, 3.0]]).unwrap();
        let c = m.covariance();
        let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
            + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
        assert_relative_eq!(m.det(), det, max_relative = 1e-12);
        let back = TriNormal::from_covariance([0.0; 3], c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(back.chol[i][j], m.chol[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monotone_along_ray() {
        let m = TriNormal::new([1.0, 2.0, 3.0], [[1.0, 0.0, 0.0], [0.5, 0.7, 0.0], [0.1, -0.3, 0.4]]).unwrap();
        let dir = [0.3, -0.8, 0.5];
        let mut prev = f64::INFINITY;
        for s in 0..50 {
            let t = s as f64 * 0.1;
            let v = mvn_pdf(&m, &[1.0 + t * dir[0], 2.0 + t * dir[1], 3.0 + t * dir[2]]);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn integrates_to_one() {
        // Importance check: uniform proposal over the ±6σ box.
        let m = TriNormal::new([1.0, -2.0, 0.5], [[0.5, 0.0, 0.0], [0.2, 0.3, 0.0], [-0.1, 0.1, 0.2]]).unwrap();
        let sd = m.std_devs();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let vol: f64 = sd.iter().map(|s| 12.0 * s).product();
        let mut acc = 0.0;
        for _ in 0..n {
            let x = [0, 1, 2].map(|i| m.mean[i] + sd[i] * (12.0 * rng.random::<f64>() - 6.0));
            acc += mvn_pdf(&m, &x);
        }
        assert!((acc / n as f64 * vol - 1.0).abs() < 0.03);
    }

    #[test]
    fn sample_covariance() {
        let m = TriNormal::new([10.0; 3], IDENTITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let xs: Vec<[f64; 3]> = (0..n).map(|_| mvn_sample(&m, &mut rng).unwrap()).collect();
        let mean: Vec<f64> = (0..3).map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / n as f64).collect();
        for i in 0..3 {
            for j in 0..3 {
                let c = xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn degenerate_and_seeded() {
        let m = TriNormal::degenerate([1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(mvn_sample(&m, &mut rng).unwrap(), [1.0, 2.0, 3.0]);
        let m = TriNormal::new([4.0; 3], IDENTITY).unwrap();
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..10).map(|_| mvn_sample(&m, &mut r).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..10).map(|_| mvn_sample(&m, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_factor() {
        assert!(TriNormal::new([0.0; 3], [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(TriNormal::new([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }
}
