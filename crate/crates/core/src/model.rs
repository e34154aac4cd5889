//! System model: dimensions, covariance constructions, the summation matrix
//! `Q = [I, ..., I]`, the block mask, and nomographic pre/post-processing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, RealMatrix};

/// Dimensions and scalar parameters of one AirComp system.
///
/// `n` measurements per node, `m` transmit antennas per node, `r` receive
/// antennas at the aggregator and `k` nodes. The stacked source has length
/// `n*k`, the precoder is `(m*k) x (n*k)` and the channel is `r x (m*k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub p0: f64,
    pub snr_db: f64,
    pub rho_data: f64,
    pub rho_noise: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n: 8,
            m: 2,
            r: 16,
            k: 30,
            p0: 10.0,
            snr_db: 25.0,
            rho_data: 0.8,
            rho_noise: 0.5,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n", self.n), ("m", self.m), ("r", self.r), ("K", self.k)] {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be at least 1")));
            }
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(Error::Validation(format!("p0 must be positive, got {}", self.p0)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Validation("snr_db must be finite".into()));
        }
        check_rho("rho_data", self.rho_data)?;
        check_rho("rho_noise", self.rho_noise)?;
        Ok(())
    }

    /// Length of the stacked source vector, `nK`.
    pub fn source_dim(&self) -> usize {
        self.n * self.k
    }

    /// Total transmit antennas, `mK`.
    pub fn transmit_dim(&self) -> usize {
        self.m * self.k
    }

    /// Noise power `Tr[S]` implied by `P0` and the SNR.
    pub fn noise_power(&self) -> f64 {
        self.p0 / 10f64.powf(self.snr_db / 10.0)
    }
}

fn check_rho(name: &str, rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must lie in [0, 1), got {rho}")))
    }
}

/// Data and noise covariances of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub data_cov: RealMatrix,
    pub noise_cov: ComplexMatrix,
}

impl CovariancePair {
    pub fn for_config(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            data_cov: build_exponential_covariance(config.source_dim(), config.rho_data, 1.0)?,
            noise_cov: build_noise_covariance(config)?,
        })
    }
}

/// Toeplitz matrix with entries `scale * rho^|i-j|`.
pub fn build_exponential_covariance(size: usize, rho: f64, scale: f64) -> Result<RealMatrix> {
    check_rho("rho", rho)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Validation(format!("scale must be positive, got {scale}")));
    }
    Ok(RealMatrix::from_fn(size, size, |i, j| {
        scale * rho.powi(i.abs_diff(j) as i32)
    }))
}

/// Noise covariance with correlation shape `rho_noise^|a-b| / r` (unit trace),
/// rescaled so that `10 log10(P0 / Tr[S])` equals the configured SNR.
pub fn build_noise_covariance(config: &SystemConfig) -> Result<ComplexMatrix> {
    config.validate()?;
    let shape = build_exponential_covariance(config.r, config.rho_noise, 1.0 / config.r as f64)?;
    let scale = config.noise_power();
    Ok(shape.map(|v| Complex64::new(v * scale, 0.0)))
}

/// `Q = [I_n, ..., I_n]` with `k` blocks, so that `Q x = sum_k x_k`.
pub fn build_q(n: usize, k: usize) -> RealMatrix {
    RealMatrix::from_fn(n, n * k, |i, j| if j % n == i { 1.0 } else { 0.0 })
}

/// Block mask with all-ones `m x n` diagonal blocks and zero elsewhere.
pub fn build_mask(m: usize, n: usize, k: usize) -> RealMatrix {
    RealMatrix::from_fn(m * k, n * k, |i, j| if i / m == j / n { 1.0 } else { 0.0 })
}

/// Keep the `n x n` diagonal blocks of a covariance and zero the cross-node terms.
pub fn block_diagonal_part(cov: &RealMatrix, n: usize) -> RealMatrix {
    RealMatrix::from_fn(
        cov.nrows(),
        cov.ncols(),
        |i, j| {
            if i / n == j / n {
                cov[(i, j)]
            } else {
                0.0
            }
        },
    )
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nomographic function `f_l(d_1l, ..., d_Kl) = post_l(sum_k pre_kl(d_kl))`.
///
/// `pre` is indexed node-major: `pre[k * n + l]`.
pub struct NomographicSpec {
    n: usize,
    k: usize,
    pre: Vec<ScalarFn>,
    post: Vec<ScalarFn>,
}

impl std::fmt::Debug for NomographicSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NomographicSpec")
            .field("n", &self.n)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl NomographicSpec {
    pub fn new(n: usize, k: usize, pre: Vec<ScalarFn>, post: Vec<ScalarFn>) -> Result<Self> {
        if pre.len() != n * k {
            return Err(Error::DimensionMismatch {
                context: "nomographic pre-processing",
                expected: format!("{} functions", n * k),
                found: pre.len().to_string(),
            });
        }
        if post.len() != n {
            return Err(Error::DimensionMismatch {
                context: "nomographic post-processing",
                expected: format!("{n} functions"),
                found: post.len().to_string(),
            });
        }
        Ok(Self { n, k, pre, post })
    }

    /// Plain elementwise sum; the aggregation target is `s = sum_k x_k`.
    pub fn identity(n: usize, k: usize) -> Self {
        Self::weighted_sum(&RealMatrix::from_element(k, n, 1.0))
    }

    /// `pre_kl(x) = w_kl x`, `post_l(x) = x`, from a `K x n` weight matrix.
    pub fn weighted_sum(weights: &RealMatrix) -> Self {
        let (k, n) = weights.shape();
        let pre = (0..k * n)
            .map(|idx| {
                let w = weights[(idx / n, idx % n)];
                Box::new(move |x: f64| w * x) as ScalarFn
            })
            .collect();
        let post = (0..n).map(|_| Box::new(|x: f64| x) as ScalarFn).collect();
        Self { n, k, pre, post }
    }

    pub fn with_post(mut self, post: Vec<ScalarFn>) -> Result<Self> {
        if post.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "nomographic post-processing",
                expected: format!("{} functions", self.n),
                found: post.len().to_string(),
            });
        }
        self.post = post;
        Ok(self)
    }

    fn check_measurements(&self, measurements: &RealMatrix) -> Result<()> {
        if measurements.shape() != (self.k, self.n) {
            return Err(Error::DimensionMismatch {
                context: "nomographic measurements",
                expected: format!("{}x{}", self.k, self.n),
                found: format!("{}x{}", measurements.nrows(), measurements.ncols()),
            });
        }
        Ok(())
    }

    /// Stacked pre-processed source `x = [x_1; ...; x_K]` of length `nK`.
    pub fn preprocess(&self, measurements: &RealMatrix) -> Result<Vec<f64>> {
        self.check_measurements(measurements)?;
        Ok((0..self.k * self.n)
            .map(|idx| (self.pre[idx])(measurements[(idx / self.n, idx % self.n)]))
            .collect())
    }

    /// Exact value of the nomographic function on raw measurements.
    pub fn evaluate(&self, measurements: &RealMatrix) -> Result<Vec<f64>> {
        let x = self.preprocess(measurements)?;
        let sum: Vec<f64> = (0..self.n)
            .map(|l| (0..self.k).map(|k| x[k * self.n + l]).sum())
            .collect();
        self.apply(measurements, &sum)
    }

    fn apply(&self, measurements: &RealMatrix, aggregate: &[f64]) -> Result<Vec<f64>> {
        self.check_measurements(measurements)?;
        if aggregate.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "nomographic aggregate",
                expected: self.n.to_string(),
                found: aggregate.len().to_string(),
            });
        }
        Ok(aggregate.iter().zip(&self.post).map(|(&a, f)| f(a)).collect())
    }
}

/// Apply the post-processing functions to an (estimated) aggregate.
///
/// `measurements` is only used to check that the spec and data agree on `K x n`.
pub fn apply_nomographic(spec: &NomographicSpec, measurements: &RealMatrix, aggregate: &[f64]) -> Result<Vec<f64>> {
    spec.apply(measurements, aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cholesky_lower, real_trace};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exponential_covariance_examples() {
        let k = build_exponential_covariance(2, 0.8, 1.0).unwrap();
        assert_eq!(k, RealMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]));
        assert_eq!(
            build_exponential_covariance(3, 0.0, 1.0).unwrap(),
            RealMatrix::identity(3, 3)
        );
        let s = build_exponential_covariance(2, 0.5, 0.25).unwrap();
        assert_eq!(s, RealMatrix::from_row_slice(2, 2, &[0.25, 0.125, 0.125, 0.25]));
        assert!(build_exponential_covariance(2, 1.0, 1.0).is_err());
        assert!(build_exponential_covariance(2, -0.1, 1.0).is_err());
    }

    #[test]
    fn noise_covariance_matches_snr() {
        let cfg = SystemConfig {
            p0: 10.0,
            snr_db: 10.0,
            r: 1,
            ..Default::default()
        };
        let s = build_noise_covariance(&cfg).unwrap();
        assert_eq!(s.shape(), (1, 1));
        assert_relative_eq!(s[(0, 0)].re, 1.0, epsilon = 1e-15);

        let cfg = SystemConfig {
            p0: 10.0,
            snr_db: 25.0,
            r: 2,
            ..Default::default()
        };
        let s = build_noise_covariance(&cfg).unwrap();
        let tr = 10.0 / 10f64.powf(2.5);
        assert_relative_eq!(real_trace(&s), tr, max_relative = 1e-12);
        assert_relative_eq!(s[(0, 1)].re, tr * 0.25, max_relative = 1e-12);

        let cfg = SystemConfig {
            snr_db: 300.0,
            ..Default::default()
        };
        assert!(real_trace(&build_noise_covariance(&cfg).unwrap()) < 1e-28);
    }

    #[test]
    fn q_examples() {
        assert_eq!(
            build_q(2, 2),
            RealMatrix::from_row_slice(2, 4, &[1., 0., 1., 0., 0., 1., 0., 1.])
        );
        assert_eq!(build_q(1, 3), RealMatrix::from_row_slice(1, 3, &[1., 1., 1.]));
        assert_eq!(build_q(4, 1), RealMatrix::identity(4, 4));
        let q = build_q(3, 5);
        for row in q.row_iter() {
            assert_eq!(row.sum(), 5.0);
        }
    }

    #[test]
    fn mask_examples() {
        assert_eq!(
            build_mask(1, 2, 2),
            RealMatrix::from_row_slice(2, 4, &[1., 1., 0., 0., 0., 0., 1., 1.])
        );
        assert_eq!(build_mask(3, 2, 1), RealMatrix::from_element(3, 2, 1.0));
        let m = build_mask(2, 2, 2);
        let expected =
            RealMatrix::from_row_slice(4, 4, &[1., 1., 0., 0., 1., 1., 0., 0., 0., 0., 1., 1., 0., 0., 1., 1.]);
        assert_eq!(m, expected);
        for row in build_mask(2, 5, 3).row_iter() {
            assert_eq!(row.sum(), 5.0);
        }
    }

    #[test]
    fn block_diagonal_truncation() {
        let k = build_exponential_covariance(4, 0.5, 1.0).unwrap();
        let bd = block_diagonal_part(&k, 2);
        assert_eq!(bd[(0, 1)], 0.5);
        assert_eq!(bd[(1, 2)], 0.0);
        assert_eq!(bd[(3, 0)], 0.0);
        assert_eq!(block_diagonal_part(&bd, 2), bd);
    }

    #[test]
    fn nomographic_examples() {
        let d = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(NomographicSpec::identity(2, 2).evaluate(&d).unwrap(), vec![4.0, 6.0]);

        let spec = NomographicSpec::weighted_sum(&RealMatrix::from_element(2, 2, 0.5));
        let d = RealMatrix::from_element(2, 2, 2.0);
        assert_eq!(spec.evaluate(&d).unwrap(), vec![2.0, 2.0]);

        let spec = NomographicSpec::identity(1, 1)
            .with_post(vec![Box::new(|x: f64| x * x)])
            .unwrap();
        let d = RealMatrix::from_element(1, 1, 0.0);
        assert_eq!(apply_nomographic(&spec, &d, &[3.0]).unwrap(), vec![9.0]);
    }

    #[test]
    fn nomographic_dimension_errors() {
        let spec = NomographicSpec::identity(2, 3);
        assert!(spec.preprocess(&RealMatrix::zeros(2, 2)).is_err());
        assert!(apply_nomographic(&spec, &RealMatrix::zeros(3, 2), &[1.0]).is_err());
        assert!(NomographicSpec::new(2, 1, vec![], vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        assert!(SystemConfig {
            k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SystemConfig {
            p0: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SystemConfig {
            rho_noise: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn exponential_covariance_factorizes_at_large_size() {
        for rho in [0.0, 0.5, 0.8, 0.95, 0.999] {
            let k = build_exponential_covariance(512, rho, 1.0).unwrap();
            assert!(cholesky_lower(&k).is_ok(), "rho = {rho}");
        }
    }

    proptest! {
        #[test]
        fn exponential_covariance_is_pd(size in 1usize..64, rho in 0.0f64..0.999) {
            let k = build_exponential_covariance(size, rho, 1.0).unwrap();
            prop_assert!(cholesky_lower(&k).is_ok());
        }

        #[test]
        fn snr_round_trip(snr in -20.0f64..60.0, p0 in 0.1f64..100.0, r in 1usize..12) {
            let cfg = SystemConfig { snr_db: snr, p0, r, ..Default::default() };
            let tr = real_trace(&build_noise_covariance(&cfg).unwrap());
            prop_assert!((10.0 * (p0 / tr).log10() - snr).abs() < 1e-9);
        }

        #[test]
        fn q_sums_node_blocks(n in 1usize..5, k in 1usize..5, seed in any::<u64>()) {
            let x: Vec<f64> = (0..n * k).map(|i| ((seed.wrapping_add(i as u64) % 97) as f64) - 48.0).collect();
            let s = build_q(n, k) * crate::numerics::RealVector::from_vec(x.clone());
            for l in 0..n {
                let direct: f64 = (0..k).map(|kk| x[kk * n + l]).sum();
                prop_assert_eq!(s[l], direct);
            }
        }
    }
}
