//! Precoder designs.
//!
//! The correlation-aware design runs in three steps:
//!
//! 1. Solve the problem without the block-diagonal constraint. With
//!    `K = U diag(delta) U^T` and `H^H S^{-1} H = V diag(lambda) V^H` the
//!    optimum has the form `A = V Phi U^T`, where `Phi` is rectangular
//!    diagonal and `|phi_j|^2` comes from [`waterfill::solve`].
//! 2. Zero every entry outside the per-node blocks.
//! 3. Rescale so that `Tr[A K A^H] = P0` again.
//!
//! The baselines reuse the same pipeline with a different data model
//! (block-diagonal `K`), a different target (`Q = I`, i.e. recover every
//! node's data) or a random matrix.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{block_diagonal_part, build_mask, build_q, SystemConfig};
use crate::numerics::{complexify, hermitian_eig, hermitize, hpd_solve, real_trace, ComplexMatrix, RealMatrix};
use crate::receiver::mse_closed_form;
use crate::waterfill::{self, Allocation, ModeSet};

/// Which design produced a precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Proposed,
    IgnoreCorrelation,
    CommThenCompute,
    Random,
}

impl Design {
    pub const ALL: [Design; 4] = [
        Design::Proposed,
        Design::IgnoreCorrelation,
        Design::CommThenCompute,
        Design::Random,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Design::Proposed => "proposed",
            Design::IgnoreCorrelation => "ignore_correlation",
            Design::CommThenCompute => "comm_then_compute",
            Design::Random => "random",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| Error::Validation(format!("unknown design `{s}`")))
    }
}

/// Eigenbasis of the data covariance and the leverage of each eigenvector
/// under the summation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpectrum {
    pub u: RealMatrix,
    pub deltas: Vec<f64>,
    pub qu: RealMatrix,
    pub leverages: Vec<f64>,
}

impl DataSpectrum {
    pub fn new(data_cov: &RealMatrix, q: &RealMatrix) -> Result<Self> {
        let eig = hermitian_eig(data_cov)?;
        Ok(Self::from_basis(eig.vectors, eig.values.iter().copied().collect(), q))
    }

    fn from_basis(u: RealMatrix, deltas: Vec<f64>, q: &RealMatrix) -> Self {
        let qu = q * &u;
        let leverages = qu.column_iter().map(|c| c.norm_squared()).collect();
        Self {
            u,
            deltas,
            qu,
            leverages,
        }
    }

    /// Same basis with the leverages recomputed for another summation matrix.
    pub fn with_target(&self, q: &RealMatrix) -> Self {
        Self::from_basis(self.u.clone(), self.deltas.clone(), q)
    }
}

/// Eigenbasis of the noise-whitened channel Gram matrix `H^H S^{-1} H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum {
    pub v: ComplexMatrix,
    pub lambdas: Vec<f64>,
    pub receive_rank: usize,
}

impl ChannelSpectrum {
    pub fn new(h: &ComplexMatrix, noise_cov: &ComplexMatrix) -> Result<Self> {
        if noise_cov.nrows() != h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "noise covariance",
                expected: format!("{0}x{0}", h.nrows()),
                found: format!("{}x{}", noise_cov.nrows(), noise_cov.ncols()),
            });
        }
        let whitened = hpd_solve(noise_cov, h).map_err(|e| e.named("noise covariance S"))?;
        let gram = hermitize(&(h.adjoint() * whitened));
        let eig = hermitian_eig(&gram)?;
        let receive_rank = h.nrows().min(h.ncols());
        let mut lambdas: Vec<f64> = eig.values.iter().copied().collect();
        // the Gram matrix has rank at most r
        for l in lambdas.iter_mut().skip(receive_rank) {
            *l = 0.0;
        }
        Ok(Self {
            v: eig.vectors,
            lambdas,
            receive_rank,
        })
    }
}

/// Everything the relaxed solution needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache {
    pub data: DataSpectrum,
    pub channel: ChannelSpectrum,
}

impl SpectralCache {
    pub fn mode_set(&self, p0: f64) -> Result<ModeSet> {
        ModeSet::new(
            self.data.deltas.clone(),
            self.channel.lambdas.clone(),
            self.data.leverages.clone(),
            p0,
            self.channel.receive_rank,
        )
    }
}

pub fn build_spectral_cache(
    data_cov: &RealMatrix,
    h: &ComplexMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<SpectralCache> {
    if h.ncols() == 0 || data_cov.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch {
            context: "summation matrix",
            expected: format!("{} columns", data_cov.nrows()),
            found: q.ncols().to_string(),
        });
    }
    Ok(SpectralCache {
        data: DataSpectrum::new(data_cov, q)?,
        channel: ChannelSpectrum::new(h, noise_cov)?,
    })
}

/// Relaxed optimum `V Phi U^T` together with the allocation behind it.
pub fn relaxed_solution(cache: &SpectralCache, p0: f64) -> Result<(ComplexMatrix, Allocation)> {
    let alloc = waterfill::solve(&cache.mode_set(p0)?)?;
    let v = &cache.channel.v;
    let u = &cache.data.u;
    let modes = v.ncols().min(u.ncols());
    let mut left = v.columns(0, modes).into_owned();
    for (j, mut col) in left.column_iter_mut().enumerate() {
        col.scale_mut(alloc.phi_sq[j].sqrt());
    }
    let right = complexify(&u.columns(0, modes).transpose());
    Ok((left * right, alloc))
}

/// Solution of the relaxed problem, ignoring the block structure.
pub fn design_relaxed(cache: &SpectralCache, p0: f64) -> Result<ComplexMatrix> {
    Ok(relaxed_solution(cache, p0)?.0)
}

/// `Tr[A K A^H]`.
pub fn transmit_power(a: &ComplexMatrix, data_cov: &RealMatrix) -> f64 {
    real_trace(&(a * complexify(data_cov) * a.adjoint()))
}

/// Keep the per-node blocks selected by `mask` and rescale to `Tr[A K A^H] = P0`.
pub fn block_diagonalize(
    a_tilde: &ComplexMatrix,
    mask: &RealMatrix,
    data_cov: &RealMatrix,
    p0: f64,
) -> Result<ComplexMatrix> {
    if a_tilde.shape() != mask.shape() {
        return Err(Error::DimensionMismatch {
            context: "block mask",
            expected: format!("{}x{}", a_tilde.nrows(), a_tilde.ncols()),
            found: format!("{}x{}", mask.nrows(), mask.ncols()),
        });
    }
    let masked = a_tilde.zip_map(mask, |a, m| a * m);
    let power = transmit_power(&masked, data_cov);
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::DegeneratePrecoder);
    }
    Ok(masked.scale((p0 / power).sqrt()))
}

/// A block-diagonal precoder `A = diag(A_1, ..., A_K)` with `A_k` of size `m x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub a: ComplexMatrix,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub design: Design,
    /// Closed-form LMMSE error for the channel the design was made for.
    pub predicted_mse: Option<f64>,
}

impl Precoder {
    pub fn block(&self, node: usize) -> ComplexMatrix {
        self.a
            .view((node * self.m, node * self.n), (self.m, self.n))
            .into_owned()
    }

    pub fn blocks(&self) -> Vec<ComplexMatrix> {
        (0..self.k).map(|node| self.block(node)).collect()
    }

    pub fn transmit_power(&self, data_cov: &RealMatrix) -> f64 {
        transmit_power(&self.a, data_cov)
    }

    fn with_prediction(
        mut self,
        h: &ComplexMatrix,
        data_cov: &RealMatrix,
        noise_cov: &ComplexMatrix,
        q: &RealMatrix,
    ) -> Result<Self> {
        self.predicted_mse = Some(mse_closed_form(&self.a, h, data_cov, noise_cov, q)?);
        Ok(self)
    }
}

/// Designs precoders for one configuration over many channel draws.
///
/// The data-side eigendecompositions do not depend on the channel and are
/// computed once, on first use.
#[derive(Debug)]
pub struct PrecoderDesigner {
    config: SystemConfig,
    data_cov: RealMatrix,
    noise_cov: ComplexMatrix,
    q: RealMatrix,
    mask: RealMatrix,
    full: OnceLock<Result<DataSpectrum>>,
    per_node: OnceLock<Result<DataSpectrum>>,
    full_identity: OnceLock<Result<DataSpectrum>>,
}

impl PrecoderDesigner {
    pub fn new(config: SystemConfig, data_cov: RealMatrix, noise_cov: ComplexMatrix) -> Result<Self> {
        config.validate()?;
        let src = config.source_dim();
        if data_cov.shape() != (src, src) {
            return Err(Error::DimensionMismatch {
                context: "data covariance",
                expected: format!("{src}x{src}"),
                found: format!("{}x{}", data_cov.nrows(), data_cov.ncols()),
            });
        }
        if noise_cov.shape() != (config.r, config.r) {
            return Err(Error::DimensionMismatch {
                context: "noise covariance",
                expected: format!("{0}x{0}", config.r),
                found: format!("{}x{}", noise_cov.nrows(), noise_cov.ncols()),
            });
        }
        Ok(Self {
            q: build_q(config.n, config.k),
            mask: build_mask(config.m, config.n, config.k),
            config,
            data_cov,
            noise_cov,
            full: OnceLock::new(),
            per_node: OnceLock::new(),
            full_identity: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn data_cov(&self) -> &RealMatrix {
        &self.data_cov
    }

    pub fn noise_cov(&self) -> &ComplexMatrix {
        &self.noise_cov
    }

    pub fn q(&self) -> &RealMatrix {
        &self.q
    }

    fn spectrum(&self, design: Design) -> Result<&DataSpectrum> {
        let cell = match design {
            Design::Proposed => self.full.get_or_init(|| DataSpectrum::new(&self.data_cov, &self.q)),
            Design::IgnoreCorrelation => self
                .per_node
                .get_or_init(|| DataSpectrum::new(&block_diagonal_part(&self.data_cov, self.config.n), &self.q)),
            Design::CommThenCompute => self.full_identity.get_or_init(|| {
                let src = self.config.source_dim();
                let identity = RealMatrix::identity(src, src);
                match self.spectrum(Design::Proposed) {
                    Ok(full) => Ok(full.with_target(&identity)),
                    Err(e) => Err(e.clone()),
                }
            }),
            Design::Random => unreachable!("random design has no data spectrum"),
        };
        cell.as_ref().map_err(Clone::clone)
    }

    /// Design one precoder for channel `h`. `seed` is only used by [`Design::Random`].
    pub fn design(&self, design: Design, h: &ComplexMatrix, seed: u64) -> Result<Precoder> {
        let expected = (self.config.r, self.config.transmit_dim());
        if h.shape() != expected {
            return Err(Error::DimensionMismatch {
                context: "channel",
                expected: format!("{}x{}", expected.0, expected.1),
                found: format!("{}x{}", h.nrows(), h.ncols()),
            });
        }
        let a = match design {
            Design::Random => random_blocks(&self.config, &self.data_cov, seed)?,
            _ => {
                let cache = SpectralCache {
                    data: self.spectrum(design)?.clone(),
                    channel: ChannelSpectrum::new(h, &self.noise_cov)?,
                };
                let a_tilde = design_relaxed(&cache, self.config.p0)?;
                block_diagonalize(&a_tilde, &self.mask, &self.data_cov, self.config.p0)?
            }
        };
        Precoder {
            a,
            n: self.config.n,
            m: self.config.m,
            k: self.config.k,
            design,
            predicted_mse: None,
        }
        .with_prediction(h, &self.data_cov, &self.noise_cov, &self.q)
    }
}

fn random_blocks(config: &SystemConfig, data_cov: &RealMatrix, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = ComplexMatrix::zeros(config.transmit_dim(), config.source_dim());
    for node in 0..config.k {
        for i in 0..config.m {
            for j in 0..config.n {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                a[(node * config.m + i, node * config.n + j)] = Complex64::new(re, im) * scale;
            }
        }
    }
    let mask = build_mask(config.m, config.n, config.k);
    block_diagonalize(&a, &mask, data_cov, config.p0)
}

pub fn design_proposed(
    config: &SystemConfig,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    h: &ComplexMatrix,
) -> Result<Precoder> {
    PrecoderDesigner::new(*config, data_cov.clone(), noise_cov.clone())?.design(Design::Proposed, h, 0)
}

/// Proposed pipeline designed on the per-node blocks of `K` only; power and
/// predicted MSE still use the true `K`.
pub fn design_ignoring_correlation(
    config: &SystemConfig,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    h: &ComplexMatrix,
) -> Result<Precoder> {
    PrecoderDesigner::new(*config, data_cov.clone(), noise_cov.clone())?.design(Design::IgnoreCorrelation, h, 0)
}

/// Design that minimises the error on the whole stacked source `x` (all
/// leverages equal to one) and is then block-diagonalized.
pub fn design_comm_then_compute(
    config: &SystemConfig,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    h: &ComplexMatrix,
) -> Result<Precoder> {
    PrecoderDesigner::new(*config, data_cov.clone(), noise_cov.clone())?.design(Design::CommThenCompute, h, 0)
}

/// I.i.d. `CN(0, 1)` blocks normalised to the power budget. No channel is
/// involved, so `predicted_mse` is left empty.
pub fn design_random(config: &SystemConfig, data_cov: &RealMatrix, rng_seed: u64) -> Result<Precoder> {
    config.validate()?;
    Ok(Precoder {
        a: random_blocks(config, data_cov, rng_seed)?,
        n: config.n,
        m: config.m,
        k: config.k,
        design: Design::Random,
        predicted_mse: None,
    })
}
