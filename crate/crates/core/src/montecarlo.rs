//! Seeded Monte Carlo evaluation.
//!
//! Every random draw comes from its own ChaCha stream whose seed is derived
//! from `(master_seed, stream, indices...)`, so results do not depend on how
//! trials are scheduled across threads. Channels are shared by all methods
//! within a trial, and so are the source and noise draws.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariancePair, SystemConfig};
use crate::numerics::{cholesky_lower, complexify, ComplexMatrix, ComplexVector, RealMatrix};
use crate::precoder::{Design, PrecoderDesigner};
use crate::receiver::lmmse_matrix;

const CHANNEL_STREAM: u64 = 0x6368_616e;
const SOURCE_STREAM: u64 = 0x7372_6373;
const PRECODER_STREAM: u64 = 0x7072_6563;

/// Fold a list of words into one seed with the SplitMix64 finalizer.
pub fn derive_seed(parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(0x5eed_u64, |acc, &p| mix(acc ^ mix(p)))
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// One `CN(0, 1)` draw: real and imaginary parts each have variance 1/2.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `z = L g` with `L L^H = cov` and `g ~ CN(0, I)`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: ComplexMatrix,
}

impl GaussianSampler {
    pub fn new(cov: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            factor: cholesky_lower(cov)?,
        })
    }

    pub fn from_real(cov: &RealMatrix) -> Result<Self> {
        Ok(Self {
            factor: complexify(&cholesky_lower(cov)?),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexVector {
        let g = ComplexVector::from_fn(self.dim(), |_, _| standard_complex(rng));
        &self.factor * g
    }
}

/// A single draw from `CN(0, cov)`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(cov: &ComplexMatrix, rng: &mut R) -> Result<ComplexVector> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}

/// `r x cols` channel with i.i.d. `CN(0, 1)` entries.
pub fn sample_channel<R: Rng + ?Sized>(r: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(r, cols, |_, _| standard_complex(rng))
}

/// What to simulate at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub config: SystemConfig,
    pub methods: Vec<Design>,
    /// Channel draws `T`.
    pub channels: usize,
    /// Source draws `Z` per channel.
    pub sources: usize,
    pub master_seed: u64,
}

impl TrialPlan {
    pub fn new(config: SystemConfig, methods: Vec<Design>, channels: usize, sources: usize, master_seed: u64) -> Self {
        Self {
            config,
            methods,
            channels,
            sources,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.channels == 0 || self.sources == 0 {
            return Err(Error::Validation("T and Z must both be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("at least one method is required".into()));
        }
        Ok(())
    }
}

/// Normalized MSE of one method at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Design,
    /// `sum |s_hat - s|^2 / (n K T Z)`; `None` when a design failed.
    pub normalized_mse: Option<f64>,
    /// Standard error across the `T` per-channel means.
    pub std_error: Option<f64>,
    pub trials: usize,
    pub failure: Option<String>,
}

/// Source, noise and summation shared by every method at one point.
struct PointContext {
    designer: PrecoderDesigner,
    source: GaussianSampler,
    noise: GaussianSampler,
    q: ComplexMatrix,
}

impl PointContext {
    fn new(config: &SystemConfig) -> Result<Self> {
        let pair = CovariancePair::for_config(config)?;
        let source = GaussianSampler::from_real(&pair.data_cov).map_err(|e| e.named("data covariance K"))?;
        let noise = GaussianSampler::new(&pair.noise_cov).map_err(|e| e.named("noise covariance S"))?;
        let designer = PrecoderDesigner::new(*config, pair.data_cov, pair.noise_cov)?;
        let q = complexify(designer.q());
        Ok(Self {
            designer,
            source,
            noise,
            q,
        })
    }
}

/// Effective forward map `H A` and receiver `W` of one design on one channel.
struct Link {
    forward: ComplexMatrix,
    w: ComplexMatrix,
    predicted: Option<f64>,
}

impl Link {
    fn new(ctx: &PointContext, design: Design, h: &ComplexMatrix, seed: u64) -> Result<Self> {
        let d = &ctx.designer;
        let precoder = d.design(design, h, seed)?;
        let rx = lmmse_matrix(&precoder.a, h, d.data_cov(), d.noise_cov(), d.q())?;
        Ok(Self {
            forward: h * &precoder.a,
            w: rx.w,
            predicted: precoder.predicted_mse,
        })
    }

    fn squared_error(&self, x: &ComplexVector, noise: &ComplexVector, target: &ComplexVector) -> f64 {
        let y = &self.forward * x + noise;
        (&self.w * y - target).norm_squared()
    }
}

/// Sum of squared errors over `Z` draws, per method, for one channel.
fn run_channel(ctx: &PointContext, plan: &TrialPlan, t: usize) -> Vec<std::result::Result<f64, String>> {
    let cfg = &plan.config;
    let seed = plan.master_seed;
    let h = sample_channel(
        cfg.r,
        cfg.transmit_dim(),
        &mut rng_for(&[seed, CHANNEL_STREAM, t as u64]),
    );
    let links: Vec<std::result::Result<Link, String>> = plan
        .methods
        .iter()
        .enumerate()
        .map(|(i, &design)| {
            let precoder_seed = derive_seed(&[seed, PRECODER_STREAM, t as u64, i as u64]);
            Link::new(ctx, design, &h, precoder_seed).map_err(|e| format!("{design}: {e}"))
        })
        .collect();

    let mut totals = vec![0.0; links.len()];
    for z in 0..plan.sources {
        let mut rng = rng_for(&[seed, SOURCE_STREAM, t as u64, z as u64]);
        let x = ctx.source.sample(&mut rng);
        let noise = ctx.noise.sample(&mut rng);
        let target = &ctx.q * &x;
        for (total, link) in totals.iter_mut().zip(&links) {
            if let Ok(link) = link {
                *total += link.squared_error(&x, &noise, &target);
            }
        }
    }
    links
        .into_iter()
        .zip(totals)
        .map(|(link, total)| link.map(|_| total))
        .collect()
}

#[cfg(feature = "parallel")]
fn map_channels<F>(count: usize, f: F) -> Vec<Vec<std::result::Result<f64, String>>>
where
    F: Fn(usize) -> Vec<std::result::Result<f64, String>> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_channels<F>(count: usize, f: F) -> Vec<Vec<std::result::Result<f64, String>>>
where
    F: Fn(usize) -> Vec<std::result::Result<f64, String>>,
{
    (0..count).map(f).collect()
}

/// Simulate `T` channels x `Z` sources for every method of the plan.
pub fn run_point(plan: &TrialPlan) -> Result<Vec<MethodOutcome>> {
    plan.validate()?;
    let ctx = PointContext::new(&plan.config)?;
    let per_channel = map_channels(plan.channels, |t| run_channel(&ctx, plan, t));

    let norm = (plan.config.source_dim() * plan.sources) as f64;
    let trials = plan.channels * plan.sources;
    Ok(plan
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let mut means = Vec::with_capacity(plan.channels);
            for channel in &per_channel {
                match &channel[i] {
                    Ok(total) => means.push(total / norm),
                    Err(msg) => {
                        return MethodOutcome {
                            method,
                            normalized_mse: None,
                            std_error: None,
                            trials,
                            failure: Some(msg.clone()),
                        }
                    }
                }
            }
            let (mean, se) = mean_and_std_error(&means);
            MethodOutcome {
                method,
                normalized_mse: Some(mean),
                std_error: Some(se),
                trials,
                failure: None,
            }
        })
        .collect())
}

/// Sample mean and its standard error (zero for a single sample).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Empirical `E|s_hat - s|^2` on a fixed channel next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMse {
    pub mean: f64,
    pub std_error: f64,
    pub predicted: f64,
}

/// Average squared error of one design over `sources` draws on channel `h`.
pub fn empirical_mse(
    config: &SystemConfig,
    design: Design,
    h: &ComplexMatrix,
    sources: usize,
    seed: u64,
) -> Result<EmpiricalMse> {
    if sources == 0 {
        return Err(Error::Validation("need at least one source draw".into()));
    }
    let ctx = PointContext::new(config)?;
    let link = Link::new(&ctx, design, h, derive_seed(&[seed, PRECODER_STREAM]))?;
    let errors: Vec<f64> = (0..sources)
        .map(|z| {
            let mut rng = rng_for(&[seed, SOURCE_STREAM, z as u64]);
            let x = ctx.source.sample(&mut rng);
            let noise = ctx.noise.sample(&mut rng);
            let target = &ctx.q * &x;
            link.squared_error(&x, &noise, &target)
        })
        .collect();
    let (mean, std_error) = mean_and_std_error(&errors);
    Ok(EmpiricalMse {
        mean,
        std_error,
        predicted: link.predicted.expect("designer fills the prediction"),
    })
}

/// Parameter swept across operating points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "m")]
    M,
    #[serde(rename = "r")]
    R,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "snr_db")]
    SnrDb,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::M => "m",
            SweepVariable::R => "r",
            SweepVariable::K => "K",
            SweepVariable::SnrDb => "snr_db",
        }
    }

    pub fn is_count(self) -> bool {
        !matches!(self, SweepVariable::SnrDb)
    }

    /// Configuration at `value`; `r_per_m` ties `r` to `m` when sweeping `m`.
    pub fn apply(self, base: &SystemConfig, value: f64, r_per_m: Option<usize>) -> Result<SystemConfig> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Validation(format!(
                    "{} must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        let mut cfg = *base;
        match self {
            SweepVariable::M => {
                cfg.m = count()?;
                if let Some(ratio) = r_per_m {
                    cfg.r = ratio * cfg.m;
                }
            }
            SweepVariable::R => cfg.r = count()?,
            SweepVariable::K => cfg.k = count()?,
            SweepVariable::SnrDb => cfg.snr_db = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepVariable::M,
            SweepVariable::R,
            SweepVariable::K,
            SweepVariable::SnrDb,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::Validation(format!("unknown sweep variable `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_per_m: Option<usize>,
}

/// One CSV row: `(variable, value, method)` and its statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub method: Design,
    pub normalized_mse: Option<f64>,
    pub trials: usize,
    pub std_error: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Rows of one method in sweep order.
    pub fn curve(&self, method: Design) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().filter_map(|r| r.warning.as_deref())
    }
}

/// Seed shared by every operating point of a sweep over `variable`.
///
/// All points reuse the same channel, source and noise streams (common
/// random numbers), so differences along a curve reflect the parameter and
/// not fresh draws. The swept value is not part of the seed.
pub fn point_seed(master_seed: u64, variable: SweepVariable) -> u64 {
    let name = variable.name().bytes().fold(0u64, |acc, b| (acc << 8) | b as u64);
    derive_seed(&[master_seed, name])
}

/// Run [`run_point`] at every value of the sweep and concatenate the rows.
///
/// Invalid values and failed points produce rows with no MSE and a warning
/// instead of aborting the sweep.
pub fn run_sweep(base: &TrialPlan, sweep: &SweepSpec) -> SweepTable {
    let mut rows = Vec::new();
    for &value in &sweep.values {
        let outcome = sweep
            .variable
            .apply(&base.config, value, sweep.r_per_m)
            .and_then(|config| {
                let plan = TrialPlan {
                    config,
                    master_seed: point_seed(base.master_seed, sweep.variable),
                    ..base.clone()
                };
                run_point(&plan)
            });
        match outcome {
            Ok(outcomes) => rows.extend(outcomes.into_iter().map(|o| SweepRow {
                variable: sweep.variable,
                value,
                method: o.method,
                normalized_mse: o.normalized_mse,
                trials: o.trials,
                std_error: o.std_error,
                warning: o.failure.map(|f| format!("{}={value}: {f}", sweep.variable.name())),
            })),
            Err(e) => rows.extend(base.methods.iter().map(|&method| SweepRow {
                variable: sweep.variable,
                value,
                method,
                normalized_mse: None,
                trials: 0,
                std_error: None,
                warning: Some(format!("{}={value} skipped: {e}", sweep.variable.name())),
            })),
        }
    }
    SweepTable { rows }
}
