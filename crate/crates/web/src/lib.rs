//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exported: a single water-filling allocation, a
//! design comparison on one random channel, and a small Monte Carlo sweep.
//! Everything is seeded explicitly, so the page is reproducible.

use aircomp::model::{build_q, CovariancePair, SystemConfig};
use aircomp::montecarlo::{derive_seed, run_sweep, sample_channel, SweepSpec, SweepTable, SweepVariable, TrialPlan};
use aircomp::precoder::{build_spectral_cache, Design, PrecoderDesigner};
use aircomp::receiver::mse_closed_form;
use aircomp::waterfill::{objective, solve, ModeSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const CHANNEL_STREAM: u64 = 0x0077_6562;

/// System parameters as sent by the page; missing fields take the defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Params {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p0: f64,
    pub snr_db: f64,
    pub rho_data: f64,
    pub rho_noise: f64,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        let s = SystemConfig::default();
        Self {
            n: s.n,
            m: s.m,
            r: s.r,
            k: s.k,
            p0: s.p0,
            snr_db: s.snr_db,
            rho_data: s.rho_data,
            rho_noise: s.rho_noise,
            seed: 0,
        }
    }
}

impl Params {
    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            n: self.n,
            m: self.m,
            r: self.r,
            k: self.k,
            p0: self.p0,
            snr_db: self.snr_db,
            rho_data: self.rho_data,
            rho_noise: self.rho_noise,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocationView {
    pub phi_sq: Vec<f64>,
    pub multiplier: f64,
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignView {
    pub method: String,
    /// Closed-form LMMSE error divided by `nK`.
    pub normalized_mse: f64,
    pub transmit_power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub designs: Vec<DesignView>,
    /// Water-filling inputs and output of the proposed design.
    pub modes: ModesView,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModesView {
    pub deltas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub leverages: Vec<f64>,
    pub phi_sq: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub method: String,
    pub normalized_mse: Option<f64>,
    pub std_error: Option<f64>,
    pub warning: Option<String>,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_js<T: Serialize>(value: &T) -> Result<JsValue, JsError> {
    serde_wasm_bindgen::to_value(value).map_err(js_err)
}

fn params_from(value: JsValue) -> Result<Params, JsError> {
    if value.is_undefined() || value.is_null() {
        return Ok(Params::default());
    }
    serde_wasm_bindgen::from_value(value).map_err(js_err)
}

pub fn allocate(
    deltas: Vec<f64>,
    lambdas: Vec<f64>,
    leverages: Vec<f64>,
    budget: f64,
    limit: usize,
) -> aircomp::Result<AllocationView> {
    let modes = ModeSet::new(deltas, lambdas, leverages, budget, limit)?;
    let alloc = solve(&modes)?;
    Ok(AllocationView {
        objective: objective(&modes, &alloc.phi_sq)?,
        power: modes.power(&alloc.phi_sq),
        phi_sq: alloc.phi_sq,
        multiplier: alloc.multiplier,
        active_set: alloc.active_set,
    })
}

pub fn compare(params: &Params) -> aircomp::Result<Comparison> {
    let sys = params.system();
    sys.validate()?;
    let pair = CovariancePair::for_config(&sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[params.seed, CHANNEL_STREAM]));
    let h = sample_channel(sys.r, sys.transmit_dim(), &mut rng);
    let q = build_q(sys.n, sys.k);
    let designer = PrecoderDesigner::new(sys, pair.data_cov.clone(), pair.noise_cov.clone())?;
    let norm = sys.source_dim() as f64;
    let designs = Design::ALL
        .iter()
        .map(|&design| {
            let p = designer.design(design, &h, params.seed)?;
            let mse = match p.predicted_mse {
                Some(v) => v,
                None => mse_closed_form(&p.a, &h, &pair.data_cov, &pair.noise_cov, &q)?,
            };
            Ok(DesignView {
                method: design.tag().to_string(),
                normalized_mse: mse / norm,
                transmit_power: p.transmit_power(&pair.data_cov),
            })
        })
        .collect::<aircomp::Result<Vec<_>>>()?;
    let cache = build_spectral_cache(&pair.data_cov, &h, &pair.noise_cov, &q)?;
    let modes = cache.mode_set(sys.p0)?;
    let alloc = solve(&modes)?;
    Ok(Comparison {
        designs,
        modes: ModesView {
            deltas: modes.deltas().to_vec(),
            lambdas: modes.lambdas().to_vec(),
            leverages: modes.leverages().to_vec(),
            phi_sq: alloc.phi_sq,
        },
    })
}

pub fn sweep_points(
    params: &Params,
    variable: SweepVariable,
    values: Vec<f64>,
    channels: usize,
    sources: usize,
) -> aircomp::Result<Vec<SweepPoint>> {
    let plan = TrialPlan::new(params.system(), Design::ALL.to_vec(), channels, sources, params.seed);
    plan.validate()?;
    let spec = SweepSpec {
        variable,
        values,
        r_per_m: None,
    };
    let SweepTable { rows } = run_sweep(&plan, &spec);
    Ok(rows
        .into_iter()
        .map(|row| SweepPoint {
            value: row.value,
            method: row.method.tag().to_string(),
            normalized_mse: row.normalized_mse,
            std_error: row.std_error,
            warning: row.warning,
        })
        .collect())
}

/// Water-filling power `|phi_j|^2` for explicit modes.
#[wasm_bindgen]
pub fn waterfill(
    deltas: Vec<f64>,
    lambdas: Vec<f64>,
    leverages: Vec<f64>,
    budget: f64,
    limit: usize,
) -> Result<JsValue, JsError> {
    to_js(&allocate(deltas, lambdas, leverages, budget, limit).map_err(js_err)?)
}

/// Closed-form error of every design on one seeded channel draw.
#[wasm_bindgen(js_name = compareDesigns)]
pub fn compare_designs(params: JsValue) -> Result<JsValue, JsError> {
    to_js(&compare(&params_from(params)?).map_err(js_err)?)
}

/// Monte Carlo sweep of all designs over `variable` (`m`, `r`, `K` or `snr_db`).
#[wasm_bindgen]
pub fn sweep(
    params: JsValue,
    variable: &str,
    values: Vec<f64>,
    channels: usize,
    sources: usize,
) -> Result<JsValue, JsError> {
    let variable: SweepVariable = variable.parse().map_err(js_err)?;
    to_js(&sweep_points(&params_from(params)?, variable, values, channels, sources).map_err(js_err)?)
}
