//! Command implementations behind the `aircomp` binary: config parsing,
//! precoder dumps, sweep CSV output and the figure presets.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CovariancePair, SystemConfig};
use crate::montecarlo::{derive_seed, run_sweep, sample_channel, SweepSpec, SweepTable, SweepVariable, TrialPlan};
use crate::precoder::{Design, Precoder, PrecoderDesigner};
use crate::Error;

pub const CSV_HEADER: [&str; 6] = [
    "sweep_var",
    "sweep_value",
    "method",
    "normalized_mse",
    "trials",
    "std_error",
];

const DESIGN_CHANNEL_STREAM: u64 = 0x6473_676e;

/// Failure of a CLI command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Contents of a run configuration file (TOML). Missing keys take the
/// defaults of [`RunConfig::default`]; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p0: f64,
    pub snr_db: f64,
    pub rho_data: f64,
    pub rho_noise: f64,
    pub methods: Vec<Design>,
    #[serde(rename = "T")]
    pub channels: usize,
    #[serde(rename = "Z")]
    pub sources: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sys = SystemConfig::default();
        Self {
            n: sys.n,
            m: sys.m,
            r: sys.r,
            k: sys.k,
            p0: sys.p0,
            snr_db: sys.snr_db,
            rho_data: sys.rho_data,
            rho_noise: sys.rho_noise,
            methods: Design::ALL.to_vec(),
            channels: 10,
            sources: 100,
            seed: 0,
            output_path: None,
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The effective configuration, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

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

    pub fn plan(&self) -> TrialPlan {
        TrialPlan::new(
            self.system(),
            self.methods.clone(),
            self.channels,
            self.sources,
            self.seed,
        )
    }

    pub fn validate(&self) -> CliResult<()> {
        self.plan().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
struct BlockDump {
    node: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Precoder dump written by `aircomp design`.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub design_tag: Design,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub p0: f64,
    pub transmit_power: f64,
    pub predicted_mse: f64,
    blocks: Vec<BlockDump>,
    #[serde(skip)]
    pub precoder: Option<Precoder>,
}

impl DesignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Draw one channel from `config.seed` and design a precoder for it.
pub fn cmd_design(config: &RunConfig, design: Design) -> CliResult<DesignReport> {
    config.validate()?;
    let sys = config.system();
    let pair = CovariancePair::for_config(&sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, DESIGN_CHANNEL_STREAM]));
    let h = sample_channel(sys.r, sys.transmit_dim(), &mut rng);
    let designer = PrecoderDesigner::new(sys, pair.data_cov, pair.noise_cov)?;
    let precoder = designer.design(design, &h, config.seed)?;
    let blocks = precoder
        .blocks()
        .iter()
        .enumerate()
        .map(|(node, b)| BlockDump {
            node,
            re: b.row_iter().map(|row| row.iter().map(|c| c.re).collect()).collect(),
            im: b.row_iter().map(|row| row.iter().map(|c| c.im).collect()).collect(),
        })
        .collect();
    Ok(DesignReport {
        design_tag: design,
        n: sys.n,
        m: sys.m,
        k: sys.k,
        seed: config.seed,
        p0: sys.p0,
        transmit_power: precoder.transmit_power(designer.data_cov()),
        predicted_mse: precoder.predicted_mse.unwrap_or(f64::NAN),
        blocks,
        precoder: Some(precoder),
    })
}

/// Run the sweep described by `config.sweep`.
pub fn cmd_sweep(config: &RunConfig) -> CliResult<SweepTable> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("missing [sweep] section".into()))?;
    Ok(run_sweep(&config.plan(), sweep))
}

/// Built-in configurations regenerating the four MSE figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// MSE vs. `m` with `r = 5m`.
    Fig2,
    /// MSE vs. `r` (communication compression ratio `r / mK`).
    Fig3,
    /// MSE vs. number of nodes `K`.
    Fig4,
    /// MSE vs. SNR.
    Fig5,
}

impl std::str::FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            other => Err(CliError::Validation(format!(
                "unknown figure `{other}` (expected fig2, fig3, fig4 or fig5)"
            ))),
        }
    }
}

impl Figure {
    pub fn config(self, seed: u64, channels: Option<usize>) -> RunConfig {
        let base = RunConfig {
            seed,
            channels: channels.unwrap_or(10),
            ..RunConfig::default()
        };
        let (m, r, k, sweep) = match self {
            Figure::Fig2 => (
                1,
                5,
                30,
                SweepSpec {
                    variable: SweepVariable::M,
                    values: (1..=8).map(f64::from).collect(),
                    r_per_m: Some(5),
                },
            ),
            Figure::Fig3 => (
                2,
                16,
                30,
                SweepSpec {
                    variable: SweepVariable::R,
                    values: vec![4.0, 8.0, 16.0, 24.0, 32.0, 48.0, 60.0, 72.0, 90.0, 120.0],
                    r_per_m: None,
                },
            ),
            Figure::Fig4 => (
                2,
                16,
                30,
                SweepSpec {
                    variable: SweepVariable::K,
                    values: vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
                    r_per_m: None,
                },
            ),
            Figure::Fig5 => (
                2,
                16,
                30,
                SweepSpec {
                    variable: SweepVariable::SnrDb,
                    values: (0..=6).map(|i| f64::from(5 * i)).collect(),
                    r_per_m: None,
                },
            ),
        };
        RunConfig {
            m,
            r,
            k,
            sweep: Some(sweep),
            ..base
        }
    }
}

pub fn cmd_reproduce(figure: Figure, seed: u64, channels: Option<usize>) -> CliResult<SweepTable> {
    cmd_sweep(&figure.config(seed, channels))
}

/// `v` with 10 significant digits.
pub fn format_sig10(v: f64) -> String {
    format!("{v:.9e}")
}

/// Write a sweep table as CSV with `\n` line endings.
pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &table.rows {
        let value = if row.variable.is_count() {
            format!("{}", row.value as u64)
        } else {
            format_sig10(row.value)
        };
        w.write_record([
            row.variable.name().to_string(),
            value,
            row.method.tag().to_string(),
            row.normalized_mse.map(format_sig10).unwrap_or_default(),
            row.trials.to_string(),
            row.std_error.map(format_sig10).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(table: &SweepTable) -> String {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = RunConfig::parse("K = 3\nm = 1\n").unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.n, 8);
        assert_eq!(cfg.p0, 10.0);
        assert_eq!((cfg.rho_data, cfg.rho_noise), (0.8, 0.5));
        assert_eq!((cfg.channels, cfg.sources), (10, 100));
        assert_eq!(cfg.methods, Design::ALL.to_vec());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("n = 8\nbogus = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = RunConfig::parse("[sweep]\nvariable = \"K\"\nvalues = []\nextra = 2\n").unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn invalid_values_are_validation_errors() {
        for text in [
            "K = 0",
            "rho_data = 1.5",
            "methods = []",
            "T = 0",
            "methods = [\"huh\"]",
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = Figure::Fig2.config(9, Some(3));
        cfg.output_path = Some("out/fig2.csv".into());
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        let plain = RunConfig::default();
        assert_eq!(RunConfig::parse(&plain.to_toml_string()).unwrap(), plain);
    }

    #[test]
    fn figure_presets() {
        let fig2 = Figure::Fig2.config(0, None);
        let sweep = fig2.sweep.unwrap();
        assert_eq!(sweep.values.first(), Some(&1.0));
        assert_eq!(sweep.values.last(), Some(&8.0));
        assert_eq!(sweep.r_per_m, Some(5));

        let fig3 = Figure::Fig3.config(0, None);
        let mk = (fig3.m * fig3.k) as f64;
        let ratios: Vec<f64> = fig3.sweep.unwrap().values.iter().map(|r| r / mk).collect();
        assert!(ratios.iter().any(|&x| x < 1.0) && ratios.iter().any(|&x| x > 1.0));

        let fig5 = Figure::Fig5.config(0, Some(4));
        assert_eq!((fig5.n, fig5.m, fig5.r, fig5.k), (8, 2, 16, 30));
        assert_eq!(fig5.channels, 4);
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(format_sig10(0.5), "5.000000000e-1");
        assert_eq!(format_sig10(1234.5678901234), "1.234567890e3");
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let csv = csv_string(&SweepTable::default());
        assert_eq!(csv, "sweep_var,sweep_value,method,normalized_mse,trials,std_error\n");
    }

    #[test]
    fn sweep_requires_section() {
        let err = cmd_sweep(&RunConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn numerical_errors_map_to_exit_two() {
        assert_eq!(CliError::from(Error::NoUsableMode).exit_code(), 2);
        assert_eq!(CliError::from(Error::Validation("x".into())).exit_code(), 1);
    }
}
