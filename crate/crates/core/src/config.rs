//! Run configuration: a flat TOML document whose defaults reproduce the
//! reference experiment.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::fredholm::QuadratureRule;
use crate::hankel::{CompanionVariant, ScatteringField};
use crate::spectral::{check_dispersion_property, DispersionCoefficients, GridConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    GpSolve,
    DirectSolve,
    Compare,
    VerifyIdentities,
    DeterminantMonitor,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GpSolve => "gp-solve",
            Mode::DirectSolve => "direct-solve",
            Mode::Compare => "compare",
            Mode::VerifyIdentities => "verify-identities",
            Mode::DeterminantMonitor => "determinant-monitor",
        }
    }

    /// Modes that evaluate the linearisation solver away from `t = 0`.
    fn propagates_scattering_data(self) -> bool {
        !matches!(self, Mode::DirectSolve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `amplitude * sech(x / width)`
    #[default]
    Sech,
    /// `amplitude * exp(-(x / width)^2)`
    Gaussian,
    /// Samples read from `profile_path`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// One table per checkpoint.
    Csv,
    /// `summary.json`
    Json,
}

/// Every key is optional; missing keys take the reference values
/// (`μ₂ = -i`, `μ₃ = 1`, `μ₄ = i`, `L = 40`, 256 modes, `Δt = 0.001`,
/// `0.15 sech(x/40)`, `T = 100`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(rename = "L")]
    pub length: f64,
    pub nx: usize,
    /// Defaults to `nx / 2`, which aligns every Hankel argument with the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nquad: Option<usize>,
    pub block_rows: usize,
    pub block_cols: usize,
    /// `[re, im]`
    pub mu2: [f64; 2],
    pub mu3: [f64; 2],
    pub mu4: [f64; 2],
    pub variant: CompanionVariant,
    pub quadrature: QuadratureRule,
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_path: Option<PathBuf>,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Defaults to six evenly spaced times over `[0, T]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    pub dt: f64,
    pub out: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub dealias: bool,
    pub linear_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::GpSolve,
            length: 40.0,
            nx: 256,
            nquad: None,
            block_rows: 1,
            block_cols: 1,
            mu2: [0.0, -1.0],
            mu3: [1.0, 0.0],
            mu4: [0.0, 1.0],
            variant: CompanionVariant::Adjoint,
            quadrature: QuadratureRule::LeftRiemann,
            profile: ProfileKind::Sech,
            amplitude: 0.15,
            width: 40.0,
            profile_path: None,
            horizon: 100.0,
            checkpoints: None,
            dt: 0.001,
            out: PathBuf::from("qnls-out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            dealias: false,
            linear_only: false,
        }
    }
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration always serialises")
    }

    pub fn n_quad(&self) -> usize {
        self.nquad.unwrap_or(self.nx / 2)
    }

    pub fn grid(&self) -> Result<GridConfig> {
        GridConfig::new(self.length, self.nx, self.n_quad(), self.block_rows, self.block_cols)
    }

    pub fn coefficients(&self) -> DispersionCoefficients {
        DispersionCoefficients::new(complex(self.mu2), complex(self.mu3), complex(self.mu4))
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        match &self.checkpoints {
            Some(times) => times.clone(),
            None => (0..6).map(|k| self.horizon * k as f64 / 5.0).collect(),
        }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::config("L", "domain length must be positive"));
        }
        if self.nx < 4 || !self.nx.is_power_of_two() {
            return Err(Error::config("nx", format!("must be a power of two >= 4, got {}", self.nx)));
        }
        if self.n_quad() < 2 {
            return Err(Error::config("nquad", format!("must be >= 2, got {}", self.n_quad())));
        }
        if self.block_rows == 0 {
            return Err(Error::config("block_rows", "must be positive"));
        }
        if self.block_cols == 0 {
            return Err(Error::config("block_cols", "must be positive"));
        }
        for (name, mu) in [("mu2", self.mu2), ("mu3", self.mu3), ("mu4", self.mu4)] {
            if !mu.iter().all(|v| v.is_finite()) {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.variant.is_transpose() && complex(self.mu3) != Complex64::new(0.0, 0.0) {
            return Err(Error::config(
                "variant",
                format!(
                    "{} requires mu3 = 0 (reverse-time companions only solve the tilde equation \
                     when the odd term vanishes), got mu3 = {}",
                    self.variant,
                    complex(self.mu3)
                ),
            ));
        }
        if self.mode.propagates_scattering_data() && !check_dispersion_property(&self.coefficients()) {
            return Err(Error::config(
                "mu2",
                "coefficients must satisfy the dispersion property: mu2 and mu4 imaginary, mu3 real",
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("T", format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if let Some(times) = &self.checkpoints {
            if times.is_empty() {
                return Err(Error::config("checkpoints", "at least one checkpoint is required"));
            }
            if let Some(t) = times.iter().find(|&&t| !(0.0..=self.horizon).contains(&t)) {
                return Err(Error::config("checkpoints", format!("{t} lies outside [0, T]")));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("checkpoints", "times must be strictly increasing"));
            }
        }
        if !self.amplitude.is_finite() {
            return Err(Error::config("amplitude", "must be finite"));
        }
        if self.profile != ProfileKind::File && !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config("width", "must be positive"));
        }
        if self.profile == ProfileKind::File && self.profile_path.is_none() {
            return Err(Error::config("profile_path", "required when profile = \"file\""));
        }
        if self.formats.is_empty() {
            return Err(Error::config("formats", "at least one output format is required"));
        }
        Ok(())
    }

    /// `p₀` on the grid. Analytic profiles multiply the rectangular identity
    /// block.
    pub fn initial_profile(&self) -> Result<ScatteringField> {
        let grid = self.grid()?;
        let (rows, cols) = (self.block_rows, self.block_cols);
        let shape = |x: f64| -> f64 {
            match self.profile {
                ProfileKind::Sech => self.amplitude / (x / self.width).cosh(),
                ProfileKind::Gaussian => self.amplitude * (-(x / self.width).powi(2)).exp(),
                ProfileKind::File => unreachable!(),
            }
        };
        match self.profile {
            ProfileKind::File => {
                let path = self.profile_path.as_deref().expect("validated");
                let samples = read_profile(path, grid)?;
                ScatteringField::new(grid, 0.0, samples)
            }
            _ => ScatteringField::from_fn(grid, |x| Block::identity(rows, cols).scale_real(shape(x))),
        }
    }
}

/// Reads `n_x` rows of `re, im` pairs, one pair per block entry in
/// row-major order. Lines starting with `#` are ignored.
pub fn read_profile(path: &Path, grid: GridConfig) -> Result<Vec<Block>> {
    let field = "profile_path";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::config(field, format!("{}: {e}", path.display())))?;
    let entries = grid.block_rows * grid.block_cols;
    let mut samples = Vec::with_capacity(grid.n_x);
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::config(field, e.to_string()))?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(field, format!("row {}: {e}", line + 1)))?;
        if values.len() != 2 * entries {
            return Err(Error::config(
                field,
                format!("row {} has {} values, expected {}", line + 1, values.len(), 2 * entries),
            ));
        }
        let z: Vec<Complex64> = values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        samples.push(Block::from_row_major(grid.block_rows, grid.block_cols, &z));
    }
    if samples.len() != grid.n_x {
        return Err(Error::config(
            field,
            format!("found {} rows, expected nx = {}", samples.len(), grid.n_x),
        ));
    }
    Ok(samples)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text)
}
