//! Command line front end: flag parsing, run orchestration and output files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::block::{max_norm, Block};
use crate::config::{Mode, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::fredholm::GpSolver;
use crate::hankel::{companion_field, CompanionVariant, ScatteringField};
use crate::spectral::{evolve_scattering, GridConfig};
use crate::splitstep::{splitstep_initial_data, SplitStepSolver};
use crate::verify::{
    check_adjoint_pair, check_inverse_identity, check_kernel_product_rule, check_key_identity_i, compare_solvers,
    CompareOptions, DeterminantSample, IdentityReport, ProductRuleKernels, ProductRuleSetup, RefinementOptions,
};

#[derive(Debug, Parser)]
#[command(name = "qnls", version, about = "Solve matrix fourth-order quintic NLS equations by linearisation")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `re,im`
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub mu2: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub mu3: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub mu4: Option<[f64; 2]>,
    #[arg(long)]
    pub variant: Option<CompanionVariant>,
    /// Horizon.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub nquad: Option<usize>,
}

fn parse_complex(s: &str) -> std::result::Result<[f64; 2], String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected `re,im`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([parse(re)?, parse(im)?])
}

impl Cli {
    /// Config file (or defaults) with command line overrides applied, then
    /// validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                toml::from_str::<RunConfig>(&text).map_err(|e| Error::Parse(e.message().to_string()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.mode {
            config.mode = v;
        }
        if let Some(v) = &self.out {
            config.out = v.clone();
        }
        if let Some(v) = self.mu2 {
            config.mu2 = v;
        }
        if let Some(v) = self.mu3 {
            config.mu3 = v;
        }
        if let Some(v) = self.mu4 {
            config.mu4 = v;
        }
        if let Some(v) = self.variant {
            config.variant = v;
        }
        if let Some(v) = self.horizon {
            config.horizon = v;
        }
        if let Some(v) = self.dt {
            config.dt = v;
        }
        if let Some(v) = self.nx {
            config.nx = v;
        }
        if let Some(v) = self.nquad {
            config.nquad = Some(v);
        }
        config.validate()?;
        Ok(config)
    }
}

/// What a run wrote, mirroring `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub config: RunConfig,
    pub checkpoints: Vec<CheckpointSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub max_difference: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub determinants: Vec<DeterminantSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_det_abs: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<IdentityReport>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointSummary {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub max_abs_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
}

/// Wall-clock seconds; excluded from reproducibility comparisons.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub phases: Vec<(String, f64)>,
}

/// `t<time>.csv` with the shortest round-tripping decimal for the time.
pub fn snapshot_name(t: f64) -> String {
    format!("t{t}.csv")
}

struct Columns<'a> {
    label: &'a str,
    values: &'a [Block],
}

fn entry_suffix(rows: usize, cols: usize, a: usize, b: usize) -> String {
    if rows * cols == 1 {
        String::new()
    } else {
        format!("_{a}{b}")
    }
}

/// Writes `x, re_g, im_g, abs_g[, det_re, det_im]` plus any extra fields.
fn write_snapshot(path: &Path, grid: &GridConfig, fields: &[Columns<'_>], det: Option<&[Complex64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let mut header = vec!["x".to_string()];
    for f in fields {
        let (rows, cols) = f.values[0].shape();
        for a in 0..rows {
            for b in 0..cols {
                let s = entry_suffix(rows, cols, a, b);
                header.push(format!("re_{}{s}", f.label));
                header.push(format!("im_{}{s}", f.label));
                header.push(format!("abs_{}{s}", f.label));
            }
        }
    }
    if det.is_some() {
        header.push("det_re".into());
        header.push("det_im".into());
    }
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for j in 0..grid.n_x {
        let mut row = vec![grid.x(j).to_string()];
        for f in fields {
            for z in f.values[j].entries() {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
                row.push(z.norm().to_string());
            }
        }
        if let Some(d) = det {
            row.push(d[j].re.to_string());
            row.push(d[j].im.to_string());
        }
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Default)]
struct Phases(Vec<(String, f64)>);

impl Phases {
    fn timed<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.0.push((label.into(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

struct Runner<'a> {
    config: &'a RunConfig,
    grid: GridConfig,
    p0: ScatteringField,
}

impl Runner<'_> {

    fn csv_path(&self, t: f64) -> Option<(PathBuf, String)> {
        self.config
            .wants(OutputFormat::Csv)
            .then(|| (self.config.out.join(snapshot_name(t)), snapshot_name(t)))
    }

    fn solver(&self) -> GpSolver {
        GpSolver::new(self.config.quadrature)
    }
}

/// Executes the configured mode and writes its outputs.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let runner = Runner {
        config,
        grid: config.grid()?,
        p0: config.initial_profile()?,
    };
    let mut phases = Phases::default();
    let c = config.coefficients();
    let v = config.variant;
    let times = config.checkpoint_times();
    let mut summary = RunSummary {
        mode: config.mode,
        config: config.clone(),
        checkpoints: Vec::new(),
        max_difference: Vec::new(),
        determinants: Vec::new(),
        min_det_abs: None,
        reports: Vec::new(),
        timings: Timings::default(),
    };

    match config.mode {
        Mode::GpSolve | Mode::DeterminantMonitor => {
            for &t in &times {
                let solver = runner.solver();
                let p0 = &runner.p0;
                let sol = phases.timed(format!("gp t={t}"), || solver.solve_at_time(p0, t, v, &c))?;
                let file = match runner.csv_path(t) {
                    Some((path, name)) => {
                        let g = Columns {
                            label: "g",
                            values: &sol.field.g,
                        };
                        write_snapshot(&path, &runner.grid, &[g], Some(&sol.det1))?;
                        Some(name)
                    }
                    None => None,
                };
                summary.determinants.push(DeterminantSample::from_values(t, &sol.det1));
                summary.checkpoints.push(CheckpointSummary {
                    t,
                    file,
                    max_abs_g: max_norm(&sol.field.g),
                    max_residual: Some(sol.residual),
                });
            }
            summary.min_det_abs = Some(summary.determinants.iter().map(|d| d.min_abs).fold(f64::INFINITY, f64::min));
        }
        Mode::DirectSolve => {
            let mut state = phases.timed("initial data", || splitstep_initial_data(&runner.p0, v, config.dt))?;
            let stepper = SplitStepSolver::new(runner.grid, c, v, config.dt)?
                .with_nonlinear(!config.linear_only)
                .with_dealias(config.dealias);
            for &t in &times {
                phases.timed(format!("steps to t={t}"), || {
                    stepper.advance_to(&mut state, t);
                    Ok(())
                })?;
                let g = state.physical();
                let file = match runner.csv_path(state.t) {
                    Some((path, name)) => {
                        write_snapshot(&path, &runner.grid, &[Columns { label: "g", values: &g }], None)?;
                        Some(name)
                    }
                    None => None,
                };
                summary.checkpoints.push(CheckpointSummary {
                    t: state.t,
                    file,
                    max_abs_g: max_norm(&g),
                    max_residual: None,
                });
            }
        }
        Mode::Compare => {
            let mut options = CompareOptions::new(config.dt, times.clone());
            options.linear_only = config.linear_only;
            options.dealias = config.dealias;
            options.solver = runner.solver();
            let p0 = &runner.p0;
            let report = phases.timed("compare", || compare_solvers(p0, config.horizon, &c, v, &options))?;
            for cp in &report.checkpoints {
                let diff: Vec<Block> = cp.gp.iter().zip(&cp.direct).map(|(a, b)| a - b).collect();
                let file = match runner.csv_path(cp.t) {
                    Some((path, name)) => {
                        let cols = [
                            Columns {
                                label: "g",
                                values: &cp.gp,
                            },
                            Columns {
                                label: "direct",
                                values: &cp.direct,
                            },
                            Columns {
                                label: "diff",
                                values: &diff,
                            },
                        ];
                        write_snapshot(&path, &runner.grid, &cols, Some(&cp.det1))?;
                        Some(name)
                    }
                    None => None,
                };
                summary.checkpoints.push(CheckpointSummary {
                    t: cp.t,
                    file,
                    max_abs_g: max_norm(&cp.gp),
                    max_residual: None,
                });
            }
            summary.max_difference = report.max_differences();
        }
        Mode::VerifyIdentities => {
            let t = config.horizon;
            let refinement = RefinementOptions::for_grid(&runner.grid);
            let p0 = &runner.p0;
            summary.reports.push(phases.timed("kernel product rule", || {
                Ok(check_kernel_product_rule(
                    &ProductRuleKernels::default(),
                    0.0,
                    &ProductRuleSetup::default(),
                ))
            })?);
            summary.reports.push(phases.timed("key identity", || check_key_identity_i(p0, t, v, &c, &refinement))?);
            if v == CompanionVariant::Adjoint {
                summary.reports.push(phases.timed("adjoint pair", || check_adjoint_pair(p0, t, &c, &refinement))?);
            }
            let p = evolve_scattering(p0, t, &c);
            let pt = companion_field(p0, t, v, &c)?;
            summary.reports.push(phases.timed("inverse identity", || {
                check_inverse_identity(&p, &pt, runner.grid.n_x / 2, &[4, 2, 1])
            })?);
        }
    }

    summary.timings = Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        phases: phases.0,
    };
    if config.wants(OutputFormat::Json) {
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(config.out.join("summary.json"), text)?;
    }
    Ok(summary)
}

/// Drops wall-clock data from a parsed summary so two runs can be compared.
pub fn without_timings(mut summary: Value) -> Value {
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("timings");
    }
    summary
}

fn report_line(summary: &RunSummary) -> Value {
    json!({
        "mode": summary.mode,
        "out": summary.config.out,
        "checkpoints": summary.checkpoints.len(),
        "min_det_abs": summary.min_det_abs,
        "max_difference": summary.max_difference.last(),
    })
}

/// Parses arguments, runs, and returns the process exit status: 0 on
/// success, 2 for configuration errors, 3 for a near-singular operator.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&config) {
        Ok(summary) => {
            println!("{}", report_line(&summary));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
