//! Batch front end: a JSON [`ExperimentConfig`] names one command, its inputs
//! and parameters; [`run`] writes CSV/JSON artifacts and a manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::martin::{
    a_constant, fit_a_from_martin, martin_function, martin_measure_cdf, solve_critical_points, GapSet,
};
use crate::output::{fmt_f64, sha256_hex, Artifacts, ErrorRecord, Manifest};
use crate::periodic::{band_spectrum, lowest_periodic_eigenvalue};
use crate::potentials::PotentialSpec;
use crate::propagation::{zero_counting_cdf, Propagator, SpectralPoint, DEFAULT_STEP};
use crate::regularity::{regularity_report, stated_spectrum, RegularityConfig};

pub const DEFAULT_OUTPUT_DIR: &str = "schreg-out";

const BRANCH_CONVENTION: &str = "k = sqrt(-z) with Re k >= 0; real z > 0 takes k = -i sqrt(z)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Bands,
    Martin,
    Dos,
    Regularity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Bands => "bands",
            Command::Martin => "martin",
            Command::Dos => "dos",
            Command::Regularity => "regularity",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown command `{s}`"))
    }
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub x_grid: Vec<f64>,
    pub z_grid: Vec<Complex64>,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_resolution() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsParams {
    pub period: f64,
    pub window: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    /// When present, the bands below it are also reported as a gap set.
    #[serde(default)]
    pub truncation: Option<f64>,
}

fn default_k_grid() -> Vec<f64> {
    (0..16).map(|i| 10.0 + 6.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartinParams {
    pub z_grid: Vec<Complex64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<f64>,
}

fn default_dos_window() -> (f64, f64) {
    (0.0, 25.0)
}

fn default_dos_points() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosParams {
    pub x: f64,
    #[serde(default = "default_dos_window")]
    pub window: (f64, f64),
    #[serde(default = "default_dos_points")]
    pub points: usize,
    #[serde(default = "default_step")]
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub spectrum: Option<GapSet>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solve: Option<SolveParams>,
    #[serde(default)]
    pub bands: Option<BandsParams>,
    #[serde(default)]
    pub martin: Option<MartinParams>,
    #[serde(default)]
    pub dos: Option<DosParams>,
    #[serde(default)]
    pub regularity: Option<RegularityConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("computation failed: {0}")]
    ComputeFailed(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::ComputeFailed(_) => 1,
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::ConfigInvalid(msg.into()))
}

fn check_step(step: f64) -> Result<(), CliError> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        invalid(format!("step must be positive, got {step}"))
    }
}

fn check_increasing(name: &str, xs: &[f64], positive: bool) -> Result<(), CliError> {
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite() || (positive && *x <= 0.0)) {
        return invalid(format!("{name} must be nonempty and finite{}", if positive { " and positive" } else { "" }));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return invalid(format!("{name} must be strictly increasing"));
    }
    Ok(())
}

fn check_points(name: &str, zs: &[Complex64]) -> Result<(), CliError> {
    if zs.is_empty() || zs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return invalid(format!("{name} must be nonempty and finite"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn potential(&self) -> Result<&PotentialSpec, CliError> {
        self.potential
            .as_ref()
            .ok_or_else(|| CliError::ConfigInvalid(format!("command `{}` needs a potential", self.command)))
    }

    /// Everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), CliError> {
        let sections = [
            (Command::Solve, self.solve.is_some()),
            (Command::Bands, self.bands.is_some()),
            (Command::Martin, self.martin.is_some()),
            (Command::Dos, self.dos.is_some()),
            (Command::Regularity, self.regularity.is_some()),
        ];
        for (c, present) in sections {
            if present && c != self.command {
                return invalid(format!("section `{c}` does not apply to command `{}`", self.command));
            }
        }
        if let Some(p) = &self.potential {
            p.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        }
        if let Some(e) = &self.spectrum {
            e.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        }
        match self.command {
            Command::Solve => {
                self.potential()?;
                let Some(s) = &self.solve else {
                    return invalid("command `solve` needs a `solve` section with x_grid and z_grid");
                };
                check_increasing("solve.x_grid", &s.x_grid, true)?;
                check_points("solve.z_grid", &s.z_grid)?;
                check_step(s.step)?;
            }
            Command::Bands => {
                self.potential()?;
                let Some(b) = &self.bands else {
                    return invalid("command `bands` needs a `bands` section with period and window");
                };
                if !(b.period.is_finite() && b.period > 0.0) {
                    return invalid("bands.period must be positive");
                }
                if !(b.window.0.is_finite() && b.window.1.is_finite() && b.window.0 < b.window.1) {
                    return invalid("bands.window must be a finite nonempty interval");
                }
                if b.resolution < 3 {
                    return invalid("bands.resolution must be at least 3");
                }
                if let Some(t) = b.truncation {
                    if !(t > b.window.0 && t <= b.window.1) {
                        return invalid("bands.truncation must lie inside the window");
                    }
                }
                check_step(b.step)?;
            }
            Command::Martin => {
                if self.spectrum.is_none() {
                    return invalid("command `martin` needs a spectrum");
                }
                let Some(m) = &self.martin else {
                    return invalid("command `martin` needs a `martin` section with z_grid");
                };
                check_points("martin.z_grid", &m.z_grid)?;
                if !m.lambda_grid.is_empty() {
                    check_increasing("martin.lambda_grid", &m.lambda_grid, false)?;
                }
            }
            Command::Dos => {
                self.potential()?;
                let Some(d) = &self.dos else {
                    return invalid("command `dos` needs a `dos` section with x");
                };
                if !(d.x.is_finite() && d.x > 0.0) {
                    return invalid("dos.x must be positive");
                }
                if !(d.window.0.is_finite() && d.window.1.is_finite() && d.window.0 < d.window.1) || d.points < 2 {
                    return invalid("dos.window must be nonempty and dos.points at least 2");
                }
                check_step(d.step)?;
            }
            Command::Regularity => {
                self.potential()?;
                if let Some(r) = &self.regularity {
                    r.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

/// Run `config`, writing into `out`. On a computation error the manifest
/// still lists the files written so far and records the error.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Manifest, CliError> {
    config.validate()?;
    let mut artifacts = Artifacts::create(out)?;
    let config_json = serde_json::to_vec(config).map_err(Error::from)?;
    let mut manifest = Manifest {
        command: config.command.to_string(),
        status: "ok",
        seed: config.seed,
        config_sha256: sha256_hex(&config_json),
        files: Vec::new(),
        error: None,
    };
    let result = artifacts
        .write_json("config.json", config)
        .and_then(|_| dispatch(config, &mut artifacts));
    match result {
        Ok(()) => Ok(artifacts.finish(manifest)?),
        Err(e) => {
            manifest.status = "error";
            manifest.error = Some(ErrorRecord {
                kind: error_kind(&e).into(),
                message: e.to_string(),
            });
            artifacts.finish(manifest)?;
            Err(CliError::ComputeFailed(e))
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidPotential(_) => "InvalidPotential",
        Error::NonIntegrable(_) => "NonIntegrable",
        Error::InvalidStep(_) => "InvalidStep",
        Error::InvalidArgument(_) => "InvalidArgument",
        Error::ZeroSolution { .. } => "ZeroSolution",
        Error::HorizonExceeded { .. } => "HorizonExceeded",
        Error::QuadratureFailure(_) => "QuadratureFailure",
        Error::DegenerateDisk(_) => "DegenerateDisk",
        Error::NotBracketed { .. } => "NotBracketed",
        Error::ResolutionTooCoarse { .. } => "ResolutionTooCoarse",
        Error::InvalidGapSet(_) => "InvalidGapSet",
        Error::NoConvergence { .. } => "NoConvergence",
        Error::OnSpectrum(_) => "OnSpectrum",
        Error::PathTooCloseToSpectrum { .. } => "PathTooCloseToSpectrum",
        Error::FitIllConditioned(_) => "FitIllConditioned",
        Error::Io(_) => "Io",
        Error::Json(_) => "Json",
    }
}

fn dispatch(config: &ExperimentConfig, out: &mut Artifacts) -> crate::Result<()> {
    let potential = config.potential.as_ref();
    match config.command {
        Command::Solve => run_solve(potential.expect("validated"), config.solve.as_ref().expect("validated"), out),
        Command::Bands => run_bands(potential.expect("validated"), config.bands.as_ref().expect("validated"), out),
        Command::Martin => run_martin(
            config.spectrum.as_ref().expect("validated"),
            config.martin.as_ref().expect("validated"),
            out,
        ),
        Command::Dos => run_dos(
            potential.expect("validated"),
            config.spectrum.as_ref(),
            config.dos.as_ref().expect("validated"),
            out,
        ),
        Command::Regularity => {
            let p = potential.expect("validated");
            let params = config.regularity.clone().unwrap_or_default();
            run_regularity(p, config.spectrum.as_ref(), &params, out)
        }
    }
}

fn run_solve(p: &PotentialSpec, s: &SolveParams, out: &mut Artifacts) -> crate::Result<()> {
    let rows = s
        .z_grid
        .par_iter()
        .map(|&z| {
            let sp = SpectralPoint::new(z);
            let mut prop = Propagator::new(p, sp, s.step)?;
            let mut rows = Vec::with_capacity(s.x_grid.len());
            for &x in &s.x_grid {
                let t = *prop.advance_to(x)?;
                let (du, u) = (t.m[0][0], t.m[1][0]);
                let h = (t.log_scale + u.norm().ln()) / x;
                rows.push(vec![
                    fmt_f64(x),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(u.re),
                    fmt_f64(u.im),
                    fmt_f64(du.re),
                    fmt_f64(du.im),
                    fmt_f64(t.log_scale),
                    fmt_f64(h),
                    fmt_f64(t.log_norm() / x),
                ]);
            }
            Ok(rows)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    out.write_csv(
        "solve.csv",
        &["x", "z_re", "z_im", "u_re", "u_im", "du_re", "du_im", "log_scale", "h", "lyapunov"],
        rows.into_iter().flatten(),
    )?;
    out.write_json(
        "solve.json",
        &serde_json::json!({
            "potential": p,
            "step": s.step,
            "branch_convention": BRANCH_CONVENTION,
            "scaling": "u(x) = exp(log_scale) * (u_re + i u_im)",
        }),
    )
}

fn run_bands(p: &PotentialSpec, b: &BandsParams, out: &mut Artifacts) -> crate::Result<()> {
    let spectrum = band_spectrum(p, b.period, b.window, b.resolution, b.step)?;
    out.write_csv(
        "discriminant.csv",
        &["lambda", "value"],
        spectrum
            .discriminant_samples
            .iter()
            .map(|&(l, d)| vec![fmt_f64(l), fmt_f64(d)]),
    )?;
    out.write_csv(
        "bands.csv",
        &["index", "lower", "upper"],
        spectrum
            .bands
            .iter()
            .enumerate()
            .map(|(i, band)| vec![i.to_string(), fmt_f64(band[0]), fmt_f64(band[1])]),
    )?;
    let lowest = lowest_periodic_eigenvalue(p, b.period, b.window, b.step)?;
    let gap_set = match b.truncation {
        Some(t) => {
            let (gs, dropped) = spectrum.to_gap_set(t)?;
            Some(serde_json::json!({ "truncation": t, "gap_set": gs, "dropped_gaps": dropped }))
        }
        None => None,
    };
    out.write_json(
        "bands.json",
        &serde_json::json!({
            "bands": spectrum.bands,
            "period": spectrum.period,
            "potential": spectrum.potential,
            "lowest_periodic_eigenvalue": lowest,
            "window": b.window,
            "truncated": gap_set,
        }),
    )
}

fn run_martin(e: &GapSet, m: &MartinParams, out: &mut Artifacts) -> crate::Result<()> {
    let cp = solve_critical_points(e)?;
    let evals = m
        .z_grid
        .par_iter()
        .map(|&z| martin_function(e, &cp, z))
        .collect::<crate::Result<Vec<_>>>()?;
    out.write_csv(
        "martin.csv",
        &["z_re", "z_im", "M", "theta_real"],
        evals
            .iter()
            .map(|v| vec![fmt_f64(v.z.re), fmt_f64(v.z.im), fmt_f64(v.m), fmt_f64(v.theta_real)]),
    )?;
    if !m.lambda_grid.is_empty() {
        let cdf = martin_measure_cdf(e, &cp, &m.lambda_grid)?;
        out.write_csv(
            "measure.csv",
            &["lambda", "value"],
            cdf.lambda_grid
                .iter()
                .zip(&cdf.cdf)
                .map(|(l, v)| vec![fmt_f64(*l), fmt_f64(*v)]),
        )?;
    }
    let a = a_constant(e, &cp);
    let fit = fit_a_from_martin(e, &cp, &m.k_grid)?;
    out.write_json(
        "martin.json",
        &serde_json::json!({
            "spectrum": e,
            "critical_points": cp,
            "a_E": a,
            "a_E_fit": fit,
            "k_grid": m.k_grid,
        }),
    )
}

fn run_dos(p: &PotentialSpec, e: Option<&GapSet>, d: &DosParams, out: &mut Artifacts) -> crate::Result<()> {
    let (lo, hi) = d.window;
    let grid: Vec<f64> = (0..d.points)
        .map(|i| lo + (hi - lo) * i as f64 / (d.points - 1) as f64)
        .collect();
    let cdf = zero_counting_cdf(p, d.x, &grid, d.step)?;
    out.write_csv(
        "dos.csv",
        &["x", "lambda", "value"],
        grid.iter()
            .zip(&cdf.cdf)
            .map(|(l, v)| vec![fmt_f64(d.x), fmt_f64(*l), fmt_f64(*v)]),
    )?;
    let mut distance = None;
    if let Some(e) = e {
        let cp = solve_critical_points(e)?;
        let m = martin_measure_cdf(e, &cp, &grid)?;
        out.write_csv(
            "martin_cdf.csv",
            &["lambda", "value"],
            grid.iter().zip(&m.cdf).map(|(l, v)| vec![fmt_f64(*l), fmt_f64(*v)]),
        )?;
        distance = Some(cdf.sup_distance(&m)?);
    }
    out.write_json(
        "dos.json",
        &serde_json::json!({
            "potential": p,
            "spectrum": e,
            "x": d.x,
            "step": d.step,
            "branch_convention": BRANCH_CONVENTION,
            "dos_distance": distance,
        }),
    )
}

fn run_regularity(
    p: &PotentialSpec,
    e: Option<&GapSet>,
    config: &RegularityConfig,
    out: &mut Artifacts,
) -> crate::Result<()> {
    let (e, truncation) = match e {
        Some(e) => (e.clone(), None),
        None => stated_spectrum(p)?,
    };
    let mut report = regularity_report(p, &e, config)?;
    if let Some(t) = truncation {
        report
            .notes
            .push(format!("spectrum taken from the band structure truncated at {t}"));
    }
    let c = &report.cesaro_tail;
    out.write_csv(
        "cesaro.csv",
        &["x", "average", "abs_average"],
        (0..c.x_grid.len()).map(|i| vec![fmt_f64(c.x_grid[i]), fmt_f64(c.averages[i]), fmt_f64(c.abs_averages[i])]),
    )?;
    let g = &report.growth;
    let mut rows = Vec::new();
    for (i, z) in g.z_grid.iter().enumerate() {
        for (j, x) in g.x_list.iter().enumerate() {
            rows.push(vec![
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(*x),
                fmt_f64(g.h[i][j]),
                fmt_f64(g.martin[i]),
            ]);
        }
    }
    out.write_csv("growth.csv", &["z_re", "z_im", "x", "h", "M"], rows)?;
    let d = &report.dos;
    out.write_csv(
        "dos.csv",
        &["lambda", "rho_x", "rho_E"],
        (0..d.zero_counting.lambda_grid.len()).map(|i| {
            vec![
                fmt_f64(d.zero_counting.lambda_grid[i]),
                fmt_f64(d.zero_counting.cdf[i]),
                fmt_f64(d.martin.cdf[i]),
            ]
        }),
    )?;
    out.write_json("report.json", &report)
}

/// Entry point shared by the binary: load, pick the output directory, size the
/// worker pool and run. Returns the process exit code.
pub fn execute(command: Command, config_path: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> i32 {
    let result = (|| -> Result<Manifest, CliError> {
        let config = ExperimentConfig::load(config_path)?;
        if config.command != command {
            return invalid(format!(
                "config is for `{}` but `{command}` was requested",
                config.command
            ));
        }
        if jobs == Some(0) {
            return invalid("--jobs must be at least 1");
        }
        let dir = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::ComputeFailed(Error::InvalidArgument(e.to_string())))?;
        pool.install(|| run(&config, &dir))
    })();
    match result {
        Ok(m) => {
            println!("{} files written for `{}`", m.files.len(), m.command);
            0
        }
        Err(e) => {
            eprintln!("schreg: {e}");
            e.exit_code()
        }
    }
}
