//! Finite-scale diagnostics for regularity: the universal inequality
//! `a_E ≤ liminf (1/x)∫₀ˣ V`, growth rates `h(x, z)` against `M_E(z)`, and the
//! zero-counting measure `ρ_x` against the Martin measure `ρ_E`.
//!
//! Nothing here decides a limit. Each check reports numbers at the scales it
//! was run at, and [`Verdict::decide`] applies the thresholds to those numbers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martin::{a_constant, martin_function, martin_measure_cdf, solve_critical_points, GapSet};
use crate::periodic::band_spectrum;
use crate::potentials::{CesaroTrace, PotentialSpec};
use crate::propagation::{log_growth_trace, zero_counting_cdf, MeasureCDF, SpectralPoint, DEFAULT_STEP};

/// Points of the Cesàro grid on the tail half `[x_max/2, x_max]`.
pub const CESARO_TAIL_POINTS: usize = 201;

/// Smallest admissible distance between a growth test point and `[b₀, ∞)`.
pub const MIN_SPECTRAL_CLEARANCE: f64 = 0.1;

/// Energy at which band sets of periodic families are truncated.
pub const PERIODIC_TRUNCATION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub a_e: f64,
    pub cesaro_liminf_est: f64,
    pub margin: f64,
    pub cesaro_tail: CesaroTrace,
}

/// `liminf` of the Cesàro trace estimated by its minimum over `[x_max/2, x_max]`.
pub fn universal_inequality_check(p: &PotentialSpec, e: &GapSet, x_max: f64) -> Result<InequalityCheck> {
    if !(x_max.is_finite() && x_max >= 100.0) {
        return Err(Error::InvalidArgument(format!("x_max must be at least 100, got {x_max}")));
    }
    let cp = solve_critical_points(e)?;
    let a_e = a_constant(e, &cp);
    let n = CESARO_TAIL_POINTS;
    let grid: Vec<f64> = (0..n)
        .map(|i| 0.5 * x_max * (1.0 + i as f64 / (n - 1) as f64))
        .collect();
    let cesaro_tail = p.cesaro_trace(&grid)?;
    let est = cesaro_tail.averages.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InequalityCheck {
        a_e,
        cesaro_liminf_est: est,
        margin: est - a_e,
        cesaro_tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthComparison {
    pub z_grid: Vec<Complex64>,
    pub x_list: Vec<f64>,
    /// `h[i][j] = h(x_list[j], z_grid[i])`
    pub h: Vec<Vec<f64>>,
    pub martin: Vec<f64>,
    /// `h(x_max, z) − M(z)` per grid point.
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
}

fn spectral_clearance(e: &GapSet, z: Complex64) -> f64 {
    if z.re >= e.b0 {
        z.im.abs()
    } else {
        (z - e.b0).norm()
    }
}

pub fn growth_comparison(
    p: &PotentialSpec,
    e: &GapSet,
    z_grid: &[Complex64],
    x_list: &[f64],
    step: f64,
) -> Result<GrowthComparison> {
    if z_grid.is_empty() || x_list.is_empty() {
        return Err(Error::InvalidArgument("growth comparison needs nonempty grids".into()));
    }
    if x_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("x list must be strictly increasing".into()));
    }
    for &z in z_grid {
        let d = spectral_clearance(e, z);
        if !(d >= MIN_SPECTRAL_CLEARANCE) {
            return Err(Error::InvalidArgument(format!(
                "z = {z} lies within {d:.3} of [b₀, ∞); at least {MIN_SPECTRAL_CLEARANCE} is required"
            )));
        }
    }
    let cp = solve_critical_points(e)?;
    let rows = z_grid
        .par_iter()
        .map(|&z| {
            let h = log_growth_trace(p, x_list, SpectralPoint::new(z), step)?;
            let m = martin_function(e, &cp, z)?.m;
            Ok((h, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let (h, martin): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    let gaps: Vec<f64> = h.iter().zip(&martin).map(|(row, m)| row[row.len() - 1] - m).collect();
    let sup_gap = gaps.iter().map(|g| g.abs()).fold(0.0, f64::max);
    Ok(GrowthComparison {
        z_grid: z_grid.to_vec(),
        x_list: x_list.to_vec(),
        h,
        martin,
        gaps,
        sup_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosComparison {
    pub x: f64,
    pub dos_distance: f64,
    pub zero_counting: MeasureCDF,
    pub martin: MeasureCDF,
}

/// Kolmogorov–Smirnov distance between `ρ_x` and `ρ_E` on `grid` equally spaced
/// energies spanning `window`.
pub fn dos_comparison(
    p: &PotentialSpec,
    e: &GapSet,
    x: f64,
    window: (f64, f64),
    grid: usize,
    step: f64,
) -> Result<DosComparison> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || grid < 2 {
        return Err(Error::InvalidArgument(format!(
            "need a nonempty window and at least 2 energies, got [{lo}, {hi}] with {grid}"
        )));
    }
    if lo < e.b0 {
        return Err(Error::InvalidArgument(format!(
            "window starts at {lo}, below the bottom {} of the spectrum",
            e.b0
        )));
    }
    let lambda: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let cp = solve_critical_points(e)?;
    let zero_counting = zero_counting_cdf(p, x, &lambda, step)?;
    let martin = martin_measure_cdf(e, &cp, &lambda)?;
    Ok(DosComparison {
        x,
        dos_distance: zero_counting.sup_distance(&martin)?,
        zero_counting,
        martin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest `|margin|` counted as equality in the universal inequality.
    pub inequality: f64,
    /// Largest `sup_z |h(x_max, z) − M(z)|` counted as convergence.
    pub growth: f64,
    /// Largest KS distance counted as weak-* agreement.
    pub dos: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            inequality: 0.05,
            growth: 0.02,
            dos: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithRegular,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    /// All three checks within threshold: consistent. A margin below
    /// `−inequality` contradicts the universal inequality and points at a wrong
    /// `E` or too small a scale: inconclusive. Otherwise two or more failed
    /// checks are inconsistent and a single one is inconclusive.
    pub fn decide(margin: f64, growth_sup: f64, dos_distance: f64, t: &Thresholds) -> Self {
        if ![margin, growth_sup, dos_distance].iter().all(|v| v.is_finite()) {
            return Verdict::Inconclusive;
        }
        if margin < -t.inequality {
            return Verdict::Inconclusive;
        }
        let failed = [margin > t.inequality, growth_sup > t.growth, dos_distance > t.dos]
            .iter()
            .filter(|&&f| f)
            .count();
        match failed {
            0 => Verdict::ConsistentWithRegular,
            1 => Verdict::Inconclusive,
            _ => Verdict::Inconsistent,
        }
    }
}

fn default_z_grid() -> Vec<Complex64> {
    vec![
        Complex64::new(-1.0, 0.0),
        Complex64::new(-4.0, 0.0),
        Complex64::new(-1.0, 1.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-0.25, 0.5),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityConfig {
    pub x_max: f64,
    /// Growth is sampled at `x_max / 2^i` for `i < growth_points`.
    pub growth_points: usize,
    pub z_grid: Vec<Complex64>,
    pub dos_x: f64,
    pub dos_window: (f64, f64),
    pub dos_points: usize,
    /// Cell width for potentials that are not piecewise constant.
    pub step: f64,
    pub thresholds: Thresholds,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            x_max: 1e4,
            growth_points: 4,
            z_grid: default_z_grid(),
            dos_x: 1e3,
            dos_window: (0.0, 25.0),
            dos_points: 201,
            step: DEFAULT_STEP,
            thresholds: Thresholds::default(),
        }
    }
}

impl RegularityConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(self.x_max.is_finite() && self.x_max >= 100.0) {
            return Err(Error::InvalidArgument("x_max must be at least 100".into()));
        }
        if self.growth_points == 0 || self.growth_points > 30 {
            return Err(Error::InvalidArgument("growth_points must lie in 1..=30".into()));
        }
        if self.z_grid.is_empty() {
            return Err(Error::InvalidArgument("z_grid is empty".into()));
        }
        if !(self.dos_x.is_finite() && self.dos_x > 0.0) || self.dos_points < 2 {
            return Err(Error::InvalidArgument("dos_x must be positive and dos_points ≥ 2".into()));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidStep(self.step));
        }
        if ![t.inequality, t.growth, t.dos].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn growth_x_list(&self) -> Vec<f64> {
        (0..self.growth_points)
            .rev()
            .map(|i| self.x_max / f64::powi(2.0, i as i32))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub potential: PotentialSpec,
    pub spectrum: GapSet,
    pub config: RegularityConfig,
    pub cesaro_tail: CesaroTrace,
    pub a_e: f64,
    pub cesaro_liminf_est: f64,
    pub inequality_margin: f64,
    pub growth: GrowthComparison,
    pub growth_gaps: Vec<f64>,
    pub dos: DosComparison,
    pub dos_distance: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub notes: Vec<String>,
}

impl RegularityReport {
    /// Re-derive the verdict from the stored numbers.
    pub fn replay_verdict(&self) -> Verdict {
        let sup = self.growth_gaps.iter().map(|g| g.abs()).fold(0.0, f64::max);
        Verdict::decide(self.inequality_margin, sup, self.dos_distance, &self.thresholds)
    }
}

pub fn regularity_report(p: &PotentialSpec, e: &GapSet, config: &RegularityConfig) -> Result<RegularityReport> {
    config.validate()?;
    p.validate()?;
    e.validate()?;
    let ineq = universal_inequality_check(p, e, config.x_max)?;
    let growth = growth_comparison(p, e, &config.z_grid, &config.growth_x_list(), config.step)?;
    let dos = dos_comparison(p, e, config.dos_x, config.dos_window, config.dos_points, config.step)?;
    let verdict = Verdict::decide(ineq.margin, growth.sup_gap, dos.dos_distance, &config.thresholds);
    Ok(RegularityReport {
        potential: p.clone(),
        spectrum: e.clone(),
        config: config.clone(),
        cesaro_tail: ineq.cesaro_tail,
        a_e: ineq.a_e,
        cesaro_liminf_est: ineq.cesaro_liminf_est,
        inequality_margin: ineq.margin,
        growth_gaps: growth.gaps.clone(),
        dos_distance: dos.dos_distance,
        growth,
        dos,
        verdict,
        thresholds: config.thresholds,
        notes: vec![
            "finite-scale consistency only; no limit is claimed".into(),
            "conditions over Dirichlet-regular and harmonic-measure-a.e. points are not tested".into(),
        ],
    })
}

/// The essential spectrum assumed for each shipped family, with the truncation
/// energy when the set comes from a computed band structure.
pub fn stated_spectrum(p: &PotentialSpec) -> Result<(GapSet, Option<f64>)> {
    p.validate()?;
    match p {
        PotentialSpec::Constant { value } => Ok((GapSet::half_line(*value), None)),
        PotentialSpec::Decaying { .. } | PotentialSpec::OscillatingExample => Ok((GapSet::half_line(0.0), None)),
        PotentialSpec::SparseBumps { .. } => Ok((GapSet::half_line(0.0), None)),
        PotentialSpec::Random { low, .. } => Ok((GapSet::half_line(*low), None)),
        PotentialSpec::PeriodicSquare { delta } => {
            let lambda_max = PERIODIC_TRUNCATION;
            let bands = band_spectrum(p, 2.0 * delta, (-2.0, lambda_max + 10.0), 4000, DEFAULT_STEP)?;
            let (gs, _) = bands.to_gap_set(lambda_max)?;
            Ok((gs, Some(lambda_max)))
        }
        _ => Err(Error::InvalidArgument(
            "no essential spectrum is known for this potential; supply one explicitly".into(),
        )),
    }
}
