//! Potential families on the half-line `[0, ∞)`.
//!
//! Every family except [`PotentialSpec::Decaying`] is piecewise constant, and
//! all cell values are right-continuous: at a breakpoint the value of the cell
//! to the right is returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// A compactly supported, nonnegative, piecewise-constant profile.
///
/// `values[i]` is taken on `[breakpoints[i], breakpoints[i + 1])`; the profile
/// vanishes outside `[breakpoints[0], breakpoints[last])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Bump {
    pub fn indicator(width: f64, height: f64) -> Self {
        Self {
            breakpoints: vec![0.0, width],
            values: vec![height],
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    fn value_at(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y < lo || y >= hi {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b <= y) - 1;
        self.values[i]
    }

    /// ∫_{-∞}^{y} W
    fn cumulative(&self, y: f64) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if y <= a {
                break;
            }
            acc += v * (y.min(b) - a);
        }
        acc
    }

    pub fn total(&self) -> f64 {
        self.cumulative(f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        let n = self.breakpoints.len();
        if n < 2 || self.values.len() != n - 1 {
            return Err(Error::InvalidPotential(
                "bump needs at least two breakpoints and one value per cell".into(),
            ));
        }
        if self.breakpoints[0] < 0.0 || !strictly_increasing(&self.breakpoints) {
            return Err(Error::InvalidPotential(
                "bump breakpoints must be nonnegative and strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidPotential(
                "bump values must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Placement rule for the bumps of a sparse potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BumpPositions {
    /// `x_n = scale · n^exponent` for `n = 1, 2, ...`; gaps grow without bound
    /// when `exponent > 1`.
    Power { scale: f64, exponent: f64 },
    /// A finite list; consecutive gaps must be strictly increasing from index
    /// `monotone_from` on.
    Explicit {
        points: Vec<f64>,
        #[serde(default)]
        monotone_from: usize,
    },
}

impl BumpPositions {
    /// Positions `x_n ≤ end`, in increasing order.
    fn up_to(&self, end: f64) -> Vec<f64> {
        match self {
            BumpPositions::Power { scale, exponent } => {
                let mut out = Vec::new();
                let mut n = 1u64;
                loop {
                    let x = scale * (n as f64).powf(*exponent);
                    if x > end {
                        break;
                    }
                    out.push(x);
                    n += 1;
                }
                out
            }
            BumpPositions::Explicit { points, .. } => {
                points.iter().copied().take_while(|&x| x <= end).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// `values[0]` on `[0, breakpoints[0])`, `values[i]` on
    /// `[breakpoints[i-1], breakpoints[i])`, the last value to `+∞`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// `amplitude / (1 + x)^rate`
    Decaying {
        amplitude: f64,
        rate: f64,
    },
    /// Period `2δ`: `+1` on `[0, δ)`, `−1` on `[δ, 2δ)`.
    PeriodicSquare {
        delta: f64,
    },
    /// `(−1)^⌊2n(x − n)⌋` on `[n − 1, n)`.
    OscillatingExample,
    /// `Σ_n W(x − x_n)`
    SparseBumps {
        bump: Bump,
        positions: BumpPositions,
    },
    /// i.i.d. uniform values on `[low, high]`, one per cell of width `cell_width`.
    Random {
        seed: u64,
        cell_width: f64,
        low: f64,
        high: f64,
    },
    /// `values[i]` on `[grid[i], grid[i+1])`, last value to `+∞`; `grid[0] = 0`.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Running Cesàro averages `(1/x)∫₀ˣ V` and `(1/x)∫₀ˣ |V|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroTrace {
    pub x_grid: Vec<f64>,
    pub averages: Vec<f64>,
    pub abs_averages: Vec<f64>,
}

/// A run of the potential over which the propagators may be applied in one go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// Constant (or cell-averaged) value on `[start, end)`.
    Cell { start: f64, end: f64, value: f64 },
    /// `repeats` copies of (`+1` on a cell of width `half`, then `−1` on the next).
    Alternating { start: f64, half: f64, repeats: u64 },
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|x| x.is_finite())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in [0, 1) keyed by `(seed, index)`.
fn counter_uniform(seed: u64, index: u64) -> f64 {
    let h = splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl PotentialSpec {
    pub fn decaying(amplitude: f64, rate: f64) -> Self {
        Self::Decaying { amplitude, rate }
    }

    pub fn periodic_square(delta: f64) -> Self {
        Self::PeriodicSquare { delta }
    }

    /// Bumps of height 1 on `[0, width)` placed at `x_n = n²`.
    pub fn sparse_squares(width: f64) -> Self {
        Self::SparseBumps {
            bump: Bump::indicator(width, 1.0),
            positions: BumpPositions::Power {
                scale: 1.0,
                exponent: 2.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPotential(m.to_string()));
        match self {
            PotentialSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::NonIntegrable("constant value is not finite".into()));
                }
            }
            PotentialSpec::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return bad("piecewise-constant potential needs one more value than breakpoints");
                }
                if !strictly_increasing(breakpoints) || breakpoints.first().is_some_and(|&b| b <= 0.0) {
                    return bad("breakpoints must be positive and strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonIntegrable("piecewise-constant value is not finite".into()));
                }
            }
            PotentialSpec::Decaying { amplitude, rate } => {
                if !amplitude.is_finite() || !rate.is_finite() || *rate < 0.0 {
                    return bad("decaying potential needs finite amplitude and rate ≥ 0");
                }
            }
            PotentialSpec::PeriodicSquare { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return bad("half-period must be positive");
                }
            }
            PotentialSpec::OscillatingExample => {}
            PotentialSpec::SparseBumps { bump, positions } => {
                bump.validate()?;
                match positions {
                    BumpPositions::Power { scale, exponent } => {
                        if !(scale.is_finite() && *scale > 0.0 && exponent.is_finite() && *exponent > 1.0) {
                            return bad("power positions need scale > 0 and exponent > 1");
                        }
                    }
                    BumpPositions::Explicit { points, monotone_from } => {
                        if points.first().is_some_and(|&p| p < 0.0) || !strictly_increasing(points) {
                            return bad("bump positions must be nonnegative and strictly increasing");
                        }
                        let gaps: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
                        if gaps.iter().skip(*monotone_from).collect::<Vec<_>>().windows(2).any(|w| w[1] <= w[0]) {
                            return bad("bump gaps must be strictly increasing beyond the declared index");
                        }
                    }
                }
            }
            PotentialSpec::Random {
                cell_width,
                low,
                high,
                ..
            } => {
                if !(cell_width.is_finite() && *cell_width > 0.0) {
                    return bad("random cell width must be positive");
                }
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return bad("random value interval must be finite with low ≤ high");
                }
            }
            PotentialSpec::Tabulated { grid, values } => {
                if grid.is_empty() || grid.len() != values.len() {
                    return bad("tabulated potential needs one value per grid point");
                }
                if grid[0] != 0.0 || !strictly_increasing(grid) {
                    return bad("tabulated grid must start at 0 and be strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonIntegrable("tabulated value is not finite".into()));
                }
            }
        }
        Ok(())
    }

    /// True for every family whose cells are exactly constant.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, PotentialSpec::Decaying { .. })
    }

    /// Cell starts and values for the list-based step functions.
    fn steps(&self) -> Option<(Vec<f64>, &[f64])> {
        match self {
            PotentialSpec::PiecewiseConstant { breakpoints, values } => {
                let mut starts = Vec::with_capacity(values.len());
                starts.push(0.0);
                starts.extend_from_slice(breakpoints);
                Some((starts, values))
            }
            PotentialSpec::Tabulated { grid, values } => Some((grid.clone(), values)),
            _ => None,
        }
    }

    fn random_value(seed: u64, low: f64, high: f64, index: u64) -> f64 {
        low + (high - low) * counter_uniform(seed, index)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::PiecewiseConstant { .. } | PotentialSpec::Tabulated { .. } => {
                let (starts, values) = self.steps().unwrap();
                let i = starts.partition_point(|&s| s <= x).max(1) - 1;
                values[i]
            }
            PotentialSpec::Decaying { amplitude, rate } => amplitude * (1.0 + x).powf(-rate),
            PotentialSpec::PeriodicSquare { delta } => {
                let r = x.rem_euclid(2.0 * delta);
                if r < *delta {
                    1.0
                } else {
                    -1.0
                }
            }
            PotentialSpec::OscillatingExample => {
                let n = x.floor() + 1.0;
                let j = (2.0 * n * (x - n)).floor();
                if j.rem_euclid(2.0) == 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            PotentialSpec::SparseBumps { bump, positions } => {
                let (lo, hi) = bump.support();
                positions
                    .up_to(x - lo)
                    .iter()
                    .rev()
                    .take_while(|&&p| p + hi > x)
                    .map(|&p| bump.value_at(x - p))
                    .sum()
            }
            PotentialSpec::Random {
                seed,
                cell_width,
                low,
                high,
            } => {
                let i = (x / cell_width).floor() as u64;
                Self::random_value(*seed, *low, *high, i)
            }
        }
    }

    /// Exact `(∫_a^b V, ∫_a^b |V|)` for `0 ≤ a ≤ b`.
    pub fn integrals(&self, a: f64, b: f64) -> (f64, f64) {
        if b <= a {
            return (0.0, 0.0);
        }
        match self {
            PotentialSpec::Constant { value } => (value * (b - a), value.abs() * (b - a)),
            PotentialSpec::Decaying { amplitude, rate } => {
                let base = if (rate - 1.0).abs() < 1e-12 {
                    ((1.0 + b) / (1.0 + a)).ln()
                } else {
                    ((1.0 + a).powf(1.0 - rate) - (1.0 + b).powf(1.0 - rate)) / (rate - 1.0)
                };
                (amplitude * base, amplitude.abs() * base)
            }
            PotentialSpec::PeriodicSquare { delta } => {
                let cum = |x: f64| {
                    let p = (x / (2.0 * delta)).floor();
                    let r = x - p * 2.0 * delta;
                    if r < *delta {
                        r
                    } else {
                        2.0 * delta - r
                    }
                };
                (cum(b) - cum(a), b - a)
            }
            PotentialSpec::OscillatingExample => {
                let cum = |x: f64| {
                    let full = x.floor();
                    let s = x - full;
                    let n = full + 1.0;
                    let m = (2.0 * n * s).floor();
                    let rem = s - m / (2.0 * n);
                    let odd = m.rem_euclid(2.0) == 1.0;
                    if odd {
                        1.0 / (2.0 * n) - rem
                    } else {
                        rem
                    }
                };
                (cum(b) - cum(a), b - a)
            }
            _ => {
                let mut s = 0.0;
                let mut sa = 0.0;
                self.for_each_cell(a, b, 1.0, |lo, hi, v| {
                    s += v * (hi - lo);
                    sa += v.abs() * (hi - lo);
                });
                (s, sa)
            }
        }
    }

    /// Visit the constant cells of the potential covering `[from, to)`, in
    /// order. Piecewise-constant families yield their maximal constant runs
    /// (clipped to the window); `Decaying` yields cells of width `step` carrying
    /// the exact cell average.
    pub fn for_each_cell<F: FnMut(f64, f64, f64)>(&self, from: f64, to: f64, step: f64, mut f: F) {
        if to <= from {
            return;
        }
        match self {
            PotentialSpec::Constant { value } => f(from, to, *value),
            PotentialSpec::PiecewiseConstant { .. } | PotentialSpec::Tabulated { .. } => {
                let (starts, values) = self.steps().unwrap();
                let mut i = starts.partition_point(|&s| s <= from).max(1) - 1;
                let mut lo = from;
                while lo < to {
                    let hi = starts.get(i + 1).copied().unwrap_or(f64::INFINITY).min(to);
                    f(lo, hi, values[i]);
                    lo = hi;
                    i += 1;
                }
            }
            PotentialSpec::Decaying { .. } => {
                let first = (from / step).floor() as u64;
                let mut i = first;
                loop {
                    let lo = (i as f64 * step).max(from);
                    if lo >= to {
                        break;
                    }
                    let hi = ((i + 1) as f64 * step).min(to);
                    if hi > lo {
                        let (s, _) = self.integrals(lo, hi);
                        f(lo, hi, s / (hi - lo));
                    }
                    i += 1;
                }
            }
            PotentialSpec::PeriodicSquare { delta } => {
                let mut i = (from / delta).floor() as u64;
                loop {
                    let lo = (i as f64 * delta).max(from);
                    if lo >= to {
                        break;
                    }
                    let hi = ((i + 1) as f64 * delta).min(to);
                    if hi > lo {
                        f(lo, hi, if i % 2 == 0 { 1.0 } else { -1.0 });
                    }
                    i += 1;
                }
            }
            PotentialSpec::OscillatingExample => {
                let mut unit = from.floor() as u64;
                while (unit as f64) < to {
                    let n = unit + 1;
                    let width = 1.0 / (2 * n) as f64;
                    let base = unit as f64;
                    let first = ((from - base).max(0.0) * (2 * n) as f64).floor() as u64;
                    for i in first.min(2 * n - 1)..2 * n {
                        let lo = (base + i as f64 * width).max(from);
                        let hi = if i + 1 == 2 * n {
                            (base + 1.0).min(to)
                        } else {
                            (base + (i + 1) as f64 * width).min(to)
                        };
                        if hi > lo {
                            f(lo, hi, if i % 2 == 0 { 1.0 } else { -1.0 });
                        }
                        if hi >= to {
                            return;
                        }
                    }
                    unit += 1;
                }
            }
            PotentialSpec::SparseBumps { bump, positions } => {
                let (slo, shi) = bump.support();
                let pos = positions.up_to(to - slo);
                // group bumps whose supports overlap and emit their union breakpoints
                let mut cursor = from;
                let mut k = 0;
                while k < pos.len() {
                    let mut cluster_end = pos[k] + shi;
                    let mut m = k + 1;
                    while m < pos.len() && pos[m] + slo < cluster_end {
                        cluster_end = cluster_end.max(pos[m] + shi);
                        m += 1;
                    }
                    let cluster_start = pos[k] + slo;
                    if cluster_end > from {
                        let mut bps: Vec<f64> = pos[k..m]
                            .iter()
                            .flat_map(|p| bump.breakpoints.iter().map(move |b| p + b))
                            .collect();
                        bps.sort_by(f64::total_cmp);
                        bps.dedup();
                        if cluster_start > cursor {
                            let hi = cluster_start.min(to);
                            if hi > cursor {
                                f(cursor, hi, 0.0);
                            }
                            cursor = hi;
                        }
                        for w in bps.windows(2) {
                            let lo = w[0].max(cursor);
                            let hi = w[1].min(to);
                            if hi > lo {
                                let v: f64 = pos[k..m].iter().map(|p| bump.value_at(w[0] - p)).sum();
                                f(lo, hi, v);
                                cursor = hi;
                            }
                        }
                        if cursor >= to {
                            return;
                        }
                    }
                    k = m;
                }
                if to > cursor {
                    f(cursor, to, 0.0);
                }
            }
            PotentialSpec::Random {
                seed,
                cell_width,
                low,
                high,
            } => {
                let mut i = (from / cell_width).floor() as u64;
                loop {
                    let lo = (i as f64 * cell_width).max(from);
                    if lo >= to {
                        break;
                    }
                    let hi = ((i + 1) as f64 * cell_width).min(to);
                    if hi > lo {
                        f(lo, hi, Self::random_value(*seed, *low, *high, i));
                    }
                    i += 1;
                }
            }
        }
    }

    /// Like [`for_each_cell`](Self::for_each_cell), but whole periods of the
    /// alternating `±1` families are grouped so that callers can apply the
    /// one-period propagator by repeated squaring.
    pub fn for_each_block<F: FnMut(Block)>(&self, from: f64, to: f64, step: f64, mut f: F) {
        if to <= from {
            return;
        }
        let cells = |a: f64, b: f64, f: &mut F| {
            self.for_each_cell(a, b, step, |start, end, value| f(Block::Cell { start, end, value }))
        };
        match self {
            PotentialSpec::OscillatingExample => {
                let (first, last) = (from.ceil(), to.floor());
                if last <= first {
                    return cells(from, to, &mut f);
                }
                cells(from, first, &mut f);
                for unit in first as u64..last as u64 {
                    let n = unit + 1;
                    f(Block::Alternating {
                        start: unit as f64,
                        half: 1.0 / (2 * n) as f64,
                        repeats: n,
                    });
                }
                cells(last, to, &mut f);
            }
            PotentialSpec::PeriodicSquare { delta } => {
                let period = 2.0 * delta;
                let (p0, p1) = ((from / period).ceil(), (to / period).floor());
                if p1 <= p0 {
                    return cells(from, to, &mut f);
                }
                cells(from, p0 * period, &mut f);
                f(Block::Alternating {
                    start: p0 * period,
                    half: *delta,
                    repeats: (p1 - p0) as u64,
                });
                cells(p1 * period, to, &mut f);
            }
            _ => cells(from, to, &mut f),
        }
    }

    /// Breakpoints in `[lo, hi]` (piecewise-constant families only).
    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_cell(lo, hi, 1.0, |a, _, _| out.push(a));
        out.push(hi);
        out
    }

    /// `sup_{x ∈ [0, horizon]} ∫_x^{x+1} |V|`.
    pub fn local_l1_profile(&self, horizon: f64) -> Result<f64> {
        local_l1_profile(self, horizon)
    }

    pub fn cesaro_trace(&self, x_grid: &[f64]) -> Result<CesaroTrace> {
        cesaro_trace(self, x_grid)
    }
}

pub fn evaluate(p: &PotentialSpec, x: f64) -> f64 {
    p.evaluate(x)
}

pub fn local_l1_profile(p: &PotentialSpec, horizon: f64) -> Result<f64> {
    p.validate()?;
    if !(horizon.is_finite() && horizon > 1.0) {
        return Err(Error::InvalidArgument(format!("horizon must exceed 1, got {horizon}")));
    }
    let window = |x: f64| p.integrals(x, x + 1.0).1;
    let best = match p {
        PotentialSpec::Constant { value } => value.abs(),
        PotentialSpec::PeriodicSquare { .. } | PotentialSpec::OscillatingExample => 1.0,
        PotentialSpec::Decaying { amplitude, rate } => {
            // adaptive quadrature of |V| on each unit window, then golden refinement
            let abs_v = |t: f64| (amplitude * (1.0 + t).powf(-rate)).abs();
            let quad = |x: f64| -> Result<f64> {
                integrate(abs_v, x, x + 1.0, Tolerance::new(1e-14, 1e-12))
                    .map(|e| e.value)
                    .map_err(|e| Error::NonIntegrable(e.to_string()))
            };
            let n = (horizon / 0.5).ceil() as usize;
            let mut best = (0.0, quad(0.0)?);
            for i in 1..=n {
                let x = (i as f64 * 0.5).min(horizon);
                let v = quad(x)?;
                if v > best.1 {
                    best = (x, v);
                }
            }
            let (mut lo, mut hi) = ((best.0 - 0.5).max(0.0), (best.0 + 0.5).min(horizon));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let m1 = hi - g * (hi - lo);
                let m2 = lo + g * (hi - lo);
                if quad(m1)? >= quad(m2)? {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best.1.max(quad(0.5 * (lo + hi))?)
        }
        _ => {
            // F(x) = ∫_x^{x+1}|V| is piecewise linear; its maximum sits where x or
            // x + 1 meets a breakpoint, or at an end of the sweep.
            let mut candidates = vec![0.0, horizon];
            for b in p.breakpoints_in(0.0, horizon + 1.0) {
                if b <= horizon {
                    candidates.push(b);
                }
                if b >= 1.0 && b - 1.0 <= horizon {
                    candidates.push(b - 1.0);
                }
            }
            candidates.into_iter().map(window).fold(0.0, f64::max)
        }
    };
    if !best.is_finite() {
        return Err(Error::NonIntegrable("local L¹ norm is not finite".into()));
    }
    Ok(best)
}

/// Running averages on an increasing positive grid, accumulated in one pass.
pub fn cesaro_trace(p: &PotentialSpec, x_grid: &[f64]) -> Result<CesaroTrace> {
    p.validate()?;
    if x_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) || !strictly_increasing(x_grid) {
        return Err(Error::InvalidArgument(
            "Cesàro grid must be positive and strictly increasing".into(),
        ));
    }
    let mut averages = Vec::with_capacity(x_grid.len());
    let mut abs_averages = Vec::with_capacity(x_grid.len());
    let (mut s, mut sa, mut prev) = (0.0, 0.0, 0.0);
    for &x in x_grid {
        let (d, da) = p.integrals(prev, x);
        s += d;
        sa += da;
        prev = x;
        averages.push(s / x);
        abs_averages.push(sa / x);
    }
    if averages.iter().chain(&abs_averages).any(|v| !v.is_finite()) {
        return Err(Error::NonIntegrable("running integral is not finite".into()));
    }
    Ok(CesaroTrace {
        x_grid: x_grid.to_vec(),
        averages,
        abs_averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random() -> PotentialSpec {
        PotentialSpec::Random {
            seed: 7,
            cell_width: 0.5,
            low: -1.0,
            high: 2.0,
        }
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(PotentialSpec::Constant { value: 1.0 }.evaluate(3.7), 1.0);
        assert_eq!(PotentialSpec::OscillatingExample.evaluate(0.1), 1.0);
        assert_eq!(PotentialSpec::periodic_square(0.5).evaluate(0.75), -1.0);
        assert_eq!(PotentialSpec::periodic_square(0.5).evaluate(0.25), 1.0);
    }

    #[test]
    fn oscillating_example_follows_its_definition() {
        let p = PotentialSpec::OscillatingExample;
        // on [1, 2): n = 2, cells of width 1/4 starting with +1
        assert_eq!(p.evaluate(1.1), 1.0);
        assert_eq!(p.evaluate(1.3), -1.0);
        assert_eq!(p.evaluate(1.6), 1.0);
        assert_eq!(p.evaluate(1.9), -1.0);
        let mut cells = Vec::new();
        p.for_each_cell(0.0, 3.0, 1.0, |a, b, v| cells.push((a, b, v)));
        assert_eq!(cells.len(), 2 + 4 + 6);
        for &(a, b, v) in &cells {
            assert_eq!(p.evaluate(0.5 * (a + b)), v);
        }
    }

    #[test]
    fn right_continuity_at_breakpoints() {
        let p = PotentialSpec::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            values: vec![3.0, -1.0, 5.0],
        };
        assert_eq!(p.evaluate(0.0), 3.0);
        assert_eq!(p.evaluate(1.0), -1.0);
        assert_eq!(p.evaluate(2.0), 5.0);
        assert_eq!(p.evaluate(1e6), 5.0);
        let t = PotentialSpec::Tabulated {
            grid: vec![0.0, 0.5],
            values: vec![2.0, 4.0],
        };
        assert_eq!(t.evaluate(0.5), 4.0);
        assert_eq!(t.evaluate(0.49), 2.0);
    }

    #[test]
    fn sparse_bumps_sit_at_squares() {
        let p = PotentialSpec::sparse_squares(0.5);
        assert_eq!(p.evaluate(0.5), 0.0);
        assert_eq!(p.evaluate(1.2), 1.0);
        assert_eq!(p.evaluate(1.5), 0.0);
        assert_eq!(p.evaluate(4.0), 1.0);
        assert_eq!(p.evaluate(9.49), 1.0);
        assert_eq!(p.evaluate(12.0), 0.0);
        let (s, sa) = p.integrals(0.0, 101.0);
        assert_relative_eq!(s, 5.0, max_relative = 1e-14);
        assert_relative_eq!(sa, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn overlapping_bumps_add_up() {
        let p = PotentialSpec::SparseBumps {
            bump: Bump::indicator(2.0, 1.0),
            positions: BumpPositions::Explicit {
                points: vec![0.0, 1.0, 5.0],
                monotone_from: 0,
            },
        };
        p.validate().unwrap();
        assert_eq!(p.evaluate(0.5), 1.0);
        assert_eq!(p.evaluate(1.5), 2.0);
        assert_eq!(p.evaluate(2.5), 1.0);
        assert_eq!(p.evaluate(3.5), 0.0);
        let (s, _) = p.integrals(0.0, 10.0);
        assert_relative_eq!(s, 6.0, max_relative = 1e-14);
    }

    #[test]
    fn explicit_positions_must_have_growing_gaps() {
        let p = PotentialSpec::SparseBumps {
            bump: Bump::indicator(0.5, 1.0),
            positions: BumpPositions::Explicit {
                points: vec![0.0, 2.0, 3.0, 10.0, 20.0],
                monotone_from: 0,
            },
        };
        assert!(p.validate().is_err());
        let p = PotentialSpec::SparseBumps {
            bump: Bump::indicator(0.5, 1.0),
            positions: BumpPositions::Explicit {
                points: vec![0.0, 2.0, 3.0, 10.0, 20.0],
                monotone_from: 1,
            },
        };
        p.validate().unwrap();
    }

    #[test]
    fn local_profile_examples() {
        assert_eq!(PotentialSpec::Constant { value: 2.0 }.local_l1_profile(10.0).unwrap(), 2.0);
        assert_eq!(PotentialSpec::OscillatingExample.local_l1_profile(10.0).unwrap(), 1.0);
        let d = PotentialSpec::decaying(1.0, 2.0).local_l1_profile(100.0).unwrap();
        assert!(d > 0.0 && d <= 1.0);
        assert_relative_eq!(d, 0.5, max_relative = 1e-10);
        let s = PotentialSpec::sparse_squares(0.5).local_l1_profile(50.0).unwrap();
        assert_relative_eq!(s, 0.5, max_relative = 1e-14);
        assert!(matches!(
            PotentialSpec::Constant { value: 1.0 }.local_l1_profile(0.5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_finite_tabulated_values_are_rejected() {
        let t = PotentialSpec::Tabulated {
            grid: vec![0.0, 1.0],
            values: vec![1.0, f64::NAN],
        };
        assert!(matches!(t.local_l1_profile(5.0), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn cesaro_examples() {
        let grid: Vec<f64> = (1..=50).map(|n| n as f64).collect();
        let c = PotentialSpec::Constant { value: 1.0 }.cesaro_trace(&grid).unwrap();
        assert!(c.averages.iter().all(|&a| (a - 1.0).abs() < 1e-15));
        let o = PotentialSpec::OscillatingExample.cesaro_trace(&grid).unwrap();
        assert!(o.abs_averages.iter().all(|&a| a == 1.0));
        assert!(o.averages.iter().all(|&a| a.abs() < 1e-14));
        // ∫W = 1 at positions n²: average at x_n bounded by (n+1)/x_n
        let p = PotentialSpec::sparse_squares(1.0);
        let xs: Vec<f64> = (1..=30).map(|n| (n * n) as f64).collect();
        let tr = p.cesaro_trace(&xs).unwrap();
        for (n, a) in (1..=30).zip(tr.averages) {
            assert!(a <= (n as f64 + 1.0) / (n * n) as f64 + 1e-15);
        }
    }

    #[test]
    fn periodic_square_has_zero_mean_over_a_period() {
        for delta in [0.5, 0.1, 0.037] {
            let p = PotentialSpec::periodic_square(delta);
            assert_eq!(p.integrals(0.0, 2.0 * delta).0, 0.0);
        }
    }

    #[test]
    fn random_is_reproducible_and_bounded() {
        let p = random();
        let a: Vec<f64> = (0..200).map(|i| p.evaluate(i as f64 * 0.37)).collect();
        let b: Vec<f64> = (0..200).map(|i| random().evaluate(i as f64 * 0.37)).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| (-1.0..=2.0).contains(&v)));
        let other = PotentialSpec::Random {
            seed: 8,
            cell_width: 0.5,
            low: -1.0,
            high: 2.0,
        };
        assert_ne!(p.evaluate(0.1), other.evaluate(0.1));
    }

    #[test]
    fn decaying_cells_carry_exact_averages() {
        let p = PotentialSpec::decaying(1.0, 2.0);
        let mut total = 0.0;
        p.for_each_cell(0.0, 3.0, 0.25, |a, b, v| total += v * (b - a));
        assert_relative_eq!(total, 1.0 - 0.25, max_relative = 1e-14);
    }

    #[test]
    fn json_roundtrip_uses_variant_tag() {
        let p = PotentialSpec::sparse_squares(0.5);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"variant\":\"sparse_bumps\""));
        let back: PotentialSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let o: PotentialSpec = serde_json::from_str(r#"{"variant":"oscillating_example"}"#).unwrap();
        assert_eq!(o, PotentialSpec::OscillatingExample);
        let bad = serde_json::from_str::<PotentialSpec>(r#"{"variant":"constant","value":1,"extra":2}"#);
        assert!(bad.is_err());
    }
}
