//! Transfer matrices, eigensolutions and their growth, Prüfer counting and
//! Weyl disks for `−u″ + V u = z u` on the half-line.
//!
//! States are ordered `(u′, u)`. On a cell where `V` is replaced by its average
//! `V̄` the propagator is `exp(h·[[0, q], [1, 0]])` with `q = V̄ − z`.

mod pruefer;
mod volterra;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{Block, PotentialSpec};

pub(crate) use pruefer::check_grid;
pub use pruefer::{eigenvalue_count, pruefer_state, zero_counting_cdf, MeasureCDF, PrueferState};
pub use volterra::{volterra_solution, volterra_solution_with, volterra_tail_bound, VolterraOptions};

/// Default cell width for potentials that are not piecewise constant.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest `|Re κ|·h` applied in one factor; keeps `cosh` far from overflow.
const MAX_GROWTH_PER_FACTOR: f64 = 20.0;

type Mat = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IDENTITY: Mat = [[ONE, ZERO], [ZERO, ONE]];

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// A complex energy with its fixed square root `k = √(−z)`, `Re k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: Complex64,
    pub k: Complex64,
}

impl SpectralPoint {
    /// Real positive energies take the limit from the upper half-plane,
    /// `k = −i√λ`.
    pub fn new(z: Complex64) -> Self {
        let k = if z.im == 0.0 {
            if z.re > 0.0 {
                Complex64::new(0.0, -z.re.sqrt())
            } else {
                Complex64::new((-z.re).sqrt(), 0.0)
            }
        } else {
            let k = (-z).sqrt();
            if k.re < 0.0 {
                -k
            } else {
                k
            }
        };
        Self { z, k }
    }

    pub fn real(lambda: f64) -> Self {
        Self::new(Complex64::new(lambda, 0.0))
    }

    pub fn from_parts(re: f64, im: f64) -> Self {
        Self::new(Complex64::new(re, im))
    }
}

impl From<Complex64> for SpectralPoint {
    fn from(z: Complex64) -> Self {
        Self::new(z)
    }
}

/// `T = e^{log_scale}·m` with `m` kept at unit size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTransferMatrix {
    pub m: Mat,
    pub log_scale: f64,
}

impl Default for ScaledTransferMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScaledTransferMatrix {
    pub fn identity() -> Self {
        Self {
            m: IDENTITY,
            log_scale: 0.0,
        }
    }

    fn renormalize(&mut self) {
        let n2 = self
            .m
            .iter()
            .flatten()
            .map(|c| c.norm_sqr())
            .fold(0.0, f64::max);
        if !(0.25..=4.0).contains(&n2) && n2 > 0.0 && n2.is_finite() {
            let n = n2.sqrt();
            for c in self.m.iter_mut().flatten() {
                *c /= n;
            }
            self.log_scale += n.ln();
        }
    }

    /// `self ← a · self`
    fn apply(&mut self, a: &Mat) {
        self.m = mat_mul(a, &self.m);
        self.renormalize();
    }

    /// `self · other`
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self {
            m: mat_mul(&self.m, &other.m),
            log_scale: self.log_scale + other.log_scale,
        };
        out.renormalize();
        out
    }

    /// `selfⁿ` by repeated squaring.
    pub fn pow(&self, mut n: u64) -> Self {
        let mut acc = Self::identity();
        let mut base = *self;
        while n > 0 {
            if n & 1 == 1 {
                acc = base.compose(&acc);
            }
            n >>= 1;
            if n > 0 {
                base = base.compose(&base);
            }
        }
        acc
    }

    /// `det T`; overflows only when `T` itself is astronomically large.
    pub fn det(&self) -> Complex64 {
        let d = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        d * (2.0 * self.log_scale).exp()
    }

    pub fn trace(&self) -> Complex64 {
        (self.m[0][0] + self.m[1][1]) * self.log_scale.exp()
    }

    /// Entries of `T` itself.
    pub fn to_unscaled(&self) -> Mat {
        let s = self.log_scale.exp();
        let mut out = self.m;
        for c in out.iter_mut().flatten() {
            *c *= s;
        }
        out
    }

    /// `log ‖T‖₂`
    pub fn log_norm(&self) -> f64 {
        let f2: f64 = self.m.iter().flatten().map(|c| c.norm_sqr()).sum();
        let det = (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]).norm();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
        self.log_scale + 0.5 * (0.5 * (f2 + disc)).ln()
    }
}

/// `exp(h·[[0, q], [1, 0]])`, possibly as `pieces` identical factors.
fn cell_matrix(q: Complex64, h: f64) -> (Mat, u64) {
    let w = q * h * h;
    if w.norm() < 1e-6 {
        let c = ONE + w * (0.5 + w * (1.0 / 24.0 + w / 720.0));
        let s = (ONE + w * (1.0 / 6.0 + w * (1.0 / 120.0 + w / 5040.0))) * h;
        return ([[c, q * s], [s, c]], 1);
    }
    if q.im == 0.0 {
        let qr = q.re;
        let (growth, real) = if qr > 0.0 {
            let kappa = qr.sqrt();
            (kappa * h, None)
        } else {
            let omega = (-qr).sqrt();
            let (s, c) = (omega * h).sin_cos();
            (0.0, Some((c, s / omega)))
        };
        let pieces = (growth / MAX_GROWTH_PER_FACTOR).ceil().max(1.0);
        let hp = h / pieces;
        let (c, s) = real.unwrap_or_else(|| {
            let kappa = qr.sqrt();
            ((kappa * hp).cosh(), (kappa * hp).sinh() / kappa)
        });
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        return ([[c, q * s], [s, c]], pieces as u64);
    }
    let kappa = q.sqrt();
    let pieces = (kappa.re.abs() * h / MAX_GROWTH_PER_FACTOR).ceil().max(1.0);
    let hp = h / pieces;
    let kh = kappa * hp;
    let (c, s) = (kh.cosh(), kh.sinh() / kappa);
    ([[c, q * s], [s, c]], pieces as u64)
}

fn apply_cell(t: &mut ScaledTransferMatrix, value: f64, h: f64, z: Complex64) {
    if h <= 0.0 {
        return;
    }
    let (a, pieces) = cell_matrix(Complex64::new(value, 0.0) - z, h);
    for _ in 0..pieces {
        t.apply(&a);
    }
}

fn apply_block(t: &mut ScaledTransferMatrix, block: Block, z: Complex64) {
    match block {
        Block::Cell { start, end, value } => apply_cell(t, value, end - start, z),
        Block::Alternating { half, repeats, .. } => {
            let mut period = ScaledTransferMatrix::identity();
            apply_cell(&mut period, 1.0, half, z);
            apply_cell(&mut period, -1.0, half, z);
            *t = period.pow(repeats).compose(t);
        }
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidStep(step))
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("position must be finite and ≥ 0, got {x}")))
    }
}

/// Incremental propagation of `T(x, z)` in `x`.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    potential: &'a PotentialSpec,
    z: Complex64,
    step: f64,
    x: f64,
    t: ScaledTransferMatrix,
}

impl<'a> Propagator<'a> {
    pub fn new(potential: &'a PotentialSpec, z: SpectralPoint, step: f64) -> Result<Self> {
        check_step(step)?;
        potential.validate()?;
        Ok(Self {
            potential,
            z: z.z,
            step,
            x: 0.0,
            t: ScaledTransferMatrix::identity(),
        })
    }

    pub fn position(&self) -> f64 {
        self.x
    }

    pub fn matrix(&self) -> &ScaledTransferMatrix {
        &self.t
    }

    /// Propagate forward to `x ≥ position()`.
    pub fn advance_to(&mut self, x: f64) -> Result<&ScaledTransferMatrix> {
        check_x(x)?;
        if x < self.x {
            return Err(Error::InvalidArgument(format!(
                "cannot propagate backwards from {} to {x}",
                self.x
            )));
        }
        let (z, t) = (self.z, &mut self.t);
        self.potential
            .for_each_block(self.x, x, self.step, |b| apply_block(t, b, z));
        self.x = x;
        Ok(&self.t)
    }
}

pub fn transfer_matrix(
    p: &PotentialSpec,
    x: f64,
    z: SpectralPoint,
    step: f64,
) -> Result<ScaledTransferMatrix> {
    let mut prop = Propagator::new(p, z, step)?;
    Ok(*prop.advance_to(x)?)
}

/// The Dirichlet solution `u(0) = 0, u′(0) = 1`, returned as scaled
/// `(u, u′, log_scale)`, i.e. `u(x) = e^{log_scale}·u`.
pub fn dirichlet_solution(
    p: &PotentialSpec,
    x: f64,
    z: SpectralPoint,
    step: f64,
) -> Result<(Complex64, Complex64, f64)> {
    let t = transfer_matrix(p, x, z, step)?;
    Ok((t.m[1][0], t.m[0][0], t.log_scale))
}

fn growth_from(t: &ScaledTransferMatrix, x: f64, z: Complex64) -> Result<f64> {
    let u = t.m[1][0].norm();
    let h = (t.log_scale + u.ln()) / x;
    if u == 0.0 || !h.is_finite() {
        return Err(Error::ZeroSolution { x, z });
    }
    Ok(h)
}

/// `h(x, z) = (1/x) log|u(x, z)|`
pub fn log_growth(p: &PotentialSpec, x: f64, z: SpectralPoint, step: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument(format!("growth rate needs x > 0, got {x}")));
    }
    let t = transfer_matrix(p, x, z, step)?;
    growth_from(&t, x, z.z)
}

/// `h(x, z)` at every point of an increasing list, in one propagation pass.
pub fn log_growth_trace(p: &PotentialSpec, xs: &[f64], z: SpectralPoint, step: f64) -> Result<Vec<f64>> {
    let mut prop = Propagator::new(p, z, step)?;
    xs.iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(Error::InvalidArgument(format!("growth rate needs x > 0, got {x}")));
            }
            let t = *prop.advance_to(x)?;
            growth_from(&t, x, z.z)
        })
        .collect()
}

/// Finite-`x` Lyapunov estimator `(1/x) log ‖T(x, z)‖₂`.
pub fn lyapunov_estimate(p: &PotentialSpec, x: f64, z: SpectralPoint, step: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument(format!("Lyapunov estimate needs x > 0, got {x}")));
    }
    Ok(transfer_matrix(p, x, z, step)?.log_norm() / x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylEstimate {
    pub value: Complex64,
    pub radius: f64,
}

/// Centre-free point `−v/u` on the Weyl circle at `x_cut` and the circle's
/// radius `1 / (2 Im z ∫₀^{x_cut} |u|²)`, with the integral evaluated through
/// the Wronskian identity `Im z ∫₀ˣ |u|² = −Im(u′ū)(x)`.
pub fn weyl_m_estimate(p: &PotentialSpec, z: SpectralPoint, x_cut: f64, step: f64) -> Result<WeylEstimate> {
    if !(z.z.im > 0.0) {
        return Err(Error::InvalidArgument(format!("Weyl disks need Im z > 0, got {}", z.z)));
    }
    if !(x_cut >= 1.0 && x_cut.is_finite()) {
        return Err(Error::InvalidArgument(format!("x_cut must be ≥ 1, got {x_cut}")));
    }
    let t = transfer_matrix(p, x_cut, z, step)?;
    let (du, u, v) = (t.m[0][0], t.m[1][0], t.m[1][1]);
    let value = -v / u;
    let flux = (du * u.conj()).im.abs();
    let radius = (-2.0 * t.log_scale).exp() / (2.0 * flux);
    if !radius.is_finite() || !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::DegenerateDisk(z.z));
    }
    Ok(WeylEstimate { value, radius })
}
