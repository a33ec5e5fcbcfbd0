//! Martin function of a finite-gap set `E = [b₀, ∞) \ ∪ⱼ (aⱼ, bⱼ)`.
//!
//! With `f(z) = iΘ′(z) = ½ (b₀ − z)^{−1/2} ∏ⱼ (cⱼ − z) / ((aⱼ − z)^{1/2} (bⱼ − z)^{1/2})`
//! (principal roots), `Θ` maps the upper half-plane onto a comb and
//! `M = Im Θ`. On the real line write `D(t) = |f(t)|`:
//!
//! * below `b₀`, `f = D` and `M(x) = ∫ₓ^{b₀} D`;
//! * on a band, `f = iD`, so `Re Θ` grows at rate `D` and `M = 0`;
//! * in gap `j`, `f = −sgn(cⱼ − t) D`, so `M` rises from `aⱼ` to its maximum
//!   at `cⱼ` and falls back to zero at `bⱼ`.
//!
//! The critical points are fixed by requiring both descents to meet, i.e.
//! `Fⱼ(c) = ∫_{aⱼ}^{bⱼ} (cⱼ − t) wⱼ(t) dt = 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::MeasureCDF;
use crate::quadrature::{integrate, integrate_sqrt_ends, Side, Tolerance};

/// Distance below which a point counts as lying on `E`.
pub const ON_SPECTRUM_TOL: f64 = 1e-14;

/// Smallest admissible distance between an integration path and `E`.
pub const PATH_CLEARANCE_TOL: f64 = 1e-12;

const MAX_NEWTON_ITERATIONS: usize = 50;
const RESIDUAL_TOL: f64 = 1e-10;

fn quad_tol() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 20_000,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSet {
    pub b0: f64,
    #[serde(default)]
    pub gaps: Vec<[f64; 2]>,
}

impl GapSet {
    pub fn new(b0: f64, gaps: Vec<[f64; 2]>) -> Result<Self> {
        let gs = Self { b0, gaps };
        gs.validate()?;
        Ok(gs)
    }

    /// `E = [b₀, ∞)`
    pub fn half_line(b0: f64) -> Self {
        Self { b0, gaps: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        let edges = self.edges();
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidGapSet("edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGapSet(
                "need b0 < a1 < b1 < a2 < ... with nondegenerate gaps".into(),
            ));
        }
        Ok(())
    }

    /// `[b₀, a₁, b₁, …, a_N, b_N]`
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(1 + 2 * self.gaps.len());
        e.push(self.b0);
        for g in &self.gaps {
            e.extend_from_slice(g);
        }
        e
    }

    pub fn gap_index(&self, x: f64) -> Option<usize> {
        self.gaps.iter().position(|g| g[0] < x && x < g[1])
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.b0 && self.gap_index(x).is_none()
    }

    /// Bands as `(lo, hi, lo_edge_index, hi_edge_index)`; the last is unbounded.
    fn bands(&self) -> Vec<(f64, f64, usize, Option<usize>)> {
        let n = self.gaps.len();
        (0..=n)
            .map(|i| {
                let lo = if i == 0 { self.b0 } else { self.gaps[i - 1][1] };
                let lo_idx = 2 * i;
                if i < n {
                    (lo, self.gaps[i][0], lo_idx, Some(2 * i + 1))
                } else {
                    (lo, f64::INFINITY, lo_idx, None)
                }
            })
            .collect()
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        if self.contains(z.re) {
            return z.im.abs();
        }
        let dx = if z.re < self.b0 {
            self.b0 - z.re
        } else {
            let g = self.gaps[self.gap_index(z.re).unwrap()];
            (z.re - g[0]).min(g[1] - z.re)
        };
        dx.hypot(z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    pub c: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartinEvaluation {
    pub z: Complex64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `Re Θ(z)` normalised by `Re Θ(b₀) = 0`, continued along the path used
    /// for `M`; on a band it is `π ρ_E((−∞, z])`.
    pub theta_real: f64,
}

/// Evaluation context for a gap set with its critical points.
struct Comb<'a> {
    gs: &'a GapSet,
    c: &'a [f64],
    edges: Vec<f64>,
}

impl<'a> Comb<'a> {
    fn new(gs: &'a GapSet, c: &'a [f64]) -> Result<Self> {
        gs.validate()?;
        if c.len() != gs.gaps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} critical points for {} gaps",
                c.len(),
                gs.gaps.len()
            )));
        }
        for (cj, g) in c.iter().zip(&gs.gaps) {
            if !(g[0] < *cj && *cj < g[1]) {
                return Err(Error::InvalidArgument(format!("critical point {cj} outside its gap {g:?}")));
            }
        }
        Ok(Self {
            gs,
            c,
            edges: gs.edges(),
        })
    }

    /// `∏_{l ≠ skip} |c_l − t| / ∏_{e ≠ pin} √|t − e|`
    fn weight(&self, t: f64, skip: Option<usize>, pin: Option<usize>) -> f64 {
        let mut num = 1.0;
        for (l, cl) in self.c.iter().enumerate() {
            if Some(l) != skip {
                num *= (cl - t).abs();
            }
        }
        let mut den = 1.0;
        for (i, e) in self.edges.iter().enumerate() {
            if Some(i) != pin {
                den *= (t - e).abs();
            }
        }
        num / den.sqrt()
    }

    /// `∫_lo^hi g(t) D(t) dt` with square-root substitutions at both ends;
    /// `lo_edge`/`hi_edge` name the edges sitting exactly at the endpoints.
    fn density_integral<G: Fn(f64) -> f64>(
        &self,
        lo: f64,
        hi: f64,
        lo_edge: Option<usize>,
        hi_edge: Option<usize>,
        g: G,
    ) -> Result<f64> {
        integrate_sqrt_ends(
            |t, s, side| {
                let pin = match side {
                    Side::Left => lo_edge,
                    Side::Right => hi_edge,
                };
                // 2s·D(t) with D = ½·weight; a pinned edge contributes exactly s
                let v = match pin {
                    Some(e) => self.weight(t, None, Some(e)),
                    None => s * self.weight(t, None, None),
                };
                g(t) * v
            },
            lo,
            hi,
            quad_tol(),
        )
    }

    /// `∫_{aⱼ}^{bⱼ} g(u) wⱼ(aⱼ + u) du`. The integrand receives the offset
    /// `u = t − aⱼ` and both edge distances are formed from `s`, so narrow
    /// gaps lose nothing to cancellation.
    fn gap_integral<G: Fn(f64) -> f64>(&self, j: usize, g: G) -> Result<f64> {
        let [a, b] = self.gs.gaps[j];
        let width = b - a;
        let (ia, ib) = (2 * j + 1, 2 * j + 2);
        integrate_sqrt_ends(
            |t, s, side| {
                let s2 = s * s;
                let (u, other) = match side {
                    Side::Left => (s2, width - s2),
                    Side::Right => (width - s2, width - s2),
                };
                let mut num = 1.0;
                for (l, cl) in self.c.iter().enumerate() {
                    if l != j {
                        num *= (cl - t).abs();
                    }
                }
                let mut den = other;
                for (i, e) in self.edges.iter().enumerate() {
                    if i != ia && i != ib {
                        den *= (t - e).abs();
                    }
                }
                2.0 * g(u) * num / den.sqrt()
            },
            a,
            b,
            quad_tol(),
        )
    }

    /// `f(z) = iΘ′(z)`
    fn f(&self, z: Complex64) -> Complex64 {
        let mut v = Complex64::new(0.5, 0.0) / (Complex64::new(self.gs.b0, 0.0) - z).sqrt();
        for (cj, g) in self.c.iter().zip(&self.gs.gaps) {
            let a = (Complex64::new(g[0], 0.0) - z).sqrt();
            let b = (Complex64::new(g[1], 0.0) - z).sqrt();
            v *= (Complex64::new(*cj, 0.0) - z) / (a * b);
        }
        v
    }

    /// `∫ Θ′ dζ` along the straight segment `z0 → z1`.
    fn segment(&self, z0: Complex64, z1: Complex64) -> Result<Complex64> {
        if z0 == z1 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let dz = z1 - z0;
        let minus_i = Complex64::new(0.0, -1.0);
        integrate_sqrt_ends(
            |tau, s, _| minus_i * self.f(z0 + dz * tau) * dz * (2.0 * s),
            0.0,
            1.0,
            quad_tol(),
        )
    }

    /// `M(x) − √(b₀ − x)` for `x < b₀`, via `t = b₀ − s²`:
    /// `M = ∫₀^S ∏ r_l ds` with `r_l = (c_l − t)/√((a_l − t)(b_l − t))`.
    fn below_correction(&self, x: f64) -> Result<f64> {
        let big_s = (self.gs.b0 - x).sqrt();
        if self.c.is_empty() || big_s == 0.0 {
            return Ok(0.0);
        }
        let b0 = self.gs.b0;
        let p_minus_one = |s: f64| {
            let s2 = s * s;
            let t = b0 - s2;
            let mut log_p = 0.0;
            for (cl, g) in self.c.iter().zip(&self.gs.gaps) {
                let (a, b) = (g[0], g[1]);
                let root = ((a - b0 + s2) * (b - b0 + s2)).sqrt();
                let numer = cl * cl - a * b + (a + b - 2.0 * cl) * t;
                let r_minus_one = numer / (root * ((cl - b0 + s2) + root));
                log_p += r_minus_one.ln_1p();
            }
            log_p.exp_m1()
        };
        Ok(integrate(p_minus_one, 0.0, big_s, quad_tol())?.value)
    }

    /// `(M(x), Re Θ(x))` at a real point off `E`, or on a band from above.
    fn real_point(&self, x: f64) -> Result<(f64, f64)> {
        if x < self.gs.b0 {
            return Ok(((self.gs.b0 - x).sqrt() + self.below_correction(x)?, 0.0));
        }
        let theta = self.band_mass(self.gs.b0, x)?;
        match self.gs.gap_index(x) {
            None => Ok((0.0, theta)),
            Some(j) => {
                let [a, b] = self.gs.gaps[j];
                let cj = self.c[j];
                let m = if x <= cj {
                    self.density_integral(a, x, Some(2 * j + 1), None, |_| 1.0)?
                } else {
                    self.density_integral(x, b, None, Some(2 * j + 2), |_| 1.0)?
                };
                Ok((m, theta))
            }
        }
    }

    /// `∫_{[lo, hi] ∩ E} D`
    fn band_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (blo, bhi, lo_idx, hi_idx) in self.gs.bands() {
            let (p, q) = (lo.max(blo), hi.min(bhi));
            if q <= p {
                continue;
            }
            let pe = (p == blo).then_some(lo_idx);
            let qe = if q == bhi { hi_idx } else { None };
            acc += self.density_integral(p, q, pe, qe, |_| 1.0)?;
        }
        Ok(acc)
    }

    fn evaluate(&self, z: Complex64) -> Result<MartinEvaluation> {
        let (x, y) = (z.re, z.im);
        if y == 0.0 {
            let (m, theta_real) = self.real_point(x)?;
            return Ok(MartinEvaluation { z, m, theta_real });
        }
        let up = Complex64::new(0.0, y.signum());
        let (anchor, path): (f64, Vec<Complex64>) = if !self.gs.contains(x) {
            (x, vec![z])
        } else {
            if y.abs() < PATH_CLEARANCE_TOL {
                return Err(Error::PathTooCloseToSpectrum { clearance: y.abs() });
            }
            let mut anchor = self.gs.b0 - 1.0;
            for g in &self.gs.gaps {
                let mid = 0.5 * (g[0] + g[1]);
                if (mid - x).abs() < (anchor - x).abs() {
                    anchor = mid;
                }
            }
            let h = y.abs().max(1.0);
            let top = Complex64::new(x, 0.0) + up * h;
            (anchor, vec![Complex64::new(anchor, 0.0) + up * h, top, z])
        };
        let (m0, r0) = self.real_point(anchor)?;
        let mut theta = Complex64::new(r0, m0);
        let mut from = Complex64::new(anchor, 0.0);
        for to in path {
            theta += self.segment(from, to)?;
            from = to;
        }
        Ok(MartinEvaluation {
            z,
            m: theta.im,
            theta_real: theta.re,
        })
    }

    /// Residuals, gap-local scales and Jacobian of the period system.
    fn system(&self) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>)> {
        let n = self.c.len();
        let mut f = vec![0.0; n];
        let mut scale = vec![0.0; n];
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let a = self.gs.gaps[j][0];
            let dj = self.c[j] - a;
            f[j] = self.gap_integral(j, |u| dj - u)?;
            scale[j] = self.gap_integral(j, |u| (dj - u).abs())?;
            jac[(j, j)] = self.gap_integral(j, |_| 1.0)?;
            for l in (0..n).filter(|&l| l != j) {
                let dl = self.c[l] - a;
                jac[(j, l)] = self.gap_integral(j, |u| (dj - u) / (dl - u))?;
            }
        }
        Ok((f, scale, jac))
    }
}

fn scaled_norm(f: &[f64], scale: &[f64]) -> f64 {
    f.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>().sqrt()
}

/// Since `Fⱼ` is affine in `cⱼ`, each coordinate solve is the weighted mean
/// `cⱼ = ∫ t wⱼ / ∫ wⱼ`; one Gauss–Seidel sweep over all gaps.
fn coordinate_sweep(gs: &GapSet, c: &mut [f64]) -> Result<()> {
    for j in 0..c.len() {
        let comb = Comb {
            gs,
            c,
            edges: gs.edges(),
        };
        let mass = comb.gap_integral(j, |_| 1.0)?;
        let first = comb.gap_integral(j, |u| u)?;
        let [a, b] = gs.gaps[j];
        c[j] = (a + first / mass).clamp(a + (b - a) * 1e-15, b - (b - a) * 1e-15);
    }
    Ok(())
}

pub fn solve_critical_points(gs: &GapSet) -> Result<CriticalPoints> {
    gs.validate()?;
    let n = gs.gaps.len();
    if n == 0 {
        return Ok(CriticalPoints {
            c: vec![],
            residuals: vec![],
        });
    }
    let mut c: Vec<f64> = gs.gaps.iter().map(|g| 0.5 * (g[0] + g[1])).collect();
    for _ in 0..2 {
        coordinate_sweep(gs, &mut c)?;
    }
    let mut last_residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let comb = Comb::new(gs, &c)?;
        let (f, scale, jac) = comb.system()?;
        let norm = scaled_norm(&f, &scale);
        last_residual = norm;
        // a few ulps of cⱼ move Fⱼ by that much; narrower gaps cannot do better
        let converged = (0..n).all(|j| {
            let floor = 4.0 * f64::EPSILON * c[j].abs() * jac[(j, j)];
            f[j].abs() <= (RESIDUAL_TOL * scale[j]).max(floor)
        });
        if converged {
            return Ok(CriticalPoints { c, residuals: f });
        }
        let step = jac.lu().solve(&-DVector::from_vec(f.clone()));
        let mut accepted = false;
        if let Some(step) = step {
            let mut damping = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(ci, d)| ci + damping * d).collect();
                let interior = trial
                    .iter()
                    .zip(&gs.gaps)
                    .all(|(t, g)| g[0] < *t && *t < g[1]);
                if interior {
                    let comb = Comb::new(gs, &trial)?;
                    let tf: Vec<f64> = (0..n)
                        .map(|j| {
                            let dj = trial[j] - gs.gaps[j][0];
                            comb.gap_integral(j, |u| dj - u)
                        })
                        .collect::<Result<_>>()?;
                    if scaled_norm(&tf, &scale) < norm {
                        c = trial;
                        accepted = true;
                        break;
                    }
                }
                damping *= 0.5;
            }
        }
        if !accepted {
            coordinate_sweep(gs, &mut c)?;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: last_residual,
    })
}

/// `iΘ′(z)` for `z` off `E`.
pub fn theta_prime(gs: &GapSet, cp: &CriticalPoints, z: Complex64) -> Result<Complex64> {
    let comb = Comb::new(gs, &cp.c)?;
    if gs.distance(z) < ON_SPECTRUM_TOL {
        return Err(Error::OnSpectrum(z));
    }
    Ok(comb.f(z))
}

/// Boundary value of `iΘ′` on `E` taken from the upper half-plane; equals
/// `i·πρ′_E(x)` inside a band.
pub fn theta_prime_boundary(gs: &GapSet, cp: &CriticalPoints, x: f64) -> Result<Complex64> {
    let comb = Comb::new(gs, &cp.c)?;
    if gs.edges().contains(&x) {
        return Err(Error::OnSpectrum(Complex64::new(x, 0.0)));
    }
    if !gs.contains(x) {
        return Ok(comb.f(Complex64::new(x, 0.0)));
    }
    Ok(Complex64::new(0.0, 0.5 * comb.weight(x, None, None)))
}

pub fn martin_function(gs: &GapSet, cp: &CriticalPoints, z: Complex64) -> Result<MartinEvaluation> {
    Comb::new(gs, &cp.c)?.evaluate(z)
}

/// `a_E = b₀ + Σⱼ (aⱼ + bⱼ − 2cⱼ)`
pub fn a_constant(gs: &GapSet, cp: &CriticalPoints) -> f64 {
    gs.b0
        + gs
            .gaps
            .iter()
            .zip(&cp.c)
            .map(|(g, c)| g[0] + g[1] - 2.0 * c)
            .sum::<f64>()
}

/// Least-squares estimate of `a_E` from `y(k) = 2k(M(−k²) − k)` on
/// `k ∈ [10, 100]`, fitted by `A + B/k + C/k²`; returns `A`.
pub fn fit_a_from_martin(gs: &GapSet, cp: &CriticalPoints, k_grid: &[f64]) -> Result<f64> {
    let comb = Comb::new(gs, &cp.c)?;
    let mut ks: Vec<f64> = k_grid.to_vec();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 8 {
        return Err(Error::FitIllConditioned(format!(
            "need at least 8 distinct k values, got {}",
            ks.len()
        )));
    }
    if ks.iter().any(|k| !(10.0..=100.0).contains(k)) {
        return Err(Error::InvalidArgument("k grid must lie in [10, 100]".into()));
    }
    let b0 = gs.b0;
    let mut design = DMatrix::zeros(ks.len(), 3);
    let mut y = DVector::zeros(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let x = -k * k;
        // √(b₀ + k²) − k without cancellation
        let free = b0 / ((b0 + k * k).sqrt() + k);
        y[i] = 2.0 * k * (free + comb.below_correction(x)?);
        design[(i, 0)] = 1.0;
        design[(i, 1)] = 1.0 / k;
        design[(i, 2)] = 1.0 / (k * k);
    }
    // scale columns before judging conditioning
    let norms: Vec<f64> = (0..3).map(|j| design.column(j).norm()).collect();
    for j in 0..3 {
        let n = norms[j];
        design.column_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    let svd = design.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) || smax / smin > 1e10 {
        return Err(Error::FitIllConditioned(format!("condition number {:e}", smax / smin)));
    }
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::FitIllConditioned(e.to_string()))?;
    let a = coef[0] / norms[0];
    if !a.is_finite() {
        return Err(Error::FitIllConditioned("non-finite coefficient".into()));
    }
    Ok(a)
}

/// `ρ_E((−∞, λ])` on an increasing grid, accumulated band by band.
pub fn martin_measure_cdf(gs: &GapSet, cp: &CriticalPoints, lambda_grid: &[f64]) -> Result<MeasureCDF> {
    crate::propagation::check_grid(lambda_grid)?;
    let comb = Comb::new(gs, &cp.c)?;
    let mut cdf = Vec::with_capacity(lambda_grid.len());
    let mut pos = gs.b0;
    let mut acc = 0.0;
    for &l in lambda_grid {
        if l > pos {
            acc += comb.band_mass(pos, l)?;
            pos = l;
        }
        cdf.push(acc / PI);
    }
    MeasureCDF::new(lambda_grid.to_vec(), cdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_gap() -> (GapSet, CriticalPoints) {
        let gs = GapSet::new(0.0, vec![[1.0, 2.0]]).unwrap();
        let cp = solve_critical_points(&gs).unwrap();
        (gs, cp)
    }

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gap_set_validation() {
        assert!(GapSet::new(0.0, vec![[1.0, 2.0], [3.0, 4.0]]).is_ok());
        assert!(GapSet::new(0.0, vec![[2.0, 1.0]]).is_err());
        assert!(GapSet::new(1.5, vec![[1.0, 2.0]]).is_err());
        assert!(GapSet::new(0.0, vec![[1.0, 3.0], [2.0, 4.0]]).is_err());
        let json: GapSet = serde_json::from_str(r#"{"b0": 0, "gaps": [[1, 2]]}"#).unwrap();
        assert_eq!(json.gaps, vec![[1.0, 2.0]]);
    }

    #[test]
    fn free_theta_prime() {
        let gs = GapSet::half_line(0.0);
        let cp = solve_critical_points(&gs).unwrap();
        assert!(cp.c.is_empty());
        assert_relative_eq!(theta_prime(&gs, &cp, cz(-1.0, 0.0)).unwrap().re, 0.5);
        assert_relative_eq!(theta_prime(&gs, &cp, cz(-4.0, 0.0)).unwrap().re, 0.25);
        assert!(matches!(theta_prime(&gs, &cp, cz(1.0, 0.0)), Err(Error::OnSpectrum(_))));
    }

    #[test]
    fn free_martin_function() {
        let gs = GapSet::half_line(0.0);
        let cp = solve_critical_points(&gs).unwrap();
        assert_relative_eq!(martin_function(&gs, &cp, cz(-1.0, 0.0)).unwrap().m, 1.0);
        for z in [cz(3.0, 0.5), cz(-2.0, 1.5), cz(0.5, -2.0), cz(10.0, 0.01)] {
            let m = martin_function(&gs, &cp, z).unwrap().m;
            assert!((m - (-z).sqrt().re).abs() < 1e-10, "{z}: {m}");
        }
        assert_eq!(martin_function(&gs, &cp, cz(2.0, 0.0)).unwrap().m, 0.0);
    }

    #[test]
    fn single_gap_critical_point() {
        let (gs, cp) = one_gap();
        let c = cp.c[0];
        assert!(1.0 < c && c < 2.0);
        // regression baseline from an independent bisection with tanh-sinh quadrature
        assert!((c - 1.456_946_581_044_462_2).abs() < 1e-9, "{c}");
        assert_relative_eq!(a_constant(&gs, &cp), 3.0 - 2.0 * c);
    }

    #[test]
    fn narrow_gap_critical_point_is_squeezed() {
        for eps in [1e-2, 1e-4, 1e-6] {
            let gs = GapSet::new(0.0, vec![[2.0 - eps, 2.0]]).unwrap();
            let cp = solve_critical_points(&gs).unwrap();
            assert!((cp.c[0] - (2.0 - eps)).abs() <= eps);
        }
    }

    #[test]
    fn sign_flips_across_the_critical_point() {
        let (gs, cp) = one_gap();
        let c = cp.c[0];
        assert!(theta_prime(&gs, &cp, cz(-0.5, 0.0)).unwrap().re > 0.0);
        let left = theta_prime(&gs, &cp, cz(0.5 * (1.0 + c), 0.0)).unwrap();
        let right = theta_prime(&gs, &cp, cz(0.5 * (c + 2.0), 0.0)).unwrap();
        assert!(left.im.abs() < 1e-15 && right.im.abs() < 1e-15);
        assert!(left.re * right.re < 0.0);
    }

    #[test]
    fn product_form_matches_exponential_form() {
        // iΘ′(z) = C/√(b₀−z) · exp(∫ ξ(x)(1+xz)/((x−z)(1+x²)) dx), ξ = ±½ on (a,c)/(c,b)
        let (gs, cp) = one_gap();
        let (a, b, c) = (1.0, 2.0, cp.c[0]);
        let exp_form = |z: Complex64| {
            let kern = |x: f64| (1.0 + x * z) / ((x - z) * (1.0 + x * x));
            let tol = Tolerance::default();
            let up = integrate(|x| kern(x) * 0.5, a, c, tol).unwrap().value;
            let down = integrate(|x| kern(x) * -0.5, c, b, tol).unwrap().value;
            (up + down).exp() / (-z).sqrt()
        };
        let ratios: Vec<Complex64> = [cz(-1.0, 0.0), cz(0.5, 1.0), cz(3.0, -2.0), cz(-5.0, 0.3)]
            .iter()
            .map(|&z| theta_prime(&gs, &cp, z).unwrap() / exp_form(z))
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).norm() < 1e-10 * ratios[0].norm());
            assert!(r.im.abs() < 1e-10 && r.re > 0.0);
        }
    }

    #[test]
    fn gap_values_agree_from_both_ends() {
        let (gs, cp) = one_gap();
        let c = cp.c[0];
        let comb = Comb::new(&gs, &cp.c).unwrap();
        let from_left = comb.density_integral(1.0, c, Some(1), None, |_| 1.0).unwrap();
        let from_right = comb.density_integral(c, 2.0, None, Some(2), |_| 1.0).unwrap();
        assert!((from_left - from_right).abs() < 1e-11);
        let m = martin_function(&gs, &cp, cz(c, 0.0)).unwrap().m;
        assert!(m > 0.0);
        // M is maximal at c along the gap
        for x in [1.1, 1.3, c - 0.01, c + 0.01, 1.8, 1.95] {
            assert!(martin_function(&gs, &cp, cz(x, 0.0)).unwrap().m < m);
        }
    }

    #[test]
    fn vertical_and_detour_paths_agree() {
        let (gs, cp) = one_gap();
        let comb = Comb::new(&gs, &cp.c).unwrap();
        // z above a band reached through the gap anchor versus from below b₀
        let z = cz(0.4, 0.7);
        let direct = comb.evaluate(z).unwrap().m;
        let mut theta = Complex64::new(0.0, comb.real_point(-3.0).unwrap().0);
        theta += comb.segment(cz(-3.0, 0.0), cz(-3.0, 0.7)).unwrap();
        theta += comb.segment(cz(-3.0, 0.7), z).unwrap();
        assert!((theta.im - direct).abs() < 1e-10);
    }

    #[test]
    fn symmetry_and_lower_bound() {
        let gs = GapSet::new(-0.5, vec![[1.0, 2.0], [4.0, 4.5]]).unwrap();
        let cp = solve_critical_points(&gs).unwrap();
        for z in [cz(0.3, 0.4), cz(1.5, 0.2), cz(6.0, 2.0), cz(-3.0, 1.0), cz(4.2, 0.05)] {
            let up = martin_function(&gs, &cp, z).unwrap().m;
            let down = martin_function(&gs, &cp, z.conj()).unwrap().m;
            assert!((up - down).abs() < 1e-10, "{z}: {up} vs {down}");
            assert!(up >= (Complex64::new(gs.b0, 0.0) - z).sqrt().re - 1e-12);
        }
    }

    #[test]
    fn free_measure() {
        let gs = GapSet::half_line(0.0);
        let cp = solve_critical_points(&gs).unwrap();
        let grid = [0.0, 0.5, 1.0, PI * PI, 40.0];
        let cdf = martin_measure_cdf(&gs, &cp, &grid).unwrap();
        for (l, v) in grid.iter().zip(&cdf.cdf) {
            assert!((v - l.sqrt() / PI).abs() < 1e-12);
        }
        assert!((cdf.cdf[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_is_flat_across_a_gap() {
        let (gs, cp) = one_gap();
        let cdf = martin_measure_cdf(&gs, &cp, &[0.5, 1.0, 1.3, 1.7, 2.0, 3.0]).unwrap();
        assert_eq!(cdf.cdf[1], cdf.cdf[2]);
        assert_eq!(cdf.cdf[2], cdf.cdf[3]);
        assert_eq!(cdf.cdf[3], cdf.cdf[4]);
        assert!(cdf.cdf[5] > cdf.cdf[4] && cdf.cdf[0] > 0.0);
        // theta_real on a band is π times the CDF
        let ev = martin_function(&gs, &cp, cz(3.0, 0.0)).unwrap();
        assert!((ev.theta_real - PI * cdf.cdf[5]).abs() < 1e-12);
    }

    #[test]
    fn fits_recover_known_constants() {
        let ks: Vec<f64> = (0..10).map(|i| 10.0 + 10.0 * i as f64).collect();
        let gs = GapSet::half_line(0.0);
        let cp = solve_critical_points(&gs).unwrap();
        assert!(fit_a_from_martin(&gs, &cp, &ks).unwrap().abs() < 1e-6);
        let gs = GapSet::half_line(-1.0);
        let cp = solve_critical_points(&gs).unwrap();
        assert!((fit_a_from_martin(&gs, &cp, &ks).unwrap() + 1.0).abs() < 1e-4);
        let (gs, cp) = one_gap();
        let a = a_constant(&gs, &cp);
        let fit = fit_a_from_martin(&gs, &cp, &ks).unwrap();
        assert!((a - fit).abs() < 0.01 * a.abs().max(1.0), "{a} vs {fit}");
        assert!(fit_a_from_martin(&gs, &cp, &ks[..5]).is_err());
    }

    #[test]
    fn normalisation_at_infinity() {
        let gs = GapSet::new(0.0, vec![[1.0, 2.0], [3.0, 5.0]]).unwrap();
        let cp = solve_critical_points(&gs).unwrap();
        let k = 1e3;
        let m = martin_function(&gs, &cp, cz(-k * k, 0.0)).unwrap().m;
        assert!((m / k - 1.0).abs() < 1e-3);
    }

    #[test]
    fn path_too_close_is_reported() {
        let (gs, cp) = one_gap();
        assert!(matches!(
            martin_function(&gs, &cp, cz(0.5, 1e-15)),
            Err(Error::PathTooCloseToSpectrum { .. })
        ));
    }
}
