//! Checks shared by the acceptance harness and the property tests. Each check
//! returns `Err` with a description of the first violation.
#![allow(dead_code)]

use num_complex::Complex64;
use schreg::martin::{martin_function, theta_prime, CriticalPoints};
use schreg::propagation::{dirichlet_solution, eigenvalue_count, log_growth, transfer_matrix, zero_counting_cdf};
use schreg::quadrature::{integrate, Tolerance};
use schreg::{GapSet, PotentialSpec, SpectralPoint};

pub type Check = std::result::Result<(), String>;

/// splitmix64, enough for reproducible test sampling.
pub struct Sampler(u64);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// One of the bounded families, with parameters drawn from `rng`.
pub fn sample_potential(rng: &mut Sampler) -> PotentialSpec {
    match rng.below(6) {
        0 => PotentialSpec::Constant {
            value: rng.uniform(-2.0, 2.0),
        },
        1 => PotentialSpec::decaying(rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)),
        2 => PotentialSpec::periodic_square(rng.uniform(0.05, 1.0)),
        3 => PotentialSpec::OscillatingExample,
        4 => PotentialSpec::sparse_squares(rng.uniform(0.2, 1.0)),
        _ => {
            let low = rng.uniform(-2.0, 0.0);
            PotentialSpec::Random {
                seed: rng.next_u64(),
                cell_width: rng.uniform(0.1, 1.0),
                low,
                high: low + rng.uniform(0.1, 3.0),
            }
        }
    }
}

/// Single- or two-gap set inside `[0, 10]`.
pub fn sample_gap_set(rng: &mut Sampler) -> GapSet {
    let n = 1 + rng.below(2) as usize;
    let mut pts: Vec<f64> = (0..2 * n + 1).map(|_| rng.uniform(0.0, 10.0)).collect();
    pts.sort_by(f64::total_cmp);
    // keep every band and gap at least 0.05 wide
    for i in 1..pts.len() {
        if pts[i] < pts[i - 1] + 0.05 {
            pts[i] = pts[i - 1] + 0.05;
        }
    }
    let gaps = (0..n).map(|j| [pts[2 * j + 1], pts[2 * j + 2]]).collect();
    GapSet::new(pts[0], gaps).expect("sampled gap set is valid")
}

/// Largest `‖T‖₂` at which `det T = 1` is checked to 1e-12; the roundoff in
/// `m₀₀m₁₁ − m₀₁m₁₀` grows like `ε‖T‖²`.
pub const DET_NORM_LIMIT: f64 = 30.0;

/// `Ok(false)` when `‖T‖` is too large for the check to be meaningful.
pub fn det_is_one(p: &PotentialSpec, x: f64, z: SpectralPoint, step: f64) -> std::result::Result<bool, String> {
    let t = transfer_matrix(p, x, z, step).map_err(|e| e.to_string())?;
    if t.log_norm() > DET_NORM_LIMIT.ln() {
        return Ok(false);
    }
    let d = t.det();
    if (d - 1.0).norm() > 1e-12 {
        return Err(format!("det T = {d} for {p:?} at x = {x}, z = {}", z.z));
    }
    Ok(true)
}

pub fn conjugation_symmetry(p: &PotentialSpec, x: f64, z: Complex64, step: f64) -> Check {
    let a = dirichlet_solution(p, x, SpectralPoint::new(z), step).map_err(|e| e.to_string())?;
    let b = dirichlet_solution(p, x, SpectralPoint::new(z.conj()), step).map_err(|e| e.to_string())?;
    let ua = a.0 * a.2.exp();
    let ub = b.0 * b.2.exp();
    if (ua.conj() - ub).norm() > 1e-12 * ua.norm().max(1.0) {
        return Err(format!("u(z̄) = {ub} but conj u(z) = {} at x = {x}, z = {z}", ua.conj()));
    }
    Ok(())
}

pub fn count_monotone(p: &PotentialSpec, x: f64, dx: f64, lambda: f64, dl: f64, step: f64) -> Check {
    let c = |x: f64, l: f64| eigenvalue_count(p, x, l, step).map_err(|e| e.to_string());
    let base = c(x, lambda)?;
    let more_l = c(x, lambda + dl)?;
    let more_x = c(x + dx, lambda)?;
    if more_l < base || more_x < base {
        return Err(format!(
            "count {base} at (x, λ) = ({x}, {lambda}) but {more_l} at λ + {dl} and {more_x} at x + {dx}"
        ));
    }
    Ok(())
}

/// `h(x, z) ≤ 1 + Re k + (1/x)∫₀ˣ|V|`
pub fn growth_bound(p: &PotentialSpec, x: f64, z: Complex64, step: f64) -> Check {
    let s = SpectralPoint::new(z);
    let h = log_growth(p, x, s, step).map_err(|e| e.to_string())?;
    let bound = 1.0 + s.k.re + p.integrals(0.0, x).1 / x;
    if h > bound + 1e-12 {
        return Err(format!("h = {h} exceeds {bound} for {p:?} at x = {x}, z = {z}"));
    }
    Ok(())
}

pub fn herglotz(gs: &GapSet, cp: &CriticalPoints, z: Complex64) -> Check {
    let f = theta_prime(gs, cp, z).map_err(|e| e.to_string())?;
    if f.im < 0.0 {
        return Err(format!("Im iΘ′({z}) = {} < 0", f.im));
    }
    Ok(())
}

pub fn martin_lower_bound(gs: &GapSet, cp: &CriticalPoints, z: Complex64) -> Check {
    let m = martin_function(gs, cp, z).map_err(|e| e.to_string())?.m;
    let lower = (gs.b0 - z).sqrt().re;
    if m < lower - 1e-10 * lower.max(1.0) {
        return Err(format!("M({z}) = {m} is below Re√(b₀ − z) = {lower}"));
    }
    Ok(())
}

/// `M(z₀)` against its average over 64 points of a circle around `z₀`.
pub fn mean_value(gs: &GapSet, cp: &CriticalPoints, z0: Complex64, radius: f64) -> Check {
    let m = |z| martin_function(gs, cp, z).map(|e| e.m).map_err(|e| e.to_string());
    let centre = m(z0)?;
    let mut avg = 0.0;
    for i in 0..64 {
        let phi = (i as f64 + 0.5) * std::f64::consts::TAU / 64.0;
        avg += m(z0 + Complex64::from_polar(radius, phi))?;
    }
    avg /= 64.0;
    if (avg - centre).abs() > 1e-6 {
        return Err(format!("M({z0}) = {centre}, circle average {avg} (r = {radius})"));
    }
    Ok(())
}

/// `Θ(bⱼ) − Θ(aⱼ)` along the rectangle `aⱼ → aⱼ + iH → bⱼ + iH → bⱼ`, with
/// `t = s²` on the vertical legs to absorb the edge singularities.
pub fn gap_drift(gs: &GapSet, cp: &CriticalPoints, j: usize) -> std::result::Result<Complex64, String> {
    let [a, b] = gs.gaps[j];
    let height = b - a;
    let tol = Tolerance::new(1e-15, 1e-12);
    let dtheta = |z: Complex64| -> Complex64 {
        // Θ′ = −i·(iΘ′)
        theta_prime(gs, cp, z).map(|f| -Complex64::i() * f).unwrap_or(Complex64::new(f64::NAN, 0.0))
    };
    let i = Complex64::i();
    let leg = |x: f64| {
        integrate(
            |s: f64| dtheta(Complex64::new(x, s * s)) * i * (2.0 * s),
            0.0,
            height.sqrt(),
            tol,
        )
        .map(|e| e.value)
        .map_err(|e| e.to_string())
    };
    let up = leg(a)?;
    let down = leg(b)?;
    let top = integrate(|t: f64| dtheta(Complex64::new(t, height)), a, b, tol)
        .map(|e| e.value)
        .map_err(|e| e.to_string())?;
    Ok(up + top - down)
}

/// Eigenvalue counts may rise by at most `n + 1` while λ crosses the inside of
/// a gap holding at most `n` eigenvalues.
pub fn gap_count_flatness(
    p: &PotentialSpec,
    gs: &GapSet,
    x: f64,
    n_eigen: usize,
    step: f64,
) -> Check {
    for g in &gs.gaps {
        let eps = 1e-3 * (g[1] - g[0]);
        let cdf = zero_counting_cdf(p, x, &[g[0] + eps, g[1] - eps], step).map_err(|e| e.to_string())?;
        let rise = cdf.cdf[1] - cdf.cdf[0];
        if rise > (n_eigen as f64 + 1.0) / x + 1e-15 {
            return Err(format!("ρ_x rises by {rise} across gap {g:?} at x = {x}"));
        }
    }
    Ok(())
}
