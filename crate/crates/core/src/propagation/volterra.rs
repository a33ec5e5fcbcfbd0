//! Independent oracle for the Dirichlet solution on short intervals: the
//! iterated-integral series `u = Σ uₙ`, `u₀ = s(x, k)`,
//! `uₙ(x) = ∫₀ˣ s(x − t, k) V(t) uₙ₋₁(t) dt`, with `s(x, k) = sinh(kx)/k`.
//!
//! Each iteration is a fixed linear map on the values at the Gauss–Legendre
//! nodes of a panel decomposition, so the map is assembled once and applied
//! `n_terms` times.

use num_complex::Complex64;

use super::SpectralPoint;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::quadrature::gauss_legendre_10;

#[derive(Debug, Clone, Copy)]
pub struct VolterraOptions {
    pub horizon: f64,
    pub max_panel: f64,
    /// Relative disagreement tolerated between the panel grid and its halving.
    pub check_tol: f64,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            max_panel: 0.25,
            check_tol: 1e-10,
        }
    }
}

fn free_s(y: f64, k: Complex64) -> Complex64 {
    let ky = k * y;
    if ky.norm() < 1e-4 {
        y * (1.0 + ky * ky / 6.0)
    } else {
        ky.sinh() / k
    }
}

pub fn volterra_solution(p: &PotentialSpec, x: f64, z: SpectralPoint, n_terms: usize) -> Result<Complex64> {
    volterra_solution_with(p, x, z, n_terms, VolterraOptions::default())
}

pub fn volterra_solution_with(
    p: &PotentialSpec,
    x: f64,
    z: SpectralPoint,
    n_terms: usize,
    opts: VolterraOptions,
) -> Result<Complex64> {
    p.validate()?;
    if n_terms == 0 {
        return Err(Error::InvalidArgument("series needs at least one term".into()));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::InvalidArgument(format!("position must be ≥ 0, got {x}")));
    }
    if x > opts.horizon {
        return Err(Error::HorizonExceeded {
            x,
            horizon: opts.horizon,
        });
    }
    if x == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let coarse = series_on_panels(p, x, z.k, n_terms, opts.max_panel)?;
    let fine = series_on_panels(p, x, z.k, n_terms, 0.5 * opts.max_panel)?;
    if (coarse - fine).norm() > opts.check_tol * (1.0 + fine.norm()) {
        return Err(Error::QuadratureFailure(format!(
            "series quadrature unresolved at x = {x}: {coarse} vs {fine}"
        )));
    }
    Ok(fine)
}

/// `e^{(1 + Re k)x} Σ_{m > n} (∫₀ˣ|V|)^m / m!`
pub fn volterra_tail_bound(p: &PotentialSpec, x: f64, z: SpectralPoint, n_terms: usize) -> f64 {
    let l1 = p.integrals(0.0, x).1;
    let mut term = 1.0;
    let mut tail = 0.0;
    for m in 1..=(n_terms + 60) {
        term *= l1 / m as f64;
        if m > n_terms {
            tail += term;
        }
    }
    ((1.0 + z.k.re) * x).exp() * tail
}

fn panels(p: &PotentialSpec, x: f64, max_panel: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    p.for_each_cell(0.0, x, max_panel, |a, b, _| {
        let n = ((b - a) / max_panel).ceil().max(1.0) as usize;
        for i in 0..n {
            let lo = a + (b - a) * i as f64 / n as f64;
            let hi = if i + 1 == n { b } else { a + (b - a) * (i + 1) as f64 / n as f64 };
            out.push((lo, hi));
        }
    });
    out
}

fn series_on_panels(p: &PotentialSpec, x: f64, k: Complex64, n_terms: usize, max_panel: f64) -> Result<Complex64> {
    let (xi, wi) = gauss_legendre_10();
    let mut bary = [0.0; 10];
    for i in 0..10 {
        let prod: f64 = (0..10).filter(|&j| j != i).map(|j| xi[i] - xi[j]).product();
        bary[i] = 1.0 / prod;
    }
    let panels = panels(p, x, max_panel);
    let nodes: Vec<(f64, f64)> = panels
        .iter()
        .flat_map(|&(a, b)| {
            let half = 0.5 * (b - a);
            (0..10).map(move |i| (a + half * (xi[i] + 1.0), half * wi[i]))
        })
        .collect();
    let vals: Vec<f64> = nodes.iter().map(|&(t, _)| p.evaluate(t)).collect();
    let n = nodes.len();

    // row r of K maps u_{n-1} at all nodes to u_n at node r
    let mut kmat = vec![Complex64::new(0.0, 0.0); n * n];
    for (pi, &(a, b)) in panels.iter().enumerate() {
        for i in 0..10 {
            let r = pi * 10 + i;
            let target = nodes[r].0;
            for c in 0..pi * 10 {
                kmat[r * n + c] = free_s(target - nodes[c].0, k) * vals[c] * nodes[c].1;
            }
            // partial panel [a, target]: quadrature on mapped nodes, u_{n-1} interpolated
            let half = 0.5 * (target - a);
            for j in 0..10 {
                let tau = a + half * (xi[j] + 1.0);
                let w = half * wi[j];
                let weight = free_s(target - tau, k) * p.evaluate(tau) * w;
                let s = 2.0 * (tau - a) / (b - a) - 1.0;
                let mut denom = 0.0;
                let mut terms = [0.0; 10];
                let mut exact = None;
                for m in 0..10 {
                    let d = s - xi[m];
                    if d == 0.0 {
                        exact = Some(m);
                        break;
                    }
                    terms[m] = bary[m] / d;
                    denom += terms[m];
                }
                let c0 = pi * 10;
                match exact {
                    Some(m) => kmat[r * n + c0 + m] += weight,
                    None => {
                        for m in 0..10 {
                            kmat[r * n + c0 + m] += weight * terms[m] / denom;
                        }
                    }
                }
            }
        }
    }
    let final_row: Vec<Complex64> = (0..n)
        .map(|c| free_s(x - nodes[c].0, k) * vals[c] * nodes[c].1)
        .collect();

    let mut cur: Vec<Complex64> = nodes.iter().map(|&(t, _)| free_s(t, k)).collect();
    let mut total = free_s(x, k);
    for _ in 0..n_terms {
        total += final_row.iter().zip(&cur).map(|(a, b)| a * b).sum::<Complex64>();
        cur = (0..n)
            .map(|r| kmat[r * n..(r + 1) * n].iter().zip(&cur).map(|(a, b)| a * b).sum())
            .collect();
    }
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::QuadratureFailure("series value is not finite".into()));
    }
    Ok(total)
}
