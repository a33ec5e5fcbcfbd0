use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_step;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// Prüfer variables `u = r sin θ`, `u′ = r cos θ` with `θ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrueferState {
    pub theta: f64,
    pub log_r: f64,
}

impl PrueferState {
    pub fn zeros(&self) -> u64 {
        (self.theta / PI).floor().max(0.0) as u64
    }

    /// Advance across a cell where `V − λ = q` is constant.
    fn advance(&mut self, q: f64, h: f64) {
        if h <= 0.0 {
            return;
        }
        if q < 0.0 {
            // u = A sin ψ, u′ = Aω cos ψ with tan ψ = ω tan θ and ψ′ = ω
            let omega = (-q).sqrt();
            let m = (self.theta / PI).round();
            let (sr, cr) = (self.theta - m * PI).sin_cos();
            let psi0 = m * PI + (omega * sr).atan2(cr);
            let psi1 = psi0 + omega * h;
            let m1 = (psi1 / PI).round();
            let (s1, c1) = (psi1 - m1 * PI).sin_cos();
            self.theta = m1 * PI + s1.atan2(omega * c1);
            // sin²ψ + ω²cos²ψ at both ends; at ψ₀ it is ω²/(ω² sin²r + cos²r)
            let size1 = s1 * s1 + omega * omega * c1 * c1;
            let inv_size0 = (omega * omega * sr * sr + cr * cr) / (omega * omega);
            self.log_r += 0.5 * (size1 * inv_size0).ln();
        } else {
            // the propagator divided by cosh(κh); the angle moves by less than π
            let kappa = q.sqrt();
            let kh = kappa * h;
            let (s_over_c, q_s_over_c, log_c) = if kh < 1e-4 {
                let w = kh * kh;
                (h * (1.0 - w / 3.0 + 2.0 * w * w / 15.0), q * h * (1.0 - w / 3.0), 0.5 * w - w * w / 12.0)
            } else {
                let t = kh.tanh();
                let log_cosh = kh + (-2.0 * kh).exp().ln_1p() - std::f64::consts::LN_2;
                (t / kappa, kappa * t, log_cosh)
            };
            let (s, c) = self.theta.sin_cos();
            let du = c + q_s_over_c * s;
            let u = s_over_c * c + s;
            let turn = (c * u - s * du).atan2(c * du + s * u);
            self.theta += turn;
            self.log_r += log_c + 0.5 * (du * du + u * u).ln();
        }
    }
}

pub fn pruefer_state(p: &PotentialSpec, x: f64, lambda: f64, step: f64) -> Result<PrueferState> {
    check_step(step)?;
    p.validate()?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidArgument(format!("zero count needs x > 0, got {x}")));
    }
    let mut st = PrueferState {
        theta: 0.0,
        log_r: 0.0,
    };
    p.for_each_cell(0.0, x, step, |a, b, v| st.advance(v - lambda, b - a));
    Ok(st)
}

/// Number of zeros of `u(·, λ)` in `(0, x]`.
pub fn eigenvalue_count(p: &PotentialSpec, x: f64, lambda: f64, step: f64) -> Result<u64> {
    Ok(pruefer_state(p, x, lambda, step)?.zeros())
}

/// A sampled cumulative distribution function on an energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCDF {
    pub lambda_grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl MeasureCDF {
    pub fn new(lambda_grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        check_grid(&lambda_grid)?;
        if cdf.len() != lambda_grid.len() {
            return Err(Error::InvalidArgument("CDF and grid lengths differ".into()));
        }
        Ok(Self { lambda_grid, cdf })
    }

    pub fn is_monotone(&self) -> bool {
        self.cdf.windows(2).all(|w| w[0] <= w[1]) && self.cdf.iter().all(|&c| c >= 0.0)
    }

    /// `max_i |F(λ_i) − G(λ_i)|` on a shared grid.
    pub fn sup_distance(&self, other: &MeasureCDF) -> Result<f64> {
        if self.lambda_grid != other.lambda_grid {
            return Err(Error::InvalidArgument("CDFs live on different grids".into()));
        }
        Ok(self
            .cdf
            .iter()
            .zip(&other.cdf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty()
        || grid.iter().any(|l| !l.is_finite())
        || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidArgument(
            "energy grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `ρ_x((−∞, λ_i])` for each grid energy; energies are processed in parallel
/// and merged in grid order.
pub fn zero_counting_cdf(p: &PotentialSpec, x: f64, lambda_grid: &[f64], step: f64) -> Result<MeasureCDF> {
    check_grid(lambda_grid)?;
    let counts = lambda_grid
        .par_iter()
        .map(|&l| eigenvalue_count(p, x, l, step))
        .collect::<Result<Vec<u64>>>()?;
    MeasureCDF::new(lambda_grid.to_vec(), counts.into_iter().map(|n| n as f64 / x).collect())
}
