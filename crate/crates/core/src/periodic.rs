//! Hill discriminant and band spectra of periodic potentials. Periodicity is
//! declared by the caller and never checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martin::GapSet;
use crate::potentials::PotentialSpec;
use crate::propagation::{transfer_matrix, SpectralPoint};

/// Gaps narrower than this are treated as closed when building a [`GapSet`].
pub const MIN_GAP_WIDTH: f64 = 1e-9;

/// `|Δ| − 2` below this at an interior extremum is a closed gap.
const TOUCH_TOL: f64 = 1e-11;

/// `Δ(λ) = tr T(period, λ)`
pub fn discriminant(p: &PotentialSpec, period: f64, lambda: f64, step: f64) -> Result<f64> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    Ok(transfer_matrix(p, period, SpectralPoint::real(lambda), step)?.trace().re)
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut g: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut glo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the maximiser of `g` on `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> Result<f64>>(mut g: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    for _ in 0..80 {
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = g(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// `min{λ : Δ(λ) = 2}` within `window`, by scanning and bisection.
pub fn lowest_periodic_eigenvalue(
    p: &PotentialSpec,
    period: f64,
    window: (f64, f64),
    step: f64,
) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    let g = |l: f64| discriminant(p, period, l, step).map(|d| d - 2.0);
    let n = 2000;
    let mut prev = (lo, g(lo)?);
    if prev.1 == 0.0 {
        return Ok(lo);
    }
    for i in 1..=n {
        let l = lo + (hi - lo) * i as f64 / n as f64;
        let gl = g(l)?;
        if gl == 0.0 {
            return Ok(l);
        }
        if (gl > 0.0) != (prev.1 > 0.0) {
            return bisect(g, prev.0, l);
        }
        prev = (l, gl);
    }
    Err(Error::NotBracketed { lo, hi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpectrum {
    pub bands: Vec<[f64; 2]>,
    pub period: f64,
    pub potential: PotentialSpec,
    #[serde(skip_serializing, default)]
    pub discriminant_samples: Vec<(f64, f64)>,
    /// Window the bands were searched in; bands touching its ends are truncated.
    #[serde(skip_serializing, default)]
    pub window: (f64, f64),
}

impl BandSpectrum {
    /// The spectrum `[b₀, ∞)` minus the gaps below `lambda_max`, assuming no
    /// further gaps open above it. Gaps narrower than [`MIN_GAP_WIDTH`] are
    /// dropped; their count is returned alongside.
    pub fn to_gap_set(&self, lambda_max: f64) -> Result<(GapSet, usize)> {
        let first = self
            .bands
            .first()
            .ok_or_else(|| Error::InvalidGapSet("no bands in the window".into()))?;
        if first[0] <= self.window.0 {
            return Err(Error::InvalidGapSet(
                "lowest band reaches the bottom of the search window".into(),
            ));
        }
        if lambda_max > self.window.1 {
            return Err(Error::InvalidGapSet(format!(
                "truncation energy {lambda_max} lies above the searched window"
            )));
        }
        let mut gaps = Vec::new();
        let mut dropped = 0;
        for w in self.bands.windows(2) {
            let (a, b) = (w[0][1], w[1][0]);
            if b > lambda_max {
                break;
            }
            if b - a < MIN_GAP_WIDTH {
                dropped += 1;
            } else {
                gaps.push([a, b]);
            }
        }
        Ok((GapSet::new(first[0], gaps)?, dropped))
    }
}

/// Bands `{|Δ| ≤ 2}` in `window`, from `resolution` equally spaced samples with
/// every edge refined by bisection on `Δ ∓ 2`.
pub fn band_spectrum(
    p: &PotentialSpec,
    period: f64,
    window: (f64, f64),
    resolution: usize,
    step: f64,
) -> Result<BandSpectrum> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("window [{lo}, {hi}] must be finite and nonempty")));
    }
    if resolution < 3 {
        return Err(Error::InvalidArgument("resolution must be at least 3".into()));
    }
    let d = |l: f64| discriminant(p, period, l, step);
    let lam: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .collect();
    let vals = lam.iter().map(|&l| d(l)).collect::<Result<Vec<f64>>>()?;
    let inside = |v: f64| v.abs() <= 2.0;

    // edge between a band sample and a gap sample whose Δ sits beyond `target`
    let edge = |a: f64, b: f64, target: f64| bisect(|l| d(l).map(|v| v - target), a, b);

    let mut edges: Vec<(f64, bool)> = Vec::new(); // (λ, opens a band)
    if inside(vals[0]) {
        edges.push((lo, true));
    }
    for i in 0..resolution - 1 {
        let (a, b) = (lam[i], lam[i + 1]);
        let (va, vb) = (vals[i], vals[i + 1]);
        match (inside(va), inside(vb)) {
            (false, true) => edges.push((edge(a, b, 2.0f64.copysign(va))?, true)),
            (true, false) => edges.push((edge(a, b, 2.0f64.copysign(vb))?, false)),
            (false, false) if va.signum() != vb.signum() => {
                return Err(Error::ResolutionTooCoarse { lo: a, hi: b });
            }
            _ => {}
        }
        if i == 0 {
            continue;
        }
        // interior extremum of |Δ| among three consecutive samples
        let (vp, l0) = (vals[i - 1], lam[i - 1]);
        let is_max = va.abs() >= vp.abs() && va.abs() >= vb.abs();
        let is_min = va.abs() <= vp.abs() && va.abs() <= vb.abs();
        let all_in = inside(vp) && inside(va) && inside(vb);
        let all_out = !inside(vp) && !inside(va) && !inside(vb);
        if all_in && is_max && vp.signum() == vb.signum() {
            let sign = va.signum();
            let (lstar, peak) = golden_max(|l| d(l).map(|v| v * sign), l0, b)?;
            if peak > 2.0 + TOUCH_TOL {
                let target = 2.0 * sign;
                let close = edge(l0, lstar, target)?;
                let open = edge(lstar, b, target)?;
                edges.push((close, false));
                edges.push((open, true));
            }
        } else if all_out && is_min && vp.signum() == vb.signum() {
            let sign = va.signum();
            let (_, trough) = golden_max(|l| d(l).map(|v| -v * sign), l0, b)?;
            if -trough <= 2.0 {
                return Err(Error::ResolutionTooCoarse { lo: l0, hi: b });
            }
        }
    }
    if inside(*vals.last().unwrap()) {
        edges.push((hi, false));
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut bands = Vec::new();
    let mut open: Option<f64> = None;
    for (l, opens) in edges {
        match (opens, open) {
            (true, None) => open = Some(l),
            (false, Some(a)) => {
                bands.push([a, l]);
                open = None;
            }
            _ => return Err(Error::ResolutionTooCoarse { lo: l, hi: l }),
        }
    }
    Ok(BandSpectrum {
        bands,
        period,
        potential: p.clone(),
        discriminant_samples: lam.into_iter().zip(vals).collect(),
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_discriminant() {
        let zero = PotentialSpec::Constant { value: 0.0 };
        for l in [0.5, 3.0, 20.0] {
            let d = discriminant(&zero, 1.0, l, 1.0).unwrap();
            assert!((d - 2.0 * l.sqrt().cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn square_wave_at_zero() {
        for delta in [0.5, 0.1, 0.01] {
            let d = discriminant(&PotentialSpec::periodic_square(delta), 2.0 * delta, 0.0, 1.0).unwrap();
            assert!((d - 2.0 * delta.cosh() * delta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn lowest_eigenvalues() {
        let zero = PotentialSpec::Constant { value: 0.0 };
        assert!(lowest_periodic_eigenvalue(&zero, 1.0, (-1.0, 1.0), 1.0).unwrap().abs() < 1e-10);
        let c = PotentialSpec::Constant { value: 0.7 };
        assert!((lowest_periodic_eigenvalue(&c, 1.0, (-1.0, 1.0), 1.0).unwrap() - 0.7).abs() < 1e-10);
        let mut prev = f64::NEG_INFINITY;
        for delta in [0.5, 0.25, 0.1, 0.05] {
            let p = PotentialSpec::periodic_square(delta);
            let l = lowest_periodic_eigenvalue(&p, 2.0 * delta, (-1.0, 1.0), 1.0).unwrap();
            assert!(l < 0.0 && l > prev);
            prev = l;
        }
        assert!(prev.abs() < 2e-3);
        assert!(matches!(
            lowest_periodic_eigenvalue(&zero, 1.0, (1.0, 2.0), 1.0),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn free_bands_do_not_split() {
        let zero = PotentialSpec::Constant { value: 0.0 };
        let bs = band_spectrum(&zero, 1.0, (-1.0, 40.0), 400, 1.0).unwrap();
        assert_eq!(bs.bands.len(), 1);
        assert!(bs.bands[0][0].abs() < 1e-10);
        assert_eq!(bs.bands[0][1], 40.0);
    }

    #[test]
    fn square_wave_bands() {
        let p = PotentialSpec::periodic_square(0.5);
        let bs = band_spectrum(&p, 1.0, (-2.0, 60.0), 600, 1.0).unwrap();
        let l0 = lowest_periodic_eigenvalue(&p, 1.0, (-2.0, 1.0), 1.0).unwrap();
        assert!((bs.bands[0][0] - l0).abs() < 1e-8);
        assert!(bs.bands.len() >= 3);
        for band in &bs.bands {
            for &e in band {
                if e < 60.0 {
                    let v = discriminant(&p, 1.0, e, 1.0).unwrap();
                    assert!((v.abs() - 2.0).abs() < 1e-8);
                }
            }
        }
        for w in bs.bands.windows(2) {
            assert!(w[0][1] < w[1][0]);
        }
        let (gs, _) = bs.to_gap_set(50.0).unwrap();
        assert_eq!(gs.b0, bs.bands[0][0]);
        for (g, w) in gs.gaps.iter().zip(bs.bands.windows(2)) {
            assert_eq!(*g, [w[0][1], w[1][0]]);
        }
    }

    #[test]
    fn coarse_grid_is_reported() {
        // a tall barrier makes Δ swing from +8.7 at λ = 10 to below −2 at 16.25,
        // stepping over the band edge at Δ = 2 and the one at Δ = −2
        let p = PotentialSpec::PiecewiseConstant {
            breakpoints: vec![0.5],
            values: vec![40.0, 0.0],
        };
        let r = band_spectrum(&p, 1.0, (10.0, 22.5), 3, 1.0);
        assert!(matches!(r, Err(Error::ResolutionTooCoarse { .. })));
        assert!(band_spectrum(&p, 1.0, (10.0, 22.5), 200, 1.0).is_ok());
    }
}
