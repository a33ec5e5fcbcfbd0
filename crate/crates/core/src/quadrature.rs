//! Adaptive Gauss–Kronrod (10/21 point) quadrature over real intervals, for
//! real- and complex-valued integrands, plus helpers that remove inverse
//! square-root endpoint singularities by the substitution `t = edge ± s²`.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_463_227_290,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights paired with `XGK[1], XGK[3], ..., XGK[9]`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// The 10-point Gauss–Legendre rule on [-1, 1] as (nodes, weights), nodes ascending.
pub fn gauss_legendre_10() -> ([f64; 10], [f64; 10]) {
    let mut nodes = [0.0; 10];
    let mut weights = [0.0; 10];
    for i in 0..5 {
        let x = XGK[2 * i + 1];
        nodes[i] = -x;
        weights[i] = WG[i];
        nodes[9 - i] = x;
        weights[9 - i] = WG[i];
    }
    (nodes, weights)
}

/// Values that can be integrated: a real vector space with a norm.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    abs_sum: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Panel<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    let mut abs_sum = fc.magnitude() * WGK[10];
    for i in 0..10 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kron = kron + pair * WGK[i];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + pair * WG[i / 2];
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).magnitude();
    Panel {
        a,
        b,
        value,
        error,
        abs_sum: abs_sum * half.abs(),
    }
}

/// Adaptive bisection driven by the largest local Kronrod–Gauss discrepancy.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "non-finite interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
            intervals: 0,
        });
    }
    let first = kronrod(&mut f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut abs_sum = first.abs_sum;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        let mag = total.magnitude();
        if !mag.is_finite() || !total_err.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        let target = tol
            .abs
            .max(tol.rel * mag)
            .max(50.0 * f64::EPSILON * abs_sum);
        if total_err <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "no convergence on [{a}, {b}] after {} intervals (error {total_err:e}, target {target:e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine resolution; keep what we have
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            total_err = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        total = total - worst.value + left.value + right.value;
        abs_sum += left.abs_sum + right.abs_sum - worst.abs_sum;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // guard the running sums against drift
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let intervals = heap.len();
    let value = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
    Ok(Estimate {
        value,
        error: total_err,
        intervals,
    })
}

/// Integrate `g` over `[lo, hi]` when `g` may carry inverse square-root
/// singularities at either end.
///
/// The interval is split at its midpoint; on the left half `t = lo + s²` and
/// on the right half `t = hi − s²`. The callback receives `(t, s, side)` and
/// must return `g(t)·2s`, so that the `1/√|t − edge|` factor can be cancelled
/// analytically using `s` rather than the rounded difference `t − edge`.
pub fn integrate_sqrt_ends<T, F>(mut g: F, lo: f64, hi: f64, tol: Tolerance) -> Result<T>
where
    T: QuadValue,
    F: FnMut(f64, f64, Side) -> T,
{
    if hi <= lo {
        return Ok(T::zero());
    }
    let span = (0.5 * (hi - lo)).sqrt();
    let left = integrate(|s| g(lo + s * s, s, Side::Left), 0.0, span, tol)?;
    let right = integrate(|s| g(hi - s * s, s, Side::Right), 0.0, span, tol)?;
    Ok(left.value + right.value)
}

/// Which endpoint a square-root substitution is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}
