//! Adaptive Gauss–Kronrod quadrature (21-point Kronrod extension of the
//! 10-point Gauss rule) with global bisection of the worst subinterval.
//!
//! Integrands may be vector valued; the error control acts on the largest
//! component error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping rule for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadTolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadTolerance {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let tol = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "abs_tol must be non-negative, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidParameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Error target for a running estimate of magnitude `value`.
    pub fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Turn a non-converged result into an error.
    pub fn require(self, what: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what: what.to_string(),
                error: self.error,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

// Abscissae and weights of the 21-point Kronrod rule and the embedded
// 10-point Gauss rule (QUADPACK qk21).
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
    0.123_491_976_262_065_851_077_600_525_478_184,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 21-point Gauss–Kronrod panel for a `dim`-component integrand.
/// Writes the Kronrod estimate into `value` and the error into `error`.
fn gk21_panel<F>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    scratch: &mut Scratch,
    value: &mut [f64],
    error: &mut [f64],
) where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let Scratch { fc, f1, f2 } = scratch;
    f(center, fc);
    for d in 0..dim {
        let resk = fc[d] * WGK[10];
        value[d] = resk;
        error[d] = 0.0;
    }
    let mut resg = vec![0.0; dim];
    let mut resabs: Vec<f64> = fc.iter().map(|v| v.abs() * WGK[10]).collect();
    let mut fv1 = vec![0.0; 10 * dim];
    let mut fv2 = vec![0.0; 10 * dim];

    for j in 0..10 {
        let dx = half * XGK[j];
        f(center - dx, f1);
        f(center + dx, f2);
        for d in 0..dim {
            let s = f1[d] + f2[d];
            value[d] += WGK[j] * s;
            resabs[d] += WGK[j] * (f1[d].abs() + f2[d].abs());
            if j % 2 == 1 {
                resg[d] += WG[j / 2] * s;
            }
            fv1[j * dim + d] = f1[d];
            fv2[j * dim + d] = f2[d];
        }
    }

    for d in 0..dim {
        let reskh = value[d] * 0.5;
        let mut resasc = WGK[10] * (fc[d] - reskh).abs();
        for j in 0..10 {
            resasc +=
                WGK[j] * ((fv1[j * dim + d] - reskh).abs() + (fv2[j * dim + d] - reskh).abs());
        }
        let result = value[d] * half;
        let err = (value[d] - resg[d]) * half;
        value[d] = result;
        error[d] = rescale_error(err, resabs[d] * abs_half, resasc * abs_half);
    }
}

struct Scratch {
    fc: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            fc: vec![0.0; dim],
            f1: vec![0.0; dim],
            f2: vec![0.0; dim],
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    worst: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

/// Adaptive integration of a vector-valued integrand over `[a, b]`, starting
/// from the given interior break points (which must lie inside `(a, b)`).
pub fn integrate_vec_with_breaks<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: &QuadTolerance,
) -> VecQuadResult
where
    F: FnMut(f64, &mut [f64]),
{
    let mut scratch = Scratch::new(dim);
    let mut points = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(
        breaks
            .iter()
            .copied()
            .filter(|&x| x > a.min(b) && x < a.max(b)),
    );
    points.push(b);

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        let mut value = vec![0.0; dim];
        let mut error = vec![0.0; dim];
        gk21_panel(
            &mut f,
            w[0],
            w[1],
            dim,
            &mut scratch,
            &mut value,
            &mut error,
        );
        evaluations += 21;
        let worst = error.iter().copied().fold(0.0, f64::max);
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
            worst,
        });
    }

    let totals = |heap: &BinaryHeap<Segment>| {
        let mut v = vec![0.0; dim];
        let mut e = vec![0.0; dim];
        for s in heap.iter() {
            for d in 0..dim {
                v[d] += s.value[d];
                e[d] += s.error[d];
            }
        }
        (v, e)
    };

    let mut subdivisions = heap.len();
    loop {
        let (values, errors) = totals(&heap);
        let done = (0..dim).all(|d| errors[d] <= tol.target(values[d]));
        if done || subdivisions >= tol.max_subdivisions.max(heap.len()) {
            return VecQuadResult {
                values,
                errors,
                evaluations,
                converged: done,
            };
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval collapsed to machine precision
            heap.push(worst);
            let (values, errors) = totals(&heap);
            return VecQuadResult {
                values,
                errors,
                evaluations,
                converged: false,
            };
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let mut value = vec![0.0; dim];
            let mut error = vec![0.0; dim];
            gk21_panel(&mut f, lo, hi, dim, &mut scratch, &mut value, &mut error);
            evaluations += 21;
            let w = error.iter().copied().fold(0.0, f64::max);
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
                worst: w,
            });
        }
        subdivisions += 1;
    }
}

/// Adaptive integration of a scalar integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: &QuadTolerance) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate_with_breaks(&mut f, a, b, &[], tol)
}

/// Scalar variant of [`integrate_vec_with_breaks`].
pub fn integrate_with_breaks<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: &QuadTolerance,
) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec_with_breaks(|x, out| out[0] = f(x), 1, a, b, breaks, tol);
    QuadResult {
        value: r.values[0],
        error: r.errors[0],
        evaluations: r.evaluations,
        converged: r.converged,
    }
}
