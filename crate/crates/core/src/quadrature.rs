//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature for
//! vector-valued integrands on the real line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Tabulated to 33 digits; the literals round to the nearest f64.
#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Target bound on the summed max-norm error estimate.
    pub abs_tol: f64,
    /// Budget of subintervals before giving up.
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    /// Sum over subintervals of `max_k |K21_k - G10_k|`.
    pub error: f64,
    pub evaluations: usize,
}

/// Integration variable of one initial piece of the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    /// `[a, b]` directly.
    Finite,
    /// `[start, ±∞)` mapped onto `t ∈ (0, 1]` through `ω = start ± scale (1/t - 1)`.
    Tail { start: f64, sign: f64, scale: f64 },
}

#[derive(Debug, Clone)]
struct Interval<const N: usize> {
    piece: Piece,
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Interval<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Interval<N> {}
impl<const N: usize> PartialOrd for Interval<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Interval<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn eval_piece<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, piece: Piece, x: f64) -> [f64; N] {
    match piece {
        Piece::Finite => f(x),
        Piece::Tail { start, sign, scale } => {
            let omega = start + sign * scale * (1.0 / x - 1.0);
            let jac = scale / (x * x);
            let mut v = f(omega);
            v.iter_mut().for_each(|c| *c *= jac);
            v
        }
    }
}

fn gk21<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: &F,
    piece: Piece,
    a: f64,
    b: f64,
) -> Interval<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mid = eval_piece(f, piece, center);
    for k in 0..N {
        kronrod[k] = WGK[10] * mid[k];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let lo = eval_piece(f, piece, center - dx);
        let hi = eval_piece(f, piece, center + dx);
        for k in 0..N {
            let pair = lo[k] + hi[k];
            kronrod[k] += WGK[j] * pair;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * pair;
            }
        }
    }
    let mut error = 0.0f64;
    for k in 0..N {
        kronrod[k] *= half;
        gauss[k] *= half;
        error = error.max((kronrod[k] - gauss[k]).abs());
    }
    Interval {
        piece,
        a,
        b,
        value: kronrod,
        error,
    }
}

/// Integrates `f` over the whole real line.
///
/// `[-window, window]` is split at every breakpoint inside it; the two tails
/// beyond `±window` are mapped onto finite intervals, which requires `f` to
/// decay at least like `1/ω²`.
pub fn integrate_real_line<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    window: f64,
    opts: &QuadratureOptions,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::Domain(format!(
            "integration window must be positive, got {window}"
        )));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && x.abs() < window)
        .chain([-window, window])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * window);

    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        heap.push(gk21(&f, Piece::Finite, w[0], w[1]));
    }
    for sign in [-1.0, 1.0] {
        let piece = Piece::Tail {
            start: sign * window,
            sign,
            scale: window,
        };
        heap.push(gk21(&f, piece, 0.0, 1.0));
    }
    let mut evaluations = 21 * heap.len();

    let mut total_error: f64 = heap.iter().map(|iv| iv.error).sum();
    loop {
        if total_error <= opts.abs_tol {
            // The running sum drifts; confirm against a fresh one.
            total_error = heap.iter().map(|iv| iv.error).sum();
            if total_error <= opts.abs_tol {
                break;
            }
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Convergence {
                achieved: total_error,
                requested: opts.abs_tol,
            });
        }
        let worst = heap.pop().expect("non-empty interval set");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Cannot bisect further in double precision.
            return Err(Error::Convergence {
                achieved: total_error,
                requested: opts.abs_tol,
            });
        }
        let left = gk21(&f, worst.piece, worst.a, mid);
        let right = gk21(&f, worst.piece, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 42;
    }

    let mut intervals = heap.into_vec();
    intervals.sort_by(|x, y| {
        let key = |iv: &Interval<N>| match iv.piece {
            Piece::Finite => (1, iv.a),
            Piece::Tail { sign, .. } => (if sign < 0.0 { 0 } else { 2 }, iv.a),
        };
        let (kx, ky) = (key(x), key(y));
        kx.0.cmp(&ky.0).then(kx.1.total_cmp(&ky.1))
    });
    let mut value = [0.0; N];
    let mut error = 0.0;
    for iv in &intervals {
        for (v, x) in value.iter_mut().zip(iv.value) {
            *v += x;
        }
        error += iv.error;
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}
