//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.
//!
//! Integrands are vector valued (`[f64; N]`) so that all entries of a
//! matrix share one set of abscissae. Several panels can be integrated
//! together; the worst subinterval across all panels is bisected first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub abs_error: [f64; N],
    pub evaluations: usize,
    pub converged: bool,
}

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 }
    }
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for j in 0..N {
        kron[j] = fc[j] * WGK[7];
        gauss[j] = fc[j] * WG[3];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            let s = f1[j] + f2[j];
            kron[j] += WGK[i] * s;
            if i % 2 == 1 {
                gauss[j] += WG[i / 2] * s;
            }
        }
    }
    let mut val = [0.0; N];
    let mut err = [0.0; N];
    for j in 0..N {
        val[j] = kron[j] * h;
        err[j] = ((kron[j] - gauss[j]) * h).abs();
    }
    (val, err)
}

struct Segment<const N: usize> {
    panel: usize,
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    key: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn weighted_error<const N: usize>(err: &[f64; N], scale: &[f64; N]) -> f64 {
    // NaN must never read as converged
    err.iter().zip(scale).map(|(e, s)| if e.is_nan() { f64::INFINITY } else { e / s }).fold(0.0, f64::max)
}

/// Integrate several `(integrand, a, b)` panels and sum the results.
pub fn integrate_panels<const N: usize>(
    panels: &[(&dyn Fn(f64) -> [f64; N], f64, f64)],
    cfg: &QuadConfig,
) -> QuadResult<N> {
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];
    let mut evaluations = 0;
    for (idx, (f, a, b)) in panels.iter().enumerate() {
        if !(b > a) {
            continue;
        }
        let (v, e) = gk15(f, *a, *b);
        evaluations += 15;
        for j in 0..N {
            total[j] += v[j];
            total_err[j] += e[j];
        }
        heap.push(Segment { panel: idx, a: *a, b: *b, value: v, error: e, key: 0.0 });
    }
    let scale_of = |total: &[f64; N]| -> [f64; N] {
        let mut s = [0.0; N];
        for j in 0..N {
            s[j] = cfg.abs_tol.max(cfg.rel_tol * total[j].abs());
        }
        s
    };
    let rekey = |heap: BinaryHeap<Segment<N>>, scale: &[f64; N]| -> BinaryHeap<Segment<N>> {
        heap.into_iter()
            .map(|mut s| {
                s.key = weighted_error(&s.error, scale);
                s
            })
            .collect()
    };
    let mut scale = scale_of(&total);
    heap = rekey(heap, &scale);
    let mut count = heap.len();
    let mut since_rekey = 0;
    loop {
        if weighted_error(&total_err, &scale) <= 1.0 {
            return QuadResult { value: total, abs_error: total_err, evaluations, converged: true };
        }
        if count >= cfg.max_intervals {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // interval cannot be split further in floating point
            heap.push(Segment { key: -1.0, ..seg });
            if heap.iter().all(|s| s.key < 0.0) {
                break;
            }
            continue;
        }
        let f = panels[seg.panel].0;
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        evaluations += 30;
        for j in 0..N {
            total[j] += v1[j] + v2[j] - seg.value[j];
            total_err[j] += e1[j] + e2[j] - seg.error[j];
        }
        count += 1;
        since_rekey += 1;
        heap.push(Segment { panel: seg.panel, a: seg.a, b: mid, value: v1, error: e1, key: weighted_error(&e1, &scale) });
        heap.push(Segment { panel: seg.panel, a: mid, b: seg.b, value: v2, error: e2, key: weighted_error(&e2, &scale) });
        if since_rekey >= 64 {
            scale = scale_of(&total);
            heap = rekey(heap, &scale);
            since_rekey = 0;
        }
    }
    // recompute sums from the surviving segments to shed accumulated rounding
    let mut value = [0.0; N];
    let mut abs_error = [0.0; N];
    for s in heap.iter() {
        for j in 0..N {
            value[j] += s.value[j];
            abs_error[j] += s.error[j];
        }
    }
    let converged = weighted_error(&abs_error, &scale_of(&value)) <= 1.0;
    QuadResult { value, abs_error, evaluations, converged }
}

/// Integrate a vector-valued function over `[a, b]`.
pub fn integrate_vec<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> QuadResult<N> {
    integrate_panels(&[(&f, a, b)], cfg)
}

/// Scalar convenience wrapper.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> (f64, f64, bool) {
    let r = integrate_vec(|x| [f(x)], a, b, cfg);
    (r.value[0], r.abs_error[0], r.converged)
}
