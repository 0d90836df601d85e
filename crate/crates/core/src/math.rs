//! Shared numerics: erf/erfc, standard normal density/CDF, compensated
//! summation, empirical KS distance.

// rational coefficients and reference values keep their published digits
#![allow(clippy::excessive_precision)]

use std::f64::consts::{PI, SQRT_2};

const INV_SQRT_2PI: f64 = 0.3989422804014327;

// Rational minimax coefficients for erf/erfc (Cody's CALERF regions),
// accurate to full double precision including the deep tail.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// erf on the central region |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// exp(-y^2) * R(y) for erfc on y >= 0.46875, split so the exponential
/// argument keeps full precision.
fn erfc_scaled(y: f64) -> f64 {
    let r = if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        if y >= 26.543 {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        (INV_SQRT_PI - r) / y
    };
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        1.0 - erf_small(x)
    } else if x > 0.0 {
        erfc_scaled(y)
    } else {
        2.0 - erfc_scaled(y)
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() <= 0.46875 {
        erf_small(x)
    } else if x > 0.0 {
        1.0 - erfc_scaled(x)
    } else {
        erfc_scaled(-x) - 1.0
    }
}

/// Inverse of erfc restricted to x >= 0 (i.e. y in (0, 1]), by bisection.
pub(crate) fn erfc_inv_upper(y: f64) -> f64 {
    assert!(y > 0.0 && y <= 1.0, "erfc_inv_upper needs y in (0, 1]");
    let (mut lo, mut hi) = (0.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Standard normal CDF via erfc, accurate in both tails.
#[inline]
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / SQRT_2)
}

/// Upper tail 1 - Phi(u) without cancellation for large u.
#[inline]
pub fn normal_sf(u: f64) -> f64 {
    0.5 * erfc(u / SQRT_2)
}

/// Phi(b) - Phi(a) for a <= b, evaluated in whichever tail keeps precision.
#[inline]
pub fn normal_cdf_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a + b > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "mean_var needs at least two values");
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.total() / n as f64;
    let mut sq = KahanSum::new();
    for &v in values {
        let d = v - mean;
        sq.add(d * d);
    }
    (mean, sq.total() / (n - 1) as f64)
}

/// Kolmogorov-Smirnov distance between a sample and the standard normal law.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    assert!(!sample.is_empty(), "empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &z) in sorted.iter().enumerate() {
        let f = normal_cdf(z);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - f).abs());
    }
    sup
}

/// Median-of-three smoothing; endpoints are dropped, so the output has
/// `len - 2` entries.
pub fn median3(values: &[f64]) -> Vec<f64> {
    if values.len() < 3 {
        return Vec::new();
    }
    values
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            a.max(b).min(a.min(b).max(c))
        })
        .collect()
}

/// Folded-normal expectation E|N(m, s^2) - a|.
pub fn folded_normal_abs_mean(m: f64, s: f64, a: f64) -> f64 {
    let d = (m - a) / s;
    s * (2.0 / PI).sqrt() * (-0.5 * d * d).exp() + (m - a) * (2.0 * normal_cdf(d) - 1.0)
}
