//! Conditional moments of the observed log price given the latent one:
//! f(x) = E(Y | X = x), its derivative f', the conditional noise variance
//! g(x) = E(eps^2 | X = x), and the path-level Riemann-sum targets built
//! from them.
//!
//! For the noise-then-round kernel the defining integral collapses over the
//! rounding cells into differences of normal CDFs, so everything here is
//! exact up to CDF accuracy and a truncated tail of mass <= tol.

use crate::contaminate::{observe_ticks, round_to_ticks, tick_log, ContaminationKernel};
use crate::error::{Error, Result};
use crate::math::{normal_cdf, normal_cdf_diff, normal_pdf, normal_sf, KahanSum};
use crate::simulate::MasterPath;

use std::f64::consts::SQRT_2;

/// Default truncation tolerance for the band series.
pub const DEFAULT_BAND_TOL: f64 = 1e-12;

/// Probabilities of the rounding cells a noisy observation can land in,
/// for latent log price x under NoiseThenRound(gamma, alpha).
///
/// `p[j]` is the probability the observed price is `(k_lo + j) * alpha`;
/// `p_floor` is the probability the noisy price rounds to zero and is
/// replaced by the floor alpha; `tail` is the excluded mass (<= tol).
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    pub x: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub k_lo: u64,
    pub k_hi: u64,
    pub p_floor: f64,
    pub p: Vec<f64>,
    pub tail: f64,
}

impl BandDecomposition {
    /// Probability of observing tick count k (k >= 1), excluding the floor.
    pub fn band_prob(&self, k: u64) -> f64 {
        if k < self.k_lo || k > self.k_hi {
            0.0
        } else {
            self.p[(k - self.k_lo) as usize]
        }
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = KahanSum::new();
        s.add(self.p_floor);
        for &p in &self.p {
            s.add(p);
        }
        s.add(self.tail);
        s.total()
    }
}

/// Log price of the upper edge of rounding cell k: log((k + 1/2) alpha).
/// Cell k = 0 is the floor region, whose upper edge is log(alpha / 2).
#[inline]
fn upper_edge(k: u64, alpha: f64) -> f64 {
    ((k as f64 + 0.5) * alpha).ln()
}

/// Width of the inclusion window in noise standard deviations: the band set
/// covers [x - z*gamma, x + z*gamma] entirely, which bounds the excluded
/// tail by 2 * Phi(-z).
fn window_z(tol: f64) -> f64 {
    // Phi(-8) ~ 6.2e-16 already covers the default 1e-12; wider tolerances
    // never shrink the window, tighter ones expand it.
    let needed = SQRT_2 * crate::math::erfc_inv_upper(tol.min(1.0));
    needed.max(8.0)
}

/// Tick range of the cells intersecting [x - z*gamma, x + z*gamma].
/// Returns (k_lo, k_hi, floor_reached): when the window's lower end falls
/// into the floor region, `floor_reached` is true and k_lo = 1.
fn band_range(x: f64, gamma: f64, alpha: f64, z: f64) -> (u64, u64, bool) {
    let lo_ticks = round_to_ticks((x - z * gamma).exp(), alpha);
    let hi_ticks = round_to_ticks((x + z * gamma).exp(), alpha).max(1);
    if lo_ticks == 0 {
        (1, hi_ticks, true)
    } else {
        (lo_ticks, hi_ticks.max(lo_ticks), false)
    }
}

/// Rounding-cell probabilities for a noisy-then-rounded observation.
///
/// p_k = Phi((log((k+1/2)a) - x)/g) - Phi((log((k-1/2)a) - x)/g) for the
/// included k, p_floor = Phi((log(a/2) - x)/g), and the band range is chosen
/// so that the excluded mass is at most `tol`.
pub fn band_probabilities(x: f64, gamma: f64, alpha: f64, tol: f64) -> Result<BandDecomposition> {
    if gamma == 0.0 {
        return Err(Error::UnsupportedKernel(
            "gamma = 0 has no band decomposition; use the deterministic pure-rounding path".into(),
        ));
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("x must be finite, got {x}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidKernel(format!("gamma must be > 0, got {gamma}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidKernel(format!("alpha must be > 0, got {alpha}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }

    let z = window_z(tol);
    let (k_lo, k_hi, floor_reached) = band_range(x, gamma, alpha, z);
    let v = |edge: f64| (edge - x) / gamma;

    let p_floor = normal_cdf(v(upper_edge(0, alpha)));
    let mut p = Vec::with_capacity((k_hi - k_lo + 1) as usize);
    for k in k_lo..=k_hi {
        p.push(normal_cdf_diff(v(upper_edge(k - 1, alpha)), v(upper_edge(k, alpha))));
    }

    let gap_low = if floor_reached {
        0.0
    } else {
        normal_cdf_diff(v(upper_edge(0, alpha)), v(upper_edge(k_lo - 1, alpha)))
    };
    let tail_high = normal_sf(v(upper_edge(k_hi, alpha)));
    let tail = gap_low + tail_high;

    Ok(BandDecomposition {
        x,
        gamma,
        alpha,
        k_lo,
        k_hi,
        p_floor,
        p,
        tail,
    })
}

/// Single-pass evaluator of (f, f', g) for the noise-then-round kernel.
/// Caches per-tick logarithms, which dominate the cost when called over a
/// whole path whose prices stay within a narrow tick range.
pub(crate) struct NoiseRoundEvaluator {
    gamma: f64,
    alpha: f64,
    z: f64,
    base: u64,
    // per tick k (offset by base): (upper_edge(k), log(k*alpha), log((k+1)/k))
    cache: Vec<(f64, f64, f64)>,
    scratch: Vec<(f64, f64)>,
}

impl NoiseRoundEvaluator {
    pub fn new(gamma: f64, alpha: f64) -> Self {
        Self {
            gamma,
            alpha,
            z: window_z(DEFAULT_BAND_TOL),
            base: 0,
            cache: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn entry(&mut self, k: u64) -> (f64, f64, f64) {
        if self.cache.is_empty() {
            self.base = k.saturating_sub(4);
        }
        if k < self.base {
            let extra = (self.base - k + 4) as usize;
            let old_base = self.base;
            self.base = self.base.saturating_sub(extra as u64);
            let mut fresh: Vec<(f64, f64, f64)> = (self.base..old_base)
                .map(|j| Self::compute(j, self.alpha))
                .collect();
            fresh.append(&mut self.cache);
            self.cache = fresh;
        }
        let idx = (k - self.base) as usize;
        while self.cache.len() <= idx {
            let j = self.base + self.cache.len() as u64;
            self.cache.push(Self::compute(j, self.alpha));
        }
        self.cache[idx]
    }

    fn compute(k: u64, alpha: f64) -> (f64, f64, f64) {
        let edge = upper_edge(k, alpha);
        if k == 0 {
            (edge, f64::NEG_INFINITY, 0.0)
        } else {
            (edge, tick_log(k, alpha), (1.0 / k as f64).ln_1p())
        }
    }

    /// (f(x), f'(x), g(x)) in one pass over the covering bands.
    pub fn moments(&mut self, x: f64) -> (f64, f64, f64) {
        let (k_lo, k_hi, _) = band_range(x, self.gamma, self.alpha, self.z);
        let inv_g = 1.0 / self.gamma;

        self.scratch.clear();
        let floor_edge = self.entry(0).0;
        let p_floor = normal_cdf((floor_edge - x) * inv_g);
        let log_alpha = self.entry(1).1;

        let mut f = KahanSum::new();
        f.add(log_alpha * p_floor);
        let mut lower_v = (self.entry(k_lo - 1).0 - x) * inv_g;
        for k in k_lo..=k_hi {
            let (edge, log_val, _) = self.entry(k);
            let upper_v = (edge - x) * inv_g;
            let pk = normal_cdf_diff(lower_v, upper_v);
            self.scratch.push((log_val, pk));
            f.add(log_val * pk);
            lower_v = upper_v;
        }
        let f = f.total();

        // telescoped derivative: every term positive, no cancellation
        let mut fp = 0.0;
        for k in k_lo.saturating_sub(1).max(1)..=k_hi {
            let (edge, _, log_ratio) = self.entry(k);
            fp += log_ratio * normal_pdf((edge - x) * inv_g);
        }
        let fp = fp * inv_g;

        let mut g = KahanSum::new();
        let df = log_alpha - f;
        g.add(p_floor * df * df);
        for &(log_val, pk) in &self.scratch {
            let d = log_val - f;
            g.add(pk * d * d);
        }
        let g = g.total().max(0.0);

        (f, fp, g)
    }
}

/// Conditional mean f(x) = E(Y | X = x).
pub fn f_bar(kernel: &ContaminationKernel, x: f64) -> f64 {
    match *kernel {
        ContaminationKernel::AdditiveGaussian { .. } => x,
        ContaminationKernel::PureRounding { alpha } => tick_log(observe_ticks(x, alpha), alpha),
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            NoiseRoundEvaluator::new(gamma, alpha).moments(x).0
        }
    }
}

/// Derivative f'(x) of the conditional mean. Pure rounding is rejected
/// (its f is a step function).
pub fn f_prime(kernel: &ContaminationKernel, x: f64) -> Result<f64> {
    match *kernel {
        ContaminationKernel::AdditiveGaussian { .. } => Ok(1.0),
        ContaminationKernel::PureRounding { .. } => Err(Error::UnsupportedKernel(
            "f is not differentiable under pure rounding".into(),
        )),
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            Ok(NoiseRoundEvaluator::new(gamma, alpha).moments(x).1)
        }
    }
}

/// Conditional noise variance g(x) = E(eps^2 | X = x), floored at zero.
pub fn g_var(kernel: &ContaminationKernel, x: f64) -> f64 {
    match *kernel {
        ContaminationKernel::AdditiveGaussian { gamma } => gamma * gamma,
        ContaminationKernel::PureRounding { .. } => 0.0,
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            NoiseRoundEvaluator::new(gamma, alpha).moments(x).2
        }
    }
}

/// Per-point arrays of f, f', g along a series of latent log prices.
#[derive(Debug, Clone)]
pub struct MomentProfile {
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    pub g: Vec<f64>,
}

/// Evaluate f, f', g at every value of a latent series.
pub fn moment_profile(kernel: &ContaminationKernel, values: &[f64]) -> Result<MomentProfile> {
    match *kernel {
        ContaminationKernel::AdditiveGaussian { gamma } => Ok(MomentProfile {
            f: values.to_vec(),
            f_prime: vec![1.0; values.len()],
            g: vec![gamma * gamma; values.len()],
        }),
        ContaminationKernel::PureRounding { .. } => Err(Error::UnsupportedKernel(
            "pure rounding has no differentiable moment profile".into(),
        )),
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            let mut ev = NoiseRoundEvaluator::new(gamma, alpha);
            let mut f = Vec::with_capacity(values.len());
            let mut fp = Vec::with_capacity(values.len());
            let mut g = Vec::with_capacity(values.len());
            for &x in values {
                let (fx, fpx, gx) = ev.moments(x);
                f.push(fx);
                fp.push(fpx);
                g.push(gx);
            }
            Ok(MomentProfile { f, f_prime: fp, g })
        }
    }
}

/// Left-point Riemann sums over the master grid behind the CLT
/// standardization targets, all from a single moments pass.
#[derive(Debug, Clone, Copy)]
pub struct MomentIntegrals {
    /// integral of f'(X_t)^2 sigma_t^2 dt
    pub qv: f64,
    /// (4/3) integral of (f'(X_t) sigma_t)^4 dt
    pub xi_squared: f64,
    /// integral of g(X_t)^2 dt
    pub g_squared: f64,
}

/// Compute all Riemann-sum targets in one pass over the master grid.
pub fn moment_integrals(kernel: &ContaminationKernel, path: &MasterPath) -> Result<MomentIntegrals> {
    if !kernel.is_differentiable() {
        return Err(Error::UnsupportedKernel(
            "pure rounding admits no quadratic-variation target for f(X)".into(),
        ));
    }
    let values = path.values();
    let ds = path.fine_dt();
    let model = path.model();
    let mut qv = KahanSum::new();
    let mut xi = KahanSum::new();
    let mut g2 = KahanSum::new();

    match *kernel {
        ContaminationKernel::AdditiveGaussian { gamma } => {
            let g = gamma * gamma;
            let gg = g * g;
            for j in 0..values.len() - 1 {
                let s2 = {
                    let s = model.sigma_at(path.fine_time(j));
                    s * s
                };
                qv.add(s2 * ds);
                xi.add(s2 * s2 * ds);
                g2.add(gg * ds);
            }
        }
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            let mut ev = NoiseRoundEvaluator::new(gamma, alpha);
            for (j, &x) in values[..values.len() - 1].iter().enumerate() {
                let (_, fp, g) = ev.moments(x);
                let s = model.sigma_at(path.fine_time(j));
                let fs = fp * s;
                let fs2 = fs * fs;
                qv.add(fs2 * ds);
                xi.add(fs2 * fs2 * ds);
                g2.add(g * g * ds);
            }
        }
        ContaminationKernel::PureRounding { .. } => unreachable!(),
    }

    Ok(MomentIntegrals {
        qv: qv.total(),
        xi_squared: 4.0 / 3.0 * xi.total(),
        g_squared: g2.total(),
    })
}

/// The limiting quadratic variation of f(X): integral of f'(X_t)^2 sigma_t^2 dt.
pub fn qv_target(kernel: &ContaminationKernel, path: &MasterPath) -> Result<f64> {
    Ok(moment_integrals(kernel, path)?.qv)
}

/// The discretization-variance coefficient xi^2 = (4/3) integral (f' sigma)^4 dt.
pub fn xi_squared(kernel: &ContaminationKernel, path: &MasterPath) -> Result<f64> {
    Ok(moment_integrals(kernel, path)?.xi_squared)
}

/// Asymptotic variance of the standardized TSRV error:
/// (8 / (T c^2)) integral g(X_t)^2 dt + c xi^2 T.
pub fn avar_thm1(kernel: &ContaminationKernel, path: &MasterPath, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("c must be > 0, got {c}")));
    }
    let ints = moment_integrals(kernel, path)?;
    let t = path.grid().horizon();
    Ok(8.0 / (t * c * c) * ints.g_squared + c * ints.xi_squared * t)
}
