//! Local time of the latent semimartingale at the half-tick level set
//! log((k + 1/2) alpha), and the limit values it feeds.
//!
//! Two estimators are kept deliberately distinct: the discrete Tanaka form
//! on the fine grid serves as the oracle, while the level-crossing count is
//! the statistic whose scaling the pure-rounding limit describes. Checks of
//! that limit always compare the crossing-based quantity against the Tanaka
//! profile so they do not validate an estimator against itself.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::KahanSum;
use crate::simulate::MasterPath;

/// Estimator used to build a local-time profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalTimeMethod {
    Tanaka,
    Crossing,
}

/// Discrete Tanaka local time at level `a`:
/// |X_N - a| - |X_0 - a| - sum_i sgn(X_i - a) (X_{i+1} - X_i),
/// with sgn(u) = 1 for u > 0 and -1 otherwise (right-continuous convention).
/// May come out slightly negative from discretization noise; raw values are
/// never clipped here.
pub fn tanaka_local_time(values: &[f64], a: f64) -> f64 {
    assert!(values.len() >= 2, "tanaka_local_time needs at least two values");
    let mut acc = KahanSum::new();
    for w in values.windows(2) {
        let sgn = if w[0] - a > 0.0 { 1.0 } else { -1.0 };
        acc.add(sgn * (w[1] - w[0]));
    }
    let first = values[0];
    let last = values[values.len() - 1];
    (last - a).abs() - (first - a).abs() - acc.total()
}

/// Number of grid steps that cross level `a` (strictly from below to at or
/// above, or the mirror image), together with count / sqrt(n).
pub fn crossing_statistic(values: &[f64], a: f64) -> (u64, f64) {
    assert!(values.len() >= 2, "crossing_statistic needs at least two values");
    let n = values.len() - 1;
    let mut count = 0u64;
    for w in values.windows(2) {
        let (x, y) = (w[0], w[1]);
        if (x < a && a <= y) || (y < a && a <= x) {
            count += 1;
        }
    }
    (count, count as f64 / (n as f64).sqrt())
}

/// Local time evaluated at every half-tick level the path visits.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    pub alpha: f64,
    pub k_lo: u64,
    pub k_hi: u64,
    /// `levels[j]` = log((k_lo + j + 1/2) alpha)
    pub levels: Vec<f64>,
    /// local time estimates, clipped at zero
    pub l: Vec<f64>,
    pub method: LocalTimeMethod,
    /// number of grid intervals of the source series
    pub source_grid: usize,
    /// largest negative raw estimate removed by clipping
    pub clip_slack: f64,
}

impl LocalTimeProfile {
    pub fn is_zero(&self) -> bool {
        self.l.iter().all(|&v| v == 0.0)
    }

    /// Tick index of level j.
    pub fn level_k(&self, j: usize) -> u64 {
        self.k_lo + j as u64
    }

    /// CSV form: one row per level.
    pub fn csv(&self) -> String {
        let method = match self.method {
            LocalTimeMethod::Tanaka => "tanaka",
            LocalTimeMethod::Crossing => "crossing",
        };
        let mut out = String::from("level,k,l,method\n");
        for (j, (&level, &l)) in self.levels.iter().zip(&self.l).enumerate() {
            out.push_str(&format!("{level:.16e},{},{l:.16e},{method}\n", self.level_k(j)));
        }
        out
    }
}

/// Evaluate the local time at every level log((k + 1/2) alpha) within the
/// path's range plus a margin of two fine-grid standard deviations. Levels
/// outside that range carry zero local time and are omitted.
///
/// The crossing method converts counts to local-time units via
/// sigma sqrt(T) sqrt(pi/2) count / sqrt(n) and therefore requires constant
/// volatility.
pub fn local_time_profile(
    path: &MasterPath,
    alpha: f64,
    method: LocalTimeMethod,
) -> Result<LocalTimeProfile> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidKernel(format!("alpha must be > 0, got {alpha}")));
    }
    let values = path.values();
    let n = values.len() - 1;
    let sigma = match method {
        LocalTimeMethod::Tanaka => path.model().sigma_max(),
        LocalTimeMethod::Crossing => path.model().constant_sigma().ok_or_else(|| {
            Error::InvalidModel(
                "crossing-based local time requires constant volatility".into(),
            )
        })?,
    };
    let margin = 2.0 * sigma * path.fine_dt().sqrt();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let lo = min - margin;
    let hi = max + margin;

    // level log((k+1/2) alpha) is inside [lo, hi] iff k in [e^lo/a - 1/2, e^hi/a - 1/2]
    let k_lo = ((lo.exp() / alpha - 0.5).ceil().max(1.0)) as u64;
    let k_hi_f = hi.exp() / alpha - 0.5;
    let (levels, l, k_lo, k_hi, slack) = if k_hi_f < k_lo as f64 {
        (Vec::new(), Vec::new(), 1, 0, 0.0)
    } else {
        let k_hi = k_hi_f.floor() as u64;
        let mut levels = Vec::with_capacity((k_hi - k_lo + 1) as usize);
        let mut raw = Vec::with_capacity(levels.capacity());
        for k in k_lo..=k_hi {
            let a = ((k as f64 + 0.5) * alpha).ln();
            levels.push(a);
            let est = match method {
                LocalTimeMethod::Tanaka => tanaka_local_time(values, a),
                LocalTimeMethod::Crossing => {
                    let t = path.grid().horizon();
                    let (_, normalized) = crossing_statistic(values, a);
                    sigma * t.sqrt() * (PI / 2.0).sqrt() * normalized
                }
            };
            raw.push(est);
        }
        let slack = raw.iter().cloned().fold(0.0f64, |s, v| s.max(-v));
        let l = raw.iter().map(|&v| v.max(0.0)).collect();
        (levels, l, k_lo, k_hi, slack)
    };

    Ok(LocalTimeProfile {
        alpha,
        k_lo,
        k_hi,
        levels,
        l,
        method,
        source_grid: n,
        clip_slack: slack,
    })
}

/// The small-noise limit of gamma times the quadratic variation of f(X):
/// (1 / (2 sqrt(pi))) sum_k L_k (log((k+1)/k))^2.
pub fn thm2_limit(profile: &LocalTimeProfile) -> f64 {
    let mut acc = KahanSum::new();
    for (j, &l) in profile.l.iter().enumerate() {
        let k = profile.level_k(j) as f64;
        let w = ((k + 1.0) / k).ln();
        acc.add(l * w * w);
    }
    acc.total() / (2.0 * PI.sqrt())
}

/// The pure-rounding scaling limit of TSRV / sqrt(n_bar):
/// (1 / (sigma sqrt(T))) sqrt(2/pi) sum_k L_k (log((k+1)/k))^2.
pub fn thm3_limit(profile: &LocalTimeProfile, sigma: f64, horizon: f64) -> Result<f64> {
    if !(sigma > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidInput(
            "thm3_limit needs sigma > 0 and horizon > 0".into(),
        ));
    }
    let mut acc = KahanSum::new();
    for (j, &l) in profile.l.iter().enumerate() {
        let k = profile.level_k(j) as f64;
        let w = ((k + 1.0) / k).ln();
        acc.add(l * w * w);
    }
    Ok(acc.total() * (2.0 / PI).sqrt() / (sigma * horizon.sqrt()))
}
