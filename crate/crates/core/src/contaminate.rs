//! The contamination kernel: the conditional law of the observed log price
//! given the latent one. Three variants: additive Gaussian noise on the log
//! scale, pure rounding to the tick grid, and Gaussian noise followed by
//! rounding with a price floor of one tick.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative nudge applied before the half-up tie decision so that decimal
/// inputs like (0.015, 0.01), whose f64 quotient lands a few ulps below the
/// exact half, still round up as the tie rule declares. Values that are not
/// within ~1e-12 relative of a half-tick are unaffected.
const TIE_EPS: f64 = 1e-12;

/// Conditional law of Y given X = x. Parameters are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContaminationKernel {
    /// y = x + eta, eta ~ N(0, gamma^2).
    AdditiveGaussian { gamma: f64 },
    /// y = log(alpha) v log(round(exp(x) / alpha) * alpha), deterministic.
    PureRounding { alpha: f64 },
    /// y = log(alpha) v log(round(exp(x + eta) / alpha) * alpha).
    NoiseThenRound { gamma: f64, alpha: f64 },
}

impl ContaminationKernel {
    pub fn additive(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidKernel(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self::AdditiveGaussian { gamma })
    }

    pub fn pure_rounding(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidKernel(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self::PureRounding { alpha })
    }

    pub fn noise_then_round(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidKernel(format!("gamma must be > 0, got {gamma}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidKernel(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self::NoiseThenRound { gamma, alpha })
    }

    /// Noise scale, if the variant has one.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            Self::AdditiveGaussian { gamma } => Some(*gamma),
            Self::PureRounding { .. } => None,
            Self::NoiseThenRound { gamma, .. } => Some(*gamma),
        }
    }

    /// Tick size, if the variant rounds.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::AdditiveGaussian { .. } => None,
            Self::PureRounding { alpha } => Some(*alpha),
            Self::NoiseThenRound { alpha, .. } => Some(*alpha),
        }
    }

    /// True when the kernel maps x to y without randomness.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::PureRounding { .. })
    }

    /// True when the conditional mean f is differentiable (everything except
    /// pure rounding).
    pub fn is_differentiable(&self) -> bool {
        !self.is_deterministic()
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::AdditiveGaussian { .. } => "additive",
            Self::PureRounding { .. } => "round",
            Self::NoiseThenRound { .. } => "noise_round",
        }
    }
}

/// Number of ticks nearest to a nonnegative price; ties at half a tick round
/// up. May return 0 for prices below alpha/2.
#[inline]
pub(crate) fn round_to_ticks(price: f64, alpha: f64) -> u64 {
    debug_assert!(price >= 0.0 && alpha > 0.0);
    let r = price / alpha;
    (r * (1.0 + TIE_EPS) + 0.5).floor() as u64
}

/// Price rounded to the nearest multiple of the tick size; half-tick ties
/// round up. Negative prices are rejected.
pub fn round_price(price: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidKernel(format!("alpha must be > 0, got {alpha}")));
    }
    if !price.is_finite() || price < 0.0 {
        return Err(Error::InvalidInput(format!(
            "price must be a finite nonnegative value, got {price}"
        )));
    }
    Ok(round_to_ticks(price, alpha) as f64 * alpha)
}

/// Tick count observed for a latent log price under a rounding kernel,
/// after the one-tick floor.
#[inline]
pub(crate) fn observe_ticks(x_plus_noise: f64, alpha: f64) -> u64 {
    round_to_ticks(x_plus_noise.exp(), alpha).max(1)
}

/// Log price of a tick count.
#[inline]
pub(crate) fn tick_log(k: u64, alpha: f64) -> f64 {
    (k as f64 * alpha).ln()
}

/// One draw from the kernel at latent log price x.
pub fn observe_one<R: Rng + ?Sized>(kernel: &ContaminationKernel, x: f64, rng: &mut R) -> f64 {
    match *kernel {
        ContaminationKernel::AdditiveGaussian { gamma } => {
            let z: f64 = StandardNormal.sample(rng);
            x + gamma * z
        }
        ContaminationKernel::PureRounding { alpha } => tick_log(observe_ticks(x, alpha), alpha),
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            let z: f64 = StandardNormal.sample(rng);
            tick_log(observe_ticks(x + gamma * z, alpha), alpha)
        }
    }
}

/// Observed log prices at the sampling times, conditionally independent
/// given the latent series.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    y: Vec<f64>,
    ticks: Option<Vec<u64>>,
    kernel: ContaminationKernel,
    seed: u64,
    stream: u64,
}

impl ObservedSeries {
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Tick counts for rounding variants; None for additive noise.
    pub fn ticks(&self) -> Option<&[u64]> {
        self.ticks.as_deref()
    }

    pub fn kernel(&self) -> &ContaminationKernel {
        &self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// Contaminate a latent log-price series. Each observation is an independent
/// draw from the kernel; the pure-rounding variant ignores the seed entirely.
pub fn contaminate_series(
    kernel: &ContaminationKernel,
    latent: &[f64],
    seed: u64,
    stream: u64,
) -> Result<ObservedSeries> {
    if latent.is_empty() {
        return Err(Error::InvalidInput("latent series is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let (y, ticks) = match *kernel {
        ContaminationKernel::AdditiveGaussian { gamma } => {
            let y = latent
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + gamma * z
                })
                .collect();
            (y, None)
        }
        ContaminationKernel::PureRounding { alpha } => {
            let ticks: Vec<u64> = latent.iter().map(|&x| observe_ticks(x, alpha)).collect();
            let y = ticks.iter().map(|&k| tick_log(k, alpha)).collect();
            (y, Some(ticks))
        }
        ContaminationKernel::NoiseThenRound { gamma, alpha } => {
            let ticks: Vec<u64> = latent
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    observe_ticks(x + gamma * z, alpha)
                })
                .collect();
            let y = ticks.iter().map(|&k| tick_log(k, alpha)).collect();
            (y, Some(ticks))
        }
    };

    Ok(ObservedSeries {
        y,
        ticks,
        kernel: *kernel,
        seed,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_nearest_multiple() {
        assert_eq!(round_price(0.014, 0.01).unwrap(), 0.01);
        assert_eq!(round_price(0.015, 0.01).unwrap(), 0.02);
        assert_eq!(round_price(1.2349, 0.01).unwrap(), 1.23);
        assert!(round_price(-1.0, 0.01).is_err());
        assert!(round_price(1.0, 0.0).is_err());
    }

    #[test]
    fn rounding_is_idempotent_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut prev_in = 0.0f64;
        let mut prev_out = round_price(prev_in, 0.01).unwrap();
        for _ in 0..2000 {
            let s: f64 = rng.random::<f64>() * 3.0;
            let r = round_price(s, 0.01).unwrap();
            assert_eq!(round_price(r, 0.01).unwrap(), r);
            if s >= prev_in {
                assert!(r >= prev_out, "monotonicity broke at {s}");
            }
            prev_in = s;
            prev_out = r;
        }
    }

    #[test]
    fn observe_one_matches_variant_definitions() {
        // pure rounding is deterministic
        let k = ContaminationKernel::pure_rounding(0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = observe_one(&k, 1.234f64.ln(), &mut rng);
        assert!((y - 1.23f64.ln()).abs() < 1e-15);

        // floor clause: a noisy price of 0.004 rounds to zero ticks, floored at alpha
        assert_eq!(observe_ticks(0.004f64.ln(), 0.01), 1);
        assert!((tick_log(1, 0.01) - 0.01f64.ln()).abs() < 1e-15);

        // additive definition with a forced draw
        let add = ContaminationKernel::additive(0.002).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let z: f64 = StandardNormal.sample(&mut r1);
        let y = observe_one(&add, 0.0, &mut r2);
        assert_eq!(y, 0.002 * z);
    }

    #[test]
    fn kernel_depends_on_x_only() {
        // equal x and equal rng state give equal y
        let k = ContaminationKernel::noise_then_round(0.005, 0.01).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(observe_one(&k, 0.003, &mut r1), observe_one(&k, 0.003, &mut r2));
        }
    }

    #[test]
    fn pure_rounding_series_is_seed_independent_and_floored() {
        let k = ContaminationKernel::pure_rounding(0.01).unwrap();
        let latent = vec![0.0, -5.2, 0.004f64.ln(), 0.31, 0.01f64.ln()];
        let a = contaminate_series(&k, &latent, 1, 0).unwrap();
        let b = contaminate_series(&k, &latent, 999, 3).unwrap();
        assert_eq!(a.y(), b.y());
        let floor = 0.01f64.ln();
        for &y in a.y() {
            assert!(y >= floor);
        }
        // exp(y)/alpha is a positive integer within 1e-9 relative
        for &y in a.y() {
            let r = y.exp() / 0.01;
            assert!((r - r.round()).abs() / r.round() < 1e-9);
            assert!(r.round() >= 1.0);
        }
        assert!(contaminate_series(&k, &[], 0, 0).is_err());
    }

    #[test]
    fn additive_noise_variance_matches_gamma_squared() {
        // 10^6 repeated draws at fixed x: sample variance of y - x within 1%
        let gamma = 0.004;
        let k = ContaminationKernel::additive(gamma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        rng.set_stream(2);
        let x = 0.7;
        let m = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..m {
            let d = observe_one(&k, x, &mut rng) - x;
            sum += d;
            sumsq += d * d;
        }
        let mean = sum / m as f64;
        let var = sumsq / m as f64 - mean * mean;
        assert!((var - gamma * gamma).abs() / (gamma * gamma) < 0.01, "var = {var}");
    }
}
