//! Latent log-price paths on a refinable fine ("master") grid.
//!
//! Paths are generated with exact Gaussian increments, so no discretization
//! bias enters the targets computed from them. Generation is deterministic in
//! `(seed, stream)`: the same pair reproduces the identical path bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Drift/volatility coefficients: constant, or deterministic piecewise
/// constant in time.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Constant { mu: f64, sigma: f64 },
    /// `starts` are segment start times (`starts[0] == 0`, strictly
    /// increasing); segment i has drift `mu[i]` and volatility `sigma[i]`
    /// on `[starts[i], starts[i+1])`.
    Piecewise {
        starts: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
}

/// The latent Ito log price: dX = mu dt + sigma dB, X_0 = x0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    x0: f64,
    coeffs: Coefficients,
}

impl ProcessModel {
    /// Constant-coefficient model. `sigma` must be strictly positive.
    pub fn constant(mu: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidModel("mu, sigma, x0 must be finite".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(Self {
            x0,
            coeffs: Coefficients::Constant { mu, sigma },
        })
    }

    /// Piecewise-constant coefficients on segments starting at `starts`.
    pub fn piecewise(starts: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>, x0: f64) -> Result<Self> {
        if starts.is_empty() || starts.len() != mu.len() || starts.len() != sigma.len() {
            return Err(Error::InvalidModel(
                "piecewise coefficients need equal, nonempty starts/mu/sigma".into(),
            ));
        }
        if starts[0] != 0.0 {
            return Err(Error::InvalidModel("first segment must start at 0".into()));
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel(
                "segment starts must be strictly increasing".into(),
            ));
        }
        if !x0.is_finite()
            || mu.iter().any(|v| !v.is_finite())
            || sigma.iter().any(|v| !v.is_finite())
            || starts.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("all fields must be finite".into()));
        }
        if sigma.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidModel(
                "sigma must be > 0 on every segment".into(),
            ));
        }
        Ok(Self {
            x0,
            coeffs: Coefficients::Piecewise { starts, mu, sigma },
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.coeffs, Coefficients::Constant { .. })
    }

    /// Constant sigma, if the model has one.
    pub fn constant_sigma(&self) -> Option<f64> {
        match &self.coeffs {
            Coefficients::Constant { sigma, .. } => Some(*sigma),
            Coefficients::Piecewise { .. } => None,
        }
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        match &self.coeffs {
            Coefficients::Constant { mu, .. } => *mu,
            Coefficients::Piecewise { starts, mu, .. } => mu[segment_index(starts, t)],
        }
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        match &self.coeffs {
            Coefficients::Constant { sigma, .. } => *sigma,
            Coefficients::Piecewise { starts, sigma, .. } => sigma[segment_index(starts, t)],
        }
    }

    pub fn sigma_max(&self) -> f64 {
        match &self.coeffs {
            Coefficients::Constant { sigma, .. } => *sigma,
            Coefficients::Piecewise { sigma, .. } => sigma.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Integral of mu over [t0, t1].
    fn drift_integral(&self, t0: f64, t1: f64) -> f64 {
        match &self.coeffs {
            Coefficients::Constant { mu, .. } => mu * (t1 - t0),
            Coefficients::Piecewise { starts, mu, .. } => {
                piecewise_integral(starts, mu, t0, t1, |v| v)
            }
        }
    }

    /// Integral of sigma^2 over [t0, t1].
    fn variance_integral(&self, t0: f64, t1: f64) -> f64 {
        match &self.coeffs {
            Coefficients::Constant { sigma, .. } => sigma * sigma * (t1 - t0),
            Coefficients::Piecewise { starts, sigma, .. } => {
                piecewise_integral(starts, sigma, t0, t1, |v| v * v)
            }
        }
    }
}

fn segment_index(starts: &[f64], t: f64) -> usize {
    match starts.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) => i - 1,
    }
}

fn piecewise_integral(starts: &[f64], vals: &[f64], t0: f64, t1: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..starts.len() {
        let seg_lo = starts[i];
        let seg_hi = if i + 1 < starts.len() {
            starts[i + 1]
        } else {
            f64::INFINITY
        };
        let lo = seg_lo.max(t0);
        let hi = seg_hi.min(t1);
        if hi > lo {
            acc += f(vals[i]) * (hi - lo);
        }
    }
    acc
}

/// Equally spaced observation grid: t_i = i * horizon / n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    n: usize,
    horizon: f64,
}

impl SamplingGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("n must be >= 2, got {n}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be a positive finite time, got {horizon}"
            )));
        }
        Ok(Self { n, horizon })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }
}

/// A realized latent path on the fine grid with `refine * n` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterPath {
    model: ProcessModel,
    grid: SamplingGrid,
    refine: usize,
    values: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl MasterPath {
    pub fn model(&self) -> &ProcessModel {
        &self.model
    }

    pub fn grid(&self) -> SamplingGrid {
        self.grid
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    /// All fine-grid values, `refine * n + 1` of them.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fine-grid step.
    pub fn fine_dt(&self) -> f64 {
        self.grid.horizon() / (self.refine as f64 * self.grid.n() as f64)
    }

    /// Time of fine-grid point j.
    pub fn fine_time(&self, j: usize) -> f64 {
        j as f64 * self.fine_dt()
    }

    /// Log prices at the observation times t_0..t_n.
    pub fn observation_values(&self) -> Vec<f64> {
        self.values.iter().step_by(self.refine).cloned().collect()
    }

    /// Log prices on the nested coarser grid with `n_coarse` intervals.
    /// `n_coarse` must divide n.
    pub fn subsample_nested(&self, n_coarse: usize) -> Result<Vec<f64>> {
        let n = self.grid.n();
        if n_coarse == 0 || !n.is_multiple_of(n_coarse) {
            return Err(Error::InvalidGrid(format!(
                "n_coarse = {n_coarse} must divide n = {n}"
            )));
        }
        let stride = (n / n_coarse) * self.refine;
        Ok(self.values.iter().step_by(stride).cloned().collect())
    }
}

/// Generate a latent path with exact Gaussian increments on the fine grid.
///
/// Constant coefficients give dX = mu ds + sigma sqrt(ds) Z exactly; for
/// piecewise-constant coefficients the per-step mean and variance are the
/// exact integrals across segment boundaries.
pub fn generate_master_path(
    model: &ProcessModel,
    grid: SamplingGrid,
    refine: usize,
    seed: u64,
    stream: u64,
) -> Result<MasterPath> {
    if refine == 0 {
        return Err(Error::InvalidGrid("refine must be >= 1".into()));
    }
    let steps = grid
        .n()
        .checked_mul(refine)
        .and_then(|s| s.checked_add(1))
        .ok_or_else(|| {
            Error::Capacity(format!(
                "refine * n = {} * {} overflows the index range",
                refine,
                grid.n()
            ))
        })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let fine_steps = steps - 1;
    let ds = grid.horizon() / fine_steps as f64;
    let mut values = Vec::with_capacity(steps);
    values.push(model.x0());

    match model.coefficients() {
        Coefficients::Constant { mu, sigma } => {
            let drift = mu * ds;
            let vol = sigma * ds.sqrt();
            let mut x = model.x0();
            for _ in 0..fine_steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += drift + vol * z;
                values.push(x);
            }
        }
        Coefficients::Piecewise { .. } => {
            let mut x = model.x0();
            for j in 0..fine_steps {
                let t0 = j as f64 * ds;
                let t1 = (j + 1) as f64 * ds;
                let m = model.drift_integral(t0, t1);
                let sd = model.variance_integral(t0, t1).sqrt();
                let z: f64 = StandardNormal.sample(&mut rng);
                x += m + sd * z;
                values.push(x);
            }
        }
    }

    Ok(MasterPath {
        model: model.clone(),
        grid,
        refine,
        values,
        seed,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    fn day_grid(n: usize) -> SamplingGrid {
        SamplingGrid::new(n, 1.0 / 252.0).unwrap()
    }

    #[test]
    fn initial_condition_and_length() {
        let model = ProcessModel::constant(0.0, 0.2, 0.0).unwrap();
        let path = generate_master_path(&model, day_grid(4), 1, 42, 0).unwrap();
        assert_eq!(path.values()[0], 0.0);
        assert_eq!(path.values().len(), 5);
    }

    #[test]
    fn same_seed_and_stream_reproduce_bit_identical_paths() {
        let model = ProcessModel::constant(0.03, 0.2, 0.1).unwrap();
        let a = generate_master_path(&model, day_grid(100), 3, 7, 5).unwrap();
        let b = generate_master_path(&model, day_grid(100), 3, 7, 5).unwrap();
        assert_eq!(a.values(), b.values());
        let c = generate_master_path(&model, day_grid(100), 3, 7, 6).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn rejects_invalid_model_and_refine() {
        assert!(ProcessModel::constant(0.0, 0.0, 0.0).is_err());
        assert!(ProcessModel::constant(0.0, -1.0, 0.0).is_err());
        assert!(ProcessModel::constant(f64::NAN, 1.0, 0.0).is_err());
        let model = ProcessModel::constant(0.0, 0.2, 0.0).unwrap();
        assert!(matches!(
            generate_master_path(&model, day_grid(4), 0, 0, 0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            generate_master_path(&model, day_grid(usize::MAX / 2), 3, 0, 0),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn terminal_values_match_gaussian_closed_form() {
        // standardized (X_T - x0 - mu T) / (sigma sqrt(T)) over 10^4 paths:
        // mean within 3/sqrt(M), variance within 1 +- 5/sqrt(M)
        let (mu, sigma, x0) = (0.5, 0.2, 0.1);
        let t = 1.0 / 252.0;
        let model = ProcessModel::constant(mu, sigma, x0).unwrap();
        let grid = SamplingGrid::new(64, t).unwrap();
        let m = 10_000usize;
        let standardized: Vec<f64> = (0..m as u64)
            .into_par_iter()
            .map(|s| {
                let p = generate_master_path(&model, grid, 1, 2024, s).unwrap();
                (p.values().last().unwrap() - x0 - mu * t) / (sigma * t.sqrt())
            })
            .collect();
        let (mean, var) = crate::math::mean_var(&standardized);
        let bound = (m as f64).sqrt().recip();
        assert!(mean.abs() < 3.0 * bound, "standardized mean = {mean}");
        assert!((var - 1.0).abs() < 5.0 * bound, "standardized var = {var}");
    }

    #[test]
    fn observation_values_stride_master_values() {
        let model = ProcessModel::constant(0.0, 0.2, 0.0).unwrap();
        let path = generate_master_path(&model, day_grid(4), 10, 1, 0).unwrap();
        let obs = path.observation_values();
        assert_eq!(obs.len(), 5);
        for (i, &v) in obs.iter().enumerate() {
            assert_eq!(v, path.values()[i * 10]);
        }
        let full = generate_master_path(&model, day_grid(4), 1, 1, 0).unwrap();
        assert_eq!(full.observation_values(), full.values());
    }

    #[test]
    fn nested_subsampling_shares_points() {
        let model = ProcessModel::constant(0.0, 0.2, 0.0).unwrap();
        let path = generate_master_path(&model, day_grid(8), 1, 3, 0).unwrap();
        let coarse = path.subsample_nested(2).unwrap();
        assert_eq!(coarse, vec![path.values()[0], path.values()[4], path.values()[8]]);
        assert_eq!(path.subsample_nested(8).unwrap(), path.observation_values());
        assert!(path.subsample_nested(3).is_err());

        // nested chain: each coarser series is a subsequence of the finer
        let path = generate_master_path(&model, day_grid(16), 2, 3, 1).unwrap();
        let fine = path.subsample_nested(16).unwrap();
        let mid = path.subsample_nested(8).unwrap();
        let coarse = path.subsample_nested(4).unwrap();
        for (i, &v) in mid.iter().enumerate() {
            assert_eq!(v, fine[2 * i]);
        }
        for (i, &v) in coarse.iter().enumerate() {
            assert_eq!(v, mid[2 * i]);
        }
    }

    #[test]
    fn piecewise_variance_integrates_segments() {
        // sigma = 0.1 on [0, T/2), 0.3 on [T/2, T): Var(X_T) = (0.01 + 0.09) T/2
        let t = 1.0 / 252.0;
        let model =
            ProcessModel::piecewise(vec![0.0, t / 2.0], vec![0.0, 0.0], vec![0.1, 0.3], 0.0)
                .unwrap();
        let grid = SamplingGrid::new(32, t).unwrap();
        let m = 20_000usize;
        let finals: Vec<f64> = (0..m as u64)
            .into_par_iter()
            .map(|s| {
                let p = generate_master_path(&model, grid, 1, 99, s).unwrap();
                *p.values().last().unwrap()
            })
            .collect();
        let (_, var) = crate::math::mean_var(&finals);
        let target = (0.01 + 0.09) * t / 2.0;
        assert!((var - target).abs() / target < 0.05, "var = {var}");
        assert_eq!(model.sigma_at(0.0), 0.1);
        assert_eq!(model.sigma_at(0.6 * t), 0.3);
        assert_eq!(model.sigma_max(), 0.3);
    }
}
