//! Simulation and estimation laboratory for the two scales realized
//! volatility under microstructure contamination.
//!
//! The library simulates latent Ito log-price paths, contaminates them
//! through a Markov kernel (additive Gaussian noise, pure tick rounding, or
//! noise followed by rounding with a one-tick floor), evaluates the
//! conditional observation moments the contamination induces, computes
//! subsampled realized-volatility estimators, estimates Brownian local time
//! at the half-tick level set, and orchestrates the Monte Carlo experiments
//! that check the estimator's limit behavior.

pub mod contaminate;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod localtime;
pub mod math;
pub mod moments;
pub mod simulate;

pub use contaminate::{contaminate_series, observe_one, round_price, ContaminationKernel, ObservedSeries};
pub use error::{Error, Result};
pub use estimators::{
    grid_qv, regular_allocation, rv_all, rv_avg, select_k, tsrv, SubgridAllocation, TsrvResult,
};
pub use experiments::{
    emit_fig2, run_eq29_relation, run_fig3_sweep, run_thm1_clt, run_thm2_sweep, run_thm3_scaling,
    CriterionResult, ExperimentConfig, ExperimentKind, ExperimentReport, KernelKind, RefinePolicy,
    Summary, Thresholds,
};
pub use localtime::{
    crossing_statistic, local_time_profile, tanaka_local_time, thm2_limit, thm3_limit,
    LocalTimeMethod, LocalTimeProfile,
};
pub use moments::{
    avar_thm1, band_probabilities, f_bar, f_prime, g_var, moment_integrals, moment_profile,
    qv_target, xi_squared, BandDecomposition, MomentIntegrals, MomentProfile,
};
pub use simulate::{
    generate_master_path, Coefficients, MasterPath, ProcessModel, SamplingGrid,
};
