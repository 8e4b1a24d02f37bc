//! Rank-based tests of independence built on checkerboard (sample) copulas.
//!
//! Ranks are turned into box frequencies on a uniform partition of `I^d`,
//! the resulting piecewise-uniform copula is compared with the independence
//! copula, and the discrepancy is calibrated by simulating its exact null law.

/// Crate version, recorded in report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod checkerboard;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod montecarlo;
pub mod partition;
pub mod rng;
pub mod samplers;
pub mod screen;

pub use checkerboard::{checkerboard, AnalyticCopula, CheckerboardCopula};
pub use error::{Error, Result};
pub use estimator::{
    frequency_tensor, pseudo_sample, sample_copula_density, subcopula_grid, truncate_to_multiple,
    FrequencyTensor, PseudoSample, RawSample, TiePolicy,
};
pub use metrics::{eta_statistic, StatisticKind, StatisticValue};
pub use montecarlo::{
    build_null, critical_value, estimate_power, p_value, test_independence, NullDistribution, PowerEstimate,
    TestReport,
};
pub use partition::{box_index, BoxIndex, GridPoint, PiecewiseDensity, SubcopulaGrid};
pub use rng::RngSeed;
pub use samplers::{sample_null, CopulaSamplerSpec};
pub use screen::{screen_partition, PartitionHypothesis, ScreenReport, Verdict};
