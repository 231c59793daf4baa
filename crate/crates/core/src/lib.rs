//! Long-run analysis of self-financing strategies on Markovian log-price
//! models.
//!
//! The crate simulates discrete-time models `X_t = X_{t-1} + mu(X_{t-1}) +
//! sigma(X_{t-1}) eps_t` with price `S_t = exp(X_t)`, tracks the wealth of
//! allocation strategies in log space, and estimates the long-run
//! quantities that decide whether a strategy grows reliably:
//!
//! - ergodic growth rate and asymptotic variance of the log-wealth
//!   increments ([`ergodic`]);
//! - scaled cumulant generating function of the log-wealth sum and its
//!   convex conjugate, giving exponential tail rates ([`ldp`]);
//! - stability audits and quadratic-envelope drift certificates for the
//!   state chain ([`verify`]);
//! - failure-probability certificates: does `P(V_t < V_0 e^{bt})` decay
//!   geometrically ([`arbitrage`]);
//! - power-utility regimes and their relation to the failure-probability
//!   rates ([`utility`]).
//!
//! Simulation ([`engine`]) uses counter-based random streams: every draw is
//! a pure function of `(seed, path, step)`, so ensembles are reproducible
//! bit for bit at any thread count.

pub mod arbitrage;
pub mod engine;
pub mod ergodic;
pub mod error;
pub mod ldp;
pub mod model;
pub mod quad;
pub mod report;
pub mod rng;
pub mod strategy;
pub mod utility;
pub mod verify;

pub use arbitrage::{certify_gdpf, AeaCheck, GdpfConfig, GdpfReport, GdpfVerdict};
pub use engine::{simulate, NoiseStream, PathEnsemble, SimulationPlan};
pub use error::{Error, Result};
pub use ergodic::{
    empirical_invariant_histogram, ergodic_report, estimate_nu_f, estimate_sigma2_f,
    ErgodicConfig, ErgodicReport, Histogram2d, HistogramGrid,
};
pub use ldp::{
    check_growth_bound, estimate_scgf, find_alpha0, legendre, Alpha0Config, RateFunction,
    ScgfCurve,
};
pub use model::{Extrapolation, MarketModel, NoiseSpec, PiecewiseLinear, RealMap};
pub use strategy::{log_increment, Strategy, WealthState};
pub use utility::{
    aea_utility_lower_bound, converse_gdpf, expected_utility_curve, ConverseGdpf, UtilityConfig,
    UtilityLowerBound, UtilityReport, UtilityRegime, UtilitySpec,
};
pub use verify::{
    check_assumptions, pev, pev_quadrature, search_drift_certificate, AssumptionReport,
    DriftCertificate, DriftSearchConfig, VerifyConfig,
};

/// Crate version string embedded in reports and CSV headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
