//! Three-parameter generalized extreme-value (GEV) family: density and
//! sampling, maximum likelihood fitting, Fisher information, and numerical
//! diagnostics for the regularity conditions behind the asymptotic
//! normality of the maximum likelihood estimator.

pub mod dqm;
pub mod error;
pub mod fisher;
pub mod gev;
pub mod mle;
pub mod optim;
pub mod output;
pub mod quad;
pub mod score;
pub mod sim;
pub mod support;
pub mod theta;

pub use dqm::{dqm_certify, dqm_remainder, shrink_rate_check, DqmReport, Verdict};
pub use error::{GevError, Result};
pub use fisher::{fisher_information, fisher_information_mc, FisherMatrix};
pub use mle::{fit, linearization_residual, neg_loglik, standard_errors, FitOptions, FitResult, ParamBox};
pub use gev::{cdf, log_density, pdf, quantile, sample, u_gamma, StdPoint};
pub use score::{bound_envelopes, dlogu, m_criterion, pdf_pow_gradient, score, BoundEnvelope, LemmaId, ScoreVector};
pub use sim::{run_simulation, SimConfig, SimReport};
pub use support::{common_support, endpoint_shift_mass, mass_outside, support_of, CommonSupport, SupportInterval};
pub use theta::{Origin, Sample, Theta};
