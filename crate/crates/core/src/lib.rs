//! # singlearn
//!
//! Exact Bayesian evidence, Kullback divergences, and learning-coefficient
//! bounds for naive Bayesian networks with latent nodes — the singular-model
//! setting where the free-parameter count overstates the effective penalty.
//!
//! The crate answers two questions about a latent-class model paired with a
//! declared truth it can represent:
//!
//! 1. **What penalty does theory predict?** [`coefficients`] evaluates the
//!    closed-form bound `mu` on the log-n coefficient of the average
//!    stochastic complexity, split into a regular and a singular part, next
//!    to the BIC coefficient `d/2`.
//! 2. **What does the model actually pay?** [`evidence`] computes the exact
//!    log marginal likelihood by latent-allocation enumeration (or Monte
//!    Carlo), and [`experiment`] turns replicated runs into learning curves,
//!    fitted slopes, generalization-error estimates, and model-selection
//!    tables, so the fitted slope can be compared against `mu` and `d/2`.
//!
//! Everything randomized takes an explicit master seed and is reproducible
//! across runs and worker counts.
//!
//! ```
//! use singlearn::coefficients::theorem1_mu;
//! use singlearn::model::{NetworkSpec, ParamSet, TrueModel};
//!
//! // One binary hidden node explaining one binary observable,
//! // with a structureless Bernoulli(0.5) truth.
//! let learner = NetworkSpec::new(vec![2], vec![2])?;
//! let tspec = NetworkSpec::new(vec![1], vec![2])?;
//! let tparams = ParamSet::new(&tspec, vec![vec![1.0]], vec![vec![vec![0.5, 0.5]]])?;
//! let truth = TrueModel::new(tspec, tparams)?;
//!
//! let report = theorem1_mu(&truth, &learner)?;
//! assert_eq!(report.mu, 1.5);
//! assert_eq!(report.half_d, 1.5);
//! # Ok::<(), singlearn::Error>(())
//! ```

pub mod coefficients;
pub mod divergence;
mod error;
pub mod evidence;
pub mod experiment;
pub mod io;
pub mod model;
pub mod numeric;
pub mod seeding;

pub use error::{Error, Result};
