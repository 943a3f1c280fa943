//! Bayesian evidence (exact and Monte-Carlo), stochastic complexity, the
//! predictive distribution, direct generalization error, the Laplace-integral
//! functional, and an EM fitter.
//!
//! The evidence-side identity used throughout:
//! `F = -log Z0 - S_emp`, where `S_emp = -Σ_i log q(X_i)` is the empirical
//! entropy of the dataset under the truth. [`log_evidence_exact`] and
//! [`log_evidence_mc`] leave `S_emp = 0` (truth unknown at that point);
//! [`stochastic_complexity`] fills it in, keeping the identity exact at
//! every stage.

mod em;
mod exact;
mod laplace;
mod mc;

pub use em::{em_run, fit_em, log_likelihood, EmOptions};
pub use exact::{exact_term_count, log_evidence_exact, EXACT_TERM_BUDGET};
pub use laplace::{laplace_functional, MAX_BOX_DIM};
pub use mc::{log_evidence_mc, MIN_MC_DRAWS};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{sample_dataset, true_density, Dataset, NetworkSpec, TrueModel};
use crate::numeric::{mean_and_stderr, Estimate};
use crate::seeding::child_seed;

/// Dirichlet concentrations for every simplex in a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    alpha_mixing: Vec<Vec<f64>>,
    alpha_tables: Vec<Vec<Vec<f64>>>,
}

impl Prior {
    /// All concentrations 1 (uniform on every simplex).
    pub fn uniform(spec: &NetworkSpec) -> Self {
        Prior::constant(spec, 1.0).expect("1.0 is a valid concentration")
    }

    /// The same concentration everywhere; must be positive so the prior is
    /// positive on a neighborhood of any truth.
    pub fn constant(spec: &NetworkSpec, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "prior concentration must be positive and finite, got {alpha}"
            )));
        }
        let alpha_mixing = spec
            .hidden_states()
            .iter()
            .map(|&t| vec![alpha; t])
            .collect();
        let alpha_tables = (0..spec.num_cells())
            .map(|_| {
                spec.observed_states()
                    .iter()
                    .map(|&y| vec![alpha; y])
                    .collect()
            })
            .collect();
        Ok(Prior {
            alpha_mixing,
            alpha_tables,
        })
    }

    /// Fully explicit concentrations, validated against the shape.
    pub fn new(
        spec: &NetworkSpec,
        alpha_mixing: Vec<Vec<f64>>,
        alpha_tables: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let prior = Prior {
            alpha_mixing,
            alpha_tables,
        };
        prior.check_shape(spec)?;
        Ok(prior)
    }

    pub fn alpha_mixing(&self) -> &[Vec<f64>] {
        &self.alpha_mixing
    }

    pub fn alpha_tables(&self) -> &[Vec<Vec<f64>>] {
        &self.alpha_tables
    }

    pub(crate) fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        if self.alpha_mixing.len() != spec.num_hidden()
            || self.alpha_tables.len() != spec.num_cells()
        {
            return Err(Error::invalid("prior does not match the shape"));
        }
        for (k, row) in self.alpha_mixing.iter().enumerate() {
            if row.len() != spec.hidden_states()[k] {
                return Err(Error::invalid("prior mixing row length mismatch"));
            }
            if row.iter().any(|&a| !a.is_finite() || a <= 0.0) {
                return Err(Error::invalid("prior concentrations must be positive"));
            }
        }
        for cell in &self.alpha_tables {
            if cell.len() != spec.num_observed() {
                return Err(Error::invalid("prior table count mismatch"));
            }
            for (j, tab) in cell.iter().enumerate() {
                if tab.len() != spec.observed_states()[j] {
                    return Err(Error::invalid("prior table length mismatch"));
                }
                if tab.iter().any(|&a| !a.is_finite() || a <= 0.0) {
                    return Err(Error::invalid("prior concentrations must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// How an evidence value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceMethod {
    Exact,
    Mc,
}

impl std::fmt::Display for EvidenceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvidenceMethod::Exact => write!(f, "exact"),
            EvidenceMethod::Mc => write!(f, "mc"),
        }
    }
}

/// Evidence and stochastic-complexity summary for one dataset.
///
/// `s_emp` and `f` refer to a declared truth; they are 0 and `-log_z0` until
/// [`stochastic_complexity`] attaches one. `terms` counts enumerated
/// allocations (exact) or draws (mc); `stderr` is 0 for exact results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceResult {
    pub log_z0: f64,
    pub s_emp: f64,
    pub f: f64,
    pub method: EvidenceMethod,
    pub stderr: f64,
    pub terms: u64,
}

/// Attach a truth: fills the empirical entropy `S_emp = -Σ log q(X_i)` and
/// the stochastic complexity `F = -log Z0 - S_emp`.
pub fn stochastic_complexity(
    result: EvidenceResult,
    truth: &TrueModel,
    data: &Dataset,
) -> Result<EvidenceResult> {
    let mut s_emp = 0.0;
    for row in data.rows() {
        let q = true_density(truth, row)?;
        if q <= 0.0 {
            return Err(Error::invalid(
                "dataset is inconsistent with the declared truth (q = 0 at a row)",
            ));
        }
        s_emp -= q.ln();
    }
    // + 0.0 keeps a zero complexity from printing as -0
    Ok(EvidenceResult {
        s_emp,
        f: -result.log_z0 - s_emp + 0.0,
        ..result
    })
}

/// Posterior predictive probabilities for every observation vector, in the
/// iteration order of [`NetworkSpec::observation_vectors`]:
/// `p(x | data) = Z0(data + x) / Z0(data)`.
pub fn predictive_table(spec: &NetworkSpec, prior: &Prior, data: &Dataset) -> Result<Vec<f64>> {
    let base = log_evidence_exact(spec, prior, data)?;
    let mut out = Vec::with_capacity(spec.num_observations());
    for x in spec.observation_vectors() {
        let mut extended = data.clone();
        extended.push(x);
        let ext = log_evidence_exact(spec, prior, &extended)?;
        out.push((ext.log_z0 - base.log_z0).exp());
    }
    Ok(out)
}

/// Predictive probability of a single observation vector.
pub fn predictive(spec: &NetworkSpec, prior: &Prior, data: &Dataset, x: &[usize]) -> Result<f64> {
    spec.check_observation(x)?;
    let base = log_evidence_exact(spec, prior, data)?;
    let mut rows = data.rows().to_vec();
    rows.push(x.to_vec());
    let extended = Dataset::new(rows, spec)?;
    let ext = log_evidence_exact(spec, prior, &extended)?;
    Ok((ext.log_z0 - base.log_z0).exp())
}

/// Direct generalization error: the averaged Kullback information from the
/// truth to the Bayesian predictive distribution, over `replicates`
/// independently sampled datasets of size `n`.
///
/// Replicate `r` draws its dataset with `child_seed(seed, r)`, the same
/// derivation used by the learning-curve ensembles, so both
/// generalization-error routes share datasets when given one master seed.
pub fn gen_error_direct(
    truth: &TrueModel,
    spec: &NetworkSpec,
    prior: &Prior,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let per_rep: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = sample_dataset(truth, n, child_seed(seed, r as u64));
            let table = predictive_table(spec, prior, &data)?;
            let mut g = 0.0;
            for (x, &p) in spec.observation_vectors().zip(&table) {
                let q = true_density(truth, &x)?;
                if q <= 0.0 {
                    continue;
                }
                if p <= 0.0 {
                    return Err(Error::numerical(
                        "predictive probability vanished on the truth's support",
                    ));
                }
                g += q * (q / p).ln();
            }
            Ok(g)
        })
        .collect();
    let values = per_rep.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_stderr(&values))
}
