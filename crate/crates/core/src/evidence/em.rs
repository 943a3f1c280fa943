//! Expectation-maximization for the latent-class likelihood, used by the
//! BIC-style comparisons in model selection.

use crate::error::{Error, Result};
use crate::model::{Dataset, NetworkSpec, ParamSet};
use crate::seeding::rng_for;

/// Floor applied to responsibilities and parameter updates before
/// normalization, keeping every log-likelihood finite.
const EM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            restarts: 20,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Best-of-restarts EM fit; returns the winning parameters and their
/// log-likelihood. Restart `r` initializes from Dirichlet(1) draws seeded
/// with `child_seed(seed, r)`.
pub fn fit_em(
    spec: &NetworkSpec,
    data: &Dataset,
    opts: EmOptions,
    seed: u64,
) -> Result<(ParamSet, f64)> {
    if data.is_empty() {
        return Err(Error::invalid("EM needs at least one observation"));
    }
    if opts.restarts == 0 {
        return Err(Error::invalid("EM needs at least one restart"));
    }
    let mut best: Option<(ParamSet, f64)> = None;
    for r in 0..opts.restarts {
        let mut rng = rng_for(seed, r as u64);
        let init = ParamSet::random(spec, &mut rng);
        let (params, trace) = em_run(spec, data, init, opts.tol, opts.max_iter)?;
        let ll = *trace.last().expect("trace has at least one entry");
        if best.as_ref().is_none_or(|(_, b)| ll > *b) {
            best = Some((params, ll));
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// One EM run from a given initialization. Returns the final parameters and
/// the per-iteration log-likelihood trace (nondecreasing up to the floor).
pub fn em_run(
    spec: &NetworkSpec,
    data: &Dataset,
    init: ParamSet,
    tol: f64,
    max_iter: usize,
) -> Result<(ParamSet, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::invalid("EM needs at least one observation"));
    }
    let patterns = data.patterns();
    let cells = spec.num_cells();
    let mut params = init;
    let mut trace = Vec::new();
    let mut resp = vec![0.0f64; cells];

    loop {
        // E-step and log-likelihood under the current parameters.
        let mut loglik = 0.0;
        let mut mix_counts: Vec<Vec<f64>> = spec
            .hidden_states()
            .iter()
            .map(|&t| vec![0.0; t])
            .collect();
        let mut table_counts: Vec<Vec<Vec<f64>>> = (0..cells)
            .map(|_| {
                spec.observed_states()
                    .iter()
                    .map(|&y| vec![0.0; y])
                    .collect()
            })
            .collect();
        for p in &patterns {
            let mut total = 0.0;
            for (c, slot) in resp.iter_mut().enumerate() {
                let mut w = params.cell_weight(spec, c);
                for (j, &l) in p.values.iter().enumerate() {
                    w *= params.tables()[c][j][l];
                }
                *slot = w;
                total += w;
            }
            if total <= 0.0 {
                return Err(Error::numerical(
                    "EM responsibilities vanished for a pattern",
                ));
            }
            loglik += p.count as f64 * total.ln();
            let scale = p.count as f64 / total;
            for c in 0..cells {
                let r = resp[c] * scale;
                for k in 0..spec.num_hidden() {
                    mix_counts[k][spec.cell_state(c, k)] += r;
                }
                for (j, &l) in p.values.iter().enumerate() {
                    table_counts[c][j][l] += r;
                }
            }
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| loglik - prev < tol);
        trace.push(loglik);
        // The returned parameters always correspond to the last trace entry,
        // so stop before the M-step once converged or out of iterations.
        if converged || trace.len() >= max_iter.max(1) {
            break;
        }
        let mixing = mix_counts.into_iter().map(floor_and_normalize).collect();
        let tables = table_counts
            .into_iter()
            .map(|cell| cell.into_iter().map(floor_and_normalize).collect())
            .collect();
        params = ParamSet::new(spec, mixing, tables)?;
    }
    Ok((params, trace))
}

fn floor_and_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let mut sum = 0.0;
    for x in v.iter_mut() {
        if *x < EM_FLOOR {
            *x = EM_FLOOR;
        }
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    v
}

/// Log-likelihood of the dataset under fixed parameters.
pub fn log_likelihood(spec: &NetworkSpec, params: &ParamSet, data: &Dataset) -> Result<f64> {
    let mut ll = 0.0;
    for p in data.patterns() {
        let prob = crate::model::joint_prob(spec, params, &p.values)?;
        if prob <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += p.count as f64 * prob.ln();
    }
    Ok(ll)
}
