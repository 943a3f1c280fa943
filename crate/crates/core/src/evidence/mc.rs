//! Monte-Carlo log evidence: the prior expectation of the likelihood,
//! estimated from seeded Dirichlet draws in fixed-size blocks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, NetworkSpec, Pattern};
use crate::seeding::{rng_for, DirichletSampler};

use super::{EvidenceMethod, EvidenceResult, Prior};

const BLOCK: usize = 4096;

/// Minimum draw count accepted by [`log_evidence_mc`].
pub const MIN_MC_DRAWS: usize = 100;

/// Monte-Carlo estimate of the log marginal likelihood.
///
/// Draws `w` from the prior and averages the likelihood in log space
/// (log-sum-exp over per-draw log likelihoods minus `log draws`); the
/// standard error comes from the delta method on the log scale. Blocks of
/// draws are seeded as `child_seed(seed, block)` and reduced in block order,
/// so the estimate is identical for any worker count.
pub fn log_evidence_mc(
    spec: &NetworkSpec,
    prior: &Prior,
    data: &Dataset,
    draws: usize,
    seed: u64,
) -> Result<EvidenceResult> {
    prior.check_shape(spec)?;
    for row in data.rows() {
        spec.check_observation(row)?;
    }
    if draws < MIN_MC_DRAWS {
        return Err(Error::invalid(format!(
            "mc evidence needs at least {MIN_MC_DRAWS} draws, got {draws}"
        )));
    }
    if data.is_empty() {
        return Ok(EvidenceResult {
            log_z0: 0.0,
            s_emp: 0.0,
            f: 0.0,
            method: EvidenceMethod::Mc,
            stderr: 0.0,
            terms: draws as u64,
        });
    }

    let patterns = data.patterns();
    let blocks = draws.div_ceil(BLOCK);
    let mut logliks = vec![0.0f64; draws];
    // Block b draws on stream b + 1; stream 0 of a replicate seed belongs to
    // dataset sampling, and sharing it would correlate draws with the data.
    logliks
        .par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut rng = rng_for(seed, b as u64 + 1);
            let mut scratch = DrawScratch::new(spec, prior);
            for slot in chunk.iter_mut() {
                *slot = scratch.draw_loglik(spec, &patterns, &mut rng);
            }
        });
    debug_assert!(blocks * BLOCK >= draws);

    let max = logliks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid(
            "every prior draw gave the dataset zero likelihood; \
             the data are impossible under the declared support",
        ));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &x in &logliks {
        let w = (x - max).exp();
        sum += w;
        sum_sq += w * w;
    }
    let nf = draws as f64;
    let mean_w = sum / nf;
    let var_w = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    let stderr = (var_w / nf).sqrt() / mean_w;
    let log_z0 = max + sum.ln() - nf.ln();
    Ok(EvidenceResult {
        log_z0,
        s_emp: 0.0,
        f: -log_z0 + 0.0,
        method: EvidenceMethod::Mc,
        stderr,
        terms: draws as u64,
    })
}

/// Per-thread sampling buffers: one Dirichlet sampler and one value buffer
/// per simplex in the parameter set.
struct DrawScratch {
    mix_samplers: Vec<DirichletSampler>,
    mix: Vec<Vec<f64>>,
    kernel_samplers: Vec<Vec<DirichletSampler>>,
    kernel: Vec<Vec<Vec<f64>>>,
}

impl DrawScratch {
    fn new(spec: &NetworkSpec, prior: &Prior) -> Self {
        let mix_samplers: Vec<_> = prior
            .alpha_mixing()
            .iter()
            .map(|row| DirichletSampler::new(row))
            .collect();
        let mix = spec.hidden_states().iter().map(|&t| vec![0.0; t]).collect();
        let kernel_samplers: Vec<Vec<_>> = prior
            .alpha_tables()
            .iter()
            .map(|cell| cell.iter().map(|a| DirichletSampler::new(a)).collect())
            .collect();
        let kernel = (0..spec.num_cells())
            .map(|_| {
                spec.observed_states()
                    .iter()
                    .map(|&y| vec![0.0; y])
                    .collect()
            })
            .collect();
        DrawScratch {
            mix_samplers,
            mix,
            kernel_samplers,
            kernel,
        }
    }

    fn draw_loglik(
        &mut self,
        spec: &NetworkSpec,
        patterns: &[Pattern],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> f64 {
        for (sampler, out) in self.mix_samplers.iter().zip(self.mix.iter_mut()) {
            sampler.sample_into(rng, out);
        }
        for (cell_samplers, cell_out) in self.kernel_samplers.iter().zip(self.kernel.iter_mut()) {
            for (sampler, out) in cell_samplers.iter().zip(cell_out.iter_mut()) {
                sampler.sample_into(rng, out);
            }
        }
        let mut loglik = 0.0;
        for p in patterns {
            let mut prob = 0.0;
            for c in 0..spec.num_cells() {
                let mut w = 1.0;
                for (k, row) in self.mix.iter().enumerate() {
                    w *= row[spec.cell_state(c, k)];
                }
                for (j, &l) in p.values.iter().enumerate() {
                    w *= self.kernel[c][j][l];
                }
                prob += w;
            }
            if prob <= 0.0 {
                return f64::NEG_INFINITY;
            }
            loglik += p.count as f64 * prob.ln();
        }
        loglik
    }
}
