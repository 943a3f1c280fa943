//! Experiment orchestration: learning curves, slope fitting, the
//! finite-difference generalization-error route, model selection, and the
//! proposition checks.

use rayon::prelude::*;

use crate::coefficients::{theorem1_mu, CoefficientReport};
use crate::divergence::kl_full;
use crate::error::{Error, Result};
use crate::evidence::{
    fit_em, laplace_functional, log_evidence_exact, log_evidence_mc, stochastic_complexity,
    EmOptions, EvidenceMethod, Prior,
};
use crate::model::{sample_dataset, NetworkSpec, ParamSet, TrueModel};
use crate::numeric::{mean_and_stderr, Estimate};
use crate::seeding::child_seed;
use rand::Rng;

/// Settings for one learning-curve run.
#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub prior_alpha: f64,
    pub ns: Vec<usize>,
    pub replicates: usize,
    pub method: EvidenceMethod,
    pub mc_draws: usize,
    pub seed: u64,
}

impl CurveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            return Err(Error::invalid("the n-grid is empty"));
        }
        if self.ns[0] < 2 {
            return Err(Error::invalid("every n in the grid must be >= 2"));
        }
        if !self.ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("the n-grid must be strictly increasing"));
        }
        if self.replicates < 2 {
            return Err(Error::invalid("need at least 2 replicates per n"));
        }
        if self.prior_alpha.is_nan() || self.prior_alpha <= 0.0 {
            return Err(Error::invalid("prior_alpha must be positive"));
        }
        Ok(())
    }
}

/// Per-replicate stochastic complexities at one sample size.
///
/// Replicate `r` samples its dataset with `child_seed(seed, r)`; ensembles
/// built with the same master seed therefore share datasets across sample
/// sizes (the smaller size is a row prefix of the larger), which is the
/// common-random-number pairing the finite-difference route relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct FEnsemble {
    pub n: usize,
    pub seed: u64,
    pub f_values: Vec<f64>,
}

/// Stochastic complexity of `replicates` datasets of size `n`.
#[allow(clippy::too_many_arguments)]
pub fn f_ensemble(
    truth: &TrueModel,
    spec: &NetworkSpec,
    prior: &Prior,
    method: EvidenceMethod,
    mc_draws: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<FEnsemble> {
    let per_rep: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rep_seed = child_seed(seed, r as u64);
            let data = sample_dataset(truth, n, rep_seed);
            let ev = match method {
                EvidenceMethod::Exact => log_evidence_exact(spec, prior, &data)?,
                EvidenceMethod::Mc => log_evidence_mc(spec, prior, &data, mc_draws, rep_seed)?,
            };
            Ok(stochastic_complexity(ev, truth, &data)?.f)
        })
        .collect();
    let f_values = per_rep.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(FEnsemble { n, seed, f_values })
}

/// Mean stochastic complexity at one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub replicates: usize,
    pub mean_f: f64,
    pub stderr_f: f64,
}

/// Ordinary-least-squares slope of mean F against `log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub lambda_hat: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// A fitted learning curve. The slope is present when the grid has at least
/// three sizes; with five or more, only the upper half of the grid is fitted
/// to cut small-n transient bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    pub slope: Option<SlopeFit>,
}

/// Aggregate ensembles into a curve and fit the asymptotic slope.
pub fn assemble_curve(ensembles: &[FEnsemble]) -> Result<LearningCurve> {
    let mut points = Vec::with_capacity(ensembles.len());
    for e in ensembles {
        let est = mean_and_stderr(&e.f_values);
        points.push(CurvePoint {
            n: e.n,
            replicates: e.f_values.len(),
            mean_f: est.mean,
            stderr_f: est.stderr,
        });
    }
    let slope = if points.len() >= 3 {
        let start = if points.len() >= 5 { points.len() / 2 } else { 0 };
        let fitted: Vec<(f64, f64)> = points[start..]
            .iter()
            .map(|p| (p.n as f64, p.mean_f))
            .collect();
        Some(fit_slope(&fitted)?)
    } else {
        None
    };
    Ok(LearningCurve { points, slope })
}

/// OLS of `mean_F` against `log n` over `(n, mean_F)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::invalid("slope fitting needs at least 3 points"));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, f)| f).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("slope fitting needs distinct n values"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let lambda_hat = sxy / sxx;
    let intercept = y_mean - lambda_hat * x_mean;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + lambda_hat * x);
            r * r
        })
        .sum();
    let dof = m - 2.0;
    let stderr = if dof > 0.0 {
        (rss.max(0.0) / dof / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(SlopeFit {
        lambda_hat,
        intercept,
        stderr,
    })
}

/// A full curve run: the fitted curve, its ensembles (kept for the
/// finite-difference route), and the coefficient report of the pair.
#[derive(Debug, Clone)]
pub struct CurveRun {
    pub curve: LearningCurve,
    pub ensembles: Vec<FEnsemble>,
    pub report: CoefficientReport,
}

/// Run the learning-curve experiment: for each grid size, average F over
/// seeded replicate datasets, then fit the slope against `log n`.
pub fn run_curve(truth: &TrueModel, spec: &NetworkSpec, cfg: &CurveConfig) -> Result<CurveRun> {
    cfg.validate()?;
    let report = theorem1_mu(truth, spec)?;
    let prior = Prior::constant(spec, cfg.prior_alpha)?;
    let mut ensembles = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        ensembles.push(f_ensemble(
            truth,
            spec,
            &prior,
            cfg.method,
            cfg.mc_draws,
            n,
            cfg.replicates,
            cfg.seed,
        )?);
    }
    let curve = assemble_curve(&ensembles)?;
    Ok(CurveRun {
        curve,
        ensembles,
        report,
    })
}

/// Finite-difference generalization error: `mean F(n+1) - mean F(n)` from two
/// ensembles that share replicate datasets, with the standard error of the
/// paired differences.
pub fn gen_error_from_f(at_n: &FEnsemble, at_n_plus_1: &FEnsemble) -> Result<Estimate> {
    if at_n_plus_1.n != at_n.n + 1 {
        return Err(Error::invalid(format!(
            "ensembles are at sizes {} and {}, expected consecutive",
            at_n.n, at_n_plus_1.n
        )));
    }
    if at_n.seed != at_n_plus_1.seed || at_n.f_values.len() != at_n_plus_1.f_values.len() {
        return Err(Error::invalid(
            "mismatched ensembles: the finite-difference route needs common-random-number \
             replicates (same master seed, same replicate count)",
        ));
    }
    let diffs: Vec<f64> = at_n
        .f_values
        .iter()
        .zip(&at_n_plus_1.f_values)
        .map(|(a, b)| b - a)
        .collect();
    Ok(mean_and_stderr(&diffs))
}

/// One candidate model in a selection experiment.
#[derive(Debug, Clone)]
pub struct SelectCandidate {
    pub name: String,
    pub spec: NetworkSpec,
}

/// Settings for one selection experiment.
#[derive(Debug, Clone)]
pub struct SelectConfig {
    pub n: usize,
    pub replicates: usize,
    pub prior_alpha: f64,
    pub method: EvidenceMethod,
    pub mc_draws: usize,
    pub em: EmOptions,
    pub seed: u64,
}

/// One (replicate, candidate) scoring row.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    /// 1-based replicate id.
    pub replicate: usize,
    pub candidate: String,
    pub neg_log_z0: f64,
    pub bic_score: f64,
    pub singular_score: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub rows: Vec<SelectionRow>,
    /// Per replicate, index of the candidate chosen by exact evidence.
    pub gold_picks: Vec<usize>,
    pub bic_picks: Vec<usize>,
    pub singular_picks: Vec<usize>,
    pub bic_agreement: f64,
    pub singular_agreement: f64,
}

/// Score ties within this margin are broken toward the lower-dimensional
/// candidate.
const TIE_TOL: f64 = 1e-9;

fn argmin_with_occam(scores: &[f64], dims: &[u64]) -> usize {
    let mut best = 0usize;
    for i in 1..scores.len() {
        let strictly_better = scores[i] < scores[best] - TIE_TOL;
        let tie_on_smaller_model =
            (scores[i] - scores[best]).abs() <= TIE_TOL && dims[i] < dims[best];
        if strictly_better || tie_on_smaller_model {
            best = i;
        }
    }
    best
}

/// Model-selection experiment: per replicate and candidate, the exact
/// negative log evidence (gold standard), the BIC score, and the
/// singular-coefficient score, plus per-criterion agreement rates with gold.
///
/// The singular score uses the coefficient bound computed against the
/// *declared* truth shape; this is a controlled verification of the penalty,
/// not an estimator usable when the truth is unknown.
pub fn run_select(
    truth: &TrueModel,
    candidates: &[SelectCandidate],
    cfg: &SelectConfig,
) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("need at least one candidate"));
    }
    if cfg.replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    if cfg.n < 2 {
        return Err(Error::invalid("selection needs n >= 2"));
    }
    let reports: Vec<CoefficientReport> = candidates
        .iter()
        .map(|c| theorem1_mu(truth, &c.spec))
        .collect::<Result<_>>()?;
    let dims: Vec<u64> = reports.iter().map(|r| r.d).collect();
    let priors: Vec<Prior> = candidates
        .iter()
        .map(|c| Prior::constant(&c.spec, cfg.prior_alpha))
        .collect::<Result<_>>()?;
    let log_n = (cfg.n as f64).ln();

    let per_rep: Vec<Result<Vec<(f64, f64, f64)>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let rep_seed = child_seed(cfg.seed, r as u64);
            let data = sample_dataset(truth, cfg.n, child_seed(rep_seed, 0));
            let mut scores = Vec::with_capacity(candidates.len());
            for (j, cand) in candidates.iter().enumerate() {
                let ev = match cfg.method {
                    EvidenceMethod::Exact => log_evidence_exact(&cand.spec, &priors[j], &data)?,
                    EvidenceMethod::Mc => log_evidence_mc(
                        &cand.spec,
                        &priors[j],
                        &data,
                        cfg.mc_draws,
                        child_seed(rep_seed, 1),
                    )?,
                };
                let (_, max_ll) =
                    fit_em(&cand.spec, &data, cfg.em, child_seed(rep_seed, 2 + j as u64))?;
                let bic = -max_ll + reports[j].half_d * log_n;
                let singular = -max_ll + reports[j].mu * log_n;
                scores.push((-ev.log_z0, bic, singular));
            }
            Ok(scores)
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.replicates * candidates.len());
    let mut gold_picks = Vec::with_capacity(cfg.replicates);
    let mut bic_picks = Vec::with_capacity(cfg.replicates);
    let mut singular_picks = Vec::with_capacity(cfg.replicates);
    for (r, rep) in per_rep.into_iter().enumerate() {
        let scores = rep?;
        let gold: Vec<f64> = scores.iter().map(|s| s.0).collect();
        let bic: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let singular: Vec<f64> = scores.iter().map(|s| s.2).collect();
        gold_picks.push(argmin_with_occam(&gold, &dims));
        bic_picks.push(argmin_with_occam(&bic, &dims));
        singular_picks.push(argmin_with_occam(&singular, &dims));
        for (j, cand) in candidates.iter().enumerate() {
            rows.push(SelectionRow {
                replicate: r + 1,
                candidate: cand.name.clone(),
                neg_log_z0: scores[j].0,
                bic_score: scores[j].1,
                singular_score: scores[j].2,
            });
        }
    }
    let agree = |picks: &[usize]| {
        picks
            .iter()
            .zip(&gold_picks)
            .filter(|(a, b)| a == b)
            .count() as f64
            / cfg.replicates as f64
    };
    let bic_agreement = agree(&bic_picks);
    let singular_agreement = agree(&singular_picks);
    Ok(SelectionResult {
        rows,
        gold_picks,
        bic_picks,
        singular_picks,
        bic_agreement,
        singular_agreement,
    })
}

/// One proposition-style check with its measured margin.
#[derive(Debug, Clone)]
pub struct PropCheck {
    pub name: &'static str,
    /// Signed margin; nonnegative (up to the check's own tolerance) is a pass.
    pub margin: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PropReport {
    pub checks: Vec<PropCheck>,
}

impl PropReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Random compatible (truth, learner) pair with `H <= K <= 4`, learner
/// states in `2..=5`, truth states in `1..=T[k]`, `M <= 4`, `Y` in `2..=5`.
pub fn random_compatible_pair<R: Rng + ?Sized>(rng: &mut R) -> (TrueModel, NetworkSpec) {
    let k = rng.random_range(1..=4usize);
    let h = rng.random_range(1..=k);
    let t: Vec<usize> = (0..k).map(|_| rng.random_range(2..=5usize)).collect();
    let s: Vec<usize> = (0..h).map(|i| rng.random_range(1..=t[i])).collect();
    let m = rng.random_range(1..=4usize);
    let y: Vec<usize> = (0..m).map(|_| rng.random_range(2..=5usize)).collect();
    let tspec = NetworkSpec::new(s, y.clone()).expect("generated truth shape is valid");
    let params = ParamSet::random(&tspec, rng);
    (
        TrueModel::new(tspec, params).expect("generated truth is valid"),
        NetworkSpec::new(t, y).expect("generated learner shape is valid"),
    )
}

const PROP1_REPLICATES: usize = 200;
const PROP1_GRID: usize = 80;

/// Run the proposition checks: the Jensen upper bound on mean F, the
/// monotonicity of the Laplace functional, its additivity under separable
/// integrands, and the exact coefficient decomposition over random shapes.
pub fn run_props(seed: u64) -> Result<PropReport> {
    let mut checks = Vec::new();

    // Jensen bound on the one-binary-observable shape with a Bernoulli(0.5)
    // truth: mean F over replicates must sit below the quadrature value of
    // the Laplace functional of the full Kullback information.
    let learner = NetworkSpec::new(vec![2], vec![2])?;
    let tspec = NetworkSpec::new(vec![1], vec![2])?;
    let tparams = ParamSet::new(&tspec, vec![vec![1.0]], vec![vec![vec![0.5, 0.5]]])?;
    let truth = TrueModel::new(tspec, tparams)?;
    let prior = Prior::uniform(&learner);
    let kl_at = |w: &[f64]| -> f64 {
        let params = ParamSet::new(
            &learner,
            vec![vec![w[0], 1.0 - w[0]]],
            vec![
                vec![vec![w[1], 1.0 - w[1]]],
                vec![vec![w[2], 1.0 - w[2]]],
            ],
        )
        .expect("cube point is a valid parameter set");
        kl_full(&truth, &learner, &params)
            .expect("compatible shapes")
            .nats()
    };
    let names = ["prop1_jensen_n4", "prop1_jensen_n8", "prop1_jensen_n16"];
    for (&n, name) in [4usize, 8, 16].iter().zip(names) {
        let ens = f_ensemble(
            &truth,
            &learner,
            &prior,
            EvidenceMethod::Exact,
            0,
            n,
            PROP1_REPLICATES,
            child_seed(seed, n as u64),
        )?;
        let est = mean_and_stderr(&ens.f_values);
        let bound = laplace_functional(
            kl_at,
            |_| 1.0,
            &[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
            n as f64,
            PROP1_GRID,
        )?;
        let margin = bound + 3.0 * est.stderr - est.mean;
        checks.push(PropCheck {
            name,
            margin,
            pass: margin >= 0.0,
            detail: format!(
                "mean_F={} stderr={} quadrature_bound={}",
                est.mean, est.stderr, bound
            ),
        });
    }

    // Monotonicity: pointwise-larger action with pointwise-smaller weight
    // can only increase the functional.
    let mut mono_margin = f64::INFINITY;
    for n in [5.0, 50.0] {
        let f_small = laplace_functional(
            |w| w[0] * w[0],
            |_| 1.0,
            &[(0.0, 1.0)],
            n,
            400,
        )?;
        let f_large = laplace_functional(
            |w| w[0] * w[0] + 0.3 * w[0] + 0.1,
            |w| 0.4 + 0.3 * w[0],
            &[(0.0, 1.0)],
            n,
            400,
        )?;
        mono_margin = mono_margin.min(f_large - f_small);
    }
    checks.push(PropCheck {
        name: "prop2_monotone",
        margin: mono_margin,
        pass: mono_margin >= -1e-10,
        detail: "min over n of F(S2, psi2) - F(S1, psi1)".to_string(),
    });

    // Additivity under separable integrands.
    let n = 40.0;
    let grid = 200;
    let f1 = laplace_functional(|w| w[0] * w[0], |_| 1.0, &[(0.0, 1.0)], n, grid)?;
    let f2 = laplace_functional(|w| 0.5 * w[0], |w| 1.0 + w[0], &[(0.0, 1.0)], n, grid)?;
    let joint = laplace_functional(
        |w| w[0] * w[0] + 0.5 * w[1],
        |w| 1.0 + w[1],
        &[(0.0, 1.0), (0.0, 1.0)],
        n,
        grid,
    )?;
    let add_margin = (joint - f1 - f2).abs();
    checks.push(PropCheck {
        name: "prop3_additive",
        margin: add_margin,
        pass: add_margin <= 1e-8,
        detail: format!("joint={joint} parts={}", f1 + f2),
    });

    // Exact decomposition of the coefficient bound, and BIC dominance,
    // over 500 random compatible shape pairs.
    let mut rng = crate::seeding::rng_for(seed, 999);
    let mut worst_decomp = 0.0f64;
    let mut worst_dominance = f64::INFINITY;
    for _ in 0..500 {
        let (t, l) = random_compatible_pair(&mut rng);
        let rep = theorem1_mu(&t, &l)?;
        worst_decomp = worst_decomp.max((rep.mu - (rep.lemma2 + rep.lemma3)).abs());
        worst_dominance = worst_dominance.min(rep.half_d - rep.mu);
    }
    checks.push(PropCheck {
        name: "mu_decomposition_exact",
        margin: worst_decomp,
        pass: worst_decomp == 0.0,
        detail: "max |mu - (lemma2 + lemma3)| over 500 shapes".to_string(),
    });
    checks.push(PropCheck {
        name: "mu_below_half_d",
        margin: worst_dominance,
        pass: worst_dominance >= 0.0,
        detail: "min (d/2 - mu) over 500 shapes".to_string(),
    });

    Ok(PropReport { checks })
}
