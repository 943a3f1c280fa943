//! Exact Kullback informations between truth and learner over the finite
//! observation space, per-cell divergences, and near-truth sampling.

use crate::error::{Error, Result};
use crate::model::{joint_prob, true_density, Dataset, NetworkSpec, ParamSet, TrueModel};
use crate::seeding::rng_for;
use rand::Rng;

/// A Kullback information in nats. Values within `1e-12` below zero are
/// clamped to zero; a genuinely impossible support mismatch is reported as
/// the distinguished infinite value rather than saturated away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLValue {
    nats: f64,
}

impl KLValue {
    pub const INFINITE: KLValue = KLValue { nats: f64::INFINITY };

    pub fn from_nats(raw: f64) -> Self {
        let nats = if raw < 0.0 && raw > -1e-12 { 0.0 } else { raw };
        KLValue { nats }
    }

    pub fn nats(&self) -> f64 {
        self.nats
    }

    pub fn is_infinite(&self) -> bool {
        self.nats.is_infinite()
    }
}

/// Categorical KL with the 0·log(0/·) = 0 convention; infinite on support
/// mismatch (q > 0 where p = 0).
fn categorical_kl(q: &[f64], p: &[f64]) -> KLValue {
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= 0.0 {
            continue;
        }
        if pi <= 0.0 {
            return KLValue::INFINITE;
        }
        acc += qi * (qi / pi).ln();
    }
    KLValue::from_nats(acc)
}

/// Kullback information from the truth to the parameterized learner,
/// summed over the full observation space.
pub fn kl_full(truth: &TrueModel, spec: &NetworkSpec, params: &ParamSet) -> Result<KLValue> {
    if truth.spec().observed_states() != spec.observed_states() {
        return Err(Error::invalid(
            "truth and learner disagree on observable node shapes",
        ));
    }
    let mut acc = 0.0;
    for x in spec.observation_vectors() {
        let q = true_density(truth, &x)?;
        if q <= 0.0 {
            continue;
        }
        let p = joint_prob(spec, params, &x)?;
        if p <= 0.0 {
            return Ok(KLValue::INFINITE);
        }
        acc += q * (q / p).ln();
    }
    Ok(KLValue::from_nats(acc))
}

/// Empirical Kullback information `(1/n) Σ log(q(X_i)/p(X_i|w))`.
///
/// Unlike [`kl_full`] this may be negative for finite samples; it is
/// `+inf` when some observed row has zero probability under the learner.
pub fn empirical_kl(
    truth: &TrueModel,
    spec: &NetworkSpec,
    params: &ParamSet,
    data: &Dataset,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empirical KL needs at least one observation"));
    }
    let mut acc = 0.0;
    for row in data.rows() {
        let q = true_density(truth, row)?;
        if q <= 0.0 {
            return Err(Error::invalid(
                "dataset contains a row that is impossible under the truth",
            ));
        }
        let p = joint_prob(spec, params, row)?;
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += (q / p).ln();
    }
    Ok(acc / data.len() as f64)
}

/// Per-cell Kullback information between one true cell's kernel and one
/// learner cell's kernel. The product kernel factorizes, so this is the sum
/// over observable nodes of categorical KLs.
pub fn cell_kl(
    truth: &TrueModel,
    true_cell: usize,
    params: &ParamSet,
    learner_cell: usize,
) -> Result<KLValue> {
    let true_tables = truth
        .params()
        .tables()
        .get(true_cell)
        .ok_or_else(|| Error::invalid(format!("true cell index {true_cell} out of range")))?;
    let learner_tables = params
        .tables()
        .get(learner_cell)
        .ok_or_else(|| Error::invalid(format!("learner cell index {learner_cell} out of range")))?;
    if true_tables.len() != learner_tables.len() {
        return Err(Error::invalid("cell tables have different observable counts"));
    }
    let mut acc = 0.0;
    for (q, p) in true_tables.iter().zip(learner_tables) {
        if q.len() != p.len() {
            return Err(Error::invalid("cell tables have different state counts"));
        }
        let term = categorical_kl(q, p);
        if term.is_infinite() {
            return Ok(KLValue::INFINITE);
        }
        acc += term.nats();
    }
    Ok(KLValue::from_nats(acc))
}

const NEAR_TRUTH_MAX_ATTEMPTS: usize = 1000;

/// Draw a valid parameter point near the embedded truth.
///
/// Truth-aligned coordinates are perturbed uniformly within `±eps`, extra
/// mixing weights are drawn from `[0, eps]`, and non-aligned cells are
/// perturbed around the first true cell's tables. Each simplex vector is
/// renormalized; draws whose free coordinates leave the doubled box are
/// rejected and resampled, with an error after 1000 rejections.
pub fn sample_near_truth(
    truth: &TrueModel,
    spec: &NetworkSpec,
    eps: f64,
    seed: u64,
) -> Result<ParamSet> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid("eps must be positive"));
    }
    truth.check_embeddable(spec)?;
    let h = truth.num_hidden();
    let s_counts = truth.hidden_states();
    let mut rng = rng_for(seed, 0);

    for _attempt in 0..NEAR_TRUTH_MAX_ATTEMPTS {
        let mut mixing = Vec::with_capacity(spec.num_hidden());
        for (k, &t) in spec.hidden_states().iter().enumerate() {
            let mut row = vec![0.0; t];
            for (i, slot) in row.iter_mut().enumerate() {
                let center = if k < h {
                    if i < s_counts[k] {
                        truth.params().mixing()[k][i]
                    } else {
                        0.0
                    }
                } else if i == 0 {
                    1.0
                } else {
                    0.0
                };
                *slot = perturb(&mut rng, center, eps);
            }
            normalize(&mut row);
            mixing.push(row);
        }
        let mut tables = Vec::with_capacity(spec.num_cells());
        for c in 0..spec.num_cells() {
            let source = crate::model::aligned_truth_cell(truth, spec, c).unwrap_or(0);
            let cell_tables = truth.params().tables()[source]
                .iter()
                .map(|centers| {
                    let mut v: Vec<f64> = centers
                        .iter()
                        .map(|&center| perturb(&mut rng, center, eps))
                        .collect();
                    normalize(&mut v);
                    v
                })
                .collect();
            tables.push(cell_tables);
        }
        // a degenerate draw (a row clamped to all zeros) counts as a rejection
        let Ok(candidate) = ParamSet::new(spec, mixing, tables) else {
            continue;
        };
        if in_near_truth_box(truth, spec, &candidate, 2.0 * eps) {
            return Ok(candidate);
        }
    }
    Err(Error::invalid(format!(
        "eps = {eps} is too large: no renormalized draw stayed in the doubled box after \
         {NEAR_TRUTH_MAX_ATTEMPTS} attempts"
    )))
}

/// Coordinates with center 0 are drawn from [0, eps]; others from center ± eps,
/// clamped at 0.
fn perturb<R: Rng + ?Sized>(rng: &mut R, center: f64, eps: f64) -> f64 {
    if center == 0.0 {
        rng.random::<f64>() * eps
    } else {
        (center + (rng.random::<f64>() * 2.0 - 1.0) * eps).max(0.0)
    }
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        for x in v.iter_mut() {
            *x /= sum;
        }
    }
}

/// Membership test on the free coordinates (all but the first of each
/// simplex vector), mirroring the box that defines the near-truth region.
fn in_near_truth_box(truth: &TrueModel, spec: &NetworkSpec, params: &ParamSet, eps: f64) -> bool {
    let h = truth.num_hidden();
    let s_counts = truth.hidden_states();
    for (k, row) in params.mixing().iter().enumerate() {
        for (i, &v) in row.iter().enumerate().skip(1) {
            let center = if k < h && i < s_counts[k] {
                truth.params().mixing()[k][i]
            } else {
                0.0
            };
            if (v - center).abs() > eps {
                return false;
            }
        }
    }
    for (c, cell_tables) in params.tables().iter().enumerate() {
        let source = crate::model::aligned_truth_cell(truth, spec, c).unwrap_or(0);
        for (tab, centers) in cell_tables.iter().zip(&truth.params().tables()[source]) {
            for (&v, &center) in tab.iter().zip(centers).skip(1) {
                if (v - center).abs() > eps {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_truth, sample_dataset, NetworkSpec, ParamSet, TrueModel};

    fn section1_learner() -> NetworkSpec {
        NetworkSpec::new(vec![2], vec![2]).unwrap()
    }

    fn bernoulli_truth(p: f64) -> TrueModel {
        let spec = NetworkSpec::new(vec![1], vec![2]).unwrap();
        let params = ParamSet::new(&spec, vec![vec![1.0]], vec![vec![vec![p, 1.0 - p]]]).unwrap();
        TrueModel::new(spec, params).unwrap()
    }

    fn section1_params(a: f64, b1: f64, b2: f64) -> ParamSet {
        ParamSet::new(
            &section1_learner(),
            vec![vec![a, 1.0 - a]],
            vec![vec![vec![b1, 1.0 - b1]], vec![vec![b2, 1.0 - b2]]],
        )
        .unwrap()
    }

    #[test]
    fn kl_full_is_zero_at_embedded_truth() {
        let truth = bernoulli_truth(0.3);
        let spec = section1_learner();
        let params = embed_truth(&truth, &spec).unwrap();
        let kl = kl_full(&truth, &spec, &params).unwrap();
        assert!(kl.nats() >= 0.0);
        assert!(kl.nats() < 1e-12);
    }

    #[test]
    fn kl_full_hand_value() {
        // q = Bernoulli(0.5) vs p = Bernoulli(0.25):
        // 0.5 ln 2 + 0.5 ln(2/3)
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let params = section1_params(1.0, 0.25, 0.5);
        let expected = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        let kl = kl_full(&truth, &spec, &params).unwrap();
        assert!((kl.nats() - expected).abs() < 1e-12);
        assert!((expected - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn kl_full_zero_on_all_three_singular_families() {
        // For the one-binary-observable learner the true-parameter set is
        // {a=1, b1=b*} u {a=0, b2=b*} u {b1=b2=b*}.
        let b_star = 0.3;
        let truth = bernoulli_truth(b_star);
        let spec = section1_learner();
        for i in 0..10 {
            let free = i as f64 / 9.0;
            for params in [
                section1_params(1.0, b_star, free),
                section1_params(0.0, free, b_star),
                section1_params(free, b_star, b_star),
            ] {
                let kl = kl_full(&truth, &spec, &params).unwrap();
                assert!(kl.nats() < 1e-12, "family point with free={free}: {}", kl.nats());
            }
        }
    }

    #[test]
    fn kl_full_infinite_on_support_mismatch() {
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let params = section1_params(1.0, 0.0, 0.0);
        assert!(kl_full(&truth, &spec, &params).unwrap().is_infinite());
    }

    #[test]
    fn empirical_kl_zero_at_truth_and_single_term() {
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let embedded = embed_truth(&truth, &spec).unwrap();
        let data = sample_dataset(&truth, 25, 3);
        assert_eq!(empirical_kl(&truth, &spec, &embedded, &data).unwrap(), 0.0);

        // Single observation with q = 0.5 and p = 0.25 at the observed point.
        let one = Dataset::new(vec![vec![0]], &spec).unwrap();
        let params = section1_params(1.0, 0.25, 0.25);
        let v = empirical_kl(&truth, &spec, &params, &one).unwrap();
        assert!((v - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn empirical_kl_infinite_when_learner_excludes_a_row() {
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let params = section1_params(1.0, 1.0, 1.0); // state 2 impossible
        let data = Dataset::new(vec![vec![0], vec![1]], &spec).unwrap();
        let v = empirical_kl(&truth, &spec, &params, &data).unwrap();
        assert!(v.is_infinite() && v > 0.0);
    }

    #[test]
    fn empirical_kl_rejects_empty_data() {
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let embedded = embed_truth(&truth, &spec).unwrap();
        assert!(empirical_kl(&truth, &spec, &embedded, &Dataset::empty()).is_err());
    }

    #[test]
    fn empirical_kl_concentrates_on_kl_full() {
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let params = section1_params(0.5, 0.25, 0.25);
        let target = kl_full(&truth, &spec, &params).unwrap().nats();
        let replicates = 200;
        let n = 100;
        let mut values = Vec::with_capacity(replicates);
        for r in 0..replicates {
            let data = sample_dataset(&truth, n, crate::seeding::child_seed(77, r as u64));
            values.push(empirical_kl(&truth, &spec, &params, &data).unwrap());
        }
        let est = crate::numeric::mean_and_stderr(&values);
        assert!(
            (est.mean - target).abs() < 4.0 * est.stderr,
            "mean {} vs target {} (stderr {})",
            est.mean,
            target,
            est.stderr
        );
    }

    #[test]
    fn cell_kl_zero_and_additivity() {
        let tspec = NetworkSpec::new(vec![1], vec![2, 2]).unwrap();
        let tparams = ParamSet::new(
            &tspec,
            vec![vec![1.0]],
            vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
        )
        .unwrap();
        let truth = TrueModel::new(tspec, tparams).unwrap();

        let lspec = NetworkSpec::new(vec![2], vec![2, 2]).unwrap();
        let same = embed_truth(&truth, &lspec).unwrap();
        assert_eq!(cell_kl(&truth, 0, &same, 0).unwrap().nats(), 0.0);

        // learner cell with (0.25, 0.75) on both nodes: twice the single-node KL
        let params = ParamSet::new(
            &lspec,
            vec![vec![0.5, 0.5]],
            vec![
                vec![vec![0.25, 0.75], vec![0.25, 0.75]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            ],
        )
        .unwrap();
        let single = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        let v = cell_kl(&truth, 0, &params, 0).unwrap().nats();
        assert!((v - 2.0 * single).abs() < 1e-12);
        assert!((v - 0.28768).abs() < 1e-4);
    }

    #[test]
    fn cell_kl_single_node_matches_kl_full_of_components() {
        // With one observable node, the cell KL of (true cell 1, learner cell c)
        // coincides with the full KL between the component distributions.
        let truth = bernoulli_truth(0.5);
        let spec = section1_learner();
        let params = section1_params(1.0, 0.25, 0.5);
        let via_cells = cell_kl(&truth, 0, &params, 0).unwrap().nats();
        let direct = kl_full(&truth, &spec, &params).unwrap().nats();
        assert!((via_cells - direct).abs() < 1e-12);
    }

    #[test]
    fn cell_kl_checks_indices() {
        let truth = bernoulli_truth(0.5);
        let params = section1_params(0.5, 0.2, 0.8);
        assert!(cell_kl(&truth, 1, &params, 0).is_err());
        assert!(cell_kl(&truth, 0, &params, 2).is_err());
    }

    #[test]
    fn near_truth_sampler_is_deterministic_and_in_box() {
        let truth = bernoulli_truth(0.4);
        let spec = section1_learner();
        let a = sample_near_truth(&truth, &spec, 0.05, 11).unwrap();
        let b = sample_near_truth(&truth, &spec, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert!(in_near_truth_box(&truth, &spec, &a, 0.1));
    }

    #[test]
    fn near_truth_sampler_tiny_eps_recovers_embedding() {
        let truth = bernoulli_truth(0.4);
        let spec = section1_learner();
        let embedded = embed_truth(&truth, &spec).unwrap();
        let sampled = sample_near_truth(&truth, &spec, 1e-12, 5).unwrap();
        for (row, erow) in sampled.mixing().iter().zip(embedded.mixing()) {
            for (v, e) in row.iter().zip(erow) {
                assert!((v - e).abs() < 1e-9);
            }
        }
        let kl = kl_full(&truth, &spec, &sampled).unwrap();
        assert!(kl.nats() < 1e-9);
    }

    #[test]
    fn near_truth_sampler_covers_extra_hidden_nodes() {
        // K > H: the second learner node is centered on a point mass.
        let tspec = NetworkSpec::new(vec![2], vec![2]).unwrap();
        let tparams = ParamSet::new(
            &tspec,
            vec![vec![0.3, 0.7]],
            vec![vec![vec![0.9, 0.1]], vec![vec![0.2, 0.8]]],
        )
        .unwrap();
        let truth = TrueModel::new(tspec, tparams).unwrap();
        let spec = NetworkSpec::new(vec![3, 2], vec![2]).unwrap();
        let params = sample_near_truth(&truth, &spec, 0.02, 21).unwrap();
        assert!(in_near_truth_box(&truth, &spec, &params, 0.04));
        assert!(params.mixing()[1][0] > 0.9, "extra node stays near state 1");
        assert!(params.mixing()[0][2] <= 0.04, "extra state weight stays small");
    }

    #[test]
    fn near_truth_sampler_errors_when_renormalization_escapes_the_box() {
        // A concentrated free coordinate plus dozens of extra states: the
        // U[0, eps] extras inflate the row sum by ~1.9, so renormalization
        // drags every draw's free coordinate out of the doubled box.
        let tspec = NetworkSpec::new(vec![2], vec![2]).unwrap();
        let tparams = ParamSet::new(
            &tspec,
            vec![vec![0.05, 0.95]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
        )
        .unwrap();
        let truth = TrueModel::new(tspec, tparams).unwrap();
        let spec = NetworkSpec::new(vec![40], vec![2]).unwrap();
        let err = sample_near_truth(&truth, &spec, 0.1, 3);
        assert!(err.is_err(), "expected rejection exhaustion, got {err:?}");
    }

    #[test]
    fn near_truth_kl_shrinks_with_eps() {
        let truth = bernoulli_truth(0.4);
        let spec = section1_learner();
        let mean_kl = |eps: f64| -> f64 {
            let mut acc = 0.0;
            for draw in 0..100u64 {
                let params = sample_near_truth(&truth, &spec, eps, 1000 + draw).unwrap();
                acc += kl_full(&truth, &spec, &params).unwrap().nats();
            }
            acc / 100.0
        };
        let coarse = mean_kl(0.1);
        let mid = mean_kl(0.01);
        let fine = mean_kl(0.001);
        assert!(coarse > mid, "coarse {coarse} vs mid {mid}");
        assert!(mid > fine, "mid {mid} vs fine {fine}");
        assert!(fine < 1e-4);
    }
}
