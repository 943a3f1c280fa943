//! Model-selection experiments: consistency at large n, and the qualitative
//! comparison of the singular-coefficient penalty against BIC.
//!
//! Both runs use the exact evidence as the gold standard, at the largest
//! sample sizes where the allocation budget admits the three-state candidate.
//! (Plain prior-sampling Monte Carlo is systematically biased toward the
//! larger candidate at big n, so it cannot referee a selection experiment.)

use singlearn::evidence::{EmOptions, EvidenceMethod};
use singlearn::experiment::{run_select, SelectCandidate, SelectConfig};
use singlearn::model::{NetworkSpec, ParamSet, TrueModel};

/// A well-separated two-component mixture over two binary observables.
fn mixture_truth() -> TrueModel {
    let spec = NetworkSpec::new(vec![2], vec![2, 2]).unwrap();
    let params = ParamSet::new(
        &spec,
        vec![vec![0.4, 0.6]],
        vec![
            vec![vec![0.9, 0.1], vec![0.85, 0.15]],
            vec![vec![0.15, 0.85], vec![0.2, 0.8]],
        ],
    )
    .unwrap();
    TrueModel::new(spec, params).unwrap()
}

fn candidates() -> Vec<SelectCandidate> {
    vec![
        SelectCandidate {
            name: "matched".into(),
            spec: NetworkSpec::new(vec![2], vec![2, 2]).unwrap(),
        },
        SelectCandidate {
            name: "overparameterized".into(),
            spec: NetworkSpec::new(vec![3], vec![2, 2]).unwrap(),
        },
    ]
}

/// At n = 1024 the penalized criteria are consistent: the log-n penalty gap
/// dominates the bounded max-likelihood gap, so both pick the matched
/// candidate essentially always.
///
/// The exact-evidence gold column is not a consistency reference here: for
/// two binary observables a two-component mixture already saturates the
/// observation simplex, so the matched and overparameterized candidates have
/// equal learning coefficients and their Bayes factor stays O(1) for all n
/// (measured: a flat ~0.3-nat gap favoring the larger model). The evidence
/// column is still produced (via Monte Carlo at this scale) and reported.
#[test]
fn penalized_criteria_recover_the_matched_model_at_large_n() {
    let truth = mixture_truth();
    let replicates = 20;
    let cfg = SelectConfig {
        n: 1024,
        replicates,
        prior_alpha: 1.0,
        method: EvidenceMethod::Mc,
        mc_draws: 100_000,
        em: EmOptions {
            restarts: 10,
            tol: 1e-7,
            max_iter: 300,
        },
        seed: 88,
    };
    let result = run_select(&truth, &candidates(), &cfg).unwrap();
    let rate =
        |picks: &[usize]| picks.iter().filter(|&&p| p == 0).count() as f64 / replicates as f64;
    let bic = rate(&result.bic_picks);
    let singular = rate(&result.singular_picks);
    assert!(bic >= 0.95, "bic picked matched at rate {bic}");
    assert!(singular >= 0.95, "singular picked matched at rate {singular}");
    println!(
        "matched-candidate pick rates at n=1024: bic {bic}, singular {singular}, \
         mc-evidence {}",
        rate(&result.gold_picks)
    );
}

#[test]
fn singular_penalty_tracks_gold_at_least_as_well_as_bic() {
    // The comparison direction is asserted only when the gap is significant
    // at 3 sigma; a statistical tie passes.
    let truth = mixture_truth();
    let replicates = 200;
    let cfg = SelectConfig {
        n: 32,
        replicates,
        prior_alpha: 1.0,
        method: EvidenceMethod::Exact,
        mc_draws: 0,
        em: EmOptions {
            restarts: 10,
            tol: 1e-7,
            max_iter: 300,
        },
        seed: 77,
    };
    let result = run_select(&truth, &candidates(), &cfg).unwrap();
    let p_sing = result.singular_agreement;
    let p_bic = result.bic_agreement;
    let r = replicates as f64;
    let sigma = ((p_sing * (1.0 - p_sing) + p_bic * (1.0 - p_bic)) / r)
        .sqrt()
        .max(1.0 / r);
    assert!(
        p_sing - p_bic >= -3.0 * sigma,
        "BIC agreement {p_bic} significantly beats singular agreement {p_sing} \
         (3 sigma = {})",
        3.0 * sigma
    );
    println!(
        "agreement with exact-evidence gold: singular {p_sing}, bic {p_bic} \
         (3 sigma band {:.3})",
        3.0 * sigma
    );
}
