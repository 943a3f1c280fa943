//! Independent oracles for the evidence pipeline.
//!
//! The brute-force reference enumerates raw latent assignments (every cell
//! choice per row) and multiplies Dirichlet-multinomial weights computed as
//! plain rising-factorial products in normal space: no pattern grouping, no
//! log-gamma tables, no multinomial coefficients. It shares nothing with the
//! production enumerator except the model definition.

use singlearn::evidence::{log_evidence_exact, log_evidence_mc, Prior};
use singlearn::model::{sample_dataset, Dataset, NetworkSpec, ParamSet, TrueModel};
use singlearn::numeric::mean_and_stderr;
use singlearn::seeding::rng_for;
use rand::Rng;

/// DirMult(alpha; counts) = B(alpha + counts) / B(alpha) via rising factorials.
fn dirichlet_multinomial(alphas: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let alpha0: f64 = alphas.iter().sum();
    let mut denom = 1.0;
    for i in 0..total {
        denom *= alpha0 + i as f64;
    }
    let mut numer = 1.0;
    for (&a, &c) in alphas.iter().zip(counts) {
        for i in 0..c {
            numer *= a + i as f64;
        }
    }
    numer / denom
}

/// Z0 by summation over all cells^n latent assignments.
fn brute_force_z0(spec: &NetworkSpec, prior: &Prior, data: &Dataset) -> f64 {
    let n = data.len();
    let cells = spec.num_cells();
    if n == 0 {
        return 1.0;
    }
    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    loop {
        // per-node state counts
        let mut weight = 1.0;
        for k in 0..spec.num_hidden() {
            let mut counts = vec![0usize; spec.hidden_states()[k]];
            for &z in &assignment {
                counts[spec.cell_state(z, k)] += 1;
            }
            weight *= dirichlet_multinomial(&prior.alpha_mixing()[k], &counts);
        }
        // per (cell, observable) value counts
        for c in 0..cells {
            for j in 0..spec.num_observed() {
                let mut counts = vec![0usize; spec.observed_states()[j]];
                for (i, &z) in assignment.iter().enumerate() {
                    if z == c {
                        counts[data.rows()[i][j]] += 1;
                    }
                }
                weight *= dirichlet_multinomial(&prior.alpha_tables()[c][j], &counts);
            }
        }
        total += weight;
        // odometer over assignments
        let mut i = 0;
        loop {
            if i == n {
                return total;
            }
            assignment[i] += 1;
            if assignment[i] < cells {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn brute_force_reproduces_the_hand_derived_two_sample_value() {
    let spec = NetworkSpec::new(vec![2], vec![2]).unwrap();
    let prior = Prior::uniform(&spec);
    let data = Dataset::new(vec![vec![0], vec![0]], &spec).unwrap();
    let z0 = brute_force_z0(&spec, &prior, &data);
    assert!((z0 - 11.0 / 36.0).abs() < 1e-15, "brute force {z0}");
}

#[test]
fn exact_matches_brute_force_on_random_instances() {
    let mut rng = rng_for(314, 0);
    let shapes = [
        (vec![2usize], vec![2usize]),
        (vec![2], vec![2, 3]),
        (vec![3], vec![2]),
        (vec![2, 2], vec![2]),
        (vec![2, 2], vec![3, 2]),
    ];
    for trial in 0..40 {
        let (t, y) = &shapes[trial % shapes.len()];
        let spec = NetworkSpec::new(t.clone(), y.clone()).unwrap();
        let alpha = [0.5, 1.0, 2.25][trial % 3];
        let prior = Prior::constant(&spec, alpha).unwrap();
        let n = rng.random_range(0..=6usize);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                spec.observed_states()
                    .iter()
                    .map(|&yj| rng.random_range(0..yj))
                    .collect()
            })
            .collect();
        let data = Dataset::new(rows, &spec).unwrap();
        let reference = brute_force_z0(&spec, &prior, &data).ln();
        let fast = log_evidence_exact(&spec, &prior, &data).unwrap();
        assert!(
            (fast.log_z0 - reference).abs() < 1e-10,
            "trial {trial}: pattern enumerator {} vs brute force {reference}",
            fast.log_z0
        );
    }
}

#[test]
fn mc_estimator_brackets_brute_force() {
    let spec = NetworkSpec::new(vec![2], vec![2, 2]).unwrap();
    let prior = Prior::uniform(&spec);
    let data = Dataset::new(vec![vec![0, 1], vec![1, 1], vec![0, 0], vec![0, 1]], &spec).unwrap();
    let reference = brute_force_z0(&spec, &prior, &data).ln();
    let mc = log_evidence_mc(&spec, &prior, &data, 400_000, 2718).unwrap();
    assert!(
        (mc.log_z0 - reference).abs() < 3.0 * mc.stderr,
        "mc {} vs brute force {reference} (stderr {})",
        mc.log_z0,
        mc.stderr
    );
}

/// The learner-relative stochastic complexity computed by the evidence
/// pipeline must agree with a direct Monte-Carlo evaluation of
/// `-log ∫ exp(-n · empirical_kl(w)) dφ(w)`, which goes through the
/// divergence module instead of the allocation enumerator.
#[test]
fn stochastic_complexity_agrees_with_empirical_kl_route() {
    use singlearn::divergence::empirical_kl;
    use singlearn::evidence::stochastic_complexity;

    let spec = NetworkSpec::new(vec![2], vec![2]).unwrap();
    let tspec = NetworkSpec::new(vec![1], vec![2]).unwrap();
    let tparams =
        ParamSet::new(&tspec, vec![vec![1.0]], vec![vec![vec![0.6, 0.4]]]).unwrap();
    let truth = TrueModel::new(tspec, tparams).unwrap();
    let prior = Prior::uniform(&spec);
    let data = sample_dataset(&truth, 10, 99);
    let n = data.len() as f64;

    let exact = log_evidence_exact(&spec, &prior, &data).unwrap();
    let f_exact = stochastic_complexity(exact, &truth, &data).unwrap().f;

    let draws = 200_000usize;
    let mut rng = rng_for(55, 0);
    let mut weights = Vec::with_capacity(draws);
    for _ in 0..draws {
        let w = ParamSet::random(&spec, &mut rng);
        let h_n = empirical_kl(&truth, &spec, &w, &data).unwrap();
        weights.push((-n * h_n).exp());
    }
    let est = mean_and_stderr(&weights);
    let f_mc = -est.mean.ln();
    let stderr_log = est.stderr / est.mean;
    assert!(
        (f_mc - f_exact).abs() < 3.0 * stderr_log,
        "empirical-KL route {f_mc} vs exact {f_exact} (stderr {stderr_log})"
    );
}
