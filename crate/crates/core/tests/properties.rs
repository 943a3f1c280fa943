//! Cross-module invariants, partly property-based.

use proptest::prelude::*;

use singlearn::divergence::kl_full;
use singlearn::evidence::{log_evidence_exact, predictive_table, Prior};
use singlearn::experiment::random_compatible_pair;
use singlearn::model::{
    embed_truth, joint_prob, true_density, Dataset, NetworkSpec, ParamSet, TrueModel,
    NORMALIZATION_TOL,
};
use singlearn::seeding::rng_for;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Parameters for the K=1, T=2, Y=(2,3) shape.
fn params_2x23() -> impl Strategy<Value = ParamSet> {
    let spec = NetworkSpec::new(vec![2], vec![2, 3]).unwrap();
    (
        simplex(2),
        (simplex(2), simplex(3)),
        (simplex(2), simplex(3)),
    )
        .prop_map(move |(a, (b11, b12), (b21, b22))| {
            ParamSet::new(&spec, vec![a], vec![vec![b11, b12], vec![b21, b22]]).unwrap()
        })
}

proptest! {
    #[test]
    fn joint_prob_normalizes(params in params_2x23()) {
        let spec = NetworkSpec::new(vec![2], vec![2, 3]).unwrap();
        let total: f64 = spec
            .observation_vectors()
            .map(|x| joint_prob(&spec, &params, &x).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < NORMALIZATION_TOL);
    }

    #[test]
    fn joint_prob_is_affine_in_one_mixing_row(
        a0 in simplex(2),
        a1 in simplex(2),
        tables in (simplex(2), simplex(3), simplex(2), simplex(3)),
    ) {
        // Interpolate only the mixing row; the kernel tables stay fixed.
        let spec = NetworkSpec::new(vec![2], vec![2, 3]).unwrap();
        let (b11, b12, b21, b22) = tables;
        let build = |a: Vec<f64>| {
            ParamSet::new(
                &spec,
                vec![a],
                vec![vec![b11.clone(), b12.clone()], vec![b21.clone(), b22.clone()]],
            )
            .unwrap()
        };
        let mid: Vec<f64> = a0.iter().zip(&a1).map(|(x, y)| 0.5 * (x + y)).collect();
        let p0 = build(a0);
        let p1 = build(a1);
        let pm = build(mid);
        for x in spec.observation_vectors() {
            let v0 = joint_prob(&spec, &p0, &x).unwrap();
            let v1 = joint_prob(&spec, &p1, &x).unwrap();
            let vm = joint_prob(&spec, &pm, &x).unwrap();
            prop_assert!((vm - 0.5 * (v0 + v1)).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_prob_is_affine_in_one_kernel_table(
        a in simplex(2),
        b_var0 in simplex(3),
        b_var1 in simplex(3),
        rest in (simplex(2), simplex(2), simplex(3)),
    ) {
        let spec = NetworkSpec::new(vec![2], vec![2, 3]).unwrap();
        let (b11, b21, b22) = rest;
        let build = |b12: Vec<f64>| {
            ParamSet::new(
                &spec,
                vec![a.clone()],
                vec![vec![b11.clone(), b12], vec![b21.clone(), b22.clone()]],
            )
            .unwrap()
        };
        let mid: Vec<f64> = b_var0.iter().zip(&b_var1).map(|(x, y)| 0.5 * (x + y)).collect();
        let p0 = build(b_var0);
        let p1 = build(b_var1);
        let pm = build(mid);
        for x in spec.observation_vectors() {
            let v0 = joint_prob(&spec, &p0, &x).unwrap();
            let v1 = joint_prob(&spec, &p1, &x).unwrap();
            let vm = joint_prob(&spec, &pm, &x).unwrap();
            prop_assert!((vm - 0.5 * (v0 + v1)).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_full_nonnegative_and_zero_only_on_equal_tables(params in params_2x23()) {
        let spec = NetworkSpec::new(vec![2], vec![2, 3]).unwrap();
        let tspec = NetworkSpec::new(vec![1], vec![2, 3]).unwrap();
        let mut rng = rng_for(31, 7);
        let tparams = ParamSet::random(&tspec, &mut rng);
        let truth = TrueModel::new(tspec, tparams).unwrap();
        let kl = kl_full(&truth, &spec, &params).unwrap();
        prop_assert!(kl.nats() >= 0.0);
        if kl.nats() < 1e-10 {
            // zero divergence forces equal full probability tables
            for x in spec.observation_vectors() {
                let p = joint_prob(&spec, &params, &x).unwrap();
                let q = true_density(&truth, &x).unwrap();
                prop_assert!((p - q).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn log_evidence_is_row_order_invariant(perm in prop::sample::subsequence(&[0usize,1,2,3,4][..], 5)) {
        // Build a fixed 5-row dataset, then rotate by the sampled subsequence
        // to produce a permutation-ish reordering (drop + append keeps the
        // multiset; use the subsequence to pick the front segment).
        let spec = NetworkSpec::new(vec![2], vec![2, 2]).unwrap();
        let rows = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 1],
            vec![1, 1],
        ];
        let mut reordered: Vec<Vec<usize>> = perm.iter().map(|&i| rows[i].clone()).collect();
        for (i, row) in rows.iter().enumerate() {
            if !perm.contains(&i) {
                reordered.push(row.clone());
            }
        }
        let prior = Prior::uniform(&spec);
        let a = log_evidence_exact(&spec, &prior, &Dataset::new(rows, &spec).unwrap()).unwrap();
        let b = log_evidence_exact(&spec, &prior, &Dataset::new(reordered, &spec).unwrap()).unwrap();
        prop_assert_eq!(a.log_z0, b.log_z0);
    }
}

#[test]
fn embedding_reproduces_truth_on_100_random_pairs() {
    let mut rng = rng_for(2718, 0);
    for trial in 0..100 {
        let (truth, learner) = random_compatible_pair(&mut rng);
        let embedded = embed_truth(&truth, &learner).unwrap();
        for x in learner.observation_vectors() {
            let p = joint_prob(&learner, &embedded, &x).unwrap();
            let q = true_density(&truth, &x).unwrap();
            assert!(
                (p - q).abs() < 1e-12,
                "trial {trial}: p = {p}, q = {q} at {x:?}"
            );
        }
        let kl = kl_full(&truth, &learner, &embedded).unwrap();
        assert!(kl.nats() < 1e-12, "trial {trial}: kl = {}", kl.nats());
    }
}

#[test]
fn predictive_normalizes_on_20_random_instances() {
    let mut rng = rng_for(99, 9);
    for trial in 0..20 {
        let (truth, learner) = {
            // keep the observation space small so the exact evidence stays cheap
            let t = vec![2usize];
            let y = vec![2usize, 2];
            let tspec = NetworkSpec::new(vec![1], y.clone()).unwrap();
            let tparams = ParamSet::random(&tspec, &mut rng);
            (
                TrueModel::new(tspec, tparams).unwrap(),
                NetworkSpec::new(t, y).unwrap(),
            )
        };
        let n = 1 + trial % 4;
        let data = singlearn::model::sample_dataset(&truth, n, 1000 + trial as u64);
        let prior = Prior::constant(&learner, [0.5, 1.0, 2.0][trial % 3]).unwrap();
        let table = predictive_table(&learner, &prior, &data).unwrap();
        let total: f64 = table.iter().sum();
        assert!(
            (total - 1.0).abs() < 1e-10,
            "trial {trial}: predictive sums to {total}"
        );
    }
}
