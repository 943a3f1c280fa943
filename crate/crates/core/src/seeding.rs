//! Deterministic seed derivation and shared sampling primitives.
//!
//! Every randomized operation takes an explicit master seed. Replicate or
//! draw-block `i` runs on an rng seeded with `child_seed(master, i)`, so
//! results never depend on execution order or worker count, and the same
//! master seed reproduces the same replicate datasets everywhere it is used
//! (this is what gives the common-random-number pairing between the two
//! generalization-error routes).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable child seed for stream `stream` under `master` (SplitMix64 mix).
pub fn child_seed(master: u64, stream: u64) -> u64 {
    mix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Portable, reproducible rng for one (master, stream) pair.
pub fn rng_for(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, stream))
}

/// Draw an index from an explicit probability vector by inverse CDF.
///
/// The vector need not be exactly normalized; the draw uses its actual sum.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    debug_assert!(!probs.is_empty());
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    probs.len() - 1
}

/// Dirichlet sampler with the gamma distributions prepared once.
pub struct DirichletSampler {
    gammas: Vec<Gamma<f64>>,
}

impl DirichletSampler {
    /// All concentrations must be positive.
    pub fn new(alphas: &[f64]) -> Self {
        let gammas = alphas
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("Dirichlet concentration must be positive"))
            .collect();
        DirichletSampler { gammas }
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Fill `out` with one draw. `out.len()` must equal `self.len()`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.gammas.len());
        let mut sum = 0.0;
        for (o, g) in out.iter_mut().zip(&self.gammas) {
            let v = g.sample(rng);
            *o = v;
            sum += v;
        }
        if sum <= 0.0 {
            // Gamma underflow with tiny concentrations; fall back to uniform.
            let u = 1.0 / out.len() as f64;
            out.fill(u);
        } else {
            for o in out.iter_mut() {
                *o /= sum;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.gammas.len()];
        self.sample_into(rng, &mut out);
        out
    }
}
