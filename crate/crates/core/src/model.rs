//! Network shapes, parameter sets, the true-model embedding, exact densities,
//! sampling, and parameter counts.
//!
//! A model has `K` mutually independent hidden categorical nodes (node `k`
//! with `T[k]` states) and `M` observable categorical nodes (node `j` with
//! `Y[j]` states). A joint hidden *cell* is one assignment of states to all
//! hidden nodes; each cell carries one conditional table per observable node.
//!
//! Conventions fixed here and relied on by the file formats and tests:
//! - Cells are ordered lexicographically with the **last** hidden index
//!   varying fastest.
//! - States are stored 0-based in memory; the text formats are 1-based.
//! - Probability vectors are stored in full (no dropped first coordinate)
//!   and must sum to 1 within [`SIMPLEX_TOL`].

use crate::error::{Error, Result};
use crate::seeding::{rng_for, sample_categorical, DirichletSampler};
use rand::Rng;

/// Tolerance for each stored probability vector summing to 1.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Tolerance for joint distributions summing to 1 over the observation space.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// One constraint violated by a proposed learner shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecViolation {
    NoHiddenNodes,
    NoObservedNodes,
    /// Hidden node (1-based) with fewer than 2 states.
    HiddenStates { node: usize, count: usize },
    /// Observable node (1-based) with fewer than 2 states.
    ObservedStates { node: usize, count: usize },
    CellCountOverflow,
    ObservationSpaceOverflow,
}

impl std::fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpecViolation::NoHiddenNodes => write!(f, "K must be >= 1"),
            SpecViolation::NoObservedNodes => write!(f, "M must be >= 1"),
            SpecViolation::HiddenStates { node, count } => {
                write!(f, "T[{node}] = {count} < 2")
            }
            SpecViolation::ObservedStates { node, count } => {
                write!(f, "Y[{node}] = {count} < 2")
            }
            SpecViolation::CellCountOverflow => write!(f, "joint hidden cell count overflows"),
            SpecViolation::ObservationSpaceOverflow => {
                write!(f, "observation space size overflows")
            }
        }
    }
}

/// Check the learner-shape constraints; an empty report means valid.
pub fn validate_spec(hidden: &[usize], observed: &[usize]) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    if hidden.is_empty() {
        out.push(SpecViolation::NoHiddenNodes);
    }
    if observed.is_empty() {
        out.push(SpecViolation::NoObservedNodes);
    }
    for (k, &t) in hidden.iter().enumerate() {
        if t < 2 {
            out.push(SpecViolation::HiddenStates {
                node: k + 1,
                count: t,
            });
        }
    }
    for (j, &y) in observed.iter().enumerate() {
        if y < 2 {
            out.push(SpecViolation::ObservedStates {
                node: j + 1,
                count: y,
            });
        }
    }
    if checked_product(hidden).is_none() {
        out.push(SpecViolation::CellCountOverflow);
    }
    if checked_product(observed).is_none() {
        out.push(SpecViolation::ObservationSpaceOverflow);
    }
    out
}

fn checked_product(counts: &[usize]) -> Option<usize> {
    counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c))
}

/// Shape of a model: hidden-state counts `T` and observable-state counts `Y`.
///
/// Construction requires every count to be at least 1 and the cell count,
/// the observation-space size, and the parameter count to be representable.
/// True models may have single-state hidden nodes; the stricter `>= 2`
/// learner rule is checked by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    hidden: Vec<usize>,
    observed: Vec<usize>,
    /// stride[k] = product of hidden state counts after node k (last fastest).
    strides: Vec<usize>,
    cells: usize,
    observations: usize,
}

impl NetworkSpec {
    pub fn new(hidden: Vec<usize>, observed: Vec<usize>) -> Result<Self> {
        if hidden.is_empty() || observed.is_empty() {
            return Err(Error::invalid("a model needs K >= 1 and M >= 1 nodes"));
        }
        if let Some(&t) = hidden.iter().find(|&&t| t < 1) {
            return Err(Error::invalid(format!("hidden state count {t} < 1")));
        }
        if let Some(&y) = observed.iter().find(|&&y| y < 1) {
            return Err(Error::invalid(format!("observable state count {y} < 1")));
        }
        let cells = checked_product(&hidden)
            .ok_or_else(|| Error::invalid("joint hidden cell count overflows"))?;
        let observations = checked_product(&observed)
            .ok_or_else(|| Error::invalid("observation space size overflows"))?;
        let obs_free: usize = observed.iter().map(|&y| y - 1).sum();
        let hidden_free: usize = hidden.iter().map(|&t| t - 1).sum();
        obs_free
            .checked_mul(cells)
            .and_then(|x| x.checked_add(hidden_free))
            .ok_or_else(|| Error::invalid("parameter count overflows"))?;
        let mut strides = vec![1usize; hidden.len()];
        for k in (0..hidden.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * hidden[k + 1];
        }
        Ok(NetworkSpec {
            hidden,
            observed,
            strides,
            cells,
            observations,
        })
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn num_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn hidden_states(&self) -> &[usize] {
        &self.hidden
    }

    pub fn observed_states(&self) -> &[usize] {
        &self.observed
    }

    /// Number of joint hidden cells `C = Π T[k]`.
    pub fn num_cells(&self) -> usize {
        self.cells
    }

    /// Size of the observation space `Π Y[j]`.
    pub fn num_observations(&self) -> usize {
        self.observations
    }

    /// State (0-based) of hidden node `k` inside cell `cell`.
    #[inline]
    pub fn cell_state(&self, cell: usize, k: usize) -> usize {
        (cell / self.strides[k]) % self.hidden[k]
    }

    /// Decode a cell index into per-node states (0-based).
    pub fn cell_states(&self, cell: usize) -> Vec<usize> {
        (0..self.hidden.len())
            .map(|k| self.cell_state(cell, k))
            .collect()
    }

    /// Encode per-node states (0-based) into the cell index.
    pub fn cell_index(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.hidden.len());
        states
            .iter()
            .zip(&self.strides)
            .map(|(&s, &stride)| s * stride)
            .sum()
    }

    /// Free-parameter count: `Σ (T[k]-1) + (Σ (Y[j]-1)) · Π T[k]`.
    pub fn dimension(&self) -> usize {
        let hidden_free: usize = self.hidden.iter().map(|&t| t - 1).sum();
        let obs_free: usize = self.observed.iter().map(|&y| y - 1).sum();
        hidden_free + obs_free * self.cells
    }

    /// Iterate all observation vectors (0-based, last node fastest).
    pub fn observation_vectors(&self) -> ObservationIter<'_> {
        ObservationIter {
            shape: &self.observed,
            next: Some(vec![0; self.observed.len()]),
        }
    }

    /// Check that an observation vector is within range.
    pub fn check_observation(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.observed.len() {
            return Err(Error::invalid(format!(
                "observation has {} entries, expected {}",
                x.len(),
                self.observed.len()
            )));
        }
        for (j, (&v, &y)) in x.iter().zip(&self.observed).enumerate() {
            if v >= y {
                return Err(Error::invalid(format!(
                    "observation state {} out of range for node {} (Y={})",
                    v + 1,
                    j + 1,
                    y
                )));
            }
        }
        Ok(())
    }
}

/// Iterator over all observation vectors of a shape.
pub struct ObservationIter<'a> {
    shape: &'a [usize],
    next: Option<Vec<usize>>,
}

impl Iterator for ObservationIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut j = self.shape.len();
        loop {
            if j == 0 {
                self.next = None;
                break;
            }
            j -= 1;
            succ[j] += 1;
            if succ[j] < self.shape[j] {
                self.next = Some(succ);
                break;
            }
            succ[j] = 0;
        }
        Some(current)
    }
}

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what}: empty probability vector")));
    }
    let mut sum = 0.0;
    for &p in v {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid(format!("{what}: entry {p} not in [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("{what}: entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Full parameter set for a shape: mixing weights per hidden node and one
/// conditional table per (cell, observable node).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    /// `mixing[k][t]`: probability of state `t` at hidden node `k`.
    mixing: Vec<Vec<f64>>,
    /// `tables[c][j][l]`: probability of state `l` at observable `j` given cell `c`.
    tables: Vec<Vec<Vec<f64>>>,
}

impl ParamSet {
    pub fn new(spec: &NetworkSpec, mixing: Vec<Vec<f64>>, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if mixing.len() != spec.num_hidden() {
            return Err(Error::invalid(format!(
                "{} mixing rows for {} hidden nodes",
                mixing.len(),
                spec.num_hidden()
            )));
        }
        for (k, row) in mixing.iter().enumerate() {
            if row.len() != spec.hidden_states()[k] {
                return Err(Error::invalid(format!(
                    "mixing row {} has {} entries, expected {}",
                    k + 1,
                    row.len(),
                    spec.hidden_states()[k]
                )));
            }
            check_simplex(row, &format!("mixing row {}", k + 1))?;
        }
        if tables.len() != spec.num_cells() {
            return Err(Error::invalid(format!(
                "{} cells in tables, expected {}",
                tables.len(),
                spec.num_cells()
            )));
        }
        for (c, cell) in tables.iter().enumerate() {
            if cell.len() != spec.num_observed() {
                return Err(Error::invalid(format!(
                    "cell {} has {} tables, expected {}",
                    c + 1,
                    cell.len(),
                    spec.num_observed()
                )));
            }
            for (j, tab) in cell.iter().enumerate() {
                if tab.len() != spec.observed_states()[j] {
                    return Err(Error::invalid(format!(
                        "cell {} observable {} has {} entries, expected {}",
                        c + 1,
                        j + 1,
                        tab.len(),
                        spec.observed_states()[j]
                    )));
                }
                check_simplex(tab, &format!("cell {} observable {}", c + 1, j + 1))?;
            }
        }
        Ok(ParamSet { mixing, tables })
    }

    pub fn mixing(&self) -> &[Vec<f64>] {
        &self.mixing
    }

    pub fn tables(&self) -> &[Vec<Vec<f64>>] {
        &self.tables
    }

    /// Joint mixing weight of a cell: `Π_k a[k][c_k]`.
    pub fn cell_weight(&self, spec: &NetworkSpec, cell: usize) -> f64 {
        self.mixing
            .iter()
            .enumerate()
            .map(|(k, row)| row[spec.cell_state(cell, k)])
            .product()
    }

    /// Uniform draw (Dirichlet(1) per simplex); used by EM restarts and tests.
    pub fn random<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mixing = spec
            .hidden_states()
            .iter()
            .map(|&t| DirichletSampler::new(&vec![1.0; t]).sample(rng))
            .collect();
        let tables = (0..spec.num_cells())
            .map(|_| {
                spec.observed_states()
                    .iter()
                    .map(|&y| DirichletSampler::new(&vec![1.0; y]).sample(rng))
                    .collect()
            })
            .collect();
        ParamSet { mixing, tables }
    }
}

/// Probability of one observation vector under the model: the mixture over
/// all joint hidden cells of the product-categorical kernel.
pub fn joint_prob(spec: &NetworkSpec, params: &ParamSet, x: &[usize]) -> Result<f64> {
    spec.check_observation(x)?;
    if params.mixing.len() != spec.num_hidden() || params.tables.len() != spec.num_cells() {
        return Err(Error::invalid("parameter set does not match the shape"));
    }
    let mut total = 0.0;
    for c in 0..spec.num_cells() {
        let w = params.cell_weight(spec, c);
        if w == 0.0 {
            continue;
        }
        let mut kernel = 1.0;
        for (j, &xj) in x.iter().enumerate() {
            kernel *= params.tables[c][j][xj];
        }
        total += w * kernel;
    }
    Ok(total)
}

/// A declared truth: its own shape (`H` hidden nodes with `S` states) plus
/// true parameters. Observable shape must match any learner it is paired with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    spec: NetworkSpec,
    params: ParamSet,
}

impl TrueModel {
    pub fn new(spec: NetworkSpec, params: ParamSet) -> Result<Self> {
        // Re-run the shape checks so a ParamSet built for another spec is rejected.
        let params = ParamSet::new(&spec, params.mixing, params.tables)?;
        Ok(TrueModel { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn num_hidden(&self) -> usize {
        self.spec.num_hidden()
    }

    pub fn hidden_states(&self) -> &[usize] {
        self.spec.hidden_states()
    }

    /// Check the embedding conditions against a learner shape:
    /// `H <= K`, `S[k] <= T[k]` for `k <= H`, and identical observables.
    pub fn check_embeddable(&self, learner: &NetworkSpec) -> Result<()> {
        if self.spec.observed_states() != learner.observed_states() {
            return Err(Error::invalid(
                "truth and learner disagree on observable node shapes",
            ));
        }
        if self.num_hidden() > learner.num_hidden() {
            return Err(Error::invalid(format!(
                "truth has H={} hidden nodes, learner only K={}",
                self.num_hidden(),
                learner.num_hidden()
            )));
        }
        for (k, (&s, &t)) in self
            .hidden_states()
            .iter()
            .zip(learner.hidden_states())
            .enumerate()
        {
            if s > t {
                return Err(Error::invalid(format!(
                    "truth state count S[{}]={} exceeds learner T[{}]={}",
                    k + 1,
                    s,
                    k + 1,
                    t
                )));
            }
        }
        Ok(())
    }
}

/// Density of the truth at one observation vector.
pub fn true_density(truth: &TrueModel, x: &[usize]) -> Result<f64> {
    joint_prob(&truth.spec, &truth.params, x)
}

/// Is learner cell `cell` aligned with a truth cell? Aligned cells have
/// states below `S[k]` on the first `H` nodes and state 1 on extra nodes.
pub(crate) fn aligned_truth_cell(
    truth: &TrueModel,
    learner: &NetworkSpec,
    cell: usize,
) -> Option<usize> {
    let h = truth.num_hidden();
    let mut states = Vec::with_capacity(h);
    for k in 0..learner.num_hidden() {
        let st = learner.cell_state(cell, k);
        if k < h {
            if st >= truth.hidden_states()[k] {
                return None;
            }
            states.push(st);
        } else if st != 0 {
            return None;
        }
    }
    Some(truth.spec.cell_index(&states))
}

/// Express the truth in a larger learner's parameter space.
///
/// Extra mixing states get weight 0 (extra hidden nodes get the point mass on
/// state 1); aligned cells copy the matching true table; every remaining cell
/// copies the table of true cell (1,...,1). The embedded model reproduces the
/// true density exactly.
pub fn embed_truth(truth: &TrueModel, learner: &NetworkSpec) -> Result<ParamSet> {
    truth.check_embeddable(learner)?;
    let h = truth.num_hidden();
    let mut mixing = Vec::with_capacity(learner.num_hidden());
    for (k, &t) in learner.hidden_states().iter().enumerate() {
        let mut row = vec![0.0; t];
        if k < h {
            row[..truth.hidden_states()[k]].copy_from_slice(&truth.params.mixing()[k]);
        } else {
            row[0] = 1.0;
        }
        mixing.push(row);
    }
    let mut tables = Vec::with_capacity(learner.num_cells());
    for c in 0..learner.num_cells() {
        let source = aligned_truth_cell(truth, learner, c).unwrap_or(0);
        tables.push(truth.params.tables()[source].clone());
    }
    ParamSet::new(learner, mixing, tables)
}

/// A set of observation vectors (0-based states).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    rows: Vec<Vec<usize>>,
}

impl Dataset {
    /// Validate every row against the observable shape.
    pub fn new(rows: Vec<Vec<usize>>, spec: &NetworkSpec) -> Result<Self> {
        for row in &rows {
            spec.check_observation(row)?;
        }
        Ok(Dataset { rows })
    }

    pub fn empty() -> Self {
        Dataset { rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<usize>) {
        self.rows.push(row);
    }

    /// Group identical rows; patterns come back in lexicographic order.
    pub fn patterns(&self) -> Vec<Pattern> {
        let mut counts: std::collections::BTreeMap<&[usize], usize> = Default::default();
        for row in &self.rows {
            *counts.entry(row.as_slice()).or_insert(0) += 1;
        }
        counts
            .into_iter()
            .map(|(values, count)| Pattern {
                values: values.to_vec(),
                count,
            })
            .collect()
    }
}

/// One distinct observation pattern and its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub values: Vec<usize>,
    pub count: usize,
}

/// Draw `n` i.i.d. observations from the truth. Identical `(truth, n, seed)`
/// yields identical rows, and the first `n` rows for seed `s` are a prefix of
/// the rows drawn for any larger `n` with the same seed.
pub fn sample_dataset(truth: &TrueModel, n: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, 0);
    let spec = truth.spec();
    let cell_weights: Vec<f64> = (0..spec.num_cells())
        .map(|c| truth.params().cell_weight(spec, c))
        .collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let c = sample_categorical(&mut rng, &cell_weights);
        let row = (0..spec.num_observed())
            .map(|j| sample_categorical(&mut rng, &truth.params().tables()[c][j]))
            .collect();
        rows.push(row);
    }
    Dataset { rows }
}
