//! Text formats: line-oriented `key = value` model and config files, and the
//! CSV formats for datasets, learning curves, and selection tables.
//!
//! Files are 1-based (states, node indices, cell indices) while the in-memory
//! types are 0-based; cell indices follow the crate-wide lexicographic order
//! with the last hidden index fastest. Parsers are strict: unknown keys,
//! duplicate keys, and shape mismatches are errors.

use crate::error::{Error, Result};
use crate::experiment::{LearningCurve, SelectionRow};
use crate::model::{validate_spec, Dataset, NetworkSpec, ParamSet, TrueModel};

/// Parsed `key = value` lines with strict single-use accounting.
#[derive(Debug)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
    used: Vec<bool>,
}

impl KeyValues {
    /// Parse; blank lines and `#` comments are skipped, duplicate keys are
    /// rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::invalid(format!("line {}: empty key", lineno + 1)));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(Error::invalid(format!("duplicate key `{key}`")));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        let used = vec![false; entries.len()];
        Ok(KeyValues { entries, used })
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                return Some(v.clone());
            }
        }
        None
    }

    pub fn take_required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::invalid(format!("missing key `{key}`")))
    }

    /// Error if any key was never taken.
    pub fn finish(self) -> Result<()> {
        let leftover: Vec<&str> = self
            .entries
            .iter()
            .zip(&self.used)
            .filter(|(_, &u)| !u)
            .map(|((k, _), _)| k.as_str())
            .collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "unexpected keys: {}",
                leftover.join(", ")
            )))
        }
    }
}

pub fn parse_usize(value: &str, key: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("`{key}`: `{value}` is not a nonnegative integer")))
}

pub fn parse_u64(value: &str, key: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("`{key}`: `{value}` is not a nonnegative integer")))
}

pub fn parse_f64(value: &str, key: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("`{key}`: `{value}` is not a number")))
}

pub fn parse_usize_list(value: &str, key: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|part| parse_usize(part.trim(), key))
        .collect()
}

fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| parse_f64(part.trim(), key))
        .collect()
}

/// Parse a learner shape file (keys `K`, `T`, `M`, `Y`) and enforce the
/// learner constraints (every state count at least 2).
pub fn parse_learner_spec(text: &str) -> Result<NetworkSpec> {
    let mut kv = KeyValues::parse(text)?;
    let k = parse_usize(&kv.take_required("K")?, "K")?;
    let t = parse_usize_list(&kv.take_required("T")?, "T")?;
    let m = parse_usize(&kv.take_required("M")?, "M")?;
    let y = parse_usize_list(&kv.take_required("Y")?, "Y")?;
    kv.finish()?;
    if t.len() != k {
        return Err(Error::invalid(format!(
            "K = {k} but T lists {} entries",
            t.len()
        )));
    }
    if y.len() != m {
        return Err(Error::invalid(format!(
            "M = {m} but Y lists {} entries",
            y.len()
        )));
    }
    let violations = validate_spec(&t, &y);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::invalid(format!(
            "invalid learner shape: {}",
            msgs.join("; ")
        )));
    }
    NetworkSpec::new(t, y)
}

pub fn render_learner_spec(spec: &NetworkSpec) -> String {
    format!(
        "K = {}\nT = {}\nM = {}\nY = {}\n",
        spec.num_hidden(),
        join_usize(spec.hidden_states()),
        spec.num_observed(),
        join_usize(spec.observed_states()),
    )
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse a parameterized model (truth-format) file: keys `H`, `S`, `M`, `Y`,
/// one `a.k` line per hidden node, and one `b.c.j` line per (cell,
/// observable). Optional `K`/`T` keys must agree with `H`/`S` when present.
pub fn parse_truth(text: &str) -> Result<TrueModel> {
    let mut kv = KeyValues::parse(text)?;
    let h = parse_usize(&kv.take_required("H")?, "H")?;
    let s = parse_usize_list(&kv.take_required("S")?, "S")?;
    let m = parse_usize(&kv.take_required("M")?, "M")?;
    let y = parse_usize_list(&kv.take_required("Y")?, "Y")?;
    if let Some(k) = kv.take("K") {
        if parse_usize(&k, "K")? != h {
            return Err(Error::invalid("truth file has K != H"));
        }
    }
    if let Some(t) = kv.take("T") {
        if parse_usize_list(&t, "T")? != s {
            return Err(Error::invalid("truth file has T != S"));
        }
    }
    if s.len() != h {
        return Err(Error::invalid(format!(
            "H = {h} but S lists {} entries",
            s.len()
        )));
    }
    if y.len() != m {
        return Err(Error::invalid(format!(
            "M = {m} but Y lists {} entries",
            y.len()
        )));
    }
    let spec = NetworkSpec::new(s, y)?;
    let mut mixing = Vec::with_capacity(h);
    for k in 1..=h {
        let key = format!("a.{k}");
        let row = parse_f64_list(&kv.take_required(&key)?, &key)?;
        mixing.push(row);
    }
    let mut tables = Vec::with_capacity(spec.num_cells());
    for c in 1..=spec.num_cells() {
        let mut cell = Vec::with_capacity(m);
        for j in 1..=m {
            let key = format!("b.{c}.{j}");
            cell.push(parse_f64_list(&kv.take_required(&key)?, &key)?);
        }
        tables.push(cell);
    }
    kv.finish()?;
    let params = ParamSet::new(&spec, mixing, tables)?;
    TrueModel::new(spec, params)
}

pub fn render_truth(truth: &TrueModel) -> String {
    let spec = truth.spec();
    let mut out = String::new();
    out.push_str(&format!("H = {}\n", spec.num_hidden()));
    out.push_str(&format!("S = {}\n", join_usize(spec.hidden_states())));
    out.push_str(&format!("M = {}\n", spec.num_observed()));
    out.push_str(&format!("Y = {}\n", join_usize(spec.observed_states())));
    for (k, row) in truth.params().mixing().iter().enumerate() {
        out.push_str(&format!("a.{} = {}\n", k + 1, join_f64(row)));
    }
    for (c, cell) in truth.params().tables().iter().enumerate() {
        for (j, tab) in cell.iter().enumerate() {
            out.push_str(&format!("b.{}.{} = {}\n", c + 1, j + 1, join_f64(tab)));
        }
    }
    out
}

/// Parse a dataset CSV: header `x1,...,xM`, then 1-based integer rows.
pub fn parse_dataset_csv(text: &str, spec: &NetworkSpec) -> Result<Dataset> {
    let m = spec.num_observed();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::invalid("dataset file is empty (expected a header row)"))?;
    let expected: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::invalid(format!(
            "dataset header `{header}` does not match expected `{}`",
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != m {
            return Err(Error::invalid(format!(
                "dataset line {}: {} fields, expected {m}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(m);
        for (j, field) in fields.iter().enumerate() {
            let v: usize = field.parse().map_err(|_| {
                Error::invalid(format!(
                    "dataset line {}: `{field}` is not an integer",
                    lineno + 1
                ))
            })?;
            if v < 1 || v > spec.observed_states()[j] {
                return Err(Error::invalid(format!(
                    "dataset line {}: state {v} out of range 1..={} for x{}",
                    lineno + 1,
                    spec.observed_states()[j],
                    j + 1
                )));
            }
            row.push(v - 1);
        }
        rows.push(row);
    }
    Dataset::new(rows, spec)
}

pub fn render_dataset_csv(spec: &NetworkSpec, data: &Dataset) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=spec.num_observed()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|&v| (v + 1).to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Curve CSV, exactly `n,replicates,mean_F,stderr_F` with one header row.
pub fn render_curve_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("n,replicates,mean_F,stderr_F\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.n, p.replicates, p.mean_f, p.stderr_f
        ));
    }
    out
}

/// Selection CSV, exactly `replicate,candidate,neg_log_Z0,bic_score,singular_score`.
pub fn render_select_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::from("replicate,candidate,neg_log_Z0,bic_score,singular_score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.replicate, r.candidate, r.neg_log_z0, r.bic_score, r.singular_score
        ));
    }
    out
}
