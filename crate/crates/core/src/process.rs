//! Exact finite-horizon evaluation: interface probabilities, joint
//! processes of networks, marginalization and conditioning, and the
//! perception-action loop joint.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{all_sequences, decode, Alphabet};
use crate::error::{Error, Result};
use crate::network::TransducerNetwork;
use crate::transducer::{Transducer, TransducerJson};
use crate::DEFAULT_TOL;

/// Branches whose total mass falls below this are dropped.
pub const PRUNE: f64 = 1e-15;
pub const DEFAULT_HORIZON: usize = 4;
pub const MAX_HORIZON: usize = 8;

/// Id of the latent process owned by node `node`.
pub fn latent_process_id(node: &str) -> String {
    format!("{node}.R")
}

fn check_symbols(seq: &[usize], alphabet: &Alphabet) -> Result<()> {
    match seq.iter().find(|&&s| s >= alphabet.size()) {
        Some(&s) => Err(Error::UnknownSymbol {
            alphabet: alphabet.name().to_string(),
            symbol: s.to_string(),
        }),
        None => Ok(()),
    }
}

/// `Pr(y_{0:t} | x_{0:t})` for one output sequence.
pub fn interface_prob(t: &Transducer, xs: &[usize], ys: &[usize]) -> Result<f64> {
    check_symbols(xs, t.in_alphabet())?;
    check_symbols(ys, t.out_alphabet())?;
    if xs.len() != ys.len() {
        return Err(Error::Precondition("input and output sequences differ in length".into()));
    }
    let mut v = t.prior().to_vec();
    for (&x, &y) in xs.iter().zip(ys) {
        v = t.apply(&v, x, y);
    }
    Ok(v.iter().sum())
}

/// Distribution over output sequences for the input sequence `xs`, computed
/// as `⟨1| Π T̂^{(y_i|x_i)} |ρ⟩` over all output prefixes with pruning.
pub fn interface_eval(t: &Transducer, xs: &[usize]) -> Result<BTreeMap<Vec<usize>, f64>> {
    check_symbols(xs, t.in_alphabet())?;
    let mut frontier: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), t.prior().to_vec())];
    for &x in xs {
        let mut next = Vec::with_capacity(frontier.len() * t.n_out());
        for (prefix, v) in &frontier {
            for y in 0..t.n_out() {
                let w = t.apply(v, x, y);
                if w.iter().sum::<f64>() > PRUNE {
                    let mut p = prefix.clone();
                    p.push(y);
                    next.push((p, w));
                }
            }
        }
        frontier = next;
    }
    Ok(frontier.into_iter().map(|(k, v)| (k, v.iter().sum())).collect())
}

/// Sums values per key. Sorting once and merging neighbours is much faster
/// than ordered inserts on large tables; the stable sort keeps per-key sums
/// in input order.
pub(crate) fn accumulate<K: Ord, I: IntoIterator<Item = (K, f64)>>(items: I) -> BTreeMap<K, f64> {
    let mut v: Vec<(K, f64)> = items.into_iter().collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(K, f64)> = Vec::with_capacity(v.len());
    for (k, p) in v {
        match merged.last_mut() {
            Some(last) if last.0 == k => last.1 += p,
            _ => merged.push((k, p)),
        }
    }
    merged.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Observable,
    Latent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessInfo {
    pub id: String,
    pub alphabet: Alphabet,
    pub role: Role,
}

impl ProcessInfo {
    pub fn observable(id: impl Into<String>, alphabet: Alphabet) -> Self {
        Self {
            id: id.into(),
            alphabet,
            role: Role::Observable,
        }
    }

    pub fn latent(id: impl Into<String>, alphabet: Alphabet) -> Self {
        Self {
            id: id.into(),
            alphabet,
            role: Role::Latent,
        }
    }

    /// Observables carry `H` symbols, latents `H + 1`.
    pub fn seq_len(&self, horizon: usize) -> usize {
        match self.role {
            Role::Observable => horizon,
            Role::Latent => horizon + 1,
        }
    }
}

/// Exact sparse joint distribution over tuples of sequences at a fixed
/// horizon. Keys concatenate the per-process sequences in roster order.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDistribution {
    horizon: usize,
    processes: Vec<ProcessInfo>,
    table: BTreeMap<Vec<usize>, f64>,
}

impl SequenceDistribution {
    pub fn new(horizon: usize, processes: Vec<ProcessInfo>, table: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        let d = Self::unchecked(horizon, processes, table)?;
        let total: f64 = d.table.values().sum();
        if (total - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(d)
    }

    fn unchecked(horizon: usize, processes: Vec<ProcessInfo>, table: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        for (i, p) in processes.iter().enumerate() {
            if processes[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::InvalidDistribution(format!("duplicate process `{}`", p.id)));
            }
        }
        let width: usize = processes.iter().map(|p| p.seq_len(horizon)).sum();
        for (k, &p) in &table {
            if k.len() != width {
                return Err(Error::InvalidDistribution(format!(
                    "key of length {} expected {width}",
                    k.len()
                )));
            }
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
            }
        }
        Ok(Self {
            horizon,
            processes,
            table,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn processes(&self) -> &[ProcessInfo] {
        &self.processes
    }

    pub fn table(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.table.values().sum()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.processes
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownProcess(id.to_string()))
    }

    pub fn process(&self, id: &str) -> Result<&ProcessInfo> {
        Ok(&self.processes[self.index_of(id)?])
    }

    /// Offset of process `i`'s sequence inside a key.
    pub fn offset(&self, i: usize) -> usize {
        self.processes[..i].iter().map(|p| p.seq_len(self.horizon)).sum()
    }

    pub fn seq_len(&self, i: usize) -> usize {
        self.processes[i].seq_len(self.horizon)
    }

    /// Ids of observable processes, in roster order.
    pub fn observables(&self) -> Vec<String> {
        self.ids_with(Role::Observable)
    }

    pub fn latents(&self) -> Vec<String> {
        self.ids_with(Role::Latent)
    }

    fn ids_with(&self, role: Role) -> Vec<String> {
        self.processes
            .iter()
            .filter(|p| p.role == role)
            .map(|p| p.id.clone())
            .collect()
    }

    /// Builds a key from per-process sequences given in roster order.
    pub fn key(&self, seqs: &[Vec<usize>]) -> Vec<usize> {
        seqs.concat()
    }

    /// Probability of the given per-process sequences (roster order).
    pub fn prob(&self, seqs: &[Vec<usize>]) -> f64 {
        self.table.get(&self.key(seqs)).copied().unwrap_or(0.0)
    }

    /// Splits a key into per-process sequences.
    pub fn split_key<'k>(&self, key: &'k [usize]) -> Vec<&'k [usize]> {
        let mut out = Vec::with_capacity(self.processes.len());
        let mut o = 0;
        for i in 0..self.processes.len() {
            let l = self.seq_len(i);
            out.push(&key[o..o + l]);
            o += l;
        }
        out
    }

    fn resolve(&self, ids: &[&str]) -> Result<Vec<usize>> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    fn project(&self, key: &[usize], idx: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &i in idx {
            let o = self.offset(i);
            out.extend_from_slice(&key[o..o + self.seq_len(i)]);
        }
        out
    }

    /// Marginal over `keep`; the retained processes stay in roster order.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySet("keep"));
        }
        let mut idx = self.resolve(keep)?;
        idx.sort_unstable();
        idx.dedup();
        let table = accumulate(self.table.iter().map(|(k, &p)| (self.project(k, &idx), p)));
        let processes = idx.iter().map(|&i| self.processes[i].clone()).collect();
        Self::unchecked(self.horizon, processes, table)
    }

    /// Conditions on the listed processes taking the given sequences. The
    /// conditioned processes stay in the roster as point masses.
    pub fn condition(&self, on: &[(&str, Vec<usize>)]) -> Result<Self> {
        if on.is_empty() {
            return Err(Error::EmptySet("on"));
        }
        let mut checks = Vec::with_capacity(on.len());
        for (id, seq) in on {
            let i = self.index_of(id)?;
            if seq.len() != self.seq_len(i) {
                return Err(Error::InvalidSlice(format!("value for `{id}` has length {}", seq.len())));
            }
            checks.push((self.offset(i), seq));
        }
        let table: BTreeMap<Vec<usize>, f64> = self
            .table
            .iter()
            .filter(|(k, _)| checks.iter().all(|(o, s)| &k[*o..*o + s.len()] == s.as_slice()))
            .map(|(k, &p)| (k.clone(), p))
            .collect();
        let mass: f64 = table.values().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        let table = table.into_iter().map(|(k, p)| (k, p / mass)).collect();
        Self::unchecked(self.horizon, self.processes.clone(), table)
    }

    /// Replaces process `id`, whose alphabet is the product of the parts'
    /// alphabets, by its factors (same role, first factor most significant).
    pub fn split_process(&self, id: &str, parts: &[(&str, Alphabet)]) -> Result<Self> {
        let i = self.index_of(id)?;
        let whole = &self.processes[i];
        let radices: Vec<usize> = parts.iter().map(|(_, a)| a.size()).collect();
        if radices.iter().product::<usize>() != whole.alphabet.size() {
            return Err(Error::AlphabetMismatch(format!(
                "factors do not multiply to the alphabet of `{id}`"
            )));
        }
        let mut processes = self.processes[..i].to_vec();
        processes.extend(parts.iter().map(|(pid, a)| ProcessInfo {
            id: pid.to_string(),
            alphabet: a.clone(),
            role: whole.role,
        }));
        processes.extend_from_slice(&self.processes[i + 1..]);
        let (o, l) = (self.offset(i), self.seq_len(i));
        let table = self
            .table
            .iter()
            .map(|(k, &p)| {
                let digits: Vec<Vec<usize>> = k[o..o + l].iter().map(|&s| decode(s, &radices)).collect();
                let mut key = k[..o].to_vec();
                for f in 0..parts.len() {
                    key.extend(digits.iter().map(|d| d[f]));
                }
                key.extend_from_slice(&k[o + l..]);
                (key, p)
            })
            .collect();
        Self::unchecked(self.horizon, processes, table)
    }

    /// Marginal over `ids` with the processes in the given order.
    pub fn select(&self, ids: &[&str]) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptySet("keep"));
        }
        let idx = self.resolve(ids)?;
        if let Some(i) = idx.iter().enumerate().find(|(n, i)| idx[..*n].contains(i)).map(|(_, i)| *i) {
            return Err(Error::Overlap(self.processes[i].id.clone()));
        }
        let table = accumulate(self.table.iter().map(|(k, &p)| (self.project(k, &idx), p)));
        let processes = idx.iter().map(|&i| self.processes[i].clone()).collect();
        Self::unchecked(self.horizon, processes, table)
    }

    /// Marginal over the first `horizon` steps: observables keep
    /// `horizon` symbols and latents `horizon + 1`.
    pub fn truncate(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::Horizon {
                horizon,
                max: self.horizon,
            });
        }
        if horizon == self.horizon {
            return Ok(self.clone());
        }
        let spans: Vec<(usize, usize)> = (0..self.processes.len())
            .map(|i| (self.offset(i), self.processes[i].seq_len(horizon)))
            .collect();
        let table = accumulate(self.table.iter().map(|(k, &p)| {
            let key = spans.iter().flat_map(|&(o, n)| k[o..o + n].iter().copied()).collect();
            (key, p)
        }));
        Self::unchecked(horizon, self.processes.clone(), table)
    }

    /// Largest absolute difference between two distributions over the same
    /// roster, taken over the union of their supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut gap: f64 = 0.0;
        for (k, &p) in &self.table {
            gap = gap.max((p - other.table.get(k).copied().unwrap_or(0.0)).abs());
        }
        for (k, &q) in &other.table {
            if !self.table.contains_key(k) {
                gap = gap.max(q.abs());
            }
        }
        gap
    }
}

#[derive(Serialize, Deserialize)]
struct ProcessJson {
    id: String,
    alphabet: Vec<String>,
    role: Role,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    seqs: serde_json::Map<String, serde_json::Value>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    horizon: usize,
    processes: Vec<ProcessJson>,
    entries: Vec<EntryJson>,
}

impl Serialize for SequenceDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .table
            .iter()
            .map(|(k, &p)| {
                let seqs = self
                    .split_key(k)
                    .into_iter()
                    .zip(&self.processes)
                    .map(|(seq, info)| (info.id.clone(), serde_json::Value::String(info.alphabet.format_seq(seq))))
                    .collect();
                EntryJson { seqs, p }
            })
            .collect();
        DistributionJson {
            horizon: self.horizon,
            processes: self
                .processes
                .iter()
                .map(|p| ProcessJson {
                    id: p.id.clone(),
                    alphabet: p.alphabet.symbols().to_vec(),
                    role: p.role,
                })
                .collect(),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SequenceDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = DistributionJson::deserialize(d)?;
        let build = || -> Result<Self> {
            let processes = j
                .processes
                .into_iter()
                .map(|p| {
                    Ok(ProcessInfo {
                        alphabet: Alphabet::new(p.id.clone(), p.alphabet)?,
                        id: p.id,
                        role: p.role,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut table = BTreeMap::new();
            for e in j.entries {
                let mut key = Vec::new();
                for info in &processes {
                    let text = e
                        .seqs
                        .get(&info.id)
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| Error::InvalidDistribution(format!("entry lacks a sequence for `{}`", info.id)))?;
                    let seq = info.alphabet.parse_seq(text)?;
                    if seq.len() != info.seq_len(j.horizon) {
                        return Err(Error::InvalidDistribution(format!(
                            "sequence `{text}` for `{}` has the wrong length",
                            info.id
                        )));
                    }
                    key.extend(seq);
                }
                *table.entry(key).or_insert(0.0) += e.p;
            }
            SequenceDistribution::new(j.horizon, processes, table)
        };
        build().map_err(D::Error::custom)
    }
}

/// Interface rows: `(t, input sequences)` to a distribution over output
/// sequences.
pub type InterfaceRows = BTreeMap<(usize, Vec<usize>), BTreeMap<Vec<usize>, f64>>;

/// A family of conditional distributions `Pr(outputs | inputs)`. Rows are
/// keyed by `(t, input sequences)`; every member sequence has length `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    horizon: usize,
    inputs: Vec<ProcessInfo>,
    outputs: Vec<ProcessInfo>,
    rows: InterfaceRows,
}

impl Interface {
    pub fn new(horizon: usize, inputs: Vec<ProcessInfo>, outputs: Vec<ProcessInfo>, rows: InterfaceRows) -> Self {
        Self {
            horizon,
            inputs,
            outputs,
            rows,
        }
    }

    /// Every member `Pr(Y_{0:t} | X_{0:t})`, `t = 0..=horizon`, of a
    /// transducer's interface.
    pub fn from_transducer(t: &Transducer, horizon: usize) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for len in 0..=horizon {
            let seqs = all_sequences(t.n_in(), len);
            let dists: Vec<_> = seqs.par_iter().map(|xs| interface_eval(t, xs)).collect::<Result<Vec<_>>>()?;
            for (xs, dist) in seqs.into_iter().zip(dists) {
                rows.insert((len, xs), dist);
            }
        }
        Ok(Self {
            horizon,
            inputs: vec![ProcessInfo::observable("X", t.in_alphabet().clone())],
            outputs: vec![ProcessInfo::observable("Y", t.out_alphabet().clone())],
            rows,
        })
    }

    /// Conditional `Pr(target | given)` at the full horizon, computed from a
    /// joint by dividing by the marginal of `given`. Only positive-probability
    /// conditioning values get a row.
    pub fn from_joint(d: &SequenceDistribution, given: &[&str], target: &[&str]) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptySet("target"));
        }
        let gi = d.resolve(given)?;
        let ti = d.resolve(target)?;
        for &i in gi.iter().chain(&ti) {
            if d.processes[i].role != Role::Observable {
                return Err(Error::RoleMismatch(format!("`{}` is latent", d.processes[i].id)));
            }
        }
        if let Some(i) = gi.iter().find(|i| ti.contains(i)) {
            return Err(Error::Overlap(d.processes[*i].id.clone()));
        }
        let mut joint: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, f64>> = BTreeMap::new();
        for (k, &p) in &d.table {
            *joint
                .entry(d.project(k, &gi))
                .or_default()
                .entry(d.project(k, &ti))
                .or_insert(0.0) += p;
        }
        let mut rows = BTreeMap::new();
        for (g, dist) in joint {
            let mass: f64 = dist.values().sum();
            if mass > 0.0 {
                let dist = dist.into_iter().map(|(k, p)| (k, p / mass)).collect();
                rows.insert((d.horizon, g), dist);
            }
        }
        Ok(Self {
            horizon: d.horizon,
            inputs: gi.iter().map(|&i| d.processes[i].clone()).collect(),
            outputs: ti.iter().map(|&i| d.processes[i].clone()).collect(),
            rows,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn inputs(&self) -> &[ProcessInfo] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[ProcessInfo] {
        &self.outputs
    }

    pub fn rows(&self) -> &InterfaceRows {
        &self.rows
    }

    /// Output distribution for an input key of sequences of length `t`.
    pub fn distribution(&self, t: usize, input: &[usize]) -> Option<&BTreeMap<Vec<usize>, f64>> {
        self.rows.get(&(t, input.to_vec()))
    }

    pub fn prob(&self, t: usize, input: &[usize], output: &[usize]) -> f64 {
        self.distribution(t, input)
            .and_then(|d| d.get(output))
            .copied()
            .unwrap_or(0.0)
    }

    /// Largest violation of the consistency condition between consecutive
    /// lengths, for single-process interfaces built by
    /// [`Interface::from_transducer`].
    pub fn consistency_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for ((t, xs), dist) in &self.rows {
            if *t == 0 || self.inputs.len() != 1 || self.outputs.len() != 1 {
                continue;
            }
            let Some(shorter) = self.rows.get(&(t - 1, xs[..t - 1].to_vec())) else {
                continue;
            };
            let mut marg: BTreeMap<&[usize], f64> = BTreeMap::new();
            for (ys, &p) in dist {
                *marg.entry(&ys[..t - 1]).or_insert(0.0) += p;
            }
            for (ys, &p) in shorter {
                gap = gap.max((p - marg.get(ys.as_slice()).copied().unwrap_or(0.0)).abs());
            }
            for (ys, &p) in &marg {
                if !shorter.contains_key(*ys) {
                    gap = gap.max(p);
                }
            }
        }
        gap
    }
}

#[derive(Serialize)]
struct InterfaceRowJson {
    given: serde_json::Map<String, serde_json::Value>,
    dist: Vec<EntryJson>,
}

#[derive(Serialize)]
struct InterfaceJson {
    horizon: usize,
    inputs: Vec<String>,
    outputs: Vec<String>,
    rows: Vec<InterfaceRowJson>,
}

fn named_seqs(processes: &[ProcessInfo], key: &[usize]) -> serde_json::Map<String, serde_json::Value> {
    if processes.is_empty() {
        return serde_json::Map::new();
    }
    let t = key.len() / processes.len();
    processes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                p.id.clone(),
                serde_json::Value::String(p.alphabet.format_seq(&key[i * t..(i + 1) * t])),
            )
        })
        .collect()
}

impl Serialize for Interface {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InterfaceJson {
            horizon: self.horizon,
            inputs: self.inputs.iter().map(|p| p.id.clone()).collect(),
            outputs: self.outputs.iter().map(|p| p.id.clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|((_, given), dist)| InterfaceRowJson {
                    given: named_seqs(&self.inputs, given),
                    dist: dist
                        .iter()
                        .map(|(k, &p)| EntryJson {
                            seqs: named_seqs(&self.outputs, k),
                            p,
                        })
                        .collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

/// Distribution over the network's external input sequences, one sequence
/// per external input in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct InputDistribution {
    entries: Vec<(Vec<Vec<usize>>, f64)>,
}

impl InputDistribution {
    pub fn new(entries: Vec<(Vec<Vec<usize>>, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > DEFAULT_TOL || entries.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::InvalidDistribution(format!("input distribution sums to {total}")));
        }
        Ok(Self { entries })
    }

    /// Used for networks without external inputs.
    pub fn none() -> Self {
        Self {
            entries: vec![(Vec::new(), 1.0)],
        }
    }

    pub fn point(seqs: Vec<Vec<usize>>) -> Self {
        Self {
            entries: vec![(seqs, 1.0)],
        }
    }

    /// Independent inputs, each IID over time with the given per-step law.
    pub fn iid(laws: &[Vec<f64>], horizon: usize) -> Result<Self> {
        let mut entries: Vec<(Vec<Vec<usize>>, f64)> = vec![(Vec::new(), 1.0)];
        for law in laws {
            let mut next = Vec::new();
            for seq in all_sequences(law.len(), horizon) {
                let p: f64 = seq.iter().map(|&s| law[s]).product();
                if p == 0.0 {
                    continue;
                }
                for (prefix, q) in &entries {
                    let mut e = prefix.clone();
                    e.push(seq.clone());
                    next.push((e, q * p));
                }
            }
            entries = next;
        }
        Self::new(entries)
    }

    pub fn uniform(net: &TransducerNetwork, horizon: usize) -> Result<Self> {
        let laws: Vec<Vec<f64>> = net.input_sizes().into_iter().map(|n| vec![1.0 / n as f64; n]).collect();
        Self::iid(&laws, horizon)
    }

    pub fn entries(&self) -> &[(Vec<Vec<usize>>, f64)] {
        &self.entries
    }
}

/// Applies node `n`'s operator along latent axis `n` of a product-latent
/// vector.
fn apply_axis(v: &[f64], sizes: &[usize], axis: usize, t: &Transducer, x: usize, y: usize) -> Vec<f64> {
    let inner: usize = sizes[axis + 1..].iter().product();
    let k = sizes[axis];
    let mut out = vec![0.0; v.len()];
    let outer = v.len() / (k * inner);
    for o in 0..outer {
        for r in 0..k {
            let row = t.kernel().block(x, r, y);
            for i in 0..inner {
                let w = v[(o * k + r) * inner + i];
                if w == 0.0 {
                    continue;
                }
                for (rn, &p) in row.iter().enumerate() {
                    out[(o * k + rn) * inner + i] += w * p;
                }
            }
        }
    }
    out
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Horizon {
            horizon,
            max: MAX_HORIZON,
        });
    }
    Ok(())
}

/// Roster of [`joint_process`]: external inputs, node outputs, then (when
/// requested) node latents.
pub fn joint_roster(net: &TransducerNetwork, include_latents: bool) -> Vec<ProcessInfo> {
    let mut roster: Vec<ProcessInfo> = net
        .inputs()
        .iter()
        .map(|i| ProcessInfo::observable(i.id.clone(), i.alphabet.clone()))
        .collect();
    roster.extend(
        net.nodes()
            .iter()
            .map(|n| ProcessInfo::observable(n.id.clone(), n.transducer.out_alphabet().clone())),
    );
    if include_latents {
        roster.extend(
            net.nodes()
                .iter()
                .map(|n| ProcessInfo::latent(latent_process_id(&n.id), n.transducer.latent_alphabet().clone())),
        );
    }
    roster
}

/// Exact joint distribution of a network driven by `inputs` over `horizon`
/// steps, by forward recursion over time with zero-mass pruning. Without
/// latents the recursion carries `Pr(observable prefix, latent vector)`.
pub fn joint_process(
    net: &TransducerNetwork,
    inputs: &InputDistribution,
    horizon: usize,
    include_latents: bool,
) -> Result<SequenceDistribution> {
    check_horizon(horizon)?;
    for (seqs, _) in inputs.entries() {
        if seqs.len() != net.inputs().len() || seqs.iter().any(|s| s.len() != horizon) {
            return Err(Error::InvalidDistribution(
                "input sequences do not match the network's inputs".into(),
            ));
        }
        for (s, inp) in seqs.iter().zip(net.inputs()) {
            check_symbols(s, &inp.alphabet)?;
        }
    }
    let parts: Vec<Vec<(Vec<usize>, f64)>> = inputs
        .entries()
        .par_iter()
        .map(|(seqs, w)| {
            if include_latents {
                forward_with_latents(net, seqs, *w, horizon)
            } else {
                forward_observed(net, seqs, *w, horizon)
            }
        })
        .collect();
    let table = accumulate(parts.into_iter().flatten());
    SequenceDistribution::unchecked(horizon, joint_roster(net, include_latents), table)
}

fn step_inputs(seqs: &[Vec<usize>], t: usize) -> Vec<usize> {
    seqs.iter().map(|s| s[t]).collect()
}

fn forward_observed(net: &TransducerNetwork, in_seqs: &[Vec<usize>], weight: f64, horizon: usize) -> Vec<(Vec<usize>, f64)> {
    let sizes = net.latent_sizes();
    let n_nodes = net.nodes().len();
    let mut prior = vec![weight];
    for node in net.nodes() {
        prior = prior
            .iter()
            .flat_map(|&a| node.transducer.prior().iter().map(move |&b| a * b))
            .collect();
    }
    // each branch: per-step joint output digits, latent vector
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<f64>)> = vec![(Vec::new(), prior)];
    for t in 0..horizon {
        let xs = step_inputs(in_seqs, t);
        let mut next = Vec::new();
        for (history, v) in &frontier {
            let mut partial: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), v.clone())];
            for n in 0..n_nodes {
                let tn = &net.nodes()[n].transducer;
                let mut grown = Vec::new();
                for (outs, w) in &partial {
                    let x = net.node_input(n, &xs, outs);
                    for y in 0..tn.n_out() {
                        let w2 = apply_axis(w, &sizes, n, tn, x, y);
                        if w2.iter().sum::<f64>() > PRUNE {
                            let mut o = outs.clone();
                            o.push(y);
                            grown.push((o, w2));
                        }
                    }
                }
                partial = grown;
            }
            for (outs, w) in partial {
                let mut h = history.clone();
                h.push(outs);
                next.push((h, w));
            }
        }
        frontier = next;
    }
    frontier
        .into_iter()
        .map(|(history, v)| {
            let mut key: Vec<usize> = in_seqs.concat();
            for n in 0..n_nodes {
                key.extend(history.iter().map(|step| step[n]));
            }
            (key, v.iter().sum())
        })
        .collect()
}

/// Depth-first walk over every (output, latent path) assignment. Branches
/// never merge here, so no table is needed until the leaves.
struct LatentWalk<'a> {
    net: &'a TransducerNetwork,
    in_seqs: &'a [Vec<usize>],
    horizon: usize,
    n: usize,
    outs: Vec<usize>,
    lats: Vec<usize>,
    leaves: Vec<(Vec<usize>, f64)>,
}

impl LatentWalk<'_> {
    fn prior(&mut self, node: usize, p: f64) {
        if node == self.n {
            self.step(0, 0, p);
            return;
        }
        for (r, &q) in self.net.nodes()[node].transducer.prior().iter().enumerate() {
            if p * q > 0.0 {
                self.lats[node] = r;
                self.prior(node + 1, p * q);
            }
        }
    }

    /// Emits node `node`'s symbol and next latent at time `t`.
    fn step(&mut self, t: usize, node: usize, p: f64) {
        if t == self.horizon {
            self.leaf(p);
            return;
        }
        if node == self.n {
            self.step(t + 1, 0, p);
            return;
        }
        let xs: Vec<usize> = self.in_seqs.iter().map(|s| s[t]).collect();
        let x = self.net.node_input(node, &xs, &self.outs[t * self.n..(t + 1) * self.n]);
        let tn = &self.net.nodes()[node].transducer;
        let r = self.lats[t * self.n + node];
        for y in 0..tn.n_out() {
            for (rn, &q) in tn.kernel().block(x, r, y).iter().enumerate() {
                let pq = p * q;
                if pq > 0.0 {
                    self.outs[t * self.n + node] = y;
                    self.lats[(t + 1) * self.n + node] = rn;
                    self.step(t, node + 1, pq);
                }
            }
        }
    }

    fn leaf(&mut self, p: f64) {
        let (h, n) = (self.horizon, self.n);
        let mut key: Vec<usize> = self.in_seqs.concat();
        key.reserve(n * (2 * h + 1));
        for node in 0..n {
            key.extend((0..h).map(|t| self.outs[t * n + node]));
        }
        for node in 0..n {
            key.extend((0..=h).map(|t| self.lats[t * n + node]));
        }
        self.leaves.push((key, p));
    }
}

fn forward_with_latents(net: &TransducerNetwork, in_seqs: &[Vec<usize>], weight: f64, horizon: usize) -> Vec<(Vec<usize>, f64)> {
    let n = net.nodes().len();
    let mut walk = LatentWalk {
        net,
        in_seqs,
        horizon,
        n,
        outs: vec![0; horizon * n],
        lats: vec![0; (horizon + 1) * n],
        leaves: Vec::new(),
    };
    walk.prior(0, weight);
    walk.leaves
}

/// An agent in a perception-action loop. Its transducer reads observations
/// `Y_t` and emits the next action `X_{t+1}`; `initial` is the joint
/// `Pr(X_0, S_0)` indexed `x * |S| + s`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackAgent {
    pub transducer: Transducer,
    pub initial: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AgentJson {
    transducer: TransducerJson,
    initial: Vec<Vec<f64>>,
}

impl Serialize for FeedbackAgent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ns = self.transducer.n_latent();
        AgentJson {
            transducer: TransducerJson::from(&self.transducer),
            initial: self.initial.chunks(ns).map(<[f64]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeedbackAgent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = AgentJson::deserialize(d)?;
        let transducer = Transducer::try_from(j.transducer).map_err(D::Error::custom)?;
        Ok(Self {
            transducer,
            initial: j.initial.concat(),
        })
    }
}

fn check_loop(env: &Transducer, agent: &FeedbackAgent) -> Result<()> {
    let a = &agent.transducer;
    if a.n_in() != env.n_out() || a.n_out() != env.n_in() {
        return Err(Error::AlphabetMismatch(
            "agent must read observations and emit actions".into(),
        ));
    }
    if agent.initial.len() != env.n_in() * a.n_latent() {
        return Err(Error::AlphabetMismatch("initial joint must cover (X_0, S_0)".into()));
    }
    let total: f64 = agent.initial.iter().sum();
    if (total - 1.0).abs() > DEFAULT_TOL {
        return Err(Error::InvalidDistribution(format!("initial joint sums to {total}")));
    }
    Ok(())
}

fn loop_roster(env: &Transducer) -> Vec<ProcessInfo> {
    vec![
        ProcessInfo::observable("X", env.in_alphabet().clone()),
        ProcessInfo::observable("Y", env.out_alphabet().clone()),
    ]
}

/// Joint `Pr(X_{0:H}, Y_{0:H})` of the closed loop, by stepping the
/// environment and the agent in turn.
pub fn feedback_joint(env: &Transducer, agent: &FeedbackAgent, horizon: usize) -> Result<SequenceDistribution> {
    check_horizon(horizon)?;
    check_loop(env, agent)?;
    let a = &agent.transducer;
    let ns = a.n_latent();
    // key: actions so far (t+1), observations so far (t), env latent, agent latent
    let mut states: BTreeMap<(Vec<usize>, Vec<usize>, usize, usize), f64> = BTreeMap::new();
    for (xs, &p) in agent.initial.iter().enumerate() {
        let (x0, s0) = (xs / ns, xs % ns);
        for (r0, &q) in env.prior().iter().enumerate() {
            if p * q > 0.0 {
                *states.entry((vec![x0], Vec::new(), r0, s0)).or_insert(0.0) += p * q;
            }
        }
    }
    for t in 0..horizon {
        let mut after_env = BTreeMap::new();
        for ((xs, ys, r, s), p) in &states {
            let x = xs[t];
            for y in 0..env.n_out() {
                for (rn, &q) in env.kernel().block(x, *r, y).iter().enumerate() {
                    if q > 0.0 {
                        let mut ys2 = ys.clone();
                        ys2.push(y);
                        *after_env.entry((xs.clone(), ys2, rn, *s)).or_insert(0.0) += p * q;
                    }
                }
            }
        }
        if t + 1 == horizon {
            states = after_env;
            break;
        }
        let mut after_agent = BTreeMap::new();
        for ((xs, ys, r, s), p) in &after_env {
            let y = ys[t];
            for x in 0..a.n_out() {
                for (sn, &q) in a.kernel().block(y, *s, x).iter().enumerate() {
                    if q > 0.0 {
                        let mut xs2 = xs.clone();
                        xs2.push(x);
                        *after_agent.entry((xs2, ys.clone(), *r, sn)).or_insert(0.0) += p * q;
                    }
                }
            }
        }
        states = after_agent;
    }
    let mut table = BTreeMap::new();
    for ((xs, ys, _, _), p) in states {
        if p > PRUNE {
            *table.entry([xs, ys].concat()).or_insert(0.0) += p;
        }
    }
    SequenceDistribution::unchecked(horizon, loop_roster(env), table)
}

/// `Pr(x_{0:t} | y_{0:t})` for the agent: the initial joint followed by
/// `t - 1` agent steps.
pub fn agent_interface_prob(agent: &FeedbackAgent, xs: &[usize], ys: &[usize]) -> f64 {
    let a = &agent.transducer;
    let ns = a.n_latent();
    if xs.is_empty() {
        return 1.0;
    }
    let mut v: Vec<f64> = (0..ns).map(|s| agent.initial[xs[0] * ns + s]).collect();
    for i in 0..xs.len() - 1 {
        v = a.apply(&v, ys[i], xs[i + 1]);
    }
    v.iter().sum()
}

/// The same joint as [`feedback_joint`], computed as the product of the
/// environment's and the agent's interface probabilities.
pub fn feedback_joint_via_interfaces(env: &Transducer, agent: &FeedbackAgent, horizon: usize) -> Result<SequenceDistribution> {
    check_horizon(horizon)?;
    check_loop(env, agent)?;
    let xs_all = all_sequences(env.n_in(), horizon);
    let ys_all = all_sequences(env.n_out(), horizon);
    let mut table = BTreeMap::new();
    for xs in &xs_all {
        for ys in &ys_all {
            let p = interface_prob(env, xs, ys)? * agent_interface_prob(agent, xs, ys);
            if p > PRUNE {
                table.insert([xs.clone(), ys.clone()].concat(), p);
            }
        }
    }
    SequenceDistribution::unchecked(horizon, loop_roster(env), table)
}

/// Joint of a single transducer driven by IID uniform inputs, with roster
/// `X`, `Y` and optionally the latent `R`.
pub fn transducer_joint(t: &Transducer, horizon: usize, include_latents: bool) -> Result<SequenceDistribution> {
    let net = crate::network::TransducerNetwork::new(
        vec![crate::network::ExternalInput {
            id: "X".into(),
            alphabet: t.in_alphabet().clone(),
        }],
        vec![crate::network::NetworkNode {
            id: "Y".into(),
            parents: vec!["X".into()],
            transducer: t.clone(),
        }],
    )?;
    let d = joint_process(&net, &InputDistribution::uniform(&net, horizon)?, horizon, include_latents)?;
    if !include_latents {
        return Ok(d);
    }
    let mut processes = d.processes.clone();
    processes[2].id = "R".into();
    SequenceDistribution::unchecked(horizon, processes, d.table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_eval() {
        let d = interface_eval(&fixtures::identity(2), &[0, 1]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&vec![0, 1]], 1.0);
    }

    #[test]
    fn coin_eval_is_uniform() {
        let d = interface_eval(&fixtures::fair_coin(), &[1, 0]).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.values().all(|&p| p == 0.25));
    }

    #[test]
    fn delayed_copy_eval() {
        // uniform prior over the stored bit: y_0 is a fair coin, y_1 = x_0
        let d = interface_eval(&fixtures::delayed_copy(None), &[1, 0]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[&vec![0, 1]], 0.5);
        assert_eq!(d[&vec![1, 1]], 0.5);
    }

    #[test]
    fn unknown_symbol_rejected() {
        assert!(matches!(
            interface_eval(&fixtures::identity(2), &[0, 2]),
            Err(Error::UnknownSymbol { .. })
        ));
    }

    #[test]
    fn joint_of_single_coin() {
        let net = fixtures::single_node(fixtures::coin_source());
        let d = joint_process(&net, &InputDistribution::none(), 2, true).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.table().values().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(d.processes().len(), 2);
        assert_eq!(d.seq_len(1), 3);
    }

    #[test]
    fn identity_chain_joint_agrees() {
        let d = joint_process(&fixtures::identity_chain(3), &InputDistribution::none(), 2, false).unwrap();
        assert_eq!(d.len(), 4);
        for k in d.table().keys() {
            let parts = d.split_key(k);
            assert!(parts.iter().all(|p| *p == parts[0]));
        }
    }

    #[test]
    fn horizon_zero_rejected() {
        let net = fixtures::identity_chain(2);
        assert!(matches!(
            joint_process(&net, &InputDistribution::none(), 0, false),
            Err(Error::Horizon { .. })
        ));
    }

    #[test]
    fn latents_marginalize_away() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let net = fixtures::random_network(&mut rng, &[vec![], vec![0]], 2, 2);
        let with = joint_process(&net, &InputDistribution::none(), 3, true).unwrap();
        let without = joint_process(&net, &InputDistribution::none(), 3, false).unwrap();
        let obs = with.observables();
        let obs: Vec<&str> = obs.iter().map(String::as_str).collect();
        assert!(with.marginalize(&obs).unwrap().max_abs_diff(&without) < 1e-15);
    }

    #[test]
    fn condition_identity_chain() {
        let d = joint_process(&fixtures::identity_chain(2), &InputDistribution::none(), 2, false).unwrap();
        let c = d.condition(&[("n0", vec![0, 1])]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.prob(&[vec![0, 1], vec![0, 1]]), 1.0);
        let all: Vec<String> = d.observables();
        let all: Vec<&str> = all.iter().map(String::as_str).collect();
        assert_eq!(d.marginalize(&all).unwrap(), d);
    }

    #[test]
    fn conditioning_on_impossible_value_fails() {
        let d = joint_process(&fixtures::identity_chain(2), &InputDistribution::none(), 1, false).unwrap();
        let mut broken = d.clone();
        broken.table.retain(|k, _| k[0] == 0);
        assert!(matches!(broken.condition(&[("n0", vec![1])]), Err(Error::ZeroProbability)));
    }

    #[test]
    fn constant_agent_identity_env() {
        let env = fixtures::identity(2);
        let agent = fixtures::constant_agent(0);
        let d = feedback_joint(&env, &agent, 3).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.prob(&[vec![0, 0, 0], vec![0, 0, 0]]), 1.0);
    }

    #[test]
    fn coin_agent_identity_env() {
        let env = fixtures::identity(2);
        let agent = fixtures::coin_agent();
        let d = feedback_joint(&env, &agent, 3).unwrap();
        assert_eq!(d.len(), 8);
        for (k, &p) in d.table() {
            assert_eq!(k[..3], k[3..]);
            assert!((p - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip() {
        let d = joint_process(&fixtures::identity_chain(2), &InputDistribution::none(), 2, true).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: SequenceDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn truncation_matches_shorter_joint() {
        let net = fixtures::random_network(
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3),
            &[vec![], vec![0]],
            2,
            2,
        );
        let long = joint_process(&net, &InputDistribution::none(), 3, true).unwrap();
        let short = joint_process(&net, &InputDistribution::none(), 2, true).unwrap();
        assert!(long.truncate(2).unwrap().max_abs_diff(&short) < 1e-15);
        assert!(long.truncate(4).is_err());
    }
}
