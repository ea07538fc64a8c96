//! Exact information measures on sequence distributions, in bits.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{accumulate, Role, SequenceDistribution};

/// Symbols `start..end` of one process's sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slice {
    pub process: String,
    pub start: usize,
    pub end: usize,
}

impl Slice {
    pub fn new(process: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            process: process.into(),
            start,
            end,
        }
    }
}

fn slices(ids: &[&str], start: usize, end: usize) -> Vec<Slice> {
    ids.iter().map(|id| Slice::new(*id, start, end)).collect()
}

/// Resolves slices to `(offset, len)` spans of a key.
fn spans(d: &SequenceDistribution, set: &[Slice]) -> Result<Vec<(usize, usize)>> {
    set.iter()
        .map(|s| {
            let i = d.index_of(&s.process)?;
            let len = d.seq_len(i);
            if s.start > s.end || s.end > len {
                return Err(Error::InvalidSlice(format!(
                    "{}[{}..{}] outside 0..{len}",
                    s.process, s.start, s.end
                )));
            }
            Ok((d.offset(i) + s.start, s.end - s.start))
        })
        .collect()
}

fn project(key: &[usize], spans: &[(usize, usize)], out: &mut Vec<usize>) {
    out.clear();
    for &(o, l) in spans {
        out.extend_from_slice(&key[o..o + l]);
    }
}

/// `I[A; B | C]` in bits, clamped at zero.
pub fn cmi(d: &SequenceDistribution, a: &[Slice], b: &[Slice], c: &[Slice]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptySet("A"));
    }
    if b.is_empty() {
        return Err(Error::EmptySet("B"));
    }
    let (sa, sb, sc) = (spans(d, a)?, spans(d, b)?, spans(d, c)?);
    let (mut ka, mut kb, mut kc) = (Vec::new(), Vec::new(), Vec::new());
    let abc = accumulate(d.table().iter().map(|(k, &p)| {
        project(k, &sa, &mut ka);
        project(k, &sb, &mut kb);
        project(k, &sc, &mut kc);
        ((ka.clone(), kb.clone(), kc.clone()), p)
    }));
    let mut ac: HashMap<(&[usize], &[usize]), f64> = HashMap::new();
    let mut bc: HashMap<(&[usize], &[usize]), f64> = HashMap::new();
    let mut pc: HashMap<&[usize], f64> = HashMap::new();
    for ((ka, kb, kc), &p) in &abc {
        *ac.entry((ka, kc)).or_insert(0.0) += p;
        *bc.entry((kb, kc)).or_insert(0.0) += p;
        *pc.entry(kc).or_insert(0.0) += p;
    }
    let mut total = 0.0;
    for ((ka, kb, kc), &p) in &abc {
        if p <= 0.0 {
            continue;
        }
        let num = p * pc[kc.as_slice()];
        let den = ac[&(ka.as_slice(), kc.as_slice())] * bc[&(kb.as_slice(), kc.as_slice())];
        total += p * (num / den).log2();
    }
    Ok(total.max(0.0))
}

/// A horizon-qualified measure with its per-step terms (`t = 1..H-1`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub measure: String,
    pub horizon: usize,
    pub tolerance: f64,
    pub total_bits: f64,
    pub per_t_terms: Vec<f64>,
}

impl MeasureReport {
    fn from_terms(measure: &str, horizon: usize, tolerance: f64, per_t_terms: Vec<f64>) -> Self {
        Self {
            measure: measure.into(),
            horizon,
            tolerance,
            total_bits: per_t_terms.iter().sum(),
            per_t_terms,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.total_bits <= self.tolerance
    }
}

fn check_disjoint(sets: &[&[&str]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(id) = a.iter().find(|id| b.contains(id)) {
                return Err(Error::Overlap(id.to_string()));
            }
        }
    }
    Ok(())
}

fn check_roles(d: &SequenceDistribution, ids: &[&str], role: Role) -> Result<()> {
    for id in ids {
        let p = d.process(id)?;
        if p.role != role {
            return Err(Error::RoleMismatch(format!("`{id}` is {:?}, expected {role:?}", p.role)));
        }
    }
    Ok(())
}

/// `Σ_{t=1}^{H-1} I[Y_{0:t}; X_{t:H} | X_{0:t}]`: how much past outputs
/// know about future inputs.
pub fn acausality(d: &SequenceDistribution, x: &[&str], y: &[&str], tol: f64) -> Result<MeasureReport> {
    if y.is_empty() {
        return Err(Error::EmptySet("Y"));
    }
    check_disjoint(&[x, y])?;
    check_roles(d, x, Role::Observable)?;
    check_roles(d, y, Role::Observable)?;
    let h = d.horizon();
    let terms = if x.is_empty() {
        vec![0.0; h.saturating_sub(1)]
    } else {
        (1..h)
            .into_par_iter()
            .map(|t| cmi(d, &slices(y, 0, t), &slices(x, t, h), &slices(x, 0, t)))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MeasureReport::from_terms("acausality", h, tol, terms))
}

/// `Σ_{t=1}^{H-1} I[R_{t+1:H+1}, Y_{t:H}; Y_{0:t}, R_{0:t}, X_{0:t} | X_{t:H}, R_t]`:
/// zero exactly when `(X, Y, R)` is produced by a transducer with latent `R`.
pub fn intransducibility(d: &SequenceDistribution, x: &[&str], y: &[&str], r: &[&str], tol: f64) -> Result<MeasureReport> {
    if y.is_empty() {
        return Err(Error::EmptySet("Y"));
    }
    check_disjoint(&[x, y, r])?;
    check_roles(d, x, Role::Observable)?;
    check_roles(d, y, Role::Observable)?;
    check_roles(d, r, Role::Latent)?;
    let h = d.horizon();
    let terms = (1..h)
        .into_par_iter()
        .map(|t| {
            let future = [slices(r, t + 1, h + 1), slices(y, t, h)].concat();
            let past = [slices(y, 0, t), slices(r, 0, t), slices(x, 0, t)].concat();
            let given = [slices(x, t, h), slices(r, t, t + 1)].concat();
            cmi(d, &future, &past, &given)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureReport::from_terms("intransducibility", h, tol, terms))
}

/// Nonanticipation verdict with the largest single-step violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonanticipationReport {
    pub nonanticipatory: bool,
    pub max_term_bits: f64,
    /// Step of the largest term; `None` when there are no terms.
    pub max_term_t: Option<usize>,
    pub report: MeasureReport,
}

pub fn is_nonanticipatory(d: &SequenceDistribution, x: &[&str], y: &[&str], tol: f64) -> Result<NonanticipationReport> {
    let report = acausality(d, x, y, tol)?;
    let (max_term_t, max_term_bits) =
        report.per_t_terms.iter().enumerate().fold(
            (None, 0.0),
            |(bt, bv), (i, &v)| if bt.is_none() || v > bv { (Some(i + 1), v) } else { (bt, bv) },
        );
    Ok(NonanticipationReport {
        nonanticipatory: report.is_zero(),
        max_term_bits,
        max_term_t,
        report,
    })
}
