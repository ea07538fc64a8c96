//! Finite-horizon causal states of an interface, unifilarity, the
//! history-copy transducer, and the composite causal-state check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::alphabet::{all_sequences, Alphabet};
use crate::compose::compose_pair;
use crate::error::{Error, Result};
use crate::process::Interface;
use crate::transducer::{StochasticKernel, Transducer};

/// Histories below this probability are ignored.
pub const MIN_HISTORY_PROB: f64 = 1e-12;

/// An input-output history `(x_{0:t}, y_{0:t})`.
pub type History = (Vec<usize>, Vec<usize>);

/// Future distributions of one history: `[future input][future output]`.
type Signature = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausalState {
    pub id: usize,
    pub representative: History,
    /// Probability mass of the histories assigned here under uniform IID
    /// inputs, normalized over all enumerated histories.
    pub occupation: f64,
}

/// Unifilar predictive machine read off an interface at a finite horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonTransducer {
    pub in_alphabet: Alphabet,
    pub out_alphabet: Alphabet,
    pub h_past: usize,
    pub h_future: usize,
    pub tolerance: f64,
    pub states: Vec<CausalState>,
    /// `(state, x, y) → next state`, for every positive-emission triple.
    pub transitions: BTreeMap<(usize, usize, usize), usize>,
    /// `emission[s][x][y] = Pr(y | s, x)`.
    pub emission: Vec<Vec<Vec<f64>>>,
    pub assignment: BTreeMap<History, usize>,
    /// State of the empty history.
    pub initial: usize,
}

fn interface_alphabets(iface: &Interface) -> Result<(Alphabet, Alphabet)> {
    match (iface.inputs(), iface.outputs()) {
        ([x], [y]) => Ok((x.alphabet.clone(), y.alphabet.clone())),
        _ => Err(Error::Precondition(
            "causal states need a single-input single-output interface".into(),
        )),
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>()
}

fn signature_distance(a: &Signature, b: &Signature) -> f64 {
    a.iter().zip(b).map(|(p, q)| tv(p, q)).fold(0.0, f64::max)
}

/// Drops the last future step of a signature.
fn truncate(sig: &Signature, nx: usize, ny: usize) -> Signature {
    sig.iter()
        .step_by(nx)
        .map(|dist| dist.chunks(ny).map(|c| c.iter().sum()).collect())
        .collect()
}

struct Oracle<'a> {
    iface: &'a Interface,
    nx: usize,
    ny: usize,
}

impl Oracle<'_> {
    fn prob(&self, xs: &[usize], ys: &[usize]) -> f64 {
        self.iface.prob(xs.len(), xs, ys)
    }

    fn signature(&self, h: &History, h_future: usize) -> Signature {
        let base = self.prob(&h.0, &h.1);
        let outs = all_sequences(self.ny, h_future);
        all_sequences(self.nx, h_future)
            .into_iter()
            .map(|xf| {
                let xs = [h.0.clone(), xf].concat();
                outs.iter()
                    .map(|yf| self.prob(&xs, &[h.1.clone(), yf.clone()].concat()) / base)
                    .collect()
            })
            .collect()
    }
}

/// Clusters histories up to length `h_past` by their conditional futures
/// over `h_future` steps, comparing each history against existing
/// representatives in canonical order.
#[allow(clippy::needless_range_loop)]
pub fn causal_states(iface: &Interface, h_past: usize, h_future: usize, tol: f64) -> Result<EpsilonTransducer> {
    if h_future == 0 || h_past + h_future > iface.horizon() {
        return Err(Error::Horizon {
            horizon: h_past + h_future,
            max: iface.horizon(),
        });
    }
    let (in_alphabet, out_alphabet) = interface_alphabets(iface)?;
    let (nx, ny) = (in_alphabet.size(), out_alphabet.size());
    let oracle = Oracle { iface, nx, ny };

    let mut histories: Vec<(History, f64)> = Vec::new();
    for t in 0..=h_past {
        let weight = (nx as f64).powi(-(t as i32));
        for xs in all_sequences(nx, t) {
            for ys in all_sequences(ny, t) {
                let p = oracle.prob(&xs, &ys);
                if p > MIN_HISTORY_PROB {
                    histories.push(((xs.clone(), ys), p * weight));
                }
            }
        }
    }
    let signatures: Vec<Signature> = histories.par_iter().map(|(h, _)| oracle.signature(h, h_future)).collect();

    let mut reps: Vec<usize> = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut mass: Vec<f64> = Vec::new();
    for (i, (h, m)) in histories.iter().enumerate() {
        let found = reps
            .iter()
            .position(|&r| signature_distance(&signatures[r], &signatures[i]) <= tol);
        let s = found.unwrap_or_else(|| {
            reps.push(i);
            mass.push(0.0);
            reps.len() - 1
        });
        mass[s] += m;
        assignment.insert(h.clone(), s);
    }
    let total: f64 = mass.iter().sum();

    let mut emission = vec![vec![vec![0.0; ny]; nx]; reps.len()];
    for (s, &r) in reps.iter().enumerate() {
        let sig = &signatures[r];
        let per_future = ny.pow(h_future as u32 - 1);
        let per_input = nx.pow(h_future as u32 - 1);
        for x in 0..nx {
            let dist = &sig[x * per_input];
            for y in 0..ny {
                emission[s][x][y] = dist[y * per_future..(y + 1) * per_future].iter().sum();
            }
        }
    }

    let mut transitions = BTreeMap::new();
    for (s, &r) in reps.iter().enumerate() {
        let (hx, hy) = &histories[r].0;
        for x in 0..nx {
            for y in 0..ny {
                if emission[s][x][y] <= MIN_HISTORY_PROB {
                    continue;
                }
                let ext: History = ([hx.clone(), vec![x]].concat(), [hy.clone(), vec![y]].concat());
                let next = match assignment.get(&ext) {
                    Some(&n) => n,
                    None => {
                        // representative at the past budget: match the
                        // extension by its shorter future
                        let sig = oracle.signature(&ext, h_future - 1);
                        (0..reps.len())
                            .map(|c| {
                                let short = truncate(&signatures[reps[c]], nx, ny);
                                (signature_distance(&short, &sig), c)
                            })
                            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
                            .1
                    }
                };
                transitions.insert((s, x, y), next);
            }
        }
    }

    let states = reps
        .iter()
        .enumerate()
        .map(|(s, &r)| CausalState {
            id: s,
            representative: histories[r].0.clone(),
            occupation: mass[s] / total,
        })
        .collect();
    Ok(EpsilonTransducer {
        in_alphabet,
        out_alphabet,
        h_past,
        h_future,
        tolerance: tol,
        states,
        transitions,
        emission,
        initial: assignment[&(Vec::new(), Vec::new())],
        assignment,
    })
}

impl EpsilonTransducer {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Histories whose one-step extension lands in a different state than
    /// the transition table predicts.
    pub fn transition_mismatches(&self) -> Vec<History> {
        let mut bad = Vec::new();
        for ((xs, ys), &s) in &self.assignment {
            if xs.len() >= self.h_past {
                continue;
            }
            for x in 0..self.in_alphabet.size() {
                for y in 0..self.out_alphabet.size() {
                    let ext = ([xs.clone(), vec![x]].concat(), [ys.clone(), vec![y]].concat());
                    if let Some(&n) = self.assignment.get(&ext) {
                        if self.transitions.get(&(s, x, y)) != Some(&n) {
                            bad.push(ext);
                        }
                    }
                }
            }
        }
        bad
    }

    pub fn consistent(&self) -> bool {
        self.transition_mismatches().is_empty()
    }

    /// The machine as a transducer starting in the empty-history state.
    /// Triples without a recorded transition keep their (negligible) mass
    /// on the current state.
    pub fn to_transducer(&self) -> Result<Transducer> {
        let (nx, ny, ns) = (self.in_alphabet.size(), self.out_alphabet.size(), self.n_states());
        let mut kernel = StochasticKernel::zeros(nx, ns, ny);
        for s in 0..ns {
            for x in 0..nx {
                let row = &self.emission[s][x];
                let total: f64 = row.iter().sum();
                for (y, &p) in row.iter().enumerate() {
                    let next = self.transitions.get(&(s, x, y)).copied().unwrap_or(s);
                    kernel.set(x, s, y, next, p / total);
                }
            }
        }
        let latent = Alphabet::new("state", (0..ns).map(|s| format!("s{s}")))?;
        Transducer::new(self.in_alphabet.clone(), self.out_alphabet.clone(), latent, kernel, None)?.starting_in(self.initial)
    }
}

#[derive(Serialize)]
struct TransitionJson {
    from: usize,
    x: String,
    y: String,
    to: usize,
    p: f64,
}

#[derive(Serialize)]
struct StateJson {
    id: usize,
    representative: BTreeMap<&'static str, String>,
    occupation: f64,
}

#[derive(Serialize)]
struct EpsilonJson {
    h_past: usize,
    h_future: usize,
    tolerance: f64,
    initial: usize,
    states: Vec<StateJson>,
    transitions: Vec<TransitionJson>,
    consistent: bool,
}

impl Serialize for EpsilonTransducer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EpsilonJson {
            h_past: self.h_past,
            h_future: self.h_future,
            tolerance: self.tolerance,
            initial: self.initial,
            states: self
                .states
                .iter()
                .map(|st| StateJson {
                    id: st.id,
                    representative: [
                        ("x", self.in_alphabet.format_seq(&st.representative.0)),
                        ("y", self.out_alphabet.format_seq(&st.representative.1)),
                    ]
                    .into_iter()
                    .collect(),
                    occupation: st.occupation,
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|(&(from, x, y), &to)| TransitionJson {
                    from,
                    x: self.in_alphabet.symbol(x).to_string(),
                    y: self.out_alphabet.symbol(y).to_string(),
                    to,
                    p: self.emission[from][x][y],
                })
                .collect(),
            consistent: self.consistent(),
        }
        .serialize(s)
    }
}

/// True when every `(r, x, y)` with emission above `tol` sends its mass to
/// exactly one next state.
pub fn is_unifilar(t: &Transducer, tol: f64) -> bool {
    let k = t.kernel();
    (0..t.n_in()).all(|x| {
        (0..t.n_latent()).all(|r| {
            (0..t.n_out()).all(|y| {
                let block = k.block(x, r, y);
                let emit: f64 = block.iter().sum();
                emit <= tol || block.iter().filter(|&&p| p > tol).count() == 1
            })
        })
    })
}

/// Transducer whose latent state is the whole history so far, reproducing
/// `iface` exactly up to its horizon. Zero-probability and full-length
/// histories fall into an absorbing sink.
pub fn history_copy_transducer(iface: &Interface) -> Result<Transducer> {
    let (in_alphabet, out_alphabet) = interface_alphabets(iface)?;
    let (nx, ny, h) = (in_alphabet.size(), out_alphabet.size(), iface.horizon());
    let mut index: BTreeMap<History, usize> = BTreeMap::new();
    let mut order: Vec<History> = Vec::new();
    for t in 0..=h {
        for xs in all_sequences(nx, t) {
            for ys in all_sequences(ny, t) {
                if iface.prob(t, &xs, &ys) > 0.0 {
                    index.insert((xs.clone(), ys.clone()), order.len());
                    order.push((xs.clone(), ys));
                }
            }
        }
    }
    let sink = order.len();
    let ns = sink + 1;
    let mut kernel = StochasticKernel::zeros(nx, ns, ny);
    for x in 0..nx {
        kernel.set(x, sink, 0, sink, 1.0);
        for (r, (hx, hy)) in order.iter().enumerate() {
            let t = hx.len();
            if t == h {
                kernel.set(x, r, 0, r, 1.0);
                continue;
            }
            let base = iface.prob(t, hx, hy);
            let xs = [hx.clone(), vec![x]].concat();
            for y in 0..ny {
                let ys = [hy.clone(), vec![y]].concat();
                let p = iface.prob(t + 1, &xs, &ys) / base;
                if p > 0.0 {
                    kernel.set(x, r, y, index[&(xs.clone(), ys)], p);
                }
            }
        }
    }
    let latent = Alphabet::new("history", (0..ns).map(|r| format!("h{r}")))?;
    Transducer::new(in_alphabet, out_alphabet, latent, kernel, None)?.starting_in(0)
}

/// Outcome of comparing the composed ε-machines with the causal states of
/// the composite interface.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositeReport {
    pub verdict: bool,
    pub horizon: usize,
    pub h_past: usize,
    pub h_future: usize,
    pub raw_product_states: usize,
    pub reachable_product_states: usize,
    pub direct_states: usize,
    pub bijection: bool,
    pub max_prediction_gap: f64,
}

/// Future distributions of a transducer started from a point mass on `r`.
fn state_signature(v: &Transducer, r: usize, h_future: usize) -> Signature {
    let mut start = vec![0.0; v.n_latent()];
    start[r] = 1.0;
    let outs = all_sequences(v.n_out(), h_future);
    all_sequences(v.n_in(), h_future)
        .into_iter()
        .map(|xf| {
            outs.iter()
                .map(|yf| {
                    let mut w = start.clone();
                    for (&x, &y) in xf.iter().zip(yf) {
                        w = v.apply(&w, x, y);
                    }
                    w.iter().sum()
                })
                .collect()
        })
        .collect()
}

/// Composes two ε-machines, computes the composite interface's causal
/// states directly with `h_past = H / 2`, and checks that reachable
/// product states correspond one-to-one with the direct states and make
/// the same predictions.
pub fn verify_composite_causal_states(
    t_eps: &EpsilonTransducer,
    u_eps: &EpsilonTransducer,
    horizon: usize,
    tol: f64,
) -> Result<CompositeReport> {
    let (t, u) = (t_eps.to_transducer()?, u_eps.to_transducer()?);
    let v = compose_pair(&t, &u)?;
    let h_past = horizon / 2;
    let h_future = horizon - h_past;
    let iface = Interface::from_transducer(&v, horizon)?;
    let direct = causal_states(&iface, h_past, h_future, tol)?;

    let start = v
        .prior()
        .iter()
        .position(|&p| p == 1.0)
        .ok_or_else(|| Error::Precondition("composed machine must start in one state".into()))?;
    let mut relation: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut reachable = BTreeSet::new();
    let mut queue: VecDeque<(usize, History)> = VecDeque::from([(start, (Vec::new(), Vec::new()))]);
    while let Some((r, h)) = queue.pop_front() {
        reachable.insert(r);
        if let Some(&s) = direct.assignment.get(&h) {
            relation.insert((r, s));
        }
        if h.0.len() == h_past {
            continue;
        }
        for x in 0..v.n_in() {
            for y in 0..v.n_out() {
                for (rn, &p) in v.kernel().block(x, r, y).iter().enumerate() {
                    if p > MIN_HISTORY_PROB {
                        let ext = ([h.0.clone(), vec![x]].concat(), [h.1.clone(), vec![y]].concat());
                        if direct.assignment.contains_key(&ext) {
                            queue.push_back((rn, ext));
                        }
                    }
                }
            }
        }
    }
    let functional = |pairs: &BTreeSet<(usize, usize)>, left: bool| {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        pairs.iter().all(|&(a, b)| {
            let (k, val) = if left { (a, b) } else { (b, a) };
            *seen.entry(k).or_insert(val) == val
        })
    };
    let covered: BTreeSet<usize> = relation.iter().map(|&(_, s)| s).collect();
    let bijection = functional(&relation, true)
        && functional(&relation, false)
        && covered.len() == direct.n_states()
        && relation.len() == reachable.len();
    let mut gap: f64 = 0.0;
    for &(r, s) in &relation {
        let rep = &direct.states[s].representative;
        let want = Oracle {
            iface: &iface,
            nx: v.n_in(),
            ny: v.n_out(),
        }
        .signature(rep, h_future);
        gap = gap.max(signature_distance(&state_signature(&v, r, h_future), &want));
    }
    Ok(CompositeReport {
        verdict: bijection && gap <= tol,
        horizon,
        h_past,
        h_future,
        raw_product_states: v.n_latent(),
        reachable_product_states: reachable.len(),
        direct_states: direct.n_states(),
        bijection,
        max_prediction_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::process::interface_prob;
    use crate::DEFAULT_TOL;

    fn eps(t: &Transducer, h_past: usize, h_future: usize) -> EpsilonTransducer {
        let iface = Interface::from_transducer(t, h_past + h_future).unwrap();
        causal_states(&iface, h_past, h_future, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn coin_has_one_state() {
        let e = eps(&fixtures::fair_coin(), 2, 2);
        assert_eq!(e.n_states(), 1);
        assert!(e.consistent());
    }

    #[test]
    fn delayed_copy_has_two_states() {
        let e = eps(&fixtures::delayed_copy(Some(0)), 2, 2);
        assert_eq!(e.n_states(), 2);
        assert!(e.consistent());
        // a uniform initial bit adds a transient start state
        assert_eq!(eps(&fixtures::delayed_copy(None), 2, 2).n_states(), 3);
    }

    #[test]
    fn alternator_cycles() {
        let e = eps(&fixtures::alternator(), 2, 2);
        assert_eq!(e.n_states(), 2);
        let a = e.transitions[&(e.initial, 0, 0)];
        assert_eq!(e.transitions[&(a, 0, 1)], e.initial);
    }

    #[test]
    fn epsilon_machine_reproduces_interface() {
        let t = fixtures::delayed_copy(Some(1));
        let m = eps(&t, 2, 2).to_transducer().unwrap();
        assert!(is_unifilar(&m, DEFAULT_TOL));
        for xs in all_sequences(2, 2) {
            for ys in all_sequences(2, 2) {
                let gap = interface_prob(&t, &xs, &ys).unwrap() - interface_prob(&m, &xs, &ys).unwrap();
                assert!(gap.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unifilarity() {
        assert!(is_unifilar(&fixtures::delayed_copy(None), DEFAULT_TOL));
        let mut k = StochasticKernel::zeros(1, 2, 1);
        k.set(0, 0, 0, 0, 0.5);
        k.set(0, 0, 0, 1, 0.5);
        k.set(0, 1, 0, 1, 1.0);
        let split = Transducer::new(Alphabet::unit(), Alphabet::unit(), Alphabet::binary("r"), k, None).unwrap();
        assert!(!is_unifilar(&split, DEFAULT_TOL));
    }

    #[test]
    fn history_copy_reproduces() {
        let t = fixtures::delayed_copy(None);
        let iface = Interface::from_transducer(&t, 3).unwrap();
        let h = history_copy_transducer(&iface).unwrap();
        let back = Interface::from_transducer(&h, 3).unwrap();
        for (key, dist) in iface.rows() {
            for (ys, &p) in dist {
                assert!((back.prob(key.0, &key.1, ys) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_delayed_copy_xor() {
        let t = eps(&fixtures::delayed_copy(Some(0)), 2, 2);
        let u = eps(&fixtures::xor_memoryless(), 2, 2);
        let r = verify_composite_causal_states(&t, &u, 4, DEFAULT_TOL).unwrap();
        assert!(r.verdict, "{r:?}");
        assert_eq!((r.reachable_product_states, r.direct_states), (2, 2));
    }

    #[test]
    fn composite_identities() {
        let t = eps(&fixtures::identity(2), 2, 2);
        let u = eps(&fixtures::copy_pair(), 2, 2);
        let r = verify_composite_causal_states(&t, &u, 4, DEFAULT_TOL).unwrap();
        assert!(r.verdict);
        assert_eq!(r.direct_states, 1);
    }
}
