//! Peel-off decomposition of a joint process into an ordered list of
//! modules, each transducible from the modules before it.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::{acausality, cmi, intransducibility, Slice};
use crate::process::SequenceDistribution;

pub const MAX_OBSERVABLES: usize = 12;
pub const MAX_LATENTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Intransducibility,
    Acausality,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Module {
    pub observables: Vec<String>,
    pub latents: Vec<String>,
    /// Measure of transducing this module from the modules before it, as
    /// evaluated when it was peeled. `None` for the head module.
    pub residual_bits: Option<f64>,
}

/// Modules in causal order: module `n` is influenced only by modules `< n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionResult {
    pub modules: Vec<Module>,
    pub mode: Mode,
    pub horizon: usize,
    pub tolerance: f64,
    /// Latents never peeled with any module; they sit in the head module.
    pub unassigned_latents: Vec<String>,
}

impl DecompositionResult {
    /// Index of the module holding observable `id`.
    pub fn module_of(&self, id: &str) -> Option<usize> {
        self.modules.iter().position(|m| m.observables.iter().any(|o| o == id))
    }
}

/// One candidate split: `o` is peeled off and transduced from the rest,
/// with `o_lat` as its memory. Both are bitmasks over the original lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Candidate {
    o: u32,
    o_lat: u32,
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Submasks of `within` with exactly `k` bits, in lexicographic order of
/// their sorted index tuples.
fn subsets_of_size(within: u32, n: usize, k: usize) -> Vec<u32> {
    let pool = members(within, n);
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec(pool: &[usize], start: usize, k: usize, pick: &mut Vec<usize>, out: &mut Vec<u32>) {
        if pick.len() == k {
            out.push(pick.iter().fold(0, |m, &i| m | (1 << i)));
            return;
        }
        for j in start..pool.len() {
            pick.push(pool[j]);
            rec(pool, j + 1, k, pick, out);
            pick.pop();
        }
    }
    rec(&pool, 0, k, &mut pick, &mut out);
    out
}

struct Search<'a> {
    d: &'a SequenceDistribution,
    obs: Vec<&'a str>,
    lat: Vec<&'a str>,
    mode: Mode,
    tol: f64,
    memo: Mutex<HashMap<(u32, Candidate), f64>>,
}

impl<'a> Search<'a> {
    fn new(d: &'a SequenceDistribution, obs: &[&'a str], lat: &[&'a str], mode: Mode, tol: f64) -> Result<Self> {
        if obs.len() > MAX_OBSERVABLES || lat.len() > MAX_LATENTS {
            return Err(Error::Guard(format!(
                "decomposition over {} observables and {} latents exceeds {MAX_OBSERVABLES}/{MAX_LATENTS}",
                obs.len(),
                lat.len()
            )));
        }
        if obs.is_empty() {
            return Err(Error::EmptySet("observables"));
        }
        for id in obs.iter().chain(lat) {
            d.index_of(id)?;
        }
        Ok(Self {
            d,
            obs: obs.to_vec(),
            lat: lat.to_vec(),
            mode,
            tol,
            memo: Mutex::new(HashMap::new()),
        })
    }

    fn names(&self, mask: u32, lat: bool) -> Vec<&'a str> {
        let list = if lat { &self.lat } else { &self.obs };
        members(mask, list.len()).into_iter().map(|i| list[i]).collect()
    }

    /// Measure of transducing `c.o` from `rest - c.o` with memory `c.o_lat`.
    fn measure(&self, rest: u32, c: Candidate) -> Result<f64> {
        if let Some(&v) = self.memo.lock().unwrap().get(&(rest, c)) {
            return Ok(v);
        }
        let x = self.names(rest & !c.o, false);
        let y = self.names(c.o, false);
        let v = match self.mode {
            Mode::Acausality => acausality(self.d, &x, &y, self.tol)?.total_bits,
            Mode::Intransducibility => intransducibility(self.d, &x, &y, &self.names(c.o_lat, true), self.tol)?.total_bits,
        };
        self.memo.lock().unwrap().insert((rest, c), v);
        Ok(v)
    }

    /// Smallest qualifying candidate within `(rest, rest_lat)`, evaluating
    /// one size class at a time and keeping the first in the total order.
    fn smallest(&self, rest: u32, rest_lat: u32) -> Result<Option<(Candidate, f64)>> {
        let n_rest = rest.count_ones() as usize;
        let n_lat = match self.mode {
            Mode::Acausality => 0,
            Mode::Intransducibility => rest_lat.count_ones() as usize,
        };
        for size in 1..n_rest {
            let os = subsets_of_size(rest, self.obs.len(), size);
            for lat_size in 0..=n_lat {
                let lats = subsets_of_size(rest_lat, self.lat.len(), lat_size);
                let class: Vec<Candidate> = os
                    .iter()
                    .flat_map(|&o| lats.iter().map(move |&o_lat| Candidate { o, o_lat }))
                    .collect();
                let values = class.par_iter().map(|&c| self.measure(rest, c)).collect::<Result<Vec<_>>>()?;
                if let Some(i) = values.iter().position(|&v| v <= self.tol) {
                    return Ok(Some((class[i], values[i])));
                }
            }
        }
        Ok(None)
    }

    fn full(n: usize) -> u32 {
        if n == 0 {
            0
        } else {
            u32::MAX >> (32 - n)
        }
    }

    fn run(&self) -> Result<DecompositionResult> {
        let mut rest = Self::full(self.obs.len());
        let mut rest_lat = Self::full(self.lat.len());
        let mut peeled = Vec::new();
        while let Some((c, v)) = self.smallest(rest, rest_lat)? {
            peeled.push(Module {
                observables: self.names(c.o, false).into_iter().map(String::from).collect(),
                latents: self.names(c.o_lat, true).into_iter().map(String::from).collect(),
                residual_bits: Some(v),
            });
            rest &= !c.o;
            rest_lat &= !c.o_lat;
        }
        let unassigned: Vec<String> = self.names(rest_lat, true).into_iter().map(String::from).collect();
        let mut modules = vec![Module {
            observables: self.names(rest, false).into_iter().map(String::from).collect(),
            latents: unassigned.clone(),
            residual_bits: None,
        }];
        modules.extend(peeled.into_iter().rev());
        Ok(DecompositionResult {
            modules,
            mode: self.mode,
            horizon: self.d.horizon(),
            tolerance: self.tol,
            unassigned_latents: unassigned,
        })
    }
}

/// True when no nonempty proper subset of `obs`, with any subset of `lat`
/// as memory, is transducible from the remaining observables.
pub fn is_prime_with_latents(d: &SequenceDistribution, obs: &[&str], lat: &[&str], tol: f64) -> Result<bool> {
    let s = Search::new(d, obs, lat, Mode::Intransducibility, tol)?;
    Ok(s.smallest(Search::full(obs.len()), Search::full(lat.len()))?.is_none())
}

/// Repeatedly peels the smallest transducible `(O, O')` by intransducibility.
pub fn decompose_with_latents(d: &SequenceDistribution, obs: &[&str], lat: &[&str], tol: f64) -> Result<DecompositionResult> {
    Search::new(d, obs, lat, Mode::Intransducibility, tol)?.run()
}

/// True when no nonempty proper subset of `obs` is nonanticipatory given
/// the rest.
pub fn is_prime_observable(d: &SequenceDistribution, obs: &[&str], tol: f64) -> Result<bool> {
    let s = Search::new(d, obs, &[], Mode::Acausality, tol)?;
    Ok(s.smallest(Search::full(obs.len()), 0)?.is_none())
}

/// Repeatedly peels the smallest `O` by acausality.
pub fn decompose_observable(d: &SequenceDistribution, obs: &[&str], tol: f64) -> Result<DecompositionResult> {
    Search::new(d, obs, &[], Mode::Acausality, tol)?.run()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependencyEdge {
    pub from: usize,
    pub to: usize,
    pub bits: f64,
}

/// Edge `m → m'` (`m < m'`) when module `m'`'s sequences depend on module
/// `m`'s even after conditioning on every other module before `m'`.
pub fn dependency_graph(result: &DecompositionResult, d: &SequenceDistribution, tol: f64) -> Result<Vec<DependencyEdge>> {
    let h = d.horizon();
    let whole = |m: &Module| -> Vec<Slice> { m.observables.iter().map(|id| Slice::new(id.clone(), 0, h)).collect() };
    let pairs: Vec<(usize, usize)> = (0..result.modules.len())
        .flat_map(|to| (0..to).map(move |from| (from, to)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(from, to)| {
            let given: Vec<Slice> = (0..to)
                .filter(|&k| k != from)
                .flat_map(|k| whole(&result.modules[k]))
                .collect();
            cmi(d, &whole(&result.modules[from]), &whole(&result.modules[to]), &given)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v > tol)
        .map(|((from, to), bits)| DependencyEdge { from, to, bits })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::process::{joint_process, InputDistribution};
    use crate::DEFAULT_TOL;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coins() -> SequenceDistribution {
        let net = crate::network::TransducerNetwork::from_nodes(vec![
            crate::network::NetworkNode {
                id: "a".into(),
                parents: vec![],
                transducer: fixtures::coin_source(),
            },
            crate::network::NetworkNode {
                id: "b".into(),
                parents: vec![],
                transducer: fixtures::coin_source(),
            },
        ])
        .unwrap();
        joint_process(&net, &InputDistribution::none(), 3, true).unwrap()
    }

    #[test]
    fn subsets_in_lex_order() {
        assert_eq!(subsets_of_size(0b111, 3, 2), vec![0b011, 0b101, 0b110]);
        assert_eq!(subsets_of_size(0b101, 3, 1), vec![0b001, 0b100]);
        assert_eq!(subsets_of_size(0b101, 3, 0), vec![0]);
    }

    #[test]
    fn independent_coins_split() {
        let d = coins();
        assert!(!is_prime_with_latents(&d, &["a", "b"], &["a.R", "b.R"], DEFAULT_TOL).unwrap());
        let r = decompose_observable(&d, &["a", "b"], DEFAULT_TOL).unwrap();
        let obs: Vec<_> = r.modules.iter().map(|m| m.observables.clone()).collect();
        // `a` is the first singleton that qualifies, so it is peeled last-in-order
        assert_eq!(obs, vec![vec!["b".to_string()], vec!["a".to_string()]]);
        assert!(dependency_graph(&r, &d, DEFAULT_TOL).unwrap().is_empty());
    }

    #[test]
    fn single_process_is_prime() {
        let d = coins();
        assert!(is_prime_observable(&d, &["a"], DEFAULT_TOL).unwrap());
        let r = decompose_with_latents(&d, &["a"], &["a.R"], DEFAULT_TOL).unwrap();
        assert_eq!(r.modules.len(), 1);
        assert_eq!(r.unassigned_latents, vec!["a.R".to_string()]);
    }

    #[test]
    fn entangled_outputs_are_prime() {
        let t = fixtures::entangled_pair();
        let d = crate::process::transducer_joint(&t, 3, false).unwrap();
        // split the product output into two observables
        let bit = crate::alphabet::Alphabet::binary("bit");
        let split = d.split_process("Y", &[("a", bit.clone()), ("b", bit)]).unwrap();
        assert!(is_prime_with_latents(&split, &["a", "b"], &[], DEFAULT_TOL).unwrap());
    }

    #[test]
    fn chain_order_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = fixtures::random_network(&mut rng, &[vec![], vec![0]], 2, 2);
        let d = joint_process(&net, &InputDistribution::none(), 3, true).unwrap();
        let r = decompose_with_latents(&d, &["n0", "n1"], &["n0.R", "n1.R"], DEFAULT_TOL).unwrap();
        assert!(r.module_of("n0").unwrap() <= r.module_of("n1").unwrap());
        let o = decompose_observable(&d, &["n0", "n1"], DEFAULT_TOL).unwrap();
        assert!(o.module_of("n0").unwrap() <= o.module_of("n1").unwrap());
    }

    #[test]
    fn anticipatory_joint_reverses() {
        // X_t = Y_{t-1} plus a fresh first bit, so X transduces from Y
        let d = fixtures::anticipatory_joint(3);
        let r = decompose_observable(&d, &["X", "Y"], DEFAULT_TOL).unwrap();
        assert_eq!(r.module_of("Y"), Some(0));
        assert_eq!(r.module_of("X"), Some(1));
    }

    #[test]
    fn mutual_anticipation_is_prime() {
        let d = fixtures::mutual_anticipation(4);
        assert!(is_prime_observable(&d, &["A", "B"], DEFAULT_TOL).unwrap());
        assert_eq!(decompose_observable(&d, &["A", "B"], DEFAULT_TOL).unwrap().modules.len(), 1);
    }

    #[test]
    fn guard_trips() {
        let d = coins();
        let many: Vec<&str> = vec!["a"; 13];
        assert!(matches!(decompose_observable(&d, &many, DEFAULT_TOL), Err(Error::Guard(_))));
    }
}
