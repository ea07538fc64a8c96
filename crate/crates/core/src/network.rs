//! Feedforward networks of transducers and their flattening into a single
//! joint transducer.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::alphabet::{decode, encode, Alphabet};
use crate::compose::compose_pair;
use crate::error::{Error, Result};
use crate::transducer::{StochasticKernel, Transducer, TransducerJson};

/// An exogenous input process read by some nodes of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalInput {
    pub id: String,
    pub alphabet: Alphabet,
}

/// A node: its transducer reads the product of its parents' output
/// alphabets (unit alphabet when there are no parents).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkNode {
    pub id: String,
    pub parents: Vec<String>,
    pub transducer: Transducer,
}

/// A DAG of transducers listed in a causal order.
#[derive(Clone, Debug, PartialEq)]
pub struct TransducerNetwork {
    inputs: Vec<ExternalInput>,
    nodes: Vec<NetworkNode>,
}

/// Where a parent reference points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Input(usize),
    Node(usize),
}

impl TransducerNetwork {
    pub fn new(inputs: Vec<ExternalInput>, nodes: Vec<NetworkNode>) -> Result<Self> {
        let net = Self { inputs, nodes };
        net.validate()?;
        Ok(net)
    }

    pub fn from_nodes(nodes: Vec<NetworkNode>) -> Result<Self> {
        Self::new(Vec::new(), nodes)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for inp in &self.inputs {
            if seen.insert(&inp.id, inp.alphabet.size()).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate id `{}`", inp.id)));
            }
        }
        for node in &self.nodes {
            let mut expected = 1;
            let mut distinct = HashSet::new();
            for p in &node.parents {
                if !distinct.insert(p.as_str()) {
                    return Err(Error::InvalidNetwork(format!("node `{}` lists parent `{p}` twice", node.id)));
                }
                match seen.get(p.as_str()) {
                    Some(size) => expected *= size,
                    None => {
                        return Err(Error::InvalidNetwork(format!(
                            "node `{}` references `{p}` which is not an earlier node or input",
                            node.id
                        )))
                    }
                }
            }
            if node.transducer.n_in() != expected {
                return Err(Error::InvalidNetwork(format!(
                    "node `{}` reads {} symbols, its parents produce {expected}",
                    node.id,
                    node.transducer.n_in()
                )));
            }
            node.transducer
                .ensure_valid()
                .map_err(|e| Error::InvalidNetwork(format!("node `{}`: {e}", node.id)))?;
            if seen.insert(&node.id, node.transducer.n_out()).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate id `{}`", node.id)));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> &[ExternalInput] {
        &self.inputs
    }

    pub fn nodes(&self) -> &[NetworkNode] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn resolve(&self, id: &str) -> Option<Source> {
        self.inputs
            .iter()
            .position(|i| i.id == id)
            .map(Source::Input)
            .or_else(|| self.node_index(id).map(Source::Node))
    }

    /// Parents of node `n` resolved to inputs or earlier nodes.
    pub fn parent_sources(&self, n: usize) -> Vec<Source> {
        self.nodes[n]
            .parents
            .iter()
            .map(|p| self.resolve(p).expect("validated"))
            .collect()
    }

    pub fn input_alphabet(&self) -> Alphabet {
        let a: Vec<&Alphabet> = self.inputs.iter().map(|i| &i.alphabet).collect();
        Alphabet::product(&a)
    }

    pub fn output_alphabet(&self) -> Alphabet {
        let a: Vec<&Alphabet> = self.nodes.iter().map(|n| n.transducer.out_alphabet()).collect();
        Alphabet::product(&a)
    }

    pub fn input_sizes(&self) -> Vec<usize> {
        self.inputs.iter().map(|i| i.alphabet.size()).collect()
    }

    pub fn output_sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.transducer.n_out()).collect()
    }

    pub fn latent_sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.transducer.n_latent()).collect()
    }

    /// Directed edges `(parent id, child id)`, external inputs included.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents.iter().map(move |p| (p.clone(), n.id.clone())))
            .collect()
    }

    /// Input symbol read by node `n` given the current external input digits
    /// and node output digits.
    pub fn node_input(&self, n: usize, inputs: &[usize], outputs: &[usize]) -> usize {
        let node = &self.nodes[n];
        if node.parents.is_empty() {
            return 0;
        }
        let mut digits = Vec::with_capacity(node.parents.len());
        let mut radices = Vec::with_capacity(node.parents.len());
        for src in self.parent_sources(n) {
            match src {
                Source::Input(i) => {
                    digits.push(inputs[i]);
                    radices.push(self.inputs[i].alphabet.size());
                }
                Source::Node(j) => {
                    digits.push(outputs[j]);
                    radices.push(self.nodes[j].transducer.n_out());
                }
            }
        }
        encode(&digits, &radices)
    }
}

/// Joint transducer of the whole network: input is the product of the
/// external inputs, output the product of all node outputs, latent the
/// product of all node latents. Each node's kernel is selected by its
/// parents' current symbols.
pub fn network_flatten(net: &TransducerNetwork) -> Result<Transducer> {
    if net.nodes.len() == 1 && net.inputs.is_empty() {
        return Ok(net.nodes[0].transducer.clone());
    }
    let in_sizes = net.input_sizes();
    let out_sizes = net.output_sizes();
    let lat_sizes = net.latent_sizes();
    let nx: usize = in_sizes.iter().product();
    let ny: usize = out_sizes.iter().product();
    let nl: usize = lat_sizes.iter().product();
    let mut kernel = StochasticKernel::zeros(nx, nl, ny);

    for x in 0..nx {
        let xd = decode(x, &in_sizes);
        for y in 0..ny {
            let yd = decode(y, &out_sizes);
            let node_inputs: Vec<usize> = (0..net.nodes.len()).map(|n| net.node_input(n, &xd, &yd)).collect();
            for r in 0..nl {
                let rd = decode(r, &lat_sizes);
                // joint distribution over next latents: Kronecker product of
                // per-node rows
                let mut next = vec![1.0];
                for (n, node) in net.nodes.iter().enumerate() {
                    let row = node.transducer.kernel().block(node_inputs[n], rd[n], yd[n]);
                    next = next.iter().flat_map(|&a| row.iter().map(move |&b| a * b)).collect();
                    if next.iter().all(|&p| p == 0.0) {
                        break;
                    }
                }
                if next.len() == nl {
                    for (rn, p) in next.into_iter().enumerate() {
                        kernel.set(x, r, y, rn, p);
                    }
                }
            }
        }
    }

    let latents: Vec<&Alphabet> = net.nodes.iter().map(|n| n.transducer.latent_alphabet()).collect();
    let mut prior = vec![1.0];
    for node in &net.nodes {
        prior = prior
            .iter()
            .flat_map(|&a| node.transducer.prior().iter().map(move |&b| a * b))
            .collect();
    }
    Transducer::new(
        net.input_alphabet(),
        net.output_alphabet(),
        Alphabet::product(&latents),
        kernel,
        Some(prior),
    )
}

/// Builds the same joint transducer by folding [`compose_pair`] over the
/// nodes in causal order.
pub fn network_flatten_iterated(net: &TransducerNetwork) -> Result<Transducer> {
    let in_alpha = net.input_alphabet();
    let in_sizes = net.input_sizes();
    let mut acc: Option<Transducer> = None;
    let mut prefix_sizes: Vec<usize> = Vec::new();
    for (n, node) in net.nodes.iter().enumerate() {
        // lift node n to read (external input, outputs of nodes 0..n)
        let prefix_total: usize = prefix_sizes.iter().product();
        let t = &node.transducer;
        let (nr, nz) = (t.n_latent(), t.n_out());
        let mut kernel = StochasticKernel::zeros(in_alpha.size() * prefix_total, nr, nz);
        for x in 0..in_alpha.size() {
            let xd = decode(x, &in_sizes);
            for prev in 0..prefix_total {
                let pd = decode(prev, &prefix_sizes);
                let src = net.node_input(n, &xd, &pd);
                for r in 0..nr {
                    for z in 0..nz {
                        for (rn, &p) in t.kernel().block(src, r, z).iter().enumerate() {
                            kernel.set(x * prefix_total + prev, r, z, rn, p);
                        }
                    }
                }
            }
        }
        let in_alphabet = match &acc {
            None => in_alpha.clone(),
            Some(a) => Alphabet::product(&[&in_alpha, a.out_alphabet()]),
        };
        let lifted = Transducer::new(
            in_alphabet,
            t.out_alphabet().clone(),
            t.latent_alphabet().clone(),
            kernel,
            Some(t.prior().to_vec()),
        )?;
        acc = Some(match acc {
            None => lifted,
            Some(a) => compose_pair(&a, &lifted)?,
        });
        prefix_sizes.push(nz);
    }
    Ok(acc.expect("network has nodes"))
}

#[derive(Serialize, Deserialize)]
struct InputJson {
    id: String,
    alphabet: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: String,
    #[serde(default)]
    parents: Vec<String>,
    transducer: TransducerJson,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<InputJson>,
    nodes: Vec<NodeJson>,
}

impl Serialize for TransducerNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkJson {
            inputs: self
                .inputs
                .iter()
                .map(|i| InputJson {
                    id: i.id.clone(),
                    alphabet: i.alphabet.symbols().to_vec(),
                })
                .collect(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id.clone(),
                    parents: n.parents.clone(),
                    transducer: TransducerJson::from(&n.transducer),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransducerNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = NetworkJson::deserialize(d)?;
        let inputs = j
            .inputs
            .into_iter()
            .map(|i| {
                Ok(ExternalInput {
                    alphabet: Alphabet::new(i.id.clone(), i.alphabet)?,
                    id: i.id,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let nodes = j
            .nodes
            .into_iter()
            .map(|n| {
                Ok(NetworkNode {
                    transducer: Transducer::try_from(n.transducer)?,
                    id: n.id,
                    parents: n.parents,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        TransducerNetwork::new(inputs, nodes).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::process::interface_eval;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node_unchanged() {
        let t = fixtures::coin_source();
        let net = TransducerNetwork::from_nodes(vec![NetworkNode {
            id: "a".into(),
            parents: vec![],
            transducer: t.clone(),
        }])
        .unwrap();
        assert_eq!(network_flatten(&net).unwrap(), t);
    }

    #[test]
    fn identity_chain_copies() {
        let net = fixtures::identity_chain(3);
        let flat = network_flatten(&net).unwrap();
        let dist = interface_eval(&flat, &[0, 0]).unwrap();
        // outputs (x, x, x) at each step; the input is the unit symbol
        let all_zero = encode(&[0, 0, 0], &[2, 2, 2]);
        let all_one = encode(&[1, 1, 1], &[2, 2, 2]);
        assert_eq!(dist.len(), 4);
        for (k, p) in dist {
            assert!(k.iter().all(|&s| s == all_zero || s == all_one));
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_order_and_arity() {
        let id = fixtures::identity(2);
        let bad = TransducerNetwork::from_nodes(vec![NetworkNode {
            id: "a".into(),
            parents: vec!["b".into()],
            transducer: id.clone(),
        }]);
        assert!(matches!(bad, Err(Error::InvalidNetwork(_))));
        let arity = TransducerNetwork::from_nodes(vec![NetworkNode {
            id: "a".into(),
            parents: vec![],
            transducer: id,
        }]);
        assert!(matches!(arity, Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn flatten_matches_iterated_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = fixtures::random_network(&mut rng, &[vec![], vec![0], vec![0, 1]], 2, 2);
        let a = network_flatten(&net).unwrap();
        let b = network_flatten_iterated(&net).unwrap();
        assert_eq!(a.kernel().dims(), b.kernel().dims());
        for (p, q) in a.kernel().entries().iter().zip(b.kernel().entries()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = fixtures::random_network(&mut rng, &[vec![], vec![0]], 2, 2);
        let text = serde_json::to_string(&net).unwrap();
        let back: TransducerNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }
}
