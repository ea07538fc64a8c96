//! Interface-preserving coarse-graining: dropping downstream blocks,
//! conditioning on upstream blocks, pruning node clusters and extracting
//! per-module interfaces.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::decompose::DecompositionResult;
use crate::error::{Error, Result};
use crate::info::{acausality, MeasureReport};
use crate::network::{ExternalInput, NetworkNode, Source, TransducerNetwork};
use crate::process::{latent_process_id, Interface, ProcessInfo, SequenceDistribution};

fn observable_block(d: &SequenceDistribution, a: usize, b: usize) -> Result<Vec<String>> {
    let obs = d.observables();
    if a > b || b > obs.len() {
        return Err(Error::InvalidCut(format!("block {a}..{b} outside 0..{}", obs.len())));
    }
    Ok(obs[a..b].to_vec())
}

/// Keeps the first `b` observables (in roster order) together with their
/// own latents and marginalizes out everything downstream.
pub fn simplify_top(d: &SequenceDistribution, b: usize) -> Result<SequenceDistribution> {
    let kept = observable_block(d, 0, b)?;
    if kept.is_empty() {
        return Err(Error::InvalidCut("nothing left above the cut".into()));
    }
    let mut ids: Vec<String> = kept.clone();
    ids.extend(
        d.latents()
            .into_iter()
            .filter(|l| kept.iter().any(|o| latent_process_id(o) == *l)),
    );
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    d.marginalize(&ids)
}

/// Conditional interface of the observables from `a` on, given the first
/// `a` observables. Latents are dropped.
pub fn simplify_bottom(d: &SequenceDistribution, a: usize) -> Result<Interface> {
    let n = d.observables().len();
    let given = observable_block(d, 0, a)?;
    let target = observable_block(d, a, n)?;
    if target.is_empty() {
        return Err(Error::InvalidCut("nothing left below the cut".into()));
    }
    let g: Vec<&str> = given.iter().map(String::as_str).collect();
    let t: Vec<&str> = target.iter().map(String::as_str).collect();
    Interface::from_joint(d, &g, &t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneVerdict {
    /// No outgoing edges: the cluster is summed out.
    Marginalize,
    /// No incoming edges: the cluster's outputs become external inputs.
    Condition,
    NotLumpable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pruned {
    pub verdict: PruneVerdict,
    /// Reduced network; `None` when lumping is refused or nothing remains.
    pub network: Option<TransducerNetwork>,
}

/// Removes a node cluster from a network when one of the lumpability rules
/// applies.
pub fn prune_cluster(net: &TransducerNetwork, cluster: &[&str]) -> Result<Pruned> {
    let mut inside = BTreeSet::new();
    for id in cluster {
        let i = net
            .node_index(id)
            .ok_or_else(|| Error::InvalidNetwork(format!("no node `{id}`")))?;
        inside.insert(i);
    }
    let nodes = net.nodes();
    let outgoing = nodes.iter().enumerate().filter(|(i, _)| !inside.contains(i)).any(|(n, _)| {
        net.parent_sources(n)
            .iter()
            .any(|s| matches!(s, Source::Node(j) if inside.contains(j)))
    });
    let incoming = inside.iter().any(|&n| {
        net.parent_sources(n)
            .iter()
            .any(|s| !matches!(s, Source::Node(j) if inside.contains(j)))
    });
    let remaining: Vec<NetworkNode> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| !inside.contains(i))
        .map(|(_, n)| n.clone())
        .collect();
    if !outgoing {
        let mut inputs = net.inputs().to_vec();
        // inputs nobody reads any more are dropped with the cluster
        inputs.retain(|inp| remaining.iter().any(|n| n.parents.contains(&inp.id)));
        let network = if remaining.is_empty() {
            None
        } else {
            Some(TransducerNetwork::new(inputs, remaining)?)
        };
        return Ok(Pruned {
            verdict: PruneVerdict::Marginalize,
            network,
        });
    }
    if !incoming {
        let mut inputs = net.inputs().to_vec();
        inputs.extend(inside.iter().map(|&i| ExternalInput {
            id: nodes[i].id.clone(),
            alphabet: nodes[i].transducer.out_alphabet().clone(),
        }));
        return Ok(Pruned {
            verdict: PruneVerdict::Condition,
            network: Some(TransducerNetwork::new(inputs, remaining)?),
        });
    }
    Ok(Pruned {
        verdict: PruneVerdict::NotLumpable,
        network: None,
    })
}

/// Checks that `block` is causally adjacent: no node outside it is both
/// downstream of some block node and upstream of another.
#[allow(clippy::needless_range_loop)]
pub fn check_cut(net: &TransducerNetwork, block: &[&str]) -> Result<()> {
    let n = net.nodes().len();
    let mut inside = vec![false; n];
    for id in block {
        let i = net
            .node_index(id)
            .ok_or_else(|| Error::InvalidCut(format!("no node `{id}`")))?;
        inside[i] = true;
    }
    // reach[i][j]: j is reachable from i along edges
    let mut reach = vec![vec![false; n]; n];
    for j in 0..n {
        for s in net.parent_sources(j) {
            if let Source::Node(i) = s {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    for m in (0..n).filter(|&m| !inside[m]) {
        let below = (0..n).any(|i| inside[i] && reach[i][m]);
        let above = (0..n).any(|j| inside[j] && reach[m][j]);
        if below && above {
            return Err(Error::InvalidCut(format!(
                "node `{}` lies between members of the block",
                net.nodes()[m].id
            )));
        }
    }
    Ok(())
}

/// Interface of one module given every module before it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModuleInterface {
    pub interface: Interface,
    pub acausality: MeasureReport,
}

pub fn module_interfaces(result: &DecompositionResult, d: &SequenceDistribution) -> Result<Vec<ModuleInterface>> {
    let mut before: Vec<&str> = Vec::new();
    let mut out = Vec::with_capacity(result.modules.len());
    for m in &result.modules {
        let target: Vec<&str> = m.observables.iter().map(String::as_str).collect();
        if target.is_empty() {
            continue;
        }
        let interface = Interface::from_joint(d, &before, &target)?;
        let acausality = acausality(d, &before, &target, result.tolerance)?;
        out.push(ModuleInterface { interface, acausality });
        before.extend(target);
    }
    Ok(out)
}

/// Multiplies a chain of conditional interfaces back into a joint. Each
/// interface's inputs must be exactly the outputs of the interfaces before
/// it, in order.
pub fn chain_product(chain: &[Interface]) -> Result<SequenceDistribution> {
    let first = chain.first().ok_or(Error::EmptySet("chain"))?;
    let horizon = first.horizon();
    let mut roster: Vec<ProcessInfo> = Vec::new();
    let mut table: BTreeMap<Vec<usize>, f64> = [(Vec::new(), 1.0)].into_iter().collect();
    for iface in chain {
        let ids: Vec<&str> = iface.inputs().iter().map(|p| p.id.as_str()).collect();
        let have: Vec<&str> = roster.iter().map(|p| p.id.as_str()).collect();
        if ids != have {
            return Err(Error::Precondition("interface inputs must equal the earlier outputs".into()));
        }
        let mut next = BTreeMap::new();
        for (k, &p) in &table {
            if let Some(dist) = iface.distribution(horizon, k) {
                for (y, &q) in dist {
                    let mut key = k.clone();
                    key.extend_from_slice(y);
                    *next.entry(key).or_insert(0.0) += p * q;
                }
            }
        }
        table = next;
        roster.extend(iface.outputs().iter().cloned());
    }
    SequenceDistribution::new(horizon, roster, table)
}
