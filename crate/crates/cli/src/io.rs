//! File loading, size guards and exit-code mapping.

use std::fs;

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use stx_core::network::{ExternalInput, NetworkNode};
use stx_core::{SequenceDistribution, Transducer, TransducerNetwork};

use crate::Global;

pub const MAX_ALPHABET: usize = 4;
pub const MAX_LATENT: usize = 6;
pub const MAX_NODES: usize = 6;
pub const MAX_HORIZON: usize = 8;

/// A size limit was exceeded without `--unsafe-large`.
#[derive(Debug)]
pub struct GuardViolation(pub String);

impl std::fmt::Display for GuardViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "size guard exceeded: {} (pass --unsafe-large to lift)", self.0)
    }
}

impl std::error::Error for GuardViolation {}

/// 2 for guard violations, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<GuardViolation>() || matches!(cause.downcast_ref(), Some(stx_core::Error::Guard(_))) {
            return 2;
        }
    }
    1
}

/// Serialized output plus the exit code to report it with.
pub struct Output {
    pub json: String,
    pub code: u8,
}

pub fn ok<T: Serialize>(value: &T) -> Result<Output> {
    Ok(Output {
        json: serde_json::to_string(value)?,
        code: 0,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path}"))
}

fn check(g: &Global, ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok || g.unsafe_large {
        Ok(())
    } else {
        Err(GuardViolation(what()).into())
    }
}

pub fn guard_horizon(g: &Global, h: usize) -> Result<()> {
    check(g, h <= MAX_HORIZON, || format!("horizon {h} > {MAX_HORIZON}"))
}

/// Output and latent sizes; input alphabets follow from upstream outputs.
pub fn guard_transducer(g: &Global, t: &Transducer, name: &str) -> Result<()> {
    check(g, t.n_out() <= MAX_ALPHABET, || {
        format!("{name}: output alphabet {} > {MAX_ALPHABET}", t.n_out())
    })?;
    check(g, t.n_latent() <= MAX_LATENT, || {
        format!("{name}: latent alphabet {} > {MAX_LATENT}", t.n_latent())
    })
}

pub fn guard_network(g: &Global, net: &TransducerNetwork) -> Result<()> {
    check(g, net.nodes().len() <= MAX_NODES, || {
        format!("{} nodes > {MAX_NODES}", net.nodes().len())
    })?;
    for i in net.inputs() {
        check(g, i.alphabet.size() <= MAX_ALPHABET, || {
            format!("input {}: alphabet {} > {MAX_ALPHABET}", i.id, i.alphabet.size())
        })?;
    }
    for n in net.nodes() {
        guard_transducer(g, &n.transducer, &n.id)?;
    }
    Ok(())
}

pub fn guard_joint(g: &Global, d: &SequenceDistribution) -> Result<()> {
    guard_horizon(g, d.horizon())?;
    let obs = d.observables();
    check(g, obs.len() <= MAX_NODES, || {
        format!("{} observable processes > {MAX_NODES}", obs.len())
    })?;
    for p in d.processes() {
        let limit = match p.role {
            stx_core::Role::Observable => MAX_ALPHABET,
            stx_core::Role::Latent => MAX_LATENT,
        };
        check(g, p.alphabet.size() <= limit, || {
            format!("process {}: alphabet {} > {limit}", p.id, p.alphabet.size())
        })?;
    }
    Ok(())
}

/// Loads a transducer, rejecting kernels that are not stochastic.
pub fn load_transducer(g: &Global, path: &str) -> Result<Transducer> {
    let t: Transducer = read_json(path)?;
    t.ensure_valid().with_context(|| format!("in {path}"))?;
    guard_transducer(g, &t, path)?;
    Ok(t)
}

/// Loads a network file. A bare transducer object is accepted as a
/// one-node network `Y` reading an external input `X`.
pub fn load_network(g: &Global, path: &str) -> Result<TransducerNetwork> {
    let value: serde_json::Value = read_json(path)?;
    let net = if value.get("kernel").is_some() {
        let t: Transducer = serde_json::from_value(value).with_context(|| format!("parsing {path}"))?;
        TransducerNetwork::new(
            vec![ExternalInput {
                id: "X".into(),
                alphabet: t.in_alphabet().clone(),
            }],
            vec![NetworkNode {
                id: "Y".into(),
                parents: vec!["X".into()],
                transducer: t,
            }],
        )?
    } else {
        serde_json::from_value(value).with_context(|| format!("parsing {path}"))?
    };
    for n in net.nodes() {
        n.transducer.ensure_valid().with_context(|| format!("node {}", n.id))?;
    }
    guard_network(g, &net)?;
    Ok(net)
}

/// Loads a joint and optionally truncates it to a shorter horizon.
pub fn load_joint(g: &Global, path: &str, horizon: Option<usize>) -> Result<SequenceDistribution> {
    let d: SequenceDistribution = read_json(path)?;
    guard_joint(g, &d)?;
    match horizon {
        Some(h) => Ok(d.truncate(h)?),
        None => Ok(d),
    }
}

/// Parses `0..b` into `b`; the range must start at 0.
pub fn prefix_range(text: &str) -> Result<usize> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("expected a range `0..n`, got `{text}`"))?;
    let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo != 0 {
        return Err(stx_core::Error::InvalidCut(format!("range `{text}` must start at 0")).into());
    }
    Ok(hi)
}

/// Worst-case entry count above which `joint` warns before enumerating.
pub const WARN_ENTRIES: f64 = 1e6;

/// Warns on stderr when the joint table could exceed [`WARN_ENTRIES`].
pub fn warn_joint_size(net: &TransducerNetwork, h: usize, latents: bool) {
    let obs: f64 = net
        .input_sizes()
        .iter()
        .chain(&net.output_sizes())
        .map(|&n| n as f64)
        .product();
    let mut bound = obs.powi(h as i32);
    if latents {
        let lat: f64 = net.latent_sizes().iter().map(|&n| n as f64).product();
        bound *= lat.powi(h as i32 + 1);
    }
    if bound > WARN_ENTRIES {
        eprintln!("warning: joint may hold up to {bound:.1e} entries at horizon {h}");
    }
}
