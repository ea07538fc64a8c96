//! One function per subcommand. Each returns the JSON to print.

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use stx_core::compose::{
    compose_convergent, compose_pair, compose_parallel, compose_series, embed_cascade, embed_serial_marginalized,
};
use stx_core::process::feedback_joint_via_interfaces;
use stx_core::transducer::validate_with_tol;
use stx_core::{
    causal_states, cmi, decompose_observable, decompose_with_latents, dependency_graph, interface_eval, is_nonanticipatory,
    joint_process, network_flatten, prune_cluster, simplify_bottom, simplify_top, DecompositionResult, FeedbackAgent,
    InputDistribution, Interface, SequenceDistribution, Slice, Transducer, TransducerNetwork,
};

use crate::io::{self, guard_horizon, load_joint, load_network, load_transducer, ok, read_json, Output};
use crate::{
    CoarseArgs, ComposeArgs, ComposeMode, DecomposeArgs, DecomposeMode, EpsilonArgs, EvalArgs, FeedbackArgs, Global, JointArgs,
    MeasureArgs, MeasureKind, NetArgs, SelftestArgs, ValidateArgs,
};

pub fn validate(g: &Global, a: ValidateArgs) -> Result<Output> {
    let report = if let Some(path) = a.transducer {
        let t: Transducer = read_json(&path)?;
        let violations = validate_with_tol(&t, g.tol);
        json!({"kind": "transducer", "valid": violations.is_empty(), "violations": violations})
    } else if let Some(path) = a.net {
        let net: TransducerNetwork = read_json(&path)?;
        let nodes: Vec<_> = net
            .nodes()
            .iter()
            .map(|n| json!({"id": n.id, "violations": validate_with_tol(&n.transducer, g.tol)}))
            .collect();
        let valid = nodes.iter().all(|n| n["violations"].as_array().is_some_and(Vec::is_empty));
        json!({"kind": "network", "valid": valid, "nodes": nodes})
    } else if let Some(path) = a.joint {
        // deserialization already checks key widths and normalization
        let d: SequenceDistribution = read_json(&path)?;
        let ids: Vec<&str> = d.processes().iter().map(|p| p.id.as_str()).collect();
        json!({"kind": "joint", "valid": true, "horizon": d.horizon(), "processes": ids, "entries": d.len()})
    } else {
        bail!("nothing to validate");
    };
    let code = if report["valid"] == true { 0 } else { 1 };
    Ok(Output {
        json: serde_json::to_string(&report)?,
        code,
    })
}

pub fn compose(g: &Global, a: ComposeArgs) -> Result<Output> {
    let t = load_transducer(g, &a.first)?;
    let u = load_transducer(g, &a.second)?;
    let v = match a.mode {
        ComposeMode::Pair => compose_pair(&t, &u)?,
        ComposeMode::Series => compose_series(&t, &u)?,
        ComposeMode::Parallel => compose_parallel(&t, &u)?,
        ComposeMode::Convergent => compose_convergent(&t, &u)?,
        ComposeMode::Serial => embed_serial_marginalized(&t, &u)?,
        ComposeMode::Cascade => embed_cascade(&t, &u)?,
    };
    ok(&v)
}

pub fn flatten(g: &Global, a: NetArgs) -> Result<Output> {
    ok(&network_flatten(&load_network(g, &a.net)?)?)
}

#[derive(Serialize)]
struct EvalEntry {
    y: String,
    p: f64,
}

pub fn eval(g: &Global, a: EvalArgs) -> Result<Output> {
    let t = network_flatten(&load_network(g, &a.net)?)?;
    let xs = match (a.input, a.horizon) {
        (Some(text), _) => t.in_alphabet().parse_seq(&text)?,
        (None, Some(h)) if t.n_in() == 1 => vec![0; h],
        (None, _) => bail!("the network reads external inputs; pass --input"),
    };
    guard_horizon(g, xs.len())?;
    let dist: Vec<EvalEntry> = interface_eval(&t, &xs)?
        .into_iter()
        .map(|(ys, p)| EvalEntry {
            y: t.out_alphabet().format_seq(&ys),
            p,
        })
        .collect();
    ok(&json!({ "dist": dist }))
}

pub fn joint(g: &Global, a: JointArgs) -> Result<Output> {
    guard_horizon(g, a.horizon)?;
    let net = load_network(g, &a.net)?;
    io::warn_joint_size(&net, a.horizon, a.latents);
    let inputs = InputDistribution::uniform(&net, a.horizon)?;
    ok(&joint_process(&net, &inputs, a.horizon, a.latents)?)
}

pub fn feedback(g: &Global, a: FeedbackArgs) -> Result<Output> {
    guard_horizon(g, a.horizon)?;
    let env = load_transducer(g, &a.env)?;
    let agent: FeedbackAgent = read_json(&a.agent)?;
    agent.transducer.ensure_valid().context("agent transducer")?;
    io::guard_transducer(g, &agent.transducer, "agent")?;
    let d = if a.via_interfaces {
        feedback_joint_via_interfaces(&env, &agent, a.horizon)?
    } else {
        stx_core::feedback_joint(&env, &agent, a.horizon)?
    };
    ok(&d)
}

fn ids(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// `ID` for the whole sequence or `ID:START..END`.
fn parse_slice(d: &SequenceDistribution, text: &str) -> Result<Slice> {
    match text.split_once(':') {
        None => {
            let len = d.seq_len(d.index_of(text)?);
            Ok(Slice::new(text, 0, len))
        }
        Some((id, range)) => {
            let (s, e) = range
                .split_once("..")
                .ok_or_else(|| anyhow!("slice `{text}` needs a range START..END"))?;
            Ok(Slice::new(id, s.trim().parse()?, e.trim().parse()?))
        }
    }
}

pub fn measure(g: &Global, a: MeasureArgs) -> Result<Output> {
    if let Some(h) = a.horizon {
        guard_horizon(g, h)?;
    }
    let d = load_joint(g, &a.joint, a.horizon)?;
    match a.kind {
        MeasureKind::Acausality => ok(&stx_core::acausality(&d, &ids(&a.input), &ids(&a.output), g.tol)?),
        MeasureKind::Intransducibility => ok(&stx_core::intransducibility(
            &d,
            &ids(&a.input),
            &ids(&a.output),
            &ids(&a.latent),
            g.tol,
        )?),
        MeasureKind::Nonanticipation => ok(&is_nonanticipatory(&d, &ids(&a.input), &ids(&a.output), g.tol)?),
        MeasureKind::Cmi => {
            let parse = |v: &[String]| v.iter().map(|s| parse_slice(&d, s)).collect::<Result<Vec<_>>>();
            let bits = cmi(&d, &parse(&a.a)?, &parse(&a.b)?, &parse(&a.c)?)?;
            ok(&json!({"measure": "cmi", "horizon": d.horizon(), "tolerance": g.tol, "bits": bits}))
        }
    }
}

#[derive(Serialize)]
struct DecomposeOutput {
    #[serde(flatten)]
    result: DecompositionResult,
    edges: Vec<stx_core::decompose::DependencyEdge>,
}

pub fn decompose(g: &Global, a: DecomposeArgs) -> Result<Output> {
    if let Some(h) = a.horizon {
        guard_horizon(g, h)?;
    }
    let d = load_joint(g, &a.joint, a.horizon)?;
    let all = d.observables();
    let obs = if a.observables.is_empty() {
        ids(&all)
    } else {
        ids(&a.observables)
    };
    let result = match a.mode {
        DecomposeMode::Acausality => decompose_observable(&d, &obs, g.tol)?,
        DecomposeMode::Intransducibility => {
            let lat = d.latents();
            decompose_with_latents(&d, &obs, &ids(&lat), g.tol)?
        }
    };
    let edges = dependency_graph(&result, &d, g.tol)?;
    ok(&DecomposeOutput { result, edges })
}

pub fn coarsegrain(g: &Global, a: CoarseArgs) -> Result<Output> {
    if let Some(path) = a.net {
        let net = load_network(g, &path)?;
        return ok(&prune_cluster(&net, &ids(&a.remove))?);
    }
    if let Some(h) = a.horizon {
        guard_horizon(g, h)?;
    }
    let path = a.joint.ok_or_else(|| anyhow!("--joint is required"))?;
    let d = load_joint(g, &path, a.horizon)?;
    match (a.keep, a.condition_on) {
        (Some(keep), None) => ok(&simplify_top(&d, io::prefix_range(&keep)?)?),
        (None, Some(on)) => ok(&simplify_bottom(&d, io::prefix_range(&on)?)?),
        _ => bail!("pass exactly one of --keep or --condition-on"),
    }
}

pub fn epsilon(g: &Global, a: EpsilonArgs) -> Result<Output> {
    let h = a.h_past + a.h_future;
    guard_horizon(g, h)?;
    let t = network_flatten(&load_network(g, &a.net)?)?;
    let iface = Interface::from_transducer(&t, h)?;
    ok(&causal_states(&iface, a.h_past, a.h_future, g.tol)?)
}

pub fn selftest(g: &Global, a: SelftestArgs) -> Result<Output> {
    let n = stx_core::selftest::criteria_count();
    if let Some(bad) = a.only.iter().find(|&&i| i == 0 || i > n) {
        bail!("criterion {bad} does not exist (1..={n})");
    }
    let report = stx_core::selftest::run(g.seed, &a.only)?;
    for c in &report.criteria {
        eprintln!(
            "{} criterion {:>2} {}: {} [{:.2}s of {}s]",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.detail,
            c.seconds,
            c.limit_seconds
        );
    }
    Ok(Output {
        json: serde_json::to_string(&report)?,
        code: if report.passed { 0 } else { 1 },
    })
}
