//! Exact finite-horizon toolkit for stochastic transducers: composition,
//! joint processes, information measures, decomposition, coarse-graining
//! and ε-transducers, all by exhaustive enumeration.

pub mod alphabet;
pub mod coarse;
pub mod compose;
pub mod decompose;
pub mod epsilon;
pub mod error;
pub mod fixtures;
pub mod info;
pub mod network;
pub mod process;
pub mod selftest;
pub mod stationary;
pub mod transducer;

/// Default tolerance for zero and equality tests.
pub const DEFAULT_TOL: f64 = 1e-9;

pub use alphabet::Alphabet;
pub use coarse::{chain_product, module_interfaces, prune_cluster, simplify_bottom, simplify_top, PruneVerdict};
pub use compose::{compose_convergent, compose_pair, compose_parallel, compose_series, embed_cascade, embed_serial_marginalized};
pub use decompose::{decompose_observable, decompose_with_latents, dependency_graph, DecompositionResult, Mode, Module};
pub use epsilon::{causal_states, history_copy_transducer, is_unifilar, verify_composite_causal_states, EpsilonTransducer};
pub use error::{Error, Result};
pub use info::{acausality, cmi, intransducibility, is_nonanticipatory, MeasureReport, Slice};
pub use network::{network_flatten, ExternalInput, NetworkNode, TransducerNetwork};
pub use process::{
    feedback_joint, interface_eval, interface_prob, joint_process, FeedbackAgent, InputDistribution, Interface, ProcessInfo,
    Role, SequenceDistribution,
};
pub use stationary::{stationarize, TimeVaryingTransducer};
pub use transducer::{kernel_operator, validate_transducer, KernelOperator, StochasticKernel, Transducer, Violation};
