//! Language-measure optimization of probabilistic finite state automata and
//! its distributed use for routing mobile swarms to targets.

pub mod distributed;
pub mod error;
pub mod mobility;
pub mod par;
pub mod pfsa;
pub mod scenario;
pub mod supervisor;
pub mod swarm_graph;

pub use error::{Error, ErrorCategory, Result};
