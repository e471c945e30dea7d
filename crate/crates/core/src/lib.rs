//! Iterated prisoner's dilemma with bounded memory, recommendation,
//! an optimism threshold and tolerance.
//!
//! A population of cooperators and defectors is matched uniformly at random.
//! Cooperators remember a bounded number of opponents, ask the cooperators
//! they remember about strangers, and refuse to play opponents they perceive
//! as defectors. [`engine::Realization`] runs one seeded simulation;
//! [`harness::run_sweep`] runs parameter grids.

pub mod engine;
pub mod error;
pub mod eventlog;
pub mod harness;
pub mod memory;
pub mod metrics;
pub mod model;
pub mod recommendation;
pub mod world;

pub use engine::{run_realization, Basis, Decision, Judgment, MatchEvent, Realization};
pub use error::{ConfigError, ContractViolation, IoError};
pub use memory::{classify, perceived_ratio, InteractionRecord, MemoryStore, Perception};
pub use metrics::{MemoryCensus, RealizationResult};
pub use model::{
    memory_capacity, sample_action, Action, AgentId, AgentType, ForgetCutoff, ForgettingStrategy,
    PayoffMatrix, RecommendationMode, SimConfig,
};
pub use world::World;
