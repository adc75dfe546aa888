//! Deterministic multi-agent simulation of industrial autonomous vehicles on
//! a shared warehouse floor. Vehicles follow lane-graph missions, perceive
//! their surroundings with a range-limited radar model, and coordinate over a
//! broadcast bus using five fixed-layout cooperation messages: periodic
//! beacons, event-driven hazard notifications, perception reports, crossing
//! requests, and crossing answers. Intersections are won by an explicit
//! request/answer handshake; ties fall to task priority, task urgency, and
//! finally the lower station id, so conflicts always resolve the same way
//! everywhere.
//!
//! The crate is a library; the companion CLI runs scenario files end to end.
//! Everything is reproducible: a scenario plus a seed fixes the whole run,
//! including the recorded trace, byte for byte.

pub mod agent;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod plan;
pub mod scenario;
pub mod trace;
pub mod wire;

pub use agent::{
    answer_mcm, resolve_conflict, step_agent, AgentError, AgentState, ConflictClaim, Maneuver,
    Mission, Motion, Phase, ProtocolParams, StepOutput,
};
pub use engine::{EngineError, EngineOptions, RunResult, World};
pub use geometry::Vec2;
pub use metrics::{compute as compute_metrics, to_csv as metrics_csv, MetricsReport};
pub use perception::{
    classify_risk, scan, PerceivedObject, RiskLevel, SensorConfig, SnapshotEntity, WorldSnapshot,
};
pub use plan::{build_benchmark_plan, zone_of, TrafficPlan, Zone};
pub use scenario::{parse as parse_scenario, serialize as serialize_scenario, Scenario, ScenarioError};
pub use trace::{EntityId, EventData, Trace, TraceError, TraceEvent};
pub use wire::{codes, CodecError, Message};
