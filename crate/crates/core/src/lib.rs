//! Two-area power-system frequency dynamics: simulation, stability metrics,
//! particle-swarm calibration from recorded events and generation-mix
//! scenario sweeps.

pub mod error;
pub mod estimation;
pub mod governor;
pub mod io;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod scenarios;
pub mod simulator;

pub use error::{Error, Result};
pub use estimation::{
    allocate_droops, estimate_both, estimate_full, estimate_reduced, pso_optimize, EstimationResult,
    EstimationSetup, ModelTemplate, ParamSpace, PsoConfig, RecordedEvent,
};
pub use governor::block_response;
pub use metrics::{nadir, rocof_sliding, steady_state, MetricsReport};
pub use model::{
    build_system, validate_decomposition, AreaId, AreaModel, Disturbance, GenerationBlock,
    GovernorParams, SystemBase, SystemConfig, Technology, TechnologyKind, TieLine, TwoAreaSystem,
};
pub use scenarios::{
    apply_mitigation, apply_snapshot, sweep, DispatchSnapshot, MitigationSpec, PerArea, ReferenceAnchor,
    ScenarioTrajectory, SweepRow,
};
pub use simulator::{simulate, FrequencyTrace, SimConfig};
