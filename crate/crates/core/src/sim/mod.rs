//! Discrete-event simulation: delays, event queue, ports, traces and drivers.

pub mod delay;
pub mod engine;
pub mod port;
pub mod queue;
pub mod replay;
pub mod rounds;
pub mod trace;

pub use delay::{preset_delay_model, preset_means, DelayCase, DelayModel, DelaySampler, DelayShape, PresetParams};
pub use engine::{run_async, AsyncAlgorithm, Budget, EngineSettings, RunOutcome};
pub use port::SendPolicy;
pub use queue::{EventQueue, Scheduled};
pub use replay::replay;
pub use rounds::{run_rounds, Exchange, RoundAlgorithm};
pub use trace::{EventTrace, IterateLog, TraceKind, TraceMode, TraceRecord};
