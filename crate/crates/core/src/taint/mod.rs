//! Source-to-sink taint analysis over instrumented programs.

pub mod access_path;
pub mod config;
pub mod engine;
pub mod pointsto;

pub use access_path::{AccessPath, Root};
pub use config::{
    ConfigError, Position, ResolvedConfig, SourceSinkConfig, WrapKind, ATTACKER_INPUT,
    WEB_EXFILTRATION,
};
pub use engine::{flows_to_sink, run_taint, Flow, RunOptions, TaintFact, TaintResult, TaintStats};
pub use pointsto::{static_owner, AbstractObject, ObjId, PointsTo};
