//! Static analysis of Webview JavaScript bridges: an attacker model is
//! synthesized into the app and a taint analysis reports what injected
//! script could read or trigger through the exposed interface objects.

pub mod air;
pub mod alarms;
pub mod callgraph;
pub mod feasibility;
pub mod generate;
pub mod instrument;
pub mod interface;
pub mod oracle;
pub mod pipeline;
pub mod refine;
pub mod taint;
