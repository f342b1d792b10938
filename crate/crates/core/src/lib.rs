//! Trace-driven simulation of content-aware traffic engineering in a network
//! CDN: content placement, request redirection and routing evaluated
//! together over an ISP PoP topology, scored by maximum link utilization.

pub mod engine;
pub mod lp;
pub mod placement;
pub mod redirection;
pub mod routing;
pub mod topology;
pub mod workload;
