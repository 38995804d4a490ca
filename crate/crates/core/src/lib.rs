//! Traffic flow on road networks and transport distances between densities.

pub mod experiments;
pub mod lwr;
pub mod metric;
pub mod network;
pub mod reference;
pub mod transport;
