//! Simulation of a single photon driving two cascaded, ultrastrongly coupled
//! qubit-cavity subsystems.
//!
//! Units: all frequencies and rates are in units of the qubit frequency
//! `omega_q`, times in units of `1/omega_q`.
//!
//! Pipeline: [`subsystem::dress`] each subsystem, [`composite::assemble`] the
//! cascade, build a [`pulse::PulseSpec`], then [`hierarchy::evolve`] and
//! [`correlations::delayed_c`]. [`oracle`] provides an independent check and
//! [`experiment`] drives whole runs from a [`experiment::RunConfig`].

pub mod composite;
pub mod correlations;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod integrate;
pub mod kernel;
pub mod operator;
pub mod oracle;
pub mod pulse;
pub mod spectrum;
pub mod subsystem;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/subsystem.md")]
    mod subsystem {}
    #[doc = include_str!("../../../book/src/cascade.md")]
    mod cascade {}
    #[doc = include_str!("../../../book/src/hierarchy.md")]
    mod hierarchy {}
    #[doc = include_str!("../../../book/src/correlations.md")]
    mod correlations {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
