//! Partition-aware decomposition of multi-controlled-X gates plus
//! quasi-probability circuit cutting, simulation, and reconstruction.
//!
//! The modules follow the pipeline order: [`ir`] defines circuits and their
//! JSON wire format, [`mcx`] rewrites multi-controlled-X gates so that every
//! partition-boundary crossing becomes cuttable, [`qpd`] holds the per-cut
//! quasi-probability decompositions, [`cut`] plans cuts and instantiates
//! executable subcircuit pairs, [`sim`] runs them on a dense statevector,
//! and [`estimate`] reconstructs expectation values and overhead tables.

pub mod cut;
pub mod estimate;
pub mod ir;
pub mod mcx;
pub mod qpd;
pub mod sim;
