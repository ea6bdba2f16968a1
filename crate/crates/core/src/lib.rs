//! Phase-space intermittent balance control.
//!
//! The pipeline runs from force-platform recordings to a simulated,
//! stimulation-actuated standing plant:
//!
//! - [`ingest`] parses trial records, derives COP from the wrench and
//!   applies a zero-phase Butterworth low-pass.
//! - [`phase`] builds the COP trajectory, picks the five Poincaré points,
//!   identifies the second-degree curve through them and measures distances
//!   to it.
//! - [`control`] is the intermittent controller: a Mamdani fuzzy gate on the
//!   distance plus a parallel PID, and a Ziegler-Nichols tuner.
//! - [`zones`] classifies COP samples into the nested elliptical stability
//!   zones.
//! - [`plant`] is the single-link inverted pendulum and the closed-loop
//!   simulation producing [`plant::SimTrace`].
//! - [`config`] is the flat dotted key-value configuration format.

pub mod config;
pub mod control;
pub mod ingest;
pub mod phase;
pub mod plant;
pub mod zones;

/// A 2-vector in centimeters (x anterior-posterior, y medial-lateral).
pub type Point = [f64; 2];
