//! Event-based multi-object tracking toolkit.
//!
//! The processing chain is events → time surface → blob detection → SORT
//! data association → tracks, with frame/event alignment helpers
//! ([`calibration`], [`sync`]), evaluation ([`metrics`]) and a synthetic
//! event-camera scene generator ([`simulator`]) that supplies ground truth.

pub mod calibration;
pub mod detection;
pub mod event;
pub mod metrics;
pub mod simulator;
pub mod sync;
pub mod timesurface;
pub mod tracker;

pub use event::{Event, EventStream, Polarity, SensorGeometry};
