//! Pulse-level simulation of a self-compensating Sagnac-loop polarization
//! encoder and the three-state BB84 proof of concept built around it.
//!
//! The crate is layered bottom-up:
//!
//! - [`polarization`]: Jones vectors, coherency matrices, Stokes
//!   parameters, and the house conventions for circular states.
//! - [`streams`]: seeded, independently addressable random-number streams.
//! - [`components`]: the individual optical elements — source spectrum,
//!   birefringent fiber, phase modulator, fiber PBS with finite extinction,
//!   free-space beam splitter, drifting single-mode fiber.
//! - [`timing`]: loop geometry, modulation-window scheduling, and the
//!   timing-constraint validator.
//! - [`encoder`]: the stagewise Sagnac encoder, its fiber-output
//!   predecessor, and an in-line modulator baseline.
//! - [`receiver`]: waveplate measurement stations and nanowire-detector
//!   statistics.
//! - [`config`], [`harness`], [`report`]: experiment configuration, the
//!   end-to-end QKD runner, and CSV/summary serialization.

pub mod components;
pub mod config;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod polarization;
pub mod receiver;
pub mod report;
pub mod streams;
pub mod timing;

pub use error::{Result, SimError};
