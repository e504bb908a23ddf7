pub mod beatmap;
pub mod cents;
pub mod error;
pub mod harmonicity;
pub mod io;
pub mod loudness;
pub mod modal;
pub mod pitch;
pub mod signal;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
