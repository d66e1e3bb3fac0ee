pub mod constants;
pub mod coupling;
pub mod emitter;
pub mod error;
pub mod fitting;
pub mod io;
pub mod cavity;
pub mod cli;
pub mod optics;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
