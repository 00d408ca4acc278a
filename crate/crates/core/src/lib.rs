//! Physics-informed network training with loss switching.

pub mod autodiff;
pub mod checks;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod network;
pub mod optimizer;
pub mod pde;
pub mod rng;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
