//! Compositional construction of finite abstractions for interconnected
//! stochastic control systems with sector-bounded nonlinearities.

pub mod bounds;
pub mod cases;
pub mod error;
pub mod fmdp;
pub mod kinf;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod smallgain;
pub mod spsf;
pub mod synth;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::Verdict;
