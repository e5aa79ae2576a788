pub mod error;
pub mod estimator;
pub mod harness;
pub mod mdp;
pub mod optimizer;
pub mod oracle;
pub mod pgpe;
pub mod policy;
pub mod vector;

pub use error::{Error, Result};
pub use vector::{GradEstimate, PolicyParams};
