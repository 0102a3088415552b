//! Rate-channel compression: the minimal mutual information over backward
//! channels consistent with a source, its Wyner-Ziv and quantum-classical
//! variants, rate-distortion by Blahut-Arimoto, and a random-coding
//! simulator for the side-information protocol.

pub mod error;
pub mod feasible;
pub mod io;
pub mod lp;
pub mod prob;
pub mod quantum;
pub mod rate;
pub mod sim;
pub mod typical;
pub mod wz;

pub use error::{Error, Result};
pub use prob::{Channel, JointPmf, Pmf};
