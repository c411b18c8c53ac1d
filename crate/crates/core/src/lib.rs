//! Knowledge generation with a semantic-network layer and a discrete
//! active-inference layer.
//!
//! * [`probmath`]: categorical distributions, entropy, divergences.
//! * [`semnet`]: concept-stimulus matrices, transfer energy, synsets.
//! * [`genmodel`]: generative models, policies and Dirichlet learning.
//! * [`inference`]: perception, planning, action and concept expansion.
//! * [`environment`]: simulated worlds and built-in fixtures.
//! * [`knowledge`]: the learning and use loops and their regimes.
//! * [`scenario`]: scenario files.

pub mod cli;
pub mod environment;
pub mod error;
pub mod genmodel;
pub mod inference;
pub mod knowledge;
pub mod probmath;
pub mod scenario;
pub mod semnet;

pub use error::{Error, Result};
