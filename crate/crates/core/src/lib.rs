pub mod domain;
pub mod error;
pub mod fibration;
pub mod field;
pub mod group;
pub mod invariants;
pub mod io;
pub mod lorentz;
pub mod minimax;
pub mod par;
pub mod transition;

pub use error::{Error, Result};
