pub mod cavity;
pub mod control;
pub mod error;
pub mod nm;
pub mod optimize;
pub mod pulse;
pub mod quantum;
pub mod spinstar;
pub mod sweep;

pub use error::{Error, Result};
