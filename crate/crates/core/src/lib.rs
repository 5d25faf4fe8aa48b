pub mod actuation;
pub mod analysis;
pub mod error;
pub mod fsm;
pub mod io;
pub mod kinematics;
pub mod sim;
pub mod terrain;

pub use error::{Error, Result};
