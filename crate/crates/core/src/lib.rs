pub mod complex;
pub mod error;
pub mod table;
pub mod exact;
pub mod design;
pub mod linprog;
pub mod facial;
pub mod approx;
pub mod estimate;
pub mod implicit;
pub mod model;
pub mod sim;
pub mod cli;

pub use error::{Error, Result};
