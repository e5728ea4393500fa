pub mod algebra;
pub mod charts;
pub mod error;
pub mod groupoid;
pub mod matrix;
pub mod sampling;
pub mod standard;
pub mod suites;
pub mod symplectic;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::ToleranceProfile;
