pub mod decomp;
pub mod error;
pub mod gaptest;
pub mod model;
pub mod recovery;
pub mod sdp;
pub mod symmat;

pub use error::{Assumption, Error, Result};
