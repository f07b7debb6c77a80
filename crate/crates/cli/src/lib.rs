//! Library side of the `qc2qp` command: instance files, random trials and contour data.

pub mod contour;
pub mod instance;
pub mod trials;
