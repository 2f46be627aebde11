pub mod error;
pub mod frame;
pub mod linalg;
pub mod propagation;
pub mod report;
pub mod scale;
pub mod sequence;
