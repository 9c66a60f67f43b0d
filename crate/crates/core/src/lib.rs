pub mod channel;
pub mod cli;
pub mod dinkelbach;
pub mod error;
pub mod harness;
pub mod inner;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod overlay;
mod serde_cplx;
pub mod underlay;
