//! Bundles the C interface into a static archive that `cargo test` always builds,
//! so the C smoke test has something to link against.
pub use toric_gauge_ffi::*;
