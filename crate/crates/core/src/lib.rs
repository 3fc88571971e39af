//! Layered bit-stack recognizer with self-modifying class memory.

pub mod basis_file;
pub mod bits;
pub mod bitspace;
pub mod boolalg;
pub mod classes;
pub mod config;
pub mod decisions;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod memory;
pub mod oracle;
pub mod packer;
pub mod profile;
pub mod sim;
pub mod stack;
pub mod store;
pub mod training;

pub use error::{Error, Result};
