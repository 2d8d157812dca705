#![no_std]
extern crate alloc;

pub mod cycles;
pub mod error;
pub mod field;
pub mod model;
pub mod ode;
pub mod pde;
pub mod wave;

pub use error::{Error, Result};
