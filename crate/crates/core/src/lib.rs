#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod devices;
pub mod fock;
pub mod protocol;
pub mod scenario;
