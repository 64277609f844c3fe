//! Checks shared by the property suites and the acceptance report.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

pub mod fock;
pub mod oracles;
