//! Test support: random process definitions, a reference token simulator
//! written independently of the engine, a graph isomorphism check and an
//! in-process HTTP harness.

pub mod gen;
pub mod http;
pub mod iso;
pub mod oracle;

pub use gen::{random_definition, GenOptions};
pub use iso::isomorphic;
pub use oracle::{engine_reachable, oracle_reachable, Quiescent};
