pub mod connectors;
pub mod engine;
pub mod expr;
pub mod journal;
pub mod model;
pub mod platform;
pub mod role;
pub mod scheduler;
pub mod value;
