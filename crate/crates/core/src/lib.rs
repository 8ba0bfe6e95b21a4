//! In-database ML training toolchain: a UDF language compiled to a
//! page-walking access program and a static schedule for a simulated
//! multi-threaded SIMD execution engine.

pub mod dsl;
pub mod engine;
pub mod pageio;
pub mod planner;
pub mod runtime;
pub mod scheduler;
pub mod strider;
pub mod translator;
pub mod workloads;
