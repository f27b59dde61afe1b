pub mod cli;
pub mod config;
pub mod delay_model;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod policies;
pub mod quadrature;
pub mod trace;
pub mod tracegen;
