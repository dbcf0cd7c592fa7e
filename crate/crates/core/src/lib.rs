//! Context-aware repair of C compilation errors.
//!
//! The pipeline: tokenize correct programs ([`program`]), inject labeled
//! errors ([`corrupt`]), compile and normalize diagnostics
//! ([`diagnostics`]), collect per-line declare/use context ([`context`]),
//! train the localizer and pointer-generator decoder ([`model`]) and run
//! the iterative compiler-in-the-loop repair ([`repair`]).

pub mod config;
pub mod context;
pub mod corrupt;
pub mod dataset;
pub mod diagnostics;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod program;
pub mod repair;
pub mod samples;
pub mod seed;
pub mod store;
