//! Tsetlin Machine inference with instruction-level optimizations.
//!
//! A Tsetlin Machine classifies by letting each class vote through a set
//! of conjunctive clauses over boolean literals (input features and their
//! complements). This crate provides four interchangeable clause
//! engines — an integer baseline, integer with early exit, 32-bit
//! bit-packed, and bit-packed with early exit — plus a post-training
//! literal reorder stage that front-loads the positions most likely to
//! settle a clause, a thermometer booleanization front end, a minimal
//! trainer, and a benchmark harness that reports speedup ratios and work
//! counters.
//!
//! ```
//! use tm_core::bits::pack_bits;
//! use tm_core::engines::{predict, EngineKind};
//! use tm_core::model::{ActionModel, ModelShape};
//!
//! let shape = ModelShape { n_bool_features: 2, n_classes: 1, clauses_per_class: 2 };
//! let rows = vec![pack_bits(&[1, 0, 0, 0]), pack_bits(&[0, 0, 0, 0])];
//! let model = ActionModel::new(shape, rows).unwrap();
//! let report = predict(&model, &pack_bits(&[1, 0, 0, 1]), EngineKind::BitwiseEarlyExit).unwrap();
//! assert_eq!(report.predicted_class, 0);
//! ```

pub mod bench;
pub mod bits;
pub mod booleanize;
pub mod engines;
pub mod error;
pub mod io;
pub mod model;
pub mod reorder;
pub mod trainer;

pub use error::{Result, TmError};
