// SPDX-License-Identifier: MIT OR Apache-2.0

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod interventions;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod tokenizer;

pub use error::{Error, Result};
