//! Reduced-form return models for bond portfolios.
//!
//! The crate covers exact portfolio analytics (price, yield, duration,
//! convexity), first- and second-order log-return approximations for
//! government, inflation-linked and corporate portfolios, the OLS harness used
//! to fit them, a Cox-process default simulator, a synthetic market that
//! produces ground-truth datasets, and CSV ingestion.

pub mod acceptance;
pub mod cashflow;
pub mod data_io;
pub mod defaults;
pub mod error;
pub mod regression;
pub mod report;
pub mod returns;
pub mod series;
pub mod synthetic;

pub use error::{Error, Result};
