//! Correlation structure of stock-market indices trading in different time
//! zones.
//!
//! The crate turns daily closing prices into log-returns, augments them with
//! one-day (or longer) lagged copies so that a market closing before another
//! opens can be related to it, and studies the resulting correlation matrix
//! with random-matrix nulls, market-mode regression, threshold asset graphs,
//! graph centralities and metric multidimensional scaling.
//!
//! ```
//! use marketlag_core::{correlation, panel::ReturnPanel, SeriesLabel};
//!
//! let panel = ReturnPanel::from_columns(
//!     vec![SeriesLabel::new("A"), SeriesLabel::new("B")],
//!     &[vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 4.0, 3.0]],
//! )
//! .unwrap();
//! let enlarged = correlation::lag_augment(&panel, 1).unwrap();
//! assert_eq!(enlarged.n_series(), 4);
//! let c = correlation::pearson_matrix(&panel).unwrap();
//! assert!((c.values[(0, 1)] - 0.8).abs() < 1e-12);
//! ```

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod error;
pub mod grid;
mod label;
pub mod marchenko_pastur;
pub mod network;
pub mod panel;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod synthetic;

pub use correlation::{CorrelationMatrix, LagProfile, Method};
pub use error::{Error, Result};
pub use label::SeriesLabel;
pub use marchenko_pastur::MarchenkoPastur;
pub use network::{AssetGraph, CentralityReport, DistanceMatrix, Embedding};
pub use panel::{CalendarMode, CalendarPolicy, Frequency, PricePanel, ReturnPanel};
pub use spectral::{ModeRemovalResult, NoiseClass, NullEnsemble, SpectralSummary};
