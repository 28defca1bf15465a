//! Time-varying lower-tail dependence networks.
//!
//! Returns are filtered through ARMA(1,1)-GARCH(1,1) margins with skewed
//! Student-t innovations, pairs of probability-integral transforms are fitted
//! with DCC Student-t copulas, and the implied lower tail dependence drives a
//! minimum spanning tree per period. Tree topology indicators, copula
//! Delta-CoVaR and market-state summaries are computed on top.

pub mod covar;
pub mod depnet;
pub mod dual;
pub mod error;
pub mod format;
pub mod graph;
pub mod ingest;
pub mod margins;
pub mod optim;
pub mod pipeline;
pub mod quad;
pub mod simulate;
pub mod special;
pub mod states;

pub use error::{Error, Result};
