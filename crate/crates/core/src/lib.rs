//! Analytics for daily price-limit hits in Chinese A-share tick data.
//!
//! The library covers the full pipeline from raw quote records to
//! publication-shaped statistics:
//!
//! - [`market_data`]: canonical tick/LOB data model, CSV ingestion, and
//!   aggressor-side classification of trades.
//! - [`limit_engine`]: daily limit prices under the exchange rounding rule,
//!   detection and segmentation of at-limit intervals, next-day
//!   continuation/reversal classification.
//! - [`aggregation`]: regime calendar, capitalization portfolios, mergeable
//!   hit counters, per-stock statistics, and intraday occurrence patterns.
//! - [`distfit`]: left-truncated normal fitting by OLS and by moment-based
//!   MLE through a monotone root equation.
//! - [`prehit`]: pre-hit price velocity profiles and last-N-trades event
//!   studies (trade sizes, returns, volatility, spread).
//! - [`synthgen`]: deterministic synthetic corpus generator with a ground
//!   truth manifest, used as the verification oracle for everything above.
//!
//! All prices are integer cents end to end; limit comparisons are exact.

pub mod aggregation;
pub mod distfit;
pub mod limit_engine;
pub mod market_data;
pub mod prehit;
pub mod rng;
pub mod synthgen;
