//! Forecasting and evaluation of daily call-center arrivals.
//!
//! The crate covers the whole pipeline: series handling ([`series`]), a
//! fixed catalogue of fourteen forecasting models ([`models`]), real-time
//! forecast combination ([`combine`]), asymmetric loss evaluation
//! ([`loss`]), bootstrap comparison tests ([`inference`]), staffing-based
//! economic evaluation ([`econ`]), density scoring ([`density`]) and the
//! recursive/rolling driver tying them together ([`engine`]).
//!
//! Closed-form components are generic over [`Real`] (`f32` or `f64`);
//! estimation is done in `f64`.

pub mod combine;
pub mod density;
pub mod dist;
pub mod econ;
pub mod engine;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod loss;
pub mod models;
pub mod optim;
pub mod poly;
pub mod scalar;
pub mod seed;
pub mod series;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LossConfigF64 = loss::LossConfig<f64>;
pub type LossConfigF32 = loss::LossConfig<f32>;
pub type LossTableF64 = loss::LossTable<f64>;
pub type LossTableF32 = loss::LossTable<f32>;
pub type CombinedForecastF64 = combine::CombinedForecast<f64>;
pub type CombinedForecastF32 = combine::CombinedForecast<f32>;
pub type SlaConfigF64 = econ::SlaConfig<f64>;
pub type SlaConfigF32 = econ::SlaConfig<f32>;
pub type PayoffSchemeF64 = econ::PayoffScheme<f64>;
pub type PayoffSchemeF32 = econ::PayoffScheme<f32>;
pub type EconConfigF64 = econ::EconConfig<f64>;
pub type EconConfigF32 = econ::EconConfig<f32>;
pub type EconReportF64 = econ::EconReport<f64>;
pub type EconReportF32 = econ::EconReport<f32>;
