//! Synthetic histories, the CSV formats, forecasting and uncertainty sets.

mod csv_io;
mod forecast;
mod generator;

pub use csv_io::{
    load_history_csv, read_history, save_history_csv, write_history, write_prices, HISTORY_HEADER, PRICES_HEADER,
};
pub use forecast::{build_uncertainty_set, day_ahead_instance, forecast, lookback_days, Lookback};
pub use generator::{generate_history, GeneratorConfig, TripSpec};
