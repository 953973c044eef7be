//! Scenario presets and experiment drivers.
//!
//! Everything here orchestrates the simulation and risk layers into the
//! runnable studies: the cosine benign-overfitting demo, convergence-rate
//! sweeps under explicit/implicit regularisation, and the temperature
//! pipeline. Drivers emit plot-ready tables; no rendering happens here.

mod cosine;
mod report;
mod sweep;
mod temperature;

pub use cosine::{run_cosine_demo, CosineDemo, CosineRegime, RegMode};
pub use report::{
    slope_summary_json, write_gram_csv, write_predictions_csv, write_results_csv,
    write_rmse_csv, write_train_csv,
};
pub use sweep::{
    fit_loglog_slope, run_rate_sweep, GammaRule, PRule, Scenario, SigmaXRule, SweepRecord,
    SweepResult,
};
pub use temperature::{
    continent_gram, generate_synthetic_cities, ingest_city_csv, ingest_city_csv_path,
    run_temperature, seasonal_series, write_city_csv, CityRecord, CityTable, SynthCityConfig,
    TempResult, TempRow,
};
