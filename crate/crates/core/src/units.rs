//! Decibel helpers.

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise power `N0·B·NF` in watts; `n0_dbm_hz` is the noise spectral
/// density (−174 dBm/Hz at room temperature).
pub fn thermal_noise_watts(n0_dbm_hz: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(n0_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}
