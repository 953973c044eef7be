//! Latitude regression from temperature time series.
//!
//! Each city contributes a raw temperature series; within a window of the
//! first p recordings the series is standardized per city, and latitude is
//! regressed onto the p^{-1/2}-scaled covariates, unregularised by default.
//! Train/test membership is sampled per trial and keyed by city id, so row
//! order never affects results. A synthetic generator with a latitude-driven
//! seasonal cycle stands in for non-redistributable station data.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::ridge::{fit_dual_pinv, predict};
use crate::rng::{standard_normal, uniform01, SeedTree};
use crate::scalar::Real;

/// One location's metadata and raw series.
#[derive(Debug, Clone, PartialEq)]
pub struct CityRecord<T> {
    pub city_id: String,
    pub continent: String,
    /// Degrees, |latitude| <= 90.
    pub latitude: T,
    pub temps: Vec<T>,
}

/// Parsed city table plus ingestion bookkeeping.
#[derive(Debug, Clone)]
pub struct CityTable<T> {
    pub records: Vec<CityRecord<T>>,
    /// Rows dropped for missing (empty) temperature cells.
    pub rejected_rows: usize,
}

impl<T: Real> CityTable<T> {
    pub fn continent_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.continent.clone()).or_insert(0) += 1;
        }
        counts
    }
}

/// Reads the city CSV schema `city_id,continent,latitude,t_0001,...`.
///
/// Hard errors (with line numbers): malformed header, ragged rows,
/// non-numeric cells, latitude out of range. Rows with *empty* temperature
/// cells are rejected and counted, not fatal.
pub fn ingest_city_csv<T: Real, R: BufRead>(reader: R) -> Result<CityTable<T>> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4
        || cols[0].trim() != "city_id"
        || cols[1].trim() != "continent"
        || cols[2].trim() != "latitude"
    {
        return Err(Error::Parse {
            line: 1,
            msg: "header must start with city_id,continent,latitude,t_0001,...".into(),
        });
    }
    let p_len = cols.len() - 3;
    for (i, col) in cols[3..].iter().enumerate() {
        let col = col.trim();
        let ok = col
            .strip_prefix("t_")
            .and_then(|s| s.parse::<usize>().ok())
            .map(|idx| idx == i + 1)
            .unwrap_or(false);
        if !ok {
            return Err(Error::Parse {
                line: 1,
                msg: format!("temperature column {} must be named t_{:04}", i + 4, i + 1),
            });
        }
    }

    let mut records = Vec::new();
    let mut rejected = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let latitude: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-numeric latitude '{}'", fields[2]),
        })?;
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("latitude {latitude} outside [-90, 90]"),
            });
        }
        let mut temps = Vec::with_capacity(p_len);
        let mut missing = false;
        for (j, cell) in fields[3..].iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                missing = true;
                break;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric temperature in column t_{:04}: '{cell}'", j + 1),
            })?;
            temps.push(T::of(v));
        }
        if missing {
            rejected += 1;
            continue;
        }
        records.push(CityRecord {
            city_id: fields[0].trim().to_string(),
            continent: fields[1].trim().to_string(),
            latitude: T::of(latitude),
            temps,
        });
    }
    Ok(CityTable { records, rejected_rows: rejected })
}

pub fn ingest_city_csv_path<T: Real>(path: &Path) -> Result<CityTable<T>> {
    let file = std::fs::File::open(path)?;
    ingest_city_csv(BufReader::new(file))
}

/// Writes records in the ingestion schema. Floats use the shortest
/// round-trip representation, so write/read is lossless.
pub fn write_city_csv<T: Real, W: Write>(w: &mut W, records: &[CityRecord<T>]) -> Result<()> {
    let p_len = records.first().map(|r| r.temps.len()).unwrap_or(0);
    write!(w, "city_id,continent,latitude")?;
    for i in 1..=p_len {
        write!(w, ",t_{i:04}")?;
    }
    writeln!(w)?;
    for r in records {
        if r.temps.len() != p_len {
            return Err(Error::Dim(format!(
                "city {} has {} temps, expected {p_len}",
                r.city_id,
                r.temps.len()
            )));
        }
        write!(w, "{},{},{}", r.city_id, r.continent, r.latitude)?;
        for t in &r.temps {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Synthetic city generation parameters.
#[derive(Debug, Clone)]
pub struct SynthCityConfig {
    pub n_cities: usize,
    pub p_len: usize,
    /// Daily noise standard deviation around the seasonal cycle.
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthCityConfig {
    pub fn new(n_cities: usize, p_len: usize, seed: u64) -> Self {
        SynthCityConfig { n_cities, p_len, noise_sd: 6.0, seed }
    }
}

/// Noiseless seasonal signal for a latitude: mean level plus an annual
/// cosine whose amplitude grows with |latitude| and whose phase flips
/// across the equator.
pub fn seasonal_series<T: Real>(latitude: T, p_len: usize) -> Vec<T> {
    let lat = latitude.as_f64();
    let mean = 28.0 - 0.45 * lat.abs();
    let amplitude = 2.0 + 0.35 * lat.abs();
    let phase = if lat >= 0.0 { std::f64::consts::PI } else { 0.0 };
    let omega = 2.0 * std::f64::consts::PI / 365.0;
    (0..p_len)
        .map(|t| T::of(mean + amplitude * (omega * t as f64 + phase).cos()))
        .collect()
}

/// Generates cities with latitudes uniform on (-60, 70) and the seasonal
/// signal of [`seasonal_series`] plus i.i.d. Gaussian weather noise. Each
/// city derives its own stream from (seed, city index).
pub fn generate_synthetic_cities_with<T: Real>(
    cfg: &SynthCityConfig,
) -> Result<Vec<CityRecord<T>>> {
    if cfg.n_cities < 10 {
        return Err(Error::Config("n_cities must be >= 10".into()));
    }
    if cfg.p_len == 0 || cfg.p_len > 9999 {
        return Err(Error::Config("p_len must be in 1..=9999".into()));
    }
    let tree = SeedTree::new(cfg.seed);
    let noise_sd = T::of(cfg.noise_sd);
    Ok((0..cfg.n_cities)
        .map(|i| {
            let mut rng = tree.stream(&format!("synth-city/{i}"));
            let latitude = T::of(-60.0) + T::of(130.0) * uniform01::<T>(&mut rng);
            let mut temps = seasonal_series(latitude, cfg.p_len);
            for t in &mut temps {
                *t += noise_sd * standard_normal::<T>(&mut rng);
            }
            CityRecord {
                city_id: format!("city{i:04}"),
                continent: "synthetic".to_string(),
                latitude,
                temps,
            }
        })
        .collect())
}

/// Default-noise synthetic generator.
pub fn generate_synthetic_cities<T: Real>(
    n_cities: usize,
    p_len: usize,
    seed: u64,
) -> Result<Vec<CityRecord<T>>> {
    generate_synthetic_cities_with(&SynthCityConfig::new(n_cities, p_len, seed))
}

/// One (continent, p, trial) RMSE measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct TempRow<T> {
    pub continent: String,
    pub p: usize,
    pub trial: usize,
    pub rmse: T,
}

#[derive(Debug, Clone)]
pub struct TempResult<T> {
    pub rows: Vec<TempRow<T>>,
    /// Continents skipped for having fewer than 5 cities.
    pub skipped: Vec<String>,
}

const MIN_CITIES: usize = 5;

/// Per-city z-scores of the first p entries (population sd; constant
/// series standardize to zero).
fn standardize_window<T: Real>(records: &[&CityRecord<T>], p: usize) -> Mat<T> {
    let mut x = Mat::zeros(records.len(), p);
    for (i, r) in records.iter().enumerate() {
        let window = &r.temps[..p];
        let pf = T::of_usize(p);
        let mean = window.iter().copied().sum::<T>() / pf;
        let var = window.iter().map(|&t| (t - mean) * (t - mean)).sum::<T>() / pf;
        let sd = var.sqrt();
        let row = x.row_mut(i);
        if sd > T::zero() {
            for (out, &t) in row.iter_mut().zip(window) {
                *out = (t - mean) / sd;
            }
        }
    }
    x
}

/// Deterministic per-trial membership: cities ranked by a hash of
/// (seed, continent, trial, city_id); the first ceil(frac * m) are train.
/// Permuting input rows cannot change membership.
fn train_mask<T: Real>(
    cities: &[&CityRecord<T>],
    continent: &str,
    trial: usize,
    tree: &SeedTree,
    train_frac: f64,
) -> Vec<bool> {
    let m = cities.len();
    let mut keyed: Vec<(u64, usize)> = cities
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let label = format!("temperature/{continent}/trial={trial}/{}", c.city_id);
            (tree.label_hash(&label), i)
        })
        .collect();
    keyed.sort();
    let k = ((train_frac * m as f64).round() as usize).clamp(1, m - 1);
    let mut mask = vec![false; m];
    for &(_, i) in keyed.iter().take(k) {
        mask[i] = true;
    }
    mask
}

/// Runs the latitude regression. For each continent with at least 5
/// cities, each window length p and each trial: fit on the train fraction,
/// report test RMSE. gamma = 0 reproduces the unregularised pipeline
/// (rank-deficient windows go through the least-squares pseudo-inverse).
pub fn run_temperature<T: Real>(
    records: &[CityRecord<T>],
    train_frac: f64,
    trials: usize,
    p_grid: &[usize],
    gamma: f64,
    seed: u64,
    workers: usize,
) -> Result<TempResult<T>> {
    if !(0.0..1.0).contains(&train_frac) || train_frac == 0.0 {
        return Err(Error::Config("train_frac must lie in (0, 1)".into()));
    }
    if trials == 0 || p_grid.is_empty() {
        return Err(Error::Config("need trials >= 1 and a non-empty p_grid".into()));
    }
    let series_len = records.first().map(|r| r.temps.len()).unwrap_or(0);
    for &p in p_grid {
        if p == 0 || p > series_len {
            return Err(Error::Config(format!(
                "window p = {p} outside the series length {series_len}"
            )));
        }
    }

    let mut by_continent: BTreeMap<&str, Vec<&CityRecord<T>>> = BTreeMap::new();
    for r in records {
        if r.temps.len() != series_len {
            return Err(Error::Dim(format!(
                "city {} has series length {}, expected {series_len}",
                r.city_id,
                r.temps.len()
            )));
        }
        by_continent.entry(r.continent.as_str()).or_default().push(r);
    }
    // Canonical processing order: results are a function of the city set,
    // never of input row order.
    for cities in by_continent.values_mut() {
        cities.sort_by(|a, b| a.city_id.cmp(&b.city_id));
        if cities.windows(2).any(|w| w[0].city_id == w[1].city_id) {
            return Err(Error::Config(format!(
                "duplicate city_id within continent {}",
                cities[0].continent
            )));
        }
    }

    let tree = SeedTree::new(seed);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    for (continent, cities) in &by_continent {
        if cities.len() < MIN_CITIES {
            log::warn!("skipping continent {continent}: only {} cities", cities.len());
            skipped.push(continent.to_string());
            continue;
        }
        let lats: Vec<T> = cities.iter().map(|c| c.latitude).collect();
        for &p in p_grid {
            let x_all = standardize_window(cities, p);
            let trial_rows: Result<Vec<TempRow<T>>> = pool.install(|| {
                (0..trials)
                    .into_par_iter()
                    .map(|trial| {
                        let mask = train_mask(cities, continent, trial, &tree, train_frac);
                        let n_train = mask.iter().filter(|&&m| m).count();
                        let mut x_train = Mat::zeros(n_train, p);
                        let mut y_train = Vec::with_capacity(n_train);
                        let mut row = 0;
                        for (i, &is_train) in mask.iter().enumerate() {
                            if is_train {
                                x_train.row_mut(row).copy_from_slice(x_all.row(i));
                                y_train.push(lats[i]);
                                row += 1;
                            }
                        }
                        let sol = fit_dual_pinv(&x_train, &y_train, T::of(gamma))?;
                        let mut se_sum = T::zero();
                        let mut n_test = 0usize;
                        for (i, &is_train) in mask.iter().enumerate() {
                            if !is_train {
                                let pred = predict(&sol, &x_train, x_all.row(i))?;
                                let d = pred - lats[i];
                                se_sum += d * d;
                                n_test += 1;
                            }
                        }
                        Ok(TempRow {
                            continent: continent.to_string(),
                            p,
                            trial,
                            rmse: (se_sum / T::of_usize(n_test)).sqrt(),
                        })
                    })
                    .collect()
            });
            rows.extend(trial_rows?);
        }
    }
    Ok(TempResult { rows, skipped })
}

/// Scaled inner-product matrix p^{-1} X Xᵀ for one continent at window p,
/// rows ordered by latitude, together with the matching city ids.
pub fn continent_gram<T: Real>(
    records: &[CityRecord<T>],
    continent: &str,
    p: usize,
) -> Result<(Mat<T>, Vec<String>)> {
    let mut cities: Vec<&CityRecord<T>> = records
        .iter()
        .filter(|r| r.continent == continent)
        .collect();
    if cities.is_empty() {
        return Err(Error::Config(format!("no cities for continent '{continent}'")));
    }
    if cities.iter().any(|c| c.temps.len() < p) {
        return Err(Error::Config(format!("window p = {p} exceeds a series length")));
    }
    cities.sort_by(|a, b| {
        a.latitude
            .partial_cmp(&b.latitude)
            .expect("finite latitude")
            .then_with(|| a.city_id.cmp(&b.city_id))
    });
    let x = standardize_window(&cities, p);
    let gram = x.gram_nt(T::one() / T::of_usize(p));
    let ids = cities.iter().map(|c| c.city_id.clone()).collect();
    Ok((gram, ids))
}
