//! Plot-ready output tables.
//!
//! All writers are byte-deterministic: floats use the shortest round-trip
//! representation, rows follow the deterministic orders produced by the
//! drivers, and reruns with the same seed yield identical files.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::Mat;
use crate::scalar::Real;

use super::cosine::CosineDemo;
use super::sweep::{SweepRecord, SweepResult};
use super::temperature::TempRow;

/// Results CSV, one row per (n, trial):
/// `scenario,n,p,gamma,sigma_x,trial,train_mse,test_mse,test_se,B,V,S1,S2,S3,delta_opnorm,mu_n_K,mu_n_A,event_C,event_D`.
pub fn write_results_csv<T: Real, W: Write>(
    w: &mut W,
    scenario: &str,
    records: &[SweepRecord<T>],
) -> Result<()> {
    writeln!(
        w,
        "scenario,n,p,gamma,sigma_x,trial,train_mse,test_mse,test_se,\
         B,V,S1,S2,S3,delta_opnorm,mu_n_K,mu_n_A,event_C,event_D"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            scenario,
            r.n,
            r.p,
            r.gamma,
            r.sigma_x,
            r.trial,
            r.train_mse,
            r.test_mse,
            r.test_se,
            r.b,
            r.v,
            r.s1,
            r.s2,
            r.s3,
            r.delta_opnorm,
            r.mu_n_k,
            r.mu_n_a,
            r.event_c,
            r.event_d
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SlopeSummary<'a> {
    scenario: &'a str,
    slope: Option<f64>,
    slope_se: Option<f64>,
    n_grid: &'a [usize],
    medians: Vec<f64>,
}

/// Slope summary JSON: `{scenario, slope, slope_se, n_grid, medians[]}`.
pub fn slope_summary_json<T: Real>(result: &SweepResult<T>) -> String {
    let summary = SlopeSummary {
        scenario: &result.scenario,
        slope: result.slope.map(|(s, _)| s.as_f64()),
        slope_se: result.slope.map(|(_, se)| se.as_f64()),
        n_grid: &result.n_grid,
        medians: result.medians.iter().map(|m| m.as_f64()).collect(),
    };
    serde_json::to_string_pretty(&summary).expect("slope summary serializes")
}

/// Cosine-demo prediction table: `z,g_true,prediction,kernel_oracle`.
pub fn write_predictions_csv<T: Real, W: Write>(w: &mut W, demo: &CosineDemo<T>) -> Result<()> {
    writeln!(w, "z,g_true,prediction,kernel_oracle")?;
    for ((z, g, pred), krr) in demo.predictions.iter().zip(&demo.kernel_oracle) {
        writeln!(w, "{z},{g},{pred},{krr}")?;
    }
    Ok(())
}

/// Cosine-demo training points: `z,y`.
pub fn write_train_csv<T: Real, W: Write>(w: &mut W, demo: &CosineDemo<T>) -> Result<()> {
    writeln!(w, "z,y")?;
    for (z, y) in &demo.train {
        writeln!(w, "{z},{y}")?;
    }
    Ok(())
}

/// Temperature RMSE table: `continent,p,trial,rmse`.
pub fn write_rmse_csv<T: Real, W: Write>(w: &mut W, rows: &[TempRow<T>]) -> Result<()> {
    writeln!(w, "continent,p,trial,rmse")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.continent, r.p, r.trial, r.rmse)?;
    }
    Ok(())
}

/// Square Gram CSV (no header) with a JSON sidecar listing the
/// latitude-sorted city ids.
pub fn write_gram_csv<T: Real, W: Write>(
    gram_out: &mut W,
    sidecar_out: &mut W,
    continent: &str,
    p: usize,
    gram: &Mat<T>,
    city_ids: &[String],
) -> Result<()> {
    for i in 0..gram.rows() {
        let row = gram.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                write!(gram_out, ",")?;
            }
            write!(gram_out, "{v}")?;
        }
        writeln!(gram_out)?;
    }
    #[derive(Serialize)]
    struct Sidecar<'a> {
        continent: &'a str,
        p: usize,
        city_ids: &'a [String],
    }
    let json = serde_json::to_string_pretty(&Sidecar { continent, p, city_ids })
        .expect("sidecar serializes");
    sidecar_out.write_all(json.as_bytes())?;
    writeln!(sidecar_out)?;
    Ok(())
}
