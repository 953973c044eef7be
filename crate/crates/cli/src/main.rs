//! Experiment harness CLI.
//!
//! Subcommands: `cosine-demo`, `rate-sweep`, `temperature`, `diagnostics`,
//! `synth-cities`. Every run takes all randomness from one `--seed` (or the
//! seed in the config file) and echoes its fully-resolved configuration
//! into the output directory, so any artifact can be reproduced exactly by
//! rerunning with the echoed config. Exit codes: 0 success, 2 config
//! error, 1 runtime failure. Logging level comes from `LMMBENCH_LOG`
//! (error, warn, info, debug).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lmm_core::experiments::{
    continent_gram, generate_synthetic_cities, ingest_city_csv_path, run_cosine_demo,
    run_rate_sweep, run_temperature, slope_summary_json, write_city_csv, write_gram_csv,
    write_predictions_csv, write_results_csv, write_rmse_csv, write_train_csv, CityRecord,
    CosineRegime, RegMode, Scenario,
};
use lmm_core::lmm::{feature_rows, generate_dataset, sample_latents, LmmConfig, TargetSpec};
use lmm_core::risk::delta_matrix;
use lmm_core::rng::{NoiseFamily, SeedTree};
use lmm_core::spectrum::EigenSpectrum;

#[derive(Parser)]
#[command(name = "lmm-bench", version, about = "Latent metric model regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benign-overfitting demo on g(z) = cos(3z): 60 training points, 1000
    /// plotted test predictions.
    CosineDemo(CosineDemoArgs),
    /// Convergence-rate sweep over an ascending n grid.
    RateSweep(RateSweepArgs),
    /// Latitude regression from temperature series (real CSV or synthetic).
    Temperature(TemperatureArgs),
    /// Monte Carlo sanity checks of the model identities.
    Diagnostics(DiagnosticsArgs),
    /// Write a synthetic city CSV.
    SynthCities(SynthCitiesArgs),
}

#[derive(Args)]
struct CosineDemoArgs {
    /// Eigenvalue regime.
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Regularisation mode.
    #[arg(long = "reg", value_enum)]
    reg: RegArg,
    /// Ambient dimension.
    #[arg(long)]
    p: usize,
    /// Truncation override for the infinite regimes.
    #[arg(long)]
    trunc: Option<usize>,
    /// Response noise level (default 0.4).
    #[arg(long)]
    sigma_y: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum RegimeArg {
    Finite,
    Exp,
    Poly,
}

impl From<RegimeArg> for CosineRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Finite => CosineRegime::Finite,
            RegimeArg::Exp => CosineRegime::Exp,
            RegimeArg::Poly => CosineRegime::Poly,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum RegArg {
    Explicit,
    Implicit,
}

impl From<RegArg> for RegMode {
    fn from(r: RegArg) -> Self {
        match r {
            RegArg::Explicit => RegMode::Explicit,
            RegArg::Implicit => RegMode::Implicit,
        }
    }
}

#[derive(Args)]
struct RateSweepArgs {
    /// Scenario JSON (strict schema; unknown keys rejected).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override (defaults to the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct TemperatureArgs {
    /// City CSV to ingest (mutually exclusive with --synthetic).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generate this many synthetic cities instead of reading a file.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Series length for synthetic generation.
    #[arg(long, default_value_t = 1450)]
    p_len: usize,
    /// Comma-separated covariate window lengths.
    #[arg(long, value_delimiter = ',', default_value = "10,50,200,800,1450")]
    p_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0.2)]
    train_frac: f64,
    /// Ridge penalty (0 = unregularised).
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also export the per-continent scaled Gram heat-map data.
    #[arg(long, default_value_t = false)]
    export_gram: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnosticsArgs {
    /// Which identity to probe.
    #[arg(long, value_enum)]
    check: CheckArg,
    /// Spectrum preset.
    #[arg(long, default_value = "finite:k_max=20")]
    spectrum: String,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 4096)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma_x: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, ValueEnum)]
enum CheckArg {
    /// E[WᵀW] = I on the retained coordinates.
    WOrthonormality,
    /// E[(1/p) X Xᵀ | z] = Phi Phiᵀ + sigma_x^2 I.
    KernelIdentity,
    /// Median ||Delta||_2 halves when p quadruples.
    DeltaDecay,
}

#[derive(Args)]
struct SynthCitiesArgs {
    #[arg(long, default_value_t = 500)]
    n_cities: usize,
    #[arg(long, default_value_t = 1450)]
    p_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Errors that indicate a bad invocation rather than a runtime failure.
fn is_config_error(err: &lmm_core::Error) -> bool {
    matches!(
        err,
        lmm_core::Error::Config(_)
            | lmm_core::Error::Domain(_)
            | lmm_core::Error::Parse { .. }
            | lmm_core::Error::DuplicateLabel(_)
    )
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<lmm_core::Error> for CliError {
    fn from(err: lmm_core::Error) -> Self {
        if is_config_error(&err) {
            CliError::Config(err.to_string())
        } else {
            CliError::Runtime(err.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LMMBENCH_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CosineDemo(args) => cosine_demo(args),
        Command::RateSweep(args) => rate_sweep(args),
        Command::Temperature(args) => temperature(args),
        Command::Diagnostics(args) => diagnostics(args),
        Command::SynthCities(args) => synth_cities(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_out_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn echo_config<C: Serialize>(out: &Path, config: &C) -> CliResult {
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::Runtime(format!("config echo: {e}")))?;
    write_file(&out.join("config.echo.json"), json.as_bytes())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CosineDemoConfig {
    regime: CosineRegime,
    reg: RegMode,
    p: usize,
    trunc: Option<usize>,
    sigma_y: Option<f64>,
    seed: u64,
}

fn cosine_demo(args: CosineDemoArgs) -> CliResult {
    let config = CosineDemoConfig {
        regime: args.regime.into(),
        reg: args.reg.into(),
        p: args.p,
        trunc: args.trunc,
        sigma_y: args.sigma_y,
        seed: args.seed,
    };
    let demo = run_cosine_demo::<f64>(
        config.regime,
        config.reg,
        config.p,
        config.seed,
        config.trunc,
        config.sigma_y,
    )?;
    ensure_out_dir(&args.out)?;
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, &demo)?;
    write_file(&args.out.join("predictions.csv"), &buf)?;
    buf.clear();
    write_train_csv(&mut buf, &demo)?;
    write_file(&args.out.join("train.csv"), &buf)?;
    echo_config(&args.out, &config)?;
    println!(
        "cosine-demo: train_mse {:.6e}, test_mse {:.6e}, kernel_oracle_mse {:.6e}",
        demo.train_mse, demo.test_mse, demo.kernel_oracle_mse
    );
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid scenario config {}: {e}", path.display())))
}

fn rate_sweep(args: RateSweepArgs) -> CliResult {
    let mut scenario = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    let result = run_rate_sweep::<f64>(&scenario, args.workers)?;
    ensure_out_dir(&args.out)?;
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &result.scenario, &result.records)?;
    write_file(&args.out.join("results.csv"), &buf)?;
    write_file(&args.out.join("slopes.json"), slope_summary_json(&result).as_bytes())?;
    echo_config(&args.out, &scenario)?;
    match result.slope {
        Some((slope, se)) => {
            println!("rate-sweep '{}': slope {slope:.4} (se {se:.4})", result.scenario)
        }
        None => println!(
            "rate-sweep '{}': slope unavailable (fewer than 3 usable grid points)",
            result.scenario
        ),
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemperatureConfig {
    input: Option<PathBuf>,
    synthetic: Option<usize>,
    p_len: usize,
    p_grid: Vec<usize>,
    trials: usize,
    train_frac: f64,
    gamma: f64,
    seed: u64,
    export_gram: bool,
}

fn temperature(args: TemperatureArgs) -> CliResult {
    let config = TemperatureConfig {
        input: args.input.clone(),
        synthetic: args.synthetic,
        p_len: args.p_len,
        p_grid: args.p_grid.clone(),
        trials: args.trials,
        train_frac: args.train_frac,
        gamma: args.gamma,
        seed: args.seed,
        export_gram: args.export_gram,
    };
    let records: Vec<CityRecord<f64>> = match (&config.input, config.synthetic) {
        (Some(path), None) => {
            let table = ingest_city_csv_path::<f64>(path)?;
            log::info!(
                "ingested {} cities ({} rows rejected): {:?}",
                table.records.len(),
                table.rejected_rows,
                table.continent_counts()
            );
            table.records
        }
        (None, Some(n_cities)) => {
            generate_synthetic_cities(n_cities, config.p_len, config.seed)?
        }
        (None, None) => {
            return Err(CliError::Config(
                "temperature needs either --input FILE or --synthetic N".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let result = run_temperature(
        &records,
        config.train_frac,
        config.trials,
        &config.p_grid,
        config.gamma,
        config.seed,
        args.workers,
    )?;
    ensure_out_dir(&args.out)?;
    let mut buf = Vec::new();
    write_rmse_csv(&mut buf, &result.rows)?;
    write_file(&args.out.join("rmse.csv"), &buf)?;
    if config.export_gram {
        let p_max = *config.p_grid.iter().max().expect("non-empty grid");
        let mut continents: Vec<String> =
            records.iter().map(|r| r.continent.clone()).collect();
        continents.sort();
        continents.dedup();
        for continent in continents {
            if result.skipped.contains(&continent) {
                continue;
            }
            let (gram, ids) = continent_gram(&records, &continent, p_max)?;
            let mut gram_buf = Vec::new();
            let mut sidecar_buf = Vec::new();
            write_gram_csv(&mut gram_buf, &mut sidecar_buf, &continent, p_max, &gram, &ids)?;
            write_file(&args.out.join(format!("gram_{continent}.csv")), &gram_buf)?;
            write_file(
                &args.out.join(format!("gram_{continent}.cities.json")),
                &sidecar_buf,
            )?;
        }
    }
    echo_config(&args.out, &config)?;
    println!(
        "temperature: {} rows over {} windows ({} continents skipped)",
        result.rows.len(),
        config.p_grid.len(),
        result.skipped.len()
    );
    Ok(())
}

fn synth_cities(args: SynthCitiesArgs) -> CliResult {
    let records = generate_synthetic_cities::<f64>(args.n_cities, args.p_len, args.seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    let mut buf = Vec::new();
    write_city_csv(&mut buf, &records)?;
    write_file(&args.out, &buf)?;
    println!("synth-cities: wrote {} cities to {}", records.len(), args.out.display());
    Ok(())
}

fn diagnostics(args: DiagnosticsArgs) -> CliResult {
    let spec: EigenSpectrum<f64> = args.spectrum.parse()?;
    if args.reps < 2 {
        return Err(CliError::Config("diagnostics needs --reps >= 2".into()));
    }
    let tree = SeedTree::new(args.seed);
    match args.check {
        CheckArg::WOrthonormality => w_orthonormality(&spec, &args, &tree),
        CheckArg::KernelIdentity => kernel_identity(&spec, &args, &tree),
        CheckArg::DeltaDecay => delta_decay(&spec, &args, &tree),
    }
}

/// Entrywise WᵀW concentration: reports the largest |mean| over the
/// centered Gram entries together with its standard error.
fn w_orthonormality(
    spec: &EigenSpectrum<f64>,
    args: &DiagnosticsArgs,
    tree: &SeedTree,
) -> CliResult {
    let k = spec.nonzero_count().min(20);
    if k == 0 {
        return Err(CliError::Config("spectrum has no nonzero eigenvalues".into()));
    }
    let mut sums = vec![0.0f64; k * k];
    let mut sums_sq = vec![0.0f64; k * k];
    for rep in 0..args.reps {
        let mut rng = tree.stream(&format!("diag/w-orth/{rep}"));
        let z = sample_latents::<f64>(2, &mut rng)?;
        let (_, w) = lmm_core::lmm::sample_gp_panel(spec, &z, args.p, &mut rng)?;
        let w_head = w.columns(0, k);
        let gram = w_head.matmul_tn(&w_head);
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                let d = gram[(i, j)] - target;
                sums[i * k + j] += d;
                sums_sq[i * k + j] += d * d;
            }
        }
    }
    let reps = args.reps as f64;
    let mut worst = (0.0f64, 0.0f64, (0usize, 0usize));
    for i in 0..k {
        for j in 0..k {
            let mean = sums[i * k + j] / reps;
            let var = (sums_sq[i * k + j] / reps - mean * mean).max(0.0);
            let se = (var / reps).sqrt();
            if mean.abs() > worst.0.abs() {
                worst = (mean, se, (i + 1, j + 1));
            }
        }
    }
    println!(
        "w-orthonormality: p = {}, reps = {}, max |mean(WtW - I)| = {:.3e} (se {:.3e}) at entry ({}, {})",
        args.p, args.reps, worst.0, worst.1, worst.2 .0, worst.2 .1
    );
    Ok(())
}

/// Conditional second-moment identity of the covariate Gram given the
/// latents: mean over panel redraws of (1/p) X Xᵀ against Phi Phiᵀ +
/// sigma_x^2 I, reported in standard-error units.
fn kernel_identity(
    spec: &EigenSpectrum<f64>,
    args: &DiagnosticsArgs,
    tree: &SeedTree,
) -> CliResult {
    let n = args.n;
    let mut z_rng = tree.stream("diag/kernel/latents");
    let z = sample_latents::<f64>(n, &mut z_rng)?;
    let phi = feature_rows(spec, &z)?;
    let k_nz = spec.nonzero_count();
    let mut expect = phi.columns(0, k_nz).gram_nt(1.0);
    expect.add_diag(args.sigma_x * args.sigma_x);

    let mut sums = vec![0.0f64; n * n];
    let mut sums_sq = vec![0.0f64; n * n];
    for rep in 0..args.reps {
        let mut rng = tree.stream(&format!("diag/kernel/{rep}"));
        let (mut x, _) = lmm_core::lmm::sample_gp_panel(spec, &z, args.p, &mut rng)?;
        if args.sigma_x > 0.0 {
            for i in 0..n {
                for v in x.row_mut(i) {
                    *v += args.sigma_x * lmm_core::rng::standard_normal::<f64>(&mut rng);
                }
            }
        }
        let gram = x.gram_nt(1.0 / args.p as f64);
        for i in 0..n * n {
            let d = gram.data()[i] - expect.data()[i];
            sums[i] += d;
            sums_sq[i] += d * d;
        }
    }
    let reps = args.reps as f64;
    let mut max_sigma = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..n * n {
        let mean = sums[i] / reps;
        let var = (sums_sq[i] / reps - mean * mean).max(0.0);
        let se = (var / reps).sqrt().max(1e-300);
        max_sigma = max_sigma.max(mean.abs() / se);
        max_abs = max_abs.max(mean.abs());
    }
    println!(
        "kernel-identity: n = {n}, p = {}, reps = {}: max |bias| = {max_abs:.3e}, worst entry at {max_sigma:.2} se",
        args.p, args.reps
    );
    Ok(())
}

/// Median ||Delta||_2 at p and 4p; the ratio should sit near 2.
fn delta_decay(spec: &EigenSpectrum<f64>, args: &DiagnosticsArgs, tree: &SeedTree) -> CliResult {
    let target = TargetSpec::cos3(spec)?;
    let config = LmmConfig {
        spectrum: spec.clone(),
        sigma_x: args.sigma_x,
        sigma_y: 0.0,
        noise: NoiseFamily::Gaussian,
    };
    let median_opnorm = |p: usize| -> Result<f64, CliError> {
        let mut vals = Vec::with_capacity(args.reps);
        for rep in 0..args.reps {
            let mut rng = tree.stream(&format!("diag/delta/{p}/{rep}"));
            let ds = generate_dataset(&config, &target, args.n, p, &mut rng)?;
            vals.push(delta_matrix(&ds).opnorm);
        }
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(vals[vals.len() / 2])
    };
    let lo = median_opnorm(args.p)?;
    let hi = median_opnorm(4 * args.p)?;
    println!(
        "delta-decay: median ||Delta||_2 = {lo:.4e} at p = {}, {hi:.4e} at p = {} (ratio {:.3}, p^-1/2 predicts 2)",
        args.p,
        4 * args.p,
        lo / hi
    );
    Ok(())
}
