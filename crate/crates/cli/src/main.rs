//! `marketlag` command-line interface.
//!
//! Each subcommand runs one stage on files produced by the previous one;
//! `run` executes the whole pipeline from a TOML config. Failures print one
//! JSON line on stderr and exit with 1 (input/validation) or 2 (numerical).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use marketlag_core::correlation::{correlation_matrix, lag_augment};
use marketlag_core::network::{asset_graph, centralities, distance_matrix, mds_embed, noise_distance_threshold};
use marketlag_core::panel::{self, read_price_csv, read_return_csv, write_price_csv, write_return_csv};
use marketlag_core::pipeline::{classified_spectrum, run_pipeline, PipelineConfig};
use marketlag_core::spectral::{eigendecompose, histogram, remove_top_modes};
use marketlag_core::synthetic::{generate_synthetic, SyntheticSpec};
use marketlag_core::{
    AssetGraph, CalendarMode, CalendarPolicy, CorrelationMatrix, DistanceMatrix, Error, Frequency, MarchenkoPastur,
    Method, Result, SpectralSummary,
};

#[derive(Parser)]
#[command(name = "marketlag", version, about = "Lead-lag correlation networks of stock-market indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a price table and write log-returns.
    Ingest(IngestArgs),
    /// Correlation matrix of a return table, optionally lag-augmented.
    Correlate(CorrelateArgs),
    /// Eigenvalues and eigenvectors of a correlation matrix.
    Spectrum(SpectrumArgs),
    /// Shuffle-null ensemble and eigenvalue classification.
    Null(NullArgs),
    /// Iteratively regress out the leading collective modes.
    RemoveMode(RemoveModeArgs),
    /// Correlation distances `sqrt(2(1 - c))`.
    Distance(DistanceArgs),
    /// Noise distance threshold from shuffled returns.
    NoiseThreshold(NoiseArgs),
    /// Threshold asset graph.
    Graph(GraphArgs),
    /// Degree, eigenvector and betweenness centralities of a graph.
    Centrality(CentralityArgs),
    /// Two-dimensional (or m-dimensional) stress-minimising embedding.
    Embed(EmbedArgs),
    /// Generate a synthetic lead-lag price panel.
    Synth(SynthArgs),
    /// Run the full pipeline from a config file.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pearson,
    Spearman,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pearson => Method::Pearson,
            MethodArg::Spearman => Method::Spearman,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CalendarArg {
    Intersection,
    UnionFillForward,
    UnionZeroReturn,
}

#[derive(Args)]
struct ReturnsInput {
    /// Wide return table (date column + one column per series).
    #[arg(long)]
    returns: PathBuf,
    /// The return table holds weekly averages.
    #[arg(long)]
    weekly: bool,
}

impl ReturnsInput {
    fn load(&self) -> Result<panel::ReturnPanel> {
        let freq = if self.weekly { Frequency::Weekly } else { Frequency::Daily };
        read_return_csv(File::open(&self.returns)?, freq)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "union-fill-forward")]
    calendar: CalendarArg,
    #[arg(long, default_value_t = 5)]
    max_fill: usize,
    /// Average daily returns within ISO weeks.
    #[arg(long)]
    weekly: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: ReturnsInput,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    max_lag: usize,
    /// JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the labeled grid as delimited text.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Correlation matrix JSON.
    #[arg(long)]
    corr: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Eigenvalue histogram with the Marchenko-Pastur density.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    bins: usize,
}

#[derive(Args)]
struct NullArgs {
    #[command(flatten)]
    input: ReturnsInput,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    max_lag: usize,
    #[arg(long, default_value_t = 100)]
    sims: usize,
    #[arg(long)]
    seed: u64,
    /// Per-rank envelope CSV.
    #[arg(long)]
    out: PathBuf,
    /// Classified spectrum JSON.
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
}

#[derive(Args)]
struct RemoveModeArgs {
    #[command(flatten)]
    input: ReturnsInput,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
    #[arg(long, default_value_t = 1)]
    modes: usize,
    /// Standardised residual returns after the last round.
    #[arg(long)]
    out: PathBuf,
    /// Spectrum of the final residual correlation matrix.
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    corr: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    input: ReturnsInput,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    max_lag: usize,
    #[arg(long, default_value_t = 1000)]
    sims: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Distance matrix CSV.
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    threshold: f64,
    /// Graph JSON.
    #[arg(long)]
    out: PathBuf,
    /// Edge list (source, target, distance).
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args)]
struct CentralityArgs {
    /// Graph JSON.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    n_west: usize,
    #[arg(long, default_value_t = 10)]
    n_east: usize,
    #[arg(long, default_value_t = 0.6)]
    common_loading: f64,
    #[arg(long, default_value_t = 0.6)]
    lead_lag_loading: f64,
    #[arg(long, default_value_t = 0.0)]
    overlap_loading: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 1250)]
    days: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory. Without either, the
    /// `MARKETLAG_OUT_DIR` environment variable is used.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides seeds.master.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides input.path.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    max_lag: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_corr(path: &Path) -> Result<CorrelationMatrix> {
    let raw: CorrelationMatrix = serde_json::from_reader(File::open(path)?)?;
    CorrelationMatrix::new(raw.labels, raw.values, raw.method, raw.sample_size)
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn prepare(input: &ReturnsInput, max_lag: usize) -> Result<panel::ReturnPanel> {
    let p = input.load()?;
    lag_augment(&p, max_lag)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let prices = read_price_csv(File::open(&a.input)?)?;
            let mode = match a.calendar {
                CalendarArg::Intersection => CalendarMode::Intersection,
                CalendarArg::UnionFillForward => CalendarMode::UnionFillForward,
                CalendarArg::UnionZeroReturn => CalendarMode::UnionZeroReturn,
            };
            let aligned = panel::align_calendars(&prices, CalendarPolicy { mode, max_consecutive_fill: a.max_fill })?;
            let mut r = panel::log_returns(&aligned)?;
            if a.weekly {
                r = panel::weekly_average(&r)?;
            }
            info!("{} rows x {} series", r.n_rows(), r.n_series());
            let mut w = create(&a.out)?;
            write_return_csv(&r, &mut w)?;
            finish(w)
        }
        Command::Correlate(a) => {
            let p = prepare(&a.input, a.max_lag)?;
            let c = correlation_matrix(&p, a.method.into())?;
            let mut w = create(&a.out)?;
            c.write_json(&mut w)?;
            finish(w)?;
            if let Some(path) = a.csv {
                let mut w = create(&path)?;
                c.write_csv(&mut w)?;
                finish(w)?;
            }
            Ok(())
        }
        Command::Spectrum(a) => {
            let c = read_corr(&a.corr)?;
            let s = eigendecompose(&c)?;
            let mut w = create(&a.out)?;
            s.write_json(&mut w)?;
            finish(w)?;
            if let Some(path) = a.histogram {
                let mp = MarchenkoPastur::for_panel(c.sample_size, c.dim()).ok();
                let top = s.eigenvalues[0].max(mp.map_or(0.0, |m| m.bounds().1));
                let h = histogram(&s.eigenvalues, a.bins, (0.0, top * 1.02), mp.as_ref())?;
                let mut w = create(&path)?;
                h.write_csv(&mut w)?;
                finish(w)?;
            }
            Ok(())
        }
        Command::Null(a) => {
            let p = prepare(&a.input, a.max_lag)?;
            let (spectrum, null) = classified_spectrum(&p, a.sims, a.seed, a.method.into())?;
            let mut w = create(&a.out)?;
            null.write_envelope_csv(Some(&spectrum.eigenvalues), &mut w)?;
            finish(w)?;
            if let Some(path) = a.spectrum_out {
                let mut w = create(&path)?;
                spectrum.write_json(&mut w)?;
                finish(w)?;
            }
            Ok(())
        }
        Command::RemoveMode(a) => {
            let p = a.input.load()?;
            let rounds = remove_top_modes(&p, a.modes, a.method.into())?;
            let last = rounds.last().ok_or_else(|| Error::InvalidArgument("--modes must be at least 1".into()))?;
            let mut w = create(&a.out)?;
            write_return_csv(&last.standardized_residuals, &mut w)?;
            finish(w)?;
            if let Some(path) = a.spectrum_out {
                let s: SpectralSummary = eigendecompose(&last.residual_correlation)?;
                let mut w = create(&path)?;
                s.write_json(&mut w)?;
                finish(w)?;
            }
            Ok(())
        }
        Command::Distance(a) => {
            let d = distance_matrix(&read_corr(&a.corr)?)?;
            let mut w = create(&a.out)?;
            d.write_csv(&mut w)?;
            finish(w)
        }
        Command::NoiseThreshold(a) => {
            let p = prepare(&a.input, a.max_lag)?;
            let t = noise_distance_threshold(&p, a.sims, a.seed, a.method.into())?;
            let mut w = create(&a.out)?;
            serde_json::to_writer_pretty(
                &mut w,
                &serde_json::json!({ "threshold": t, "sims": a.sims, "seed": a.seed, "method": Method::from(a.method) }),
            )?;
            finish(w)
        }
        Command::Graph(a) => {
            let d = DistanceMatrix::read_csv(File::open(&a.dist)?)?;
            let g = asset_graph(&d, a.threshold)?;
            let mut w = create(&a.out)?;
            g.write_json(&mut w)?;
            finish(w)?;
            if let Some(path) = a.edges {
                let mut w = create(&path)?;
                g.write_edge_list(&mut w)?;
                finish(w)?;
            }
            Ok(())
        }
        Command::Centrality(a) => {
            let g: AssetGraph = serde_json::from_reader(File::open(&a.graph)?)?;
            let r = centralities(&g)?;
            let mut w = create(&a.out)?;
            r.write_json(&mut w)?;
            finish(w)
        }
        Command::Embed(a) => {
            let d = DistanceMatrix::read_csv(File::open(&a.dist)?)?;
            let e = mds_embed(&d, a.dim, a.seed)?;
            info!("stress {:.6} after {} iterations", e.stress, e.iterations);
            let mut w = create(&a.out)?;
            e.write_csv(&mut w)?;
            finish(w)
        }
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                n_west: a.n_west,
                n_east: a.n_east,
                common_loading: a.common_loading,
                lead_lag_loading: a.lead_lag_loading,
                overlap_loading: a.overlap_loading,
                noise: a.noise,
                days: a.days,
                seed: a.seed,
            };
            let prices = generate_synthetic(&spec)?;
            let mut w = create(&a.out)?;
            write_price_csv(&prices, &mut w)?;
            finish(w)
        }
        Command::Run(a) => {
            let mut cfg = PipelineConfig::from_file(&a.config)?;
            if let Some(dir) = a.out_dir {
                cfg.output_dir = Some(dir);
            }
            if let Some(seed) = a.seed {
                cfg.seeds.master = Some(seed);
            }
            if let Some(input) = a.input {
                cfg.input.path = Some(input);
                cfg.input.synthetic = None;
            }
            if let Some(m) = a.method {
                cfg.correlation.method = m.into();
            }
            if let Some(l) = a.max_lag {
                cfg.correlation.max_lag = l;
            }
            let manifest = run_pipeline(&cfg)?;
            info!("wrote {} artifacts to {}", manifest.artifacts.len(), cfg.resolved_output_dir().display());
            Ok(())
        }
    }
}

fn stage_of(e: &Error) -> Option<&str> {
    match e {
        Error::Stage { stage, .. } => Some(stage),
        _ => None,
    }
}

/// Exit code and the one-line JSON report for a failure.
fn report(e: &Error) -> (u8, String) {
    let (kind, code) = if e.is_numerical() { ("numerical", 2) } else { ("input", 1) };
    let line = serde_json::json!({ "error": kind, "stage": stage_of(e), "message": e.to_string() });
    (code, line.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, line) = report(&e);
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_with_two() {
        let inner = Error::NoConvergence { what: "power iteration", iterations: 10 };
        let e = Error::Stage { stage: "centrality".into(), source: Box::new(inner) };
        let (code, line) = report(&e);
        assert_eq!(code, 2);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"], "numerical");
        assert_eq!(v["stage"], "centrality");
        assert!(!line.contains('\n'));
    }

    #[test]
    fn input_failures_exit_with_one() {
        let (code, line) = report(&Error::InvalidArgument("bad".into()));
        assert_eq!(code, 1);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"], "input");
        assert!(v["stage"].is_null());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
