//! End-to-end runs driven by a [`PipelineConfig`].
//!
//! Every artifact lands under the configured output directory, one
//! sub-directory per date split, and is listed in `manifest.json` with the
//! stage that produced it, its parameters and its seed. A failing stage
//! removes everything the run wrote before returning the error.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{
    CorrelationConfig, InputConfig, ModesConfig, NetworkConfig, NetworkMatrix, NullConfig, PipelineConfig, OUT_DIR_ENV,
    ReturnsConfig, SeedConfig, SplitConfig, StageToggles,
};

use crate::correlation::{correlation_matrix, cross_correlation, lag_augment, CorrelationMatrix, Method};
use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::marchenko_pastur::MarchenkoPastur;
use crate::network::{asset_graph, centralities, distance_matrix, mds_embed, noise_distance_threshold};
use crate::panel::io::fmt_f64;
use crate::panel::{align_calendars, log_returns, read_price_csv, weekly_average, write_return_csv, ReturnPanel};
use crate::rng::named_seed;
use crate::spectral::{
    classify_eigenvalues, eigendecompose, histogram, remove_top_modes, shuffle_null, NullEnsemble, SpectralSummary,
};
use crate::synthetic::generate_synthetic;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    pub split: Option<String>,
    pub params: Value,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: Option<u64>,
    pub config: PipelineConfig,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn by_stage<'a>(&'a self, stage: &'a str) -> impl Iterator<Item = &'a ArtifactEntry> {
        self.artifacts.iter().filter(move |a| a.stage == stage)
    }
}

struct ArtifactWriter {
    root: PathBuf,
    created_dirs: Vec<PathBuf>,
    created_files: Vec<PathBuf>,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    /// Opens the output directory. Artifacts of a previous run listed in its
    /// manifest are removed; any other content is left alone but makes the
    /// run fail, so the directory never holds unlisted files.
    fn open(root: &Path) -> Result<Self> {
        let mut w = Self { root: root.to_path_buf(), created_dirs: Vec::new(), created_files: Vec::new(), entries: Vec::new() };
        if root.exists() {
            let manifest = root.join(MANIFEST_FILE);
            if manifest.exists() {
                let old: Manifest = serde_json::from_reader(File::open(&manifest)?)?;
                for a in &old.artifacts {
                    let p = root.join(&a.path);
                    if p.is_file() {
                        fs::remove_file(&p)?;
                    }
                }
                fs::remove_file(&manifest)?;
                remove_empty_dirs(root)?;
            }
            if fs::read_dir(root)?.next().is_some() {
                return Err(Error::invalid(format!(
                    "output directory {} is not empty and holds no manifest",
                    root.display()
                )));
            }
        } else {
            w.mkdir(root)?;
        }
        Ok(w)
    }

    fn mkdir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        for d in missing.into_iter().rev() {
            fs::create_dir(&d)?;
            self.created_dirs.push(d);
        }
        Ok(())
    }

    fn write(
        &mut self,
        rel: &str,
        stage: &str,
        split: Option<&str>,
        params: Value,
        seed: Option<u64>,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            self.mkdir(parent)?;
        }
        let file = File::create(&path)?;
        self.created_files.push(path);
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush()?;
        self.entries.push(ArtifactEntry {
            path: rel.to_owned(),
            stage: stage.to_owned(),
            split: split.map(str::to_owned),
            params,
            seed,
        });
        Ok(())
    }

    fn rollback(&self) {
        for f in self.created_files.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn remove_empty_dirs(dir: &Path) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            remove_empty_dirs(&p)?;
            if fs::read_dir(&p)?.next().is_none() {
                fs::remove_dir(&p)?;
            }
        }
    }
    Ok(())
}

fn in_stage<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.to_owned(), source: Box::new(e) },
    })
}

/// Runs every enabled stage and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    in_stage("config", || cfg.validate())?;
    let mut w = in_stage("output", || ArtifactWriter::open(&cfg.resolved_output_dir()))?;
    match execute(cfg, &mut w) {
        Ok(m) => Ok(m),
        Err(e) => {
            w.rollback();
            Err(e)
        }
    }
}

fn execute(cfg: &PipelineConfig, w: &mut ArtifactWriter) -> Result<Manifest> {
    let returns = in_stage("ingest", || load_returns(cfg))?;
    info!("ingest: {} rows x {} series", returns.n_rows(), returns.n_series());
    in_stage("ingest", || {
        w.write(
            "returns.csv",
            "ingest",
            None,
            json!({ "calendar": cfg.calendar, "weekly": cfg.returns.weekly, "rows": returns.n_rows() }),
            None,
            |out| write_return_csv(&returns, out),
        )
    })?;

    for split in cfg.effective_splits() {
        let panel = in_stage("split", || {
            let p = returns.between(split.start, split.end)?;
            if p.n_rows() < 3 {
                return Err(Error::invalid(format!("split {} keeps only {} rows", split.name, p.n_rows())));
            }
            Ok(p)
        })?;
        info!("split {}: {} rows", split.name, panel.n_rows());
        run_split(cfg, w, &split.name, &panel)?;
    }

    // The output location is left out so runs into different directories
    // produce identical manifests.
    let config = PipelineConfig { output_dir: None, ..cfg.clone() };
    let manifest = Manifest { master_seed: cfg.seeds.master, config, artifacts: w.entries.clone() };
    in_stage("manifest", || {
        let path = w.root.join(MANIFEST_FILE);
        let mut out = BufWriter::new(File::create(&path)?);
        w.created_files.push(path);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    })?;
    Ok(manifest)
}

fn load_returns(cfg: &PipelineConfig) -> Result<ReturnPanel> {
    let prices = match (&cfg.input.path, &cfg.input.synthetic) {
        (Some(path), _) => read_price_csv(File::open(path)?)?,
        (None, Some(spec)) => generate_synthetic(spec)?,
        (None, None) => return Err(Error::Config("no input".into())),
    };
    let aligned = align_calendars(&prices, cfg.calendar)?;
    let daily = log_returns(&aligned)?;
    if cfg.returns.weekly {
        weekly_average(&daily)
    } else {
        Ok(daily)
    }
}

struct Kind<'a> {
    name: &'static str,
    panel: &'a ReturnPanel,
    corr: CorrelationMatrix,
    spectrum: SpectralSummary,
}

fn run_split(cfg: &PipelineConfig, w: &mut ArtifactWriter, split: &str, panel: &ReturnPanel) -> Result<()> {
    let st = &cfg.stages;
    let method = cfg.correlation.method;
    let master = cfg.seeds.master.unwrap_or_default();
    let path = |file: &str| format!("{split}/{file}");
    let sp = Some(split);

    let lagged_panel = in_stage("correlate", || lag_augment(panel, cfg.correlation.max_lag))?;
    let kinds: Vec<Kind> = in_stage("correlate", || {
        [("plain", panel), ("lagged", &lagged_panel)]
            .into_iter()
            .map(|(name, p)| {
                let corr = correlation_matrix(p, method)?;
                let spectrum = eigendecompose(&corr)?;
                Ok(Kind { name, panel: p, corr, spectrum })
            })
            .collect::<Result<_>>()
    })?;

    if st.correlate {
        in_stage("correlate", || {
            for k in &kinds {
                let params = json!({ "method": method, "max_lag": lag_of(k.name, cfg), "sample_size": k.corr.sample_size });
                w.write(&path(&format!("correlation_{}.json", k.name)), "correlate", sp, params.clone(), None, |o| {
                    k.corr.write_json(o)
                })?;
                w.write(&path(&format!("heatmap_{}.csv", k.name)), "correlate", sp, params, None, |o| k.corr.write_csv(o))?;
            }
            Ok(())
        })?;
    }

    if st.lag_profiles {
        in_stage("lag_profiles", || {
            let reference = match &cfg.correlation.benchmark {
                Some(b) => SeriesLabel::from(b.as_str()),
                None => panel.labels()[0].clone(),
            };
            let profiles = cross_correlation(panel, &reference, panel.labels(), cfg.correlation.lag_range, method)?;
            let params = json!({ "reference": reference, "lag_range": cfg.correlation.lag_range, "method": method });
            w.write(&path("lag_profiles.csv"), "lag_profiles", sp, params, None, |o| {
                let mut c = csv::Writer::from_writer(o);
                c.write_record(["reference", "target", "lag", "correlation"])?;
                for p in &profiles {
                    for (lag, v) in p.lags.iter().zip(&p.correlations) {
                        c.write_record([p.reference.to_string(), p.target.to_string(), lag.to_string(), fmt_f64(*v)])?;
                    }
                }
                c.flush()?;
                Ok(())
            })
        })?;
    }

    if st.spectrum {
        in_stage("spectrum", || {
            for k in &kinds {
                w.write(
                    &path(&format!("spectrum_{}.json", k.name)),
                    "spectrum",
                    sp,
                    json!({ "method": method, "dimension": k.spectrum.dim() }),
                    None,
                    |o| k.spectrum.write_json(o),
                )?;
            }
            Ok(())
        })?;
    }

    if st.null {
        in_stage("null", || {
            for k in &kinds {
                let seed = named_seed(master, &format!("null/{split}/{}", k.name));
                let null = shuffle_null(k.panel, cfg.null.sims, seed, method)?;
                let classified = classify_eigenvalues(&k.spectrum, &null)?;
                let params = json!({ "sims": cfg.null.sims, "method": method, "bins": cfg.null.histogram_bins });
                w.write(&path(&format!("null_envelope_{}.csv", k.name)), "null", sp, params.clone(), Some(seed), |o| {
                    null.write_envelope_csv(Some(&k.spectrum.eigenvalues), o)
                })?;
                write_histograms(w, &path, sp, k, &null, cfg.null.histogram_bins, params.clone(), seed)?;
                w.write(&path(&format!("classified_{}.json", k.name)), "null", sp, params, Some(seed), |o| {
                    classified.write_json(o)
                })?;
            }
            Ok(())
        })?;
    }

    if st.modes && cfg.modes.remove > 0 {
        in_stage("modes", || {
            let rounds = remove_top_modes(panel, cfg.modes.remove, method)?;
            for (r, round) in rounds.iter().enumerate() {
                let n = r + 1;
                let params = json!({ "round": n, "method": method });
                let residual_spectrum = eigendecompose(&round.residual_correlation)?;
                w.write(&path(&format!("residual_spectrum_{n}.json")), "modes", sp, params.clone(), None, |o| {
                    residual_spectrum.write_json(o)
                })?;
                w.write(&path(&format!("heatmap_residual_{n}.csv")), "modes", sp, params.clone(), None, |o| {
                    round.residual_correlation.write_csv(o)
                })?;
                w.write(&path(&format!("mode_regression_{n}.csv")), "modes", sp, params, None, |o| {
                    let mut c = csv::Writer::from_writer(o);
                    c.write_record(["label", "intercept", "slope"])?;
                    for (i, l) in round.removal.residuals.labels().iter().enumerate() {
                        c.write_record([l.to_string(), fmt_f64(round.removal.intercepts[i]), fmt_f64(round.removal.slopes[i])])?;
                    }
                    c.flush()?;
                    Ok(())
                })?;
            }
            Ok(())
        })?;
    }

    let net = match cfg.network.matrix {
        NetworkMatrix::Plain => &kinds[0],
        NetworkMatrix::Lagged => &kinds[1],
    };
    let net_params = |extra: Value| {
        let mut m: BTreeMap<String, Value> = BTreeMap::new();
        m.insert("matrix".into(), json!(net.name));
        m.insert("method".into(), json!(method));
        if let Value::Object(e) = extra {
            m.extend(e);
        }
        json!(m)
    };
    let needs_dist = st.distance || st.graph || st.centrality || st.embed;
    let dist = if needs_dist { Some(in_stage("distance", || distance_matrix(&net.corr))?) } else { None };

    if st.distance {
        let d = dist.as_ref().expect("computed above");
        in_stage("distance", || w.write(&path("distance.csv"), "distance", sp, net_params(json!({})), None, |o| d.write_csv(o)))?;
    }

    if st.noise_threshold {
        in_stage("noise_threshold", || {
            let seed = named_seed(master, &format!("noise/{split}"));
            let threshold = noise_distance_threshold(net.panel, cfg.network.noise_sims, seed, method)?;
            let params = net_params(json!({ "sims": cfg.network.noise_sims }));
            w.write(&path("noise_threshold.json"), "noise_threshold", sp, params.clone(), Some(seed), |o| {
                serde_json::to_writer_pretty(o, &json!({ "threshold": threshold, "params": params, "seed": seed }))?;
                Ok(())
            })
        })?;
    }

    if st.graph || st.centrality {
        let d = dist.as_ref().expect("computed above");
        for &t in &cfg.network.thresholds {
            let graph = in_stage("graph", || asset_graph(d, t))?;
            let tag = format!("t{t}");
            let params = net_params(json!({ "threshold": t }));
            if st.graph {
                in_stage("graph", || {
                    w.write(&path(&format!("graph_{tag}.csv")), "graph", sp, params.clone(), None, |o| graph.write_edge_list(o))?;
                    w.write(&path(&format!("graph_{tag}.json")), "graph", sp, params.clone(), None, |o| graph.write_json(o))
                })?;
            }
            if st.centrality {
                if graph.is_empty() {
                    warn!("split {split}: asset graph at threshold {t} is empty; no centrality report");
                    continue;
                }
                in_stage("centrality", || {
                    let report = centralities(&graph)?;
                    w.write(&path(&format!("centrality_{tag}.json")), "centrality", sp, params.clone(), None, |o| {
                        report.write_json(o)
                    })
                })?;
            }
        }
    }

    if st.embed {
        let d = dist.as_ref().expect("computed above");
        in_stage("embed", || {
            let seed = named_seed(master, &format!("embed/{split}"));
            let emb = mds_embed(d, cfg.network.embedding_dim, seed)?;
            let params = net_params(json!({ "dimension": cfg.network.embedding_dim, "stress": emb.stress, "iterations": emb.iterations }));
            w.write(&path("embedding.csv"), "embed", sp, params.clone(), Some(seed), |o| emb.write_csv(o))?;
            w.write(&path("embedding.json"), "embed", sp, params, Some(seed), |o| {
                serde_json::to_writer_pretty(o, &emb)?;
                Ok(())
            })
        })?;
    }
    Ok(())
}

fn lag_of(kind: &str, cfg: &PipelineConfig) -> usize {
    if kind == "plain" {
        0
    } else {
        cfg.correlation.max_lag
    }
}

#[allow(clippy::too_many_arguments)]
fn write_histograms(
    w: &mut ArtifactWriter,
    path: &dyn Fn(&str) -> String,
    split: Option<&str>,
    k: &Kind,
    null: &NullEnsemble,
    bins: usize,
    params: Value,
    seed: u64,
) -> Result<()> {
    let pooled = null.pooled();
    let top = k.spectrum.eigenvalues[0].max(null.global_max());
    let range = (0.0, top * 1.02);
    let mp = MarchenkoPastur::for_panel(k.panel.n_rows(), k.panel.n_series()).ok();
    let observed = histogram(&k.spectrum.eigenvalues, bins, range, mp.as_ref())?;
    let simulated = histogram(&pooled, bins, range, mp.as_ref())?;
    w.write(&path(&format!("histogram_{}.csv", k.name)), "null", split, params.clone(), Some(seed), |o| {
        observed.write_csv(o)
    })?;
    w.write(&path(&format!("null_histogram_{}.csv", k.name)), "null", split, params, Some(seed), |o| {
        simulated.write_csv(o)
    })
}

/// Convenience used by the CLI: spectrum classified against a fresh null.
pub fn classified_spectrum(panel: &ReturnPanel, sims: usize, seed: u64, method: Method) -> Result<(SpectralSummary, NullEnsemble)> {
    let corr = correlation_matrix(panel, method)?;
    let spectrum = eigendecompose(&corr)?;
    let null = shuffle_null(panel, sims, seed, method)?;
    Ok((classify_eigenvalues(&spectrum, &null)?, null))
}
