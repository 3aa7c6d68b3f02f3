//! Batch commands behind the `qtlnet` binary: simulate crosses, scan,
//! sample networks, summarize posteriors and decompose path correlations.
//!
//! Every command writes into an output directory. JSON and DOT outputs carry
//! a generation timestamp unless `reproducible` is set, so identical inputs
//! and seeds then give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use qtlnet::genetics::io::{apply_map, read_cross_file, read_map_file, write_cross, write_map};
use qtlnet::genetics::{calc_genoprob, F2Cross, GeneticMap};
use qtlnet::graph::Dag;
use qtlnet::hcgr::HcgrModel;
use qtlnet::mapping::{select_architecture, Scanner};
use qtlnet::mcmc::{averaged_network, run_chains, write_trace_csv, ChainSettings, PosteriorDocument, ScoreContext, SummaryRule};
use qtlnet::pathanal::PathModel;
use qtlnet::simulate::{self, SignalStrength};
use qtlnet::{Error, Result};

/// Process exit code for an error: 3 for numeric degeneracy, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Degenerate(_) => 3,
        _ => 2,
    }
}

fn timestamp(reproducible: bool) -> Option<String> {
    (!reproducible).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(dir.join(name))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(dir.join(name))
}

/// Where the simulated model comes from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    /// The five-trait benchmark network with freshly drawn effects.
    Preset(SignalStrength),
    /// A serialized model; its QTLs must sit on markers of `map`.
    File { model: PathBuf, map: PathBuf },
}

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub source: ModelSource,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub reproducible: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<SignalStrength>,
    pub n: usize,
    pub seed: u64,
    pub model: HcgrModel,
}

/// Writes `cross.csv`, `map.csv` and `truth.json`.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<Vec<PathBuf>> {
    if cfg.n == 0 {
        return Err(Error::InvalidInput("need at least one individual".into()));
    }
    let (model, map, cross, preset) = match &cfg.source {
        ModelSource::Preset(s) => {
            let r = simulate::replicate(*s, cfg.n, cfg.seed)?;
            (r.model, simulate::map(), r.cross, Some(*s))
        }
        ModelSource::File { model, map } => {
            let model: HcgrModel = serde_json::from_str(&fs::read_to_string(model)?)?;
            let map = read_map_file(map)?;
            let cross = simulate::simulate_cross(&model, &map, cfg.n, cfg.seed)?;
            (model, map, cross, None)
        }
    };
    let mut w = create(&cfg.out, "cross.csv")?;
    write_cross(&cross, &mut w)?;
    w.flush()?;
    let mut w = create(&cfg.out, "map.csv")?;
    write_map(&map, &mut w)?;
    w.flush()?;
    let truth = TruthDocument {
        generated_at: timestamp(cfg.reproducible),
        preset,
        n: cfg.n,
        seed: cfg.seed,
        model,
    };
    let t = write_json(&cfg.out, "truth.json", &truth)?;
    info!("simulated {} individuals into {}", cfg.n, cfg.out.display());
    Ok(vec![cfg.out.join("cross.csv"), cfg.out.join("map.csv"), t])
}

/// Cross input shared by the analysis commands.
#[derive(Debug, Clone)]
pub struct CrossInput {
    pub cross: PathBuf,
    pub map: Option<PathBuf>,
    pub step: f64,
    pub error_rate: f64,
}

impl CrossInput {
    pub fn load(&self) -> Result<F2Cross> {
        let loaded = read_cross_file(&self.cross)?;
        if loaded.dropped > 0 {
            warn!("dropped {} individuals with missing phenotypes", loaded.dropped);
        }
        match &self.map {
            Some(p) => {
                let map: GeneticMap = read_map_file(p)?;
                apply_map(&loaded.cross, map)
            }
            None => Ok(loaded.cross),
        }
    }
}

fn trait_index(cross: &F2Cross, name: &str) -> Result<usize> {
    cross
        .trait_index(name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown trait {name:?}")))
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub input: CrossInput,
    pub trait_name: String,
    pub conditioning: Vec<String>,
    pub threshold: f64,
    pub out: PathBuf,
}

/// Writes `scan_<trait>.csv` and returns the suprathreshold chromosomes.
pub fn cmd_scan(cfg: &ScanConfig) -> Result<Vec<String>> {
    let cross = cfg.input.load()?;
    let probs = calc_genoprob(&cross, cfg.input.step, cfg.input.error_rate)?;
    let t = trait_index(&cross, &cfg.trait_name)?;
    let cond = cfg
        .conditioning
        .iter()
        .map(|c| trait_index(&cross, c))
        .collect::<Result<Vec<_>>>()?;
    let scan = Scanner::new(&cross, &probs)?.scan(t, &cond)?;
    let mut w = create(&cfg.out, &format!("scan_{}.csv", cfg.trait_name))?;
    scan.write_csv(&mut w)?;
    w.flush()?;
    let arch = select_architecture(&scan, cfg.threshold)?;
    for q in &arch.qtls {
        info!("{}: QTL on chromosome {} at {:.1} cM (LOD {:.2})", cfg.trait_name, q.chromosome, q.position, q.lod);
    }
    Ok(arch.qtls.into_iter().map(|q| q.chromosome).collect())
}

#[derive(Debug, Clone)]
pub struct QtlnetConfig {
    pub input: CrossInput,
    pub threshold: f64,
    pub iterations: usize,
    pub thin: usize,
    pub burnin: usize,
    pub chains: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub reproducible: bool,
}

/// Runs `chains` chains with seeds `seed, seed + 1, ...`; writes
/// `posterior.json` and `trace.csv`.
pub fn cmd_qtlnet(cfg: &QtlnetConfig) -> Result<PosteriorDocument> {
    if cfg.chains == 0 {
        return Err(Error::InvalidInput("need at least one chain".into()));
    }
    let settings = ChainSettings::new(cfg.iterations, cfg.thin, cfg.burnin, cfg.seed)?;
    let cross = cfg.input.load()?;
    let probs = calc_genoprob(&cross, cfg.input.step, cfg.input.error_rate)?;
    let ctx = ScoreContext::new(Scanner::new(&cross, &probs)?, cfg.threshold)?;
    let seeds: Vec<u64> = (0..cfg.chains as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let chains = run_chains(&ctx, settings, &seeds, &Dag::empty(cross.n_traits())?)?;
    let mut doc = PosteriorDocument::new(cross.trait_names().to_vec(), &chains, cfg.threshold)?;
    doc.generated_at = timestamp(cfg.reproducible);
    write_json(&cfg.out, "posterior.json", &doc)?;
    let mut w = create(&cfg.out, "trace.csv")?;
    write_trace_csv(&chains, &mut w)?;
    w.flush()?;
    Ok(doc)
}

#[derive(Debug, Clone)]
pub struct SummarizeConfig {
    pub posterior: PathBuf,
    pub rule: SummaryRule,
    pub out: PathBuf,
    pub reproducible: bool,
}

/// Writes `network.dot` and `pairs.csv` from a posterior document.
pub fn cmd_summarize(cfg: &SummarizeConfig) -> Result<Vec<PathBuf>> {
    let doc: PosteriorDocument = serde_json::from_str(&fs::read_to_string(&cfg.posterior)?)?;
    let ep = doc.edge_posterior()?;
    let net = averaged_network(&ep, cfg.rule)?;
    if net.cyclic {
        warn!("the averaged network is cyclic");
    }
    let mut dot = String::new();
    if let Some(ts) = timestamp(cfg.reproducible) {
        dot.push_str(&format!("// generated {ts}\n"));
    }
    dot.push_str(&net.to_dot(&doc.traits));
    let d = write_text(&cfg.out, "network.dot", &dot)?;

    let mut w = csv::Writer::from_writer(create(&cfg.out, "pairs.csv")?);
    w.write_record(["u", "v", "p_uv", "p_vu", "p_none", "argmax"])?;
    for p in &ep.pairs {
        let best = match p.argmax() {
            qtlnet::mcmc::Relation::Forward => "->",
            qtlnet::mcmc::Relation::Backward => "<-",
            qtlnet::mcmc::Relation::None => "none",
        };
        w.write_record([
            doc.traits[p.u].as_str(),
            doc.traits[p.v].as_str(),
            &p.p_uv.to_string(),
            &p.p_vu.to_string(),
            &p.p_none.to_string(),
            best,
        ])?;
    }
    w.flush()?;
    Ok(vec![d, cfg.out.join("pairs.csv")])
}

#[derive(Debug, Clone)]
pub struct PathsConfig {
    pub model: PathBuf,
    pub target: String,
    pub out: PathBuf,
}

/// Writes `paths_<target>.csv`: the directed-path decomposition of the
/// correlation between every QTL and the target trait.
pub fn cmd_paths(cfg: &PathsConfig) -> Result<PathBuf> {
    let text = fs::read_to_string(&cfg.model)?;
    // Accept either a truth document or a bare model.
    let model: HcgrModel = match serde_json::from_str::<TruthDocument>(&text) {
        Ok(t) => t.model,
        Err(_) => serde_json::from_str(&text)?,
    };
    let target = model
        .trait_names()
        .iter()
        .position(|n| *n == cfg.target)
        .ok_or_else(|| Error::InvalidInput(format!("unknown trait {:?}", cfg.target)))?;
    let pm = PathModel::new(&model)?;
    let mut w = csv::Writer::from_writer(create(&cfg.out, &format!("paths_{}.csv", cfg.target))?);
    w.write_record(["source", "path", "coefficient_product", "contribution"])?;
    for k in 0..pm.graph().qtls().len() {
        let node = pm.graph().qtl_node(k);
        let d = pm.implied_correlation(node, target)?;
        let label = &pm.labels()[node];
        for p in &d.paths {
            let path = p.nodes.iter().map(|&i| pm.labels()[i].as_str()).collect::<Vec<_>>().join(" -> ");
            w.write_record([label.as_str(), &path, &p.coefficient_product.to_string(), &p.contribution.to_string()])?;
        }
        w.write_record([label.as_str(), "total", "", &d.total.to_string()])?;
    }
    w.flush()?;
    Ok(cfg.out.join(format!("paths_{}.csv", cfg.target)))
}
