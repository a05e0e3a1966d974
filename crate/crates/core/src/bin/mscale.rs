#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use mscale::detect::{Detector, Method};
use mscale::io::{clusters_geojson, read_jsonl, sha256_hex, to_jsonl};
use mscale::model::{validate_corpus, BoundingBox, Domain, Frame, Record, TimeWindow};
use mscale::noise::{chi_squared_uniform, envelopes_by_count, filter_term_ids, probe_space, term_profiles, Rect};
use mscale::parallel::{set_threads, Exec};
use mscale::synth::{generate, run_scenario, ScenarioParams, DEFAULT_PARAM_GRID};
use mscale::text::TextIndex;
use mscale::{DetectionConfig, Error};

#[derive(Parser)]
#[command(name = "mscale", version, about = "Multiscale event detection in geotagged short texts")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect event clusters in a JSON-lines corpus.
    Detect(DetectArgs),
    /// Spatial and temporal noise statistics per term.
    Noise(NoiseArgs),
    /// Evaluate both detectors on a synthetic scenario.
    SynthEval(SynthEvalArgs),
    /// Write a synthetic scenario corpus as JSON lines.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
struct DomainArgs {
    /// Bounding box `lat_min,lat_max,lon_min,lon_max` (default: New York City).
    #[arg(long)]
    bbox: Option<String>,
    /// Analysis window `start,end` in epoch seconds or ISO-8601 (default: UTC day of the first record).
    #[arg(long)]
    window: Option<String>,
    /// Treat lon/lat as planar x/y with this many seconds per time unit.
    #[arg(long, value_name = "SECONDS_PER_UNIT")]
    planar: Option<f64>,
    /// Domain JSON file (as written by `synth`); overrides the flags above.
    #[arg(long)]
    domain: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    tt: Option<f64>,
    #[arg(long)]
    td: Option<f64>,
    #[arg(long)]
    delta_t: Option<f64>,
    #[arg(long)]
    delta_d: Option<f64>,
    #[arg(long)]
    nscale: Option<u32>,
    #[arg(long)]
    min_term_support: Option<usize>,
    /// Comma-separated; empty disables the L-function filter.
    #[arg(long, alias = "probes")]
    l_filter_probes: Option<String>,
    #[arg(long, alias = "threshold")]
    l_filter_threshold: Option<f64>,
    #[arg(long)]
    min_cluster_records: Option<usize>,
    #[arg(long)]
    min_cluster_users: Option<usize>,
    #[arg(long)]
    max_single_user_fraction: Option<f64>,
    /// Comma-separated terms whose clusters are dropped.
    #[arg(long)]
    blacklist: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    input: PathBuf,
    #[arg(long, default_value = "med")]
    method: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct NoiseArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add CSR envelope columns from this many simulations.
    #[arg(long, value_name = "N_SIMS")]
    envelope: Option<usize>,
    /// Also test each term's timestamps for uniformity.
    #[arg(long)]
    temporal: bool,
    #[arg(long, default_value_t = 12)]
    bins: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SynthEvalArgs {
    #[arg(long)]
    scenario: u32,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated sweep values for T_t = T_d = delta_t = delta_d.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scenario: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the scenario's noise intensity (records per unit area).
    #[arg(long)]
    noise_intensity: Option<f64>,
    /// Corpus path; the domain is written next to it as `<stem>.domain.json`.
    #[arg(long)]
    out: PathBuf,
}

/// Everything needed to tell two runs apart, except `timings`.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    arguments: Value,
    config: Option<DetectionConfig>,
    domain: Option<Domain>,
    input_digest: Option<String>,
    seed: u64,
    versions: BTreeMap<&'static str, &'static str>,
    outputs: BTreeMap<String, String>,
    timings: Vec<(String, f64)>,
}

impl RunManifest {
    fn new(command: &str, arguments: Value, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("mscale", env!("CARGO_PKG_VERSION"));
        versions.insert("manifest", "1");
        Self {
            command: command.into(),
            arguments,
            config: None,
            domain: None,
            input_digest: None,
            seed,
            versions,
            outputs: BTreeMap::new(),
            timings: Vec::new(),
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(Error::Json(e))
    }
}

type CliResult<T> = Result<T, CliError>;

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 2,
        CliError::Lib(e) => match e {
            Error::UnknownScenario(_) => 2,
            Error::Parse { .. } | Error::DuplicateId(_) => 3,
            Error::Config(_) | Error::Json(_) | Error::InvalidBox(_) | Error::InvalidWindow(_) | Error::InvalidArgument(_) => 4,
            _ => 1,
        },
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| CliError::Usage(format!("bad {what} `{p}`"))))
        .collect()
}

fn parse_time(s: &str) -> CliResult<i64> {
    mscale::io::parse_timestamp(&Value::String(s.to_string())).map_err(CliError::Usage)
}

impl DomainArgs {
    fn resolve(&self, records: &[Record]) -> CliResult<Domain> {
        if let Some(path) = &self.domain {
            let d: Domain = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            return Ok(Domain::new(d.bbox, d.window, d.frame)?);
        }
        let bbox = match &self.bbox {
            Some(s) => {
                let v: Vec<f64> = parse_list(s, "bbox value")?;
                if v.len() != 4 {
                    return Err(CliError::Usage("--bbox needs lat_min,lat_max,lon_min,lon_max".into()));
                }
                BoundingBox::new(v[0], v[1], v[2], v[3])?
            }
            None => BoundingBox::NYC,
        };
        let window = match &self.window {
            Some(s) => {
                let (a, b) = s
                    .split_once(',')
                    .ok_or_else(|| CliError::Usage("--window needs start,end".into()))?;
                TimeWindow::new(parse_time(a)?, parse_time(b)?)?
            }
            None => TimeWindow::day_of(records.iter().map(|r| r.timestamp).min().unwrap_or(0)),
        };
        let frame = match self.planar {
            Some(seconds_per_unit) => Frame::Planar { seconds_per_unit },
            None => Frame::Geographic,
        };
        Ok(Domain::new(bbox, window, frame)?)
    }
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<DetectionConfig> {
        let mut cfg = DetectionConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_kv_str(&std::fs::read_to_string(path)?)?;
        }
        let num = |v: Option<f64>| v.map(|x| x.to_string());
        let pairs: [(&str, Option<String>); 12] = [
            ("t_t", num(self.tt)),
            ("t_d", num(self.td)),
            ("delta_t", num(self.delta_t)),
            ("delta_d", num(self.delta_d)),
            ("n_scale", self.nscale.map(|v| v.to_string())),
            ("min_term_support", self.min_term_support.map(|v| v.to_string())),
            ("l_filter_probes", self.l_filter_probes.clone()),
            ("l_filter_threshold", num(self.l_filter_threshold)),
            ("min_cluster_records", self.min_cluster_records.map(|v| v.to_string())),
            ("min_cluster_users", self.min_cluster_users.map(|v| v.to_string())),
            ("max_single_user_fraction", num(self.max_single_user_fraction)),
            ("blacklist_terms", self.blacklist.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, manifest: &mut RunManifest) -> CliResult<()> {
    std::fs::write(dir.join(name), contents)?;
    manifest.outputs.insert(name.to_string(), sha256_hex(contents.as_bytes()));
    Ok(())
}

fn finish(dir: &Path, manifest: &RunManifest) -> CliResult<()> {
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

/// Reads, validates and windows the corpus.
fn load(input: &Path, domain: &DomainArgs, manifest: &mut RunManifest) -> CliResult<(Vec<Record>, Domain)> {
    let (raw, digest) = read_jsonl(input)?;
    manifest.input_digest = Some(digest);
    let domain = domain.resolve(&raw)?;
    let n_raw = raw.len();
    let records = validate_corpus(raw, &domain.bbox, &domain.window)?;
    if records.len() < n_raw {
        log::info!("dropped {} records outside the box or window", n_raw - records.len());
    }
    if records.is_empty() {
        log::warn!("corpus is empty after validation");
    }
    manifest.domain = Some(domain);
    Ok((records, domain))
}

fn cmd_detect(a: &DetectArgs, exec: Exec) -> CliResult<()> {
    let method: Method = a.method.parse().map_err(|_| CliError::Usage(format!("unknown method `{}`", a.method)))?;
    let cfg = a.config.resolve()?;
    let arguments = json!({"input": a.input, "method": method, "domain": a.domain, "config": a.config});
    let mut manifest = RunManifest::new("detect", arguments, a.seed);
    let clock = Instant::now();
    let (records, domain) = load(&a.input, &a.domain, &mut manifest)?;
    manifest.timings.push(("load".into(), clock.elapsed().as_secs_f64()));
    manifest.config = Some(cfg.clone());

    let detector = Detector::new(domain, cfg).with_exec(exec);
    detector.validate(method)?;
    std::fs::create_dir_all(&a.out)?;
    let det = detector.run(method, &records, a.seed)?;
    for w in &det.result.metadata.warnings {
        log::warn!("{w}");
    }
    manifest.timings.extend(det.timings.iter().cloned());

    let result = &det.result;
    write_file(&a.out, "clusters.json", &(serde_json::to_string_pretty(result)? + "\n"), &mut manifest)?;
    let geo = clusters_geojson(&result.clusters, &records);
    write_file(&a.out, "clusters.geojson", &(serde_json::to_string_pretty(&geo)? + "\n"), &mut manifest)?;
    write_file(
        &a.out,
        "dropped.json",
        &(serde_json::to_string_pretty(&result.dropped_clusters)? + "\n"),
        &mut manifest,
    )?;
    finish(&a.out, &manifest)?;
    eprintln!(
        "{} records, {} clusters retained, {} dropped",
        records.len(),
        result.clusters.len(),
        result.dropped_clusters.len()
    );
    Ok(())
}

fn cmd_noise(a: &NoiseArgs, exec: Exec) -> CliResult<()> {
    let cfg = a.config.resolve()?;
    let arguments = json!({
        "input": a.input, "envelope": a.envelope, "temporal": a.temporal,
        "bins": a.bins, "alpha": a.alpha, "domain": a.domain, "config": a.config,
    });
    let mut manifest = RunManifest::new("noise", arguments, a.seed);
    let clock = Instant::now();
    let (records, domain) = load(&a.input, &a.domain, &mut manifest)?;
    manifest.config = Some(cfg.clone());
    std::fs::create_dir_all(&a.out)?;

    let detector = Detector::new(domain, cfg.clone()).with_exec(exec);
    let tokenized = detector.tokenize(&records);
    let text = TextIndex::build(&tokenized);
    manifest.timings.push(("load".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let (points, area) = probe_space(&domain, &tokenized);
    let probes = &cfg.l_filter_probes;
    let profiles = if probes.is_empty() {
        Vec::new()
    } else {
        term_profiles(&points, area, &text.vocab, &text.term_sets, cfg.min_term_support, probes, exec)
    };
    let envelopes = match a.envelope {
        Some(n_sims) if !profiles.is_empty() => {
            let (w, h) = domain.extent();
            let scale = domain.frame.probe_scale();
            let rect = Rect::new(0.0, 0.0, w / scale, h / scale);
            let counts: Vec<usize> = profiles.iter().map(|p| p.n_points).collect();
            Some(envelopes_by_count(&counts, &rect, probes, n_sims, a.seed, exec)?)
        }
        _ => None,
    };
    manifest.timings.push(("l_profiles".into(), clock.elapsed().as_secs_f64()));

    let mut csv = String::from(if envelopes.is_some() {
        "term,n,probe,L,env_min,env_max\n"
    } else {
        "term,n,probe,L\n"
    });
    for p in &profiles {
        for (k, (&s, &l)) in p.probes.iter().zip(&p.l_values).enumerate() {
            let _ = write!(csv, "{},{},{},{:.10}", p.term, p.n_points, s, l);
            if let Some(env) = envelopes.as_ref().and_then(|e| e.get(&p.n_points)) {
                let _ = write!(csv, ",{:.10},{:.10}", env.min[k], env.max[k]);
            }
            csv.push('\n');
        }
    }
    write_file(&a.out, "l_profiles.csv", &csv, &mut manifest)?;

    let valid = filter_term_ids(&domain, &tokenized, &text.vocab, &text.term_sets, &cfg, exec);
    let valid_terms: Vec<&str> = (0..text.vocab.len())
        .filter(|&t| valid[t])
        .map(|t| text.vocab.term(t as u32))
        .collect();
    let doc = json!({
        "min_term_support": cfg.min_term_support,
        "probes": probes,
        "threshold": cfg.l_filter_threshold,
        "valid_terms": valid_terms,
    });
    write_file(&a.out, "valid_terms.json", &(serde_json::to_string_pretty(&doc)? + "\n"), &mut manifest)?;

    if a.temporal {
        let clock = Instant::now();
        let mut csv = String::from("term,n,statistic,bins,dof,critical_value,reject\n");
        let times: Vec<f64> = tokenized.iter().map(|r| domain.time_of(r.timestamp)).collect();
        for (t, recs) in mscale::noise::supported_terms(&text.term_sets, text.vocab.len(), cfg.min_term_support) {
            let ts: Vec<f64> = recs.iter().map(|&r| times[r]).collect();
            let res = chi_squared_uniform(&ts, 0.0, domain.duration(), a.bins, a.alpha)?;
            let _ = writeln!(
                csv,
                "{},{},{:.10},{},{},{:.10},{}",
                text.vocab.term(t),
                ts.len(),
                res.statistic,
                res.bins,
                res.dof,
                res.critical_value,
                res.reject
            );
        }
        write_file(&a.out, "temporal.csv", &csv, &mut manifest)?;
        manifest.timings.push(("temporal".into(), clock.elapsed().as_secs_f64()));
    }
    finish(&a.out, &manifest)?;
    eprintln!("{} terms profiled, {} valid", profiles.len(), valid_terms.len());
    Ok(())
}

fn cmd_synth_eval(a: &SynthEvalArgs, exec: Exec) -> CliResult<()> {
    let params = ScenarioParams::new(a.scenario)?;
    let grid: Vec<f64> = match &a.params {
        Some(s) => parse_list(s, "parameter")?,
        None => DEFAULT_PARAM_GRID.to_vec(),
    };
    if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0)) {
        return Err(CliError::Usage("--params must be positive".into()));
    }
    let arguments = json!({"scenario": a.scenario, "trials": a.trials, "params": grid, "scenario_params": params});
    let mut manifest = RunManifest::new("synth-eval", arguments, a.seed);
    std::fs::create_dir_all(&a.out)?;
    let clock = Instant::now();
    let table = run_scenario(&params, &grid, a.trials, a.seed, exec)?;
    manifest.timings.push(("run_scenario".into(), clock.elapsed().as_secs_f64()));
    write_file(&a.out, "trials.csv", &table.trials_csv(), &mut manifest)?;
    let agg = table.aggregate_csv();
    write_file(&a.out, "aggregate.csv", &agg, &mut manifest)?;
    finish(&a.out, &manifest)?;
    print!("{agg}");
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut params = ScenarioParams::new(a.scenario)?;
    if let Some(l) = a.noise_intensity {
        if !(l >= 0.0) {
            return Err(CliError::Usage("--noise-intensity must be non-negative".into()));
        }
        params.noise_intensity = l;
    }
    let corpus = generate(&params.spec(a.seed))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, to_jsonl(&corpus.records))?;
    let domain_path = a.out.with_extension("domain.json");
    std::fs::write(&domain_path, serde_json::to_string_pretty(&corpus.domain)? + "\n")?;
    let truth_path = a.out.with_extension("truth.json");
    let truth: BTreeMap<&str, usize> = corpus
        .records
        .iter()
        .zip(&corpus.truth.labels)
        .map(|(r, &l)| (r.id.as_str(), l))
        .collect();
    std::fs::write(&truth_path, serde_json::to_string(&truth)? + "\n")?;
    eprintln!(
        "{} records ({} events) -> {}",
        corpus.records.len(),
        corpus.truth.n_events,
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = set_threads(n) {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let res = match &cli.command {
        Command::Detect(a) => cmd_detect(a, exec),
        Command::Noise(a) => cmd_noise(a, exec),
        Command::SynthEval(a) => cmd_synth_eval(a, exec),
        Command::Synth(a) => cmd_synth(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Lib(err) => eprintln!("error: {err}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
