//! Synthetic corpora with known events, the benchmark scenarios, and the
//! parameter sweeps that compare both detectors on them.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_distr::Poisson;
use serde::Serialize;

use crate::config::DetectionConfig;
use crate::detect::{Detector, Method};
use crate::error::{Error, Result};
use crate::grid::{nscale_upper_bound, Grid};
use crate::metrics::{f_beta, nmi};
use crate::model::{BoundingBox, Domain, Frame, Record, TimeWindow};
use crate::noise::Rect;
use crate::parallel::{derive_seed, Exec};
use crate::wavelet::bin_count;

/// Record timestamps are synthetic time units times this many seconds.
pub const SECONDS_PER_UNIT: f64 = 3600.0;

/// Number of event-relevant terms.
pub const N_SIGNAL_TERMS: usize = 59;

/// Time interval and spatial rectangle an event's records are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventBox {
    pub t0: f64,
    pub t1: f64,
    pub space: Rect,
}

/// Weighted vocabulary noise terms are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseVocabulary {
    pub terms: Vec<String>,
    pub weights: Vec<f64>,
}

impl NoiseVocabulary {
    /// `size` terms with weight proportional to `1 / rank^exponent`.
    pub fn zipf(size: usize, exponent: f64) -> Self {
        Self {
            terms: (0..size).map(|i| format!("noise{i:05}")).collect(),
            weights: (1..=size).map(|r| (r as f64).powf(-exponent)).collect(),
        }
    }

    /// Lines of `term,count` (comma, tab or whitespace separated).
    pub fn from_frequency_table(src: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(|c: char| c == ',' || c == '\t' || c.is_whitespace()).filter(|s| !s.is_empty());
            let (Some(t), Some(w)) = (parts.next(), parts.next()) else {
                return Err(Error::Parse { line: i + 1, message: "expected `term,count`".into() });
            };
            let w: f64 = w.parse().map_err(|_| Error::Parse { line: i + 1, message: format!("bad count `{w}`") })?;
            if !(w > 0.0) {
                continue;
            }
            terms.push(t.to_lowercase());
            weights.push(w);
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty frequency table".into()));
        }
        Ok(Self { terms, weights })
    }
}

impl Default for NoiseVocabulary {
    fn default() -> Self {
        Self::zipf(5000, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub area: Rect,
    pub window: (f64, f64),
    pub events: Vec<EventBox>,
    pub tweets_per_event: (usize, usize),
    /// Noise points per unit area.
    pub noise_intensity: f64,
    pub signal_terms: Vec<String>,
    pub noise_terms: NoiseVocabulary,
    pub terms_per_event_tweet: (usize, usize),
    /// Signal terms assigned to each event and carried by every one of its records.
    pub signal_terms_per_tweet: usize,
    pub terms_per_noise_tweet: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            area: Rect::new(0.0, 0.0, 10.0, 10.0),
            window: (0.0, 32.0),
            events: Vec::new(),
            tweets_per_event: (3, 10),
            noise_intensity: 0.0,
            signal_terms: (0..N_SIGNAL_TERMS).map(|i| format!("signal{i:02}")).collect(),
            noise_terms: NoiseVocabulary::default(),
            terms_per_event_tweet: (5, 10),
            signal_terms_per_tweet: 1,
            terms_per_noise_tweet: (3, 10),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.area.x_max > self.area.x_min && self.area.y_max > self.area.y_min) {
            return bad("empty area");
        }
        if !(self.window.1 > self.window.0) {
            return bad("empty window");
        }
        for (lo, hi) in [self.tweets_per_event, self.terms_per_event_tweet, self.terms_per_noise_tweet] {
            if lo > hi {
                return bad("empty integer range");
            }
        }
        if !(self.noise_intensity >= 0.0) {
            return bad("noise intensity must be non-negative");
        }
        if self.signal_terms_per_tweet > self.signal_terms.len() {
            return bad("more signal terms per record than signal terms");
        }
        if self.signal_terms_per_tweet > self.terms_per_event_tweet.0 {
            return bad("signal terms exceed the minimum terms per event record");
        }
        for e in &self.events {
            let overlaps_time = e.t0 < self.window.1 && e.t1 > self.window.0 && e.t1 > e.t0;
            let overlaps_space = e.space.x_min < self.area.x_max
                && e.space.x_max > self.area.x_min
                && e.space.y_min < self.area.y_max
                && e.space.y_max > self.area.y_min;
            if !(overlaps_time && overlaps_space) {
                return bad("event box does not intersect the area and window");
            }
        }
        Ok(())
    }

    /// Planar domain whose bounding box and window cover the spec.
    pub fn domain(&self) -> Domain {
        Domain {
            bbox: BoundingBox {
                lat_min: self.area.y_min,
                lat_max: self.area.y_max,
                lon_min: self.area.x_min,
                lon_max: self.area.x_max,
            },
            window: TimeWindow {
                start: (self.window.0 * SECONDS_PER_UNIT).floor() as i64,
                end: (self.window.1 * SECONDS_PER_UNIT).ceil() as i64,
            },
            frame: Frame::Planar {
                seconds_per_unit: SECONDS_PER_UNIT,
            },
        }
    }
}

/// Label per record: event index, or a unique id per noise record.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub n_events: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub records: Vec<Record>,
    pub truth: GroundTruth,
    pub domain: Domain,
}

fn uniform_in(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws the corpus. Event records come first, in event order, then noise.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let noise_pick = WeightedIndex::new(&spec.noise_terms.weights)
        .map_err(|e| Error::InvalidArgument(format!("noise weights: {e}")))?;
    let domain = spec.domain();

    let mut records = Vec::new();
    let mut labels = Vec::new();
    let push = |records: &mut Vec<Record>, x: f64, y: f64, t: f64, terms: Vec<&str>| {
        let idx = records.len();
        let ts = ((t * SECONDS_PER_UNIT).floor() as i64).clamp(domain.window.start, domain.window.end - 1);
        let id = format!("r{idx:06}");
        records.push(Record::new(id, format!("u{idx:06}"), ts, y, x, terms.join(" ")));
    };

    for (e, ev) in spec.events.iter().enumerate() {
        let x0 = ev.space.x_min.max(spec.area.x_min);
        let x1 = ev.space.x_max.min(spec.area.x_max);
        let y0 = ev.space.y_min.max(spec.area.y_min);
        let y1 = ev.space.y_max.min(spec.area.y_max);
        let t0 = ev.t0.max(spec.window.0);
        let t1 = ev.t1.min(spec.window.1);
        let signal: Vec<&str> = sample(&mut rng, spec.signal_terms.len(), spec.signal_terms_per_tweet)
            .into_iter()
            .map(|i| spec.signal_terms[i].as_str())
            .collect();
        let count = rng.gen_range(spec.tweets_per_event.0..=spec.tweets_per_event.1);
        for _ in 0..count {
            let x = uniform_in(&mut rng, x0, x1);
            let y = uniform_in(&mut rng, y0, y1);
            let t = uniform_in(&mut rng, t0, t1);
            let n_terms = rng.gen_range(spec.terms_per_event_tweet.0..=spec.terms_per_event_tweet.1);
            let mut terms = signal.clone();
            while terms.len() < n_terms {
                terms.push(spec.noise_terms.terms[noise_pick.sample(&mut rng)].as_str());
            }
            push(&mut records, x, y, t, terms);
            labels.push(e);
        }
    }

    let mean = spec.noise_intensity * spec.area.area();
    let n_noise = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(format!("noise intensity: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let n_events = spec.events.len();
    for k in 0..n_noise {
        let x = uniform_in(&mut rng, spec.area.x_min, spec.area.x_max);
        let y = uniform_in(&mut rng, spec.area.y_min, spec.area.y_max);
        let t = uniform_in(&mut rng, spec.window.0, spec.window.1);
        let n_terms = rng.gen_range(spec.terms_per_noise_tweet.0..=spec.terms_per_noise_tweet.1);
        let terms = (0..n_terms)
            .map(|_| spec.noise_terms.terms[noise_pick.sample(&mut rng)].as_str())
            .collect();
        push(&mut records, x, y, t, terms);
        labels.push(n_events + k);
    }

    Ok(SyntheticCorpus {
        records,
        truth: GroundTruth { labels, n_events },
        domain,
    })
}

/// Benchmark setup shared by all trials of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioParams {
    pub scenario: u32,
    pub n_events: usize,
    pub area_side: f64,
    pub window_len: f64,
    pub noise_intensity: f64,
    pub signal_terms_per_tweet: usize,
    pub max_n_scale: u32,
}

impl ScenarioParams {
    /// 1: events local in time and space; 2: events local in only one of
    /// them; 3 and 4: the same with Poisson noise of intensity 10.
    pub fn new(scenario: u32) -> Result<Self> {
        let noise_intensity = match scenario {
            1 | 2 => 0.0,
            3 | 4 => 10.0,
            other => return Err(Error::UnknownScenario(other)),
        };
        Ok(Self {
            scenario,
            n_events: 20,
            area_side: 10.0,
            window_len: 32.0,
            noise_intensity,
            signal_terms_per_tweet: 1,
            max_n_scale: 4,
        })
    }

    pub fn noisy(&self) -> bool {
        matches!(self.scenario, 3 | 4)
    }

    /// Event boxes drawn uniformly inside the area and window.
    pub fn draw_events(&self, rng: &mut StdRng) -> Vec<EventBox> {
        let place = |rng: &mut StdRng, len: f64, total: f64| {
            let (lo, hi) = if len <= total { (0.0, total - len) } else { (total - len, 0.0) };
            let start = uniform_in(rng, lo, hi);
            (start, start + len)
        };
        let make = |rng: &mut StdRng, side: f64, duration: f64| {
            let (x0, x1) = place(rng, side, self.area_side);
            let (y0, y1) = place(rng, side, self.area_side);
            let (t0, t1) = place(rng, duration, self.window_len);
            EventBox {
                t0,
                t1,
                space: Rect::new(x0, y0, x1, y1),
            }
        };
        match self.scenario {
            1 | 3 => (0..self.n_events).map(|_| make(rng, 2.0, 2.0)).collect(),
            _ => {
                let half = self.n_events / 2;
                (0..self.n_events)
                    .map(|i| {
                        if i < half {
                            let side = uniform_in(rng, 8.0, 16.0);
                            let dur = uniform_in(rng, 1.0, 2.0);
                            make(rng, side, dur)
                        } else {
                            let side = uniform_in(rng, 1.0, 2.0);
                            let dur = uniform_in(rng, 8.0, 16.0);
                            make(rng, side, dur)
                        }
                    })
                    .collect()
            }
        }
    }

    /// Corpus spec of one trial.
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, 0));
        let events = self.draw_events(&mut rng);
        SyntheticSpec {
            area: Rect::new(0.0, 0.0, self.area_side, self.area_side),
            window: (0.0, self.window_len),
            events,
            noise_intensity: self.noise_intensity,
            signal_terms_per_tweet: self.signal_terms_per_tweet,
            seed: derive_seed(seed, 1),
            ..SyntheticSpec::default()
        }
    }

    /// Detector settings for one sweep value, shared by both methods.
    pub fn config(&self, domain: &Domain, param: f64) -> Result<DetectionConfig> {
        let mut cfg = DetectionConfig {
            t_t: param,
            t_d: param,
            delta_t: param,
            delta_d: param,
            min_term_support: 3,
            ..DetectionConfig::default()
        };
        if self.noisy() {
            cfg.l_filter_probes = vec![0.5, 1.0, 1.5, 2.0];
            cfg.l_filter_threshold = 1.0;
        } else {
            cfg.l_filter_probes.clear();
        }
        let grid = Grid::new(*domain, param)?;
        let bound = nscale_upper_bound(grid.cells_per_side(), bin_count(domain.duration(), param) as u32);
        cfg.n_scale = self.max_n_scale.min(bound).max(1);
        Ok(cfg)
    }
}

/// Default sweep values.
pub const DEFAULT_PARAM_GRID: [f64; 8] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub method: Method,
    pub scenario: u32,
    pub param: f64,
    pub trial: usize,
    pub nmi: f64,
    pub f_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub scenario: u32,
    pub param: f64,
    pub n_trials: usize,
    pub nmi_mean: f64,
    pub nmi_stderr: f64,
    pub f_mean: f64,
    pub f_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTable {
    pub params: ScenarioParams,
    pub rows: Vec<TrialRow>,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ScenarioTable {
    /// Means per (method, param), LED first, params in sweep order.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut params: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !params.contains(&r.param) {
                params.push(r.param);
            }
        }
        let mut out = Vec::new();
        for method in [Method::Led, Method::Med] {
            for &p in &params {
                let sel: Vec<&TrialRow> = self.rows.iter().filter(|r| r.method == method && r.param == p).collect();
                if sel.is_empty() {
                    continue;
                }
                let (nmi_mean, nmi_stderr) = mean_stderr(&sel.iter().map(|r| r.nmi).collect::<Vec<_>>());
                let (f_mean, f_stderr) = mean_stderr(&sel.iter().map(|r| r.f_measure).collect::<Vec<_>>());
                out.push(AggregateRow {
                    method,
                    scenario: self.params.scenario,
                    param: p,
                    n_trials: sel.len(),
                    nmi_mean,
                    nmi_stderr,
                    f_mean,
                    f_stderr,
                });
            }
        }
        out
    }

    pub fn mean(&self, method: Method, param: f64) -> Option<AggregateRow> {
        self.aggregate().into_iter().find(|a| a.method == method && a.param == param)
    }

    pub fn trials_csv(&self) -> String {
        let mut s = String::from("method,scenario,param,trial,nmi,f_measure\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.10},{:.10}", r.method, r.scenario, r.param, r.trial, r.nmi, r.f_measure);
        }
        s
    }

    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("method,scenario,param,n_trials,nmi_mean,nmi_stderr,f_mean,f_stderr\n");
        for a in self.aggregate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.10},{:.10},{:.10},{:.10}",
                a.method, a.scenario, a.param, a.n_trials, a.nmi_mean, a.nmi_stderr, a.f_mean, a.f_stderr
            );
        }
        s
    }
}

/// Evaluates one detector on one corpus at one sweep value, scoring the raw
/// partition against the ground truth with NMI and F2.
pub fn evaluate(corpus: &SyntheticCorpus, params: &ScenarioParams, method: Method, param: f64, seed: u64) -> Result<(f64, f64)> {
    let cfg = params.config(&corpus.domain, param)?;
    let det = Detector::new(corpus.domain, cfg).with_exec(Exec::Sequential);
    let out = det.run(method, &corpus.records, seed)?;
    Ok((
        nmi(&out.labels, &corpus.truth.labels)?,
        f_beta(&out.labels, &corpus.truth.labels, 2.0)?,
    ))
}

/// Both detectors over every sweep value and trial. Each trial draws its own
/// corpus from a seed derived from `seed`; both methods and all sweep values
/// of a trial see the same corpus.
pub fn run_scenario(params: &ScenarioParams, grid: &[f64], n_trials: usize, seed: u64, exec: Exec) -> Result<ScenarioTable> {
    let corpora = exec
        .map_range(n_trials, |trial| generate(&params.spec(derive_seed(seed, trial as u64))))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let methods = [Method::Led, Method::Med];
    let jobs: Vec<(usize, usize, Method)> = (0..n_trials)
        .flat_map(|t| (0..grid.len()).flat_map(move |p| methods.map(move |m| (t, p, m))))
        .collect();
    let rows = exec
        .map(&jobs, |&(trial, p, method)| {
            let louvain_seed = derive_seed(derive_seed(seed, trial as u64), 1000 + p as u64);
            evaluate(&corpora[trial], params, method, grid[p], louvain_seed).map(|(nmi, f_measure)| TrialRow {
                method,
                scenario: params.scenario,
                param: grid[p],
                trial,
                nmi,
                f_measure,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioTable {
        params: params.clone(),
        rows,
    })
}
