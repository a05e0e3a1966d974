//! The two detectors and their shared post-processing.
//!
//! Both build a sparse similarity graph over candidate pairs (records sharing
//! a term), cluster it with single-level Louvain and summarize the clusters.
//! The locality-constrained detector weights an edge by tf-idf cosine when the
//! pair lies within `t_t` and `t_d`. The multiscale detector multiplies the
//! cosine by the best per-term wavelet similarity of the two records' cells.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::DetectionConfig;
use crate::error::{Error, Result};
use crate::graph::{louvain_single_pass, Partition, SimilarityGraph};
use crate::grid::{nscale_upper_bound, Cell, Grid, ScaleBoundaries, SpatialScale};
use crate::model::{Domain, Record};
use crate::noise::filter_term_ids;
use crate::parallel::Exec;
use crate::text::{default_stop_words, tokenize_corpus, InvertedIndex, TextIndex, Vocabulary};
use crate::wavelet::{bin_count, SeriesStore};

/// Edges lighter than this are dropped from the graph.
pub const MIN_EDGE_WEIGHT: f64 = 1e-12;

const MAX_TOP_TERMS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Led,
    Med,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Led => "led",
            Method::Med => "med",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "led" => Ok(Method::Led),
            "med" => Ok(Method::Med),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventCluster {
    pub id: usize,
    pub record_ids: Vec<String>,
    pub n_users: usize,
    pub median_timestamp: i64,
    /// Shortest interval, in seconds, covering 80% of the records.
    pub t80_interval: i64,
    /// Mean (lat, lon).
    pub centroid: (f64, f64),
    pub top_terms: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TooFewRecords,
    TooFewUsers,
    SingleUserDominates,
    Blacklisted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedCluster {
    pub record_ids: Vec<String>,
    pub reason: DropReason,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_vertices: usize,
    pub n_candidate_pairs: usize,
    pub n_edges: usize,
    pub total_weight: f64,
    pub modularity: Option<f64>,
    pub n_communities: usize,
}

/// Everything that describes a run except wall-clock timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: Method,
    pub config: DetectionConfig,
    pub domain: Domain,
    pub seed: u64,
    pub n_records: usize,
    pub vocabulary_size: usize,
    pub graph: GraphStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiscale: Option<MultiscaleStats>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleStats {
    pub n_valid_terms: usize,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub n_bins: usize,
    pub padded_length: usize,
    pub n_scale_bound: u32,
    pub n_series: usize,
    /// Scale bins come from occupied cells only.
    pub boundaries: Option<ScaleBoundaries>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub clusters: Vec<EventCluster>,
    pub dropped_clusters: Vec<DroppedCluster>,
    pub metadata: RunMetadata,
}

/// Stage name and elapsed seconds.
pub type Timings = Vec<(String, f64)>;

/// A finished run: the post-processed result plus the raw community of every record.
#[derive(Clone, Debug)]
pub struct Detection {
    pub result: PipelineResult,
    /// Community per input record; records outside the graph's edges are singletons.
    pub labels: Vec<usize>,
    pub timings: Timings,
}

/// Distance and time offset gate followed by tf-idf cosine. Bounds are inclusive.
pub fn led_similarity(a: &Record, b: &Record, domain: &Domain, cfg: &DetectionConfig, vocab: &Vocabulary) -> f64 {
    let dt = (domain.time_of(a.timestamp) - domain.time_of(b.timestamp)).abs();
    if dt > cfg.t_t || domain.distance(a, b) > cfg.t_d {
        return 0.0;
    }
    vocab.vectorize(&a.tokens).cosine(&vocab.vectorize(&b.tokens))
}

/// Grid, scale bins and series store of the multiscale detector.
#[derive(Clone, Debug)]
pub struct MedModel {
    pub grid: Grid,
    pub boundaries: Option<ScaleBoundaries>,
    pub store: SeriesStore,
    /// Per term id of the corpus vocabulary.
    pub valid: Vec<bool>,
    pub n_scale_bound: u32,
}

impl MedModel {
    /// Checks `n_scale` against the grid and series dimensions.
    pub fn check_scales(domain: &Domain, cfg: &DetectionConfig) -> Result<(Grid, u32)> {
        let grid = Grid::new(*domain, cfg.delta_d)?;
        let l_t = bin_count(domain.duration(), cfg.delta_t);
        let bound = nscale_upper_bound(grid.cells_per_side(), l_t as u32);
        // a single scale is always admissible: it only needs level 1
        if cfg.n_scale > bound.max(1) {
            return Err(Error::Config(format!(
                "n_scale {} exceeds its bound {} for a {}x{} grid and {} time bins",
                cfg.n_scale, bound, grid.n_rows, grid.n_cols, l_t
            )));
        }
        Ok((grid, bound))
    }

    pub fn build(
        domain: &Domain,
        records: &[Record],
        text: &TextIndex,
        cfg: &DetectionConfig,
        exec: Exec,
    ) -> Result<Self> {
        let (grid, bound) = Self::check_scales(domain, cfg)?;
        let valid = filter_term_ids(domain, records, &text.vocab, &text.term_sets, cfg, exec);
        let cells = records
            .iter()
            .map(|r| grid.assign_cell(r.lat, r.lon))
            .collect::<Result<Vec<Cell>>>()?;
        let cell_ids: Vec<u32> = cells.iter().map(|&c| grid.index(c) as u32).collect();
        let times: Vec<f64> = records.iter().map(|r| domain.time_of(r.timestamp)).collect();
        let valid_sets: Vec<Vec<u32>> = text
            .term_sets
            .iter()
            .map(|s| s.iter().copied().filter(|&t| valid[t as usize]).collect())
            .collect();
        let refs: Vec<&[u32]> = valid_sets.iter().map(Vec::as_slice).collect();
        let store = SeriesStore::build(
            &refs,
            &cell_ids,
            &times,
            domain.duration(),
            cfg.delta_t,
            cfg.n_scale,
            exec,
        );
        let boundaries = ScaleBoundaries::from_occupied(&grid, &cells, cfg.n_scale, exec)?;
        Ok(Self {
            grid,
            boundaries,
            store,
            valid,
            n_scale_bound: bound,
        })
    }

    /// DWT level for two distinct cells.
    fn level(&self, a: Cell, b: Cell) -> Option<u32> {
        match self.boundaries.as_ref()?.spatial_scale_of(self.grid.distance(a, b)) {
            Ok(SpatialScale::Scale(s)) => Some(s),
            _ => None,
        }
    }

    /// Maximum per-term similarity over `shared` valid term ids.
    pub fn spatiotemporal_similarity_cells(&self, shared: &[u32], a: Cell, b: Cell) -> f64 {
        if shared.is_empty() {
            return 0.0;
        }
        if a == b {
            return 1.0;
        }
        let Some(level) = self.level(a, b) else {
            return 0.0;
        };
        let (ia, ib) = (self.grid.index(a) as u32, self.grid.index(b) as u32);
        let mut best = 0.0f64;
        for &t in shared {
            best = best.max(self.store.level_similarity(t, ia, ib, level));
            if best >= 1.0 {
                break;
            }
        }
        best
    }

    /// Spatiotemporal factor of two tokenized records.
    pub fn spatiotemporal_similarity(&self, a: &Record, b: &Record, vocab: &Vocabulary) -> Result<f64> {
        let sa: HashSet<u32> = vocab.term_set(&a.tokens).into_iter().collect();
        let shared: Vec<u32> = vocab
            .term_set(&b.tokens)
            .into_iter()
            .filter(|t| sa.contains(t) && self.valid[*t as usize])
            .collect();
        let ca = self.grid.assign_cell(a.lat, a.lon)?;
        let cb = self.grid.assign_cell(b.lat, b.lon)?;
        Ok(self.spatiotemporal_similarity_cells(&shared, ca, cb))
    }
}

/// tf-idf cosine times the best shared-term wavelet similarity.
pub fn med_similarity(a: &Record, b: &Record, vocab: &Vocabulary, model: &MedModel) -> Result<f64> {
    let st = model.spatiotemporal_similarity(a, b, vocab)?;
    if st == 0.0 {
        return Ok(0.0);
    }
    Ok(vocab.vectorize(&a.tokens).cosine(&vocab.vectorize(&b.tokens)) * st)
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Runs either detector over a corpus.
#[derive(Clone, Debug)]
pub struct Detector {
    pub domain: Domain,
    pub cfg: DetectionConfig,
    pub stop_words: HashSet<String>,
    pub exec: Exec,
}

/// Graph plus what it took to build it.
pub struct BuiltGraph {
    pub graph: SimilarityGraph,
    pub n_candidate_pairs: usize,
    pub multiscale: Option<MultiscaleStats>,
    pub vocabulary_size: usize,
}

impl Detector {
    pub fn new(domain: Domain, cfg: DetectionConfig) -> Self {
        Self {
            domain,
            cfg,
            stop_words: default_stop_words(),
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Config checks that need no data. Runs before any compute.
    pub fn validate(&self, method: Method) -> Result<()> {
        self.cfg.validate()?;
        if method == Method::Med {
            MedModel::check_scales(&self.domain, &self.cfg)?;
        }
        Ok(())
    }

    /// Copies of the records with tokens filled in.
    pub fn tokenize(&self, records: &[Record]) -> Vec<Record> {
        let mut out = records.to_vec();
        tokenize_corpus(&mut out, &self.stop_words, self.cfg.min_term_len, self.cfg.max_term_len);
        out
    }

    /// W1 or W2 over tokenized records.
    pub fn similarity_graph(&self, method: Method, records: &[Record]) -> Result<BuiltGraph> {
        let text = TextIndex::build(records);
        let n = records.len();
        match method {
            Method::Led => {
                let all = vec![true; text.vocab.len()];
                let index = InvertedIndex::build(&text.term_sets, &all);
                let times: Vec<f64> = records.iter().map(|r| self.domain.time_of(r.timestamp)).collect();
                let pos: Vec<(f64, f64)> = records.iter().map(|r| self.domain.position(r)).collect();
                let (t_t, t_d) = (self.cfg.t_t, self.cfg.t_d);
                let rows = self.exec.map_range(n, |i| {
                    let partners = index.partners(i);
                    let count = partners.len();
                    let edges: Vec<(usize, usize, f64)> = partners
                        .into_iter()
                        .filter_map(|j| {
                            let j = j as usize;
                            if (times[i] - times[j]).abs() > t_t {
                                return None;
                            }
                            if (pos[i].0 - pos[j].0).hypot(pos[i].1 - pos[j].1) > t_d {
                                return None;
                            }
                            let w = text.cosine(i, j);
                            (w > MIN_EDGE_WEIGHT).then_some((i, j, w))
                        })
                        .collect();
                    (count, edges)
                });
                let n_candidate_pairs = rows.iter().map(|r| r.0).sum();
                let edges: Vec<_> = rows.into_iter().flat_map(|r| r.1).collect();
                Ok(BuiltGraph {
                    graph: SimilarityGraph::from_edges(n, &edges)?,
                    n_candidate_pairs,
                    multiscale: None,
                    vocabulary_size: text.vocab.len(),
                })
            }
            Method::Med => {
                let model = MedModel::build(&self.domain, records, &text, &self.cfg, self.exec)?;
                let index = InvertedIndex::build(&text.term_sets, &model.valid);
                let cells = records
                    .iter()
                    .map(|r| model.grid.assign_cell(r.lat, r.lon))
                    .collect::<Result<Vec<Cell>>>()?;
                let rows = self.exec.map_range(n, |i| {
                    let partners = index.partners(i);
                    let count = partners.len();
                    let edges: Vec<(usize, usize, f64)> = partners
                        .into_iter()
                        .filter_map(|j| {
                            let j = j as usize;
                            let shared = intersect_sorted(index.valid_terms_of(i), index.valid_terms_of(j));
                            let st = model.spatiotemporal_similarity_cells(&shared, cells[i], cells[j]);
                            if st <= 0.0 {
                                return None;
                            }
                            let w = text.cosine(i, j) * st;
                            (w > MIN_EDGE_WEIGHT).then_some((i, j, w))
                        })
                        .collect();
                    (count, edges)
                });
                let n_candidate_pairs = rows.iter().map(|r| r.0).sum();
                let edges: Vec<_> = rows.into_iter().flat_map(|r| r.1).collect();
                let stats = MultiscaleStats {
                    n_valid_terms: model.valid.iter().filter(|&&v| v).count(),
                    grid_rows: model.grid.n_rows,
                    grid_cols: model.grid.n_cols,
                    n_bins: model.store.n_bins(),
                    padded_length: model.store.padded_length(),
                    n_scale_bound: model.n_scale_bound,
                    n_series: model.store.len(),
                    boundaries: model.boundaries.clone(),
                };
                Ok(BuiltGraph {
                    graph: SimilarityGraph::from_edges(n, &edges)?,
                    n_candidate_pairs,
                    multiscale: Some(stats),
                    vocabulary_size: text.vocab.len(),
                })
            }
        }
    }

    /// Full pipeline over untokenized, validated records.
    pub fn run(&self, method: Method, records: &[Record], seed: u64) -> Result<Detection> {
        self.validate(method)?;
        let mut timings = Timings::new();
        let mut clock = Instant::now();
        let mut lap = |name: &str, timings: &mut Timings| {
            timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
            clock = Instant::now();
        };

        let tokenized = self.tokenize(records);
        lap("tokenize", &mut timings);
        let built = self.similarity_graph(method, &tokenized)?;
        lap("graph", &mut timings);

        let mut warnings = Vec::new();
        let g = &built.graph;
        let (labels, partition) = if g.total_weight() > 0.0 {
            let p = louvain_single_pass(g, seed)?;
            (p.communities.clone(), Some(p))
        } else {
            let msg = "similarity graph has no positive edges; every record is its own cluster".to_string();
            log::debug!("{msg}");
            warnings.push(msg);
            ((0..tokenized.len()).collect(), None)
        };
        lap("cluster", &mut timings);

        let groups = group_labels(&labels);
        let (clusters, dropped_clusters) = post_process(&groups, &tokenized, &self.cfg);
        lap("post_process", &mut timings);
        if clusters.is_empty() {
            warnings.push("no clusters retained".into());
        }

        let graph = GraphStats {
            n_vertices: g.n_vertices(),
            n_candidate_pairs: built.n_candidate_pairs,
            n_edges: g.n_edges(),
            total_weight: g.total_weight() / 2.0,
            modularity: partition.as_ref().map(|p| p.modularity),
            n_communities: groups.len(),
        };
        let metadata = RunMetadata {
            method,
            config: self.cfg.clone(),
            domain: self.domain,
            seed,
            n_records: tokenized.len(),
            vocabulary_size: built.vocabulary_size,
            graph,
            multiscale: built.multiscale,
            warnings,
        };
        Ok(Detection {
            result: PipelineResult {
                clusters,
                dropped_clusters,
                metadata,
            },
            labels,
            timings,
        })
    }
}

pub fn run_led(records: &[Record], domain: Domain, cfg: &DetectionConfig, seed: u64) -> Result<PipelineResult> {
    Ok(Detector::new(domain, cfg.clone()).run(Method::Led, records, seed)?.result)
}

pub fn run_med(records: &[Record], domain: Domain, cfg: &DetectionConfig, seed: u64) -> Result<PipelineResult> {
    Ok(Detector::new(domain, cfg.clone()).run(Method::Med, records, seed)?.result)
}

/// Members per label, labels in first-appearance order.
pub fn group_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    Partition {
        communities: crate::graph::relabel(labels),
        modularity: 0.0,
    }
    .groups()
}

fn median(sorted: &[i64]) -> i64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]).div_euclid(2)
    }
}

/// Shortest span of `ceil(0.8 n)` consecutive sorted timestamps.
pub fn t80_interval(sorted: &[i64]) -> i64 {
    let n = sorted.len();
    if n == 0 {
        return 0;
    }
    let k = (4 * n).div_ceil(5);
    sorted
        .windows(k)
        .map(|w| w[k - 1] - w[0])
        .min()
        .unwrap_or(0)
}

fn top_terms(members: &[usize], records: &[Record]) -> Vec<String> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for &m in members {
        for t in &records[m].tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut v: Vec<(&str, usize)> = freq.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(MAX_TOP_TERMS).map(|(t, _)| t.to_string()).collect()
}

fn summarize(members: &[usize], records: &[Record]) -> EventCluster {
    let mut ts: Vec<i64> = members.iter().map(|&m| records[m].timestamp).collect();
    ts.sort_unstable();
    let n = members.len() as f64;
    let lat = members.iter().map(|&m| records[m].lat).sum::<f64>() / n;
    let lon = members.iter().map(|&m| records[m].lon).sum::<f64>() / n;
    let users: HashSet<&str> = members.iter().map(|&m| records[m].user.as_str()).collect();
    EventCluster {
        id: 0,
        record_ids: members.iter().map(|&m| records[m].id.clone()).collect(),
        n_users: users.len(),
        median_timestamp: median(&ts),
        t80_interval: t80_interval(&ts),
        centroid: (lat, lon),
        top_terms: top_terms(members, records),
    }
}

fn drop_reason(members: &[usize], records: &[Record], cfg: &DetectionConfig, summary: &EventCluster) -> Option<DropReason> {
    if members.len() < cfg.min_cluster_records {
        return Some(DropReason::TooFewRecords);
    }
    if summary.n_users < cfg.min_cluster_users {
        return Some(DropReason::TooFewUsers);
    }
    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for &m in members {
        *per_user.entry(records[m].user.as_str()).or_insert(0) += 1;
    }
    let top = per_user.values().copied().max().unwrap_or(0);
    if top as f64 > cfg.max_single_user_fraction * members.len() as f64 {
        return Some(DropReason::SingleUserDominates);
    }
    if summary
        .top_terms
        .iter()
        .any(|t| cfg.blacklist_terms.iter().any(|b| b == t))
    {
        return Some(DropReason::Blacklisted);
    }
    None
}

/// Applies the size, user-diversity and blacklist gates and summarizes
/// survivors. Retained clusters are sorted by size, largest first, and
/// numbered from 1.
pub fn post_process(groups: &[Vec<usize>], records: &[Record], cfg: &DetectionConfig) -> (Vec<EventCluster>, Vec<DroppedCluster>) {
    let mut kept: Vec<(usize, EventCluster)> = Vec::new();
    let mut dropped = Vec::new();
    for members in groups.iter().filter(|g| !g.is_empty()) {
        let summary = summarize(members, records);
        match drop_reason(members, records, cfg, &summary) {
            Some(reason) => dropped.push(DroppedCluster {
                record_ids: summary.record_ids,
                reason,
            }),
            None => kept.push((members[0], summary)),
        }
    }
    kept.sort_by(|a, b| b.1.record_ids.len().cmp(&a.1.record_ids.len()).then(a.0.cmp(&b.0)));
    let clusters = kept
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut c))| {
            c.id = i + 1;
            c
        })
        .collect();
    (clusters, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, Frame, TimeWindow};

    fn planar_domain() -> Domain {
        Domain::new(
            BoundingBox::new(0.0, 1000.0, 0.0, 1000.0).unwrap(),
            TimeWindow::new(0, 24 * 3600).unwrap(),
            Frame::Planar { seconds_per_unit: 60.0 },
        )
        .unwrap()
    }

    fn rec(id: &str, user: &str, minute: i64, x: f64, y: f64, text: &str) -> Record {
        Record::new(id, user, minute * 60, y, x, text)
    }

    fn tokenized(recs: &[Record]) -> Vec<Record> {
        Detector::new(planar_domain(), DetectionConfig::default()).tokenize(recs)
    }

    #[test]
    fn led_gate_is_inclusive() {
        let cfg = DetectionConfig::default();
        let d = planar_domain();
        let recs = tokenized(&[
            rec("a", "u1", 100, 0.0, 0.0, "protest park"),
            rec("b", "u2", 130, 100.0, 0.0, "protest square"),
            rec("c", "u3", 140, 0.0, 0.0, "protest"),
            rec("d", "u4", 110, 50.0, 0.0, "protest"),
            rec("e", "u5", 900, 0.0, 0.0, "unrelated"),
        ]);
        let v = Vocabulary::build(&recs);
        let cos_ab = v.vectorize(&recs[0].tokens).cosine(&v.vectorize(&recs[1].tokens));
        assert!(cos_ab > 0.0);
        assert_eq!(led_similarity(&recs[0], &recs[1], &d, &cfg, &v), cos_ab);
        assert_eq!(led_similarity(&recs[0], &recs[2], &d, &cfg, &v), 0.0);
        let cos_ad = v.vectorize(&recs[0].tokens).cosine(&v.vectorize(&recs[3].tokens));
        assert_eq!(led_similarity(&recs[0], &recs[3], &d, &cfg, &v), cos_ad);
    }

    #[test]
    fn post_process_gates() {
        let cfg = DetectionConfig::default();
        let mut recs = Vec::new();
        for i in 0..2 {
            recs.push(rec(&format!("s{i}"), &format!("u{i}"), i, 0.0, 0.0, "tiny"));
        }
        for i in 0..6 {
            let user = if i < 4 { "bot".to_string() } else { format!("v{i}") };
            recs.push(rec(&format!("d{i}"), &user, i, 0.0, 0.0, "spam"));
        }
        for i in 0..5 {
            recs.push(rec(&format!("k{i}"), &format!("w{i}"), 10 + i, 10.0, 20.0, "concert tonight"));
        }
        let recs = tokenized(&recs);
        let groups = vec![(0..2).collect(), (2..8).collect(), (8..13).collect::<Vec<_>>()];
        let (kept, dropped) = post_process(&groups, &recs, &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].record_ids.len(), 5);
        assert_eq!(kept[0].id, 1);
        assert_eq!(kept[0].top_terms, vec!["concert", "tonight"]);
        assert_eq!(kept[0].median_timestamp, 12 * 60);
        assert_eq!(kept[0].t80_interval, 3 * 60);
        assert!((kept[0].centroid.0 - 20.0).abs() < 1e-12);
        let reasons: Vec<DropReason> = dropped.iter().map(|d| d.reason).collect();
        assert_eq!(reasons, vec![DropReason::TooFewRecords, DropReason::SingleUserDominates]);
    }

    #[test]
    fn too_few_users_and_blacklist() {
        let mut cfg = DetectionConfig::default();
        let recs = tokenized(&[
            rec("a", "u1", 0, 0.0, 0.0, "hiring now"),
            rec("b", "u1", 1, 0.0, 0.0, "hiring now"),
            rec("c", "u2", 2, 0.0, 0.0, "hiring now"),
            rec("d", "u3", 3, 0.0, 0.0, "hiring now"),
        ]);
        let (_, dropped) = post_process(&[vec![0, 1, 2]], &recs, &cfg);
        assert_eq!(dropped[0].reason, DropReason::TooFewUsers);
        let (kept, _) = post_process(&[vec![0, 2, 3]], &recs, &cfg);
        assert_eq!(kept.len(), 1);
        cfg.blacklist_terms = vec!["hiring".into()];
        let (_, dropped) = post_process(&[vec![0, 2, 3]], &recs, &cfg);
        assert_eq!(dropped[0].reason, DropReason::Blacklisted);
    }

    #[test]
    fn t80_and_median() {
        assert_eq!(t80_interval(&[0, 1, 2, 3, 100]), 3);
        assert_eq!(t80_interval(&[5]), 0);
        assert_eq!(median(&[1, 2, 3, 10]), 2);
        assert_eq!(median(&[1, 2, 3]), 2);
    }

    #[test]
    fn tight_clique_among_isolated_records() {
        let mut recs = Vec::new();
        for i in 0..5 {
            recs.push(rec(&format!("e{i}"), &format!("u{i}"), 600 + i, 500.0 + i as f64, 500.0, "zuccotti protest"));
        }
        for i in 0..50 {
            recs.push(rec(&format!("n{i}"), &format!("n{i}"), (i * 17) % 1400, (i * 37 % 1000) as f64, (i * 53 % 1000) as f64, &format!("solo{i}x")));
        }
        let det = Detector::new(planar_domain(), DetectionConfig::default());
        let out = det.run(Method::Led, &recs, 1).unwrap();
        assert_eq!(out.result.clusters.len(), 1);
        assert_eq!(out.result.clusters[0].record_ids.len(), 5);
        assert_eq!(out.result.dropped_clusters.len(), 50);
    }

    #[test]
    fn med_rejects_excess_scales() {
        let cfg = DetectionConfig { n_scale: 12, ..Default::default() };
        let det = Detector::new(planar_domain(), cfg);
        assert!(matches!(det.run(Method::Med, &[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn empty_corpus_runs() {
        let det = Detector::new(planar_domain(), DetectionConfig::default());
        let out = det.run(Method::Led, &[], 0).unwrap();
        assert!(out.result.clusters.is_empty());
        assert!(!out.result.metadata.warnings.is_empty());
    }
}
