//! Spatial and temporal noise statistics: Ripley's K and the standardized L
//! function, Monte Carlo envelopes under complete spatial randomness, a
//! chi-squared uniformity test for timestamps, and the term filter built on L.
//!
//! The K estimator has no edge correction and counts ordered pairs with
//! strictly smaller distance than the probe.

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

use crate::config::DetectionConfig;
use crate::error::{Error, Result};
use crate::model::{Domain, Record};
use crate::parallel::{derive_seed, Exec};
use crate::text::Vocabulary;

/// Axis-aligned rectangle in planar units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// `(K, L)` at a single distance.
pub fn ripley_l(points: &[(f64, f64)], area: f64, s: f64) -> Result<(f64, f64)> {
    Ok(ripley_profile(points, area, &[s])?[0])
}

/// `(K, L)` at each probe. Probes need not be sorted.
pub fn ripley_profile(points: &[(f64, f64)], area: f64, probes: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {n}")));
    }
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| probes[a].total_cmp(&probes[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| probes[i]).collect();

    // hist[k]: unordered pairs whose distance is below sorted[k] but not below sorted[k-1]
    let mut hist = vec![0u64; sorted.len() + 1];
    for i in 0..n {
        for j in i + 1..n {
            let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
            hist[sorted.partition_point(|&s| s <= d)] += 1;
        }
    }
    let scale = area / (n as f64 * n as f64);
    let mut out = vec![(0.0, 0.0); probes.len()];
    let mut cum = 0u64;
    for (k, &orig) in order.iter().enumerate() {
        cum += hist[k];
        let kval = scale * 2.0 * cum as f64;
        out[orig] = (kval, (kval / std::f64::consts::PI).sqrt() - probes[orig]);
    }
    Ok(out)
}

/// L values of one uniform draw of `n` points in `rect`.
pub fn csr_draw(n: usize, rect: &Rect, probes: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.gen_range(rect.x_min..rect.x_max),
                rng.gen_range(rect.y_min..rect.y_max),
            )
        })
        .collect();
    Ok(ripley_profile(&pts, rect.area(), probes)?
        .into_iter()
        .map(|(_, l)| l)
        .collect())
}

/// Per-probe L values of `n_sims` independent uniform draws, one row per draw.
pub fn csr_simulations(n: usize, rect: &Rect, probes: &[f64], n_sims: usize, seed: u64, exec: Exec) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {n}")));
    }
    exec.map_range(n_sims, |sim| {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, sim as u64));
        csr_draw(n, rect, probes, &mut rng)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Pointwise min and max of L over `n_sims` uniform draws.
pub fn csr_envelope(n: usize, rect: &Rect, probes: &[f64], n_sims: usize, seed: u64) -> Result<Envelope> {
    csr_envelope_with(n, rect, probes, n_sims, seed, Exec::default())
}

pub fn csr_envelope_with(n: usize, rect: &Rect, probes: &[f64], n_sims: usize, seed: u64, exec: Exec) -> Result<Envelope> {
    if n_sims < 1 {
        return Err(Error::InvalidArgument("n_sims must be at least 1".into()));
    }
    let sims = csr_simulations(n, rect, probes, n_sims, seed, exec)?;
    let mut env = Envelope {
        min: vec![f64::INFINITY; probes.len()],
        max: vec![f64::NEG_INFINITY; probes.len()],
    };
    for row in &sims {
        for (k, &l) in row.iter().enumerate() {
            env.min[k] = env.min[k].min(l);
            env.max[k] = env.max[k].max(l);
        }
    }
    Ok(env)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    /// Bins actually used after merging for the expected-count rule.
    pub bins: usize,
    pub dof: usize,
    pub critical_value: f64,
    pub reject: bool,
}

/// Goodness of fit of `timestamps` to the uniform distribution on
/// `[start, end)`. The requested bin count is reduced until every bin expects
/// at least five observations; with fewer than two usable bins nothing is
/// rejected.
pub fn chi_squared_uniform(timestamps: &[f64], start: f64, end: f64, n_bins: usize, alpha: f64) -> Result<ChiSquaredResult> {
    if !(end > start) {
        return Err(Error::InvalidWindow(format!("zero-length window [{start}, {end})")));
    }
    if n_bins < 1 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = timestamps.len();
    let bins = n_bins.min(n / 5);
    if bins < 2 {
        return Ok(ChiSquaredResult {
            statistic: 0.0,
            bins,
            dof: 0,
            critical_value: f64::INFINITY,
            reject: false,
        });
    }
    let width = (end - start) / bins as f64;
    let mut observed = vec![0u64; bins];
    for &t in timestamps {
        let b = (((t - start) / width).floor().max(0.0) as usize).min(bins - 1);
        observed[b] += 1;
    }
    let expected = n as f64 / bins as f64;
    let statistic = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let critical_value = quantile(&dist, 1.0 - alpha);
    Ok(ChiSquaredResult {
        statistic,
        bins,
        dof,
        critical_value,
        reject: statistic > critical_value,
    })
}

/// statrs' inverse CDF stops at ~1e-5; a few Newton steps polish it.
fn quantile(dist: &ChiSquared, p: f64) -> f64 {
    let mut x = dist.inverse_cdf(p);
    for _ in 0..3 {
        let density = dist.pdf(x);
        if !(density > 0.0) {
            break;
        }
        x -= (dist.cdf(x) - p) / density;
    }
    x
}

/// L-function summary of one term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LFunctionProfile {
    pub term: String,
    pub n_points: usize,
    pub probes: Vec<f64>,
    pub l_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

impl LFunctionProfile {
    pub fn mean_l(&self) -> f64 {
        if self.l_values.is_empty() {
            return f64::NAN;
        }
        self.l_values.iter().sum::<f64>() / self.l_values.len() as f64
    }
}

/// Record positions in probe units and the box area in squared probe units.
pub fn probe_space(domain: &Domain, records: &[Record]) -> (Vec<(f64, f64)>, f64) {
    let scale = domain.frame.probe_scale();
    let pts = records
        .iter()
        .map(|r| {
            let (x, y) = domain.position(r);
            (x / scale, y / scale)
        })
        .collect();
    let (w, h) = domain.extent();
    (pts, (w / scale) * (h / scale))
}

/// Record indices per term id, for terms with at least `min_support` records.
pub fn supported_terms(term_sets: &[Vec<u32>], n_terms: usize, min_support: usize) -> Vec<(u32, Vec<usize>)> {
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); n_terms];
    for (r, set) in term_sets.iter().enumerate() {
        for &t in set {
            postings[t as usize].push(r);
        }
    }
    postings
        .into_iter()
        .enumerate()
        .filter(|(_, p)| p.len() >= min_support.max(1))
        .map(|(t, p)| (t as u32, p))
        .collect()
}

/// L profiles at `probes` for every term meeting `min_support`, in term-id order.
pub fn term_profiles(
    points: &[(f64, f64)],
    area: f64,
    vocab: &Vocabulary,
    term_sets: &[Vec<u32>],
    min_support: usize,
    probes: &[f64],
    exec: Exec,
) -> Vec<LFunctionProfile> {
    let terms = supported_terms(term_sets, vocab.len(), min_support.max(2));
    exec.map(&terms, |(t, recs)| {
        let pts: Vec<(f64, f64)> = recs.iter().map(|&r| points[r]).collect();
        let l_values = ripley_profile(&pts, area, probes)
            .map(|v| v.into_iter().map(|(_, l)| l).collect())
            .unwrap_or_default();
        LFunctionProfile {
            term: vocab.term(*t).to_string(),
            n_points: recs.len(),
            probes: probes.to_vec(),
            l_values,
            envelope: None,
        }
    })
}

/// Per term id, whether it is valid for time-series construction: support of
/// at least `min_term_support` records and, when probes are configured, mean
/// L over the probes of at least `l_filter_threshold`.
pub fn filter_term_ids(
    domain: &Domain,
    records: &[Record],
    vocab: &Vocabulary,
    term_sets: &[Vec<u32>],
    cfg: &DetectionConfig,
    exec: Exec,
) -> Vec<bool> {
    let mut valid = vec![false; vocab.len()];
    if cfg.l_filter_probes.is_empty() {
        for (t, _) in supported_terms(term_sets, vocab.len(), cfg.min_term_support) {
            valid[t as usize] = true;
        }
        return valid;
    }
    let (points, area) = probe_space(domain, records);
    for p in term_profiles(
        &points,
        area,
        vocab,
        term_sets,
        cfg.min_term_support,
        &cfg.l_filter_probes,
        exec,
    ) {
        if !p.l_values.is_empty() && p.mean_l() >= cfg.l_filter_threshold {
            valid[vocab.id(&p.term).expect("profiled term is in vocabulary") as usize] = true;
        }
    }
    valid
}

/// Valid terms by name. Records must already be tokenized.
pub fn filter_terms(records: &[Record], vocab: &Vocabulary, domain: &Domain, cfg: &DetectionConfig) -> std::collections::BTreeSet<String> {
    let term_sets: Vec<Vec<u32>> = records.iter().map(|r| vocab.term_set(&r.tokens)).collect();
    filter_term_ids(domain, records, vocab, &term_sets, cfg, Exec::default())
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| v)
        .map(|(t, _)| vocab.term(t as u32).to_string())
        .collect()
}

/// Envelopes for every distinct point count, computed once per count.
pub fn envelopes_by_count(counts: &[usize], rect: &Rect, probes: &[f64], n_sims: usize, seed: u64, exec: Exec) -> Result<HashMap<usize, Envelope>> {
    let mut distinct: Vec<usize> = counts.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut out = HashMap::new();
    for n in distinct {
        out.insert(n, csr_envelope_with(n, rect, probes, n_sims, derive_seed(seed, n as u64), exec)?);
    }
    Ok(out)
}
