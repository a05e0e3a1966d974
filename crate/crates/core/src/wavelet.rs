//! Per-(term, cell) occurrence time series and Haar-domain similarity.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid, ScaleBoundaries, SpatialScale};
use crate::model::Record;
use crate::parallel::Exec;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Debug, PartialEq)]
pub struct KeywordTimeSeries {
    pub term: String,
    pub cell: Cell,
    /// Records per time bin; `padded_length` entries, trailing ones zero padding.
    pub counts: Vec<u32>,
    pub padded_length: usize,
}

impl KeywordTimeSeries {
    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Number of `delta_t` bins covering `duration`, at least one.
pub fn bin_count(duration: f64, delta_t: f64) -> usize {
    ((duration / delta_t - 1e-9).ceil() as usize).max(1)
}

/// Smallest power of two holding `n_bins` and supporting `min_levels` DWT levels.
pub fn padded_length(n_bins: usize, min_levels: u32) -> usize {
    n_bins.next_power_of_two().max(1usize << min_levels)
}

fn bin_of(t: f64, delta_t: f64, n_bins: usize) -> usize {
    ((t / delta_t).floor().max(0.0) as usize).min(n_bins - 1)
}

/// Time series of `term` per grid cell, counting each record at most once.
/// Cells without occurrences are omitted.
pub fn build_time_series(
    records: &[Record],
    term: &str,
    grid: &Grid,
    delta_t: f64,
) -> Result<BTreeMap<Cell, KeywordTimeSeries>> {
    let domain = &grid.domain;
    let n_bins = bin_count(domain.duration(), delta_t);
    let padded = padded_length(n_bins, 0);
    let mut out: BTreeMap<Cell, KeywordTimeSeries> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tokens.iter().any(|t| t == term)) {
        let cell = grid.assign_cell(r.lat, r.lon)?;
        let bin = bin_of(domain.time_of(r.timestamp), delta_t, n_bins);
        let s = out.entry(cell).or_insert_with(|| KeywordTimeSeries {
            term: term.to_string(),
            cell,
            counts: vec![0; padded],
            padded_length: padded,
        });
        s.counts[bin] += 1;
    }
    Ok(out)
}

/// Orthonormal Haar pyramid. Index `k - 1` holds level `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarDecomposition {
    pub approximations: Vec<Vec<f64>>,
    pub details: Vec<Vec<f64>>,
}

impl HaarDecomposition {
    pub fn levels(&self) -> usize {
        self.approximations.len()
    }

    pub fn approximation(&self, level: usize) -> Option<&[f64]> {
        level.checked_sub(1).and_then(|i| self.approximations.get(i)).map(Vec::as_slice)
    }
}

/// One analysis step: pairwise `(a+b)/sqrt2` and `(a-b)/sqrt2`.
fn haar_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.chunks_exact(2)
        .map(|p| ((p[0] + p[1]) / SQRT_2, (p[0] - p[1]) / SQRT_2))
        .unzip()
}

/// Full decomposition down to a single coefficient. Inputs whose length is
/// not a power of two are zero-padded first.
pub fn haar_dwt(signal: &[f64]) -> Result<HaarDecomposition> {
    haar_dwt_levels(signal, u32::MAX)
}

/// Decomposition truncated at `max_levels`.
pub fn haar_dwt_levels(signal: &[f64], max_levels: u32) -> Result<HaarDecomposition> {
    if signal.is_empty() {
        return Err(Error::InvalidArgument("empty signal".into()));
    }
    let n = signal.len().next_power_of_two();
    let mut current = signal.to_vec();
    current.resize(n, 0.0);
    let total = n.trailing_zeros().min(max_levels) as usize;
    let mut approximations = Vec::with_capacity(total);
    let mut details = Vec::with_capacity(total);
    for _ in 0..total {
        let (a, d) = haar_step(&current);
        details.push(d);
        approximations.push(a.clone());
        current = a;
    }
    Ok(HaarDecomposition {
        approximations,
        details,
    })
}

/// Mean-removed coefficients and their norm, ready for correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredCoefficients {
    centered: Vec<f64>,
    norm: f64,
    sum: f64,
}

impl CenteredCoefficients {
    pub fn new(values: &[f64]) -> Self {
        let sum: f64 = values.iter().sum();
        let mean = sum / values.len() as f64;
        let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let ss: f64 = centered.iter().map(|v| v * v).sum();
        let scale: f64 = values.iter().map(|v| v * v).sum();
        // exact-arithmetic zero variance can leave round-off residue
        let norm = if ss <= 1e-24 * scale { 0.0 } else { ss.sqrt() };
        Self { centered, norm, sum }
    }

    /// Pearson correlation clamped below at zero. When either side has zero
    /// variance the result is 1 if both are constant and nonzero, else 0.
    pub fn similarity(&self, other: &CenteredCoefficients) -> Result<f64> {
        if self.centered.len() != other.centered.len() {
            return Err(Error::LengthMismatch(self.centered.len(), other.centered.len()));
        }
        if self.norm == 0.0 || other.norm == 0.0 {
            let both_constant = self.norm == 0.0 && other.norm == 0.0;
            let both_nonzero = self.sum > 0.0 && other.sum > 0.0;
            return Ok(if both_constant && both_nonzero { 1.0 } else { 0.0 });
        }
        let dot: f64 = self
            .centered
            .iter()
            .zip(&other.centered)
            .map(|(a, b)| a * b)
            .sum();
        Ok((dot / (self.norm * other.norm)).clamp(0.0, 1.0))
    }
}

/// Clamped correlation of the level-`dwt_level` approximation coefficients.
pub fn scale_similarity(x: &KeywordTimeSeries, y: &KeywordTimeSeries, dwt_level: usize) -> Result<f64> {
    if x.padded_length != y.padded_length || x.counts.len() != y.counts.len() {
        return Err(Error::LengthMismatch(x.counts.len(), y.counts.len()));
    }
    let levels = x.padded_length.trailing_zeros() as usize;
    if dwt_level < 1 || dwt_level > levels {
        return Err(Error::InvalidArgument(format!(
            "DWT level {dwt_level} outside 1..={levels}"
        )));
    }
    let dx = haar_dwt_levels(&x.as_f64(), dwt_level as u32)?;
    let dy = haar_dwt_levels(&y.as_f64(), dwt_level as u32)?;
    let ax = CenteredCoefficients::new(dx.approximation(dwt_level).unwrap());
    let ay = CenteredCoefficients::new(dy.approximation(dwt_level).unwrap());
    ax.similarity(&ay)
}

#[derive(Clone, Debug)]
struct SeriesEntry {
    counts: Vec<u32>,
    /// Index `k - 1` holds level `k`.
    levels: Vec<CenteredCoefficients>,
}

/// All `(term, cell)` series of a corpus with their approximation pyramids,
/// computed once and then shared read-only.
#[derive(Clone, Debug)]
pub struct SeriesStore {
    index: HashMap<(u32, u32), usize>,
    entries: Vec<SeriesEntry>,
    n_bins: usize,
    padded_length: usize,
    max_level: u32,
}

impl SeriesStore {
    /// `cells[r]` and `times[r]` are record `r`'s cell index and time offset;
    /// `terms[r]` its term ids to count.
    pub fn build(
        terms: &[&[u32]],
        cells: &[u32],
        times: &[f64],
        duration: f64,
        delta_t: f64,
        max_level: u32,
        exec: Exec,
    ) -> Self {
        let n_bins = bin_count(duration, delta_t);
        let padded = padded_length(n_bins, max_level);
        let mut index: HashMap<(u32, u32), usize> = HashMap::new();
        let mut counts: Vec<Vec<u32>> = Vec::new();
        for r in 0..terms.len() {
            let bin = bin_of(times[r], delta_t, n_bins);
            for &t in terms[r] {
                let slot = *index.entry((t, cells[r])).or_insert_with(|| {
                    counts.push(vec![0; padded]);
                    counts.len() - 1
                });
                counts[slot][bin] += 1;
            }
        }
        let entries = exec.map(&counts, |c| {
            let signal: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            let dec = haar_dwt_levels(&signal, max_level).expect("non-empty series");
            SeriesEntry {
                counts: c.clone(),
                levels: dec.approximations.iter().map(|a| CenteredCoefficients::new(a)).collect(),
            }
        });
        Self {
            index,
            entries,
            n_bins,
            padded_length: padded,
            max_level,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    pub fn counts(&self, term: u32, cell: u32) -> Option<&[u32]> {
        self.index.get(&(term, cell)).map(|&i| self.entries[i].counts.as_slice())
    }

    /// Similarity of two cells' series at `dwt_level`; 0 if either series is missing.
    pub fn level_similarity(&self, term: u32, a: u32, b: u32, dwt_level: u32) -> f64 {
        let (Some(&ia), Some(&ib)) = (self.index.get(&(term, a)), self.index.get(&(term, b))) else {
            return 0.0;
        };
        if dwt_level < 1 || dwt_level > self.max_level {
            return 0.0;
        }
        let k = dwt_level as usize - 1;
        self.entries[ia].levels[k]
            .similarity(&self.entries[ib].levels[k])
            .unwrap_or(0.0)
    }
}

/// Spatiotemporal similarity of one term between two cells. Same cell gives 1;
/// otherwise the DWT level equals the spatial scale of the cell distance.
pub fn term_pair_similarity(
    term: u32,
    cell_a: Cell,
    cell_b: Cell,
    boundaries: Option<&ScaleBoundaries>,
    grid: &Grid,
    store: &SeriesStore,
) -> f64 {
    if cell_a == cell_b {
        return 1.0;
    }
    let Some(b) = boundaries else {
        return 0.0;
    };
    let level = match b.spatial_scale_of(grid.distance(cell_a, cell_b)) {
        Ok(SpatialScale::Scale(s)) => s,
        _ => return 0.0,
    };
    store.level_similarity(term, grid.index(cell_a) as u32, grid.index(cell_b) as u32, level)
}
