//! Detection parameters and the flat `key = value` config file format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters shared by both detectors, the term filter and post-processing.
///
/// Thresholds are in the units of the run's [`crate::model::Frame`]: minutes and
/// meters for geographic input, raw units for planar input. Noise-filter probes
/// are kilometers for geographic input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Temporal locality threshold of the locality-constrained detector.
    pub t_t: f64,
    /// Spatial locality threshold of the locality-constrained detector.
    pub t_d: f64,
    /// Initial temporal resolution (time-series bin width) of the multiscale detector.
    pub delta_t: f64,
    /// Initial spatial resolution (grid cell side) of the multiscale detector.
    pub delta_d: f64,
    pub n_scale: u32,
    /// Minimum number of records a term must appear in to be evaluated.
    pub min_term_support: usize,
    /// Probe distances for the L-function filter. Empty disables the filter.
    pub l_filter_probes: Vec<f64>,
    pub l_filter_threshold: f64,
    pub min_cluster_records: usize,
    pub min_cluster_users: usize,
    pub max_single_user_fraction: f64,
    pub blacklist_terms: Vec<String>,
    pub min_term_len: usize,
    pub max_term_len: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            t_t: 30.0,
            t_d: 100.0,
            delta_t: 30.0,
            delta_d: 100.0,
            n_scale: 4,
            min_term_support: 5,
            l_filter_probes: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            l_filter_threshold: 0.5,
            min_cluster_records: 3,
            min_cluster_users: 3,
            max_single_user_fraction: 0.5,
            blacklist_terms: Vec::new(),
            min_term_len: 3,
            max_term_len: 30,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        positive("t_t", self.t_t)?;
        positive("t_d", self.t_d)?;
        positive("delta_t", self.delta_t)?;
        positive("delta_d", self.delta_d)?;
        if self.n_scale < 1 {
            return Err(Error::Config("n_scale must be at least 1".into()));
        }
        if self.min_term_support < 1 {
            return Err(Error::Config("min_term_support must be at least 1".into()));
        }
        let mut prev = 0.0;
        for &p in &self.l_filter_probes {
            positive("l_filter_probes entry", p)?;
            if p <= prev {
                return Err(Error::Config("l_filter_probes must be strictly increasing".into()));
            }
            prev = p;
        }
        if !self.l_filter_threshold.is_finite() {
            return Err(Error::Config("l_filter_threshold must be finite".into()));
        }
        if !(self.max_single_user_fraction > 0.0 && self.max_single_user_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "max_single_user_fraction must lie in (0, 1], got {}",
                self.max_single_user_fraction
            )));
        }
        if self.min_term_len == 0 || self.min_term_len > self.max_term_len {
            return Err(Error::Config(format!(
                "term length bounds [{}, {}] are invalid",
                self.min_term_len, self.max_term_len
            )));
        }
        Ok(())
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        fn list(v: &str) -> impl Iterator<Item = &str> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty())
        }
        match key.trim() {
            "t_t" | "tt" => self.t_t = num(key, value)?,
            "t_d" | "td" => self.t_d = num(key, value)?,
            "delta_t" => self.delta_t = num(key, value)?,
            "delta_d" => self.delta_d = num(key, value)?,
            "n_scale" | "nscale" => self.n_scale = num(key, value)?,
            "min_term_support" => self.min_term_support = num(key, value)?,
            "l_filter_probes" => {
                self.l_filter_probes = list(value)
                    .map(|s| num(key, s))
                    .collect::<Result<Vec<f64>>>()?
            }
            "l_filter_threshold" => self.l_filter_threshold = num(key, value)?,
            "min_cluster_records" => self.min_cluster_records = num(key, value)?,
            "min_cluster_users" => self.min_cluster_users = num(key, value)?,
            "max_single_user_fraction" => self.max_single_user_fraction = num(key, value)?,
            "blacklist_terms" => {
                self.blacklist_terms = list(value).map(|s| s.to_lowercase()).collect()
            }
            "min_term_len" => self.min_term_len = num(key, value)?,
            "max_term_len" => self.max_term_len = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat config file on top of the defaults.
    ///
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_kv_str(src: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(src)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, src: &str) -> Result<()> {
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }
}
