//! Records, the spatial and temporal extent of an analysis, and corpus validation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// One geotagged, timestamped short text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub user: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub text: String,
    /// Normalized terms in text order. Filled by [`crate::text::tokenize_corpus`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<String>,
}

impl Record {
    pub fn new(
        id: impl Into<String>,
        user: impl Into<String>,
        timestamp: i64,
        lat: f64,
        lon: f64,
        text: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            user: user.into(),
            timestamp,
            lat,
            lon,
            text: text.into(),
            tokens: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// New York City area box, bottom-left (40.4957, -74.2557) to top-right (40.9176, -73.6895).
    pub const NYC: BoundingBox = BoundingBox {
        lat_min: 40.4957,
        lat_max: 40.9176,
        lon_min: -74.2557,
        lon_max: -73.6895,
    };

    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let b = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidBox("non-finite coordinate".into()));
        }
        if self.lat_min >= self.lat_max {
            return Err(Error::InvalidBox(format!(
                "lat_min {} must be below lat_max {}",
                self.lat_min, self.lat_max
            )));
        }
        if self.lon_min >= self.lon_max {
            return Err(Error::InvalidBox(format!(
                "lon_min {} must be below lon_max {}",
                self.lon_min, self.lon_max
            )));
        }
        Ok(())
    }

    /// Closed-interval membership on both axes.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    pub fn mean_lat(&self) -> f64 {
        0.5 * (self.lat_min + self.lat_max)
    }
}

/// Half-open analysis interval `[start, end)` in epoch seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub const DAY: i64 = 24 * 3600;

    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidWindow(format!(
                "end {end} must be after start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    /// The UTC day containing `ts`.
    pub fn day_of(ts: i64) -> Self {
        let start = ts.div_euclid(Self::DAY) * Self::DAY;
        Self {
            start,
            end: start + Self::DAY,
        }
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.start && ts < self.end
    }

    pub fn len_secs(&self) -> i64 {
        self.end - self.start
    }
}

/// How record coordinates and timestamps map onto the planar units the
/// detectors work in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Frame {
    /// Latitude/longitude in degrees. Distances are meters (equirectangular
    /// projection at the box's mean latitude), times are minutes, and
    /// noise-statistics probes are kilometers.
    #[default]
    Geographic,
    /// `lon` is x and `lat` is y in abstract units. One time unit is
    /// `seconds_per_unit` seconds of the record timestamp. Probes share the
    /// distance unit.
    Planar { seconds_per_unit: f64 },
}

impl Frame {
    /// Distance units per noise-statistics probe unit.
    pub fn probe_scale(&self) -> f64 {
        match self {
            Frame::Geographic => 1000.0,
            Frame::Planar { .. } => 1.0,
        }
    }

    pub fn seconds_per_time_unit(&self) -> f64 {
        match self {
            Frame::Geographic => 60.0,
            Frame::Planar { seconds_per_unit } => *seconds_per_unit,
        }
    }
}

/// Spatial box, analysis window and coordinate frame of one detection run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bbox: BoundingBox,
    pub window: TimeWindow,
    pub frame: Frame,
}

impl Domain {
    pub fn new(bbox: BoundingBox, window: TimeWindow, frame: Frame) -> Result<Self> {
        bbox.validate()?;
        if window.end <= window.start {
            return Err(Error::InvalidWindow("empty window".into()));
        }
        if let Frame::Planar { seconds_per_unit } = frame {
            if !(seconds_per_unit > 0.0) {
                return Err(Error::Config("seconds_per_unit must be positive".into()));
            }
        }
        Ok(Self {
            bbox,
            window,
            frame,
        })
    }

    fn meters_per_deg_lat() -> f64 {
        EARTH_RADIUS_M * std::f64::consts::PI / 180.0
    }

    /// Planar position relative to the box's bottom-left corner, in distance units.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        match self.frame {
            Frame::Geographic => {
                let m = Self::meters_per_deg_lat();
                let x = (lon - self.bbox.lon_min) * m * self.bbox.mean_lat().to_radians().cos();
                let y = (lat - self.bbox.lat_min) * m;
                (x, y)
            }
            Frame::Planar { .. } => (lon - self.bbox.lon_min, lat - self.bbox.lat_min),
        }
    }

    /// Inverse of [`Domain::project`].
    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        match self.frame {
            Frame::Geographic => {
                let m = Self::meters_per_deg_lat();
                let lon = self.bbox.lon_min + x / (m * self.bbox.mean_lat().to_radians().cos());
                let lat = self.bbox.lat_min + y / m;
                (lat, lon)
            }
            Frame::Planar { .. } => (self.bbox.lat_min + y, self.bbox.lon_min + x),
        }
    }

    /// Box width and height in distance units.
    pub fn extent(&self) -> (f64, f64) {
        self.project(self.bbox.lat_max, self.bbox.lon_max)
    }

    pub fn position(&self, r: &Record) -> (f64, f64) {
        self.project(r.lat, r.lon)
    }

    /// Offset of `timestamp` from the window start, in time units.
    pub fn time_of(&self, timestamp: i64) -> f64 {
        (timestamp - self.window.start) as f64 / self.frame.seconds_per_time_unit()
    }

    /// Window length in time units.
    pub fn duration(&self) -> f64 {
        self.window.len_secs() as f64 / self.frame.seconds_per_time_unit()
    }

    pub fn distance(&self, a: &Record, b: &Record) -> f64 {
        let (ax, ay) = self.position(a);
        let (bx, by) = self.position(b);
        (ax - bx).hypot(ay - by)
    }

    pub fn contains(&self, r: &Record) -> bool {
        self.bbox.contains(r.lat, r.lon) && self.window.contains(r.timestamp)
    }
}

/// Keeps records inside the box and window, preserving order.
///
/// Fails on the first repeated id. An empty result is allowed and logged.
pub fn validate_corpus(records: Vec<Record>, bbox: &BoundingBox, window: &TimeWindow) -> Result<Vec<Record>> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    let kept: Vec<Record> = records
        .into_iter()
        .filter(|r| r.lat.is_finite() && r.lon.is_finite())
        .filter(|r| bbox.contains(r.lat, r.lon) && window.contains(r.timestamp))
        .collect();
    if kept.is_empty() {
        log::warn!("no records left after box/window filtering");
    }
    Ok(kept)
}
