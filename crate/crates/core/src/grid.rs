//! Square-cell grid over the bounding box and the distance-to-scale mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Domain;
use crate::parallel::Exec;

/// Tolerance for points that land on a cell edge after projection round-off.
const EDGE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub domain: Domain,
    pub delta_d: f64,
    pub n_rows: u32,
    pub n_cols: u32,
}

impl Grid {
    pub fn new(domain: Domain, delta_d: f64) -> Result<Self> {
        if !(delta_d.is_finite() && delta_d > 0.0) {
            return Err(Error::Config(format!("delta_d must be positive, got {delta_d}")));
        }
        let (w, h) = domain.extent();
        let count = |len: f64| ((len / delta_d - EDGE_EPS).ceil() as u32).max(1);
        Ok(Self {
            domain,
            delta_d,
            n_rows: count(h),
            n_cols: count(w),
        })
    }

    /// Cells along the longer side of the box.
    pub fn cells_per_side(&self) -> u32 {
        self.n_rows.max(self.n_cols)
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows as usize * self.n_cols as usize
    }

    pub fn index(&self, c: Cell) -> usize {
        c.row as usize * self.n_cols as usize + c.col as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell {
            row: (index / self.n_cols as usize) as u32,
            col: (index % self.n_cols as usize) as u32,
        }
    }

    /// Half-open cells; points on the box's far edges fall in the last row/column.
    pub fn assign_cell(&self, lat: f64, lon: f64) -> Result<Cell> {
        if !self.domain.bbox.contains(lat, lon) {
            return Err(Error::OutOfBox { lat, lon });
        }
        let (x, y) = self.domain.project(lat, lon);
        let idx = |v: f64, n: u32| ((v / self.delta_d + EDGE_EPS).floor().max(0.0) as u32).min(n - 1);
        Ok(Cell {
            row: idx(y, self.n_rows),
            col: idx(x, self.n_cols),
        })
    }

    /// Center-to-center distance in distance units.
    pub fn distance(&self, a: Cell, b: Cell) -> f64 {
        let dr = a.row as f64 - b.row as f64;
        let dc = a.col as f64 - b.col as f64;
        self.delta_d * dr.hypot(dc)
    }

    /// Center of a cell as (lat, lon).
    pub fn center(&self, c: Cell) -> (f64, f64) {
        self.domain.unproject(
            (c.col as f64 + 0.5) * self.delta_d,
            (c.row as f64 + 0.5) * self.delta_d,
        )
    }
}

/// Where a distance falls among the spatial scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialScale {
    SameCell,
    /// 1 is the coarsest (most distant), `n_scale` the finest.
    Scale(u32),
}

/// `n_scale + 1` log-equispaced distances from `d_min` to `d_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleBoundaries {
    pub n_scale: u32,
    pub d_min: f64,
    pub d_max: f64,
    pub boundaries: Vec<f64>,
}

impl ScaleBoundaries {
    pub fn new(n_scale: u32, d_min: f64, d_max: f64) -> Result<Self> {
        if n_scale < 1 {
            return Err(Error::Config("n_scale must be at least 1".into()));
        }
        if !(d_min > 0.0 && d_max >= d_min && d_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < d_min <= d_max, got {d_min}, {d_max}"
            )));
        }
        let ratio = d_max / d_min;
        let mut boundaries: Vec<f64> = (0..=n_scale)
            .map(|k| d_min * ratio.powf(k as f64 / n_scale as f64))
            .collect();
        boundaries[0] = d_min;
        boundaries[n_scale as usize] = d_max;
        Ok(Self {
            n_scale,
            d_min,
            d_max,
            boundaries,
        })
    }

    /// Boundaries from the minimum and maximum center distance over distinct
    /// occupied cells. `None` when fewer than two distinct cells are occupied.
    pub fn from_occupied(grid: &Grid, cells: &[Cell], n_scale: u32, exec: Exec) -> Result<Option<Self>> {
        let mut cells = cells.to_vec();
        cells.sort_unstable();
        cells.dedup();
        if cells.len() < 2 {
            return Ok(None);
        }
        let extremes = exec.map_range(cells.len(), |i| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &other in &cells[i + 1..] {
                let d = grid.distance(cells[i], other);
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        });
        let (d_min, d_max) = extremes
            .into_iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)));
        Self::new(n_scale, d_min, d_max).map(Some)
    }

    /// Bin `k` (counting from the nearest) is `(b[k-1], b[k]]` and maps to scale
    /// `n_scale + 1 - k`. Distances at or below `d_min` are the finest scale,
    /// distances above `d_max` the coarsest.
    pub fn spatial_scale_of(&self, d: f64) -> Result<SpatialScale> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::InvalidArgument(format!("negative distance {d}")));
        }
        if d == 0.0 {
            return Ok(SpatialScale::SameCell);
        }
        let n = self.n_scale as usize;
        let k = self.boundaries[1..]
            .iter()
            .position(|&b| d <= b)
            .map(|p| p + 1)
            .unwrap_or(n);
        Ok(SpatialScale::Scale((n + 1 - k) as u32))
    }
}

/// Temporal scale paired with a spatial scale: `n_scale + 1 - s`.
pub fn temporal_scale_for(n_scale: u32, spatial: u32) -> Result<u32> {
    if spatial < 1 || spatial > n_scale {
        return Err(Error::InvalidArgument(format!(
            "spatial scale {spatial} outside 1..={n_scale}"
        )));
    }
    Ok(n_scale + 1 - spatial)
}

/// `ceil(min(log2 l_d, log2 l_t))`.
pub fn nscale_upper_bound(l_d: u32, l_t: u32) -> u32 {
    let m = (l_d.max(1) as f64).log2().min((l_t.max(1) as f64).log2());
    m.ceil() as u32
}
