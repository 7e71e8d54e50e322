//! The `MN x R_s^2` weighting matrix that maps a vectorized patch to ring
//! averages `I_L(sigma_m r_n)`.
//!
//! Row `(m, n)` is stored at index `n * M + m`, matching the column-stacking
//! of the `M x N` ring-average matrix. Every row is a convex combination of
//! complete pixel rings (pixels sharing the same squared distance from the
//! center), so a row's entries are circularly symmetric and proportional to
//! the Gaussian `exp(-rho^2 / 2 sigma_m^2)` within each ring.
//!
//! Rings are assigned to rows by matching cumulative masses: the rings
//! inside the `r_N sigma_m` support, sorted by radius, carry their share of
//! the sampled Gaussian mass, the radial bands carry `F(r_n) / sum F`, and
//! row `(m, n)` receives the part of each ring whose cumulative-mass interval
//! overlaps band `n`. Each row is renormalized to sum to one. As a result
//! `sum_n F(r_n) W[(m, n), l] / sum F` reproduces the truncated, normalized
//! sampled Gaussian of scale `sigma_m` at every pixel `l`, while row `(m, n)`
//! stays concentrated on the rings nearest radius `sigma_m r_n`.
//!
//! Storage is factored as ring membership plus per-row ring weights; dense
//! rows are materialized on demand.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DVector;

use super::grid::{required_patch_side, RadialGrid, SigmaGrid};
use super::patch::in_support;
use crate::error::{Error, Result};

/// Default cap on the nominal dense size `M * N * R_s^2`.
pub const DEFAULT_ENTRY_CAP: u64 = 100_000_000;

const DUMP_MAGIC: &[u8; 8] = b"DFLW1\0\0\0";
const DUMP_HEADER_LEN: usize = 48;

/// Pixels of a patch at one squared distance from its center.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub rho2: u32,
    /// Displacements `(dx, dy)` from the center.
    pub offsets: Vec<(i32, i32)>,
    /// Column-stacked indices of the same pixels.
    pub columns: Vec<u32>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    sigma_grid: SigmaGrid,
    radial_grid: RadialGrid,
    patch_side: usize,
    rings: Vec<Ring>,
    row_ptr: Vec<usize>,
    row_rings: Vec<u32>,
    row_weights: Vec<f64>,
    row_scale: Vec<f64>,
}

fn rings_for_side(side: usize) -> Vec<Ring> {
    let h = (side / 2) as i32;
    let mut by_rho2: BTreeMap<u32, Ring> = BTreeMap::new();
    for dx in -h..=h {
        for dy in -h..=h {
            let rho2 = (dx * dx + dy * dy) as u32;
            if rho2 > (h * h) as u32 {
                continue;
            }
            let col = (dx + h) as u32;
            let row = (dy + h) as u32;
            let ring = by_rho2.entry(rho2).or_insert_with(|| Ring {
                rho2,
                offsets: Vec::new(),
                columns: Vec::new(),
            });
            ring.offsets.push((dx, dy));
            ring.columns.push(col * side as u32 + row);
        }
    }
    by_rho2.into_values().collect()
}

/// Cumulative distribution with the final entry pinned to exactly one.
fn cumulative(masses: impl Iterator<Item = f64>, total: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for m in masses {
        acc += m / total;
        out.push(acc);
    }
    let last = out.len() - 1;
    out[last] = 1.0;
    out
}

impl WeightMatrix {
    pub fn build(sigma_grid: &SigmaGrid, radial_grid: &RadialGrid) -> Result<Self> {
        Self::build_with_cap(sigma_grid, radial_grid, DEFAULT_ENTRY_CAP)
    }

    pub fn build_with_cap(
        sigma_grid: &SigmaGrid,
        radial_grid: &RadialGrid,
        cap: u64,
    ) -> Result<Self> {
        let side = required_patch_side(sigma_grid, radial_grid);
        let (m_count, n_count) = (sigma_grid.len(), radial_grid.len());
        let entries = (m_count * n_count) as u64 * (side * side) as u64;
        if entries > cap {
            return Err(Error::MemoryExceeded { entries, cap });
        }

        let rings = rings_for_side(side);
        let r_max = radial_grid.upper_bound();
        let f: Vec<f64> = super::grid::QuadratureVector::new(radial_grid)
            .values()
            .to_vec();
        let f_total: f64 = f.iter().sum();
        let band_cdf = cumulative(f.iter().copied(), f_total);

        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m_count * n_count];
        let mut row_scale = vec![0.0; m_count * n_count];

        for (m, &sigma) in sigma_grid.sigmas().iter().enumerate() {
            let inv = 1.0 / (2.0 * sigma * sigma);
            let active = rings
                .iter()
                .take_while(|r| in_support(r.rho2 as f64, sigma, r_max))
                .count();
            let masses: Vec<f64> = rings[..active]
                .iter()
                .map(|r| r.len() as f64 * (-(r.rho2 as f64) * inv).exp())
                .collect();
            let total: f64 = masses.iter().sum();
            let ring_cdf = cumulative(masses.iter().copied(), total);

            let mut first = 0;
            for n in 0..n_count {
                let (lo, hi) = (band_cdf[n], band_cdf[n + 1]);
                while first + 1 < active && ring_cdf[first + 1] <= lo {
                    first += 1;
                }
                let r = n * m_count + m;
                let mut captured = 0.0;
                let mut g = first;
                while g < active && ring_cdf[g] < hi {
                    let overlap = hi.min(ring_cdf[g + 1]) - lo.max(ring_cdf[g]);
                    if overlap > 0.0 {
                        rows[r].push((g as u32, overlap / rings[g].len() as f64));
                        captured += overlap;
                    }
                    g += 1;
                }
                debug_assert!(captured > 0.0, "band {n} captured no ring mass");
                for (_, w) in rows[r].iter_mut() {
                    *w /= captured;
                }
                row_scale[r] = 1.0 / captured;
            }
        }

        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut row_rings = Vec::new();
        let mut row_weights = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (g, w) in row {
                row_rings.push(g);
                row_weights.push(w);
            }
            row_ptr.push(row_rings.len());
        }

        Ok(Self {
            sigma_grid: sigma_grid.clone(),
            radial_grid: radial_grid.clone(),
            patch_side: side,
            rings,
            row_ptr,
            row_rings,
            row_weights,
            row_scale,
        })
    }

    pub fn sigma_grid(&self) -> &SigmaGrid {
        &self.sigma_grid
    }

    pub fn radial_grid(&self) -> &RadialGrid {
        &self.radial_grid
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    #[inline]
    pub fn row_index(&self, m: usize, n: usize) -> usize {
        n * self.sigma_grid.len() + m
    }

    /// Scale that brought row `r` to unit sum (reciprocal of the ring mass it captured).
    pub fn row_scale(&self, r: usize) -> f64 {
        self.row_scale[r]
    }

    /// `(ring index, per-pixel weight)` pairs of row `r`.
    pub fn row_rings(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.row_rings[span.clone()]
            .iter()
            .zip(&self.row_weights[span])
            .map(|(&g, &w)| (g as usize, w))
    }

    /// Nonzero `(column, weight)` entries of row `r`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_rings(r)
            .flat_map(move |(g, w)| self.rings[g].columns.iter().map(move |&l| (l as usize, w)))
    }

    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.cols()];
        for (l, w) in self.row_entries(r) {
            row[l] = w;
        }
        row
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row_rings(r)
            .map(|(g, w)| w * self.rings[g].len() as f64)
            .sum()
    }

    /// Stored nonzeros when expanded to pixels.
    pub fn nnz(&self) -> usize {
        (0..self.rows()).map(|r| self.row_entries(r).count()).sum()
    }

    /// Number of leading rings referenced by any row.
    pub fn active_rings(&self) -> usize {
        self.row_rings
            .iter()
            .map(|&g| g as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// `W v` for a column-stacked patch vector `v`.
    pub fn multiply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.cols() {
            return Err(Error::shape(self.cols(), v.len()));
        }
        let sums: Vec<f64> = self.rings[..self.active_rings()]
            .iter()
            .map(|ring| ring.columns.iter().map(|&l| v[l as usize]).sum())
            .collect();
        Ok(DVector::from_fn(self.rows(), |r, _| {
            self.row_rings(r).map(|(g, w)| w * sums[g]).sum()
        }))
    }

    /// Writes the binary cache format: a 48-byte little-endian header
    /// (`"DFLW1"` padded to 8 bytes, `M`, `N`, `R_s` as u64, `sigma_1`,
    /// `sigma_M` as f64) followed by the dense matrix as row-major f32.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(self.sigma_grid.len() as u64).to_le_bytes())?;
        out.write_all(&(self.radial_grid.len() as u64).to_le_bytes())?;
        out.write_all(&(self.patch_side as u64).to_le_bytes())?;
        out.write_all(&self.sigma_grid.min().to_le_bytes())?;
        out.write_all(&self.sigma_grid.max().to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.cols() * 4);
        for r in 0..self.rows() {
            buf.clear();
            for w in self.dense_row(r) {
                buf.extend_from_slice(&(w as f32).to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads the format written by [`WeightMatrix::write_dump`]. The radial
    /// grid is assumed to use the default upper bound. Rows are restored in
    /// ring form and renormalized in double precision.
    pub fn read_dump<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        input.read_exact(&mut header)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(Error::Format("not a weight-matrix dump".into()));
        }
        let u = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        let f = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        let (m_count, n_count, side) = (u(8) as usize, u(16) as usize, u(24) as usize);
        let sigma_grid = SigmaGrid::new(m_count, f(32), f(40))?;
        let radial_grid = RadialGrid::new(n_count)?;
        if required_patch_side(&sigma_grid, &radial_grid) != side {
            return Err(Error::Format(format!(
                "patch side {side} inconsistent with the grids in the header"
            )));
        }
        let rings = rings_for_side(side);
        let cols = side * side;
        let mut raw = vec![0u8; cols * 4];
        let mut row_ptr = vec![0];
        let mut row_rings = Vec::new();
        let mut row_weights = Vec::new();
        let mut row_scale = Vec::with_capacity(m_count * n_count);
        for _ in 0..m_count * n_count {
            input.read_exact(&mut raw)?;
            let dense: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let start = row_weights.len();
            let mut total = 0.0;
            for (g, ring) in rings.iter().enumerate() {
                let w = dense[ring.columns[0] as usize];
                if ring.columns.iter().any(|&l| dense[l as usize] != w) {
                    return Err(Error::Format(format!(
                        "row entries are not constant on ring rho^2 = {}",
                        ring.rho2
                    )));
                }
                if w != 0.0 {
                    row_rings.push(g as u32);
                    row_weights.push(w);
                    total += w * ring.len() as f64;
                }
            }
            if total <= 0.0 {
                return Err(Error::Format("empty weight-matrix row".into()));
            }
            row_weights[start..].iter_mut().for_each(|w| *w /= total);
            row_scale.push(1.0 / total);
            row_ptr.push(row_rings.len());
        }
        Ok(Self {
            sigma_grid,
            radial_grid,
            patch_side: side,
            rings,
            row_ptr,
            row_rings,
            row_weights,
            row_scale,
        })
    }
}
