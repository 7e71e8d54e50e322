//! Candidate blurred intensities `M(sigma_m) = ivec(W vec(patch), M) F / sum F`.

use nalgebra::{DMatrix, DVector};

use super::grid::{QuadratureVector, RadialGrid, SigmaGrid};
use super::patch::Patch;
use super::weights::WeightMatrix;
use crate::error::{Error, Result};
use crate::image::{GrayImage, PaddedImage};

pub const DEFAULT_SIGMA_COUNT: usize = 50;
pub const DEFAULT_RADIAL_COUNT: usize = 100;
pub const DEFAULT_SIGMA_MIN: f64 = 0.1;
pub const DEFAULT_SIGMA_MAX: f64 = 5.0;

/// Column-stacking vectorization of a matrix.
pub fn vec_columns(mat: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(mat.as_slice())
}

/// Inverse of [`vec_columns`] for a matrix with `rows` rows.
pub fn ivec(v: &DVector<f64>, rows: usize) -> Result<DMatrix<f64>> {
    if rows == 0 || !v.len().is_multiple_of(rows) {
        return Err(Error::shape(format!("a multiple of {rows}"), v.len()));
    }
    Ok(DMatrix::from_column_slice(
        rows,
        v.len() / rows,
        v.as_slice(),
    ))
}

/// Blurred intensities of one pixel, one per candidate sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateVector(pub Vec<f64>);

impl CandidateVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Values clamped to `[0, 1]` for reporting; matching uses the raw values.
    pub fn clamped(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }
}

/// Matrix form of the candidate computation for a single patch.
pub fn forward_candidates(
    patch: &Patch,
    weights: &WeightMatrix,
    quadrature: &QuadratureVector,
) -> Result<CandidateVector> {
    if patch.side() != weights.patch_side() {
        return Err(Error::shape(
            format!("{0}x{0} patch", weights.patch_side()),
            format!("{0}x{0}", patch.side()),
        ));
    }
    if quadrature.len() != weights.radial_grid().len() {
        return Err(Error::shape(weights.radial_grid().len(), quadrature.len()));
    }
    let y = weights.multiply(&patch.vec_columns())?;
    let ring_means = ivec(&y, weights.sigma_grid().len())?;
    let f = DVector::from_column_slice(quadrature.values());
    let out = ring_means * f / quadrature.sum();
    Ok(CandidateVector(out.as_slice().to_vec()))
}

/// Grids, quadrature weights and weighting matrix bundled for repeated use.
#[derive(Debug, Clone)]
pub struct Framework {
    quadrature: QuadratureVector,
    weights: WeightMatrix,
}

impl Framework {
    pub fn new(m: usize, n: usize, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        Self::from_grids(
            &SigmaGrid::new(m, sigma_min, sigma_max)?,
            &RadialGrid::new(n)?,
        )
    }

    pub fn from_grids(sigma_grid: &SigmaGrid, radial_grid: &RadialGrid) -> Result<Self> {
        Ok(Self::from_weights(WeightMatrix::build(
            sigma_grid,
            radial_grid,
        )?))
    }

    /// Wraps an existing matrix, for instance one loaded from a cache.
    pub fn from_weights(weights: WeightMatrix) -> Self {
        Self {
            quadrature: QuadratureVector::new(weights.radial_grid()),
            weights,
        }
    }

    pub fn sigma_grid(&self) -> &SigmaGrid {
        self.weights.sigma_grid()
    }

    pub fn radial_grid(&self) -> &RadialGrid {
        self.weights.radial_grid()
    }

    pub fn quadrature(&self) -> &QuadratureVector {
        &self.quadrature
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn patch_side(&self) -> usize {
        self.weights.patch_side()
    }

    pub fn candidates(&self, patch: &Patch) -> Result<CandidateVector> {
        forward_candidates(patch, &self.weights, &self.quadrature)
    }

    /// Prepares image-wide evaluation on a replicate-padded copy of `img`.
    pub fn engine(&self, img: &GrayImage) -> CandidateEngine<'_> {
        CandidateEngine::new(self, img)
    }
}

impl Default for Framework {
    fn default() -> Self {
        Self::new(
            DEFAULT_SIGMA_COUNT,
            DEFAULT_RADIAL_COUNT,
            DEFAULT_SIGMA_MIN,
            DEFAULT_SIGMA_MAX,
        )
        .expect("default grids are valid")
    }
}

/// Evaluates candidate vectors at any pixel of one image without building
/// patches. Ring sums are read straight from the padded buffer and combined
/// with the stored per-row ring weights and the quadrature vector.
pub struct CandidateEngine<'a> {
    framework: &'a Framework,
    padded: PaddedImage,
    ring_offsets: Vec<Vec<isize>>,
    /// `F_n / sum F`
    band_weights: Vec<f64>,
}

impl<'a> CandidateEngine<'a> {
    pub fn new(framework: &'a Framework, img: &GrayImage) -> Self {
        let w = framework.weights();
        let padded = img.padded(w.patch_side() / 2);
        let ring_offsets = w.rings()[..w.active_rings()]
            .iter()
            .map(|ring| {
                // same pixel order as the column-stacked ring members
                ring.offsets
                    .iter()
                    .map(|&(dx, dy)| padded.offset(dx as isize, dy as isize))
                    .collect()
            })
            .collect();
        let q = framework.quadrature();
        let total = q.sum();
        let band_weights = q.values().iter().map(|f| f / total).collect();
        Self {
            framework,
            padded,
            ring_offsets,
            band_weights,
        }
    }

    pub fn framework(&self) -> &Framework {
        self.framework
    }

    pub fn sigma_count(&self) -> usize {
        self.framework.sigma_grid().len()
    }

    /// Scratch length needed by [`CandidateEngine::candidates_into`].
    pub fn scratch_len(&self) -> usize {
        self.ring_offsets.len()
    }

    /// Writes the `M` candidates of pixel `(x, y)` into `out`.
    pub fn candidates_into(&self, x: usize, y: usize, scratch: &mut [f64], out: &mut [f64]) {
        let data = self.padded.data();
        let base = self.padded.index_of(x, y) as isize;
        for (s, offs) in scratch.iter_mut().zip(&self.ring_offsets) {
            *s = offs.iter().map(|&o| data[(base + o) as usize]).sum();
        }
        let w = self.framework.weights();
        let m_count = out.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (n, &bw) in self.band_weights.iter().enumerate() {
            for (m, acc) in out.iter_mut().enumerate() {
                let ring_mean: f64 = w
                    .row_rings(n * m_count + m)
                    .map(|(g, wt)| wt * scratch[g])
                    .sum();
                *acc += bw * ring_mean;
            }
        }
    }

    pub fn candidates(&self, x: usize, y: usize) -> CandidateVector {
        let mut scratch = vec![0.0; self.scratch_len()];
        let mut out = vec![0.0; self.sigma_count()];
        self.candidates_into(x, y, &mut scratch, &mut out);
        CandidateVector(out)
    }
}
