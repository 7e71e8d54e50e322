//! Sampling grids for the radial quadrature and the candidate blur scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper integration bound in units of sigma; the Gaussian tail past it is
/// below 4e-6 of the kernel mass.
pub const RADIAL_UPPER_BOUND: f64 = 5.0;

/// Midpoint abscissae `r_n = r_max (n - 1/2) / N` on `(0, r_max]`, in units of sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    points: Vec<f64>,
    upper: f64,
}

impl RadialGrid {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_upper_bound(n, RADIAL_UPPER_BOUND)
    }

    pub fn with_upper_bound(n: usize, upper: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("radial grid needs N >= 2, got {n}")));
        }
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::invalid(format!(
                "radial upper bound must be positive, got {upper}"
            )));
        }
        let h = upper / n as f64;
        let points = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        Ok(Self { points, upper })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The integration bound `r_N` (not the last abscissa, which sits half a step below it).
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn spacing(&self) -> f64 {
        self.upper / self.points.len() as f64
    }
}

/// Uniformly spaced candidate blur scales `sigma_1 < ... < sigma_M`, in pixel pitches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    sigmas: Vec<f64>,
}

impl SigmaGrid {
    pub fn new(m: usize, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!("sigma grid needs M >= 2, got {m}")));
        }
        if !(sigma_min.is_finite() && sigma_max.is_finite()) {
            return Err(Error::invalid("sigma bounds must be finite"));
        }
        if sigma_min <= 0.0 {
            return Err(Error::invalid(format!(
                "sigma_min must be positive, got {sigma_min}"
            )));
        }
        if sigma_max <= sigma_min {
            return Err(Error::invalid(format!(
                "sigma_max ({sigma_max}) must exceed sigma_min ({sigma_min})"
            )));
        }
        let step = (sigma_max - sigma_min) / (m - 1) as f64;
        let mut sigmas: Vec<f64> = (0..m).map(|i| sigma_min + i as f64 * step).collect();
        sigmas[m - 1] = sigma_max;
        Ok(Self { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn max(&self) -> f64 {
        self.sigmas[self.sigmas.len() - 1]
    }

    pub fn spacing(&self) -> f64 {
        (self.max() - self.min()) / (self.sigmas.len() - 1) as f64
    }

    /// Index of the grid value closest to `sigma` (ties go to the smaller index).
    pub fn nearest_index(&self, sigma: f64) -> usize {
        let t = ((sigma - self.min()) / self.spacing()).round();
        t.clamp(0.0, (self.sigmas.len() - 1) as f64) as usize
    }
}

/// Quadrature weights `F(r_n) = r_N r_n exp(-r_n^2 / 2) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVector {
    values: Vec<f64>,
}

impl QuadratureVector {
    pub fn new(grid: &RadialGrid) -> Self {
        let n = grid.len() as f64;
        let upper = grid.upper_bound();
        let values = grid
            .points()
            .iter()
            .map(|&r| upper * r * (-0.5 * r * r).exp() / n)
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Odd patch side that holds the largest sampling circle, `2 sigma_M r_N + 1`
/// rounded up to the next odd integer.
pub fn required_patch_side(sigma_grid: &SigmaGrid, radial_grid: &RadialGrid) -> usize {
    let reach = 2.0 * sigma_grid.max() * radial_grid.upper_bound();
    // Absorb representation error so that 2 * 5.000000000000001 * 5 still gives 51.
    let side = (reach - 1e-9).ceil().max(0.0) as usize + 1;
    if side.is_multiple_of(2) {
        side + 1
    } else {
        side
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radial_grid_default_spacing() {
        let g = RadialGrid::new(100).unwrap();
        assert_abs_diff_eq!(g.points()[0], 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(g.points()[99], 4.975, epsilon = 1e-12);
        assert!(*g.points().last().unwrap() <= 5.0);
        for w in g.points().windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
        // independent loop over the midpoint definition
        let mut r = 0.025;
        for &p in g.points() {
            assert_abs_diff_eq!(p, r, epsilon = 1e-12);
            r += 0.05;
        }
    }

    #[test]
    fn radial_grid_two_points() {
        let g = RadialGrid::new(2).unwrap();
        assert_eq!(g.points(), &[1.25, 3.75]);
    }

    #[test]
    fn radial_grid_rejects_single_point() {
        assert!(matches!(
            RadialGrid::new(1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            RadialGrid::new(0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sigma_grid_defaults() {
        let g = SigmaGrid::new(50, 0.1, 5.0).unwrap();
        assert_eq!(g.min(), 0.1);
        assert_eq!(g.max(), 5.0);
        assert_abs_diff_eq!(g.spacing(), 0.1, epsilon = 1e-15);
        for w in g.sigmas().windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
        assert_eq!(SigmaGrid::new(2, 1.0, 2.0).unwrap().sigmas(), &[1.0, 2.0]);
    }

    #[test]
    fn sigma_grid_rejects_bad_bounds() {
        assert!(SigmaGrid::new(11, 0.0, 1.0).is_err());
        assert!(SigmaGrid::new(11, 2.0, 1.0).is_err());
        assert!(SigmaGrid::new(1, 0.5, 1.0).is_err());
        assert!(SigmaGrid::new(5, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn nearest_index_rounds() {
        let g = SigmaGrid::new(50, 0.1, 5.0).unwrap();
        assert_eq!(g.nearest_index(1.53), 14);
        assert_eq!(g.nearest_index(0.0), 0);
        assert_eq!(g.nearest_index(9.0), 49);
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn step(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn quadrature_sum_matches_adaptive_integral() {
        let q = QuadratureVector::new(&RadialGrid::new(100).unwrap());
        let integral = adaptive_simpson(&|r| r * (-0.5 * r * r).exp(), 0.0, 5.0, 1e-13);
        assert_abs_diff_eq!(integral, 1.0 - (-12.5f64).exp(), epsilon = 1e-10);
        assert!((q.sum() - integral).abs() < 1e-3);
        assert!(q.sum() >= 0.95 && q.sum() <= 1.0 + 1e-3);
    }

    #[test]
    fn quadrature_entries_nonnegative_and_peak_near_one() {
        for n in [2, 7, 40, 100, 333] {
            let g = RadialGrid::new(n).unwrap();
            let q = QuadratureVector::new(&g);
            assert!(q.values().iter().all(|&v| v >= 0.0));
            let (imax, _) = q
                .values()
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
            assert!((g.points()[imax] - 1.0).abs() <= g.spacing());
        }
    }

    #[test]
    fn quadrature_single_entry() {
        let g = RadialGrid::new(100).unwrap();
        let q = QuadratureVector::new(&g);
        let n = g
            .points()
            .iter()
            .position(|&r| (r - 2.975).abs() < 1e-12)
            .unwrap();
        let expected = 5.0 * 2.975 * (-2.975f64 * 2.975 / 2.0).exp() / 100.0;
        assert_abs_diff_eq!(q.values()[n], expected, epsilon = 1e-15);
    }

    #[test]
    fn patch_side_examples() {
        let r5 = RadialGrid::new(100).unwrap();
        assert_eq!(
            required_patch_side(&SigmaGrid::new(50, 0.1, 5.0).unwrap(), &r5),
            51
        );
        assert_eq!(
            required_patch_side(&SigmaGrid::new(5, 0.1, 0.5).unwrap(), &r5),
            7
        );
        let r_half = RadialGrid::with_upper_bound(10, 0.5).unwrap();
        assert_eq!(
            required_patch_side(&SigmaGrid::new(5, 0.2, 1.0).unwrap(), &r_half),
            3
        );
    }
}
