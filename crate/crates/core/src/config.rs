use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{EstimateParams, DEFAULT_TIE_TOL, DEFAULT_WINDOW};
use crate::kernel::framework::{
    DEFAULT_RADIAL_COUNT, DEFAULT_SIGMA_COUNT, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN,
};
use crate::kernel::{RadialGrid, SigmaGrid};
use crate::sharpness::{PairParams, DEFAULT_EQ_TOL};

/// Every tunable of a run, recorded verbatim in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub tie_tol: f64,
    pub eq_tol: f64,
    /// Side of the disambiguation window.
    pub window: usize,
    pub decimation_factor: usize,
    /// Worker threads; 0 lets the runtime choose.
    pub worker_count: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_SIGMA_COUNT,
            n: DEFAULT_RADIAL_COUNT,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            tie_tol: DEFAULT_TIE_TOL,
            eq_tol: DEFAULT_EQ_TOL,
            window: DEFAULT_WINDOW,
            decimation_factor: 1,
            worker_count: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sigma_grid()?;
        self.radial_grid()?;
        if !(self.tie_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "tie_tol must be >= 0, got {}",
                self.tie_tol
            )));
        }
        if !(self.eq_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "eq_tol must be >= 0, got {}",
                self.eq_tol
            )));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.decimation_factor == 0 {
            return Err(Error::invalid("decimation factor must be >= 1"));
        }
        Ok(())
    }

    pub fn sigma_grid(&self) -> Result<SigmaGrid> {
        SigmaGrid::new(self.m, self.sigma_min, self.sigma_max)
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.n)
    }

    pub fn estimate_params(&self) -> EstimateParams {
        EstimateParams {
            tie_tol: self.tie_tol,
            window: self.window,
        }
    }

    pub fn pair_params(&self) -> PairParams {
        PairParams {
            eq_tol: self.eq_tol,
            estimate: self.estimate_params(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!((c.m, c.n), (50, 100));
        assert_eq!((c.sigma_min, c.sigma_max), (0.1, 5.0));
    }

    #[test]
    fn rejects_even_window() {
        let c = RunConfig {
            window: 4,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
