//! On-disk cache of weight matrices.
//!
//! A framework obtained here always comes from the single-precision dump,
//! whether the dump was just written or found on disk, so repeated runs see
//! the same matrix.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::kernel::{required_patch_side, Framework, RadialGrid, SigmaGrid, WeightMatrix};

pub const CACHE_ENV: &str = "DEFOCUS_CACHE_DIR";

/// Directory named by `DEFOCUS_CACHE_DIR`, or a folder in the system temp dir.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("defocus-cache"))
}

/// Hex digest of `(M, N, sigma_1, sigma_M, R_s)`.
pub fn cache_key(sigma_grid: &SigmaGrid, radial_grid: &RadialGrid) -> String {
    let mut h = Sha256::new();
    h.update((sigma_grid.len() as u64).to_le_bytes());
    h.update((radial_grid.len() as u64).to_le_bytes());
    h.update(sigma_grid.min().to_le_bytes());
    h.update(sigma_grid.max().to_le_bytes());
    h.update((required_patch_side(sigma_grid, radial_grid) as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, sigma_grid: &SigmaGrid, radial_grid: &RadialGrid) -> PathBuf {
    dir.join(format!(
        "w-{}.dflw",
        &cache_key(sigma_grid, radial_grid)[..16]
    ))
}

/// Where the framework came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    /// Built and stored.
    Stored,
    /// Built, but the cache could not be written.
    Unwritable,
}

/// Loads the matrix for the given grids from `dir`, building and storing it
/// when absent or unreadable.
pub fn cached_framework(
    dir: &Path,
    sigma_grid: &SigmaGrid,
    radial_grid: &RadialGrid,
) -> Result<(Framework, CacheStatus)> {
    let path = cache_path(dir, sigma_grid, radial_grid);
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(w) = WeightMatrix::read_dump(bytes.as_slice()) {
            if w.sigma_grid() == sigma_grid && w.radial_grid() == radial_grid {
                return Ok((Framework::from_weights(w), CacheStatus::Hit));
            }
        }
    }
    let mut bytes = Vec::new();
    WeightMatrix::build(sigma_grid, radial_grid)?.write_dump(&mut bytes)?;
    let status = match fs::create_dir_all(dir).and_then(|_| write_atomic(&path, &bytes)) {
        Ok(()) => CacheStatus::Stored,
        Err(_) => CacheStatus::Unwritable,
    };
    let w = WeightMatrix::read_dump(bytes.as_slice())?;
    Ok((Framework::from_weights(w), status))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
