//! File formats, dataset manifests and reports around [`lasi_core`].
//!
//! Images are binary PGM/PPM with maxval 255 ([`pnm`]), evaluation datasets
//! are CSV manifests ([`manifest`]), and embeddings are dumped in a small
//! binary format ([`embedding`]).

pub mod embedding;
pub mod manifest;
pub mod pnm;
pub mod report;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use manifest::{load_manifest, DatasetManifest, ManifestError, ManifestKind};
pub use pnm::{load_image, save_image, PnmError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: PnmError },
    #[error("{}: {source}", path.display())]
    Manifest { path: PathBuf, source: ManifestError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lasi_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 1 for I/O, 2 for invalid input, 3 for numerical
    /// failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 1,
            Self::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

/// Decimal rendering used for every printed number: at least nine
/// significant digits and at least nine digits after the point.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Adding +0 turns -0 into +0.
    let v = v + 0.0;
    let decimals = if v == 0.0 { 9 } else { (8 - v.abs().log10().floor() as i64).clamp(9, 340) as usize };
    format!("{v:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_keep_nine_significant_digits() {
        assert_eq!(format_value(0.0), "0.000000000");
        assert_eq!(format_value(1.0), "1.000000000");
        assert_eq!(format_value(0.6), "0.600000000");
        assert_eq!(format_value(0.000123456789123), "0.000123456789");
        assert_eq!(format_value(-42.5), "-42.500000000");
        assert_eq!(format_value(f64::INFINITY), "inf");
        assert_eq!(format_value(-0.0), "0.000000000");
    }

    #[test]
    fn exit_codes_follow_the_error_class() {
        let io = CliError::io(Path::new("x"), io::Error::other("boom"));
        assert_eq!(io.exit_code(), 1);
        assert_eq!(CliError::Usage("bad".into()).exit_code(), 2);
        assert_eq!(CliError::Core(lasi_core::Error::EmptyDataset).exit_code(), 2);
        assert_eq!(CliError::Core(lasi_core::Error::SolveFailed { pixel: 3 }).exit_code(), 3);
    }
}
