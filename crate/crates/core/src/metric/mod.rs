//! Image distances under one interface.
//!
//! [`MetricId::distance`] turns every metric into a dissimilarity where
//! smaller means closer: LASI and MSE as is, `-PSNR`, `1 - SSIM` and
//! `1 - MS-SSIM`. All of them are strictly decreasing functions of the
//! underlying similarity, so 2-AFC decisions are unaffected.

pub(crate) mod ssim;

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::image::{Dims, ImageTensor};
use crate::math::{log10, sqrt};
use crate::sum;
use crate::wls::{embed_raw, LasiConfig};

pub use ssim::{ms_ssim_scale_count, MS_SSIM_WEIGHTS, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricId {
    Lasi(LasiConfig),
    Mse,
    Psnr,
    Ssim,
    MsSsim,
}

impl MetricId {
    /// Parses the command-line name of a metric; LASI takes `cfg`.
    pub fn from_name(name: &str, cfg: LasiConfig) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lasi" => Some(Self::Lasi(cfg)),
            "mse" | "l2" => Some(Self::Mse),
            "psnr" => Some(Self::Psnr),
            "ssim" => Some(Self::Ssim),
            "msssim" | "ms-ssim" | "ms_ssim" => Some(Self::MsSsim),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lasi(_) => "lasi",
            Self::Mse => "mse",
            Self::Psnr => "psnr",
            Self::Ssim => "ssim",
            Self::MsSsim => "msssim",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Lasi(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }

    /// Dissimilarity between two images; smaller is closer.
    pub fn distance(&self, x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
        x.dims().ensure_same(&y.dims())?;
        self.distance_raw(x.dims(), x.data(), y.data())
    }

    pub(crate) fn distance_raw(&self, dims: Dims, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Self::Lasi(cfg) => lasi_raw(dims, x, y, cfg),
            Self::Mse => Ok(mse_raw(x, y)),
            Self::Psnr => Ok(-psnr_from_mse(mse_raw(x, y))),
            Self::Ssim => Ok(1.0 - ssim::ssim_raw(dims, x, y)?),
            Self::MsSsim => Ok(1.0 - ssim::ms_ssim_raw(dims, x, y)?),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lasi(cfg) => write!(f, "lasi(n={}, omega={})", cfg.n, cfg.omega),
            other => f.write_str(other.name()),
        }
    }
}

/// Mean Euclidean distance between the embedding columns of `x` and `y`.
pub fn lasi_distance(x: &ImageTensor, y: &ImageTensor, cfg: &LasiConfig) -> Result<f64> {
    x.dims().ensure_same(&y.dims())?;
    lasi_raw(x.dims(), x.data(), y.data(), cfg)
}

pub(crate) fn lasi_raw(dims: Dims, x: &[f64], y: &[f64], cfg: &LasiConfig) -> Result<f64> {
    let ex = embed_raw(dims, x, cfg)?;
    let ey = embed_raw(dims, y, cfg)?;
    let norms: Vec<f64> = (0..ex.columns())
        .map(|i| {
            sqrt(sum::neumaier(
                ex.column(i).iter().zip(ey.column(i)).map(|(a, b)| (a - b) * (a - b)),
            ))
        })
        .collect();
    Ok(sum::mean(norms).unwrap_or(0.0))
}

pub fn mse(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    x.dims().ensure_same(&y.dims())?;
    Ok(mse_raw(x.data(), y.data()))
}

pub(crate) fn mse_raw(x: &[f64], y: &[f64]) -> f64 {
    sum::mean(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b))).unwrap_or(0.0)
}

/// Peak signal-to-noise ratio in dB for unit peak; `+inf` for identical
/// images.
pub fn psnr(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?))
}

pub(crate) fn psnr_from_mse(m: f64) -> f64 {
    if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * log10(m)
    }
}

/// Mean SSIM over valid 11x11 Gaussian windows, averaged over channels.
pub fn ssim(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    x.dims().ensure_same(&y.dims())?;
    ssim::ssim_raw(x.dims(), x.data(), y.data())
}

/// Multi-scale SSIM; the number of scales shrinks for small images and the
/// scale weights are renormalized over the scales used.
pub fn ms_ssim(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    x.dims().ensure_same(&y.dims())?;
    ssim::ms_ssim_raw(x.dims(), x.data(), y.data())
}

pub(crate) fn ensure_dims(dims: Dims, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != dims.len() || y.len() != dims.len() {
        return Err(Error::InvalidImage(alloc::format!(
            "buffers of length {} and {} do not match {dims}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, c, |r, col, ch| {
            0.5 + 0.4 * libm::sin(0.37 * r as f64 + 0.21 * col as f64 + ch as f64)
        })
    }

    #[test]
    fn mse_and_psnr_examples() {
        let black = ImageTensor::filled(4, 4, 1, 0.0).unwrap();
        let white = ImageTensor::filled(4, 4, 1, 1.0).unwrap();
        assert_eq!(mse(&black, &black).unwrap(), 0.0);
        assert_eq!(mse(&black, &white).unwrap(), 1.0);
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
        assert_eq!(psnr(&white, &white).unwrap(), f64::INFINITY);
        let x = ImageTensor::from_fn(5, 5, 1, |r, c, _| (r + c) as f64 / 20.0);
        let y = ImageTensor::from_fn(5, 5, 1, |r, c, _| (r + c) as f64 / 20.0 + 0.1);
        assert!((mse(&x, &y).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = ImageTensor::filled(4, 4, 1, 0.0).unwrap();
        let b = ImageTensor::filled(4, 5, 1, 0.0).unwrap();
        assert!(matches!(mse(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            lasi_distance(&a, &b, &LasiConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lasi_identity_and_symmetry() {
        let x = ramp(9, 8, 3);
        let y = ImageTensor::from_fn(9, 8, 3, |r, c, ch| x.get(r, c, ch) * 0.9 + 0.03);
        let cfg = LasiConfig::with_n(5);
        assert_eq!(lasi_distance(&x, &x, &cfg).unwrap(), 0.0);
        let dxy = lasi_distance(&x, &y, &cfg).unwrap();
        assert!(dxy > 0.0);
        assert_eq!(dxy, lasi_distance(&y, &x, &cfg).unwrap());
    }

    #[test]
    fn metric_names_round_trip() {
        for name in ["lasi", "mse", "psnr", "ssim", "msssim"] {
            let m = MetricId::from_name(name, LasiConfig::default()).unwrap();
            assert_eq!(m.name(), name);
        }
        assert!(MetricId::from_name("lpips", LasiConfig::default()).is_none());
    }

    #[test]
    fn every_distance_is_zero_or_minimal_on_identical_inputs() {
        let x = ramp(24, 24, 1);
        let y = ImageTensor::from_fn(24, 24, 1, |r, c, _| 1.0 - x.get(r, c, 0));
        for m in [
            MetricId::Lasi(LasiConfig::with_n(4)),
            MetricId::Mse,
            MetricId::Ssim,
            MetricId::MsSsim,
        ] {
            let same = m.distance(&x, &x).unwrap();
            assert_eq!(same, 0.0, "{m}");
            let diff = m.distance(&x, &y).unwrap();
            assert!(diff > 0.0, "{m}");
            assert_eq!(diff, m.distance(&y, &x).unwrap(), "{m}");
        }
        assert_eq!(MetricId::Psnr.distance(&x, &x).unwrap(), f64::NEG_INFINITY);
    }
}
