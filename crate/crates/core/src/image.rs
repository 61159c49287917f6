//! Image containers and the canonical raster ordering.
//!
//! Values are stored row-major over `(row, col)` with the channel index
//! fastest within a pixel site, so the flat index of `(r, c, ch)` is
//! `(r * width + c) * channels + ch`. Everything downstream that talks about
//! "previous pixels" means smaller flat index under this layout.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels }
    }

    /// Number of pixel sites, `H * W`.
    pub const fn sites(&self) -> usize {
        self.height * self.width
    }

    /// Number of scalar values, `H * W * C`.
    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    /// Inverse of [`Dims::index`].
    #[inline]
    pub const fn coords(&self, index: usize) -> (usize, usize, usize) {
        let ch = index % self.channels;
        let site = index / self.channels;
        (site / self.width, site % self.width, ch)
    }

    pub(crate) fn ensure_same(&self, other: &Dims) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { left: *self, right: *other })
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// A normalized image: `H * W * C` values in `[0, 1]`, `C` in `{1, 3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    dims: Dims,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(height, width, channels);
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!("empty image {dims}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "unsupported channel count {channels} (expected 1 or 3)"
            )));
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {dims}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage(format!(
                "value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self { dims, data })
    }

    /// Builds an image from a per-coordinate function; values are clamped
    /// into `[0, 1]`.
    ///
    /// # Panics
    ///
    /// If the dimensions are not a valid image shape.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let dims = Dims::new(height, width, channels);
        let data = (0..dims.len())
            .map(|i| {
                let (r, c, ch) = dims.coords(i);
                f(r, c, ch).clamp(0.0, 1.0)
            })
            .collect();
        Self::new(height, width, channels, data).expect("invalid image shape")
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, alloc::vec![value; height * width * channels])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn channels(&self) -> usize {
        self.dims.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.dims.index(row, col, ch)]
    }

    /// Copies channel `ch` out as a single plane.
    pub fn plane(&self, ch: usize) -> Plane {
        plane_of(self.dims, &self.data, ch)
    }

    pub fn as_map(&self) -> PixelMap {
        PixelMap { dims: self.dims, data: self.data.clone() }
    }
}

/// An unconstrained raster tensor: predictions, residual maps, gradients.
///
/// Shares the layout of [`ImageTensor`] but imposes no range on the values.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMap {
    pub dims: Dims,
    pub data: Vec<f64>,
}

impl PixelMap {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: alloc::vec![0.0; dims.len()] }
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.dims.index(row, col, ch)]
    }

    pub fn plane(&self, ch: usize) -> Plane {
        plane_of(self.dims, &self.data, ch)
    }

    /// Clamps into `[0, 1]` to obtain a storable image.
    pub fn to_image_clamped(&self) -> Result<ImageTensor> {
        ImageTensor::new(
            self.dims.height,
            self.dims.width,
            self.dims.channels,
            self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
    }
}

/// One channel of an image, `H * W` values in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width, "plane data length");
        Self { height, width, data }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

fn plane_of(dims: Dims, data: &[f64], ch: usize) -> Plane {
    assert!(ch < dims.channels, "channel {ch} out of range");
    Plane::new(
        dims.height,
        dims.width,
        data.iter().skip(ch).step_by(dims.channels).copied().collect(),
    )
}

/// Interleaves planes back into raster order.
pub(crate) fn interleave(dims: Dims, planes: &[Vec<f64>]) -> Vec<f64> {
    debug_assert_eq!(planes.len(), dims.channels);
    let mut out = alloc::vec![0.0; dims.len()];
    for (ch, p) in planes.iter().enumerate() {
        for (site, v) in p.iter().enumerate() {
            out[site * dims.channels + ch] = *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_index_is_a_bijection() {
        let dims = Dims::new(4, 5, 3);
        let mut seen = alloc::vec![false; dims.len()];
        for r in 0..4 {
            for c in 0..5 {
                for ch in 0..3 {
                    let i = dims.index(r, c, ch);
                    assert_eq!(i, (r * 5 + c) * 3 + ch);
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(dims.coords(i), (r, c, ch));
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn rejects_bad_tensors() {
        assert!(ImageTensor::new(2, 2, 1, alloc::vec![0.0; 3]).is_err());
        assert!(ImageTensor::new(1, 1, 2, alloc::vec![0.0; 2]).is_err());
        assert!(ImageTensor::new(1, 1, 1, alloc::vec![1.5]).is_err());
        assert!(ImageTensor::new(1, 1, 1, alloc::vec![f64::NAN]).is_err());
        assert!(ImageTensor::new(0, 3, 1, alloc::vec![]).is_err());
        assert!(ImageTensor::new(1, 1, 1, alloc::vec![1.0]).is_ok());
    }

    #[test]
    fn plane_extraction_round_trips() {
        let img = ImageTensor::from_fn(3, 2, 3, |r, c, ch| (r * 6 + c * 3 + ch) as f64 / 20.0);
        let planes: Vec<Vec<f64>> = (0..3).map(|ch| img.plane(ch).data).collect();
        assert_eq!(interleave(img.dims(), &planes), img.data());
        assert_eq!(img.plane(1).get(2, 1), img.get(2, 1, 1));
    }
}
