//! Causal neighborhoods.
//!
//! The neighborhood of a pixel site is the `N` strictly preceding sites
//! (raster order) closest in L1 distance. Equal distances are ordered by the
//! raster position of the neighbor, so growing `N` only ever appends.

use alloc::vec::Vec;

/// Spatial offsets `(d_row, d_col)` of a causal neighborhood, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborOffsets {
    offsets: Vec<(isize, isize)>,
}

impl NeighborOffsets {
    pub fn as_slice(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, (isize, isize)> {
        self.offsets.iter()
    }
}

/// The `n` nearest causal offsets.
///
/// Offsets at L1 radius `d` are enumerated row by row from the top
/// (`d_row = -d`) down to the current row, left to right within a row, which
/// is exactly raster order of the absolute positions.
pub fn build_offsets(n: usize) -> NeighborOffsets {
    let mut offsets = Vec::with_capacity(n);
    let mut radius: isize = 1;
    while offsets.len() < n {
        for dr in -radius..=0 {
            let rest = radius - dr.abs();
            if dr == 0 {
                offsets.push((0, -radius));
            } else if rest == 0 {
                offsets.push((dr, 0));
            } else {
                offsets.push((dr, -rest));
                offsets.push((dr, rest));
            }
        }
        radius += 1;
    }
    offsets.truncate(n);
    NeighborOffsets { offsets }
}

/// Manhattan distance between two coordinates.
#[inline]
pub fn manhattan(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

#[inline]
pub(crate) fn offset_site(
    height: usize,
    width: usize,
    site: (usize, usize),
    offset: (isize, isize),
) -> Option<usize> {
    let r = site.0 as isize + offset.0;
    let c = site.1 as isize + offset.1;
    (r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width)
        .then(|| r as usize * width + c as usize)
}

/// Values of `plane` at `site + offset` for each offset, `pad` where the
/// neighbor falls outside the image.
pub fn gather_neighborhood(
    plane: &crate::Plane,
    site: (usize, usize),
    offsets: &NeighborOffsets,
    pad: f64,
) -> Vec<f64> {
    assert!(site.0 < plane.height && site.1 < plane.width, "site out of bounds");
    offsets
        .iter()
        .map(|&o| match offset_site(plane.height, plane.width, site, o) {
            Some(idx) => plane.data[idx],
            None => pad,
        })
        .collect()
}
