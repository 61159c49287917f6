//! Reference implementations written straight from the definitions, shared
//! by the integration tests.
#![allow(dead_code)]

use lasi_core::ImageTensor;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageTensor {
    let data = (0..h * w * c).map(|_| rng.random::<f64>()).collect();
    ImageTensor::new(h, w, c, data).unwrap()
}

/// Values drawn from `[lo, hi]`.
pub fn random_image_in(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, lo: f64, hi: f64) -> ImageTensor {
    let data = (0..h * w * c).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
    ImageTensor::new(h, w, c, data).unwrap()
}

pub fn plane_of(img: &ImageTensor, ch: usize) -> Vec<f64> {
    img.data().iter().skip(ch).step_by(img.channels()).copied().collect()
}

/// The `n` nearest strictly earlier positions: every causal offset of a
/// window wide enough to hold them, sorted by L1 norm and then by the
/// raster position of the neighbor.
pub fn oracle_offsets(n: usize) -> Vec<(isize, isize)> {
    let r = n as isize;
    let mut all = Vec::new();
    for dr in -r..=0 {
        for dc in -r..=r {
            if dr < 0 || dc < 0 {
                all.push((dr, dc));
            }
        }
    }
    all.sort_by_key(|&(dr, dc)| (dr.abs() + dc.abs(), dr, dc));
    all.truncate(n);
    all
}

fn neighborhood(plane: &[f64], h: usize, w: usize, r: usize, c: usize, offsets: &[(isize, isize)], pad: f64) -> Vec<f64> {
    offsets
        .iter()
        .map(|&(dr, dc)| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                plane[rr as usize * w + cc as usize]
            } else {
                pad
            }
        })
        .collect()
}

/// Minimum-norm weighted least squares solution of every pixel, from the
/// explicit design matrix with rows `sqrt(omega^l) n_j` and targets
/// `sqrt(omega^l) x_j`, solved by SVD. Singular values below
/// `sqrt(rcond) * sigma_max` are dropped, matching a cutoff of `rcond` on
/// the normal matrix.
pub fn design_matrix_solve(plane: &[f64], h: usize, w: usize, n: usize, omega: f64, pad: f64, rcond: f64) -> Vec<Vec<f64>> {
    let offsets = oracle_offsets(n);
    let feats: Vec<Vec<f64>> = (0..h * w).map(|j| neighborhood(plane, h, w, j / w, j % w, &offsets, pad)).collect();
    (0..h * w)
        .map(|i| {
            if i == 0 {
                return vec![0.0; n];
            }
            let (ri, ci) = (i / w, i % w);
            let mut x = DMatrix::<f64>::zeros(i, n);
            let mut y = DVector::<f64>::zeros(i);
            for j in 0..i {
                let (rj, cj) = (j / w, j % w);
                let l = ri.abs_diff(rj) + ci.abs_diff(cj);
                let s = omega.powi(l as i32).sqrt();
                for k in 0..n {
                    x[(j, k)] = s * feats[j][k];
                }
                y[j] = s * plane[j];
            }
            let svd = x.svd(true, true);
            let smax = svd.singular_values.max();
            if smax == 0.0 {
                return vec![0.0; n];
            }
            let sol = svd.solve(&y, rcond.sqrt() * smax).unwrap();
            sol.iter().copied().collect()
        })
        .collect()
}

/// Attained objective `sum_{j<i} omega^l (n_j . w - x_j)^2` of `w` at pixel `i`.
pub fn wls_objective(plane: &[f64], h: usize, w: usize, n: usize, omega: f64, pad: f64, i: usize, wv: &[f64]) -> f64 {
    let offsets = oracle_offsets(n);
    let (ri, ci) = (i / w, i % w);
    (0..i)
        .map(|j| {
            let (rj, cj) = (j / w, j % w);
            let nb = neighborhood(plane, h, w, rj, cj, &offsets, pad);
            let e: f64 = nb.iter().zip(wv).map(|(a, b)| a * b).sum::<f64>() - plane[j];
            omega.powi((ri.abs_diff(rj) + ci.abs_diff(cj)) as i32) * e * e
        })
        .sum()
}

/// Mean average precision computed prefix by prefix: each prefix sum is
/// recomputed from scratch over the ranked list.
pub fn jnd_prefix_oracle(pairs: &[(f64, f64)]) -> f64 {
    let mut ranked: Vec<(f64, usize, f64)> = pairs.iter().enumerate().map(|(i, &(d, p))| (d, i, p)).collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let prefix = |t: usize| -> f64 {
        let mut s = 0.0;
        for e in &ranked[..t] {
            s += e.2;
        }
        s
    };
    let total = prefix(ranked.len());
    let mut map = 0.0;
    for t in 1..=ranked.len() {
        let precision = prefix(t) / t as f64;
        let recall = prefix(t) / total;
        let prev = prefix(t - 1) / total;
        map += (recall - prev) * precision;
    }
    map
}
