//! SSIM and MS-SSIM with gradients.
//!
//! Statistics come from an 11x11 Gaussian window (sigma 1.5, normalized)
//! evaluated only where the window fits inside the image. MS-SSIM follows
//! the usual product form `prod_j cs_j^w_j * ssim_M^w_M` over dyadic 2x2
//! mean-pooled scales, with negative factors clamped to zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Dims;
use crate::math::{exp, pow};
use crate::sum;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = exp(-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable valid-mode Gaussian filter: `h x w` in, `(h-10) x (w-10)` out.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..SSIM_WINDOW).map(|t| k[t] * src[r * w + c + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|t| k[t] * tmp[(r + t) * ow + c]).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters an `(h-10) x (w-10)` map back onto
/// `h x w`.
fn filter_valid_adjoint(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..oh {
        for c in 0..ow {
            let v = src[r * ow + c];
            for t in 0..SSIM_WINDOW {
                tmp[(r + t) * ow + c] += k[t] * v;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..ow {
            let v = tmp[r * ow + c];
            for t in 0..SSIM_WINDOW {
                out[r * w + c + t] += k[t] * v;
            }
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of one plane, with their
/// gradients with respect to `y` when requested.
struct PlaneScore {
    ssim: f64,
    cs: f64,
    grad: Option<(Vec<f64>, Vec<f64>)>,
}

fn score_plane(x: &[f64], y: &[f64], h: usize, w: usize, want_grad: bool) -> PlaneScore {
    let k = kernel();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let exx = filter_valid(&xx, h, w, &k);
    let eyy = filter_valid(&yy, h, w, &k);
    let exy = filter_valid(&xy, h, w, &k);
    let p = mx.len();
    let inv_p = 1.0 / p as f64;

    let mut ssim_map = vec![0.0; p];
    let mut cs_map = vec![0.0; p];
    // Partials of the ssim map (s_*) and cs map (c_*) with respect to the
    // local statistics of y: mean, E[xy], E[y^2].
    let mut partials = if want_grad { vec![[0.0f64; 6]; p] } else { Vec::new() };
    for i in 0..p {
        let (ux, uy) = (mx[i], my[i]);
        let vx = exx[i] - ux * ux;
        let vy = eyy[i] - uy * uy;
        let cxy = exy[i] - ux * uy;
        let a1 = 2.0 * ux * uy + SSIM_C1;
        let a2 = 2.0 * cxy + SSIM_C2;
        let b1 = ux * ux + uy * uy + SSIM_C1;
        let b2 = vx + vy + SSIM_C2;
        let s = (a1 * a2) / (b1 * b2);
        let cs = a2 / b2;
        ssim_map[i] = s;
        cs_map[i] = cs;
        if want_grad {
            let den = b1 * b2;
            // d/d(mu_y): a1' = 2ux, a2' = -2ux, b1' = 2uy, b2' = -2uy.
            let dnum_mu = 2.0 * ux * a2 - 2.0 * ux * a1;
            let dden_mu = 2.0 * uy * b2 - 2.0 * uy * b1;
            let s_mu = (dnum_mu - s * dden_mu) / den;
            let s_xy = 2.0 * a1 / den;
            let s_yy = -s * b1 / den;
            let c_mu = (-2.0 * ux + cs * 2.0 * uy) / b2;
            let c_xy = 2.0 / b2;
            let c_yy = -cs / b2;
            partials[i] = [s_mu, s_xy, s_yy, c_mu, c_xy, c_yy];
        }
    }
    let ssim = sum::neumaier(ssim_map.iter().copied()) / p as f64;
    let cs = sum::neumaier(cs_map.iter().copied()) / p as f64;
    let grad = want_grad.then(|| {
        let back = |o: usize| -> Vec<f64> {
            let g = |t: usize| -> Vec<f64> {
                let m: Vec<f64> = partials.iter().map(|q| q[o + t] * inv_p).collect();
                filter_valid_adjoint(&m, h, w, &k)
            };
            let (gmu, gxy, gyy) = (g(0), g(1), g(2));
            (0..h * w).map(|q| gmu[q] + x[q] * gxy[q] + 2.0 * y[q] * gyy[q]).collect()
        };
        (back(0), back(3))
    });
    PlaneScore { ssim, cs, grad }
}

fn check_window(dims: Dims) -> Result<()> {
    if dims.height < SSIM_WINDOW || dims.width < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { dims, window: SSIM_WINDOW });
    }
    Ok(())
}

fn planes(dims: Dims, data: &[f64]) -> Vec<Vec<f64>> {
    (0..dims.channels)
        .map(|ch| data.iter().skip(ch).step_by(dims.channels).copied().collect())
        .collect()
}

pub(crate) fn ssim_raw(dims: Dims, x: &[f64], y: &[f64]) -> Result<f64> {
    super::ensure_dims(dims, x, y)?;
    check_window(dims)?;
    let (px, py) = (planes(dims, x), planes(dims, y));
    let per: Vec<f64> = (0..dims.channels)
        .map(|c| score_plane(&px[c], &py[c], dims.height, dims.width, false).ssim)
        .collect();
    Ok(sum::mean(per).unwrap_or(0.0))
}

/// Gradient of [`ssim_raw`] with respect to `y`.
pub(crate) fn ssim_grad_raw(dims: Dims, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    super::ensure_dims(dims, x, y)?;
    check_window(dims)?;
    let (px, py) = (planes(dims, x), planes(dims, y));
    let scale = 1.0 / dims.channels as f64;
    let grads: Vec<Vec<f64>> = (0..dims.channels)
        .map(|c| {
            let g = score_plane(&px[c], &py[c], dims.height, dims.width, true).grad.unwrap().0;
            g.into_iter().map(|v| v * scale).collect()
        })
        .collect();
    Ok(crate::image::interleave(dims, &grads))
}

/// Number of dyadic scales (at most five) whose smaller side still holds
/// one window.
pub fn ms_ssim_scale_count(height: usize, width: usize) -> usize {
    let mut m = 0;
    let (mut h, mut w) = (height, width);
    while m < MS_SSIM_WEIGHTS.len() && h >= SSIM_WINDOW && w >= SSIM_WINDOW {
        m += 1;
        h /= 2;
        w /= 2;
    }
    m
}

fn pool2(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let i = 2 * r * w + 2 * c;
            out[r * ow + c] = 0.25 * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
        }
    }
    out
}

fn pool2_adjoint(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; h * w];
    for r in 0..oh {
        for c in 0..ow {
            let v = 0.25 * src[r * ow + c];
            let i = 2 * r * w + 2 * c;
            out[i] += v;
            out[i + 1] += v;
            out[i + w] += v;
            out[i + w + 1] += v;
        }
    }
    out
}

/// MS-SSIM of one plane and, optionally, its gradient with respect to `y`.
fn ms_plane(x: &[f64], y: &[f64], h: usize, w: usize, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let m = ms_ssim_scale_count(h, w);
    let total: f64 = MS_SSIM_WEIGHTS[..m].iter().sum();
    let weights: Vec<f64> = MS_SSIM_WEIGHTS[..m].iter().map(|v| v / total).collect();

    let mut factors = Vec::with_capacity(m);
    let mut grads = Vec::with_capacity(m);
    let mut shapes = Vec::with_capacity(m);
    let (mut cx, mut cy, mut ch, mut cw) = (x.to_vec(), y.to_vec(), h, w);
    for j in 0..m {
        let s = score_plane(&cx, &cy, ch, cw, want_grad);
        let last = j + 1 == m;
        factors.push(if last { s.ssim } else { s.cs });
        if let Some((gs, gc)) = s.grad {
            grads.push(if last { gs } else { gc });
        }
        shapes.push((ch, cw));
        if !last {
            cx = pool2(&cx, ch, cw);
            cy = pool2(&cy, ch, cw);
            ch /= 2;
            cw /= 2;
        }
    }
    let clamped: Vec<f64> = factors.iter().map(|f| f.max(0.0)).collect();
    let powered: Vec<f64> = clamped.iter().zip(&weights).map(|(f, e)| pow(*f, *e)).collect();
    let value: f64 = powered.iter().product();
    if !want_grad {
        return (value, None);
    }
    let mut total_grad: Option<Vec<f64>> = None;
    for j in (0..m).rev() {
        let coef = if clamped[j] > 0.0 {
            let others: f64 = (0..m).filter(|&t| t != j).map(|t| powered[t]).product();
            weights[j] * pow(clamped[j], weights[j] - 1.0) * others
        } else {
            0.0
        };
        // Bring the running sum from scale j+1 down to scale j, then add this scale.
        let (sh, sw) = shapes[j];
        let mut g: Vec<f64> = grads[j].iter().map(|v| v * coef).collect();
        if let Some(prev) = total_grad.take() {
            for (a, b) in g.iter_mut().zip(pool2_adjoint(&prev, sh, sw)) {
                *a += b;
            }
        }
        total_grad = Some(g);
    }
    (value, total_grad)
}

pub(crate) fn ms_ssim_raw(dims: Dims, x: &[f64], y: &[f64]) -> Result<f64> {
    super::ensure_dims(dims, x, y)?;
    check_window(dims)?;
    let (px, py) = (planes(dims, x), planes(dims, y));
    let per: Vec<f64> = (0..dims.channels)
        .map(|c| ms_plane(&px[c], &py[c], dims.height, dims.width, false).0)
        .collect();
    Ok(sum::mean(per).unwrap_or(0.0))
}

/// Gradient of [`ms_ssim_raw`] with respect to `y`.
pub(crate) fn ms_ssim_grad_raw(dims: Dims, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    super::ensure_dims(dims, x, y)?;
    check_window(dims)?;
    let (px, py) = (planes(dims, x), planes(dims, y));
    let scale = 1.0 / dims.channels as f64;
    let grads: Vec<Vec<f64>> = (0..dims.channels)
        .map(|c| {
            let g = ms_plane(&px[c], &py[c], dims.height, dims.width, true).1.unwrap();
            g.into_iter().map(|v| v * scale).collect()
        })
        .collect();
    Ok(crate::image::interleave(dims, &grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ms_ssim, ssim, ImageTensor};

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn filter_adjoint_identity() {
        let (h, w) = (14, 13);
        let k = kernel();
        let x: Vec<f64> = (0..h * w).map(|i| libm::sin(i as f64)).collect();
        let y: Vec<f64> = (0..4 * 3).map(|i| libm::cos(i as f64 * 0.7)).collect();
        let lhs: f64 = filter_valid(&x, h, w, &k).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(filter_valid_adjoint(&y, h, w, &k)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn identical_images_score_one() {
        let x = ImageTensor::from_fn(40, 37, 3, |r, c, ch| {
            0.5 + 0.45 * libm::sin(0.3 * r as f64 * (ch + 1) as f64 + 0.17 * c as f64)
        });
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
        assert_eq!(ms_ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn inverted_image_scores_low() {
        let x = ImageTensor::from_fn(32, 32, 1, |r, c, _| {
            0.5 + 0.25 * libm::sin(0.4 * r as f64) * libm::cos(0.3 * c as f64)
        });
        let inv = ImageTensor::from_fn(32, 32, 1, |r, c, _| 1.0 - x.get(r, c, 0));
        assert!(ssim(&x, &inv).unwrap() < 0.5);
    }

    #[test]
    fn too_small_images_are_rejected() {
        let x = ImageTensor::filled(10, 30, 1, 0.5).unwrap();
        assert!(matches!(ssim(&x, &x), Err(Error::ImageTooSmall { .. })));
        assert!(matches!(ms_ssim(&x, &x), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn scale_count_adapts() {
        assert_eq!(ms_ssim_scale_count(11, 11), 1);
        assert_eq!(ms_ssim_scale_count(64, 64), 3);
        assert_eq!(ms_ssim_scale_count(176, 176), 5);
        assert_eq!(ms_ssim_scale_count(512, 512), 5);
    }
}
