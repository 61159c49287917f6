//! Gradients of every metric with respect to either input, and a central
//! finite-difference checker.
//!
//! The LASI gradient is a hand-written adjoint of the three-pass solver:
//!
//! * the distance back-propagates `(w_i(y) - w_i(x)) / (k |w_i(x) - w_i(y)|)`
//!   to each embedding column, and zero where the two columns coincide;
//! * `w = Abar^+ bbar` back-propagates through the derivative of the
//!   pseudo-inverse at constant rank,
//!   `dA^+ = -A^+ dA A^+ + A^+ A^+ dA (I - A A^+) + (I - A^+ A) dA A^+ A^+`;
//! * the weighted sums transpose into anti-causal sums, which reuse the
//!   separable scan on the reversed raster order;
//! * the rank-one records chain into the neighborhood features and targets,
//!   which are scattered back onto the pixels they were read from.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Dims, ImageTensor, PixelMap};
use crate::linalg::{mat_vec, SymPinv};
use crate::math::{abs, ln, sqrt};
use crate::metric::{mse_raw, ssim, MetricId};
use crate::neighborhood::build_offsets;
use crate::par;
use crate::wls::{anticausal_decay_sum, embed_raw, fit_raw, Groups, LasiConfig};

/// Which argument of `d(x, y)` to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    First,
    Second,
}

/// Analytic gradient of `metric.distance(x, y)` with respect to one argument.
pub fn grad_metric(metric: &MetricId, x: &ImageTensor, y: &ImageTensor, wrt: Wrt) -> Result<PixelMap> {
    x.dims().ensure_same(&y.dims())?;
    let data = grad_raw(metric, x.dims(), x.data(), y.data(), wrt)?;
    Ok(PixelMap { dims: x.dims(), data })
}

pub(crate) fn grad_raw(metric: &MetricId, dims: Dims, x: &[f64], y: &[f64], wrt: Wrt) -> Result<Vec<f64>> {
    metric.validate()?;
    crate::metric::ensure_dims(dims, x, y)?;
    // Every metric is symmetric, so the first-argument gradient is the
    // second-argument gradient with the inputs swapped.
    let (x, y) = match wrt {
        Wrt::Second => (x, y),
        Wrt::First => (y, x),
    };
    let g = match metric {
        MetricId::Lasi(cfg) => lasi_grad(dims, x, y, cfg)?,
        MetricId::Mse => mse_grad(x, y),
        MetricId::Psnr => {
            let m = mse_raw(x, y);
            if m == 0.0 {
                return Err(Error::NonFinite("PSNR gradient at identical images"));
            }
            let scale = 10.0 / (ln(10.0) * m);
            mse_grad(x, y).into_iter().map(|v| v * scale).collect()
        }
        MetricId::Ssim => ssim::ssim_grad_raw(dims, x, y)?.into_iter().map(|v| -v).collect(),
        MetricId::MsSsim => ssim::ms_ssim_grad_raw(dims, x, y)?.into_iter().map(|v| -v).collect(),
    };
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFinite("gradient"))
    }
}

fn mse_grad(x: &[f64], y: &[f64]) -> Vec<f64> {
    let k = x.len() as f64;
    x.iter().zip(y).map(|(a, b)| 2.0 * (b - a) / k).collect()
}

/// Gradient of the LASI distance with respect to `y`.
fn lasi_grad(dims: Dims, x: &[f64], y: &[f64], cfg: &LasiConfig) -> Result<Vec<f64>> {
    let ex = embed_raw(dims, x, cfg)?;
    let (ey, fits) = fit_raw(dims, y, cfg)?;
    let cols = ey.columns();
    let d = ey.dim();
    let inv_k = 1.0 / cols as f64;

    // Upstream gradient on every embedding column.
    let mut upstream = vec![0.0; cols * d];
    for i in 0..cols {
        let (a, b) = (ey.column(i), ex.column(i));
        let norm = sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum());
        if norm > 0.0 {
            for t in 0..d {
                upstream[i * d + t] = (a[t] - b[t]) * inv_k / norm;
            }
        }
    }

    let offsets = build_offsets(cfg.n);
    let groups = Groups::new(dims, y, cfg.channel_mode);
    let mut out = vec![0.0; dims.len()];
    for (g, fit) in fits.iter().enumerate() {
        let design = groups.design(dims, g, &offsets, cfg.pad);
        let stride = design.stride();
        let chans = &groups.groups[g];
        let column = |site: usize| ey.column_of(site, chans[0]);

        // Adjoints of Abar and bbar at every site.
        let site_adj: Vec<Result<Vec<f64>>> = par::map_range(design.sites(), |site| {
            let mut adj = vec![0.0; stride];
            let gw = &upstream[column(site) * d..(column(site) + 1) * d];
            if gw.iter().all(|v| *v == 0.0) {
                return Ok(adj);
            }
            let rec = &fit.records[site * stride..(site + 1) * stride];
            let (a, b) = (&rec[..d * d], &rec[d * d..d * d + d]);
            let w = &fit.weights[site * d..(site + 1) * d];
            let pinv = SymPinv::new(a, d, cfg.pinv_rcond)
                .map_err(|_| Error::SolveFailed { pixel: column(site) })?;
            let u = pinv.apply(gw);
            let aw = mat_vec(a, w);
            let resid: Vec<f64> = b.iter().zip(&aw).map(|(p, q)| p - q).collect();
            let pu = pinv.apply(&u);
            let null_g = pinv.null_component(gw);
            let pw = pinv.apply(w);
            for i in 0..d {
                for j in 0..d {
                    adj[i * d + j] = -u[i] * w[j] + pu[i] * resid[j] + null_g[i] * pw[j];
                }
            }
            adj[d * d..d * d + d].copy_from_slice(&u);
            Ok(adj)
        });
        let mut flat = Vec::with_capacity(design.sites() * stride);
        for a in site_adj {
            flat.extend(a?);
        }
        // Adjoints of the per-site rank-one records.
        let rec_adj = anticausal_decay_sum(dims.height, dims.width, stride, &flat, cfg.omega);

        let m = design.planes.len() as f64;
        let mut n = vec![0.0; d];
        let mut sources = vec![None; d];
        for site in 0..design.sites() {
            let adj = &rec_adj[site * stride..(site + 1) * stride];
            let (ga, gb) = (&adj[..d * d], &adj[d * d..d * d + d]);
            if ga.iter().chain(gb).all(|v| *v == 0.0) {
                continue;
            }
            design.features(site, &mut n);
            design.feature_sources(site, &mut sources);
            let tsum: f64 = design.planes.iter().map(|p| p[site]).sum();
            // b = tsum * n, so each target of the site receives <gb, n>.
            let t_adj = crate::math::dot(gb, &n);
            for &ch in chans {
                out[site * dims.channels + ch] += t_adj;
            }
            // A = m n n^T, so n receives m (G + G^T) n + tsum * gb.
            for p in 0..d {
                let Some((src, q)) = sources[p] else { continue };
                let mut acc = tsum * gb[p];
                for r in 0..d {
                    acc += m * (ga[p * d + r] + ga[r * d + p]) * n[r];
                }
                out[src * dims.channels + chans[q]] += acc;
            }
        }
    }
    Ok(out)
}

/// Analytic gradient next to central finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub analytic: PixelMap,
    pub fd: PixelMap,
    /// Largest `|analytic - fd| / |fd|` over coordinates with `|fd| > 1e-6`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

/// Threshold on `|fd|` below which a coordinate is left out of the relative
/// error.
pub const FD_REL_FLOOR: f64 = 1e-6;

/// Compares [`grad_metric`] with central differences of step `step`.
/// Perturbed images are not clamped to `[0, 1]`.
pub fn fd_check(metric: &MetricId, x: &ImageTensor, y: &ImageTensor, wrt: Wrt, step: f64) -> Result<GradientReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("finite-difference step {step} must be positive")));
    }
    x.dims().ensure_same(&y.dims())?;
    let dims = x.dims();
    let analytic = grad_raw(metric, dims, x.data(), y.data(), wrt)?;
    let base = match wrt {
        Wrt::First => x.data(),
        Wrt::Second => y.data(),
    };
    let eval = |v: &[f64]| -> Result<f64> {
        match wrt {
            Wrt::First => metric.distance_raw(dims, v, y.data()),
            Wrt::Second => metric.distance_raw(dims, x.data(), v),
        }
    };
    let fd: Vec<Result<f64>> = par::map_range(dims.len(), |i| {
        let mut v = base.to_vec();
        v[i] = base[i] + step;
        let plus = eval(&v)?;
        v[i] = base[i] - step;
        let minus = eval(&v)?;
        Ok((plus - minus) / (2.0 * step))
    });
    let fd: Vec<f64> = fd.into_iter().collect::<Result<_>>()?;
    let mut max_rel_err = 0.0f64;
    let mut max_abs_err = 0.0f64;
    for (a, f) in analytic.iter().zip(&fd) {
        let e = abs(a - f);
        max_abs_err = max_abs_err.max(e);
        if abs(*f) > FD_REL_FLOOR {
            max_rel_err = max_rel_err.max(e / abs(*f));
        }
    }
    Ok(GradientReport {
        analytic: PixelMap { dims, data: analytic },
        fd: PixelMap { dims, data: fd },
        max_rel_err,
        max_abs_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wls::ChannelMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
        ImageTensor::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(0.05..0.95)).collect())
            .unwrap()
    }

    #[test]
    fn mse_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_image(4, 4, 1, &mut rng);
        let y = random_image(4, 4, 1, &mut rng);
        let g = grad_metric(&MetricId::Mse, &x, &y, Wrt::Second).unwrap();
        for i in 0..16 {
            assert_eq!(g.data[i], 2.0 * (y.data()[i] - x.data()[i]) / 16.0);
        }
        let r = fd_check(&MetricId::Mse, &x, &y, Wrt::Second, 1e-4).unwrap();
        assert!(r.max_rel_err <= 1e-7, "{}", r.max_rel_err);
    }

    #[test]
    fn lasi_gradient_at_identical_inputs_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_image(5, 5, 1, &mut rng);
        let m = MetricId::Lasi(LasiConfig::with_n(3));
        for wrt in [Wrt::First, Wrt::Second] {
            let g = grad_metric(&m, &x, &x, wrt).unwrap();
            assert!(g.data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn lasi_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let x = random_image(6, 6, 1, &mut rng);
            let y = random_image(6, 6, 1, &mut rng);
            let m = MetricId::Lasi(LasiConfig::with_n(3));
            let r = fd_check(&m, &x, &y, Wrt::Second, 1e-4).unwrap();
            assert!(r.max_rel_err <= 1e-3, "rel {} abs {}", r.max_rel_err, r.max_abs_err);
        }
    }

    #[test]
    fn lasi_gradient_in_color_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_image(5, 4, 3, &mut rng);
        let y = random_image(5, 4, 3, &mut rng);
        for mode in [ChannelMode::PerChannel, ChannelMode::Joint] {
            let m = MetricId::Lasi(LasiConfig { n: 2, channel_mode: mode, ..LasiConfig::default() });
            let r = fd_check(&m, &x, &y, Wrt::First, 1e-4).unwrap();
            assert!(r.max_rel_err <= 1e-3, "{mode:?}: {}", r.max_rel_err);
        }
    }

    #[test]
    fn ssim_family_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_image(24, 23, 1, &mut rng);
        let y = ImageTensor::from_fn(24, 23, 1, |r, c, _| {
            x.get(r, c, 0) * 0.8 + 0.1 + 0.05 * libm::sin(r as f64 + c as f64)
        });
        for m in [MetricId::Ssim, MetricId::MsSsim, MetricId::Psnr] {
            let r = fd_check(&m, &x, &y, Wrt::Second, 1e-5).unwrap();
            assert!(r.max_rel_err <= 1e-4, "{m}: {}", r.max_rel_err);
        }
    }

    #[test]
    fn first_argument_gradient_is_swapped_second() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_image(12, 12, 1, &mut rng);
        let y = random_image(12, 12, 1, &mut rng);
        for m in [MetricId::Lasi(LasiConfig::with_n(4)), MetricId::Mse, MetricId::Ssim] {
            let a = grad_metric(&m, &x, &y, Wrt::First).unwrap();
            let b = grad_metric(&m, &y, &x, Wrt::Second).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let x = ImageTensor::filled(3, 3, 1, 0.5).unwrap();
        assert!(matches!(
            fd_check(&MetricId::Mse, &x, &x, Wrt::Second, 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }
}
