//! Per-pixel weighted least squares embeddings.
//!
//! For pixel `i` the embedding `w_i` minimizes
//! `sum_{j<i} omega^l(i,j) (n_j . w - x_j)^2`, where `n_j` is the causal
//! neighborhood of pixel `j` and `l` the Manhattan distance between the two
//! sites. It is computed in three passes:
//!
//! 1. transform: `A_j = n_j n_j^T`, `b_j = x_j n_j` for every site;
//! 2. weigh-and-sum: `Abar_i = sum_{j<i} omega^l A_j` (likewise `bbar_i`);
//! 3. solve: `w_i = pinv(Abar_i) bbar_i`, the minimum-norm minimizer.
//!
//! Step 2 has a direct O(k^2) reference ([`accumulate_naive`]) and a
//! separable O(k) scan ([`accumulate_fast`]) that factors
//! `omega^(|dr|+|dc|) = omega^|dr| * omega^|dc|` into a horizontal pass per
//! row and a vertical recurrence carried down the columns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use core::ops::{Add, Mul};

use crate::dd::{two_prod, Dd};
use crate::error::{Error, Result};
use crate::image::{interleave, Dims, ImageTensor, PixelMap, Plane};
use crate::linalg::{sym_eigen, NotConverged, SymEigen, SymPinv};
use crate::math::{dot, powu};
use crate::neighborhood::{build_offsets, manhattan, offset_site, NeighborOffsets};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelMode {
    /// Each channel plane is embedded independently.
    #[default]
    PerChannel,
    /// One regression per site whose features gather every channel of the
    /// neighboring sites; each channel value of a site is a separate sample.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LasiConfig {
    /// Neighborhood size and embedding dimension (per channel group).
    pub n: usize,
    /// Decay of the sample weights with Manhattan distance, in `(0, 1]`.
    pub omega: f64,
    pub channel_mode: ChannelMode,
    /// Relative singular value cutoff of the pseudo-inverse.
    pub pinv_rcond: f64,
    /// Value used for neighbors outside the image.
    pub pad: f64,
}

impl Default for LasiConfig {
    fn default() -> Self {
        Self {
            n: 12,
            omega: 0.8,
            channel_mode: ChannelMode::PerChannel,
            pinv_rcond: 1e-10,
            pad: 0.5,
        }
    }
}

impl LasiConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("neighborhood size must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidConfig(format!("omega {} not in (0, 1]", self.omega)));
        }
        if !(self.pinv_rcond > 0.0 && self.pinv_rcond.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pinv_rcond {} must be positive",
                self.pinv_rcond
            )));
        }
        if !(0.0..=1.0).contains(&self.pad) {
            return Err(Error::InvalidConfig(format!("pad {} not in [0, 1]", self.pad)));
        }
        Ok(())
    }
}

/// `(n n^T, x n)`.
pub fn rank_one_transform(neigh: &[f64], value: f64) -> (Vec<f64>, Vec<f64>) {
    let d = neigh.len();
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = neigh[i] * neigh[j];
        }
    }
    (a, neigh.iter().map(|v| value * v).collect())
}

/// One regression problem over an `H x W` grid: the planes of a channel
/// group supply both the features (every plane at every offset) and the
/// targets (every plane at the site itself).
pub(crate) struct Design<'a> {
    pub height: usize,
    pub width: usize,
    pub planes: Vec<&'a [f64]>,
    pub offsets: &'a NeighborOffsets,
    pub pad: f64,
}

impl Design<'_> {
    pub fn sites(&self) -> usize {
        self.height * self.width
    }

    pub fn dim(&self) -> usize {
        self.offsets.len() * self.planes.len()
    }

    /// Per-site record length: `A` (`dim^2`), `b` (`dim`), `c` (1).
    pub fn stride(&self) -> usize {
        let d = self.dim();
        d * d + d + 1
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site / self.width, site % self.width)
    }

    /// Feature vector of `site`, offset-major with planes interleaved.
    pub fn features(&self, site: usize, out: &mut [f64]) {
        let p = self.planes.len();
        let rc = self.coords(site);
        for (k, &o) in self.offsets.iter().enumerate() {
            match offset_site(self.height, self.width, rc, o) {
                Some(idx) => {
                    for (q, plane) in self.planes.iter().enumerate() {
                        out[k * p + q] = plane[idx];
                    }
                }
                None => out[k * p..(k + 1) * p].fill(self.pad),
            }
        }
    }

    /// Flat image indices feeding each feature (`None` for padding).
    pub fn feature_sources(&self, site: usize, out: &mut [Option<(usize, usize)>]) {
        let p = self.planes.len();
        let rc = self.coords(site);
        for (k, &o) in self.offsets.iter().enumerate() {
            let src = offset_site(self.height, self.width, rc, o);
            for q in 0..p {
                out[k * p + q] = src.map(|s| (s, q));
            }
        }
    }

    /// Rank-one records `[A | b | c]` for every site, where the site's
    /// samples are its plane values: `A = m n n^T`, `b = (sum t) n`,
    /// `c = sum t^2`.
    #[cfg(test)]
    pub fn transform(&self) -> Vec<f64> {
        let d = self.dim();
        let stride = self.stride();
        let m = self.planes.len() as f64;
        let mut out = vec![0.0; self.sites() * stride];
        let mut n = vec![0.0; d];
        for site in 0..self.sites() {
            self.features(site, &mut n);
            let rec = &mut out[site * stride..(site + 1) * stride];
            let tsum: f64 = self.planes.iter().map(|p| p[site]).sum();
            let tsq: f64 = self.planes.iter().map(|p| p[site] * p[site]).sum();
            for i in 0..d {
                for j in 0..d {
                    rec[i * d + j] = m * (n[i] * n[j]);
                }
                rec[d * d + i] = tsum * n[i];
            }
            rec[d * d + d] = tsq;
        }
        out
    }

    /// [`Design::transform`] in double-double; products of features are
    /// exact.
    pub fn transform_dd(&self) -> Vec<Dd> {
        let d = self.dim();
        let stride = self.stride();
        let m = self.planes.len() as f64;
        let mut out = vec![Dd::default(); self.sites() * stride];
        let mut n = vec![0.0; d];
        for site in 0..self.sites() {
            self.features(site, &mut n);
            let rec = &mut out[site * stride..(site + 1) * stride];
            let mut tsum = Dd::default();
            let mut tsq = Dd::default();
            for p in &self.planes {
                tsum = tsum + Dd::from_f64(p[site]);
                tsq = tsq + two_prod(p[site], p[site]);
            }
            for i in 0..d {
                for j in 0..d {
                    rec[i * d + j] = two_prod(n[i], n[j]) * m;
                }
                rec[d * d + i] = tsum * n[i];
            }
            rec[d * d + d] = tsq;
        }
        out
    }
}

/// `out[i] = sum_{j<i} omega^l(i,j) data[j]` for records of length `stride`
/// laid out in raster order, by the separable scan.
pub(crate) fn causal_decay_sum<T>(height: usize, width: usize, stride: usize, data: &[T], omega: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    debug_assert_eq!(data.len(), height * width * stride);
    let row_len = width * stride;
    let zero = T::default();
    let mut out = vec![zero; data.len()];
    // Decayed mass of all rows above, as seen from each column of the current row.
    let mut vertical = vec![zero; row_len];
    let mut left = vec![zero; row_len];
    let mut right = vec![zero; row_len];
    for r in 0..height {
        let row = &data[r * row_len..(r + 1) * row_len];
        left[..stride].fill(zero);
        for c in 1..width {
            let (done, rest) = left.split_at_mut(c * stride);
            let prev = &done[(c - 1) * stride..];
            let src = &row[(c - 1) * stride..c * stride];
            for ((l, p), s) in rest[..stride].iter_mut().zip(prev).zip(src) {
                *l = (*p + *s) * omega;
            }
        }
        right[(width - 1) * stride..].fill(zero);
        for c in (0..width - 1).rev() {
            let (head, tail) = right.split_at_mut((c + 1) * stride);
            let src = &row[(c + 1) * stride..(c + 2) * stride];
            for ((rr, n), s) in head[c * stride..].iter_mut().zip(&tail[..stride]).zip(src) {
                *rr = (*n + *s) * omega;
            }
        }
        let dst = &mut out[r * row_len..(r + 1) * row_len];
        for (((o, v), l), (x, rr)) in dst
            .iter_mut()
            .zip(vertical.iter_mut())
            .zip(&left)
            .zip(row.iter().zip(&right))
        {
            *o = *v + *l;
            *v = (*v + *l + *x + *rr) * omega;
        }
    }
    out
}

/// Direct double loop over all earlier sites.
pub(crate) fn causal_decay_sum_naive<T>(height: usize, width: usize, stride: usize, data: &[T], omega: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let k = height * width;
    let mut out = vec![T::default(); data.len()];
    for i in 0..k {
        let pi = (i / width, i % width);
        for j in 0..i {
            let wgt = powu(omega, manhattan(pi, (j / width, j % width)));
            for t in 0..stride {
                out[i * stride + t] = out[i * stride + t] + data[j * stride + t] * wgt;
            }
        }
    }
    out
}

/// `out[j] = sum_{i>j} omega^l(i,j) data[i]`: the adjoint of
/// [`causal_decay_sum`]. Reversing raster order is a 180 degree rotation,
/// which preserves Manhattan distances.
pub(crate) fn anticausal_decay_sum(
    height: usize,
    width: usize,
    stride: usize,
    data: &[f64],
    omega: f64,
) -> Vec<f64> {
    let flip = |v: &[f64]| -> Vec<f64> { v.chunks_exact(stride).rev().flatten().copied().collect() };
    flip(&causal_decay_sum(height, width, stride, &flip(data), omega))
}

/// Weighted sums `Abar_i`, `bbar_i` of every site of one plane.
#[derive(Debug, Clone)]
pub struct AccumulatorState {
    height: usize,
    width: usize,
    dim: usize,
    records: Vec<f64>,
}

impl AccumulatorState {
    fn stride(&self) -> usize {
        self.dim * self.dim + self.dim + 1
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Abar` at raster site `site`, row-major `dim x dim`.
    pub fn a(&self, site: usize) -> &[f64] {
        let s = self.stride();
        &self.records[site * s..site * s + self.dim * self.dim]
    }

    pub fn b(&self, site: usize) -> &[f64] {
        let s = self.stride();
        let d2 = self.dim * self.dim;
        &self.records[site * s + d2..site * s + d2 + self.dim]
    }

    /// Weighted sum of squared targets; the constant term of the objective.
    pub fn c(&self, site: usize) -> f64 {
        let s = self.stride();
        self.records[(site + 1) * s - 1]
    }
}

fn plane_design<'a>(plane: &'a Plane, offsets: &'a NeighborOffsets, pad: f64) -> Design<'a> {
    Design { height: plane.height, width: plane.width, planes: vec![&plane.data], offsets, pad }
}

/// Reference weigh-and-sum by direct summation over all earlier pixels.
/// Quadratic in the pixel count; intended for testing.
pub fn accumulate_naive(plane: &Plane, cfg: &LasiConfig) -> AccumulatorState {
    let offsets = build_offsets(cfg.n);
    let design = plane_design(plane, &offsets, cfg.pad);
    let records = causal_decay_sum_naive(
        plane.height,
        plane.width,
        design.stride(),
        &design.transform_dd(),
        cfg.omega,
    );
    let records = records.iter().map(|v| v.hi).collect();
    AccumulatorState { height: plane.height, width: plane.width, dim: design.dim(), records }
}

/// Separable weigh-and-sum, linear in the pixel count.
pub fn accumulate_fast(plane: &Plane, cfg: &LasiConfig) -> AccumulatorState {
    let offsets = build_offsets(cfg.n);
    let design = plane_design(plane, &offsets, cfg.pad);
    let records =
        causal_decay_sum(plane.height, plane.width, design.stride(), &design.transform_dd(), cfg.omega);
    let records = records.iter().map(|v| v.hi).collect();
    AccumulatorState { height: plane.height, width: plane.width, dim: design.dim(), records }
}

/// The embedding matrix `W(x)`: one column per pixel (per site in joint
/// mode), stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dims: Dims,
    mode: ChannelMode,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn from_columns(dims: Dims, mode: ChannelMode, dim: usize, data: Vec<f64>) -> Self {
        let cols = match mode {
            ChannelMode::PerChannel => dims.len(),
            ChannelMode::Joint => dims.sites(),
        };
        assert_eq!(data.len(), cols * dim, "embedding data length");
        Self { dims, mode, dim, data }
    }

    pub fn image_dims(&self) -> Dims {
        self.dims
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    /// Embedding dimension (rows).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns: `H*W*C` per channel, `H*W` in joint mode.
    pub fn columns(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column holding the embedding of image value `(site, ch)`.
    pub fn column_of(&self, site: usize, ch: usize) -> usize {
        match self.mode {
            ChannelMode::PerChannel => site * self.dims.channels + ch,
            ChannelMode::Joint => site,
        }
    }
}

/// Channel groups solved together and their planes.
pub(crate) struct Groups {
    pub planes: Vec<Vec<f64>>,
    pub groups: Vec<Vec<usize>>,
}

impl Groups {
    pub fn new(dims: Dims, data: &[f64], mode: ChannelMode) -> Self {
        let planes: Vec<Vec<f64>> = (0..dims.channels)
            .map(|ch| data.iter().skip(ch).step_by(dims.channels).copied().collect())
            .collect();
        let groups = match mode {
            ChannelMode::PerChannel => (0..dims.channels).map(|c| vec![c]).collect(),
            ChannelMode::Joint => vec![(0..dims.channels).collect()],
        };
        Self { planes, groups }
    }

    pub fn design<'a>(
        &'a self,
        dims: Dims,
        group: usize,
        offsets: &'a NeighborOffsets,
        pad: f64,
    ) -> Design<'a> {
        Design {
            height: dims.height,
            width: dims.width,
            planes: self.groups[group].iter().map(|&c| self.planes[c].as_slice()).collect(),
            offsets,
            pad,
        }
    }
}

/// Rounds of iterative refinement after the pseudo-inverse solve.
const REFINE_STEPS: usize = 2;

/// Minimum-norm solution of `A w = b` for one double-double record
/// `[A | b | c]`.
///
/// The eigenbasis from the rounded matrix is tilted into the null space by
/// about `eps * l_max / l_min`, so it is refined once: `V^T A V` is formed
/// from the exact record and diagonalized again, which resolves the small
/// eigenpairs to high relative accuracy. The solve is then refined against
/// the exact residual.
fn solve_site(rec: &[Dd], d: usize, rcond: f64) -> core::result::Result<Vec<f64>, NotConverged> {
    let a: Vec<f64> = rec[..d * d].iter().map(|v| v.hi).collect();
    let first = sym_eigen(&a, d)?;
    let v = &first.vectors;
    // av = A V in double-double, then m = V^T (A V) rounded.
    let mut av = vec![Dd::default(); d * d];
    for i in 0..d {
        for k in 0..d {
            av[i * d + k] = (0..d).fold(Dd::default(), |acc, j| acc + rec[i * d + j] * v[j * d + k]);
        }
    }
    let mut m = vec![0.0; d * d];
    for k in 0..d {
        for l in k..d {
            let e = (0..d).fold(Dd::default(), |acc, i| acc + av[i * d + l] * v[i * d + k]).hi;
            m[k * d + l] = e;
            m[l * d + k] = e;
        }
    }
    let second = sym_eigen(&m, d)?;
    let mut vectors = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            vectors[i * d + k] = crate::math::dot(&v[i * d..(i + 1) * d], &column(&second.vectors, d, k));
        }
    }
    let pinv = SymPinv::from_eigen(SymEigen { n: d, values: second.values, vectors }, rcond);

    let b: Vec<f64> = rec[d * d..d * d + d].iter().map(|v| v.hi).collect();
    let mut w = pinv.apply(&b);
    for _ in 0..REFINE_STEPS {
        let r: Vec<f64> = (0..d)
            .map(|i| rec[i * d..(i + 1) * d].iter().zip(&w).fold(rec[d * d + i], |acc, (a, w)| acc - *a * *w).hi)
            .collect();
        for (w, dw) in w.iter_mut().zip(pinv.apply(&r)) {
            *w += dw;
        }
    }
    Ok(w)
}

fn column(m: &[f64], d: usize, k: usize) -> Vec<f64> {
    (0..d).map(|r| m[r * d + k]).collect()
}

/// Solved problem of one channel group, kept for prediction and gradients.
pub(crate) struct GroupFit {
    pub records: Vec<f64>,
    pub weights: Vec<f64>,
}

pub(crate) fn fit_group(design: &Design<'_>, cfg: &LasiConfig, first_column: impl Fn(usize) -> usize + Sync) -> Result<GroupFit> {
    let d = design.dim();
    let stride = design.stride();
    let exact = causal_decay_sum(design.height, design.width, stride, &design.transform_dd(), cfg.omega);
    let solved: Vec<Result<Vec<f64>>> = par::map_range(design.sites(), |site| {
        let rec = &exact[site * stride..(site + 1) * stride];
        let w = solve_site(rec, d, cfg.pinv_rcond).map_err(|_| Error::SolveFailed { pixel: first_column(site) })?;
        if w.iter().all(|v| v.is_finite()) {
            Ok(w)
        } else {
            Err(Error::NonFinite("embedding solve"))
        }
    });
    let records = exact.iter().map(|v| v.hi).collect();
    let mut weights = Vec::with_capacity(design.sites() * d);
    for w in solved {
        weights.extend(w?);
    }
    Ok(GroupFit { records, weights })
}

/// Embeddings of a raw raster buffer; values need not lie in `[0, 1]`.
pub(crate) fn embed_raw(dims: Dims, data: &[f64], cfg: &LasiConfig) -> Result<EmbeddingMatrix> {
    Ok(fit_raw(dims, data, cfg)?.0)
}

pub(crate) fn fit_raw(
    dims: Dims,
    data: &[f64],
    cfg: &LasiConfig,
) -> Result<(EmbeddingMatrix, Vec<GroupFit>)> {
    cfg.validate()?;
    let offsets = build_offsets(cfg.n);
    let groups = Groups::new(dims, data, cfg.channel_mode);
    let mut fits = Vec::with_capacity(groups.groups.len());
    for g in 0..groups.groups.len() {
        let design = groups.design(dims, g, &offsets, cfg.pad);
        let ch0 = groups.groups[g][0];
        let column = |site: usize| match cfg.channel_mode {
            ChannelMode::PerChannel => site * dims.channels + ch0,
            ChannelMode::Joint => site,
        };
        fits.push(fit_group(&design, cfg, column)?);
    }
    let d = cfg.n * groups.groups[0].len();
    let data = match cfg.channel_mode {
        ChannelMode::Joint => fits[0].weights.clone(),
        ChannelMode::PerChannel => {
            let mut out = vec![0.0; dims.len() * d];
            for (ch, fit) in fits.iter().enumerate() {
                for site in 0..dims.sites() {
                    let col = site * dims.channels + ch;
                    out[col * d..(col + 1) * d]
                        .copy_from_slice(&fit.weights[site * d..(site + 1) * d]);
                }
            }
            out
        }
    };
    Ok((EmbeddingMatrix::from_columns(dims, cfg.channel_mode, d, data), fits))
}

/// Solves the weighted least squares problem of every pixel.
pub fn solve_embeddings(img: &ImageTensor, cfg: &LasiConfig) -> Result<EmbeddingMatrix> {
    embed_raw(img.dims(), img.data(), cfg)
}

/// Output of [`predict`]; all maps share the image layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `xhat_i = w_i . n_i`.
    pub predicted: PixelMap,
    /// `z_i = (x_i - xhat_i)^2`.
    pub residual: PixelMap,
    /// Attained weighted objective `sum_{j<i} omega^l (n_j . w_i - x_j)^2`.
    /// In joint mode the objective belongs to the site and is repeated for
    /// each channel.
    pub train_loss: PixelMap,
}

impl Prediction {
    /// Mean squared residual over all values.
    pub fn mse(&self) -> f64 {
        crate::sum::mean(self.residual.data.iter().copied()).unwrap_or(0.0)
    }
}

/// Autoregressive predictions from precomputed embeddings.
pub fn predict(img: &ImageTensor, emb: &EmbeddingMatrix, cfg: &LasiConfig) -> Result<Prediction> {
    cfg.validate()?;
    let dims = img.dims();
    dims.ensure_same(&emb.image_dims())?;
    let offsets = build_offsets(cfg.n);
    let groups = Groups::new(dims, img.data(), cfg.channel_mode);
    let expected_dim = cfg.n * groups.groups[0].len();
    if emb.dim() != expected_dim || emb.mode() != cfg.channel_mode {
        return Err(Error::InvalidConfig(format!(
            "embedding of dimension {} does not match configuration (expected {expected_dim})",
            emb.dim()
        )));
    }
    let mut predicted = vec![Vec::new(); dims.channels];
    let mut loss = vec![Vec::new(); dims.channels];
    for g in 0..groups.groups.len() {
        let design = groups.design(dims, g, &offsets, cfg.pad);
        let d = design.dim();
        let stride = design.stride();
        let records =
            causal_decay_sum(dims.height, dims.width, stride, &design.transform_dd(), cfg.omega);
        let ch0 = groups.groups[g][0];
        let per_site: Vec<(f64, f64)> = par::map_range(dims.sites(), |site| {
            let w = emb.column(emb.column_of(site, ch0));
            let mut n = vec![0.0; d];
            design.features(site, &mut n);
            let rec = &records[site * stride..(site + 1) * stride];
            // c - 2 w.b + w.A.w, which cancels heavily for good fits.
            let mut obj = rec[d * d + d];
            for i in 0..d {
                obj = obj - rec[d * d + i] * (2.0 * w[i]);
                for j in 0..d {
                    obj = obj + rec[i * d + j] * w[i] * w[j];
                }
            }
            (dot(w, &n), obj.hi.max(0.0))
        });
        for &ch in &groups.groups[g] {
            predicted[ch] = per_site.iter().map(|p| p.0).collect();
            loss[ch] = per_site.iter().map(|p| p.1).collect();
        }
    }
    let predicted = interleave(dims, &predicted);
    let residual = predicted
        .iter()
        .zip(img.data())
        .map(|(p, x)| (x - p) * (x - p))
        .collect();
    Ok(Prediction {
        predicted: PixelMap { dims, data: predicted },
        residual: PixelMap { dims, data: residual },
        train_loss: PixelMap { dims, data: interleave(dims, &loss) },
    })
}
