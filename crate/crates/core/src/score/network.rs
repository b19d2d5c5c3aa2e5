//! Per-point score network: a shared per-neighbor encoder, symmetric max-pool
//! over the neighborhood and a small head, with hand-written backpropagation.
//!
//! Input for a query `q` is the set of its `k` nearest source points as
//! relative coordinates `(y_j − q) / f`, where `f` is the cloud's feature scale.
//! The head output is divided by `f` again, so the score carries units of
//! inverse length.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::train::feature_scale;
use super::ScoreField;
use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, Point3, PointCloud};

pub(crate) const MAGIC: &[u8; 4] = b"N2S3";
pub(crate) const FORMAT_VERSION: u32 = 1;

/// Samples per gradient chunk. Chunks are reduced in index order, so results
/// do not depend on the number of worker threads.
const GRAD_CHUNK: usize = 32;

/// Fully connected layer `y = W x + b`, `W` stored row-major (`rows × cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let mut d = Self::zeros(rows, cols);
        for w in &mut d.weight {
            *w = rng.random_range(-bound..bound);
        }
        d
    }

    #[inline]
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            *o = self.bias[r] + dot(row, x);
        }
    }

    /// Accumulates `dW += g xᵀ`, `db += g`.
    #[inline]
    fn accumulate(&self, grad: &mut Dense, g: &[f64], x: &[f64]) {
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            grad.bias[r] += gr;
            let row = &mut grad.weight[r * self.cols..(r + 1) * self.cols];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w += gr * xi;
            }
        }
    }

    /// `out = Wᵀ g`.
    #[inline]
    fn backward_input(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += gr * w;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() & !3);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Weights of the encoder (3 → hidden → hidden), pooled, then the head
/// (hidden → hidden → 3). ReLU follows every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub enc1: Dense,
    pub enc2: Dense,
    pub head1: Dense,
    pub head2: Dense,
}

impl NetworkWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            enc1: Dense::zeros(hidden, 3),
            enc2: Dense::zeros(hidden, hidden),
            head1: Dense::zeros(hidden, hidden),
            head2: Dense::zeros(3, hidden),
        }
    }

    /// He-uniform initialization for the ReLU layers; the output layer starts
    /// at zero so the initial score field is identically zero.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let he = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
        Self {
            enc1: Dense::uniform(hidden, 3, he(3), &mut rng),
            enc2: Dense::uniform(hidden, hidden, he(hidden), &mut rng),
            head1: Dense::uniform(hidden, hidden, he(hidden), &mut rng),
            head2: Dense::zeros(3, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.enc1.rows
    }

    pub fn layers(&self) -> [&Dense; 4] {
        [&self.enc1, &self.enc2, &self.head1, &self.head2]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 4] {
        [&mut self.enc1, &mut self.enc2, &mut self.head1, &mut self.head2]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden())
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        let want = [(h, 3), (h, h), (h, h), (3, h)];
        for (l, (r, c)) in self.layers().iter().zip(want) {
            if l.rows != r || l.cols != c || l.weight.len() != r * c || l.bias.len() != r {
                return Err(Error::Weights(format!(
                    "layer shape {}x{} inconsistent with hidden width {h}",
                    l.rows, l.cols
                )));
            }
        }
        Ok(())
    }

    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.layers_mut().into_iter().zip(other.layers()) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += scale * y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += scale * y);
        }
    }

    /// Raw network output for one neighborhood of dimensionless relative coordinates.
    pub fn forward(&self, rel: &[Point3]) -> Point3 {
        Forward::run(self, rel).output
    }
}

/// Cached activations for one neighborhood.
struct Forward {
    /// Per-neighbor pre-activations of both encoder layers (k × hidden each).
    pre1: Vec<f64>,
    pre2: Vec<f64>,
    /// Pooled features and the neighbor that won each channel.
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    pre3: Vec<f64>,
    output: Point3,
}

impl Forward {
    fn run(w: &NetworkWeights, rel: &[Point3]) -> Self {
        let h = w.hidden();
        let k = rel.len();
        let mut pre1 = vec![0.0; k * h];
        let mut pre2 = vec![0.0; k * h];
        let mut act = vec![0.0; h];
        let mut pooled = vec![f64::NEG_INFINITY; h];
        let mut argmax = vec![0usize; h];
        for (j, x) in rel.iter().enumerate() {
            let a1 = &mut pre1[j * h..(j + 1) * h];
            w.enc1.forward(x.as_slice(), a1);
            for (o, &a) in act.iter_mut().zip(a1.iter()) {
                *o = a.max(0.0);
            }
            let a2 = &mut pre2[j * h..(j + 1) * h];
            w.enc2.forward(&act, a2);
            for c in 0..h {
                let v = a2[c].max(0.0);
                if v > pooled[c] {
                    pooled[c] = v;
                    argmax[c] = j;
                }
            }
        }
        if k == 0 {
            pooled.iter_mut().for_each(|p| *p = 0.0);
        }
        let mut pre3 = vec![0.0; h];
        w.head1.forward(&pooled, &mut pre3);
        let act3: Vec<f64> = pre3.iter().map(|a| a.max(0.0)).collect();
        let mut out = [0.0; 3];
        w.head2.forward(&act3, &mut out);
        Self {
            pre1,
            pre2,
            pooled,
            argmax,
            pre3,
            output: Point3::new(out[0], out[1], out[2]),
        }
    }

    /// Accumulates parameter gradients for upstream gradient `g_out` on the raw output.
    fn backward(&self, w: &NetworkWeights, rel: &[Point3], g_out: &Point3, grad: &mut NetworkWeights) {
        let h = w.hidden();
        let act3: Vec<f64> = self.pre3.iter().map(|a| a.max(0.0)).collect();
        w.head2.accumulate(&mut grad.head2, g_out.as_slice(), &act3);

        let mut g3 = vec![0.0; h];
        w.head2.backward_input(g_out.as_slice(), &mut g3);
        for (g, &a) in g3.iter_mut().zip(&self.pre3) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        w.head1.accumulate(&mut grad.head1, &g3, &self.pooled);

        let mut g_pool = vec![0.0; h];
        w.head1.backward_input(&g3, &mut g_pool);

        // Route pooled gradients to the winning neighbor of each channel.
        let mut g2 = vec![0.0; h];
        let mut g1 = vec![0.0; h];
        let mut act1 = vec![0.0; h];
        for j in 0..rel.len() {
            let a2 = &self.pre2[j * h..(j + 1) * h];
            let mut any = false;
            for c in 0..h {
                g2[c] = if self.argmax[c] == j && a2[c] > 0.0 {
                    any = true;
                    g_pool[c]
                } else {
                    0.0
                };
            }
            if !any {
                continue;
            }
            let a1 = &self.pre1[j * h..(j + 1) * h];
            for (o, &a) in act1.iter_mut().zip(a1) {
                *o = a.max(0.0);
            }
            w.enc2.accumulate(&mut grad.enc2, &g2, &act1);
            w.enc2.backward_input(&g2, &mut g1);
            for (g, &a) in g1.iter_mut().zip(a1) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            w.enc1.accumulate(&mut grad.enc1, &g1, rel[j].as_slice());
        }
    }
}

/// One training example: neighbor offsets `y_j − y'` (world units) around a
/// perturbed point and the unit-variance noise `u` that produced it.
#[derive(Debug, Clone)]
pub struct Sample {
    pub offsets: Vec<Point3>,
    pub u: Point3,
}

/// Score predicted for a sample: raw output of the scaled offsets, divided by `f`.
fn predict(w: &NetworkWeights, offsets: &[Point3], feature_scale: f64) -> (Forward, Vec<Point3>, Point3) {
    let rel: Vec<Point3> = offsets.iter().map(|o| o / feature_scale).collect();
    let fwd = Forward::run(w, &rel);
    let score = fwd.output / feature_scale;
    (fwd, rel, score)
}

/// Loss value and exact gradient of `(1/N) Σ ‖σ_t S_i + u_i‖²` with respect to
/// every weight.
pub fn network_gradient(
    weights: &NetworkWeights,
    batch: &[Sample],
    sigma_t: f64,
    feature_scale: f64,
) -> (f64, NetworkWeights) {
    let n = batch.len() as f64;
    let partials: Vec<(f64, NetworkWeights)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = weights.zeros_like();
            let mut loss = 0.0;
            for s in chunk {
                let (fwd, rel, score) = predict(weights, &s.offsets, feature_scale);
                let resid = score * sigma_t + s.u;
                loss += resid.norm_squared();
                // d/dS of ‖σS + u‖²/N, then through S = raw / f.
                let g_out = resid * (2.0 * sigma_t / (n * feature_scale));
                fwd.backward(weights, &rel, &g_out, &mut grad);
            }
            (loss, grad)
        })
        .collect();
    let mut total = weights.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        total.add_scaled(g, 1.0);
    }
    (loss / n, total)
}

/// Loss only, same reduction order as [`network_gradient`].
pub fn network_loss(weights: &NetworkWeights, batch: &[Sample], sigma_t: f64, feature_scale: f64) -> f64 {
    let partials: Vec<f64> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|s| {
                    let (_, _, score) = predict(weights, &s.offsets, feature_scale);
                    (score * sigma_t + s.u).norm_squared()
                })
                .sum::<f64>()
        })
        .collect();
    partials.iter().sum::<f64>() / batch.len() as f64
}

/// Network-backed score field over a source cloud.
///
/// A query that coincides with a source point does not see that point among
/// its neighbors, matching how perturbed copies are presented during training.
#[derive(Debug, Clone)]
pub struct NetworkScore {
    weights: NetworkWeights,
    index: NeighborIndex,
    k: usize,
    feature_scale: f64,
}

impl NetworkScore {
    /// Feature scale is measured on `cloud`.
    pub fn new(weights: NetworkWeights, cloud: &PointCloud, k: usize) -> Result<Self> {
        let scale = feature_scale(cloud, k)?;
        Self::with_feature_scale(weights, cloud, k, scale)
    }

    pub fn with_feature_scale(weights: NetworkWeights, cloud: &PointCloud, k: usize, feature_scale: f64) -> Result<Self> {
        weights.check_shapes()?;
        if k == 0 {
            return Err(Error::invalid("neighborhood size must be positive"));
        }
        if !(feature_scale > 0.0 && feature_scale.is_finite()) {
            return Err(Error::invalid(format!("feature scale must be positive, got {feature_scale}")));
        }
        Ok(Self {
            weights,
            index: NeighborIndex::build(cloud),
            k,
            feature_scale,
        })
    }

    pub fn weights(&self) -> &NetworkWeights {
        &self.weights
    }

    pub fn feature_scale(&self) -> f64 {
        self.feature_scale
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub(crate) fn offsets(&self, q: &Point3) -> Vec<Point3> {
        let mut nbrs = self.index.knn(q, self.k + 1);
        if let Some(pos) = nbrs.iter().position(|n| n.sq_distance == 0.0) {
            nbrs.remove(pos);
        }
        nbrs.truncate(self.k);
        nbrs.iter().map(|n| self.index.points()[n.index] - q).collect()
    }
}

impl ScoreField for NetworkScore {
    fn score(&self, q: &Point3) -> Point3 {
        predict(&self.weights, &self.offsets(q), self.feature_scale).2
    }

    fn backend(&self) -> &'static str {
        "network"
    }
}

/// Binary layout (little-endian): `"N2S3"`, u32 version, u32 k, u32 layer
/// count, then `(rows, cols)` u32 pairs, then for each layer its weights
/// (row-major) followed by its biases as f64.
pub fn write_weights(w: &NetworkWeights, k: usize, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(k as u32).to_le_bytes())?;
    let layers = w.layers();
    out.write_all(&(layers.len() as u32).to_le_bytes())?;
    for l in &layers {
        out.write_all(&(l.rows as u32).to_le_bytes())?;
        out.write_all(&(l.cols as u32).to_le_bytes())?;
    }
    for l in &layers {
        for v in l.weight.iter().chain(&l.bias) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Inverse of [`write_weights`]; returns the weights and neighborhood size.
pub fn read_weights(mut input: impl Read) -> Result<(NetworkWeights, usize)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Weights(e.to_string()))?;
    let mut cur = &bytes[..];
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(Error::Weights("truncated file".into()));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    if take(4)? != MAGIC {
        return Err(Error::Weights("bad magic".into()));
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = read_u32(take(4)?);
    if version != FORMAT_VERSION {
        return Err(Error::Weights(format!("unsupported version {version}")));
    }
    let k = read_u32(take(4)?) as usize;
    let count = read_u32(take(4)?) as usize;
    if count != 4 {
        return Err(Error::Weights(format!("expected 4 layers, found {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        let r = read_u32(take(4)?) as usize;
        let c = read_u32(take(4)?) as usize;
        dims.push((r, c));
    }
    let mut layers = Vec::with_capacity(count);
    for (r, c) in dims {
        let mut d = Dense::zeros(r, c);
        for v in d.weight.iter_mut().chain(d.bias.iter_mut()) {
            *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        layers.push(d);
    }
    if !cur.is_empty() {
        return Err(Error::Weights("trailing bytes".into()));
    }
    let mut it = layers.into_iter();
    let w = NetworkWeights {
        enc1: it.next().unwrap(),
        enc2: it.next().unwrap(),
        head1: it.next().unwrap(),
        head2: it.next().unwrap(),
    };
    w.check_shapes()?;
    if !w.is_finite() {
        return Err(Error::Weights("non-finite weight".into()));
    }
    Ok((w, k))
}
