//! Saliency evaluation measures: MAE, adaptive F-measure, weighted
//! F-measure, structure measure (S-measure) and enhanced-alignment measure
//! (E-measure).
//!
//! Constants follow the common SOD evaluation toolkits rather than anything
//! model specific: adaptive threshold `min(2 * mean(S), 1)` with
//! binarization `S >= threshold`, `beta^2 = 0.3` for the F-measure,
//! `beta^2 = 1` for the weighted F-measure, a 7x7 Gaussian with sigma 5 and
//! zero padding for its dependency filter, and `alpha = 0.5` for the
//! S-measure.
//!
//! Conventions where the reference toolkits are silent or degenerate:
//!
//! * empty ground truth: the F-measure and the weighted F-measure are 1 when
//!   every prediction value is at or below the adaptive threshold and 0
//!   otherwise;
//! * the distance transform behind the weighted F-measure breaks ties
//!   toward the smallest row-major index;
//! * the S-measure centroid rounds half away from zero, empty quadrants
//!   contribute nothing, and variances over fewer than two pixels are 0;
//! * an all-zero prediction has threshold 0 and binarizes to all
//!   foreground, as in the reference E-measure code;
//! * the E-measure divides the enhanced-alignment sum by `H * W`, which
//!   keeps a perfect prediction at exactly 1.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const F_BETA2: f64 = 0.3;
pub const WF_BETA2: f64 = 1.0;
pub const S_ALPHA: f64 = 0.5;
pub const EPS: f64 = f64::EPSILON;
const GAUSS_RADIUS: usize = 3;
const GAUSS_SIGMA: f64 = 5.0;

/// Single-channel prediction in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::shape(format!(
                "saliency map {height}x{width} with {} values",
                data.len()
            )));
        }
        if !data.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("saliency values must lie in [0, 1]"));
        }
        Ok(SaliencyMap {
            height,
            width,
            data,
        })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.channels() != 1 {
            return Err(Error::shape(format!(
                "saliency maps have one channel, got {}",
                t.channels()
            )));
        }
        Self::new(
            t.height(),
            t.width(),
            t.data().iter().map(|&v| v as f64).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn flip_horizontal(&self) -> Self {
        SaliencyMap {
            data: flip_rows(&self.data, self.width),
            ..*self
        }
    }
}

/// Binary ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthMap {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl GroundTruthMap {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::shape(format!(
                "ground truth {height}x{width} with {} values",
                data.len()
            )));
        }
        Ok(GroundTruthMap {
            height,
            width,
            data,
        })
    }

    /// Accepts a single-channel tensor whose values are exactly 0 or 1.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.channels() != 1 {
            return Err(Error::shape("ground truth has one channel"));
        }
        let data = t
            .data()
            .iter()
            .map(|&v| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(Error::invalid(format!("ground truth value {v} is not binary"))),
            })
            .collect::<Result<_>>()?;
        Self::new(t.height(), t.width(), data)
    }

    /// Binarizes an arbitrary single-channel tensor at `threshold` (values
    /// strictly above it are foreground).
    pub fn binarize(t: &Tensor, threshold: f32) -> Result<Self> {
        if t.channels() != 1 {
            return Err(Error::shape("ground truth has one channel"));
        }
        Self::new(
            t.height(),
            t.width(),
            t.data().iter().map(|&v| v > threshold).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn foreground(&self) -> usize {
        self.data.iter().filter(|&&g| g).count()
    }

    pub fn complement(&self) -> Self {
        GroundTruthMap {
            data: self.data.iter().map(|g| !g).collect(),
            ..*self
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        GroundTruthMap {
            data: flip_rows(&self.data, self.width),
            ..*self
        }
    }

    pub fn to_saliency(&self) -> SaliencyMap {
        SaliencyMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect(),
        }
    }
}

fn flip_rows<T: Copy>(data: &[T], width: usize) -> Vec<T> {
    data.chunks_exact(width)
        .flat_map(|row| row.iter().rev().copied())
        .collect()
}

fn check_dims(s: &SaliencyMap, g: &GroundTruthMap) -> Result<()> {
    if s.height != g.height || s.width != g.width {
        return Err(Error::shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            s.height, s.width, g.height, g.width
        )));
    }
    Ok(())
}

pub fn adaptive_threshold(s: &SaliencyMap) -> f64 {
    (2.0 * s.mean()).min(1.0)
}

/// Shared empty-ground-truth rule for the precision-based measures.
fn empty_gt_score(s: &SaliencyMap, threshold: f64) -> f64 {
    if s.data.iter().all(|&v| v <= threshold) {
        1.0
    } else {
        0.0
    }
}

pub fn mae(s: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    check_dims(s, g)?;
    let total: f64 = s
        .data
        .iter()
        .zip(&g.data)
        .map(|(&p, &t)| (p - if t { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(total / s.data.len() as f64)
}

/// F-measure at the adaptive threshold.
pub fn f_measure(s: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    check_dims(s, g)?;
    let thr = adaptive_threshold(s);
    let gt_fg = g.foreground();
    if gt_fg == 0 {
        return Ok(empty_gt_score(s, thr));
    }
    let (mut predicted, mut hit) = (0usize, 0usize);
    for (&p, &t) in s.data.iter().zip(&g.data) {
        if p >= thr {
            predicted += 1;
            hit += usize::from(t);
        }
    }
    if hit == 0 {
        return Ok(0.0);
    }
    let precision = hit as f64 / predicted as f64;
    let recall = hit as f64 / gt_fg as f64;
    Ok((1.0 + F_BETA2) * precision * recall / (F_BETA2 * precision + recall))
}

/// Euclidean distance from every pixel to its nearest foreground pixel and
/// that pixel's flat index. Foreground pixels map to themselves.
fn nearest_foreground(g: &GroundTruthMap) -> (Vec<f64>, Vec<usize>) {
    let (h, w) = (g.height, g.width);
    let fg = |y: isize, x: isize| {
        y >= 0 && x >= 0 && y < h as isize && x < w as isize && g.data[y as usize * w + x as usize]
    };
    // The nearest foreground pixel of a background pixel always lies on the
    // foreground boundary, so only boundary pixels are candidates.
    let boundary: Vec<usize> = (0..h * w)
        .filter(|&i| {
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            g.data[i] && !(fg(y - 1, x) && fg(y + 1, x) && fg(y, x - 1) && fg(y, x + 1))
        })
        .collect();
    let mut dist = vec![0.0; h * w];
    let mut idx: Vec<usize> = (0..h * w).collect();
    for i in 0..h * w {
        if g.data[i] {
            continue;
        }
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        let mut best = (i64::MAX, usize::MAX);
        for &j in &boundary {
            let (dy, dx) = ((j / w) as i64 - y, (j % w) as i64 - x);
            let d2 = dy * dy + dx * dx;
            if d2 < best.0 || (d2 == best.0 && j < best.1) {
                best = (d2, j);
            }
        }
        dist[i] = (best.0 as f64).sqrt();
        idx[i] = best.1;
    }
    (dist, idx)
}

/// Normalized 1-D Gaussian taps; their outer product is the 2-D kernel.
fn gaussian_taps() -> [f64; 2 * GAUSS_RADIUS + 1] {
    let mut k = [0.0; 2 * GAUSS_RADIUS + 1];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - GAUSS_RADIUS as f64;
        *v = (-(d * d) / (2.0 * GAUSS_SIGMA * GAUSS_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter with zero padding.
fn gaussian_filter(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = gaussian_taps();
    let r = GAUSS_RADIUS as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let sx = x as isize + t as isize - r;
                if sx >= 0 && sx < w as isize {
                    acc += kv * src[y * w + sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let sy = y as isize + t as isize - r;
                if sy >= 0 && sy < h as isize {
                    acc += kv * tmp[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Weighted F-measure (dependency- and location-weighted precision/recall).
pub fn weighted_f(s: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    check_dims(s, g)?;
    let gt_fg = g.foreground();
    if gt_fg == 0 {
        return Ok(empty_gt_score(s, adaptive_threshold(s)));
    }
    let (h, w) = (g.height, g.width);
    let err: Vec<f64> = s
        .data
        .iter()
        .zip(&g.data)
        .map(|(&p, &t)| (p - if t { 1.0 } else { 0.0 }).abs())
        .collect();
    let (dist, nearest) = nearest_foreground(g);
    let spread: Vec<f64> = (0..h * w).map(|i| err[nearest[i]]).collect();
    let filtered = gaussian_filter(&spread, h, w);
    let (mut fg_sum, mut bg_sum) = (0.0, 0.0);
    for i in 0..h * w {
        if g.data[i] {
            fg_sum += err[i].min(filtered[i]);
        } else {
            let importance = 2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp();
            bg_sum += err[i] * importance;
        }
    }
    let tp = gt_fg as f64 - fg_sum;
    let recall = 1.0 - fg_sum / gt_fg as f64;
    let precision = tp / (EPS + tp + bg_sum);
    Ok((1.0 + WF_BETA2) * recall * precision / (EPS + recall + WF_BETA2 * precision))
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = sum / n as f64;
    let var = if n < 2 {
        0.0
    } else {
        values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    };
    (mean, var.sqrt(), n)
}

fn object_similarity(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mean, std, n) = mean_std(values);
    if n == 0 {
        return 0.0;
    }
    2.0 * mean / (mean * mean + 1.0 + std + EPS)
}

fn s_object(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let u = g.foreground() as f64 / g.data.len() as f64;
    let pairs = s.data.iter().zip(&g.data);
    let fg = object_similarity(pairs.clone().filter(|(_, &t)| t).map(|(&p, _)| p));
    let bg = object_similarity(pairs.filter(|(_, &t)| !t).map(|(&p, _)| 1.0 - p));
    u * fg + (1.0 - u) * bg
}

/// Centroid split point `(x, y)`: the left/top parts are `[0, x)` / `[0, y)`.
fn centroid_split(g: &GroundTruthMap) -> (usize, usize) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (i, &t) in g.data.iter().enumerate() {
        if t {
            sx += (i % g.width) as f64;
            sy += (i / g.width) as f64;
            n += 1;
        }
    }
    if n == 0 {
        return (
            (g.width as f64 / 2.0).round() as usize + 1,
            (g.height as f64 / 2.0).round() as usize + 1,
        );
    }
    (
        (sx / n as f64).round() as usize + 1,
        (sy / n as f64).round() as usize + 1,
    )
}

fn region_ssim(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len();
    let (x, y) = (
        pred.iter().sum::<f64>() / n as f64,
        gt.iter().sum::<f64>() / n as f64,
    );
    let (sx, sy, sxy) = if n < 2 {
        (0.0, 0.0, 0.0)
    } else {
        let d = (n - 1) as f64;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (p, t) in pred.iter().zip(gt) {
            a += (p - x) * (p - x);
            b += (t - y) * (t - y);
            c += (p - x) * (t - y);
        }
        (a / d, b / d, c / d)
    };
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn s_region(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let (h, w) = (g.height, g.width);
    let (cx, cy) = centroid_split(g);
    let (cx, cy) = (cx.min(w), cy.min(h));
    let area = (h * w) as f64;
    let quads = [(0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)];
    let mut total = 0.0;
    for (y0, y1, x0, x1) in quads {
        let n = (y1 - y0) * (x1 - x0);
        if n == 0 {
            continue;
        }
        let mut pred = Vec::with_capacity(n);
        let mut gt = Vec::with_capacity(n);
        for y in y0..y1 {
            pred.extend_from_slice(&s.data[y * w + x0..y * w + x1]);
            gt.extend(g.data[y * w + x0..y * w + x1].iter().map(|&t| if t { 1.0 } else { 0.0 }));
        }
        total += n as f64 / area * region_ssim(&pred, &gt);
    }
    total
}

/// Structure measure: object- and region-aware similarity.
pub fn s_measure(s: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    check_dims(s, g)?;
    let fg = g.foreground();
    if fg == 0 {
        return Ok(1.0 - s.mean());
    }
    if fg == g.data.len() {
        return Ok(s.mean());
    }
    let score = S_ALPHA * s_object(s, g) + (1.0 - S_ALPHA) * s_region(s, g);
    Ok(score.max(0.0))
}

/// Enhanced-alignment measure of the prediction binarized at the adaptive
/// threshold.
pub fn e_measure(s: &SaliencyMap, g: &GroundTruthMap) -> Result<f64> {
    check_dims(s, g)?;
    let n = s.data.len();
    let thr = adaptive_threshold(s);
    let gt_fg = g.foreground();
    // Pixel counts by (prediction, ground truth).
    let mut counts = [[0usize; 2]; 2];
    for (&p, &t) in s.data.iter().zip(&g.data) {
        counts[usize::from(p >= thr)][usize::from(t)] += 1;
    }
    let pred_fg = counts[1][0] + counts[1][1];
    let enhanced_sum = if gt_fg == 0 {
        (n - pred_fg) as f64
    } else if gt_fg == n {
        pred_fg as f64
    } else {
        let mean_p = pred_fg as f64 / n as f64;
        let mean_g = gt_fg as f64 / n as f64;
        let mut sum = 0.0;
        for (p, row) in counts.iter().enumerate() {
            for (t, &count) in row.iter().enumerate() {
                let a = p as f64 - mean_p;
                let b = t as f64 - mean_g;
                let align = 2.0 * a * b / (a * a + b * b + EPS);
                sum += (align + 1.0) * (align + 1.0) / 4.0 * count as f64;
            }
        }
        sum
    };
    Ok(enhanced_sum / n as f64)
}

/// The five measures for one prediction.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    #[serde(rename = "E_phi")]
    pub e_phi: f64,
    #[serde(rename = "S_m")]
    pub s_measure: f64,
    #[serde(rename = "wFbeta")]
    pub weighted_f: f64,
    #[serde(rename = "Fbeta")]
    pub f_beta: f64,
    #[serde(rename = "MAE")]
    pub mae: f64,
    /// Adaptive threshold used by the F- and E-measures.
    pub adaptive_threshold: f64,
}

impl EvalReport {
    pub fn values(&self) -> [f64; 5] {
        [self.e_phi, self.s_measure, self.weighted_f, self.f_beta, self.mae]
    }

    /// Componentwise mean; `None` for an empty slice.
    pub fn mean(reports: &[EvalReport]) -> Option<EvalReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(EvalReport {
            e_phi: avg(|r| r.e_phi),
            s_measure: avg(|r| r.s_measure),
            weighted_f: avg(|r| r.weighted_f),
            f_beta: avg(|r| r.f_beta),
            mae: avg(|r| r.mae),
            adaptive_threshold: avg(|r| r.adaptive_threshold),
        })
    }
}

pub fn evaluate(s: &SaliencyMap, g: &GroundTruthMap) -> Result<EvalReport> {
    Ok(EvalReport {
        e_phi: e_measure(s, g)?,
        s_measure: s_measure(s, g)?,
        weighted_f: weighted_f(s, g)?,
        f_beta: f_measure(s, g)?,
        mae: mae(s, g)?,
        adaptive_threshold: adaptive_threshold(s),
    })
}
