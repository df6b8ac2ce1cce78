//! Straightforward reference implementations.
//!
//! Everything here is written as plain nested loops over the textbook
//! definition, shares no code with the optimized paths it is compared
//! against, and is used by the test suites and `selftest`.

mod fusion;
mod geometry;
mod metrics;

pub use fusion::*;
pub use geometry::*;
pub use metrics::*;

use crate::tensor::{ConvParams, Linear, SeParams, Tensor};

pub fn conv3x3_naive(x: &Tensor, p: &ConvParams) -> Tensor {
    let (c_in, h, w) = (x.channels(), x.height(), x.width());
    assert_eq!(c_in, p.in_channels());
    let mut out = Tensor::zeros(p.out_channels(), h, w);
    for o in 0..p.out_channels() {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = p.bias()[o] as f64;
                for i in 0..c_in {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let sy = y as isize + ky as isize - 1;
                            let sx = xx as isize + kx as isize - 1;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            acc += p.weight(o, i, ky, kx) as f64
                                * x.get(i, sy as usize, sx as usize) as f64;
                        }
                    }
                }
                out.set(o, y, xx, acc as f32);
            }
        }
    }
    out
}

pub fn gap_naive(x: &Tensor) -> Vec<f64> {
    let mut v = vec![0.0; x.channels()];
    for (c, slot) in v.iter_mut().enumerate() {
        let mut s = 0.0;
        for y in 0..x.height() {
            for xx in 0..x.width() {
                s += x.get(c, y, xx) as f64;
            }
        }
        *slot = s / (x.height() * x.width()) as f64;
    }
    v
}

pub fn fully_connected_naive(v: &[f64], layer: &Linear) -> Vec<f64> {
    let mut out = Vec::with_capacity(layer.out_features());
    for o in 0..layer.out_features() {
        let mut acc = layer.bias()[o] as f64;
        for (i, &vi) in v.iter().enumerate() {
            acc += layer.weight()[o * layer.in_features() + i] as f64 * vi;
        }
        out.push(acc);
    }
    out
}

pub fn sigmoid_naive(x: f64) -> f64 {
    let e = x.exp();
    e / (1.0 + e)
}

pub fn se_gate_naive(x: &Tensor, p: &SeParams) -> Vec<f64> {
    let z = gap_naive(x);
    let mut hidden = fully_connected_naive(&z, &p.squeeze);
    for h in hidden.iter_mut() {
        if *h < 0.0 {
            *h = 0.0;
        }
    }
    fully_connected_naive(&hidden, &p.excite)
        .into_iter()
        .map(sigmoid_naive)
        .collect()
}

pub fn se_block_naive(x: &Tensor, p: &SeParams) -> Tensor {
    let s = se_gate_naive(x, p);
    let mut out = x.clone();
    for c in 0..x.channels() {
        for y in 0..x.height() {
            for xx in 0..x.width() {
                out.set(c, y, xx, (x.get(c, y, xx) as f64 * s[c]) as f32);
            }
        }
    }
    out
}

/// align-corners=false bilinear upsampling, written per output pixel.
pub fn upsample_naive(x: &Tensor, factor: usize) -> Tensor {
    let (h, w) = (x.height(), x.width());
    let mut out = Tensor::zeros(x.channels(), h * factor, w * factor);
    let coord = |d: usize, n: usize| -> (usize, usize, f64) {
        let mut s = (d as f64 + 0.5) / factor as f64 - 0.5;
        if s < 0.0 {
            s = 0.0;
        }
        let mut i0 = s.floor() as usize;
        if i0 > n - 1 {
            i0 = n - 1;
        }
        let i1 = if i0 + 1 < n { i0 + 1 } else { n - 1 };
        (i0, i1, s - i0 as f64)
    };
    for c in 0..x.channels() {
        for y in 0..h * factor {
            let (y0, y1, ty) = coord(y, h);
            for xx in 0..w * factor {
                let (x0, x1, tx) = coord(xx, w);
                let v = (1.0 - ty) * (1.0 - tx) * x.get(c, y0, x0) as f64
                    + (1.0 - ty) * tx * x.get(c, y0, x1) as f64
                    + ty * (1.0 - tx) * x.get(c, y1, x0) as f64
                    + ty * tx * x.get(c, y1, x1) as f64;
                out.set(c, y, xx, v as f32);
            }
        }
    }
    out
}

/// Elementwise `a * b + c` style helpers for the compositional oracles.
pub(crate) fn elementwise(
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Tensor {
    assert_eq!(a.shape(), b.shape());
    let mut out = a.clone();
    for c in 0..a.channels() {
        for y in 0..a.height() {
            for x in 0..a.width() {
                out.set(c, y, x, f(a.get(c, y, x) as f64, b.get(c, y, x) as f64) as f32);
            }
        }
    }
    out
}

pub(crate) fn concat_naive(xs: &[&Tensor]) -> Tensor {
    let c: usize = xs.iter().map(|t| t.channels()).sum();
    let (h, w) = (xs[0].height(), xs[0].width());
    let mut out = Tensor::zeros(c, h, w);
    let mut base = 0;
    for t in xs {
        for ci in 0..t.channels() {
            for y in 0..h {
                for x in 0..w {
                    out.set(base + ci, y, x, t.get(ci, y, x));
                }
            }
        }
        base += t.channels();
    }
    out
}
