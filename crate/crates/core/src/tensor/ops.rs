use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};

/// Weights of a 3x3 convolution, stored `[out][in][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    out_channels: usize,
    in_channels: usize,
    kernel: Vec<f32>,
    bias: Vec<f32>,
}

impl ConvParams {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::invalid("convolution needs at least one channel"));
        }
        if kernel.len() != out_channels * in_channels * 9 {
            return Err(Error::shape(format!(
                "kernel for {out_channels}x{in_channels}x3x3 needs {} values, got {}",
                out_channels * in_channels * 9,
                kernel.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::shape(format!(
                "bias needs {out_channels} values, got {}",
                bias.len()
            )));
        }
        if !kernel.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::invalid("convolution weights must be finite"));
        }
        Ok(ConvParams {
            out_channels,
            in_channels,
            kernel,
            bias,
        })
    }

    /// Per-channel identity: output channel `c` copies input channel `c`.
    pub fn identity(channels: usize) -> Self {
        let mut kernel = vec![0.0; channels * channels * 9];
        for c in 0..channels {
            kernel[(c * channels + c) * 9 + 4] = 1.0;
        }
        ConvParams {
            out_channels: channels,
            in_channels: channels,
            kernel,
            bias: vec![0.0; channels],
        }
    }

    /// All-zero kernel with a constant bias, i.e. a constant output map.
    pub fn constant(out_channels: usize, in_channels: usize, value: f32) -> Self {
        ConvParams {
            out_channels,
            in_channels,
            kernel: vec![0.0; out_channels * in_channels * 9],
            bias: vec![value; out_channels],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> &[f32] {
        &self.kernel
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f32] {
        &mut self.bias
    }

    pub fn kernel_mut(&mut self) -> &mut [f32] {
        &mut self.kernel
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.kernel[((o * self.in_channels + i) * 3 + ky) * 3 + kx]
    }
}

/// Affine map `W v + b` with `W` stored row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    out_features: usize,
    in_features: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Linear {
    pub fn new(
        out_features: usize,
        in_features: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if out_features == 0 || in_features == 0 {
            return Err(Error::invalid("linear layer needs nonzero dimensions"));
        }
        if weight.len() != out_features * in_features || bias.len() != out_features {
            return Err(Error::shape(format!(
                "linear {out_features}x{in_features}: got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        if !weight.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::invalid("linear weights must be finite"));
        }
        Ok(Linear {
            out_features,
            in_features,
            weight,
            bias,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut weight = vec![0.0; n * n];
        for i in 0..n {
            weight[i * n + i] = 1.0;
        }
        Linear {
            out_features: n,
            in_features: n,
            weight,
            bias: vec![0.0; n],
        }
    }

    pub fn zeros(out_features: usize, in_features: usize) -> Self {
        Linear {
            out_features,
            in_features,
            weight: vec![0.0; out_features * in_features],
            bias: vec![0.0; out_features],
        }
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [f32] {
        &mut self.weight
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f32] {
        &mut self.bias
    }
}

/// Squeeze-and-Excitation parameters: a `C -> C/r` squeeze layer followed by
/// a `C/r -> C` excitation layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SeParams {
    pub squeeze: Linear,
    pub excite: Linear,
}

impl SeParams {
    pub fn new(squeeze: Linear, excite: Linear) -> Result<Self> {
        if squeeze.out_features != excite.in_features
            || squeeze.in_features != excite.out_features
        {
            return Err(Error::shape(format!(
                "SE layers do not chain: {}->{} then {}->{}",
                squeeze.in_features, squeeze.out_features, excite.in_features, excite.out_features
            )));
        }
        Ok(SeParams { squeeze, excite })
    }

    /// All weights zero, so every gate is `sigmoid(0) = 0.5`.
    pub fn zeros(channels: usize, reduction: usize) -> Self {
        let hidden = se_hidden_width(channels, reduction);
        SeParams {
            squeeze: Linear::zeros(hidden, channels),
            excite: Linear::zeros(channels, hidden),
        }
    }

    pub fn channels(&self) -> usize {
        self.squeeze.in_features
    }

    pub fn hidden(&self) -> usize {
        self.squeeze.out_features
    }
}

/// Default SE reduction ratio.
pub const SE_REDUCTION: usize = 16;

/// Bottleneck width for `channels` at the requested reduction ratio.
///
/// The ratio is clamped to `channels` and then lowered until it divides the
/// channel count, so `channels < 16` degenerates to a one-unit bottleneck.
pub fn se_hidden_width(channels: usize, reduction: usize) -> usize {
    assert!(channels > 0, "SE block needs at least one channel");
    let mut r = reduction.clamp(1, channels);
    while !channels.is_multiple_of(r) {
        r -= 1;
    }
    channels / r
}

/// 3x3 cross-correlation with one pixel of zero padding on every border.
pub fn conv3x3(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    if x.channels() != p.in_channels {
        return Err(Error::shape(format!(
            "conv3x3 expects {} input channels, got {}",
            p.in_channels,
            x.channels()
        )));
    }
    let (h, w) = (x.height(), x.width());
    let plane = h * w;
    let mut out = Tensor::zeros(p.out_channels, h, w);
    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(o, dst)| {
            let mut acc = vec![p.bias[o] as f64; plane];
            for i in 0..p.in_channels {
                let src = x.channel(i);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wgt = p.weight(o, i, ky, kx) as f64;
                        if wgt == 0.0 {
                            continue;
                        }
                        // Output rows/cols whose tap lands inside the input.
                        let y_lo = usize::from(ky == 0);
                        let y_hi = if ky == 2 { h - 1 } else { h };
                        let x_lo = usize::from(kx == 0);
                        let x_hi = if kx == 2 { w - 1 } else { w };
                        for y in y_lo..y_hi {
                            let sy = y + ky - 1;
                            let row = &src[sy * w..(sy + 1) * w];
                            let acc_row = &mut acc[y * w..(y + 1) * w];
                            for xx in x_lo..x_hi {
                                acc_row[xx] += wgt * row[xx + kx - 1] as f64;
                            }
                        }
                    }
                }
            }
            for (d, a) in dst.iter_mut().zip(acc) {
                *d = a as f32;
            }
        });
    Ok(out)
}

/// Per-channel spatial mean.
pub fn global_avg_pool(x: &Tensor) -> Vec<f64> {
    let n = (x.height() * x.width()) as f64;
    (0..x.channels())
        .map(|c| x.channel(c).iter().map(|&v| v as f64).sum::<f64>() / n)
        .collect()
}

pub fn fully_connected(v: &[f64], layer: &Linear) -> Result<Vec<f64>> {
    if v.len() != layer.in_features {
        return Err(Error::shape(format!(
            "fully_connected expects {} inputs, got {}",
            layer.in_features,
            v.len()
        )));
    }
    Ok((0..layer.out_features)
        .map(|o| {
            let row = &layer.weight[o * layer.in_features..(o + 1) * layer.in_features];
            layer.bias[o] as f64
                + row
                    .iter()
                    .zip(v)
                    .map(|(&w, &x)| w as f64 * x)
                    .sum::<f64>()
        })
        .collect())
}

#[inline]
pub fn sigmoid_f64(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The SE excitation vector `sigmoid(W2 relu(W1 GAP(x)))`, one gate per channel.
pub fn se_gate(x: &Tensor, p: &SeParams) -> Result<Vec<f64>> {
    if x.channels() != p.channels() {
        return Err(Error::shape(format!(
            "SE block expects {} channels, got {}",
            p.channels(),
            x.channels()
        )));
    }
    let squeezed = global_avg_pool(x);
    let hidden: Vec<f64> = fully_connected(&squeezed, &p.squeeze)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    Ok(fully_connected(&hidden, &p.excite)?
        .into_iter()
        .map(sigmoid_f64)
        .collect())
}

/// Channel attention: every channel scaled by its SE gate.
pub fn se_block(x: &Tensor, p: &SeParams) -> Result<Tensor> {
    let gate = se_gate(x, p)?;
    let mut out = x.clone();
    for (c, g) in gate.into_iter().enumerate() {
        for v in out.channel_mut(c) {
            *v = (*v as f64 * g) as f32;
        }
    }
    Ok(out)
}

pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    let first = xs
        .first()
        .ok_or_else(|| Error::invalid("concat_channels needs at least one tensor"))?;
    let (h, w) = (first.height(), first.width());
    if let Some(bad) = xs.iter().find(|t| t.height() != h || t.width() != w) {
        return Err(Error::shape(format!(
            "concat_channels spatial mismatch: {} vs {}",
            first.shape(),
            bad.shape()
        )));
    }
    let channels = xs.iter().map(|t| t.channels()).sum();
    let mut data = Vec::with_capacity(channels * h * w);
    for t in xs {
        data.extend_from_slice(t.data());
    }
    Tensor::new(channels, h, w, data)
}

pub fn split_channels(x: &Tensor, parts: usize) -> Result<Vec<Tensor>> {
    if parts == 0 || !x.channels().is_multiple_of(parts) {
        return Err(Error::shape(format!(
            "cannot split {} channels into {parts} parts",
            x.channels()
        )));
    }
    let c = x.channels() / parts;
    let chunk = c * x.height() * x.width();
    x.data()
        .chunks_exact(chunk)
        .map(|d| Tensor::new(c, x.height(), x.width(), d.to_vec()))
        .collect()
}

/// Source coordinate and blend weight for align-corners=false resampling.
#[inline]
fn upsample_tap(dst: usize, factor: usize, len: usize) -> (usize, usize, f64) {
    let src = ((dst as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, src - i0 as f64)
}

/// Bilinear upsampling by an integer factor, align-corners=false.
pub fn bilinear_upsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let (h, w) = (x.height(), x.width());
    let (oh, ow) = (h * factor, w * factor);
    let rows: Vec<_> = (0..oh).map(|y| upsample_tap(y, factor, h)).collect();
    let cols: Vec<_> = (0..ow).map(|x| upsample_tap(x, factor, w)).collect();
    let mut out = Tensor::zeros(x.channels(), oh, ow);
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(c, dst)| {
            let src = x.channel(c);
            for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
                for (xx, &(x0, x1, fx)) in cols.iter().enumerate() {
                    let v00 = src[y0 * w + x0] as f64;
                    let v01 = src[y0 * w + x1] as f64;
                    let v10 = src[y1 * w + x0] as f64;
                    let v11 = src[y1 * w + x1] as f64;
                    let top = v00 + fx * (v01 - v00);
                    let bot = v10 + fx * (v11 - v10);
                    dst[y * ow + xx] = (top + fy * (bot - top)) as f32;
                }
            }
        });
    Ok(out)
}

/// 2x2 average pooling with stride 2. Both spatial extents must be even.
pub fn avg_pool2(x: &Tensor) -> Result<Tensor> {
    let (h, w) = (x.height(), x.width());
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!(
            "avg_pool2 needs even extents, got {}",
            x.shape()
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    Ok(Tensor::from_fn(x.channels(), oh, ow, |c, y, xx| {
        let s = x.get(c, 2 * y, 2 * xx) as f64
            + x.get(c, 2 * y, 2 * xx + 1) as f64
            + x.get(c, 2 * y + 1, 2 * xx) as f64
            + x.get(c, 2 * y + 1, 2 * xx + 1) as f64;
        (s * 0.25) as f32
    }))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_map(b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_map(b, |x, y| x - y)
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_map(b, |x, y| x * y)
}

/// Elementwise product where `mask` has either `x`'s channel count or a
/// single channel broadcast across all of `x`'s channels.
pub fn gate(mask: &Tensor, x: &Tensor) -> Result<Tensor> {
    if mask.channels() == x.channels() {
        return hadamard(mask, x);
    }
    if mask.channels() != 1 || !mask.shape().same_plane(&x.shape()) {
        return Err(Error::shape(format!(
            "cannot gate {} with mask {}",
            x.shape(),
            mask.shape()
        )));
    }
    let m = mask.channel(0);
    let mut out = x.clone();
    for c in 0..x.channels() {
        for (v, &g) in out.channel_mut(c).iter_mut().zip(m) {
            *v *= g;
        }
    }
    Ok(out)
}

pub fn scale(x: &Tensor, k: f32) -> Tensor {
    x.map(|v| v * k)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| sigmoid_f64(v as f64) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::rng::ParamRng;

    fn random_tensor(rng: &mut ParamRng, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(c, h, w, |_, _, _| rng.uniform(-1.0, 1.0))
    }

    fn random_conv(rng: &mut ParamRng, o: usize, i: usize) -> ConvParams {
        ConvParams::new(
            o,
            i,
            (0..o * i * 9).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            (0..o).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = ParamRng::new(1, "id");
        let x = random_tensor(&mut rng, 1, 4, 6);
        let y = conv3x3(&x, &ConvParams::identity(1)).unwrap();
        assert!(y.bit_eq(&x));
    }

    #[test]
    fn ones_kernel_counts_overlap() {
        let x = Tensor::filled(1, 3, 3, 1.0);
        let p = ConvParams::new(1, 1, vec![1.0; 9], vec![0.0]).unwrap();
        let y = conv3x3(&x, &p).unwrap();
        assert_eq!(y.get(0, 1, 1), 9.0);
        for (r, c) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_eq!(y.get(0, r, c), 4.0);
        }
        assert_eq!(y.get(0, 0, 1), 6.0);
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut rng = ParamRng::new(7, "conv");
        let x = random_tensor(&mut rng, 2, 5, 5);
        let p = random_conv(&mut rng, 3, 2);
        let fast = conv3x3(&x, &p).unwrap();
        let slow = oracle::conv3x3_naive(&x, &p);
        assert!(fast.max_abs_diff(&slow) < 1e-6);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::zeros(2, 3, 3);
        assert!(matches!(
            conv3x3(&x, &ConvParams::identity(3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_is_linear() {
        let mut rng = ParamRng::new(11, "lin");
        for _ in 0..20 {
            let x = random_tensor(&mut rng, 3, 6, 7);
            let y = random_tensor(&mut rng, 3, 6, 7);
            let mut p = random_conv(&mut rng, 2, 3);
            p.bias_mut().fill(0.0);
            let (a, b) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let mix = add(&scale(&x, a), &scale(&y, b)).unwrap();
            let lhs = conv3x3(&mix, &p).unwrap();
            let rhs = add(
                &scale(&conv3x3(&x, &p).unwrap(), a),
                &scale(&conv3x3(&y, &p).unwrap(), b),
            )
            .unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-5);
        }
    }

    #[test]
    fn zero_se_params_halve_input() {
        let mut rng = ParamRng::new(3, "se");
        let x = random_tensor(&mut rng, 4, 3, 3);
        let y = se_block(&x, &SeParams::zeros(4, SE_REDUCTION)).unwrap();
        assert!(y.max_abs_diff(&scale(&x, 0.5)) < 1e-7);
    }

    #[test]
    fn se_on_zero_input_is_zero() {
        let mut rng = ParamRng::new(4, "se0");
        let p = rng.se_params(8, SE_REDUCTION);
        let y = se_block(&Tensor::zeros(8, 4, 4), &p).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn se_matches_loop_oracle_and_never_amplifies() {
        let mut rng = ParamRng::new(5, "se1");
        for _ in 0..10 {
            let x = random_tensor(&mut rng, 32, 4, 5);
            let p = rng.se_params(32, SE_REDUCTION);
            let y = se_block(&x, &p).unwrap();
            assert!(y.max_abs_diff(&oracle::se_block_naive(&x, &p)) < 1e-6);
            for (a, b) in y.data().iter().zip(x.data()) {
                assert!(a.abs() <= b.abs());
            }
        }
    }

    #[test]
    fn se_hidden_width_clamps() {
        assert_eq!(se_hidden_width(64, 16), 4);
        assert_eq!(se_hidden_width(8, 16), 1);
        assert_eq!(se_hidden_width(48, 16), 3);
        assert_eq!(se_hidden_width(20, 16), 2);
        assert_eq!(se_hidden_width(1, 16), 1);
    }

    #[test]
    fn concat_orders_and_split_inverts() {
        let mut rng = ParamRng::new(6, "cat");
        let a = random_tensor(&mut rng, 2, 3, 4);
        let b = random_tensor(&mut rng, 3, 3, 4);
        let ab = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(ab.channels(), 5);
        assert_eq!(ab.channel(0), a.channel(0));
        assert_eq!(ab.channel(2), b.channel(0));

        let parts: Vec<_> = (0..4).map(|_| random_tensor(&mut rng, 2, 3, 4)).collect();
        let refs: Vec<&Tensor> = parts.iter().collect();
        let back = split_channels(&concat_channels(&refs).unwrap(), 4).unwrap();
        for (p, q) in parts.iter().zip(&back) {
            assert!(p.bit_eq(q));
        }
    }

    #[test]
    fn concat_and_split_reject_bad_shapes() {
        let a = Tensor::zeros(1, 3, 4);
        let b = Tensor::zeros(1, 4, 4);
        assert!(concat_channels(&[&a, &b]).is_err());
        assert!(concat_channels(&[]).is_err());
        assert!(split_channels(&Tensor::zeros(5, 2, 2), 4).is_err());
    }

    #[test]
    fn upsample_hand_computed() {
        let x = Tensor::new(1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        #[rustfmt::skip]
        let expected = [
            0.0, 0.25, 0.75, 1.0,
            0.5, 0.75, 1.25, 1.5,
            1.5, 1.75, 2.25, 2.5,
            2.0, 2.25, 2.75, 3.0,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn upsample_constant_and_identity() {
        let x = Tensor::filled(3, 3, 5, 0.7);
        let y = bilinear_upsample(&x, 4).unwrap();
        assert_eq!(y.shape(), crate::tensor::Shape::new(3, 12, 20));
        assert!(y.data().iter().all(|&v| v == 0.7));
        assert!(bilinear_upsample(&x, 1).unwrap().bit_eq(&x));
        assert!(bilinear_upsample(&x, 0).is_err());
    }

    #[test]
    fn upsample_matches_oracle() {
        let mut rng = ParamRng::new(8, "up");
        let x = random_tensor(&mut rng, 2, 3, 5);
        for f in [2, 3, 4] {
            let y = bilinear_upsample(&x, f).unwrap();
            assert!(y.max_abs_diff(&oracle::upsample_naive(&x, f)) < 1e-6);
        }
    }

    #[test]
    fn elementwise_family() {
        let x = Tensor::new(1, 1, 3, vec![-3.0, 0.0, 2.0]).unwrap();
        let ones = Tensor::filled(1, 1, 3, 1.0);
        assert!(hadamard(&x, &ones).unwrap().bit_eq(&x));
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(sigmoid(&x).get(0, 0, 1), 0.5);
        assert!(sigmoid(&x).data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(scale(&x, 2.0).data(), &[-6.0, 0.0, 4.0]);
        assert!(add(&x, &Tensor::zeros(1, 1, 4)).is_err());
        let mask = Tensor::new(1, 1, 3, vec![1.0, 0.5, 0.0]).unwrap();
        let two = Tensor::filled(2, 1, 3, 2.0);
        assert_eq!(gate(&mask, &two).unwrap().data(), &[2.0, 1.0, 0.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn gap_and_fc() {
        let x = Tensor::filled(3, 4, 4, 2.5);
        assert_eq!(global_avg_pool(&x), vec![2.5; 3]);
        let v = vec![1.0, -2.0, 3.0];
        assert_eq!(fully_connected(&v, &Linear::identity(3)).unwrap(), v);
        assert!(fully_connected(&v, &Linear::identity(4)).is_err());

        let mut rng = ParamRng::new(9, "fc");
        let x = random_tensor(&mut rng, 5, 3, 7);
        let layer = rng.linear(4, 5);
        let got = fully_connected(&global_avg_pool(&x), &layer).unwrap();
        let want = oracle::fully_connected_naive(&oracle::gap_naive(&x), &layer);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn avg_pool_halves() {
        let x = Tensor::new(1, 2, 4, vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(avg_pool2(&x).unwrap().data(), &[2.0, 6.0]);
        assert!(avg_pool2(&Tensor::zeros(1, 3, 4)).is_err());
    }
}
