//! Dynamic weighting fusion of the equirectangular feature with the four
//! cube-unfolding features.
//!
//! Gated inter fusion (GEF) blends each unfolding feature `F_Ci` with the
//! equirect feature `F_E` through a learned importance map
//! `P_i = sigmoid(conv(SE([F_E, F_Ci])))`:
//!
//! ```text
//! F_i = P_i * F_Ci + (1 - P_i) * F_E
//! ```
//!
//! Weighted intra fusion (WAF) squeezes the concatenated `[F_C1..F_C4]`
//! through an SE gate, splits the `4C` gate vector into four blocks and
//! normalizes their sums into weights `w_i`. The fused output is
//! `F_f = F_E + sum_i w_i * F_i`, accumulated in the fixed order i = 1..4.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::ParamRng;
use crate::tensor::{
    concat_channels, conv3x3, se_block, se_gate, se_hidden_width, ConvParams, Linear, SeParams,
    Tensor, SE_REDUCTION,
};

/// Channel arity of the GEF importance map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskArity {
    /// One gate per feature channel (full Hadamard product).
    #[default]
    PerChannel,
    /// A single map broadcast over all channels.
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwfConfig {
    /// One GEF parameter set for all four unfoldings.
    pub shared_gef: bool,
    /// WAF SE weights identical across the four channel blocks.
    pub block_shared_waf: bool,
    pub mask: MaskArity,
    pub reduction: usize,
}

impl Default for DwfConfig {
    fn default() -> Self {
        DwfConfig {
            shared_gef: true,
            block_shared_waf: false,
            mask: MaskArity::PerChannel,
            reduction: SE_REDUCTION,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GefParams {
    /// SE over the `2C` concatenation.
    pub se: SeParams,
    /// Bottleneck `2C -> C` (or `2C -> 1` for a single-channel mask).
    pub conv: ConvParams,
}

impl GefParams {
    pub fn generate(rng: &mut ParamRng, channels: usize, mask: MaskArity, reduction: usize) -> Self {
        let out = match mask {
            MaskArity::PerChannel => channels,
            MaskArity::Single => 1,
        };
        GefParams {
            se: rng.se_params(2 * channels, reduction),
            conv: rng.conv_params(out, 2 * channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.se.channels() / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GefSet {
    Shared(GefParams),
    PerBranch(Box<[GefParams; 4]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DwfParams {
    pub gef: GefSet,
    /// SE over the `4C` concatenation of the unfolding features.
    pub waf: SeParams,
}

impl DwfParams {
    pub fn generate(seed: u64, prefix: &str, channels: usize, cfg: &DwfConfig) -> Self {
        let gef = if cfg.shared_gef {
            let mut rng = ParamRng::new(seed, &format!("{prefix}.gef"));
            GefSet::Shared(GefParams::generate(&mut rng, channels, cfg.mask, cfg.reduction))
        } else {
            GefSet::PerBranch(Box::new(std::array::from_fn(|i| {
                let mut rng = ParamRng::new(seed, &format!("{prefix}.gef.{}", i + 1));
                GefParams::generate(&mut rng, channels, cfg.mask, cfg.reduction)
            })))
        };
        let mut rng = ParamRng::new(seed, &format!("{prefix}.waf"));
        let waf = if cfg.block_shared_waf {
            block_shared_se(&mut rng, channels, cfg.reduction)
        } else {
            rng.se_params(4 * channels, cfg.reduction)
        };
        DwfParams { gef, waf }
    }

    pub fn channels(&self) -> usize {
        self.waf.channels() / 4
    }

    pub fn gef_for(&self, branch: usize) -> &GefParams {
        match &self.gef {
            GefSet::Shared(p) => p,
            GefSet::PerBranch(ps) => &ps[branch],
        }
    }

    /// Parameters matching inputs reordered as `inputs[perm[0]], ...,
    /// inputs[perm[3]]`: per-branch GEF sets and the WAF channel blocks are
    /// permuted the same way.
    pub fn permuted(&self, perm: [usize; 4]) -> DwfParams {
        let gef = match &self.gef {
            GefSet::Shared(p) => GefSet::Shared(p.clone()),
            GefSet::PerBranch(ps) => {
                GefSet::PerBranch(Box::new(std::array::from_fn(|i| ps[perm[i]].clone())))
            }
        };
        DwfParams {
            gef,
            waf: permute_se_blocks(&self.waf, perm),
        }
    }
}

/// SE over `4C` channels whose squeeze columns, excitation rows and
/// excitation biases repeat the same `C`-wide block four times.
pub fn block_shared_se(rng: &mut ParamRng, channels: usize, reduction: usize) -> SeParams {
    let total = 4 * channels;
    let hidden = se_hidden_width(total, reduction);
    let bound1 = 1.0 / (total as f32).sqrt();
    let bound2 = 1.0 / (hidden as f32).sqrt();
    let block1: Vec<f32> = (0..hidden * channels).map(|_| rng.uniform(-bound1, bound1)).collect();
    let bias1: Vec<f32> = (0..hidden).map(|_| rng.uniform(-bound1, bound1)).collect();
    let block2: Vec<f32> = (0..channels * hidden).map(|_| rng.uniform(-bound2, bound2)).collect();
    let bias2: Vec<f32> = (0..channels).map(|_| rng.uniform(-bound2, bound2)).collect();
    let mut w1 = vec![0.0; hidden * total];
    for h in 0..hidden {
        for b in 0..4 {
            for c in 0..channels {
                w1[h * total + b * channels + c] = block1[h * channels + c];
            }
        }
    }
    let mut w2 = Vec::with_capacity(total * hidden);
    let mut b2 = Vec::with_capacity(total);
    for _ in 0..4 {
        w2.extend_from_slice(&block2);
        b2.extend_from_slice(&bias2);
    }
    SeParams::new(
        Linear::new(hidden, total, w1, bias1).expect("valid squeeze"),
        Linear::new(total, hidden, w2, b2).expect("valid excite"),
    )
    .expect("SE layers chain")
}

fn permute_se_blocks(se: &SeParams, perm: [usize; 4]) -> SeParams {
    let total = se.channels();
    let c = total / 4;
    let hidden = se.hidden();
    let src = |i: usize| perm[i / c] * c + i % c;
    let w1 = se.squeeze.weight();
    let mut nw1 = vec![0.0; w1.len()];
    for h in 0..hidden {
        for i in 0..total {
            nw1[h * total + i] = w1[h * total + src(i)];
        }
    }
    let w2 = se.excite.weight();
    let mut nw2 = vec![0.0; w2.len()];
    let mut nb2 = vec![0.0; total];
    for i in 0..total {
        nw2[i * hidden..(i + 1) * hidden].copy_from_slice(&w2[src(i) * hidden..(src(i) + 1) * hidden]);
        nb2[i] = se.excite.bias()[src(i)];
    }
    SeParams::new(
        Linear::new(hidden, total, nw1, se.squeeze.bias().to_vec()).expect("same shape"),
        Linear::new(total, hidden, nw2, nb2).expect("same shape"),
    )
    .expect("same shape")
}

/// Normalized per-unfolding weights: nonnegative and summing to one.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionWeights(pub [f64; 4]);

impl FusionWeights {
    pub const EQUAL: FusionWeights = FusionWeights([0.25; 4]);

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn check_same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what}: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Gated inter fusion of one unfolding feature. Returns `(P_i, F_i)`.
pub fn gef(fe: &Tensor, fc: &Tensor, p: &GefParams) -> Result<(Tensor, Tensor)> {
    check_same_shape(fe, fc, "GEF inputs differ")?;
    let cat = concat_channels(&[fe, fc])?;
    let logits = conv3x3(&se_block(&cat, &p.se)?, &p.conv)?;
    let mask = crate::tensor::sigmoid(&logits);
    let (c, plane) = (fe.channels(), fe.shape().plane());
    let mut fused = fe.clone();
    for ch in 0..c {
        let m = mask.channel(if mask.channels() == 1 { 0 } else { ch });
        let (e, u) = (fe.channel(ch), fc.channel(ch));
        let dst = fused.channel_mut(ch);
        for i in 0..plane {
            let g = m[i] as f64;
            dst[i] = (g * u[i] as f64 + (1.0 - g) * e[i] as f64) as f32;
        }
    }
    Ok((mask, fused))
}

/// WAF weights from the raw unfolding features.
pub fn waf_weights(fcs: [&Tensor; 4], p: &SeParams) -> Result<FusionWeights> {
    for f in &fcs[1..] {
        check_same_shape(fcs[0], f, "WAF inputs differ")?;
    }
    let cat = concat_channels(&fcs)?;
    let alpha = se_gate(&cat, p)?;
    let c = fcs[0].channels();
    let sums: [f64; 4] = std::array::from_fn(|i| alpha[i * c..(i + 1) * c].iter().sum());
    let total: f64 = sums.iter().sum();
    Ok(FusionWeights(sums.map(|s| s / total)))
}

/// Result of [`dwf_fuse`].
#[derive(Clone, Debug)]
pub struct DwfOutput {
    pub fused: Tensor,
    pub weights: FusionWeights,
    /// The four GEF importance maps `P_i`.
    pub masks: Vec<Tensor>,
}

/// `F_E + sum_i w_i * F_i`, summed in branch order.
pub fn weighted_sum(fe: &Tensor, parts: &[Tensor], w: &FusionWeights) -> Result<Tensor> {
    for p in parts {
        check_same_shape(fe, p, "fusion operand differs")?;
    }
    let mut out = fe.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let mut acc = *v as f64;
        for (k, p) in parts.iter().enumerate() {
            acc += w.0[k] * p.data()[i] as f64;
        }
        *v = acc as f32;
    }
    Ok(out)
}

pub fn dwf_fuse(fe: &Tensor, fcs: [&Tensor; 4], p: &DwfParams) -> Result<DwfOutput> {
    dwf_fuse_traced(fe, fcs, p, None, &mut |_| {})
}

/// [`dwf_fuse`] with optional fixed weights (bypassing WAF) and a callback
/// naming every parameter group as it is used.
pub fn dwf_fuse_traced(
    fe: &Tensor,
    fcs: [&Tensor; 4],
    p: &DwfParams,
    fixed_weights: Option<FusionWeights>,
    trace: &mut dyn FnMut(&str),
) -> Result<DwfOutput> {
    if fe.channels() != p.channels() {
        return Err(Error::shape(format!(
            "DWF parameters expect {} channels, got {}",
            p.channels(),
            fe.channels()
        )));
    }
    for f in fcs {
        check_same_shape(fe, f, "DWF inputs differ")?;
    }
    let gated: Vec<(Tensor, Tensor)> = (0..4)
        .into_par_iter()
        .map(|i| gef(fe, fcs[i], p.gef_for(i)))
        .collect::<Result<_>>()?;
    match &p.gef {
        GefSet::Shared(_) => trace("dwf.gef"),
        GefSet::PerBranch(_) => (1..=4).for_each(|i| trace(&format!("dwf.gef.{i}"))),
    }
    let weights = match fixed_weights {
        Some(w) => w,
        None => {
            trace("dwf.waf");
            waf_weights(fcs, &p.waf)?
        }
    };
    let (masks, parts): (Vec<_>, Vec<_>) = gated.into_iter().unzip();
    Ok(DwfOutput {
        fused: weighted_sum(fe, &parts, &weights)?,
        weights,
        masks,
    })
}
