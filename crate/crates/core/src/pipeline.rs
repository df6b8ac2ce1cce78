//! Deterministic end-to-end forward pass.
//!
//! A weight-shared five-stage stub encoder (3x3 conv, relu, 2x2 average
//! pool) runs on the equirectangular input and on both strips of the four
//! cube unfoldings centered on F, R, B and L. After stage 2 each pair of
//! strips is projected back to equirectangular form, so stages 3-5 of every
//! branch share the equirect geometry. The five stage-5 features are fused
//! by DWF, three FR levels (k = 4, 3, 2) decode upward, and a 3x3 conv head
//! on each FR output gives the side outputs. The final map is the k = 2
//! head's logits upsampled to the input size, then squashed.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dwf::{dwf_fuse_traced, DwfConfig, DwfParams, FusionWeights};
use crate::error::{Error, Result};
use crate::fr::{fr_module_traced, FrConfig, FrLevelInputs, FrParams};
use crate::projection::{
    cep_merge, cube_to_ep, ep_to_cube_tensor, roll_columns, unfold, CubeFaceSet, EquirectImage,
    Face,
};
use crate::rng::ParamRng;
use crate::tensor::{
    add, avg_pool2, bilinear_upsample, concat_channels, conv3x3, relu, sigmoid, ConvParams, Shape,
    Tensor,
};

pub const STAGES: usize = 5;
/// Decoder levels in execution order; level `k` consumes stage-`k` features.
pub const FR_LEVELS: [usize; 3] = [4, 3, 2];
/// Input channels of the stub encoder. Grayscale inputs are replicated.
pub const INPUT_CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_channels: [usize; STAGES],
    /// FR widths for k = 4, 3, 2.
    pub fr_widths: [usize; 3],
    /// One encoder parameter set for the equirect input and every CU strip.
    pub shared_encoder: bool,
    /// Cube face side; `None` means a quarter of the input width.
    pub face_side: Option<usize>,
    pub dwf: DwfConfig,
    pub fr: FrConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_channels: [8, 16, 32, 48, 64],
            fr_widths: [64, 32, 16],
            shared_encoder: true,
            face_side: None,
            dwf: DwfConfig::default(),
            fr: FrConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, &c) in self.encoder_channels.iter().enumerate() {
            if c == 0 {
                return Err(Error::invalid(format!("model.encoder_channels[{i}] must be positive")));
            }
        }
        for (i, &c) in self.fr_widths.iter().enumerate() {
            if c == 0 {
                return Err(Error::invalid(format!("model.fr_widths[{i}] must be positive")));
            }
        }
        if let Some(a) = self.face_side {
            if a == 0 || a % 4 != 0 {
                return Err(Error::invalid(format!(
                    "model.face_side must be a positive multiple of 4, got {a}"
                )));
            }
        }
        if self.dwf.reduction == 0 {
            return Err(Error::invalid("model.dwf.reduction must be positive"));
        }
        Ok(())
    }
}

/// Structural substitutions used for ablation studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Equirect branch only; no cube unfoldings, DWF passes `F_E` through.
    pub no_cu: bool,
    /// DWF replaced by the plain sum `F_E + sum_i F_Ci`.
    pub no_dwf: bool,
    /// FR replaced by concatenation of upsampled decoder and encoder
    /// features followed by conv + relu.
    pub no_fr: bool,
    /// WAF replaced by equal weights of 1/4.
    pub no_waf: bool,
    /// Six individually encoded faces projected straight back to equirect
    /// form, used as the feature of all four unfolding slots.
    pub six_faces: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 5] = ["no_cu", "no_dwf", "no_fr", "no_waf", "six_faces"];

    pub fn single(name: &str) -> Result<Ablation> {
        let mut a = Ablation::default();
        a.set(name, true)?;
        Ok(a)
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<()> {
        let slot = match name {
            "no_cu" => &mut self.no_cu,
            "no_dwf" => &mut self.no_dwf,
            "no_fr" => &mut self.no_fr,
            "no_waf" => &mut self.no_waf,
            "six_faces" => &mut self.six_faces,
            _ => return Err(Error::invalid(format!("unknown ablation `{name}`"))),
        };
        *slot = on;
        Ok(())
    }

    pub fn active(&self) -> Vec<&'static str> {
        let flags = [self.no_cu, self.no_dwf, self.no_fr, self.no_waf, self.six_faces];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.no_cu && (self.no_dwf || self.no_waf || self.six_faces) {
            return Err(Error::invalid(
                "ablation.no_cu removes the unfolding branches; no_dwf, no_waf and six_faces need them",
            ));
        }
        if self.no_dwf && self.no_waf {
            return Err(Error::invalid(
                "ablation.no_waf modifies DWF, which ablation.no_dwf removes",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStubParams {
    pub stages: [ConvParams; STAGES],
}

impl EncoderStubParams {
    pub fn generate(seed: u64, prefix: &str, channels: &[usize; STAGES]) -> Self {
        let stages = std::array::from_fn(|s| {
            let inp = if s == 0 { INPUT_CHANNELS } else { channels[s - 1] };
            ParamRng::new(seed, &format!("{prefix}.{}", s + 1)).conv_params(channels[s], inp)
        });
        EncoderStubParams { stages }
    }
}

/// Every learnable tensor of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderStubParams,
    /// Separate CU-strip encoder when the encoder is not shared.
    pub cu_encoder: Option<EncoderStubParams>,
    pub dwf: DwfParams,
    /// Indexed like [`FR_LEVELS`].
    pub fr: [FrParams; 3],
    /// Replacement convolutions for the `no_fr` ablation.
    pub concat_fr: [ConvParams; 3],
    pub heads: [ConvParams; 3],
}

impl ModelParams {
    pub fn generate(seed: u64, cfg: &ModelConfig, ablation: &Ablation) -> Self {
        let ch = &cfg.encoder_channels;
        let deepest = ch[STAGES - 1];
        let fr = std::array::from_fn(|i| {
            let k = FR_LEVELS[i];
            let dec = if i == 0 { deepest } else { cfg.fr_widths[i - 1] };
            FrParams::generate(seed, &format!("fr{k}"), dec, ch[k - 1], cfg.fr_widths[i], &cfg.fr)
        });
        let sources = if ablation.no_cu { 1 } else { 5 };
        let concat_fr = std::array::from_fn(|i| {
            let k = FR_LEVELS[i];
            let dec = if i == 0 { deepest } else { cfg.fr_widths[i - 1] };
            ParamRng::new(seed, &format!("fr{k}.concat"))
                .conv_params(cfg.fr_widths[i], dec + sources * ch[k - 1])
        });
        let heads = std::array::from_fn(|i| {
            ParamRng::new(seed, &format!("head{}", FR_LEVELS[i])).conv_params(1, cfg.fr_widths[i])
        });
        ModelParams {
            encoder: EncoderStubParams::generate(seed, "encoder", ch),
            cu_encoder: (!cfg.shared_encoder)
                .then(|| EncoderStubParams::generate(seed, "cu_encoder", ch)),
            dwf: DwfParams::generate(seed, "dwf", deepest, &cfg.dwf),
            fr,
            concat_fr,
            heads,
        }
    }
}

/// Configuration plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub ablation: Ablation,
    pub params: ModelParams,
}

impl Model {
    pub fn generate(seed: u64, config: ModelConfig, ablation: Ablation) -> Result<Self> {
        config.validate()?;
        ablation.validate()?;
        let params = ModelParams::generate(seed, &config, &ablation);
        Ok(Model {
            config,
            ablation,
            params,
        })
    }

    /// Same parameters under a different ablation. `no_cu` toggles change the
    /// concat convolution widths, so those are regenerated from the seed.
    pub fn with_ablation(&self, seed: u64, ablation: Ablation) -> Result<Self> {
        ablation.validate()?;
        let mut m = self.clone();
        if ablation.no_cu != self.ablation.no_cu {
            let fresh = ModelParams::generate(seed, &self.config, &ablation);
            m.params.concat_fr = fresh.concat_fr;
        }
        m.ablation = ablation;
        Ok(m)
    }

    fn cu_encoder(&self) -> (&EncoderStubParams, &'static str) {
        match &self.params.cu_encoder {
            Some(p) => (p, "cu_encoder"),
            None => (&self.params.encoder, "encoder"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// `(1, H, W)` saliency map.
    pub saliency: Tensor,
    /// Side outputs of the k = 4, 3, 2 heads at 1/16, 1/8 and 1/4 scale.
    pub sides: [Tensor; 3],
    /// WAF weights, `None` when DWF did not run with learned weights.
    pub weights: Option<FusionWeights>,
    /// Every named intermediate in production order.
    pub shapes: Vec<(String, Shape)>,
    /// Parameter groups read during the pass.
    pub used_params: BTreeSet<String>,
    /// Named intermediates when capture was requested.
    pub intermediates: Vec<(String, Tensor)>,
}

#[derive(Default)]
struct Recorder {
    capture: bool,
    shapes: Vec<(String, Shape)>,
    used: BTreeSet<String>,
    tensors: Vec<(String, Tensor)>,
}

impl Recorder {
    fn tensor(&mut self, name: impl Into<String>, t: &Tensor) {
        let name = name.into();
        self.shapes.push((name.clone(), t.shape()));
        if self.capture {
            self.tensors.push((name, t.clone()));
        }
    }

    fn param(&mut self, name: impl Into<String>) {
        self.used.insert(name.into());
    }
}

fn stage(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    avg_pool2(&relu(&conv3x3(x, p)?))
}

/// Stage outputs `1..=n` of one branch.
fn run_stages(x: &Tensor, p: &EncoderStubParams, range: std::ops::Range<usize>) -> Result<Vec<Tensor>> {
    let mut out: Vec<Tensor> = Vec::with_capacity(range.len());
    for s in range {
        let next = stage(out.last().unwrap_or(x), &p.stages[s])?;
        out.push(next);
    }
    Ok(out)
}

/// Per-channel mean and standard deviation the encoder input is
/// normalized with (the usual ImageNet statistics).
pub const INPUT_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const INPUT_STD: [f32; 3] = [0.229, 0.224, 0.225];

fn normalize_input(t: &Tensor) -> Result<Tensor> {
    let rgb = match t.channels() {
        INPUT_CHANNELS => t.clone(),
        1 => concat_channels(&[t, t, t])?,
        c => return Err(Error::shape(format!("forward input has {c} channels"))),
    };
    Ok(Tensor::from_fn(3, rgb.height(), rgb.width(), |c, y, x| {
        (rgb.get(c, y, x) - INPUT_MEAN[c]) / INPUT_STD[c]
    }))
}

/// Features of one branch at stages 1..=5 (index 0 is stage 1).
type Pyramid = Vec<Tensor>;

pub fn forward(ep: &EquirectImage, model: &Model) -> Result<ForwardOutput> {
    forward_with(ep, model, false)
}

/// [`forward`], optionally keeping every named intermediate tensor.
pub fn forward_with(ep: &EquirectImage, model: &Model, capture: bool) -> Result<ForwardOutput> {
    let (h, w) = (ep.height(), ep.width());
    let depth = 1 << STAGES;
    if h % depth != 0 {
        return Err(Error::invalid(format!(
            "forward needs an input height divisible by {depth}, got {h}"
        )));
    }
    let a = model.config.face_side.unwrap_or(w / 4);
    if a == 0 || !a.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "face side must be a positive multiple of 4, got {a}"
        )));
    }
    let abl = &model.ablation;
    let p = &model.params;
    let mut rec = Recorder {
        capture,
        ..Default::default()
    };
    let input = normalize_input(ep.tensor())?;
    rec.tensor("input", &input);

    // Equirect branch, stages 1-2.
    let mut e = run_stages(&input, &p.encoder, 0..2)?;
    for s in 0..2 {
        rec.param(format!("encoder.{}", s + 1));
    }

    // Unfolding branches to equirect form after stage 2.
    let cu2: Option<Vec<Tensor>> = if abl.no_cu {
        None
    } else {
        let faces = ep_to_cube_tensor(&input, a)?;
        let (cu_p, cu_name) = model.cu_encoder();
        for s in 0..2 {
            rec.param(format!("{cu_name}.{}", s + 1));
        }
        let ep_h = h / 4;
        if abl.six_faces {
            let encoded: Vec<Vec<Tensor>> = faces
                .faces()
                .par_iter()
                .map(|f| run_stages(f, cu_p, 0..2))
                .collect::<Result<_>>()?;
            for (face, pyr) in Face::ALL.iter().zip(&encoded) {
                for (s, t) in pyr.iter().enumerate() {
                    rec.tensor(format!("face{face}.stage{}", s + 1), t);
                }
            }
            let set = CubeFaceSet::new(std::array::from_fn(|i| encoded[i][1].clone()))?;
            let merged = cube_to_ep(&set, ep_h)?;
            rec.tensor("faces.cep", &merged);
            Some(vec![merged; 4])
        } else {
            let pairs = Face::RING
                .iter()
                .map(|&c| unfold(&faces, c))
                .collect::<Result<Vec<_>>>()?;
            let strips: Vec<&Tensor> = pairs
                .iter()
                .flat_map(|pr| [&pr.horizontal, &pr.vertical])
                .collect();
            let encoded: Vec<Vec<Tensor>> = strips
                .par_iter()
                .map(|t| run_stages(t, cu_p, 0..2))
                .collect::<Result<_>>()?;
            let mut merged = Vec::with_capacity(4);
            for (i, pair) in pairs.iter().enumerate() {
                let (hz, vt) = (&encoded[2 * i], &encoded[2 * i + 1]);
                for s in 0..2 {
                    rec.tensor(format!("cu{}.h.stage{}", i + 1, s + 1), &hz[s]);
                    rec.tensor(format!("cu{}.v.stage{}", i + 1, s + 1), &vt[s]);
                }
                let m = cep_merge(&hz[1], &vt[1], &pair.layout, ep_h)?;
                rec.tensor(format!("cu{}.cep", i + 1), &m);
                merged.push(m);
            }
            Some(merged)
        }
    };

    // Stages 3-5 for every branch.
    e.extend(run_stages(&e[1], &p.encoder, 2..STAGES)?);
    for s in 2..STAGES {
        rec.param(format!("encoder.{}", s + 1));
    }
    for (s, t) in e.iter().enumerate() {
        rec.tensor(format!("ep.stage{}", s + 1), t);
    }
    let cu: Option<Vec<Pyramid>> = match &cu2 {
        None => None,
        Some(merged) => {
            let (cu_p, cu_name) = model.cu_encoder();
            for s in 2..STAGES {
                rec.param(format!("{cu_name}.{}", s + 1));
            }
            let deep: Vec<Pyramid> = if abl.six_faces {
                let one = run_stages(&merged[0], cu_p, 2..STAGES)?;
                vec![one; 4]
            } else {
                merged
                    .par_iter()
                    .map(|m| run_stages(m, cu_p, 2..STAGES))
                    .collect::<Result<_>>()?
            };
            let pyramids: Vec<Pyramid> = merged
                .iter()
                .zip(deep)
                .map(|(m, d)| {
                    // Index 0 (stage 1) has no equirect form; it is never read.
                    let mut v = vec![Tensor::zeros(1, 1, 1), m.clone()];
                    v.extend(d);
                    v
                })
                .collect();
            for (i, pyr) in pyramids.iter().enumerate() {
                for s in 1..STAGES {
                    rec.tensor(format!("cu{}.stage{}", i + 1, s + 1), &pyr[s]);
                }
            }
            Some(pyramids)
        }
    };

    // Fusion of the deepest features.
    let fe = &e[STAGES - 1];
    let mut weights = None;
    let fused = match &cu {
        None => fe.clone(),
        Some(cu) => {
            let fcs: [&Tensor; 4] = std::array::from_fn(|i| &cu[i][STAGES - 1]);
            if abl.no_dwf {
                let mut acc = fe.clone();
                for f in fcs {
                    acc = add(&acc, f)?;
                }
                acc
            } else {
                let fixed = abl.no_waf.then_some(FusionWeights::EQUAL);
                let out = dwf_fuse_traced(fe, fcs, &p.dwf, fixed, &mut |n| rec.param(n))?;
                for (i, m) in out.masks.iter().enumerate() {
                    rec.tensor(format!("dwf.mask{}", i + 1), m);
                }
                if fixed.is_none() {
                    weights = Some(out.weights);
                }
                out.fused
            }
        }
    };
    rec.tensor("dwf.fused", &fused);

    // Decoder.
    let mut decoder = fused;
    let mut sides: Vec<Tensor> = Vec::with_capacity(3);
    let mut last_logits = None;
    for (i, &k) in FR_LEVELS.iter().enumerate() {
        let enc_ep = &e[k - 1];
        let enc_cu: Option<[Tensor; 4]> = cu
            .as_ref()
            .map(|cu| std::array::from_fn(|j| cu[j][k - 1].clone()));
        let out = if abl.no_fr {
            let up = bilinear_upsample(&decoder, 2)?;
            let mut parts: Vec<&Tensor> = vec![&up, enc_ep];
            if let Some(c) = &enc_cu {
                parts.extend(c.iter());
            }
            rec.param(format!("fr{k}.concat"));
            relu(&conv3x3(&concat_channels(&parts)?, &p.concat_fr[i])?)
        } else {
            let inputs = FrLevelInputs {
                decoder,
                ep: enc_ep.clone(),
                cu: enc_cu,
            };
            fr_module_traced(&inputs, &p.fr[i], &format!("fr{k}"), &mut |n| rec.param(n))?
        };
        rec.tensor(format!("fr{k}"), &out);
        let logits = conv3x3(&out, &p.heads[i])?;
        rec.param(format!("head{k}"));
        let side = sigmoid(&logits);
        rec.tensor(format!("side{k}"), &side);
        sides.push(side);
        last_logits = Some(logits);
        decoder = out;
    }
    let logits = last_logits.expect("three decoder levels");
    let factor = h / logits.height();
    let saliency = sigmoid(&bilinear_upsample(&logits, factor)?);
    rec.tensor("final", &saliency);

    let sides: [Tensor; 3] = sides.try_into().expect("three side outputs");
    Ok(ForwardOutput {
        saliency,
        sides,
        weights,
        shapes: rec.shapes,
        used_params: rec.used,
        intermediates: rec.tensors,
    })
}

/// Mean absolute difference between the output for the input and the
/// output for the input yawed a quarter turn, rotated back.
pub fn yaw_consistency(ep: &EquirectImage, model: &Model) -> Result<f64> {
    let w = ep.width() as isize;
    let base = forward(ep, model)?.saliency;
    let yawed = EquirectImage::new(roll_columns(ep.tensor(), w / 4))?;
    let back = roll_columns(&forward(&yawed, model)?.saliency, -w / 4);
    let total: f64 = base
        .data()
        .iter()
        .zip(back.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(total / base.data().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fixture() -> EquirectImage {
        EquirectImage::new(fixtures::forward_fixture()).unwrap()
    }

    fn model(ablation: Ablation) -> Model {
        Model::generate(42, ModelConfig::default(), ablation).unwrap()
    }

    fn shape_of(out: &ForwardOutput, name: &str) -> Shape {
        out.shapes.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("{name}")).1
    }

    #[test]
    fn shape_schedule() {
        let out = forward(&fixture(), &model(Ablation::default())).unwrap();
        let ch = ModelConfig::default().encoder_channels;
        for s in 1..=STAGES {
            let want = Shape::new(ch[s - 1], 32 >> s, 64 >> s);
            assert_eq!(shape_of(&out, &format!("ep.stage{s}")), want);
            if s >= 2 {
                for i in 1..=4 {
                    assert_eq!(shape_of(&out, &format!("cu{i}.stage{s}")), want);
                }
            }
        }
        // Strips: a = 16, a x 4a and 3a x a, halved per stage.
        assert_eq!(shape_of(&out, "cu1.h.stage1"), Shape::new(8, 8, 32));
        assert_eq!(shape_of(&out, "cu1.v.stage2"), Shape::new(16, 12, 4));
        assert_eq!(out.saliency.shape(), Shape::new(1, 32, 64));
        assert_eq!(out.sides[0].shape(), Shape::new(1, 2, 4));
        assert_eq!(out.sides[1].shape(), Shape::new(1, 4, 8));
        assert_eq!(out.sides[2].shape(), Shape::new(1, 8, 16));
    }

    #[test]
    fn larger_input_side_scales() {
        let ep = EquirectImage::new(fixtures::blob_equirect(128, 3, 1)).unwrap();
        let out = forward(&ep, &model(Ablation::default())).unwrap();
        assert_eq!(out.saliency.shape(), Shape::new(1, 128, 256));
        assert_eq!(out.sides[0].shape(), Shape::new(1, 8, 16));
        assert_eq!(out.sides[1].shape(), Shape::new(1, 16, 32));
        assert_eq!(out.sides[2].shape(), Shape::new(1, 32, 64));
    }

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let out = forward(&fixture(), &model(Ablation::default())).unwrap();
        for t in std::iter::once(&out.saliency).chain(&out.sides) {
            assert!(t.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let w = out.weights.unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_across_runs_and_pools() {
        let ep = fixture();
        let m = model(Ablation::default());
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| forward_with(&ep, &m, true).unwrap())
        };
        let a = run(1);
        let b = run(4);
        let c = run(4);
        assert!(a.saliency.bit_eq(&b.saliency) && b.saliency.bit_eq(&c.saliency));
        for ((_, x), (_, y)) in a.intermediates.iter().zip(&b.intermediates) {
            assert!(x.bit_eq(y));
        }
    }

    #[test]
    fn ablations_change_the_output() {
        let ep = fixture();
        let full = model(Ablation::default());
        let base = forward(&ep, &full).unwrap().saliency;
        for name in Ablation::NAMES {
            let m = full.with_ablation(42, Ablation::single(name).unwrap()).unwrap();
            let out = forward(&ep, &m).unwrap().saliency;
            assert!(out.max_abs_diff(&base) > 1e-6, "{name}");
        }
    }

    #[test]
    fn no_cu_reads_no_unfolding_parameters() {
        let out = forward(&fixture(), &model(Ablation::single("no_cu").unwrap())).unwrap();
        for name in &out.used_params {
            assert!(!name.starts_with("dwf"), "{name}");
            assert!(!name.starts_with("cu_encoder"), "{name}");
            assert!(!["C1", "C2", "C3", "C4"].iter().any(|c| name.ends_with(c)), "{name}");
        }
        assert!(out.used_params.contains("fr4.enc.E"));
        assert!(!out.shapes.iter().any(|(n, _)| n.starts_with("cu")));
    }

    #[test]
    fn full_model_reads_every_parameter_group() {
        let out = forward(&fixture(), &model(Ablation::default())).unwrap();
        for k in FR_LEVELS {
            for s in ["C1", "C2", "C3", "C4", "E"] {
                assert!(out.used_params.contains(&format!("fr{k}.enc.{s}")));
            }
        }
        assert!(out.used_params.contains("dwf.waf"));
        let nowaf = model(Ablation::single("no_waf").unwrap());
        let out = forward(&fixture(), &nowaf).unwrap();
        assert!(!out.used_params.contains("dwf.waf"));
        assert!(out.weights.is_none());
    }

    #[test]
    fn inconsistent_ablations_rejected() {
        for (a, b) in [("no_cu", "no_dwf"), ("no_cu", "six_faces"), ("no_cu", "no_waf"), ("no_dwf", "no_waf")] {
            let mut abl = Ablation::single(a).unwrap();
            abl.set(b, true).unwrap();
            assert!(Model::generate(1, ModelConfig::default(), abl).is_err(), "{a}+{b}");
        }
        let mut ok = Ablation::single("no_fr").unwrap();
        ok.set("six_faces", true).unwrap();
        assert!(Model::generate(1, ModelConfig::default(), ok).is_ok());
        assert!(Ablation::single("bogus").is_err());
    }

    #[test]
    fn bad_input_dims_rejected() {
        let ep = EquirectImage::new(fixtures::smooth_equirect(16, 3)).unwrap();
        assert!(forward(&ep, &model(Ablation::default())).is_err());
    }

    #[test]
    fn grayscale_input_matches_replicated_rgb() {
        let gray = fixtures::blob_equirect(32, 1, 3);
        let rgb = concat_channels(&[&gray, &gray, &gray]).unwrap();
        let m = model(Ablation::default());
        let a = forward(&EquirectImage::new(gray).unwrap(), &m).unwrap();
        let b = forward(&EquirectImage::new(rgb).unwrap(), &m).unwrap();
        assert!(a.saliency.bit_eq(&b.saliency));
    }

    #[test]
    fn constant_input_is_constant_away_from_padding() {
        let ep = EquirectImage::new(Tensor::filled(3, 32, 64, 0.5)).unwrap();
        let out = forward_with(&ep, &model(Ablation::default()), true).unwrap();
        assert!(out.saliency.is_finite());
        // Zero padding only reaches the outermost pooled ring of stage 1.
        let (_, s1) = out.intermediates.iter().find(|(n, _)| n == "ep.stage1").unwrap();
        for c in 0..s1.channels() {
            let v = s1.get(c, 1, 1);
            for y in 1..s1.height() - 1 {
                for x in 1..s1.width() - 1 {
                    assert_eq!(s1.get(c, y, x), v);
                }
            }
        }
    }
}
