//! Filtration and refinement between two decoder levels.
//!
//! One level consumes the previous decoder feature `F_d^{k+1}` (half the
//! encoder resolution) and five same-shape encoder features `F_j^k`
//! (`j = C1..C4, E`) and runs, in order:
//!
//! 1. enhance: `F_de = relu(a * R + b)` with `R = conv(F_d)` and `a`, `b`
//!    two further convolutions of `R`;
//! 2. filter: `F_ej = UP(FM_j) * conv(F_j)` with `FM_j = conv_j(F_de)`;
//! 3. aggregate: `F_e = relu(conv(sum_j F_ej))`, summed C1..C4 then E;
//! 4. refine: `F_dr = DM * UP(F_de)` with `DM = conv(F_e)`;
//! 5. fuse: `F_d^k = relu(conv([F_e, F_dr]))`.
//!
//! `UP` is x2 bilinear upsampling. Masks are used raw unless
//! [`MaskActivation::Sigmoid`] is selected.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::ParamRng;
use crate::tensor::{
    add, bilinear_upsample, concat_channels, conv3x3, hadamard, relu, sigmoid, ConvParams, Tensor,
};

/// Encoder feature sources in aggregation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    C1,
    C2,
    C3,
    C4,
    E,
}

impl Source {
    pub const ALL: [Source; 5] = [Source::C1, Source::C2, Source::C3, Source::C4, Source::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Source::C1 => "C1",
            Source::C2 => "C2",
            Source::C3 => "C3",
            Source::C4 => "C4",
            Source::E => "E",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskActivation {
    #[default]
    Identity,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrConfig {
    pub mask_activation: MaskActivation,
    /// One filtration-mask head for all five sources.
    pub shared_mask_head: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskHeads {
    PerSource(Box<[ConvParams; 5]>),
    Shared(ConvParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrParams {
    /// Decoder channel reduction, `c_dec -> width`.
    pub reduce: ConvParams,
    pub mod_a: ConvParams,
    pub mod_b: ConvParams,
    pub mask_heads: MaskHeads,
    /// Per-source `c_enc -> width` convolution applied before masking.
    pub encoder: Box<[ConvParams; 5]>,
    pub aggregate: ConvParams,
    pub detail: ConvParams,
    /// `2·width -> width`.
    pub fuse: ConvParams,
    pub mask_activation: MaskActivation,
}

impl FrParams {
    pub fn generate(
        seed: u64,
        prefix: &str,
        decoder_channels: usize,
        encoder_channels: usize,
        width: usize,
        cfg: &FrConfig,
    ) -> Self {
        let conv = |name: &str, o: usize, i: usize| {
            ParamRng::new(seed, &format!("{prefix}.{name}")).conv_params(o, i)
        };
        let mask_heads = if cfg.shared_mask_head {
            MaskHeads::Shared(conv("mask", width, width))
        } else {
            MaskHeads::PerSource(Box::new(
                Source::ALL.map(|s| conv(&format!("mask.{}", s.name()), width, width)),
            ))
        };
        FrParams {
            reduce: conv("reduce", width, decoder_channels),
            mod_a: conv("mod_a", width, width),
            mod_b: conv("mod_b", width, width),
            mask_heads,
            encoder: Box::new(
                Source::ALL.map(|s| conv(&format!("enc.{}", s.name()), width, encoder_channels)),
            ),
            aggregate: conv("aggregate", width, width),
            detail: conv("detail", width, width),
            fuse: conv("fuse", width, 2 * width),
            mask_activation: cfg.mask_activation,
        }
    }

    pub fn width(&self) -> usize {
        self.reduce.out_channels()
    }

    pub fn decoder_channels(&self) -> usize {
        self.reduce.in_channels()
    }

    pub fn encoder_channels(&self) -> usize {
        self.encoder[0].in_channels()
    }

    pub fn mask_head(&self, s: Source) -> &ConvParams {
        match &self.mask_heads {
            MaskHeads::PerSource(h) => &h[s.index()],
            MaskHeads::Shared(h) => h,
        }
    }

    fn activate(&self, m: Tensor) -> Tensor {
        match self.mask_activation {
            MaskActivation::Identity => m,
            MaskActivation::Sigmoid => sigmoid(&m),
        }
    }
}

/// Inputs of one level. Without `cu` only the equirect source is filtered.
#[derive(Clone, Debug)]
pub struct FrLevelInputs {
    pub decoder: Tensor,
    pub ep: Tensor,
    pub cu: Option<[Tensor; 4]>,
}

impl FrLevelInputs {
    fn sources(&self) -> Vec<(Source, &Tensor)> {
        let mut v: Vec<(Source, &Tensor)> = Vec::with_capacity(5);
        if let Some(cu) = &self.cu {
            v.extend(Source::ALL[..4].iter().copied().zip(cu.iter()));
        }
        v.push((Source::E, &self.ep));
        v
    }

    fn validate(&self) -> Result<()> {
        let s = self.ep.shape();
        if let Some(cu) = &self.cu {
            if let Some(bad) = cu.iter().find(|t| t.shape() != s) {
                return Err(Error::shape(format!(
                    "FR encoder features differ: {s} vs {}",
                    bad.shape()
                )));
            }
        }
        let d = self.decoder.shape();
        if 2 * d.height != s.height || 2 * d.width != s.width {
            return Err(Error::shape(format!(
                "FR decoder {d} must be half the encoder resolution {s}"
            )));
        }
        Ok(())
    }
}

pub fn enhance_decoder(fd: &Tensor, p: &FrParams) -> Result<Tensor> {
    let reduced = conv3x3(fd, &p.reduce)?;
    let a = conv3x3(&reduced, &p.mod_a)?;
    let b = conv3x3(&reduced, &p.mod_b)?;
    Ok(relu(&add(&hadamard(&a, &reduced)?, &b)?))
}

/// The source's filtration mask `FM_j`, at decoder resolution.
pub fn filtration_mask(fde: &Tensor, p: &FrParams, source: Source) -> Result<Tensor> {
    Ok(p.activate(conv3x3(fde, p.mask_head(source))?))
}

pub fn filter_encoder(fj: &Tensor, fde: &Tensor, p: &FrParams, source: Source) -> Result<Tensor> {
    if 2 * fde.height() != fj.height() || 2 * fde.width() != fj.width() {
        return Err(Error::shape(format!(
            "filter_encoder: decoder {} is not half of encoder {}",
            fde.shape(),
            fj.shape()
        )));
    }
    let mask = bilinear_upsample(&filtration_mask(fde, p, source)?, 2)?;
    hadamard(&mask, &conv3x3(fj, &p.encoder[source.index()])?)
}

fn aggregate_any(filtered: &[&Tensor], p: &FrParams) -> Result<Tensor> {
    let (first, rest) = filtered
        .split_first()
        .ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    let mut total = (*first).clone();
    for t in rest {
        total = add(&total, t)?;
    }
    Ok(relu(&conv3x3(&total, &p.aggregate)?))
}

/// Sums the five filtered features (C1, C2, C3, C4, E) and convolves.
pub fn aggregate_encoders(filtered: &[Tensor], p: &FrParams) -> Result<Tensor> {
    if filtered.len() != 5 {
        return Err(Error::invalid(format!(
            "aggregate_encoders needs 5 filtered features, got {}",
            filtered.len()
        )));
    }
    aggregate_any(&filtered.iter().collect::<Vec<_>>(), p)
}

pub fn detail_mask(fe: &Tensor, p: &FrParams) -> Result<Tensor> {
    Ok(p.activate(conv3x3(fe, &p.detail)?))
}

pub fn refine_decoder(fde: &Tensor, fe: &Tensor, p: &FrParams) -> Result<Tensor> {
    hadamard(&detail_mask(fe, p)?, &bilinear_upsample(fde, 2)?)
}

pub fn fr_fuse(fe: &Tensor, fdr: &Tensor, p: &FrParams) -> Result<Tensor> {
    Ok(relu(&conv3x3(&concat_channels(&[fe, fdr])?, &p.fuse)?))
}

pub fn fr_module(inputs: &FrLevelInputs, p: &FrParams) -> Result<Tensor> {
    fr_module_traced(inputs, p, "fr", &mut |_| {})
}

/// [`fr_module`] reporting each parameter group it touches as
/// `"{prefix}.{group}"`.
pub fn fr_module_traced(
    inputs: &FrLevelInputs,
    p: &FrParams,
    prefix: &str,
    trace: &mut dyn FnMut(&str),
) -> Result<Tensor> {
    inputs.validate()?;
    let fde = enhance_decoder(&inputs.decoder, p)?;
    trace(&format!("{prefix}.reduce"));
    trace(&format!("{prefix}.mod"));
    let sources = inputs.sources();
    let filtered: Vec<Tensor> = sources
        .par_iter()
        .map(|(s, t)| filter_encoder(t, &fde, p, *s))
        .collect::<Result<_>>()?;
    for (s, _) in &sources {
        match p.mask_heads {
            MaskHeads::PerSource(_) => trace(&format!("{prefix}.mask.{}", s.name())),
            MaskHeads::Shared(_) => trace(&format!("{prefix}.mask")),
        }
        trace(&format!("{prefix}.enc.{}", s.name()));
    }
    let fe = aggregate_any(&filtered.iter().collect::<Vec<_>>(), p)?;
    trace(&format!("{prefix}.aggregate"));
    let fdr = refine_decoder(&fde, &fe, p)?;
    trace(&format!("{prefix}.detail"));
    let out = fr_fuse(&fe, &fdr, p)?;
    trace(&format!("{prefix}.fuse"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn random(rng: &mut ParamRng, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(c, h, w, |_, _, _| rng.uniform(-1.0, 1.0))
    }

    fn params(seed: u64, cfg: FrConfig) -> FrParams {
        FrParams::generate(seed, "fr", 6, 5, 4, &cfg)
    }

    fn inputs(rng: &mut ParamRng) -> FrLevelInputs {
        FrLevelInputs {
            decoder: random(rng, 6, 3, 4),
            ep: random(rng, 5, 6, 8),
            cu: Some(std::array::from_fn(|_| random(rng, 5, 6, 8))),
        }
    }

    #[test]
    fn enhance_with_unit_modulation_is_relu_of_reduction() {
        let mut rng = ParamRng::new(1, "enh");
        let mut p = params(3, FrConfig::default());
        p.mod_a = ConvParams::constant(4, 4, 1.0);
        p.mod_b = ConvParams::constant(4, 4, 0.0);
        let fd = random(&mut rng, 6, 3, 4);
        let want = relu(&conv3x3(&fd, &p.reduce).unwrap());
        assert!(enhance_decoder(&fd, &p).unwrap().max_abs_diff(&want) < 1e-6);

        p.mod_a = ConvParams::constant(4, 4, 0.0);
        p.mod_b = ParamRng::new(4, "b").conv_params(4, 4);
        let reduced = conv3x3(&fd, &p.reduce).unwrap();
        let want = relu(&conv3x3(&reduced, &p.mod_b).unwrap());
        let got = enhance_decoder(&fd, &p).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-6);
        assert!(got.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn filter_mask_endpoints() {
        let mut rng = ParamRng::new(2, "filt");
        let mut p = params(5, FrConfig::default());
        let fde = random(&mut rng, 4, 3, 4);
        let fj = random(&mut rng, 5, 6, 8);
        p.mask_heads = MaskHeads::Shared(ConvParams::constant(4, 4, 0.0));
        let zero = filter_encoder(&fj, &fde, &p, Source::C2).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        p.mask_heads = MaskHeads::Shared(ConvParams::constant(4, 4, 1.0));
        let pass = filter_encoder(&fj, &fde, &p, Source::E).unwrap();
        let want = conv3x3(&fj, &p.encoder[Source::E.index()]).unwrap();
        assert!(pass.bit_eq(&want));
    }

    #[test]
    fn filter_matches_two_step_oracle() {
        let mut rng = ParamRng::new(3, "filt.or");
        for act in [MaskActivation::Identity, MaskActivation::Sigmoid] {
            let p = params(
                6,
                FrConfig {
                    mask_activation: act,
                    ..FrConfig::default()
                },
            );
            let fde = random(&mut rng, 4, 3, 4);
            let fj = random(&mut rng, 5, 6, 8);
            for s in Source::ALL {
                let got = filter_encoder(&fj, &fde, &p, s).unwrap();
                let want = oracle::filter_encoder_naive(&fj, &fde, &p, s);
                assert!(got.max_abs_diff(&want) < 1e-6);
            }
        }
    }

    #[test]
    fn aggregate_cases() {
        let mut rng = ParamRng::new(4, "agg");
        let p = params(7, FrConfig::default());
        let zeros: Vec<Tensor> = (0..5).map(|_| Tensor::zeros(4, 6, 8)).collect();
        let bias_map = relu(&conv3x3(&Tensor::zeros(4, 6, 8), &p.aggregate).unwrap());
        assert!(aggregate_encoders(&zeros, &p).unwrap().bit_eq(&bias_map));

        let mut one = zeros.clone();
        one[2] = random(&mut rng, 4, 6, 8);
        let single = relu(&conv3x3(&one[2], &p.aggregate).unwrap());
        assert!(aggregate_encoders(&one, &p).unwrap().max_abs_diff(&single) < 1e-6);
        assert!(aggregate_encoders(&one[..4], &p).is_err());
    }

    #[test]
    fn refine_mask_endpoints() {
        let mut rng = ParamRng::new(5, "ref");
        let mut p = params(8, FrConfig::default());
        let fde = random(&mut rng, 4, 3, 4);
        let fe = random(&mut rng, 4, 6, 8);
        p.detail = ConvParams::constant(4, 4, 1.0);
        let up = bilinear_upsample(&fde, 2).unwrap();
        assert!(refine_decoder(&fde, &fe, &p).unwrap().bit_eq(&up));
        p.detail = ConvParams::constant(4, 4, 0.0);
        assert!(refine_decoder(&fde, &fe, &p).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_inputs_give_bias_map_and_shapes_double() {
        let p = params(9, FrConfig::default());
        let inp = FrLevelInputs {
            decoder: Tensor::zeros(6, 3, 4),
            ep: Tensor::zeros(5, 6, 8),
            cu: Some(std::array::from_fn(|_| Tensor::zeros(5, 6, 8))),
        };
        let out = fr_module(&inp, &p).unwrap();
        assert_eq!((out.channels(), out.height(), out.width()), (4, 6, 8));
        let want = oracle::fr_module_naive(&inp, &p);
        assert!(out.max_abs_diff(&want) < 1e-6);
        assert!(out.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn module_matches_sequential_oracle() {
        let mut rng = ParamRng::new(6, "fr.or");
        for trial in 0..20u64 {
            let cfg = FrConfig {
                mask_activation: if trial % 2 == 0 {
                    MaskActivation::Identity
                } else {
                    MaskActivation::Sigmoid
                },
                shared_mask_head: trial % 3 == 0,
            };
            let p = params(100 + trial, cfg);
            let inp = inputs(&mut rng);
            let got = fr_module(&inp, &p).unwrap();
            assert!(got.max_abs_diff(&oracle::fr_module_naive(&inp, &p)) < 1e-6);
        }
    }

    #[test]
    fn suppression_is_monotone() {
        let mut rng = ParamRng::new(7, "mono");
        let p = params(10, FrConfig::default());
        let fde = random(&mut rng, 4, 3, 4);
        let fj = random(&mut rng, 5, 6, 8);
        let mut prev = filter_encoder(&fj, &fde, &p, Source::C3).unwrap();
        for k in [0.8f32, 0.5, 0.2, 0.0] {
            let mut q = p.clone();
            if let MaskHeads::PerSource(h) = &mut q.mask_heads {
                let head = &mut h[Source::C3.index()];
                head.kernel_mut().iter_mut().for_each(|w| *w *= k);
                head.bias_mut().iter_mut().for_each(|w| *w *= k);
            }
            let cur = filter_encoder(&fj, &fde, &q, Source::C3).unwrap();
            for (a, b) in cur.data().iter().zip(prev.data()) {
                assert!(a.abs() <= b.abs() + 1e-6);
            }
            prev = cur;
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = ParamRng::new(8, "bad");
        let p = params(11, FrConfig::default());
        let mut inp = inputs(&mut rng);
        inp.decoder = random(&mut rng, 6, 6, 8);
        assert!(fr_module(&inp, &p).is_err());
        let mut inp = inputs(&mut rng);
        inp.cu.as_mut().unwrap()[1] = random(&mut rng, 5, 6, 6);
        assert!(fr_module(&inp, &p).is_err());
    }

    #[test]
    fn ep_only_level_traces_no_cu_groups() {
        let mut rng = ParamRng::new(9, "trace");
        let p = params(12, FrConfig::default());
        let mut inp = inputs(&mut rng);
        inp.cu = None;
        let mut seen = Vec::new();
        fr_module_traced(&inp, &p, "fr.k4", &mut |n| seen.push(n.to_string())).unwrap();
        assert!(seen.iter().all(|n| !n.contains(".C")));
        assert!(seen.contains(&"fr.k4.mask.E".to_string()));
    }
}
