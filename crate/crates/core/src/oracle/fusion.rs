use super::{concat_naive, conv3x3_naive, elementwise, se_block_naive, se_gate_naive, sigmoid_naive, upsample_naive};
use crate::dwf::{DwfParams, GefParams};
use crate::fr::{FrLevelInputs, FrParams, MaskActivation, Source};
use crate::tensor::{SeParams, Tensor};

fn sigmoid_all(t: &Tensor) -> Tensor {
    t.map(|v| sigmoid_naive(v as f64) as f32)
}

fn relu_all(t: &Tensor) -> Tensor {
    t.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// `(P, F)` for one unfolding, computed directly from the gating definition.
pub fn gef_naive(fe: &Tensor, fc: &Tensor, p: &GefParams) -> (Tensor, Tensor) {
    let cat = concat_naive(&[fe, fc]);
    let mask = sigmoid_all(&conv3x3_naive(&se_block_naive(&cat, &p.se), &p.conv));
    let mut fused = fe.clone();
    for c in 0..fe.channels() {
        for y in 0..fe.height() {
            for x in 0..fe.width() {
                let m = mask.get(if mask.channels() == 1 { 0 } else { c }, y, x) as f64;
                let v = m * fc.get(c, y, x) as f64 + (1.0 - m) * fe.get(c, y, x) as f64;
                fused.set(c, y, x, v as f32);
            }
        }
    }
    (mask, fused)
}

pub fn waf_weights_naive(fcs: &[Tensor], p: &SeParams) -> [f64; 4] {
    let refs: Vec<&Tensor> = fcs.iter().collect();
    let alpha = se_gate_naive(&concat_naive(&refs), p);
    let c = fcs[0].channels();
    let mut sums = [0.0; 4];
    for (i, a) in alpha.iter().enumerate() {
        sums[i / c] += a;
    }
    let total: f64 = sums.iter().sum();
    [sums[0] / total, sums[1] / total, sums[2] / total, sums[3] / total]
}

pub fn dwf_fuse_naive(fe: &Tensor, fcs: &[Tensor], p: &DwfParams) -> Tensor {
    let fused: Vec<Tensor> = (0..4).map(|i| gef_naive(fe, &fcs[i], p.gef_for(i)).1).collect();
    let w = waf_weights_naive(fcs, &p.waf);
    let mut out = fe.clone();
    for c in 0..fe.channels() {
        for y in 0..fe.height() {
            for x in 0..fe.width() {
                let mut v = fe.get(c, y, x) as f64;
                for i in 0..4 {
                    v += w[i] * fused[i].get(c, y, x) as f64;
                }
                out.set(c, y, x, v as f32);
            }
        }
    }
    out
}

fn activate(t: Tensor, p: &FrParams) -> Tensor {
    match p.mask_activation {
        MaskActivation::Identity => t,
        MaskActivation::Sigmoid => sigmoid_all(&t),
    }
}

pub fn filter_encoder_naive(fj: &Tensor, fde: &Tensor, p: &FrParams, s: Source) -> Tensor {
    let mask = activate(conv3x3_naive(fde, p.mask_head(s)), p);
    let up = upsample_naive(&mask, 2);
    let enc = conv3x3_naive(fj, &p.encoder[s.index()]);
    elementwise(&up, &enc, |a, b| a * b)
}

/// One FR level evaluated step by step.
pub fn fr_module_naive(inputs: &FrLevelInputs, p: &FrParams) -> Tensor {
    // Enhance the previous decoder feature.
    let reduced = conv3x3_naive(&inputs.decoder, &p.reduce);
    let a = conv3x3_naive(&reduced, &p.mod_a);
    let b = conv3x3_naive(&reduced, &p.mod_b);
    let ax = elementwise(&a, &reduced, |a, x| a * x);
    let fde = relu_all(&elementwise(&ax, &b, |u, v| u + v));

    // Filter each encoder source, then aggregate in C1..C4, E order.
    let mut sources: Vec<(Source, &Tensor)> = Vec::new();
    if let Some(cu) = &inputs.cu {
        for (i, t) in cu.iter().enumerate() {
            sources.push((Source::ALL[i], t));
        }
    }
    sources.push((Source::E, &inputs.ep));
    let mut total: Option<Tensor> = None;
    for (s, t) in sources {
        let f = filter_encoder_naive(t, &fde, p, s);
        total = Some(match total {
            None => f,
            Some(acc) => elementwise(&acc, &f, |u, v| u + v),
        });
    }
    let fe = relu_all(&conv3x3_naive(&total.unwrap(), &p.aggregate));

    // Refine the decoder feature with the detail mask and fuse.
    let dm = activate(conv3x3_naive(&fe, &p.detail), p);
    let fdr = elementwise(&dm, &upsample_naive(&fde, 2), |m, d| m * d);
    relu_all(&conv3x3_naive(&concat_naive(&[&fe, &fdr]), &p.fuse))
}
