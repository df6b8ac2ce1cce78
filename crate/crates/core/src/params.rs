//! Parameter dumps: one OMT1 file per tensor plus `manifest.json`.
//!
//! Convolution kernels are stored as `(out, in, 9)`, linear weights as
//! `(1, out, in)` and biases as `(1, 1, n)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::dwf::GefSet;
use crate::error::{Error, Result};
use crate::fr::{MaskHeads, Source};
use crate::pipeline::{ModelParams, FR_LEVELS};
use crate::tensor::{read_omt, write_omt, ConvParams, Linear, SeParams, Shape, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub shape: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

fn valid_file_name(f: &str) -> bool {
    !f.is_empty()
        && !f.starts_with('.')
        && f.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

impl Manifest {
    /// Parses and validates a manifest: known version, unique names,
    /// plain file names without directory components, nonzero shapes.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::format(
                "manifest",
                format!("unsupported version {}", m.version),
            ));
        }
        let mut names = BTreeSet::new();
        let mut files = BTreeSet::new();
        for e in &m.entries {
            if !names.insert(e.name.as_str()) {
                return Err(Error::format("manifest", format!("duplicate entry `{}`", e.name)));
            }
            if !files.insert(e.file.as_str()) {
                return Err(Error::format("manifest", format!("file `{}` listed twice", e.file)));
            }
            if !valid_file_name(&e.file) {
                return Err(Error::format("manifest", format!("bad file name `{}`", e.file)));
            }
            if e.shape.contains(&0) {
                return Err(Error::format("manifest", format!("empty shape for `{}`", e.name)));
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

type Visitor<'a> = dyn FnMut(&str, Shape, &mut [f32]) -> Result<()> + 'a;

fn visit_conv(prefix: &str, p: &mut ConvParams, f: &mut Visitor) -> Result<()> {
    let (o, i) = (p.out_channels(), p.in_channels());
    f(&format!("{prefix}.weight"), Shape::new(o, i, 9), p.kernel_mut())?;
    f(&format!("{prefix}.bias"), Shape::new(1, 1, o), p.bias_mut())
}

fn visit_linear(prefix: &str, p: &mut Linear, f: &mut Visitor) -> Result<()> {
    let (o, i) = (p.out_features(), p.in_features());
    f(&format!("{prefix}.weight"), Shape::new(1, o, i), p.weight_mut())?;
    f(&format!("{prefix}.bias"), Shape::new(1, 1, o), p.bias_mut())
}

fn visit_se(prefix: &str, p: &mut SeParams, f: &mut Visitor) -> Result<()> {
    visit_linear(&format!("{prefix}.squeeze"), &mut p.squeeze, f)?;
    visit_linear(&format!("{prefix}.excite"), &mut p.excite, f)
}

/// Calls `f` on every tensor of the model with its stable name.
pub fn visit_params(p: &mut ModelParams, f: &mut Visitor) -> Result<()> {
    for (s, c) in p.encoder.stages.iter_mut().enumerate() {
        visit_conv(&format!("encoder.{}", s + 1), c, f)?;
    }
    if let Some(cu) = &mut p.cu_encoder {
        for (s, c) in cu.stages.iter_mut().enumerate() {
            visit_conv(&format!("cu_encoder.{}", s + 1), c, f)?;
        }
    }
    match &mut p.dwf.gef {
        GefSet::Shared(g) => {
            visit_se("dwf.gef.se", &mut g.se, f)?;
            visit_conv("dwf.gef.conv", &mut g.conv, f)?;
        }
        GefSet::PerBranch(gs) => {
            for (i, g) in gs.iter_mut().enumerate() {
                visit_se(&format!("dwf.gef.{}.se", i + 1), &mut g.se, f)?;
                visit_conv(&format!("dwf.gef.{}.conv", i + 1), &mut g.conv, f)?;
            }
        }
    }
    visit_se("dwf.waf", &mut p.dwf.waf, f)?;
    for (i, fr) in p.fr.iter_mut().enumerate() {
        let k = FR_LEVELS[i];
        visit_conv(&format!("fr{k}.reduce"), &mut fr.reduce, f)?;
        visit_conv(&format!("fr{k}.mod_a"), &mut fr.mod_a, f)?;
        visit_conv(&format!("fr{k}.mod_b"), &mut fr.mod_b, f)?;
        match &mut fr.mask_heads {
            MaskHeads::PerSource(hs) => {
                for (s, h) in Source::ALL.iter().zip(hs.iter_mut()) {
                    visit_conv(&format!("fr{k}.mask.{}", s.name()), h, f)?;
                }
            }
            MaskHeads::Shared(h) => visit_conv(&format!("fr{k}.mask"), h, f)?,
        }
        for (s, c) in Source::ALL.iter().zip(fr.encoder.iter_mut()) {
            visit_conv(&format!("fr{k}.enc.{}", s.name()), c, f)?;
        }
        visit_conv(&format!("fr{k}.aggregate"), &mut fr.aggregate, f)?;
        visit_conv(&format!("fr{k}.detail"), &mut fr.detail, f)?;
        visit_conv(&format!("fr{k}.fuse"), &mut fr.fuse, f)?;
    }
    for (i, c) in p.concat_fr.iter_mut().enumerate() {
        visit_conv(&format!("fr{}.concat", FR_LEVELS[i]), c, f)?;
    }
    for (i, c) in p.heads.iter_mut().enumerate() {
        visit_conv(&format!("head{}", FR_LEVELS[i]), c, f)?;
    }
    Ok(())
}

/// Every tensor of the model in visiting order.
pub fn named_tensors(p: &ModelParams) -> Vec<(String, Tensor)> {
    let mut copy = p.clone();
    let mut out = Vec::new();
    visit_params(&mut copy, &mut |name, s, data| {
        out.push((
            name.to_owned(),
            Tensor::new(s.channels, s.height, s.width, data.to_vec())?,
        ));
        Ok(())
    })
    .expect("parameter shapes are consistent");
    out
}

/// Writes every tensor and the manifest into `dir` (created if needed).
pub fn dump_params(dir: impl AsRef<Path>, p: &ModelParams, seed: Option<u64>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (name, t) in named_tensors(p) {
        let file = format!("{name}.omt");
        write_omt(dir.join(&file), &t)?;
        let s = t.shape();
        entries.push(ManifestEntry {
            name,
            file,
            shape: [s.channels, s.height, s.width],
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed,
        entries,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Overwrites `p` with the tensors stored in `dir`. Every tensor of `p`
/// must be listed with a matching shape, and nothing else may be listed.
pub fn load_params(dir: impl AsRef<Path>, p: &mut ModelParams) -> Result<()> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = Manifest::from_json(&text)?;
    let mut by_name: BTreeMap<&str, &ManifestEntry> =
        manifest.entries.iter().map(|e| (e.name.as_str(), e)).collect();
    visit_params(p, &mut |name, shape, data| {
        let entry = by_name
            .remove(name)
            .ok_or_else(|| Error::format("manifest", format!("missing parameter `{name}`")))?;
        let want = [shape.channels, shape.height, shape.width];
        if entry.shape != want {
            return Err(Error::shape(format!(
                "parameter `{name}`: manifest says {:?}, model needs {want:?}",
                entry.shape
            )));
        }
        let t = read_omt(dir.join(&entry.file))?;
        t.expect_shape(shape)?;
        data.copy_from_slice(t.data());
        Ok(())
    })?;
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::format(
            "manifest",
            format!("parameter `{extra}` is not part of this model"),
        ));
    }
    Ok(())
}
