//! Precomputed bilinear remapping tables and the `OMG1` cache format.
//!
//! `OMG1` layout, all little-endian:
//!
//! | size  | field                                                     |
//! |-------|-----------------------------------------------------------|
//! | 4     | magic `b"OMG1"`                                           |
//! | 4     | kind: 0 = equirect -> cube, 1 = cube -> equirect (u32)    |
//! | 4     | source raster height (u32)                                |
//! | 4     | source raster width (u32)                                 |
//! | 4     | destination planes (u32): 6 for cube faces, 1 for equirect|
//! | 4     | destination height (u32)                                  |
//! | 4     | destination width (u32)                                   |
//! | 49·N  | one record per destination pixel, `[plane][y][x]` order   |
//!
//! Each record is a source face byte (0..=5 in F, B, L, R, T, D order, or
//! 0xFF when the source is the equirectangular raster), four u32 flat
//! indices `y * src_width + x` into the source raster, and four f64 weights
//! for those taps.

use std::path::Path;

use rayon::prelude::*;

use super::geometry::{
    direction_to_lonlat, ep_pixel_direction, face_pixel_direction, lonlat_to_ep_xy, owning_face,
    plane_to_pixel, project_to_face, Face,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const OMG_MAGIC: &[u8; 4] = b"OMG1";
const HEADER_LEN: usize = 28;
const RECORD_LEN: usize = 1 + 4 * 4 + 4 * 8;
const NO_FACE: u8 = 0xFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    EquirectToCube,
    CubeToEquirect,
}

/// Four bilinear taps for one destination pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub face: Option<Face>,
    pub index: [u32; 4],
    pub weight: [f64; 4],
}

impl Tap {
    #[inline]
    fn apply(&self, src: &[f32]) -> f32 {
        let mut acc = 0.0f64;
        for k in 0..4 {
            acc += self.weight[k] * src[self.index[k] as usize] as f64;
        }
        acc as f32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid {
    kind: GridKind,
    src_height: usize,
    src_width: usize,
    dst_planes: usize,
    dst_height: usize,
    dst_width: usize,
    taps: Vec<Tap>,
}

/// Bilinear taps into an equirectangular raster: columns wrap around the
/// date line, rows clamp at the poles.
fn equirect_tap(lon: f64, lat: f64, height: usize, width: usize) -> Tap {
    let (x, y) = lonlat_to_ep_xy(lon, lat, height, width);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let w = width as i64;
    let col = |c: i64| c.rem_euclid(w) as u32;
    let row = |r: i64| r.clamp(0, height as i64 - 1) as u32;
    let (c0, c1) = (col(x0 as i64), col(x0 as i64 + 1));
    let (r0, r1) = (row(y0 as i64), row(y0 as i64 + 1));
    let wu = width as u32;
    Tap {
        face: None,
        index: [r0 * wu + c0, r0 * wu + c1, r1 * wu + c0, r1 * wu + c1],
        weight: [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ],
    }
}

/// Bilinear taps inside one face with clamp-to-edge.
fn face_tap(face: Face, u: f64, v: f64, a: usize) -> Tap {
    let edge = (a - 1) as f64;
    let x = plane_to_pixel(u, a).clamp(0.0, edge);
    let y = plane_to_pixel(v, a).clamp(0.0, edge);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(a - 1), (y0 + 1).min(a - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let idx = |r: usize, c: usize| (r * a + c) as u32;
    Tap {
        face: Some(face),
        index: [idx(y0, x0), idx(y0, x1), idx(y1, x0), idx(y1, x1)],
        weight: [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ],
    }
}

impl SamplingGrid {
    /// Grid that fills six `a x a` faces from a `height x 2·height`
    /// equirectangular raster.
    pub fn equirect_to_cube(height: usize, a: usize) -> Result<Self> {
        if height < 2 || a < 2 {
            return Err(Error::invalid(format!(
                "equirect->cube needs height >= 2 and face side >= 2, got {height} and {a}"
            )));
        }
        let width = 2 * height;
        let plane = a * a;
        let taps = (0..6 * plane)
            .into_par_iter()
            .map(|i| {
                let face = Face::ALL[i / plane];
                let (row, col) = ((i % plane) / a, i % a);
                let (lon, lat) = direction_to_lonlat(face_pixel_direction(face, row, col, a));
                equirect_tap(lon, lat, height, width)
            })
            .collect();
        Ok(SamplingGrid {
            kind: GridKind::EquirectToCube,
            src_height: height,
            src_width: width,
            dst_planes: 6,
            dst_height: a,
            dst_width: a,
            taps,
        })
    }

    /// Grid that fills a `height x 2·height` equirectangular raster from six
    /// `a x a` faces. Each pixel samples only its owning face.
    pub fn cube_to_equirect(a: usize, height: usize) -> Result<Self> {
        if height < 1 || a < 1 {
            return Err(Error::invalid(format!(
                "cube->equirect needs positive extents, got face {a} and height {height}"
            )));
        }
        let width = 2 * height;
        let taps = (0..height * width)
            .into_par_iter()
            .map(|i| {
                let d = ep_pixel_direction(i / width, i % width, height, width);
                let face = owning_face(d);
                let (u, v) = project_to_face(face, d);
                face_tap(face, u, v, a)
            })
            .collect();
        Ok(SamplingGrid {
            kind: GridKind::CubeToEquirect,
            src_height: a,
            src_width: a,
            dst_planes: 1,
            dst_height: height,
            dst_width: width,
            taps,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.src_height, self.src_width)
    }

    /// `(planes, height, width)` of the destination.
    pub fn destination_dims(&self) -> (usize, usize, usize) {
        (self.dst_planes, self.dst_height, self.dst_width)
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Resamples a multi-channel equirectangular tensor into six faces.
    pub fn sample_equirect(&self, ep: &Tensor) -> Result<[Tensor; 6]> {
        if self.kind != GridKind::EquirectToCube {
            return Err(Error::invalid("grid does not sample equirectangular input"));
        }
        if ep.height() != self.src_height || ep.width() != self.src_width {
            return Err(Error::shape(format!(
                "grid expects a {}x{} equirect raster, got {}",
                self.src_height,
                self.src_width,
                ep.shape()
            )));
        }
        let a = self.dst_height;
        let plane = a * a;
        Ok(std::array::from_fn(|f| {
            let taps = &self.taps[f * plane..(f + 1) * plane];
            let mut face = Tensor::zeros(ep.channels(), a, a);
            face.data_mut()
                .par_chunks_mut(plane)
                .enumerate()
                .for_each(|(c, dst)| {
                    let src = ep.channel(c);
                    for (d, tap) in dst.iter_mut().zip(taps) {
                        *d = tap.apply(src);
                    }
                });
            face
        }))
    }

    /// Resamples six faces (indexed in [`Face::ALL`] order) into an
    /// equirectangular tensor.
    pub fn sample_cube(&self, faces: &[Tensor; 6]) -> Result<Tensor> {
        if self.kind != GridKind::CubeToEquirect {
            return Err(Error::invalid("grid does not sample cube faces"));
        }
        let shape = faces[0].shape();
        if shape.height != self.src_height || shape.width != self.src_width {
            return Err(Error::shape(format!(
                "grid expects {0}x{0} faces, got {shape}",
                self.src_height
            )));
        }
        if faces.iter().any(|f| f.shape() != shape) {
            return Err(Error::shape("cube faces differ in shape"));
        }
        let plane = self.dst_height * self.dst_width;
        let mut out = Tensor::zeros(shape.channels, self.dst_height, self.dst_width);
        out.data_mut()
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(c, dst)| {
                let srcs: [&[f32]; 6] = std::array::from_fn(|f| faces[f].channel(c));
                for (d, tap) in dst.iter_mut().zip(&self.taps) {
                    let face = tap.face.expect("cube grid taps carry a face");
                    *d = tap.apply(srcs[face.index()]);
                }
            });
        Ok(out)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.taps.len());
        out.extend_from_slice(OMG_MAGIC);
        let kind = match self.kind {
            GridKind::EquirectToCube => 0u32,
            GridKind::CubeToEquirect => 1,
        };
        for v in [
            kind,
            self.src_height as u32,
            self.src_width as u32,
            self.dst_planes as u32,
            self.dst_height as u32,
            self.dst_width as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for tap in &self.taps {
            out.push(tap.face.map_or(NO_FACE, |f| f.index() as u8));
            for i in tap.index {
                out.extend_from_slice(&i.to_le_bytes());
            }
            for w in tap.weight {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "OMG1";
        let bad = |reason: String| Error::format(FMT, reason);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != OMG_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let kind = match word(0) {
            0 => GridKind::EquirectToCube,
            1 => GridKind::CubeToEquirect,
            k => return Err(bad(format!("unknown grid kind {k}"))),
        };
        let [src_height, src_width, dst_planes, dst_height, dst_width] =
            [1, 2, 3, 4, 5].map(|i| word(i) as usize);
        if [src_height, src_width, dst_planes, dst_height, dst_width].contains(&0) {
            return Err(bad("zero extent".into()));
        }
        let consistent = match kind {
            GridKind::EquirectToCube => {
                dst_planes == 6 && dst_height == dst_width && src_width == 2 * src_height
            }
            GridKind::CubeToEquirect => {
                dst_planes == 1 && src_height == src_width && dst_width == 2 * dst_height
            }
        };
        if !consistent {
            return Err(bad(format!(
                "inconsistent extents src {src_height}x{src_width}, dst {dst_planes}x{dst_height}x{dst_width}"
            )));
        }
        let count = dst_planes
            .checked_mul(dst_height)
            .and_then(|n| n.checked_mul(dst_width))
            .ok_or_else(|| bad("pixel count overflows".into()))?;
        let src_len = (src_height as u64) * (src_width as u64);
        let body = &bytes[HEADER_LEN..];
        if count.checked_mul(RECORD_LEN) != Some(body.len()) {
            return Err(bad(format!(
                "{count} records need {} bytes, found {}",
                count.saturating_mul(RECORD_LEN),
                body.len()
            )));
        }
        let taps = body
            .chunks_exact(RECORD_LEN)
            .enumerate()
            .map(|(n, rec)| {
                let face = match (kind, rec[0]) {
                    (GridKind::EquirectToCube, NO_FACE) => None,
                    (GridKind::CubeToEquirect, f) if (f as usize) < 6 => Face::from_index(f as usize),
                    (_, f) => return Err(bad(format!("record {n}: invalid face byte {f}"))),
                };
                let index: [u32; 4] = std::array::from_fn(|k| {
                    u32::from_le_bytes(rec[1 + 4 * k..5 + 4 * k].try_into().unwrap())
                });
                let weight: [f64; 4] = std::array::from_fn(|k| {
                    f64::from_le_bytes(rec[17 + 8 * k..25 + 8 * k].try_into().unwrap())
                });
                if index.iter().any(|&i| i as u64 >= src_len) {
                    return Err(bad(format!("record {n}: index out of range")));
                }
                if weight.iter().any(|w| !w.is_finite() || *w < 0.0)
                    || (weight.iter().sum::<f64>() - 1.0).abs() > 1e-6
                {
                    return Err(bad(format!("record {n}: weights are not a convex combination")));
                }
                Ok(Tap {
                    face,
                    index,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplingGrid {
            kind,
            src_height,
            src_width,
            dst_planes,
            dst_height,
            dst_width,
            taps,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights_are_convex() {
        for grid in [
            SamplingGrid::equirect_to_cube(16, 8).unwrap(),
            SamplingGrid::cube_to_equirect(8, 16).unwrap(),
        ] {
            for tap in grid.taps() {
                assert!(tap.weight.iter().all(|&w| w >= 0.0));
                assert!((tap.weight.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let grid = SamplingGrid::cube_to_equirect(4, 6).unwrap();
        let decoded = SamplingGrid::decode(&grid.encode()).unwrap();
        assert_eq!(decoded, grid);
        let grid = SamplingGrid::equirect_to_cube(6, 3).unwrap();
        assert_eq!(SamplingGrid::decode(&grid.encode()).unwrap(), grid);
    }

    #[test]
    fn rebuilt_grids_are_identical() {
        assert_eq!(
            SamplingGrid::equirect_to_cube(32, 16).unwrap(),
            SamplingGrid::equirect_to_cube(32, 16).unwrap()
        );
    }

    #[test]
    fn decode_rejects_corruption() {
        let bytes = SamplingGrid::cube_to_equirect(2, 2).unwrap().encode();
        assert!(SamplingGrid::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut face = bytes.clone();
        face[HEADER_LEN] = 9;
        assert!(SamplingGrid::decode(&face).is_err());
        let mut idx = bytes.clone();
        idx[HEADER_LEN + 1..HEADER_LEN + 5].copy_from_slice(&100u32.to_le_bytes());
        assert!(SamplingGrid::decode(&idx).is_err());
        let mut wgt = bytes.clone();
        wgt[HEADER_LEN + 17..HEADER_LEN + 25].copy_from_slice(&0.75f64.to_le_bytes());
        assert!(SamplingGrid::decode(&wgt).is_err());
        let mut kind = bytes;
        kind[4] = 7;
        assert!(SamplingGrid::decode(&kind).is_err());
    }

    #[test]
    fn degenerate_dims_are_rejected() {
        assert!(SamplingGrid::equirect_to_cube(1, 4).is_err());
        assert!(SamplingGrid::equirect_to_cube(4, 1).is_err());
        assert!(SamplingGrid::cube_to_equirect(0, 4).is_err());
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = SamplingGrid::decode(&bytes);
        }

        #[test]
        fn decode_survives_header_mutation(pos in 0usize..HEADER_LEN, byte in any::<u8>()) {
            let mut bytes = SamplingGrid::equirect_to_cube(2, 2).unwrap().encode();
            bytes[pos] = byte;
            let _ = SamplingGrid::decode(&bytes);
        }
    }
}
