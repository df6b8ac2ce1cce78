//! Sphere <-> plane resampling.
//!
//! Face side defaults to a quarter of the equirectangular width, so a
//! 1024x512 panorama yields 256x256 faces.

mod cep;
pub mod geometry;
mod grid;
mod unfold;

pub use cep::{cep_merge, cube_to_ep, cube_to_ep_image, fold_strips};
pub use geometry::Face;
pub use grid::{GridKind, SamplingGrid, Tap, OMG_MAGIC};
pub use unfold::{render_43_canvas, rotate_quarter, unfold, CuPair, Rotation, Slot, Strip, UnfoldingLayout};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Six square rasters sharing one side length and channel count, stored in
/// [`Face::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeFaceSet {
    faces: [Tensor; 6],
}

impl CubeFaceSet {
    pub fn new(faces: [Tensor; 6]) -> Result<Self> {
        let s = faces[0].shape();
        if s.height != s.width {
            return Err(Error::shape(format!("cube faces must be square, got {s}")));
        }
        if let Some(f) = faces.iter().find(|f| f.shape() != s) {
            return Err(Error::shape(format!(
                "cube faces differ: {s} vs {}",
                f.shape()
            )));
        }
        Ok(CubeFaceSet { faces })
    }

    pub fn side(&self) -> usize {
        self.faces[0].height()
    }

    pub fn channels(&self) -> usize {
        self.faces[0].channels()
    }

    pub fn face(&self, f: Face) -> &Tensor {
        &self.faces[f.index()]
    }

    pub fn faces(&self) -> &[Tensor; 6] {
        &self.faces
    }

    pub fn into_faces(self) -> [Tensor; 6] {
        self.faces
    }

    pub fn map(&self, f: impl Fn(&Tensor) -> Tensor) -> Result<CubeFaceSet> {
        CubeFaceSet::new(std::array::from_fn(|i| f(&self.faces[i])))
    }
}

/// A displayable equirectangular image: 1 or 3 channels, width twice the
/// height, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquirectImage(Tensor);

impl EquirectImage {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.channels() != 1 && t.channels() != 3 {
            return Err(Error::invalid(format!(
                "equirect images have 1 or 3 channels, got {}",
                t.channels()
            )));
        }
        check_equirect_aspect(t.height(), t.width())?;
        if !t.data().iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("equirect pixel values must lie in [0, 1]"));
        }
        Ok(EquirectImage(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    /// Face side matching this image: a quarter of the width.
    pub fn default_face_side(&self) -> usize {
        self.0.width() / 4
    }
}

pub fn check_equirect_aspect(height: usize, width: usize) -> Result<()> {
    if width != 2 * height {
        return Err(Error::invalid(format!(
            "equirect width must be twice the height, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Extracts six `a x a` faces from any equirectangular tensor
/// (images or feature maps).
pub fn ep_to_cube_tensor(ep: &Tensor, a: usize) -> Result<CubeFaceSet> {
    check_equirect_aspect(ep.height(), ep.width())?;
    let grid = SamplingGrid::equirect_to_cube(ep.height(), a)?;
    CubeFaceSet::new(grid.sample_equirect(ep)?)
}

pub fn ep_to_cube(ep: &EquirectImage, a: usize) -> Result<CubeFaceSet> {
    ep_to_cube_tensor(ep.tensor(), a)
}

/// Rolls an equirectangular tensor `shift` columns to the right, i.e. a yaw
/// of `shift * 360 / width` degrees toward increasing longitude.
pub fn roll_columns(t: &Tensor, shift: isize) -> Tensor {
    let w = t.width() as isize;
    Tensor::from_fn(t.channels(), t.height(), t.width(), |c, y, x| {
        t.get(c, y, (x as isize - shift).rem_euclid(w) as usize)
    })
}

/// Peak signal-to-noise ratio in dB for signals with unit peak. Identical
/// inputs return `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.expect_shape(b.shape())?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::ParamRng;

    #[test]
    fn constant_ep_gives_constant_faces() {
        let ep = EquirectImage::new(Tensor::filled(3, 16, 32, 0.4)).unwrap();
        let faces = ep_to_cube(&ep, 8).unwrap();
        for f in faces.faces() {
            assert!(f.data().iter().all(|&v| v == 0.4));
        }
    }

    #[test]
    fn faces_stay_within_input_range() {
        let mut rng = ParamRng::new(3, "range");
        let ep = Tensor::from_fn(1, 12, 24, |_, _, _| rng.uniform(0.2, 0.7));
        let faces = ep_to_cube_tensor(&ep, 7).unwrap();
        let (lo, hi) = (ep.min(), ep.max());
        for f in faces.faces() {
            assert!(f.min() >= lo && f.max() <= hi);
        }
        let back = cube_to_ep(&faces, 12).unwrap();
        assert!(back.min() >= faces.faces().iter().map(|f| f.min()).fold(1.0, f32::min));
        assert!(back.max() <= faces.faces().iter().map(|f| f.max()).fold(0.0, f32::max));
    }

    #[test]
    fn matches_per_pixel_oracle() {
        let mut rng = ParamRng::new(4, "ep");
        let ep = Tensor::from_fn(2, 10, 20, |_, _, _| rng.uniform(0.0, 1.0));
        let faces = ep_to_cube_tensor(&ep, 6).unwrap();
        let naive = crate::oracle::ep_to_cube_naive(&ep, 6);
        for (a, b) in faces.faces().iter().zip(&naive) {
            assert!(a.max_abs_diff(b) < 1e-6);
        }
    }

    #[test]
    fn aspect_and_channel_validation() {
        assert!(EquirectImage::new(Tensor::zeros(1, 10, 10)).is_err());
        assert!(EquirectImage::new(Tensor::zeros(2, 10, 20)).is_err());
        assert!(EquirectImage::new(Tensor::filled(1, 10, 20, 1.5)).is_err());
        assert!(ep_to_cube_tensor(&Tensor::zeros(1, 4, 8), 1).is_err());
    }

    #[test]
    fn yaw_rotation_relabels_ring_faces() {
        let ep = fixtures::smooth_equirect(32, 1);
        let a = 16;
        let base = ep_to_cube_tensor(&ep, a).unwrap();
        for k in 1..4usize {
            let rolled = roll_columns(&ep, (k * ep.width() / 4) as isize);
            let faces = ep_to_cube_tensor(&rolled, a).unwrap();
            for (i, &f) in Face::RING.iter().enumerate() {
                let moved = Face::RING[(i + k) % 4];
                assert!(faces.face(moved).max_abs_diff(base.face(f)) < 1e-6, "k={k} {f}");
            }
            // Yaw turns the T face counter-clockwise and the D face clockwise.
            let t = rotate_quarter(base.face(Face::T), Rotation::clockwise(4 - k));
            assert!(faces.face(Face::T).max_abs_diff(&t) < 1e-6, "T k={k}");
            let d = rotate_quarter(base.face(Face::D), Rotation::clockwise(k));
            assert!(faces.face(Face::D).max_abs_diff(&d) < 1e-6, "D k={k}");
        }
    }

    #[test]
    fn psnr_basics() {
        let a = Tensor::filled(1, 2, 2, 0.5);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Tensor::filled(1, 2, 2, 0.6);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
    }
}
