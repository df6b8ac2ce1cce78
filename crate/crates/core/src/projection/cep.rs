//! Cube-to-equirectangular projection for images and feature maps.

use super::unfold::{rotate_quarter, UnfoldingLayout};
use super::{CubeFaceSet, EquirectImage, Face, SamplingGrid};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Resamples six faces into a `height x 2·height` equirectangular tensor.
/// Each pixel reads only its owning face, clamped at the face border.
pub fn cube_to_ep(faces: &CubeFaceSet, height: usize) -> Result<Tensor> {
    let grid = SamplingGrid::cube_to_equirect(faces.side(), height)?;
    grid.sample_cube(faces.faces())
}

pub fn cube_to_ep_image(faces: &CubeFaceSet, height: usize) -> Result<EquirectImage> {
    EquirectImage::new(cube_to_ep(faces, height)?)
}

fn crop(t: &Tensor, y0: usize, x0: usize, side: usize) -> Tensor {
    Tensor::from_fn(t.channels(), side, side, |c, y, x| t.get(c, y0 + y, x0 + x))
}

/// Reassembles the six faces held by one unfolding's strips. The center
/// face appears in both strips; the two copies are averaged.
pub fn fold_strips(
    horizontal: &Tensor,
    vertical: &Tensor,
    layout: &UnfoldingLayout,
) -> Result<CubeFaceSet> {
    let a = horizontal.height();
    if horizontal.width() != 4 * a
        || vertical.width() != a
        || vertical.height() != 3 * a
        || vertical.channels() != horizontal.channels()
    {
        return Err(Error::shape(format!(
            "strips {} and {} are not (h, 4h) and (3h, h)",
            horizontal.shape(),
            vertical.shape()
        )));
    }
    let mut faces: [Option<Tensor>; 6] = Default::default();
    for (i, slot) in layout.horizontal.iter().enumerate() {
        if slot.face != layout.center {
            faces[slot.face.index()] = Some(rotate_quarter(
                &crop(horizontal, 0, i * a, a),
                slot.rotation.inverse(),
            ));
        }
    }
    for (i, slot) in layout.vertical.iter().enumerate() {
        if slot.face != layout.center {
            faces[slot.face.index()] = Some(rotate_quarter(
                &crop(vertical, i * a, 0, a),
                slot.rotation.inverse(),
            ));
        }
    }
    let from_h = crop(horizontal, 0, UnfoldingLayout::CENTER_SLOT * a, a);
    let from_v = crop(vertical, a, 0, a);
    faces[layout.center.index()] = Some(from_h.zip_map(&from_v, |p, q| 0.5 * (p + q))?);
    let faces = faces.map(|f| f.expect("a 4-3 layout covers every face"));
    debug_assert!(Face::ALL.iter().all(|f| faces[f.index()].height() == a));
    CubeFaceSet::new(faces)
}

/// Projects one unfolding's strip features back to equirectangular form.
pub fn cep_merge(
    horizontal: &Tensor,
    vertical: &Tensor,
    layout: &UnfoldingLayout,
    height: usize,
) -> Result<Tensor> {
    cube_to_ep(&fold_strips(horizontal, vertical, layout)?, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle;
    use crate::projection::geometry::{ep_pixel_direction, owning_face};
    use crate::projection::{ep_to_cube_tensor, psnr, unfold};
    use crate::rng::ParamRng;

    #[test]
    fn constant_faces_give_constant_ep() {
        let faces = CubeFaceSet::new(std::array::from_fn(|_| Tensor::filled(2, 6, 6, 0.3))).unwrap();
        let ep = cube_to_ep(&faces, 10).unwrap();
        assert_eq!((ep.height(), ep.width()), (10, 20));
        assert!(ep.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn ownership_matches_angular_classifier() {
        let (h, w) = (128, 256);
        for row in 0..h {
            for col in 0..w {
                let d = ep_pixel_direction(row, col, h, w);
                assert_eq!(owning_face(d), oracle::nearest_face_center(d), "({row},{col})");
            }
        }
    }

    #[test]
    fn grid_agrees_with_per_pixel_oracle() {
        let mut rng = ParamRng::new(9, "c2e");
        let faces = CubeFaceSet::new(std::array::from_fn(|_| {
            Tensor::from_fn(2, 5, 5, |_, _, _| rng.uniform(-1.0, 1.0))
        }))
        .unwrap();
        let fast = cube_to_ep(&faces, 12).unwrap();
        let slow = oracle::cube_to_ep_naive(faces.faces(), 12);
        assert!(fast.max_abs_diff(&slow) < 1e-6);
    }

    #[test]
    fn smooth_round_trip_psnr() {
        let ep = fixtures::smooth_equirect(256, 3);
        let faces = ep_to_cube_tensor(&ep, 128).unwrap();
        let back = cube_to_ep(&faces, 256).unwrap();
        assert!(psnr(&ep, &back).unwrap() >= 30.0);
    }

    #[test]
    fn fold_inverts_unfold() {
        let mut rng = ParamRng::new(10, "fold");
        let faces = CubeFaceSet::new(std::array::from_fn(|_| {
            Tensor::from_fn(3, 4, 4, |_, _, _| rng.uniform(-1.0, 1.0))
        }))
        .unwrap();
        for center in Face::RING {
            let pair = unfold(&faces, center).unwrap();
            let back = fold_strips(&pair.horizontal, &pair.vertical, &pair.layout).unwrap();
            assert_eq!(back, faces);
        }
    }

    #[test]
    fn merge_matches_hand_composition() {
        let mut rng = ParamRng::new(11, "merge");
        for layout in UnfoldingLayout::all() {
            let h = Tensor::from_fn(2, 4, 16, |_, _, _| rng.uniform(-1.0, 1.0));
            let v = Tensor::from_fn(2, 12, 4, |_, _, _| rng.uniform(-1.0, 1.0));
            let got = cep_merge(&h, &v, &layout, 8).unwrap();
            let want = oracle::cep_merge_naive(&h, &v, layout.center, 8);
            assert!(got.max_abs_diff(&want) < 1e-6);
        }
    }

    #[test]
    fn merge_of_constant_strips_is_constant() {
        let layout = UnfoldingLayout::new(Face::L).unwrap();
        let ep = cep_merge(
            &Tensor::filled(1, 3, 12, 0.8),
            &Tensor::filled(1, 9, 3, 0.8),
            &layout,
            6,
        )
        .unwrap();
        assert!(ep.data().iter().all(|&v| v == 0.8));
    }

    #[test]
    fn merge_rejects_bad_aspect() {
        let layout = UnfoldingLayout::new(Face::F).unwrap();
        assert!(cep_merge(&Tensor::zeros(1, 3, 11), &Tensor::zeros(1, 9, 3), &layout, 6).is_err());
        assert!(cep_merge(&Tensor::zeros(1, 3, 12), &Tensor::zeros(1, 8, 3), &layout, 6).is_err());
    }
}
