//! 4-3 cube unfolding.
//!
//! For a center face on the equatorial ring the horizontal strip is
//! `[west neighbour, center, east neighbour, antipode]` (center in slot 1)
//! and the vertical strip is `[T, center, D]`. T and D are turned in-plane
//! so that the edge they share with the center face is continuous: with the
//! center at ring position `k` (F=0, R=1, B=2, L=3) T turns `k` quarter
//! turns clockwise and D `k` quarter turns counter-clockwise.

use super::geometry::{face_pixel_direction, Face, Vec3};
use super::CubeFaceSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// In-plane rotation in clockwise quarter turns (0..=3).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rotation(u8);

impl Rotation {
    pub const NONE: Rotation = Rotation(0);

    pub fn clockwise(quarter_turns: usize) -> Self {
        Rotation((quarter_turns % 4) as u8)
    }

    pub fn quarter_turns(self) -> usize {
        self.0 as usize
    }

    pub fn inverse(self) -> Self {
        Rotation((4 - self.0) % 4)
    }

    pub fn degrees(self) -> u32 {
        90 * self.0 as u32
    }
}

/// Pixel of the unrotated raster that lands at `(row, col)` after rotating
/// `rot` clockwise.
#[inline]
fn source_pixel(row: usize, col: usize, rot: Rotation, a: usize) -> (usize, usize) {
    match rot.0 {
        0 => (row, col),
        1 => (a - 1 - col, row),
        2 => (a - 1 - row, a - 1 - col),
        _ => (col, a - 1 - row),
    }
}

/// Rotates a square raster clockwise by `rot`.
pub fn rotate_quarter(t: &Tensor, rot: Rotation) -> Tensor {
    assert_eq!(t.height(), t.width(), "rotate_quarter needs a square raster");
    if rot == Rotation::NONE {
        return t.clone();
    }
    let a = t.height();
    Tensor::from_fn(t.channels(), a, a, |c, y, x| {
        let (sy, sx) = source_pixel(y, x, rot, a);
        t.get(c, sy, sx)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub face: Face,
    pub rotation: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strip {
    /// `a x 4a`, four faces left to right.
    Horizontal,
    /// `3a x a`, three faces top to bottom.
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UnfoldingLayout {
    pub center: Face,
    pub horizontal: [Slot; 4],
    pub vertical: [Slot; 3],
}

impl UnfoldingLayout {
    /// Slot of the center face within the horizontal strip.
    pub const CENTER_SLOT: usize = 1;

    pub fn new(center: Face) -> Result<Self> {
        let k = center.ring_index().ok_or_else(|| {
            Error::invalid(format!("unfolding center must be F, R, B or L, got {center}"))
        })?;
        let ring = |off: usize| Slot {
            face: Face::RING[(k + off) % 4],
            rotation: Rotation::NONE,
        };
        Ok(UnfoldingLayout {
            center,
            horizontal: [ring(3), ring(0), ring(1), ring(2)],
            vertical: [
                Slot {
                    face: Face::T,
                    rotation: Rotation::clockwise(k),
                },
                ring(0),
                Slot {
                    face: Face::D,
                    rotation: Rotation::clockwise(4 - k),
                },
            ],
        })
    }

    /// The four layouts in the conventional F, R, B, L order.
    pub fn all() -> [UnfoldingLayout; 4] {
        Face::RING.map(|f| UnfoldingLayout::new(f).expect("ring faces are valid centers"))
    }

    pub fn slots(&self, strip: Strip) -> &[Slot] {
        match strip {
            Strip::Horizontal => &self.horizontal,
            Strip::Vertical => &self.vertical,
        }
    }

    /// Sphere direction shown at strip pixel `(row, col)` for faces of side `a`.
    pub fn pixel_direction(&self, strip: Strip, row: usize, col: usize, a: usize) -> Vec3 {
        let (slot, r, c) = match strip {
            Strip::Horizontal => (self.horizontal[col / a], row, col % a),
            Strip::Vertical => (self.vertical[row / a], row % a, col),
        };
        let (sr, sc) = source_pixel(r, c, slot.rotation, a);
        face_pixel_direction(slot.face, sr, sc, a)
    }
}

/// One unfolding split into its horizontal and vertical strips.
#[derive(Clone, Debug, PartialEq)]
pub struct CuPair {
    pub horizontal: Tensor,
    pub vertical: Tensor,
    pub layout: UnfoldingLayout,
}

fn hstack(parts: &[Tensor]) -> Tensor {
    let (c, h) = (parts[0].channels(), parts[0].height());
    let widths: Vec<usize> = parts.iter().map(|p| p.width()).collect();
    let total: usize = widths.iter().sum();
    let mut out = Tensor::zeros(c, h, total);
    let mut x0 = 0;
    for p in parts {
        for ch in 0..c {
            for y in 0..h {
                let src = &p.channel(ch)[y * p.width()..(y + 1) * p.width()];
                out.channel_mut(ch)[y * total + x0..y * total + x0 + p.width()]
                    .copy_from_slice(src);
            }
        }
        x0 += p.width();
    }
    out
}

fn vstack(parts: &[Tensor]) -> Tensor {
    let (c, w) = (parts[0].channels(), parts[0].width());
    let total: usize = parts.iter().map(|p| p.height()).sum();
    let mut out = Tensor::zeros(c, total, w);
    let mut y0 = 0;
    for p in parts {
        let n = p.height() * w;
        for ch in 0..c {
            out.channel_mut(ch)[y0 * w..y0 * w + n].copy_from_slice(p.channel(ch));
        }
        y0 += p.height();
    }
    out
}

pub fn unfold(faces: &CubeFaceSet, center: Face) -> Result<CuPair> {
    let layout = UnfoldingLayout::new(center)?;
    let place = |s: &Slot| rotate_quarter(faces.face(s.face), s.rotation);
    let horizontal = hstack(&layout.horizontal.map(|s| place(&s)));
    let vertical = vstack(&layout.vertical.map(|s| place(&s)));
    Ok(CuPair {
        horizontal,
        vertical,
        layout,
    })
}

/// Draws both strips of a pair onto a `3a x 4a` cross-shaped canvas.
/// Returns the canvas and a single-channel mask that is 1 where a face was
/// drawn and 0 in the empty corners.
pub fn render_43_canvas(pair: &CuPair) -> Result<(Tensor, Tensor)> {
    let a = pair.horizontal.height();
    let c = pair.horizontal.channels();
    if pair.horizontal.width() != 4 * a
        || pair.vertical.height() != 3 * a
        || pair.vertical.width() != a
        || pair.vertical.channels() != c
    {
        return Err(Error::shape(format!(
            "strips {} and {} do not form a 4-3 unfolding",
            pair.horizontal.shape(),
            pair.vertical.shape()
        )));
    }
    let mut canvas = Tensor::zeros(c, 3 * a, 4 * a);
    let mut mask = Tensor::zeros(1, 3 * a, 4 * a);
    let x_off = UnfoldingLayout::CENTER_SLOT * a;
    for y in 0..3 * a {
        for x in 0..a {
            for ch in 0..c {
                canvas.set(ch, y, x_off + x, pair.vertical.get(ch, y, x));
            }
            mask.set(0, y, x_off + x, 1.0);
        }
    }
    for y in 0..a {
        for x in 0..4 * a {
            for ch in 0..c {
                canvas.set(ch, a + y, x, pair.horizontal.get(ch, y, x));
            }
            mask.set(0, a + y, x, 1.0);
        }
    }
    Ok((canvas, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::geometry::angle_between;
    use crate::projection::{ep_to_cube_tensor, EquirectImage};
    use crate::rng::ParamRng;
    use std::f64::consts::PI;

    fn labelled_faces(a: usize) -> CubeFaceSet {
        CubeFaceSet::new(std::array::from_fn(|i| {
            Tensor::from_fn(1, a, a, |_, y, x| (i * 1000 + y * a + x) as f32)
        }))
        .unwrap()
    }

    #[test]
    fn front_centered_horizontal_order() {
        let l = UnfoldingLayout::new(Face::F).unwrap();
        assert_eq!(
            l.horizontal.map(|s| s.face),
            [Face::L, Face::F, Face::R, Face::B]
        );
        let b = UnfoldingLayout::new(Face::B).unwrap();
        assert_eq!(l.vertical.map(|s| s.face), [Face::T, Face::F, Face::D]);
        assert_eq!(b.vertical.map(|s| s.face), [Face::T, Face::B, Face::D]);
        assert_ne!(l.vertical[0].rotation, b.vertical[0].rotation);
        assert!(UnfoldingLayout::new(Face::T).is_err());
        assert!(UnfoldingLayout::new(Face::D).is_err());
    }

    #[test]
    fn strips_have_expected_shape_and_shared_center() {
        let faces = labelled_faces(5);
        for center in Face::RING {
            let pair = unfold(&faces, center).unwrap();
            assert_eq!((pair.horizontal.height(), pair.horizontal.width()), (5, 20));
            assert_eq!((pair.vertical.height(), pair.vertical.width()), (15, 5));
            for y in 0..5 {
                for x in 0..5 {
                    let h = pair.horizontal.get(0, y, 5 + x);
                    let v = pair.vertical.get(0, 5 + y, x);
                    assert_eq!(h.to_bits(), v.to_bits());
                    assert_eq!(h, faces.face(center).get(0, y, x));
                }
            }
        }
    }

    #[test]
    fn rotation_composes() {
        let t = labelled_faces(4).face(Face::T).clone();
        let once = rotate_quarter(&t, Rotation::clockwise(1));
        assert_eq!(once.get(0, 0, 3), t.get(0, 0, 0));
        let four = (0..4).fold(t.clone(), |acc, _| rotate_quarter(&acc, Rotation::clockwise(1)));
        assert!(four.bit_eq(&t));
        for q in 0..4 {
            let r = Rotation::clockwise(q);
            assert!(rotate_quarter(&rotate_quarter(&t, r), r.inverse()).bit_eq(&t));
        }
    }

    #[test]
    fn seams_are_continuous_for_all_centers() {
        let a = 8;
        let bound = 2.0 * PI / (2.0 * a as f64);
        for layout in UnfoldingLayout::all() {
            for i in 0..a {
                for s in 0..3 {
                    let left = layout.pixel_direction(Strip::Horizontal, i, s * a + a - 1, a);
                    let right = layout.pixel_direction(Strip::Horizontal, i, (s + 1) * a, a);
                    assert!(angle_between(left, right) <= bound, "{:?} h{s}", layout.center);
                }
                for s in 0..2 {
                    let up = layout.pixel_direction(Strip::Vertical, s * a + a - 1, i, a);
                    let down = layout.pixel_direction(Strip::Vertical, (s + 1) * a, i, a);
                    assert!(angle_between(up, down) <= bound, "{:?} v{s}", layout.center);
                }
            }
        }
    }

    #[test]
    fn vertical_stripe_stays_connected_in_front_strip() {
        // Band of constant angular half-width around the great circle
        // through longitude 0 and 180 (the y = 0 plane).
        let (h, w) = (64, 128);
        let half_width = (3.0 * PI / 128.0).sin();
        let ep = Tensor::from_fn(1, h, w, |_, y, x| {
            let d = crate::projection::geometry::ep_pixel_direction(y, x, h, w);
            if d[1].abs() < half_width {
                1.0
            } else {
                0.0
            }
        });
        let faces = ep_to_cube_tensor(&EquirectImage::new(ep).unwrap().into_tensor(), 32).unwrap();
        let pair = unfold(&faces, Face::F).unwrap();
        let lit: Vec<(usize, usize)> = (0..96)
            .flat_map(|y| (0..32).map(move |x| (y, x)))
            .filter(|&(y, x)| pair.vertical.get(0, y, x) > 0.25)
            .collect();
        assert_eq!(crate::oracle::count_components_8(&lit), 1);
        // Runs the full height of the strip.
        assert!(lit.iter().any(|p| p.0 == 0) && lit.iter().any(|p| p.0 == 95));
    }

    #[test]
    fn canvas_masks_empty_corners() {
        let mut rng = ParamRng::new(5, "canvas");
        let faces = CubeFaceSet::new(std::array::from_fn(|_| {
            Tensor::from_fn(2, 3, 3, |_, _, _| rng.uniform(0.0, 1.0))
        }))
        .unwrap();
        let pair = unfold(&faces, Face::R).unwrap();
        let (canvas, mask) = render_43_canvas(&pair).unwrap();
        assert_eq!((canvas.height(), canvas.width()), (9, 12));
        assert_eq!(mask.data().iter().filter(|&&m| m == 1.0).count(), 6 * 9);
        assert_eq!(mask.get(0, 0, 0), 0.0);
        assert_eq!(canvas.get(1, 4, 4), faces.face(Face::R).get(1, 1, 1));
    }
}
