//! Sphere and face coordinate conventions.
//!
//! Right-handed frame: `+x` pierces face F, `+y` face R, `+z` face T.
//! Longitude is measured from `+x` toward `+y` in `[-pi, pi)`, latitude is
//! positive toward `+z`. Equirectangular column 0 starts at longitude `-pi`
//! and row 0 at latitude `+pi/2`; pixel centers sit at half-integer offsets.
//!
//! Face rasters are viewed from inside the sphere with longitude increasing
//! to the right, so the equatorial faces read like the matching slice of
//! the equirectangular image. Face-plane coordinates `(u, v)` lie in
//! `[-1, 1]`, with `u` growing to the right and `v` growing downward.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    F,
    B,
    L,
    R,
    T,
    D,
}

/// Orthonormal frame of a face: the outward axis plus the in-plane
/// directions of increasing column (`right`) and decreasing row (`up`).
#[derive(Clone, Copy, Debug)]
pub struct FaceBasis {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Face {
    /// Storage order of [`super::CubeFaceSet`].
    pub const ALL: [Face; 6] = [Face::F, Face::B, Face::L, Face::R, Face::T, Face::D];

    /// Equatorial faces in order of increasing longitude.
    pub const RING: [Face; 4] = [Face::F, Face::R, Face::B, Face::L];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Face> {
        Face::ALL.get(i).copied()
    }

    pub fn label(self) -> char {
        match self {
            Face::F => 'F',
            Face::B => 'B',
            Face::L => 'L',
            Face::R => 'R',
            Face::T => 'T',
            Face::D => 'D',
        }
    }

    pub fn from_label(c: char) -> Option<Face> {
        Face::ALL
            .into_iter()
            .find(|f| f.label() == c.to_ascii_uppercase())
    }

    /// Position on the equatorial ring, `None` for T and D.
    pub fn ring_index(self) -> Option<usize> {
        Face::RING.iter().position(|&f| f == self)
    }

    pub fn basis(self) -> FaceBasis {
        let (forward, right, up) = match self {
            Face::F => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            Face::R => ([0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            Face::B => ([-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]),
            Face::L => ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            // T and D are oriented so that their shared edge with F is
            // continuous when stacked above and below F.
            Face::T => ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
            Face::D => ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
        };
        FaceBasis { forward, right, up }
    }
}

impl std::fmt::Display for Face {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn normalize(v: Vec3) -> Vec3 {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Angle between two unit vectors, stable for nearly parallel inputs.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    dot(cross, cross).sqrt().atan2(dot(a, b))
}

/// `(longitude, latitude)` of a unit direction.
pub fn direction_to_lonlat(d: Vec3) -> (f64, f64) {
    let lon = d[1].atan2(d[0]);
    let lat = d[2].atan2(d[0].hypot(d[1]));
    // atan2 returns +pi on the negative x axis; fold into [-pi, pi).
    (if lon >= PI { lon - TAU } else { lon }, lat)
}

pub fn lonlat_to_direction(lon: f64, lat: f64) -> Vec3 {
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    [cl * co, cl * so, sl]
}

/// Continuous pixel coordinates `(x, y)` of a longitude/latitude in an
/// equirectangular raster. Integer values land on pixel centers.
#[inline]
pub fn lonlat_to_ep_xy(lon: f64, lat: f64, height: usize, width: usize) -> (f64, f64) {
    let x = (lon + PI) / TAU * width as f64 - 0.5;
    let y = (FRAC_PI_2 - lat) / PI * height as f64 - 0.5;
    (x, y)
}

/// Unit direction through the center of equirectangular pixel `(row, col)`.
pub fn ep_pixel_direction(row: usize, col: usize, height: usize, width: usize) -> Vec3 {
    let lon = -PI + (col as f64 + 0.5) * TAU / width as f64;
    let lat = FRAC_PI_2 - (row as f64 + 0.5) * PI / height as f64;
    lonlat_to_direction(lon, lat)
}

/// Face owning direction `d`: the axis of largest magnitude. Exact ties go
/// to the earlier axis (x, then y, then z).
pub fn owning_face(d: Vec3) -> Face {
    let (ax, ay, az) = (d[0].abs(), d[1].abs(), d[2].abs());
    if ax >= ay && ax >= az {
        if d[0] >= 0.0 {
            Face::F
        } else {
            Face::B
        }
    } else if ay >= az {
        if d[1] >= 0.0 {
            Face::R
        } else {
            Face::L
        }
    } else if d[2] >= 0.0 {
        Face::T
    } else {
        Face::D
    }
}

/// Gnomonic projection of `d` onto `face`'s plane. Only meaningful when `d`
/// is in the face's forward hemisphere.
#[inline]
pub fn project_to_face(face: Face, d: Vec3) -> (f64, f64) {
    let b = face.basis();
    let t = dot(d, b.forward);
    (dot(d, b.right) / t, -dot(d, b.up) / t)
}

/// Forward mapping: owning face and its plane coordinates.
pub fn direction_to_face(d: Vec3) -> (Face, f64, f64) {
    let face = owning_face(d);
    let (u, v) = project_to_face(face, d);
    (face, u, v)
}

/// Inverse mapping: unit direction through plane point `(u, v)` of `face`.
pub fn face_to_direction(face: Face, u: f64, v: f64) -> Vec3 {
    let b = face.basis();
    normalize([
        b.forward[0] + u * b.right[0] - v * b.up[0],
        b.forward[1] + u * b.right[1] - v * b.up[1],
        b.forward[2] + u * b.right[2] - v * b.up[2],
    ])
}

/// Plane coordinate of the center of pixel `i` on a face of side `a`.
#[inline]
pub fn pixel_to_plane(i: usize, a: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / a as f64 - 1.0
}

/// Continuous pixel coordinate of plane coordinate `u` on a face of side `a`.
#[inline]
pub fn plane_to_pixel(u: f64, a: usize) -> f64 {
    (u + 1.0) * 0.5 * a as f64 - 0.5
}

pub fn face_pixel_direction(face: Face, row: usize, col: usize, a: usize) -> Vec3 {
    face_to_direction(face, pixel_to_plane(col, a), pixel_to_plane(row, a))
}
