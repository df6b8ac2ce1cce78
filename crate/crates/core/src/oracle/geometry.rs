use std::collections::HashSet;
use std::f64::consts::PI;

use crate::projection::Face;
use crate::tensor::Tensor;

// (forward, right, up) per face in F, B, L, R, T, D order; restated here so
// the oracle does not share the library's tables.
const FRAMES: [([f64; 3], [f64; 3], [f64; 3]); 6] = [
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
    ([-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]),
    ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
    ([0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
    ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
    ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
];

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Face whose center direction is angularly closest to `d`. Ties go to the
/// x faces, then y, then z.
pub fn nearest_face_center(d: [f64; 3]) -> Face {
    let candidates = [
        (Face::F, [1.0, 0.0, 0.0]),
        (Face::B, [-1.0, 0.0, 0.0]),
        (Face::R, [0.0, 1.0, 0.0]),
        (Face::L, [0.0, -1.0, 0.0]),
        (Face::T, [0.0, 0.0, 1.0]),
        (Face::D, [0.0, 0.0, -1.0]),
    ];
    let mut best = (Face::F, f64::INFINITY);
    for (face, c) in candidates {
        let angle = dot(d, c).clamp(-1.0, 1.0).acos();
        if angle < best.1 {
            best = (face, angle);
        }
    }
    best.0
}

fn bilinear_wrap_clamp(t: &Tensor, c: usize, x: f64, y: f64) -> f64 {
    let (h, w) = (t.height() as i64, t.width() as i64);
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let tx = x - x0 as f64;
    let ty = y - y0 as f64;
    let px = |i: i64| ((i % w + w) % w) as usize;
    let py = |i: i64| i.max(0).min(h - 1) as usize;
    (1.0 - tx) * (1.0 - ty) * t.get(c, py(y0), px(x0)) as f64
        + tx * (1.0 - ty) * t.get(c, py(y0), px(x0 + 1)) as f64
        + (1.0 - tx) * ty * t.get(c, py(y0 + 1), px(x0)) as f64
        + tx * ty * t.get(c, py(y0 + 1), px(x0 + 1)) as f64
}

/// Per-pixel equirect -> cube resampling straight from the trigonometry.
pub fn ep_to_cube_naive(ep: &Tensor, a: usize) -> Vec<Tensor> {
    let (h, w) = (ep.height(), ep.width());
    (0..6)
        .map(|f| {
            let (fw, rt, up) = FRAMES[f];
            Tensor::from_fn(ep.channels(), a, a, |c, row, col| {
                let u = (2.0 * col as f64 + 1.0) / a as f64 - 1.0;
                let v = (2.0 * row as f64 + 1.0) / a as f64 - 1.0;
                let d: Vec<f64> = (0..3).map(|k| fw[k] + u * rt[k] - v * up[k]).collect();
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let mut lon = d[1].atan2(d[0]);
                if lon >= PI {
                    lon -= 2.0 * PI;
                }
                let lat = (d[2] / n).asin();
                let x = (lon + PI) / (2.0 * PI) * w as f64 - 0.5;
                let y = (PI / 2.0 - lat) / PI * h as f64 - 0.5;
                bilinear_wrap_clamp(ep, c, x, y) as f32
            })
        })
        .collect()
}

/// Per-pixel cube -> equirect resampling using the angular classifier.
pub fn cube_to_ep_naive(faces: &[Tensor], height: usize) -> Tensor {
    let a = faces[0].height();
    let width = 2 * height;
    Tensor::from_fn(faces[0].channels(), height, width, |c, row, col| {
        let lon = -PI + (col as f64 + 0.5) * 2.0 * PI / width as f64;
        let lat = PI / 2.0 - (row as f64 + 0.5) * PI / height as f64;
        let d = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
        let face = nearest_face_center(d);
        let (fw, rt, up) = FRAMES[face.index()];
        let t = dot(d, fw);
        let u = dot(d, rt) / t;
        let v = -dot(d, up) / t;
        let edge = (a - 1) as f64;
        let x = ((u + 1.0) / 2.0 * a as f64 - 0.5).max(0.0).min(edge);
        let y = ((v + 1.0) / 2.0 * a as f64 - 0.5).max(0.0).min(edge);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(a - 1), (y0 + 1).min(a - 1));
        let (tx, ty) = (x - x0 as f64, y - y0 as f64);
        let f = &faces[face.index()];
        ((1.0 - tx) * (1.0 - ty) * f.get(c, y0, x0) as f64
            + tx * (1.0 - ty) * f.get(c, y0, x1) as f64
            + (1.0 - tx) * ty * f.get(c, y1, x0) as f64
            + tx * ty * f.get(c, y1, x1) as f64) as f32
    })
}

fn rotate_cw_once(t: &Tensor) -> Tensor {
    let a = t.height();
    let mut out = t.clone();
    for c in 0..t.channels() {
        for y in 0..a {
            for x in 0..a {
                // Pixel (y, x) moves to (x, a - 1 - y).
                out.set(c, x, a - 1 - y, t.get(c, y, x));
            }
        }
    }
    out
}

fn rotate_cw(t: &Tensor, turns: usize) -> Tensor {
    (0..turns % 4).fold(t.clone(), |acc, _| rotate_cw_once(&acc))
}

/// `cep_merge` composed by hand: cut the strips into faces, undo the T/D
/// turns, average the two center copies, then resample per pixel.
pub fn cep_merge_naive(horizontal: &Tensor, vertical: &Tensor, center: Face, height: usize) -> Tensor {
    let a = horizontal.height();
    let ring = [Face::F, Face::R, Face::B, Face::L];
    let k = ring.iter().position(|&f| f == center).expect("ring center");
    let cut = |t: &Tensor, y0: usize, x0: usize| {
        Tensor::from_fn(t.channels(), a, a, |c, y, x| t.get(c, y0 + y, x0 + x))
    };
    let mut faces: Vec<Option<Tensor>> = vec![None; 6];
    let order = [ring[(k + 3) % 4], ring[k], ring[(k + 1) % 4], ring[(k + 2) % 4]];
    for (slot, face) in order.iter().enumerate() {
        faces[face.index()] = Some(cut(horizontal, 0, slot * a));
    }
    // T was turned k times clockwise, D k times counter-clockwise.
    faces[Face::T.index()] = Some(rotate_cw(&cut(vertical, 0, 0), 4 - k));
    faces[Face::D.index()] = Some(rotate_cw(&cut(vertical, 2 * a, 0), k));
    let h_center = cut(horizontal, 0, a);
    let v_center = cut(vertical, a, 0);
    faces[center.index()] = Some(super::elementwise(&h_center, &v_center, |p, q| (p + q) / 2.0));
    let faces: Vec<Tensor> = faces.into_iter().map(Option::unwrap).collect();
    cube_to_ep_naive(&faces, height)
}

/// Number of 8-connected components among the given pixels.
pub fn count_components_8(pixels: &[(usize, usize)]) -> usize {
    let set: HashSet<(i64, i64)> = pixels.iter().map(|&(y, x)| (y as i64, x as i64)).collect();
    let mut seen = HashSet::new();
    let mut count = 0;
    for &start in &set {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        while let Some((y, x)) = stack.pop() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let n = (y + dy, x + dx);
                    if set.contains(&n) && seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
        }
    }
    count
}
