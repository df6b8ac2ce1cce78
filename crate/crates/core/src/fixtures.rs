//! Deterministic synthetic inputs shared by tests, `selftest` and the CLI.

use crate::projection::geometry::ep_pixel_direction;
use crate::rng::ParamRng;
use crate::tensor::Tensor;

/// Band-limited equirectangular image: low-order polynomials of the unit
/// direction, so the signal is smooth across the date line and the poles.
/// Values stay inside `[0.1, 0.9]`.
pub fn smooth_equirect(height: usize, channels: usize) -> Tensor {
    let width = 2 * height;
    let mut t = Tensor::zeros(channels, height, width);
    for row in 0..height {
        for col in 0..width {
            let [x, y, z] = ep_pixel_direction(row, col, height, width);
            for c in 0..channels {
                let k = c as f64;
                let v = 0.5
                    + 0.12 * x
                    + 0.08 * (1.0 + 0.5 * k) * y
                    - 0.07 * z
                    + 0.06 * (x * y - 0.5 * k * y * z)
                    + 0.05 * (3.0 * z * z - 1.0) * 0.5
                    + 0.04 * (x * x - y * y);
                t.set(c, row, col, v as f32);
            }
        }
    }
    t
}

/// Smooth panorama with a few seeded bright blobs on top, clipped to
/// `[0, 1]`. Used as the fixed forward-pass input.
pub fn blob_equirect(height: usize, channels: usize, seed: u64) -> Tensor {
    let mut rng = ParamRng::new(seed, "fixture.blobs");
    let width = 2 * height;
    let blobs: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            let lon = rng.uniform_f64(-std::f64::consts::PI, std::f64::consts::PI);
            let lat = rng.uniform_f64(-1.0, 1.0);
            let d = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
            (d, rng.uniform_f64(0.15, 0.45), rng.uniform_f64(0.2, 0.4))
        })
        .collect();
    let mut t = smooth_equirect(height, channels);
    for row in 0..height {
        for col in 0..width {
            let d = ep_pixel_direction(row, col, height, width);
            let boost: f64 = blobs
                .iter()
                .map(|(c, radius, gain)| {
                    let cos = d[0] * c[0] + d[1] * c[1] + d[2] * c[2];
                    let ang = cos.clamp(-1.0, 1.0).acos();
                    gain * (-(ang / radius).powi(2)).exp()
                })
                .sum();
            for c in 0..channels {
                let v = (t.get(c, row, col) as f64 + boost).clamp(0.0, 1.0);
                t.set(c, row, col, v as f32);
            }
        }
    }
    t
}

/// The fixed 64x32 forward-pass fixture.
pub fn forward_fixture() -> Tensor {
    blob_equirect(32, 3, 42)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_fixture_is_in_range_and_seamless() {
        let t = smooth_equirect(64, 3);
        assert!(t.min() >= 0.1 && t.max() <= 0.9);
        // Adjacent columns across the date line differ like any other pair.
        for c in 0..3 {
            for y in 0..64 {
                assert!((t.get(c, y, 0) - t.get(c, y, 127)).abs() < 0.02);
            }
        }
    }

    #[test]
    fn blob_fixture_is_deterministic() {
        assert!(blob_equirect(16, 1, 7).bit_eq(&blob_equirect(16, 1, 7)));
        assert!(!blob_equirect(16, 1, 7).bit_eq(&blob_equirect(16, 1, 8)));
        let f = forward_fixture();
        assert_eq!((f.channels(), f.height(), f.width()), (3, 32, 64));
        assert!(f.min() >= 0.0 && f.max() <= 1.0);
    }
}
