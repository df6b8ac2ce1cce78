use crate::metrics::{GroundTruthMap, SaliencyMap};

const EPS: f64 = f64::EPSILON;

fn gt_value(g: &GroundTruthMap, y: usize, x: usize) -> f64 {
    if g.data()[y * g.width() + x] {
        1.0
    } else {
        0.0
    }
}

fn sal(s: &SaliencyMap, y: usize, x: usize) -> f64 {
    s.data()[y * s.width() + x]
}

fn mean_of(s: &SaliencyMap) -> f64 {
    let mut acc = 0.0;
    for y in 0..s.height() {
        for x in 0..s.width() {
            acc += sal(s, y, x);
        }
    }
    acc / (s.height() * s.width()) as f64
}

fn count_fg(g: &GroundTruthMap) -> usize {
    let mut n = 0;
    for y in 0..g.height() {
        for x in 0..g.width() {
            if gt_value(g, y, x) == 1.0 {
                n += 1;
            }
        }
    }
    n
}

fn threshold(s: &SaliencyMap) -> f64 {
    let t = 2.0 * mean_of(s);
    if t > 1.0 {
        1.0
    } else {
        t
    }
}

fn empty_rule(s: &SaliencyMap) -> f64 {
    let t = threshold(s);
    for &v in s.data() {
        if v > t {
            return 0.0;
        }
    }
    1.0
}

pub fn mae_naive(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let mut acc = 0.0;
    for y in 0..s.height() {
        for x in 0..s.width() {
            acc += (sal(s, y, x) - gt_value(g, y, x)).abs();
        }
    }
    acc / (s.height() * s.width()) as f64
}

pub fn f_measure_naive(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    if count_fg(g) == 0 {
        return empty_rule(s);
    }
    let t = threshold(s);
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for y in 0..s.height() {
        for x in 0..s.width() {
            let p = sal(s, y, x) >= t;
            let g1 = gt_value(g, y, x) == 1.0;
            match (p, g1) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fneg);
    1.3 * precision * recall / (0.3 * precision + recall)
}

/// Exhaustive search over every foreground pixel; ties go to the smallest
/// row-major index.
pub fn nearest_foreground_naive(g: &GroundTruthMap) -> (Vec<f64>, Vec<usize>) {
    let (h, w) = (g.height(), g.width());
    let mut dist = vec![0.0; h * w];
    let mut idx = vec![0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::INFINITY;
            let mut best_i = usize::MAX;
            for yy in 0..h {
                for xx in 0..w {
                    if gt_value(g, yy, xx) != 1.0 {
                        continue;
                    }
                    let dy = yy as f64 - y as f64;
                    let dx = xx as f64 - x as f64;
                    let d = (dy * dy + dx * dx).sqrt();
                    if d < best {
                        best = d;
                        best_i = yy * w + xx;
                    }
                }
            }
            dist[y * w + x] = best;
            idx[y * w + x] = best_i;
        }
    }
    (dist, idx)
}

pub fn weighted_f_naive(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let fg = count_fg(g);
    if fg == 0 {
        return empty_rule(s);
    }
    let (h, w) = (g.height(), g.width());
    let e = |i: usize| (s.data()[i] - gt_value(g, i / w, i % w)).abs();
    let (dist, idx) = nearest_foreground_naive(g);

    let mut kernel = [[0.0f64; 7]; 7];
    let mut ksum = 0.0;
    for (ky, row) in kernel.iter_mut().enumerate() {
        for (kx, v) in row.iter_mut().enumerate() {
            let dy = ky as f64 - 3.0;
            let dx = kx as f64 - 3.0;
            *v = (-(dy * dy + dx * dx) / 50.0).exp();
            ksum += *v;
        }
    }

    let mut fg_err = 0.0;
    let mut bg_err = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if gt_value(g, y, x) == 1.0 {
                let mut ea = 0.0;
                for (ky, row) in kernel.iter().enumerate() {
                    for (kx, kv) in row.iter().enumerate() {
                        let sy = y as isize + ky as isize - 3;
                        let sx = x as isize + kx as isize - 3;
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            continue;
                        }
                        let j = sy as usize * w + sx as usize;
                        ea += kv / ksum * e(idx[j]);
                    }
                }
                fg_err += if ea < e(i) { ea } else { e(i) };
            } else {
                let b = 2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp();
                bg_err += e(i) * b;
            }
        }
    }
    let tpw = fg as f64 - fg_err;
    let r = 1.0 - fg_err / fg as f64;
    let p = tpw / (EPS + tpw + bg_err);
    2.0 * r * p / (EPS + r + p)
}

fn ssim_naive(vals: &[(f64, f64)]) -> f64 {
    let n = vals.len() as f64;
    let mx = vals.iter().map(|v| v.0).sum::<f64>() / n;
    let my = vals.iter().map(|v| v.1).sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    if vals.len() > 1 {
        for &(a, b) in vals {
            vx += (a - mx) * (a - mx) / (n - 1.0);
            vy += (b - my) * (b - my) / (n - 1.0);
            cxy += (a - mx) * (b - my) / (n - 1.0);
        }
    }
    let alpha = 4.0 * mx * my * cxy;
    let beta = (mx * mx + my * my) * (vx + vy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn object_naive(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let mut var = 0.0;
    if vals.len() > 1 {
        for v in vals {
            var += (v - m) * (v - m);
        }
        var /= n - 1.0;
    }
    2.0 * m / (m * m + 1.0 + var.sqrt() + EPS)
}

pub fn s_measure_naive(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let (h, w) = (g.height(), g.width());
    let fg = count_fg(g);
    if fg == 0 {
        return 1.0 - mean_of(s);
    }
    if fg == h * w {
        return mean_of(s);
    }
    let mut fg_vals = Vec::new();
    let mut bg_vals = Vec::new();
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if gt_value(g, y, x) == 1.0 {
                fg_vals.push(sal(s, y, x));
                sx += x as f64;
                sy += y as f64;
            } else {
                bg_vals.push(1.0 - sal(s, y, x));
            }
        }
    }
    let u = fg as f64 / (h * w) as f64;
    let object = u * object_naive(&fg_vals) + (1.0 - u) * object_naive(&bg_vals);

    let cx = ((sx / fg as f64).round() as usize + 1).min(w);
    let cy = ((sy / fg as f64).round() as usize + 1).min(h);
    let mut quads: [Vec<(f64, f64)>; 4] = Default::default();
    for y in 0..h {
        for x in 0..w {
            let q = usize::from(y >= cy) * 2 + usize::from(x >= cx);
            quads[q].push((sal(s, y, x), gt_value(g, y, x)));
        }
    }
    let mut region = 0.0;
    for q in &quads {
        if !q.is_empty() {
            region += q.len() as f64 / (h * w) as f64 * ssim_naive(q);
        }
    }
    let score = 0.5 * object + 0.5 * region;
    if score < 0.0 {
        0.0
    } else {
        score
    }
}

pub fn e_measure_naive(s: &SaliencyMap, g: &GroundTruthMap) -> f64 {
    let (h, w) = (g.height(), g.width());
    let n = (h * w) as f64;
    let t = threshold(s);
    let fg = count_fg(g);
    let bin = |y: usize, x: usize| if sal(s, y, x) >= t { 1.0 } else { 0.0 };
    let mut total = 0.0;
    if fg == 0 {
        for y in 0..h {
            for x in 0..w {
                total += 1.0 - bin(y, x);
            }
        }
        return total / n;
    }
    if fg == h * w {
        for y in 0..h {
            for x in 0..w {
                total += bin(y, x);
            }
        }
        return total / n;
    }
    let (mut mp, mut mg) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            mp += bin(y, x) / n;
            mg += gt_value(g, y, x) / n;
        }
    }
    // Means accumulated this way differ from count/n in the last bit, so
    // recompute them exactly from counts before use.
    mp = (mp * n).round() / n;
    mg = (mg * n).round() / n;
    for y in 0..h {
        for x in 0..w {
            let a = bin(y, x) - mp;
            let b = gt_value(g, y, x) - mg;
            let align = 2.0 * a * b / (a * a + b * b + EPS);
            total += (align + 1.0) * (align + 1.0) / 4.0;
        }
    }
    total / n
}

/// `[E_phi, S_m, wFbeta, Fbeta, MAE]`.
pub fn evaluate_naive(s: &SaliencyMap, g: &GroundTruthMap) -> [f64; 5] {
    [
        e_measure_naive(s, g),
        s_measure_naive(s, g),
        weighted_f_naive(s, g),
        f_measure_naive(s, g),
        mae_naive(s, g),
    ]
}

/// Per-pixel binary cross-entropy with clamping, averaged.
pub fn bce_naive(p: &[f64], g: &[bool], eps: f64) -> f64 {
    let mut acc = 0.0;
    for (&v, &t) in p.iter().zip(g) {
        let c = v.clamp(eps, 1.0 - eps);
        acc += if t { -c.ln() } else { -(1.0 - c).ln() };
    }
    acc / p.len() as f64
}

/// Central finite differences of `f` at `x`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
