//! Reference implementations written directly from the definitions, used to
//! cross-check the optimized library code.
#![allow(dead_code)]

/// Direct zero-padded convolution. `w` is `[out][in][kh][kw]`.
pub fn naive_conv(
    x: &[f64],
    cin: usize,
    h: usize,
    w_: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    kh: usize,
    kw: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = h + 2 * pad + 1 - kh;
    let ow = w_ + 2 * pad + 1 - kw;
    let mut out = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        for y in 0..oh {
            for xx in 0..ow {
                let mut s = b[o];
                for i in 0..cin {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let sy = y as isize + dy as isize - pad as isize;
                            let sx = xx as isize + dx as isize - pad as isize;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w_ as isize {
                                continue;
                            }
                            s += w[((o * cin + i) * kh + dy) * kw + dx] * x[(i * h + sy as usize) * w_ + sx as usize];
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = s;
            }
        }
    }
    (out, oh, ow)
}

/// Pixel shuffle by scattering every input sample: channel `c·s² + i·s + j`
/// at `(y, x)` lands at `(y·s + i, x·s + j)` of output channel `c`.
pub fn naive_shuffle(x: &[f64], c: usize, h: usize, w: usize, s: usize) -> Vec<f64> {
    let oc = c / (s * s);
    let (oh, ow) = (h * s, w * s);
    let mut out = vec![f64::NAN; oc * oh * ow];
    for co in 0..oc {
        for i in 0..s {
            for j in 0..s {
                let ci = co * s * s + i * s + j;
                for y in 0..h {
                    for xx in 0..w {
                        out[(co * oh + y * s + i) * ow + xx * s + j] = x[(ci * h + y) * w + xx];
                    }
                }
            }
        }
    }
    out
}

/// Keys cubic with `a = -0.5`.
pub fn keys(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Non-separable 4×4 bicubic with half-pixel centers and clamped edges.
pub fn naive_bicubic(x: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        let sy = (oy as f64 + 0.5) * h as f64 / oh as f64 - 0.5;
        for ox in 0..ow {
            let sx = (ox as f64 + 0.5) * w as f64 / ow as f64 - 0.5;
            let (fy, fx) = (sy.floor(), sx.floor());
            let mut v = 0.0;
            for m in -1..=2 {
                for n in -1..=2 {
                    let py = fy + m as f64;
                    let px = fx + n as f64;
                    let wt = keys(sy - py) * keys(sx - px);
                    let cy = (py as isize).clamp(0, h as isize - 1) as usize;
                    let cx = (px as isize).clamp(0, w as isize - 1) as usize;
                    v += wt * x[cy * w + cx];
                }
            }
            out.push(v);
        }
    }
    out
}

/// Mean SSIM over every valid window, each window evaluated with explicit
/// 2-D Gaussian weights.
pub fn windowed_ssim(a: &[f64], b: &[f64], h: usize, w: usize, win: usize, sigma: f64, c1: f64, c2: f64) -> f64 {
    let r = (win / 2) as f64;
    let mut g = vec![0.0; win * win];
    for i in 0..win {
        for j in 0..win {
            g[i * win + j] = (-((i as f64 - r).powi(2) + (j as f64 - r).powi(2)) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    let mut acc = 0.0;
    let mut count = 0;
    for y in 0..=h - win {
        for x in 0..=w - win {
            let at = |p: &[f64], i: usize, j: usize| p[(y + i) * w + x + j];
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    ma += g[i * win + j] * at(a, i, j);
                    mb += g[i * win + j] * at(b, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let (da, db) = (at(a, i, j) - ma, at(b, i, j) - mb);
                    va += g[i * win + j] * da * da;
                    vb += g[i * win + j] * db * db;
                    cov += g[i * win + j] * da * db;
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Minimum of `c·x` subject to `A x = b`, `x ≥ 0`, by two-phase dense simplex
/// with Bland's rule. Rows with `b < 0` are negated first.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let m = a.len();
    let n = c.len();
    // tableau columns: n originals, m artificials, rhs
    let cols = n + m + 1;
    let mut t = vec![vec![0.0; cols]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][cols - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| -> bool {
        loop {
            let reduced = |j: usize, t: &Vec<Vec<f64>>, basis: &Vec<usize>| {
                cost[j] - (0..m).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>()
            };
            let Some(enter) = (0..allowed).find(|&j| !basis.contains(&j) && reduced(j, t, basis) < -EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][enter] > EPS {
                    let ratio = t[i][cols - 1] / t[i][enter];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || ((ratio - lr).abs() <= EPS && basis[i] < basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else { return false };
            let p = t[row][enter];
            t[row].iter_mut().for_each(|v| *v /= p);
            let pivot = t[row].clone();
            for (i, r) in t.iter_mut().enumerate() {
                if i != row {
                    let f = r[enter];
                    if f != 0.0 {
                        r.iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                    }
                }
            }
            basis[row] = enter;
        }
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    run(&mut t, &mut basis, &phase1, n + m);
    let infeas: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][cols - 1]).sum();
    if infeas > 1e-9 {
        return None;
    }
    // drive zero-valued artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !basis.contains(&j) && t[i][j].abs() > 1e-9) {
                let p = t[i][j];
                t[i].iter_mut().for_each(|v| *v /= p);
                let pivot = t[i].clone();
                for (k, r) in t.iter_mut().enumerate() {
                    if k != i {
                        let f = r[j];
                        if f != 0.0 {
                            r.iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                        }
                    }
                }
                basis[i] = j;
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat(0.0).take(m));
    if !run(&mut t, &mut basis, &phase2, n) {
        return None;
    }
    Some((0..m).map(|i| phase2[basis[i]] * t[i][cols - 1]).sum())
}

/// Optimal transport cost between two histograms on shared centers as a linear program.
pub fn lp_transport(a: &[f64], b: &[f64], centers: &[f64]) -> f64 {
    let k = a.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..k {
        let mut r = vec![0.0; k * k];
        (0..k).for_each(|j| r[i * k + j] = 1.0);
        rows.push(r);
        rhs.push(a[i]);
    }
    // the last column constraint follows from the others
    for j in 0..k - 1 {
        let mut r = vec![0.0; k * k];
        (0..k).for_each(|i| r[i * k + j] = 1.0);
        rows.push(r);
        rhs.push(b[j]);
    }
    let cost: Vec<f64> = (0..k * k).map(|p| (centers[p / k] - centers[p % k]).abs()).collect();
    simplex_min(&rows, &rhs, &cost).expect("transport LP is feasible and bounded")
}
