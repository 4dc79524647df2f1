//! Deterministic quadrature rules: Gauss–Legendre, polar rules for balls and
//! ellipsoidal shells, and the lattice rule behind the discrete ball average.

use crate::geometry::LatticeBox;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Weighted points `(z, w)` with weights summing to one.
pub type Rule = Vec<(Vec<f64>, f64)>;

/// Uniform probability on the ball of radius `r`. 1D: 8-point Gauss–Legendre;
/// 2D: 4 radial (in `ρ²`) × 16 angular points; N ≥ 3: the 2N+1 point rule of
/// [`cross_rule`].
pub fn ball_rule(dim: usize, r: f64) -> Rule {
    match dim {
        1 => {
            let (x, w) = gauss_legendre(8);
            x.iter()
                .zip(&w)
                .map(|(t, wt)| (vec![r * t], wt / 2.0))
                .collect()
        }
        2 => {
            let (s, ws) = gauss_legendre(4);
            let m = 16;
            let mut out = Vec::with_capacity(4 * m);
            for (si, wi) in s.iter().zip(&ws) {
                let rho = r * ((si + 1.0) / 2.0).sqrt();
                for j in 0..m {
                    let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                    out.push((vec![rho * th.cos(), rho * th.sin()], wi / 2.0 / m as f64));
                }
            }
            out
        }
        _ => cross_rule(dim, r),
    }
}

/// Center plus `±r e_i`, weighted to reproduce the ball's second moments
/// `E z_i² = r²/(N+2)`.
pub fn cross_rule(dim: usize, r: f64) -> Rule {
    let w = 1.0 / (2.0 * (dim as f64 + 2.0));
    let mut out = vec![(vec![0.0; dim], 1.0 - 2.0 * dim as f64 * w)];
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut z = vec![0.0; dim];
            z[i] = s * r;
            out.push((z, w));
        }
    }
    out
}

/// Uniform probability on `E \ B_1` for the ellipse with semi-axes `axes`
/// rotated by `angle`. 2D: 24 angles × 3 radial points; 1D: 4 points per side.
pub fn shell_rule_2d(axes: [f64; 2], angle: f64) -> Rule {
    let (s, ws) = gauss_legendre(3);
    let m = 24;
    let (c, sn) = (angle.cos(), angle.sin());
    let mut out = Vec::with_capacity(3 * m);
    let mut total = 0.0;
    for j in 0..m {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
        let (ct, st) = (th.cos(), th.sin());
        let rho2 = 1.0 / (ct * ct / (axes[0] * axes[0]) + st * st / (axes[1] * axes[1]));
        for (si, wi) in s.iter().zip(&ws) {
            let q = 1.0 + (rho2 - 1.0) * (si + 1.0) / 2.0;
            let rho = q.sqrt();
            let w = (rho2 - 1.0) * wi;
            let (bx, by) = (rho * ct, rho * st);
            out.push((vec![c * bx - sn * by, sn * bx + c * by], w));
            total += w;
        }
    }
    out.iter_mut().for_each(|p| p.1 /= total);
    out
}

pub fn shell_rule_1d(a: f64) -> Rule {
    let (x, w) = gauss_legendre(4);
    let mut out = Vec::with_capacity(8);
    for (t, wt) in x.iter().zip(&w) {
        let z = 1.0 + (a - 1.0) * (t + 1.0) / 2.0;
        out.push((vec![z], wt / 4.0));
        out.push((vec![-z], wt / 4.0));
    }
    out
}

/// Discrete average over `B_ε(x)` on the lattice `hℤ^N`.
///
/// For `ε ≥ 2h` the points are lattice offsets weighted by the volume of their
/// cell inside the ball, then blended toward the centre or the outermost ring so
/// that the second moment equals `ε²N/(N+2)` exactly. Otherwise the 2N+1 cross
/// rule at radius ε is used through interpolation.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub eps: f64,
    pub offsets: Vec<Vec<f64>>,
    /// Integer offsets when every point is a lattice node.
    pub lattice: Option<Vec<Vec<i64>>>,
    pub weights: Vec<f64>,
}

impl BallRule {
    pub fn new(dim: usize, h: f64, eps: f64) -> Self {
        if eps < 2.0 * h {
            let rule = cross_rule(dim, eps);
            return BallRule {
                eps,
                offsets: rule.iter().map(|p| p.0.clone()).collect(),
                lattice: None,
                weights: rule.iter().map(|p| p.1).collect(),
            };
        }
        let kmax = (eps / h).ceil() as i64 + 1;
        let sub = match dim {
            1 => 0,
            2 => 24,
            3 => 10,
            _ => 6,
        };
        let mut keys = Vec::new();
        let mut ws = Vec::new();
        for k in LatticeBox::new(vec![-kmax; dim], vec![kmax; dim]) {
            let w = cell_overlap(&k, h, eps, sub);
            if w > 0.0 {
                keys.push(k);
                ws.push(w);
            }
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        let r2: Vec<f64> = keys
            .iter()
            .map(|k| k.iter().map(|&v| (v as f64 * h).powi(2)).sum())
            .collect();
        let target = eps * eps * dim as f64 / (dim as f64 + 2.0);
        let m: f64 = ws.iter().zip(&r2).map(|(w, r)| w * r).sum();
        let centre = keys.iter().position(|k| k.iter().all(|&v| v == 0)).unwrap();
        if m > target {
            let t = 1.0 - target / m;
            ws.iter_mut().for_each(|w| *w *= 1.0 - t);
            ws[centre] += t;
        } else if m < target {
            let outer = r2.iter().cloned().fold(0.0, f64::max);
            let ring: Vec<usize> = (0..keys.len())
                .filter(|&i| (r2[i] - outer).abs() < 1e-12 * outer)
                .collect();
            let t = (target - m) / (outer - m);
            ws.iter_mut().for_each(|w| *w *= 1.0 - t);
            for &i in &ring {
                ws[i] += t / ring.len() as f64;
            }
        }
        BallRule {
            eps,
            offsets: keys
                .iter()
                .map(|k| k.iter().map(|&v| v as f64 * h).collect())
                .collect(),
            lattice: Some(keys),
            weights: ws,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn second_moment(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Volume of `(kh + [-h/2, h/2]^N) ∩ B_ε`, exact in 1D and by a midpoint
/// subgrid of `sub^N` points otherwise.
fn cell_overlap(k: &[i64], h: f64, eps: f64, sub: usize) -> f64 {
    if k.len() == 1 {
        let c = k[0] as f64 * h;
        let lo = (c - h / 2.0).max(-eps);
        let hi = (c + h / 2.0).min(eps);
        return (hi - lo).max(0.0);
    }
    let n = k.len();
    let mut count = 0usize;
    let mut idx = vec![0usize; n];
    let e2 = eps * eps;
    loop {
        let r2: f64 = (0..n)
            .map(|i| {
                let y = k[i] as f64 * h + h * ((idx[i] as f64 + 0.5) / sub as f64 - 0.5);
                y * y
            })
            .sum();
        if r2 < e2 {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return count as f64 / (sub as f64).powi(n as i32);
            }
            idx[i] += 1;
            if idx[i] < sub {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
