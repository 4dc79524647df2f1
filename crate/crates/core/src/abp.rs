//! Concave envelopes on grid nodes, contact sets, superdifferential bounds and
//! the two ε-ABP checks.
//!
//! The envelope value at a node `x` is the linear program
//! `max Σ λ_j v_j` subject to `Σ λ_j (y_j - x) = 0`, `Σ λ_j = 1`, `λ ≥ 0`,
//! solved by a revised simplex with an `(N+1)`-column basis. Its dual solution
//! is the affine majorant touching at `x`, whose slope is the supporting slope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::residual;
use crate::error::{LabError, Result};
use crate::field::FieldSpec;
use crate::geometry::{eps_cover, unit_ball_volume, CoverRegion, Cube, LatticeBox, NodeClass};
use crate::gridfn::GridFunction;
use crate::quadrature::BallRule;
use crate::scenario::Scenario;
use crate::walker::{run_batch, Stat};

const CHUNK: usize = 64;
const BLAND_AFTER: usize = 50;
const MAX_PIVOTS: usize = 100_000;

/// Least concave majorant of a point cloud, evaluated at the points.
#[derive(Debug, Clone)]
pub struct Hull {
    pub values: Vec<f64>,
    /// A supporting slope at each point.
    pub slopes: Vec<Vec<f64>>,
    pub pivots: usize,
}

/// Solves `a x = b` for a small dense system; `None` when singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

struct Lp<'a> {
    pts: &'a [Vec<f64>],
    vals: &'a [f64],
    tol: f64,
}

impl Lp<'_> {
    fn column(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut c: Vec<f64> = self.pts[j].iter().zip(x).map(|(y, x)| y - x).collect();
        c.push(1.0);
        c
    }

    /// Basis matrix with columns `(y_j - x, 1)`, stored row-major.
    fn matrix(&self, basis: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
        let m = basis.len();
        let cols: Vec<Vec<f64>> = basis.iter().map(|&j| self.column(j, x)).collect();
        (0..m)
            .map(|r| (0..m).map(|c| cols[c][r]).collect())
            .collect()
    }

    fn weights(&self, basis: &[usize], x: &[f64]) -> Option<Vec<f64>> {
        let m = basis.len();
        let mut rhs = vec![0.0; m];
        rhs[m - 1] = 1.0;
        let lam = solve_small(self.matrix(basis, x), rhs)?;
        lam.iter().all(|l| l.is_finite()).then_some(lam)
    }

    /// Greedy feasible basis: `x` itself plus points spanning independent directions.
    fn start_basis(&self, p: usize) -> Option<Vec<usize>> {
        let x = &self.pts[p];
        let n = x.len();
        let mut basis = vec![p];
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for j in 0..self.pts.len() {
            if basis.len() == n + 1 {
                break;
            }
            let mut d: Vec<f64> = self.pts[j].iter().zip(x).map(|(y, x)| y - x).collect();
            let len0 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len0 == 0.0 {
                continue;
            }
            for q in &dirs {
                let dot: f64 = d.iter().zip(q).map(|(a, b)| a * b).sum();
                d.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
            let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 1e-9 * len0 {
                d.iter_mut().for_each(|v| *v /= len);
                dirs.push(d);
                basis.push(j);
            }
        }
        (basis.len() == n + 1).then_some(basis)
    }

    /// Returns `(Γ(x), slope, pivots, optimal basis)`.
    fn solve(
        &self,
        p: usize,
        warm: Option<&[usize]>,
    ) -> Result<(f64, Vec<f64>, usize, Vec<usize>)> {
        let x = &self.pts[p];
        let n = x.len();
        let m = n + 1;
        let (mut basis, mut lam) =
            match warm.and_then(|b| self.weights(b, x).map(|l| (b.to_vec(), l))) {
                Some((b, l)) if l.iter().all(|&v| v >= -1e-12) => (b, l),
                _ => {
                    let b = self.start_basis(p).ok_or_else(|| {
                        LabError::invalid("points", "point cloud is not full-dimensional")
                    })?;
                    let l = self.weights(&b, x).expect("independent start basis");
                    (b, l)
                }
            };
        let mut pivots = 0;
        let mut degenerate = 0;
        loop {
            let vb: Vec<f64> = basis.iter().map(|&j| self.vals[j]).collect();
            let bm = self.matrix(&basis, x);
            let bt: Vec<Vec<f64>> = (0..m).map(|r| (0..m).map(|c| bm[c][r]).collect()).collect();
            let pi =
                solve_small(bt, vb).ok_or_else(|| LabError::invalid("points", "singular basis"))?;
            let (xi, c) = (&pi[..n], pi[n]);
            let bland = degenerate >= BLAND_AFTER;
            let mut enter: Option<(usize, f64)> = None;
            for (j, y) in self.pts.iter().enumerate() {
                let l: f64 = xi
                    .iter()
                    .zip(y)
                    .zip(x)
                    .map(|((s, y), x)| s * (y - x))
                    .sum::<f64>()
                    + c;
                let r = self.vals[j] - l;
                if r > self.tol {
                    if bland {
                        enter = Some((j, r));
                        break;
                    }
                    if enter.map_or(true, |(_, best)| r > best) {
                        enter = Some((j, r));
                    }
                }
            }
            let Some((j, _)) = enter else {
                let value: f64 = lam.iter().zip(&basis).map(|(l, &b)| l * self.vals[b]).sum();
                return Ok((value, xi.to_vec(), pivots, basis));
            };
            let d = solve_small(bm, self.column(j, x))
                .ok_or_else(|| LabError::invalid("points", "singular basis"))?;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if d[i] > 1e-12 {
                    let t = lam[i].max(0.0) / d[i];
                    let better = match leave {
                        None => true,
                        Some((k, tb)) => {
                            t < tb - 1e-15
                                || (t <= tb + 1e-15
                                    && if bland {
                                        basis[i] < basis[k]
                                    } else {
                                        d[i] > d[k]
                                    })
                        }
                    };
                    if better {
                        leave = Some((i, t));
                    }
                }
            }
            let (i, t) = leave.expect("sum row keeps a positive entry");
            degenerate = if t <= 1e-15 { degenerate + 1 } else { 0 };
            basis[i] = j;
            lam = self
                .weights(&basis, x)
                .ok_or_else(|| LabError::invalid("points", "singular basis"))?;
            lam.iter_mut().for_each(|l| *l = l.max(0.0));
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(LabError::NoConvergence {
                    iterations: pivots,
                    increment: t,
                });
            }
        }
    }
}

/// Least concave majorant of `(pts[j], vals[j])` evaluated at every point.
/// Work is split into fixed chunks with warm starts inside a chunk only, so the
/// result does not depend on the worker count.
pub fn concave_hull(pts: &[Vec<f64>], vals: &[f64]) -> Result<Hull> {
    if pts.len() != vals.len() {
        return Err(LabError::Dimension {
            expected: pts.len(),
            got: vals.len(),
        });
    }
    if pts.is_empty() {
        return Ok(Hull {
            values: Vec::new(),
            slopes: Vec::new(),
            pivots: 0,
        });
    }
    let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let lp = Lp {
        pts,
        vals,
        tol: 1e-12 * scale,
    };
    let chunks: Vec<Vec<(f64, Vec<f64>, usize)>> = (0..pts.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|ids| {
            let mut warm: Option<Vec<usize>> = None;
            ids.iter()
                .map(|&p| {
                    let (v, s, k, b) = lp.solve(p, warm.as_deref())?;
                    warm = Some(b);
                    Ok((v, s, k))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Hull {
        values: Vec::with_capacity(pts.len()),
        slopes: Vec::with_capacity(pts.len()),
        pivots: 0,
    };
    for (v, s, k) in chunks.into_iter().flatten() {
        out.values.push(v);
        out.slopes.push(s);
        out.pivots += k;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Envelope {
    /// `u⁺ = max{u, sup_ext u}` on classified nodes, `sup_ext u` elsewhere.
    pub base: GridFunction,
    pub gamma: GridFunction,
    /// Supporting slope at each classified node; empty elsewhere.
    pub slopes: Vec<Vec<f64>>,
    pub sup_exterior: f64,
    /// Simplex pivots spent on the whole envelope.
    pub pivots: usize,
}

fn classified(u: &GridFunction) -> Vec<usize> {
    (0..u.grid.len())
        .filter(|&i| u.grid.is_classified(i))
        .collect()
}

/// Central difference of Γ at an interior grid point, if all neighbours exist.
fn central_slope(grid: &crate::geometry::Grid, gamma: &[f64], i: usize) -> Option<Vec<f64>> {
    let n = grid.dim();
    (0..n)
        .map(|a| {
            let mut e = vec![0i64; n];
            e[a] = 1;
            let p = grid.offset(i, &e).filter(|&p| grid.is_classified(p))?;
            e[a] = -1;
            let q = grid.offset(i, &e).filter(|&q| grid.is_classified(q))?;
            Some((gamma[p] - gamma[q]) / (2.0 * grid.h))
        })
        .collect()
}

/// Concave envelope of `u⁺` over the classified nodes; `N ≤ 2`.
///
/// The recorded slope at a node is the central difference of Γ when that is a
/// supporting slope, and the simplex dual otherwise.
pub fn concave_envelope(u: &GridFunction) -> Result<Envelope> {
    let grid = &u.grid;
    if grid.dim() > 2 {
        return Err(LabError::Unsupported(format!(
            "concave envelope in dimension {}",
            grid.dim()
        )));
    }
    let sup_ext = grid
        .collar_nodes
        .iter()
        .map(|&i| u.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let ids = classified(u);
    let mut base = vec![sup_ext; grid.len()];
    for &i in &ids {
        base[i] = u.values[i].max(sup_ext);
    }
    let pts: Vec<Vec<f64>> = ids.iter().map(|&i| grid.coords(i)).collect();
    let vals: Vec<f64> = ids.iter().map(|&i| base[i]).collect();
    let hull = concave_hull(&pts, &vals)?;
    let mut gamma = vec![sup_ext; grid.len()];
    for (k, &i) in ids.iter().enumerate() {
        gamma[i] = hull.values[k];
    }
    let tol = 1e-12 * vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let central: Vec<Option<Vec<f64>>> = ids
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let xi = central_slope(grid, &gamma, i)?;
            let x = &pts[k];
            let g0 = gamma[i];
            let ok = pts.iter().zip(&vals).all(|(y, v)| {
                *v <= g0
                    + xi.iter()
                        .zip(y)
                        .zip(x)
                        .map(|((s, y), x)| s * (y - x))
                        .sum::<f64>()
                    + tol
            });
            ok.then_some(xi)
        })
        .collect();
    let mut slopes = vec![Vec::new(); grid.len()];
    for (k, &i) in ids.iter().enumerate() {
        slopes[i] = central[k].clone().unwrap_or_else(|| hull.slopes[k].clone());
    }
    Ok(Envelope {
        base: GridFunction::new(grid.clone(), base)?,
        gamma: GridFunction::new(grid.clone(), gamma)?,
        slopes,
        sup_exterior: sup_ext,
        pivots: hull.pivots,
    })
}

impl Envelope {
    /// `max (u⁺ - Γ)` over classified nodes; nonpositive when Γ dominates.
    pub fn domination_defect(&self) -> f64 {
        classified(&self.base)
            .iter()
            .map(|&i| self.base.values[i] - self.gamma.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `½(Γ(x+he_i) + Γ(x-he_i)) - Γ(x)` along grid lines of
    /// classified nodes.
    pub fn concavity_defect(&self) -> f64 {
        let grid = &self.gamma.grid;
        let n = grid.dim();
        let g = &self.gamma.values;
        let mut worst = f64::NEG_INFINITY;
        for i in classified(&self.gamma) {
            for a in 0..n {
                let mut e = vec![0i64; n];
                e[a] = 1;
                let up = grid.offset(i, &e);
                e[a] = -1;
                let dn = grid.offset(i, &e);
                if let (Some(p), Some(q)) = (up, dn) {
                    if grid.is_classified(p) && grid.is_classified(q) {
                        worst = worst.max(0.5 * (g[p] + g[q]) - g[i]);
                    }
                }
            }
        }
        worst
    }

    /// Largest change when Γ itself is enveloped again.
    pub fn idempotence_defect(&self) -> Result<f64> {
        let ids = classified(&self.gamma);
        let pts: Vec<Vec<f64>> = ids.iter().map(|&i| self.gamma.grid.coords(i)).collect();
        let vals: Vec<f64> = ids.iter().map(|&i| self.gamma.values[i]).collect();
        let again = concave_hull(&pts, &vals)?;
        Ok(again
            .values
            .iter()
            .zip(&vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `max u⁺ - min u⁺` over classified nodes.
    pub fn base_oscillation(&self) -> f64 {
        let ids = classified(&self.base);
        let hi = ids
            .iter()
            .map(|&i| self.base.values[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = ids
            .iter()
            .map(|&i| self.base.values[i])
            .fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub nodes: Vec<usize>,
    pub tol: f64,
}

/// Nodes of `Ω̄` with `u⁺ ≥ Γ - tol`; `tol` defaults to `1e-8 · osc u⁺`.
pub fn contact_set(env: &Envelope, tol: Option<f64>) -> ContactSet {
    let tol = tol.unwrap_or_else(|| 1e-8 * env.base_oscillation());
    let grid = &env.base.grid;
    let nodes = (0..grid.len())
        .filter(|&i| grid.in_closure(i) && env.base.values[i] >= env.gamma.values[i] - tol)
        .collect();
    ContactSet { nodes, tol }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superdiff {
    pub node: usize,
    pub xi: Vec<f64>,
    /// `osc_{B_{ε/2}} {Γ(x) - Γ(x+y) + ⟨ξ,y⟩}` over nodes of the closed ball.
    pub osc: f64,
    /// `(2/ε) · osc`
    pub rho: f64,
}

/// Radius `ρ` of a ball around `ξ` containing the superdifferential of Γ on
/// `B_{ε/4}(x)`.
pub fn superdiff_bound(env: &Envelope, node: usize, eps: f64) -> Result<Superdiff> {
    let grid = &env.gamma.grid;
    let xi = env
        .slopes
        .get(node)
        .filter(|s| !s.is_empty())
        .cloned()
        .ok_or_else(|| LabError::invalid("node", "no supporting slope at an unclassified node"))?;
    let h = grid.h;
    let r = eps / 2.0;
    let k = (r / h).floor() as i64 + 1;
    let n = grid.dim();
    let g0 = env.gamma.values[node];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for off in LatticeBox::new(vec![-k; n], vec![k; n]) {
        let y: Vec<f64> = off.iter().map(|&o| o as f64 * h).collect();
        if y.iter().map(|v| v * v).sum::<f64>() > r * r * (1.0 + 1e-12) {
            continue;
        }
        let id = grid.offset(node, &off).filter(|&id| grid.is_classified(id));
        let Some(id) = id else {
            let mut p = grid.coords(node);
            p.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
            return Err(LabError::StencilEscape { point: p });
        };
        let phi = g0 - env.gamma.values[id] + xi.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        lo = lo.min(phi);
        hi = hi.max(phi);
    }
    let osc = hi - lo;
    Ok(Superdiff {
        node,
        xi,
        osc,
        rho: 2.0 / eps * osc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeTerm {
    pub center: Vec<f64>,
    pub side: f64,
    pub sup_f: f64,
    /// Largest `ρ` over contact nodes in the closed cube.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbpReport {
    pub dim: usize,
    pub lhs: f64,
    pub sup_exterior: f64,
    pub beta: f64,
    /// `2^{N+3}/β`
    pub constant: f64,
    /// `diam Ω + Λε`
    pub diameter_factor: f64,
    /// `(Σ_Q (sup_Q f⁺)^N)^{1/N}`
    pub cube_sum: f64,
    pub eps: f64,
    pub rhs: f64,
    pub pass: bool,
    pub contact_nodes: usize,
    pub cubes: Vec<CubeTerm>,
    /// `sup u - sup_ext u ≤ (diam Ω + Λε)(Σ_Q ρ_Q^N)^{1/N}`
    pub gradient_bound: f64,
    pub gradient_holds: bool,
    /// Largest `osc - (2^{N+2}/β) f(x₀) ε²` over interior contact nodes.
    pub oscillation_excess: f64,
    pub pivots: usize,
}

impl AbpReport {
    pub fn recompute_rhs(&self) -> f64 {
        self.sup_exterior + self.constant * self.diameter_factor * self.cube_sum * self.eps
    }
}

/// Sample points per axis when bounding `sup_Q f⁺`.
pub const CUBE_SAMPLES: usize = 17;

/// `sup f⁺` over the closed cube from a `17^N` tensor grid.
pub fn cube_sup_pos(f: &FieldSpec, q: &Cube) -> f64 {
    let n = q.center.len();
    let m = CUBE_SAMPLES as i64 - 1;
    LatticeBox::new(vec![0; n], vec![m; n])
        .map(|k| {
            let x: Vec<f64> = k
                .iter()
                .zip(&q.center)
                .map(|(&ki, c)| c - q.side / 2.0 + q.side * ki as f64 / m as f64)
                .collect();
            f.eval(&x).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Checks the ε-ABP inequality for a subsolution `u` of the scenario.
pub fn verify_abp(scn: &Scenario, u: &GridFunction) -> Result<AbpReport> {
    let grid = u.grid.clone();
    let n = grid.dim();
    if n > 2 {
        return Err(LabError::Unsupported(format!("ABP check in dimension {n}")));
    }
    let p = scn.params;
    let f_grid = scn.f_on(&grid);
    let tol = scn.tolerance(&grid) / (p.eps * p.eps);
    let res = residual(u, &scn.family, &f_grid, &p, tol)?;
    if !res.is_subsolution() {
        return Err(LabError::NotSubsolution {
            min_residual: res.min(),
        });
    }
    let env = concave_envelope(u)?;
    let contact = contact_set(&env, None);
    let lhs = grid
        .interior
        .iter()
        .map(|&i| u.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<Vec<f64>> = contact.nodes.iter().map(|&i| grid.coords(i)).collect();
    let cubes = if lhs > env.sup_exterior {
        eps_cover(CoverRegion::Points(&pts), p.eps)?
    } else {
        Vec::new()
    };
    let rhos: Vec<Superdiff> = contact
        .nodes
        .par_iter()
        .map(|&i| superdiff_bound(&env, i, p.eps))
        .collect::<Result<_>>()?;
    let terms: Vec<CubeTerm> = cubes
        .par_iter()
        .map(|q| {
            let rho = pts
                .iter()
                .zip(&rhos)
                .filter(|(x, _)| q.closure_contains(x))
                .map(|(_, s)| s.rho)
                .fold(0.0, f64::max);
            CubeTerm {
                center: q.center.clone(),
                side: q.side,
                sup_f: cube_sup_pos(&scn.f, q),
                rho,
            }
        })
        .collect();
    let nf = n as f64;
    let cube_sum = terms
        .iter()
        .map(|t| t.sup_f.powf(nf))
        .sum::<f64>()
        .powf(1.0 / nf);
    let constant = 2f64.powi(n as i32 + 3) / p.beta;
    let diameter_factor = scn.domain.diameter() + p.lambda * p.eps;
    let rhs = env.sup_exterior + constant * diameter_factor * cube_sum * p.eps;
    let gradient_bound = diameter_factor
        * terms
            .iter()
            .map(|t| t.rho.powf(nf))
            .sum::<f64>()
            .powf(1.0 / nf);
    let osc_factor = 2f64.powi(n as i32 + 2) / p.beta * p.eps * p.eps;
    let oscillation_excess = contact
        .nodes
        .iter()
        .zip(&rhos)
        .filter(|(&i, _)| grid.class[i] == NodeClass::Interior)
        .map(|(&i, s)| s.osc - osc_factor * f_grid.values[i].max(0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AbpReport {
        dim: n,
        lhs,
        sup_exterior: env.sup_exterior,
        beta: p.beta,
        constant,
        diameter_factor,
        cube_sum,
        eps: p.eps,
        rhs,
        pass: lhs <= rhs + 1e-9,
        contact_nodes: contact.nodes.len(),
        cubes: terms,
        gradient_bound,
        gradient_holds: lhs - env.sup_exterior <= gradient_bound + 1e-9,
        oscillation_excess,
        pivots: env.pivots,
    })
}

/// `f̃(x)` = average of the zero-extended `f` over `B_ε(x)`, at every classified node.
/// Values of `f` are read at interior nodes only.
pub fn mollify_f(f: &GridFunction, eps: f64) -> Result<GridFunction> {
    let grid = &f.grid;
    let rule = BallRule::new(grid.dim(), grid.h, eps);
    let inside = |id: usize| grid.class[id] == NodeClass::Interior;
    let zero_ext = |x: &[f64]| -> f64 {
        let mut st = Vec::new();
        match grid.stencil(x, &mut st) {
            Ok(()) => st
                .iter()
                .map(|&(i, w)| if inside(i) { w * f.values[i] } else { 0.0 })
                .sum(),
            Err(_) => 0.0,
        }
    };
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|id| {
            if !grid.is_classified(id) {
                return 0.0;
            }
            match &rule.lattice {
                Some(keys) => keys
                    .iter()
                    .zip(&rule.weights)
                    .map(|(k, w)| match grid.offset(id, k) {
                        Some(j) if inside(j) => w * f.values[j],
                        _ => 0.0,
                    })
                    .sum(),
                None => {
                    let x = grid.coords(id);
                    rule.offsets
                        .iter()
                        .zip(&rule.weights)
                        .map(|(o, w)| {
                            let y: Vec<f64> = x.iter().zip(o).map(|(a, b)| a + b).collect();
                            w * zero_ext(&y)
                        })
                        .sum()
                }
            }
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Odd `ℓ` with `ℓ - 2 < 9√N ≤ ℓ`.
pub fn ell(dim: usize) -> u64 {
    let t = 9.0 * (dim as f64).sqrt();
    let mut l = t.ceil() as u64;
    if l % 2 == 0 {
        l += 1;
    }
    l
}

/// `2^{N+3} ℓ / |B_1|^{1/N}`
pub fn measurable_constant(dim: usize) -> f64 {
    2f64.powi(dim as i32 + 3) * ell(dim) as f64 / unit_ball_volume(dim).powf(1.0 / dim as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurablePoint {
    pub x0: Vec<f64>,
    /// `E[ε² Σ f(X_i)]`
    pub lhs: Stat,
    pub exit_time: Stat,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurableAbpReport {
    pub ell: u64,
    pub constant: f64,
    pub f_sup: f64,
    pub f_ln: f64,
    pub diameter_factor: f64,
    pub points: Vec<MeasurablePoint>,
    pub pass: bool,
}

/// Monte Carlo check of `E[ε² Σ f] ≤ (ε² + α E[ε²τ]) ‖f‖_∞ + C (diam Ω + Λε) ‖f‖_N`
/// at the scenario's probes (the domain centre when there are none).
pub fn verify_abp_measurable(
    scn: &Scenario,
    n_paths: usize,
    seed: u64,
) -> Result<MeasurableAbpReport> {
    let n = scn.dim();
    let f_sup = scn
        .f
        .known_sup_abs()
        .ok_or_else(|| LabError::Unsupported("f without a known sup norm".into()))?;
    let f_ln = scn
        .f
        .known_ln_norm(&scn.domain)
        .ok_or_else(|| LabError::Unsupported("f without a known L^N norm".into()))?;
    let mut zero_g = scn.clone();
    zero_g.g = FieldSpec::constant(0.0);
    let p = scn.params;
    let e2 = p.eps * p.eps;
    let constant = measurable_constant(n);
    let diameter_factor = scn.domain.diameter() + p.lambda * p.eps;
    let probes = if scn.probes.is_empty() {
        vec![scn.domain.center().to_vec()]
    } else {
        scn.probes.clone()
    };
    let mut points = Vec::with_capacity(probes.len());
    for x0 in probes {
        let runs = run_batch(&x0, &zero_g, n_paths, seed)?;
        let ok: Vec<_> = runs.iter().filter(|r| !r.capped).collect();
        let pay: Vec<f64> = ok.iter().map(|r| r.payoff).collect();
        let tau: Vec<f64> = ok.iter().map(|r| e2 * r.tau as f64).collect();
        let lhs = Stat::from_samples(&pay);
        let exit_time = Stat::from_samples(&tau);
        let rhs = (e2 + p.alpha * exit_time.mean) * f_sup + constant * diameter_factor * f_ln;
        points.push(MeasurablePoint {
            x0,
            lhs,
            exit_time,
            rhs,
            slack: rhs - lhs.mean,
            pass: lhs.mean <= rhs + 3.0 * lhs.se,
        });
    }
    let pass = points.iter().all(|q| q.pass);
    Ok(MeasurableAbpReport {
        ell: ell(n),
        constant,
        f_sup,
        f_ln,
        diameter_factor,
        points,
        pass,
    })
}
