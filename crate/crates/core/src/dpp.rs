//! The discrete operator `L_ε`, its Pucci extremal versions, residual
//! classification, and the monotone Picard iteration for the DPP
//!
//! ```text
//! u(x) = α ∫ u(x+εz) dν_x(z) + β ⨍_{B_ε(x)} u + ε² f(x)   in Ω,   u = g outside.
//! ```

use std::sync::Arc;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{Grid, NodeClass};
use crate::gridfn::GridFunction;
use crate::measures::{expect, DirectionSet, Extremum, MeasureFamily};
use crate::quadrature::BallRule;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(LabError::invalid("params.eps", "must be positive"));
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(LabError::invalid(
                "params.alpha, params.beta",
                format!("alpha + beta = {} must equal 1", self.alpha + self.beta),
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(LabError::invalid("params.beta", "must lie in (0, 1]"));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(LabError::invalid("params.alpha", "must lie in [0, 1)"));
        }
        if !(self.lambda >= 1.0) {
            return Err(LabError::invalid("params.lambda", "must be at least 1"));
        }
        Ok(())
    }

    /// Ball second-moment constant `N/(N+2)`.
    pub fn ball_moment(dim: usize) -> f64 {
        dim as f64 / (dim as f64 + 2.0)
    }
}

fn node_of(grid: &Grid, x: &[f64]) -> Option<usize> {
    let k: Vec<i64> = x.iter().map(|v| (v / grid.h).round() as i64).collect();
    let id = grid.node_at(&k)?;
    let y = grid.coords(id);
    (y.iter()
        .zip(x)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * grid.h))
    .then_some(id)
}

/// Appends the weighted stencil of the ball average at `x` to `out`.
fn ball_stencil(
    grid: &Grid,
    rule: &BallRule,
    x: &[f64],
    scale: f64,
    out: &mut Vec<(usize, f64)>,
) -> Result<()> {
    if let (Some(lat), Some(id)) = (&rule.lattice, node_of(grid, x)) {
        for (k, w) in lat.iter().zip(&rule.weights) {
            let j = grid
                .offset(id, k)
                .filter(|&j| grid.is_classified(j))
                .ok_or_else(|| LabError::StencilEscape { point: x.to_vec() })?;
            out.push((j, scale * w));
        }
        return Ok(());
    }
    let mut y = vec![0.0; x.len()];
    let mut tmp = Vec::new();
    for (o, w) in rule.offsets.iter().zip(&rule.weights) {
        for i in 0..x.len() {
            y[i] = x[i] + o[i];
        }
        tmp.clear();
        grid.stencil(&y, &mut tmp)?;
        out.extend(tmp.iter().map(|&(j, v)| (j, scale * w * v)));
    }
    Ok(())
}

/// Discrete average of `u` over `B_ε(x)`.
pub fn ball_average(u: &GridFunction, x: &[f64], eps: f64) -> Result<f64> {
    let rule = BallRule::new(u.grid.dim(), u.grid.h, eps);
    ball_average_with(u, &rule, x)
}

pub fn ball_average_with(u: &GridFunction, rule: &BallRule, x: &[f64]) -> Result<f64> {
    let mut st = Vec::new();
    ball_stencil(&u.grid, rule, x, 1.0, &mut st)?;
    Ok(st.iter().map(|&(j, w)| w * u.values[j]).sum())
}

fn interior_node(u: &GridFunction, x: &[f64]) -> Result<usize> {
    node_of(&u.grid, x)
        .filter(|&i| u.grid.class[i] == NodeClass::Interior)
        .ok_or_else(|| LabError::invalid("x", "not an interior node"))
}

/// `L_ε u(x) = (α ∫u(x+εz)dν_x + β ⨍_{B_ε(x)} u - u(x)) / ε²`.
pub fn apply_l(u: &GridFunction, fam: &MeasureFamily, p: &Params, x: &[f64]) -> Result<f64> {
    let rule = BallRule::new(u.grid.dim(), u.grid.h, p.eps);
    apply_l_with(u, fam, p, &rule, x)
}

pub fn apply_l_with(
    u: &GridFunction,
    fam: &MeasureFamily,
    p: &Params,
    rule: &BallRule,
    x: &[f64],
) -> Result<f64> {
    let id = interior_node(u, x)?;
    let e = match fam {
        _ if p.alpha == 0.0 => 0.0,
        MeasureFamily::UniformBall { radius } => {
            let r = BallRule::new(u.grid.dim(), u.grid.h, radius * p.eps);
            ball_average_with(u, &r, x)?
        }
        _ => expect(fam, x, p.eps, p.lambda, |y| u.eval(y))?,
    };
    let b = ball_average_with(u, rule, x)?;
    Ok((p.alpha * e + p.beta * b - u.values[id]) / (p.eps * p.eps))
}

/// The same operator written with second differences
/// `δu(x,y) = u(x+y) + u(x-y) - 2u(x)`:
/// `(α ∫δu(x,εz)dν_x + β Σ_y w_y δu(x,y)) / 2ε²`.
pub fn apply_l_second_difference(
    u: &GridFunction,
    fam: &MeasureFamily,
    p: &Params,
    rule: &BallRule,
    x: &[f64],
) -> Result<f64> {
    let id = interior_node(u, x)?;
    let ux = u.values[id];
    let n = x.len();
    let mut yp = vec![0.0; n];
    let mut ym = vec![0.0; n];
    let mut delta = |z: &[f64], s: f64| -> Result<f64> {
        for i in 0..n {
            yp[i] = x[i] + s * z[i];
            ym[i] = x[i] - s * z[i];
        }
        Ok(u.eval(&yp)? + u.eval(&ym)? - 2.0 * ux)
    };
    let mut a = 0.0;
    if let (true, MeasureFamily::UniformBall { radius }) = (p.alpha > 0.0, fam) {
        let r = BallRule::new(n, u.grid.h, radius * p.eps);
        for (o, w) in r.offsets.iter().zip(&r.weights) {
            a += w * delta(o, 1.0)?;
        }
    } else if p.alpha > 0.0 {
        for (z, w) in fam.rule(x, p.lambda)? {
            a += w * delta(&z, p.eps)?;
        }
    }
    let mut b = 0.0;
    for (o, w) in rule.offsets.iter().zip(&rule.weights) {
        b += w * delta(o, 1.0)?;
    }
    Ok((p.alpha * a + p.beta * b) / (2.0 * p.eps * p.eps))
}

/// `(α·extremum_z δu(x,εz) + β ⨍ δu) / 2ε²` over the direction set.
pub fn apply_l_pucci(
    u: &GridFunction,
    dirs: &DirectionSet,
    p: &Params,
    x: &[f64],
    sign: Extremum,
) -> Result<f64> {
    let rule = BallRule::new(u.grid.dim(), u.grid.h, p.eps);
    let id = interior_node(u, x)?;
    let (ext, _) = crate::measures::pucci_extreme(dirs, x, p.eps, u, sign)?;
    let b = ball_average_with(u, &rule, x)? - u.values[id];
    Ok((p.alpha * ext + p.beta * b) / (p.eps * p.eps))
}

/// Merged sparse row.
fn merge(mut row: Vec<(usize, f64)>) -> Vec<(u32, f64)> {
    row.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(row.len());
    for (j, w) in row {
        match out.last_mut() {
            Some(last) if last.0 as usize == j => last.1 += w,
            _ => out.push((j as u32, w)),
        }
    }
    out
}

/// The affine map `u ↦ α E_ν[u] + β B[u] + ε² f` restricted to interior nodes,
/// stored as a CSR matrix.
#[derive(Debug, Clone)]
pub struct LinearDpp {
    pub grid: Arc<Grid>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// `ε² f` at each interior node, in `grid.interior` order.
    pub rhs: Vec<f64>,
}

impl LinearDpp {
    pub fn build(
        grid: &Arc<Grid>,
        fam: &MeasureFamily,
        p: &Params,
        f: &GridFunction,
    ) -> Result<Self> {
        let rule = BallRule::new(grid.dim(), grid.h, p.eps);
        // a uniform-ball family reuses the lattice ball rule at radius rε
        let alpha_ball = match fam {
            MeasureFamily::UniformBall { radius } => {
                Some(BallRule::new(grid.dim(), grid.h, radius * p.eps))
            }
            _ => None,
        };
        let rows: Vec<Vec<(u32, f64)>> = grid
            .interior
            .par_iter()
            .map(|&id| {
                let x = grid.coords(id);
                let mut row = Vec::new();
                if let (true, Some(r)) = (p.alpha > 0.0, &alpha_ball) {
                    ball_stencil(grid, r, &x, p.alpha, &mut row)?;
                } else if p.alpha > 0.0 {
                    let mut y = vec![0.0; x.len()];
                    for (z, w) in fam.rule(&x, p.lambda)? {
                        for i in 0..x.len() {
                            y[i] = x[i] + p.eps * z[i];
                        }
                        let start = row.len();
                        grid.stencil(&y, &mut row)?;
                        for e in &mut row[start..] {
                            e.1 *= p.alpha * w;
                        }
                    }
                }
                ball_stencil(grid, &rule, &x, p.beta, &mut row)?;
                Ok(merge(row))
            })
            .collect::<Result<_>>()?;
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in rows {
            for (j, w) in r {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        let e2 = p.eps * p.eps;
        let rhs = grid.interior.iter().map(|&i| e2 * f.values[i]).collect();
        Ok(LinearDpp {
            grid: grid.clone(),
            row_ptr,
            cols,
            vals,
            rhs,
        })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// New interior values `T(u)` in `grid.interior` order.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.par_chunks_mut(2048).enumerate().for_each(|(c, chunk)| {
            let base = c * 2048;
            for (k, o) in chunk.iter_mut().enumerate() {
                let r = base + k;
                let mut acc = self.rhs[r];
                for t in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[t] * u[self.cols[t] as usize];
                }
                *o = acc;
            }
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Solution,
    Subsolution,
    Supersolution,
    Neither,
}

#[derive(Debug, Clone)]
pub struct Residual {
    pub sup_norm: f64,
    /// `L_ε u + f` at each interior node, in `grid.interior` order.
    pub values: Vec<f64>,
    pub classification: Classification,
    pub tol: f64,
}

impl Residual {
    fn from_values(values: Vec<f64>, tol: f64) -> Self {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sub = lo >= -tol;
        let sup = hi <= tol;
        let classification = match (sub, sup) {
            (true, true) => Classification::Solution,
            (true, false) => Classification::Subsolution,
            (false, true) => Classification::Supersolution,
            (false, false) => Classification::Neither,
        };
        Residual {
            sup_norm: lo.abs().max(hi.abs()),
            values,
            classification,
            tol,
        }
    }

    pub fn is_subsolution(&self) -> bool {
        matches!(
            self.classification,
            Classification::Subsolution | Classification::Solution
        )
    }

    pub fn is_supersolution(&self) -> bool {
        matches!(
            self.classification,
            Classification::Supersolution | Classification::Solution
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Signed residual `L_ε u + f` at interior nodes, classified against `±tol`.
pub fn residual(
    u: &GridFunction,
    fam: &MeasureFamily,
    f: &GridFunction,
    p: &Params,
    tol: f64,
) -> Result<Residual> {
    if !u.same_grid(f) {
        return Err(LabError::invalid("f", "grid mismatch"));
    }
    let op = LinearDpp::build(&u.grid, fam, p, f)?;
    let mut t = vec![0.0; op.rhs.len()];
    op.apply(&u.values, &mut t);
    let e2 = p.eps * p.eps;
    let values = u
        .grid
        .interior
        .iter()
        .zip(&t)
        .map(|(&i, v)| (v - u.values[i]) / e2)
        .collect();
    Ok(Residual::from_values(values, tol))
}

/// `v = K + L|x|²` inside, `g` on the collar, with `L = ‖f‖∞(N+2)/(βN)` and
/// `K = min_collar (g - L|x|²)`.
pub fn initial_subsolution(
    grid: &Arc<Grid>,
    f: &GridFunction,
    g: &GridFunction,
    p: &Params,
) -> GridFunction {
    let n = grid.dim() as f64;
    let fmax = f.interior_sup_abs();
    let l = fmax * (n + 2.0) / (p.beta * n);
    let sq = |id: usize| grid.coords(id).iter().map(|v| v * v).sum::<f64>();
    let k = grid
        .collar_nodes
        .iter()
        .map(|&i| g.values[i] - l * sq(i))
        .fold(f64::INFINITY, f64::min);
    let mut v = g.clone();
    for &i in &grid.interior {
        v.values[i] = k + l * sq(i);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Monotone,
    ArbitraryInit,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub mode: SolveMode,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub increment: f64,
    /// `increment / ε²`, the sup-norm of `L_ε u_n + f`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    pub log: Vec<IterRecord>,
    pub iterations: usize,
    /// `inf β(x)` for variable-coefficient runs.
    pub beta_minus: Option<f64>,
}

impl Solution {
    pub fn final_increment(&self) -> f64 {
        self.log.last().map_or(0.0, |r| r.increment)
    }
}

/// Jacobi fixed-point loop shared by the linear and Pucci solvers. `sweep`
/// writes new interior values given the current full vector.
fn picard(
    start: GridFunction,
    opts: &SolveOptions,
    eps: f64,
    mut sweep: impl FnMut(&[f64], &mut [f64]),
) -> Result<(GridFunction, Vec<IterRecord>)> {
    let mut u = start;
    let grid = u.grid.clone();
    let mut next = vec![0.0; grid.interior.len()];
    let mut log = Vec::new();
    let scale = u.values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mono_tol = 1e-12 * scale;
    for it in 1..=opts.max_iter {
        sweep(&u.values, &mut next);
        let mut inc: f64 = 0.0;
        for (&i, &v) in grid.interior.iter().zip(&next) {
            let d = v - u.values[i];
            if opts.mode == SolveMode::Monotone && d < -mono_tol {
                return Err(LabError::MonotonicityViolation { node: i, drop: -d });
            }
            inc = inc.max(d.abs());
            u.values[i] = v;
        }
        if !inc.is_finite() {
            return Err(LabError::NoConvergence {
                iterations: it,
                increment: inc,
            });
        }
        log.push(IterRecord {
            iteration: it,
            increment: inc,
            residual: inc / (eps * eps),
        });
        if inc <= opts.tol {
            return Ok((u, log));
        }
    }
    Err(LabError::NoConvergence {
        iterations: opts.max_iter,
        increment: log.last().map_or(f64::NAN, |r| r.increment),
    })
}

/// Picard iteration for the DPP on the scenario's grid.
pub fn solve_dpp(scn: &Scenario, opts: &SolveOptions) -> Result<Solution> {
    let grid = scn.grid()?;
    let f = scn.f_on(&grid);
    let g = scn.g_on(&grid);
    solve_dpp_on(&grid, &scn.family, &scn.params, &f, &g, opts)
}

pub fn solve_dpp_on(
    grid: &Arc<Grid>,
    fam: &MeasureFamily,
    p: &Params,
    f: &GridFunction,
    g: &GridFunction,
    opts: &SolveOptions,
) -> Result<Solution> {
    if matches!(fam, MeasureFamily::PucciControl { .. }) {
        return Err(LabError::Unsupported(
            "pucci-control family; use solve_pucci".into(),
        ));
    }
    let op = LinearDpp::build(grid, fam, p, f)?;
    let start = match opts.mode {
        SolveMode::Monotone => initial_subsolution(grid, f, g, p),
        SolveMode::ArbitraryInit => g.clone(),
    };
    let (u, log) = picard(start, opts, p.eps, |u, out| op.apply(u, out))?;
    Ok(Solution {
        iterations: log.len(),
        u,
        log,
        beta_minus: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PucciKind {
    Max,
    Min,
    /// `½(max_z u(x+εz) + min_z u(x+εz))`, the tug-of-war average.
    TugOfWar,
}

/// Per-node candidate rows for the α term: one merged stencil per direction.
struct PucciOp {
    /// For each interior node, the start of its candidates in `cand_ptr`.
    node_ptr: Vec<usize>,
    cand_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    ball: LinearDpp,
    alpha: Vec<f64>,
    kind: PucciKind,
}

impl PucciOp {
    fn build(
        grid: &Arc<Grid>,
        dirs: &DirectionSet,
        p: &Params,
        f: &GridFunction,
        beta: &[f64],
        kind: PucciKind,
    ) -> Result<Self> {
        // candidates: pairs ½(u(x+εz)+u(x-εz)) for max/min, single points for tug-of-war
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for z in &dirs.vectors {
            if kind != PucciKind::TugOfWar {
                let neg: Vec<f64> = z.iter().map(|c| -c).collect();
                if vecs
                    .iter()
                    .any(|w| w.iter().zip(&neg).all(|(a, b)| (a - b).abs() < 1e-14) && neg != *z)
                {
                    continue;
                }
            }
            vecs.push(z.clone());
        }
        let per_node: Vec<Vec<Vec<(u32, f64)>>> = grid
            .interior
            .par_iter()
            .map(|&id| {
                let x = grid.coords(id);
                let n = x.len();
                let mut y = vec![0.0; n];
                vecs.iter()
                    .map(|z| {
                        let mut row = Vec::new();
                        let signs: &[f64] = if kind == PucciKind::TugOfWar {
                            &[1.0]
                        } else {
                            &[1.0, -1.0]
                        };
                        let wt = 1.0 / signs.len() as f64;
                        for s in signs {
                            for i in 0..n {
                                y[i] = x[i] + s * p.eps * z[i];
                            }
                            let st = row.len();
                            grid.stencil(&y, &mut row)?;
                            for e in &mut row[st..] {
                                e.1 *= wt;
                            }
                        }
                        Ok(merge(row))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut node_ptr = vec![0];
        let mut cand_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for cands in per_node {
            for c in cands {
                for (j, w) in c {
                    cols.push(j);
                    vals.push(w);
                }
                cand_ptr.push(cols.len());
            }
            node_ptr.push(cand_ptr.len() - 1);
        }
        // β(x)·ball average + ε² f as a linear operator with α = 0
        let ball_params = Params {
            alpha: 0.0,
            beta: 1.0,
            ..*p
        };
        let mut ball = LinearDpp::build(
            grid,
            &MeasureFamily::UniformBall { radius: 1.0 },
            &ball_params,
            f,
        )?;
        for (r, b) in beta.iter().enumerate() {
            for t in ball.row_ptr[r]..ball.row_ptr[r + 1] {
                ball.vals[t] *= b;
            }
        }
        Ok(PucciOp {
            node_ptr,
            cand_ptr,
            cols,
            vals,
            ball,
            alpha: beta.iter().map(|b| 1.0 - b).collect(),
            kind,
        })
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.ball.apply(u, out);
        out.par_chunks_mut(2048).enumerate().for_each(|(c, chunk)| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let r = c * 2048 + k;
                let mut hi = f64::NEG_INFINITY;
                let mut lo = f64::INFINITY;
                for cand in self.node_ptr[r]..self.node_ptr[r + 1] {
                    let mut acc = 0.0;
                    for t in self.cand_ptr[cand]..self.cand_ptr[cand + 1] {
                        acc += self.vals[t] * u[self.cols[t] as usize];
                    }
                    hi = hi.max(acc);
                    lo = lo.min(acc);
                }
                let a = match self.kind {
                    PucciKind::Max => hi,
                    PucciKind::Min => lo,
                    PucciKind::TugOfWar => 0.5 * (hi + lo),
                };
                *o += self.alpha[r] * a;
            }
        });
    }
}

/// Direction set of a scenario: its pucci-control resolution, else the default lattice.
pub fn scenario_directions(scn: &Scenario) -> DirectionSet {
    let m = match scn.family {
        MeasureFamily::PucciControl { resolution } => resolution,
        _ => 8,
    };
    DirectionSet::lattice(scn.dim(), scn.params.lambda, m)
}

/// Monotone iteration of the sup/inf-form DPP. With a `beta_field` the
/// coefficients vary in space and `β⁻ = inf β` is reported.
pub fn solve_pucci(
    scn: &Scenario,
    dirs: &DirectionSet,
    kind: PucciKind,
    opts: &SolveOptions,
) -> Result<Solution> {
    let grid = scn.grid()?;
    let f = scn.f_on(&grid);
    let g = scn.g_on(&grid);
    let beta: Vec<f64> = grid
        .interior
        .iter()
        .map(|&i| scn.beta_at(&grid.coords(i)))
        .collect();
    solve_pucci_on(&grid, dirs, &scn.params, &f, &g, &beta, kind, opts)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_pucci_on(
    grid: &Arc<Grid>,
    dirs: &DirectionSet,
    p: &Params,
    f: &GridFunction,
    g: &GridFunction,
    beta: &[f64],
    kind: PucciKind,
    opts: &SolveOptions,
) -> Result<Solution> {
    if dirs.vectors.is_empty() {
        return Err(LabError::invalid("dirs", "empty direction set"));
    }
    let op = PucciOp::build(grid, dirs, p, f, beta, kind)?;
    let beta_minus = beta.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmin = Params {
        beta: beta_minus,
        alpha: 1.0 - beta_minus,
        ..*p
    };
    let start = match opts.mode {
        SolveMode::Monotone => initial_subsolution(grid, f, g, &pmin),
        SolveMode::ArbitraryInit => g.clone(),
    };
    let (u, log) = picard(start, opts, p.eps, |u, out| op.apply(u, out))?;
    Ok(Solution {
        iterations: log.len(),
        u,
        log,
        beta_minus: Some(beta_minus),
    })
}

/// Pucci-type inequalities `L⁺u + |f| ≥ 0` and `L⁻u - |f| ≤ 0` with constant
/// coefficients `(1-β⁻, β⁻)`. Returns the worst violations (≤ 0 means satisfied).
pub fn pucci_inequalities(
    u: &GridFunction,
    dirs: &DirectionSet,
    p: &Params,
    beta_minus: f64,
    f: &GridFunction,
) -> Result<(f64, f64)> {
    let pm = Params {
        alpha: 1.0 - beta_minus,
        beta: beta_minus,
        ..*p
    };
    let fabs = GridFunction::new(u.grid.clone(), f.values.iter().map(|v| v.abs()).collect())?;
    let plus = PucciOp::build(
        &u.grid,
        dirs,
        &pm,
        &fabs,
        &vec![beta_minus; u.grid.interior.len()],
        PucciKind::Max,
    )?;
    let neg = GridFunction::new(u.grid.clone(), fabs.values.iter().map(|v| -v).collect())?;
    let minus = PucciOp::build(
        &u.grid,
        dirs,
        &pm,
        &neg,
        &vec![beta_minus; u.grid.interior.len()],
        PucciKind::Min,
    )?;
    let mut a = vec![0.0; u.grid.interior.len()];
    let mut b = vec![0.0; u.grid.interior.len()];
    plus.apply(&u.values, &mut a);
    minus.apply(&u.values, &mut b);
    let e2 = p.eps * p.eps;
    let mut worst_plus: f64 = f64::NEG_INFINITY;
    let mut worst_minus: f64 = f64::NEG_INFINITY;
    for (k, &i) in u.grid.interior.iter().enumerate() {
        // L⁺u + |f| ≥ 0  ⇔  T⁺u - u ≥ 0
        worst_plus = worst_plus.max(-(a[k] - u.values[i]) / e2);
        worst_minus = worst_minus.max((b[k] - u.values[i]) / e2);
    }
    Ok((worst_plus, worst_minus))
}

/// One row of the exact check of the unbounded solution `v(2^{-k}) = 4^k`.
#[derive(Debug, Clone, Serialize)]
pub struct NonuniquenessRow {
    pub k: u32,
    pub x: String,
    pub v: String,
    pub alpha_term: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonuniquenessReport {
    pub rows: Vec<NonuniquenessRow>,
    pub unbounded_is_solution: bool,
    pub zero_is_solution: bool,
}

type Q = Ratio<i128>;

/// `v(q) = 4^j` if `q = 2^{-j}` with `j ≥ 1`, zero otherwise.
fn spike(q: Q) -> Q {
    if *q.numer() != 1 || *q.denom() <= 1 {
        return Q::from_integer(0);
    }
    let d = *q.denom();
    if d & (d - 1) != 0 {
        return Q::from_integer(0);
    }
    Q::from_integer(d * d)
}

/// On `Ω = (-2, 2)`, `ε = 1`, `α = β = ½`, with `ν_x = ½(δ_{2^{-k-1}} + δ_{-2^{-k-1}})`
/// at `x = 2^{-k}` and the ball term identically zero (the candidate vanishes off
/// a countable set), checks `v(x) = α·½(v(x + 2^{-k-1}) + v(x - 2^{-k-1}))` exactly.
pub fn nonuniqueness_check(k_max: u32) -> Result<NonuniquenessReport> {
    if k_max == 0 || k_max > 25 {
        return Err(LabError::invalid("k_max", "must lie in 1..=25"));
    }
    let half = Q::new(1, 2);
    let mut rows = Vec::new();
    let mut all = true;
    for k in 1..=k_max {
        let x = Q::new(1, 1i128 << k);
        let step = Q::new(1, 1i128 << (k + 1));
        let alpha_term = half * half * (spike(x + step) + spike(x - step));
        let v = spike(x);
        let err = v - alpha_term;
        all &= err == Q::from_integer(0);
        rows.push(NonuniquenessRow {
            k,
            x: x.to_string(),
            v: v.to_string(),
            alpha_term: alpha_term.to_string(),
            error: err.to_string(),
        });
    }
    // u ≡ 0: both terms vanish
    let zero = Q::from_integer(0);
    let zero_ok = half * half * (zero + zero) + half * zero == zero;
    Ok(NonuniquenessReport {
        rows,
        unbounded_is_solution: all,
        zero_is_solution: zero_ok,
    })
}
