//! The family `x ↦ ν_x` of symmetric probability measures supported in the
//! closed ball `B_Λ`, with expectation rules and samplers.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::FieldSpec;
use crate::geometry::{norm, LatticeBox};
use crate::gridfn::GridFunction;
use crate::quadrature::{ball_rule, shell_rule_1d, shell_rule_2d, Rule};
use crate::rng::{path_stream, unit_ball, Stream};

const REJECTION_CAP: usize = 1_000_000;

/// Direction `d(x)` of a Dirac pair `½(δ_d + δ_{-d})`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionField {
    Constant {
        vector: Vec<f64>,
    },
    /// 2D: `magnitude·(cos θ, sin θ)` with `θ = turns·arg(x) + offset`.
    Rotating {
        magnitude: f64,
        turns: f64,
        offset: f64,
    },
    /// Unit direction away from `center`, scaled by `magnitude`.
    Radial {
        center: Vec<f64>,
        magnitude: f64,
    },
    /// `magnitude · ∇φ/|∇φ|` for a given field `φ` (e.g. a p-harmonic function).
    NormalizedGradient {
        field: FieldSpec,
        magnitude: f64,
    },
    /// Alternates between `a` and `b` on a checkerboard of cubes of side `cell`.
    Checkerboard {
        cell: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// CSV with columns `x1..xN,d1..dN` on the lattice `spacing·ℤ^N`.
    Tabulated {
        spacing: f64,
        path: String,
        #[serde(skip)]
        table: HashMap<Vec<i64>, Vec<f64>>,
    },
}

impl DirectionField {
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DirectionField::Constant { vector } => vector.clone(),
            DirectionField::Rotating {
                magnitude,
                turns,
                offset,
            } => {
                let th = turns * x[1].atan2(x[0]) + offset;
                vec![magnitude * th.cos(), magnitude * th.sin()]
            }
            DirectionField::Radial { center, magnitude } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                unit_or_first_axis(&v, *magnitude)
            }
            DirectionField::NormalizedGradient { field, magnitude } => {
                unit_or_first_axis(&field.gradient(x), *magnitude)
            }
            DirectionField::Checkerboard { cell, a, b } => {
                if checker_parity(x, *cell) {
                    a.clone()
                } else {
                    b.clone()
                }
            }
            DirectionField::Tabulated { spacing, table, .. } => {
                let k: Vec<i64> = x.iter().map(|v| (v / spacing).round() as i64).collect();
                table.get(&k).cloned().unwrap_or_else(|| vec![0.0; x.len()])
            }
        }
    }

    fn max_norm(&self) -> Option<f64> {
        match self {
            DirectionField::Constant { vector } => Some(norm(vector)),
            DirectionField::Rotating { magnitude, .. }
            | DirectionField::Radial { magnitude, .. }
            | DirectionField::NormalizedGradient { magnitude, .. } => Some(magnitude.abs()),
            DirectionField::Checkerboard { a, b, .. } => Some(norm(a).max(norm(b))),
            DirectionField::Tabulated { table, .. } => {
                Some(table.values().map(|v| norm(v)).fold(0.0, f64::max))
            }
        }
    }
}

fn unit_or_first_axis(v: &[f64], magnitude: f64) -> Vec<f64> {
    let n = norm(v);
    if n > 1e-300 {
        v.iter().map(|c| magnitude * c / n).collect()
    } else {
        let mut e = vec![0.0; v.len()];
        e[0] = magnitude;
        e
    }
}

fn checker_parity(x: &[f64], cell: f64) -> bool {
    x.iter()
        .map(|v| (v / cell).floor() as i64)
        .sum::<i64>()
        .rem_euclid(2)
        == 0
}

/// Orientation of the ellipse `E_x` (2D only).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RotationField {
    Constant {
        angle: f64,
    },
    /// `θ = turns·arg(x) + offset`.
    Polar {
        turns: f64,
        offset: f64,
    },
    Checkerboard {
        cell: f64,
        a: f64,
        b: f64,
    },
}

impl RotationField {
    pub fn angle(&self, x: &[f64]) -> f64 {
        match self {
            RotationField::Constant { angle } => *angle,
            RotationField::Polar { turns, offset } => {
                if x.len() < 2 {
                    *offset
                } else {
                    turns * x[1].atan2(x[0]) + offset
                }
            }
            RotationField::Checkerboard { cell, a, b } => {
                if checker_parity(x, *cell) {
                    *a
                } else {
                    *b
                }
            }
        }
    }
}

/// Map `h(x, ·)` pushing the uniform measure on `B_1` forward.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PushMap {
    Scaled {
        scale: f64,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    /// `y + shift`, radially projected onto the closed ball `B_Λ`. Not symmetric.
    Shifted {
        shift: Vec<f64>,
    },
    /// 2D: stretch along a direction that turns with `arg(x)`.
    RotatingStretch {
        stretch: f64,
        turns: f64,
    },
}

impl PushMap {
    pub fn apply(&self, x: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
        match self {
            PushMap::Scaled { scale } => y.iter().map(|v| scale * v).collect(),
            PushMap::Linear { matrix } => matrix
                .iter()
                .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
                .collect(),
            PushMap::Shifted { shift } => {
                let z: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a + b).collect();
                let n = norm(&z);
                if n > lambda {
                    z.iter().map(|v| v * lambda / n).collect()
                } else {
                    z
                }
            }
            PushMap::RotatingStretch { stretch, turns } => {
                let th = turns * x[1].atan2(x[0]);
                let (c, s) = (th.cos(), th.sin());
                let a = c * y[0] + s * y[1];
                let b = -s * y[0] + c * y[1];
                let a = a * stretch;
                vec![c * a - s * b, s * a + c * b]
            }
        }
    }

    fn max_gain(&self, dim: usize, lambda: f64) -> f64 {
        match self {
            PushMap::Scaled { scale } => scale.abs(),
            PushMap::Linear { matrix } => operator_norm(matrix, dim),
            PushMap::Shifted { .. } => lambda,
            PushMap::RotatingStretch { stretch, .. } => stretch.abs().max(1.0),
        }
    }
}

fn operator_norm(m: &[Vec<f64>], dim: usize) -> f64 {
    // power iteration on MᵀM
    let mut v = vec![1.0; dim];
    let mut s = 0.0;
    for _ in 0..200 {
        let mv: Vec<f64> = m
            .iter()
            .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let mut w = vec![0.0; dim];
        for (i, r) in m.iter().enumerate() {
            for j in 0..dim {
                w[j] += r[j] * mv[i];
            }
        }
        let n = norm(&w);
        if n == 0.0 {
            return 0.0;
        }
        s = n;
        v = w.iter().map(|c| c / n).collect();
    }
    s.sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub z: Vec<f64>,
    pub w: f64,
}

fn default_push_nodes() -> usize {
    41
}

fn default_resolution() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureFamily {
    UniformBall {
        radius: f64,
    },
    DiracPair {
        direction: DirectionField,
    },
    /// Uniform measure on `E_x \ B_1`, `E_x` an ellipsoid with the given semi-axes.
    EllipsoidShell {
        axes: Vec<f64>,
        rotation: RotationField,
    },
    Pushforward {
        map: PushMap,
        #[serde(default = "default_push_nodes")]
        nodes_per_axis: usize,
    },
    /// Expectation replaced by an extremum over the lattice direction set.
    PucciControl {
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    FiniteMixture {
        atoms: Vec<Atom>,
    },
}

impl MeasureFamily {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MeasureFamily::UniformBall { .. } => "uniform-ball",
            MeasureFamily::DiracPair { .. } => "dirac-pair",
            MeasureFamily::EllipsoidShell { .. } => "ellipsoid-shell",
            MeasureFamily::Pushforward { .. } => "pushforward",
            MeasureFamily::PucciControl { .. } => "pucci-control",
            MeasureFamily::FiniteMixture { .. } => "finite-mixture",
        }
    }

    pub fn validate(&self, dim: usize, lambda: f64) -> Result<()> {
        let tol = 1e-12;
        match self {
            MeasureFamily::UniformBall { radius } => {
                if !(*radius > 0.0 && *radius <= lambda + tol) {
                    return Err(LabError::invalid("family.radius", "must lie in (0, Λ]"));
                }
            }
            MeasureFamily::DiracPair { direction } => {
                if let DirectionField::Constant { vector }
                | DirectionField::Checkerboard { a: vector, .. } = direction
                {
                    if vector.len() != dim {
                        return Err(LabError::Dimension {
                            expected: dim,
                            got: vector.len(),
                        });
                    }
                }
                if matches!(direction, DirectionField::Rotating { .. }) && dim != 2 {
                    return Err(LabError::invalid(
                        "family.direction",
                        "rotating field needs N = 2",
                    ));
                }
                if direction.max_norm().unwrap_or(0.0) > lambda + tol {
                    return Err(LabError::invalid("family.direction", "|d| exceeds Λ"));
                }
            }
            MeasureFamily::EllipsoidShell { axes, .. } => {
                if axes.len() != dim {
                    return Err(LabError::Dimension {
                        expected: dim,
                        got: axes.len(),
                    });
                }
                if axes.iter().any(|a| *a < 1.0 || *a > lambda + tol) {
                    return Err(LabError::invalid("family.axes", "need 1 ≤ axis ≤ Λ"));
                }
                if axes.iter().all(|a| *a <= 1.0 + tol) {
                    return Err(LabError::invalid("family.axes", "shell E \\ B_1 is empty"));
                }
            }
            MeasureFamily::Pushforward {
                map,
                nodes_per_axis,
            } => {
                if *nodes_per_axis < 2 {
                    return Err(LabError::invalid(
                        "family.nodes_per_axis",
                        "need at least 2",
                    ));
                }
                if matches!(map, PushMap::RotatingStretch { .. }) && dim != 2 {
                    return Err(LabError::invalid(
                        "family.map",
                        "rotating stretch needs N = 2",
                    ));
                }
                if map.max_gain(dim, lambda) > lambda + 1e-9 {
                    return Err(LabError::invalid("family.map", "map leaves B_Λ"));
                }
            }
            MeasureFamily::PucciControl { resolution } => {
                if *resolution == 0 {
                    return Err(LabError::invalid("family.resolution", "must be positive"));
                }
            }
            MeasureFamily::FiniteMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(LabError::invalid("family.atoms", "empty"));
                }
                let s: f64 = atoms.iter().map(|a| a.w).sum();
                if (s - 1.0).abs() > 1e-12 || atoms.iter().any(|a| a.w < 0.0) {
                    return Err(LabError::invalid(
                        "family.atoms",
                        "weights must be ≥ 0 and sum to 1",
                    ));
                }
                for a in atoms {
                    if a.z.len() != dim {
                        return Err(LabError::Dimension {
                            expected: dim,
                            got: a.z.len(),
                        });
                    }
                    if norm(&a.z) > lambda + tol {
                        return Err(LabError::invalid("family.atoms", "atom outside B_Λ"));
                    }
                    let mirrored = atoms.iter().any(|b| {
                        (b.w - a.w).abs() <= 1e-12
                            && b.z.iter().zip(&a.z).all(|(p, q)| (p + q).abs() <= 1e-12)
                    });
                    if !mirrored {
                        return Err(LabError::invalid(
                            "family.atoms",
                            "atom set not closed under negation",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load_tables(&mut self, base: &Path) -> Result<()> {
        if let MeasureFamily::DiracPair {
            direction:
                DirectionField::Tabulated {
                    spacing,
                    path,
                    table,
                },
        } = self
        {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(base.join(&*path))?;
            table.clear();
            for rec in rdr.records() {
                let vals: Vec<f64> = rec?
                    .iter()
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| LabError::invalid("family.direction", e.to_string()))?;
                if vals.len() % 2 != 0 || vals.is_empty() {
                    return Err(LabError::invalid(
                        "family.direction",
                        "rows must be x1..xN,d1..dN",
                    ));
                }
                let n = vals.len() / 2;
                let k = vals[..n]
                    .iter()
                    .map(|c| (c / *spacing).round() as i64)
                    .collect();
                table.insert(k, vals[n..].to_vec());
            }
        }
        if let MeasureFamily::DiracPair {
            direction: DirectionField::NormalizedGradient { field, .. },
        } = self
        {
            field.load_tables(base)?;
        }
        Ok(())
    }

    /// Weighted atoms `z` of the rule used by [`expect`] at `x`.
    pub fn rule(&self, x: &[f64], lambda: f64) -> Result<Rule> {
        let dim = x.len();
        Ok(match self {
            MeasureFamily::UniformBall { radius } => ball_rule(dim, *radius),
            MeasureFamily::DiracPair { direction } => {
                let d = direction.at(x);
                let m: Vec<f64> = d.iter().map(|v| -v).collect();
                vec![(d, 0.5), (m, 0.5)]
            }
            MeasureFamily::EllipsoidShell { axes, rotation } => match dim {
                1 => shell_rule_1d(axes[0]),
                2 => shell_rule_2d([axes[0], axes[1]], rotation.angle(x)),
                _ => shell_rule_mc(axes),
            },
            MeasureFamily::Pushforward {
                map,
                nodes_per_axis,
            } => {
                let base = if dim <= 2 {
                    midpoint_ball(dim, *nodes_per_axis)
                } else {
                    mc_ball(dim, 4096)
                };
                base.into_iter()
                    .map(|(y, w)| (map.apply(x, &y, lambda), w))
                    .collect()
            }
            MeasureFamily::PucciControl { .. } => {
                return Err(LabError::Unsupported(
                    "expectation under pucci-control; use pucci_extreme".into(),
                ))
            }
            MeasureFamily::FiniteMixture { atoms } => {
                atoms.iter().map(|a| (a.z.clone(), a.w)).collect()
            }
        })
    }

    pub fn sample(&self, x: &[f64], lambda: f64, rng: &mut Stream) -> Result<Vec<f64>> {
        let dim = x.len();
        match self {
            MeasureFamily::UniformBall { radius } => Ok(unit_ball(rng, dim)
                .into_iter()
                .map(|v| v * radius)
                .collect()),
            MeasureFamily::DiracPair { direction } => {
                let d = direction.at(x);
                Ok(if rng.gen::<bool>() {
                    d
                } else {
                    d.iter().map(|v| -v).collect()
                })
            }
            MeasureFamily::EllipsoidShell { axes, rotation } => {
                let angle = if dim == 2 { rotation.angle(x) } else { 0.0 };
                let mut y = vec![0.0; dim];
                for _ in 0..REJECTION_CAP {
                    for (v, a) in y.iter_mut().zip(axes) {
                        *v = (rng.gen::<f64>() * 2.0 - 1.0) * a;
                    }
                    let q: f64 = y.iter().zip(axes).map(|(v, a)| (v / a).powi(2)).sum();
                    let r2: f64 = y.iter().map(|v| v * v).sum();
                    if q < 1.0 && r2 >= 1.0 {
                        if dim == 2 {
                            let (c, s) = (angle.cos(), angle.sin());
                            return Ok(vec![c * y[0] - s * y[1], s * y[0] + c * y[1]]);
                        }
                        return Ok(y);
                    }
                }
                Err(LabError::SamplerExhausted(REJECTION_CAP))
            }
            MeasureFamily::Pushforward { map, .. } => {
                let y = unit_ball(rng, dim);
                Ok(map.apply(x, &y, lambda))
            }
            MeasureFamily::PucciControl { .. } => Err(LabError::Unsupported(
                "sampling a pucci-control family".into(),
            )),
            MeasureFamily::FiniteMixture { atoms } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.w;
                    if u < acc {
                        return Ok(a.z.clone());
                    }
                }
                Ok(atoms.last().unwrap().z.clone())
            }
        }
    }

    pub fn structurally_symmetric(&self) -> bool {
        !matches!(self, MeasureFamily::Pushforward { .. })
    }
}

/// `∫ φ(x + εz) dν_x(z)` by the family's deterministic rule.
pub fn expect(
    fam: &MeasureFamily,
    x: &[f64],
    eps: f64,
    lambda: f64,
    mut phi: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let rule = fam.rule(x, lambda)?;
    let mut y = vec![0.0; x.len()];
    let mut acc = 0.0;
    for (z, w) in &rule {
        for i in 0..x.len() {
            y[i] = x[i] + eps * z[i];
        }
        acc += w * phi(&y)?;
    }
    Ok(acc)
}

/// Equal-weight midpoints of the `n^N` cells of `[-1,1]^N` whose centres lie in `B_1`.
fn midpoint_ball(dim: usize, n: usize) -> Rule {
    let step = 2.0 / n as f64;
    let pts: Vec<Vec<f64>> = LatticeBox::new(vec![0; dim], vec![n as i64 - 1; dim])
        .map(|k| {
            k.iter()
                .map(|&i| -1.0 + (i as f64 + 0.5) * step)
                .collect::<Vec<f64>>()
        })
        .filter(|y| norm(y) < 1.0)
        .collect();
    let w = 1.0 / pts.len() as f64;
    pts.into_iter().map(|y| (y, w)).collect()
}

/// Antithetic Monte Carlo points in `B_1` from a fixed sub-seed.
fn mc_ball(dim: usize, n: usize) -> Rule {
    let mut rng = path_stream(0x5eed_ba11, 0);
    let w = 1.0 / (2 * (n / 2)) as f64;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let y = unit_ball(&mut rng, dim);
        out.push((y.iter().map(|v| -v).collect(), w));
        out.push((y, w));
    }
    out
}

fn shell_rule_mc(axes: &[f64]) -> Rule {
    let dim = axes.len();
    let mut rng = path_stream(0x5eed_e111, 0);
    let mut out = Vec::new();
    while out.len() < 1024 {
        let y: Vec<f64> = axes
            .iter()
            .map(|a| (rng.gen::<f64>() * 2.0 - 1.0) * a)
            .collect();
        let q: f64 = y.iter().zip(axes).map(|(v, a)| (v / a).powi(2)).sum();
        if q < 1.0 && norm(&y) >= 1.0 {
            out.push((y.iter().map(|v| -v).collect(), 0.0));
            out.push((y, 0.0));
        }
    }
    let w = 1.0 / out.len() as f64;
    out.iter_mut().for_each(|p| p.1 = w);
    let _ = dim;
    out
}

/// Finite, negation-closed set of control directions in the closed ball `B_Λ`.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub vectors: Vec<Vec<f64>>,
}

impl DirectionSet {
    /// Lattice points of `(Λ/m)ℤ^N` in the closed ball `B_Λ`.
    pub fn lattice(dim: usize, lambda: f64, m: usize) -> Self {
        let mi = m as i64;
        let vectors = LatticeBox::new(vec![-mi; dim], vec![mi; dim])
            .filter(|k| k.iter().map(|v| v * v).sum::<i64>() <= mi * mi)
            .map(|k| k.iter().map(|&v| v as f64 * lambda / m as f64).collect())
            .collect();
        DirectionSet { vectors }
    }

    /// Adds `z` and `-z` unless already present.
    pub fn with(mut self, z: &[f64]) -> Self {
        for s in [1.0, -1.0] {
            let v: Vec<f64> = z.iter().map(|c| s * c).collect();
            if !self
                .vectors
                .iter()
                .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14))
            {
                self.vectors.push(v);
            }
        }
        self
    }

    pub fn is_negation_closed(&self) -> bool {
        self.vectors.iter().all(|v| {
            self.vectors
                .iter()
                .any(|w| w.iter().zip(v).all(|(a, b)| (a + b).abs() < 1e-14))
        })
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.vectors
            .iter()
            .any(|w| w.iter().zip(z).all(|(a, b)| (a - b).abs() < 1e-12))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Max,
    Min,
}

/// Extremal value of `[u(x+εz) + u(x-εz)]/2 - u(x)` over the direction set,
/// with the index of the first extremal direction.
pub fn pucci_extreme(
    dirs: &DirectionSet,
    x: &[f64],
    eps: f64,
    u: &GridFunction,
    sign: Extremum,
) -> Result<(f64, usize)> {
    if dirs.vectors.is_empty() {
        return Err(LabError::invalid("dirs", "empty direction set"));
    }
    let ux = u.eval(x)?;
    let mut best = (f64::NAN, 0usize);
    let mut yp = vec![0.0; x.len()];
    let mut ym = vec![0.0; x.len()];
    for (i, z) in dirs.vectors.iter().enumerate() {
        for k in 0..x.len() {
            yp[k] = x[k] + eps * z[k];
            ym[k] = x[k] - eps * z[k];
        }
        let v = 0.5 * (u.eval(&yp)? + u.eval(&ym)?) - ux;
        let better = match sign {
            Extremum::Max => v > best.0,
            Extremum::Min => v < best.0,
        };
        if i == 0 || better {
            best = (v, i);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub pass: bool,
    pub structural: bool,
    /// Largest per-coordinate sup distance between the empirical CDFs of `z` and `-z`.
    pub statistic: f64,
    pub threshold: f64,
    pub samples: usize,
}

pub fn check_symmetry(
    fam: &MeasureFamily,
    x: &[f64],
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<SymmetryReport> {
    if n < 1000 {
        return Err(LabError::invalid("n", "need at least 1000 samples"));
    }
    let threshold = 4.0 / (n as f64).sqrt();
    if fam.structurally_symmetric() {
        return Ok(SymmetryReport {
            pass: true,
            structural: true,
            statistic: 0.0,
            threshold,
            samples: 0,
        });
    }
    let mut rng = path_stream(seed, 0);
    let zs: Vec<Vec<f64>> = (0..n)
        .map(|_| fam.sample(x, lambda, &mut rng))
        .collect::<Result<_>>()?;
    let mut stat: f64 = 0.0;
    for i in 0..x.len() {
        let mut a: Vec<f64> = zs.iter().map(|z| z[i]).collect();
        let mut b: Vec<f64> = a.iter().map(|v| -v).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        stat = stat.max(ks_statistic(&a, &b));
    }
    Ok(SymmetryReport {
        pass: stat < threshold,
        structural: false,
        statistic: stat,
        threshold,
        samples: n,
    })
}

/// Two-sample Kolmogorov–Smirnov distance of sorted samples.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
