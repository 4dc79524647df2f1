//! Scenario definitions: everything needed to pose, solve and simulate one
//! problem. Scenarios are read from TOML with keys matching the struct fields.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dpp::Params;
use crate::error::{LabError, Result};
use crate::field::{AxisBox, FieldSpec};
use crate::geometry::{build_grid, Domain, Grid};
use crate::gridfn::GridFunction;
use crate::measures::{DirectionField, MeasureFamily, RotationField};

fn default_paths() -> usize {
    10_000
}

fn default_max_iter() -> usize {
    1_000_000
}

fn default_eps0_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub domain: Domain,
    pub params: Params,
    pub h: f64,
    pub family: MeasureFamily,
    pub f: FieldSpec,
    pub g: FieldSpec,
    /// Variable `β(x)` used by the tug-of-war Pucci path; `α(x) = 1 - β(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_field: Option<FieldSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u64>,
    /// Warning threshold: ε above this fraction of the inradius is flagged.
    #[serde(default = "default_eps0_fraction")]
    pub eps0_fraction: f64,
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Checks every invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.domain.validate()?;
        self.params.validate()?;
        let n = self.dim();
        let p = &self.params;
        if self.h > p.eps / 4.0 * (1.0 + 1e-12) {
            return Err(LabError::invalid(
                "h",
                format!("h = {} exceeds eps/4 = {}", self.h, p.eps / 4.0),
            ));
        }
        if !(self.h > 0.0) {
            return Err(LabError::invalid("h", "must be positive"));
        }
        self.family.validate(n, p.lambda)?;
        self.f.validate(n, "f")?;
        self.g.validate(n, "g")?;
        if let Some(b) = &self.beta_field {
            b.validate(n, "beta_field")?;
        }
        for (i, pr) in self.probes.iter().enumerate() {
            if pr.len() != n {
                return Err(LabError::invalid(format!("probes[{i}]"), "wrong dimension"));
            }
            if !self.domain.contains(pr) {
                return Err(LabError::invalid(
                    format!("probes[{i}]"),
                    "probe outside the domain",
                ));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(LabError::invalid(
                "seed",
                "must fit in a signed 64-bit TOML integer",
            ));
        }
        if self.paths == 0 {
            return Err(LabError::invalid("paths", "must be positive"));
        }
        let mut warn = Vec::new();
        let inradius = self.domain.boundary_distance(self.domain.center());
        if p.eps > self.eps0_fraction * inradius {
            warn.push(format!(
                "eps = {} exceeds {} of the inradius {}",
                p.eps, self.eps0_fraction, inradius
            ));
        }
        Ok(warn)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let scn: Scenario = toml::from_str(s)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::invalid("scenario", e.to_string()))
    }

    /// Content hash of the canonical JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(canon.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(build_grid(
            &self.domain,
            self.h,
            self.params.lambda * self.params.eps,
        )?))
    }

    /// `f` on interior nodes, zero elsewhere.
    pub fn f_on(&self, grid: &Arc<Grid>) -> GridFunction {
        let mut gf = GridFunction::zeros(grid.clone());
        for &i in &grid.interior {
            gf.values[i] = self.f.eval(&grid.coords(i));
        }
        gf
    }

    /// `g` on collar nodes, zero elsewhere.
    pub fn g_on(&self, grid: &Arc<Grid>) -> GridFunction {
        let mut gf = GridFunction::zeros(grid.clone());
        for &i in &grid.collar_nodes {
            gf.values[i] = self.g.eval(&grid.coords(i));
        }
        gf
    }

    /// Default stopping tolerance `1e-10·max(1, ‖g‖∞ + diam²‖f‖∞)` unless set.
    pub fn tolerance(&self, grid: &Arc<Grid>) -> f64 {
        if let Some(t) = self.tol {
            return t;
        }
        let gmax = grid
            .collar_nodes
            .iter()
            .map(|&i| self.g.eval(&grid.coords(i)).abs())
            .fold(0.0, f64::max);
        let fmax = grid
            .interior
            .iter()
            .map(|&i| self.f.eval(&grid.coords(i)).abs())
            .fold(0.0, f64::max);
        let d = self.domain.diameter();
        1e-10 * (gmax + d * d * fmax).max(1.0)
    }

    /// `β(x)` from `beta_field`, clamped to `[1e-3, 1]`; the constant `β` otherwise.
    pub fn beta_at(&self, x: &[f64]) -> f64 {
        match &self.beta_field {
            Some(b) => b.eval(x).clamp(1e-3, 1.0),
            None => self.params.beta,
        }
    }

    pub fn step_cap(&self) -> u64 {
        self.step_cap
            .unwrap_or_else(|| (1e8 / (self.params.eps * self.params.eps)).min(1e15) as u64)
    }

    pub fn load_tables(&mut self, base: &Path) -> Result<()> {
        self.f.load_tables(base)?;
        self.g.load_tables(base)?;
        self.family.load_tables(base)
    }
}

/// Loads a built-in scenario by name, or a TOML file by path.
pub fn scenario_load(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let p = Path::new(name_or_path);
    if !p.exists() {
        return Err(LabError::UnknownScenario(name_or_path.to_string()));
    }
    let text = std::fs::read_to_string(p)?;
    let mut scn: Scenario = toml::from_str(&text)?;
    scn.load_tables(p.parent().unwrap_or(Path::new(".")))?;
    scn.validate()?;
    Ok(scn)
}

pub fn scenario_list() -> Vec<Scenario> {
    BUILTIN_NAMES.iter().filter_map(|n| builtin(n)).collect()
}

pub const BUILTIN_NAMES: &[&str] = &[
    "linear-1d",
    "uniform-1d",
    "dirac-2d",
    "plaplace-2d",
    "ellipsoid-2d",
    "nonunique-1d",
    "ln-failure-2d",
    "pucci-1d",
    "px-laplace-2d",
    "indicator-1d",
];

pub fn builtin(name: &str) -> Option<Scenario> {
    let half = Params {
        eps: 0.1,
        alpha: 0.5,
        beta: 0.5,
        lambda: 1.0,
    };
    let base = |name: &str,
                domain: Domain,
                params: Params,
                family: MeasureFamily,
                f: FieldSpec,
                g: FieldSpec| Scenario {
        name: name.to_string(),
        description: String::new(),
        domain,
        h: params.eps / 4.0,
        params,
        family,
        f,
        g,
        beta_field: None,
        seed: 20_240_601,
        paths: 10_000,
        tol: None,
        max_iter: default_max_iter(),
        step_cap: None,
        eps0_fraction: default_eps0_fraction(),
        probes: Vec::new(),
    };
    let interval = Domain::cube(1, 1.0).unwrap();
    let disk = Domain::new_ball(vec![0.0, 0.0], 1.0).unwrap();
    let square = Domain::cube(2, 1.0).unwrap();
    let e1 = |m: f64| DirectionField::Constant { vector: vec![m] };
    let scn = match name {
        "linear-1d" => {
            let mut s = base(
                name,
                interval,
                half,
                MeasureFamily::DiracPair { direction: e1(1.0) },
                FieldSpec::constant(1.0),
                FieldSpec::constant(0.0),
            );
            s.description =
                "Dirac pair |d| = 1 in 1D with unit source; limit operator u''/3".into();
            s.probes = vec![vec![-0.6], vec![-0.3], vec![0.0], vec![0.25], vec![0.7]];
            s
        }
        "uniform-1d" => {
            let mut s = base(
                name,
                interval,
                Params {
                    alpha: 0.0,
                    beta: 1.0,
                    ..half
                },
                MeasureFamily::UniformBall { radius: 1.0 },
                FieldSpec::constant(0.0),
                FieldSpec::Step {
                    axis: 0,
                    threshold: 0.0,
                    below: 0.0,
                    above: 1.0,
                },
            );
            s.description = "Pure ball-average walk on (-1,1); exit to the right pays 1".into();
            s.probes = vec![vec![-0.7], vec![-0.35], vec![0.0], vec![0.3], vec![0.65]];
            s
        }
        "dirac-2d" => {
            let mut s = base(
                name,
                square,
                Params {
                    eps: 0.2,
                    lambda: 1.0,
                    ..half
                },
                MeasureFamily::DiracPair {
                    direction: DirectionField::Checkerboard {
                        cell: 0.5,
                        a: vec![1.0, 0.0],
                        b: vec![0.0, 1.0],
                    },
                },
                FieldSpec::constant(0.5),
                FieldSpec::Quadratic {
                    constant: 0.0,
                    linear: vec![0.5, 0.0],
                    quadratic: vec![vec![0.0, 0.5], vec![0.5, 0.0]],
                },
            );
            s.description = "Discontinuous Dirac direction field on a checkerboard".into();
            s.probes = vec![
                vec![0.0, 0.0],
                vec![0.4, 0.3],
                vec![-0.5, 0.2],
                vec![0.1, -0.6],
                vec![-0.3, -0.3],
            ];
            s
        }
        "plaplace-2d" => {
            // p = 4: u = |x - c|^{2/3} is p-harmonic; the direction field is its normalized gradient
            let p: f64 = 4.0;
            let n = 2.0;
            let mut s = base(
                name,
                disk,
                Params {
                    eps: 0.2,
                    alpha: (p - 2.0) / (p + n),
                    beta: (n + 2.0) / (p + n),
                    lambda: 1.0,
                },
                MeasureFamily::DiracPair {
                    direction: DirectionField::NormalizedGradient {
                        field: FieldSpec::RadialPower {
                            center: vec![-2.0, 0.0],
                            coeff: 1.0,
                            exponent: 2.0 / 3.0,
                        },
                        magnitude: 1.0,
                    },
                },
                FieldSpec::constant(0.0),
                FieldSpec::Sine {
                    amplitude: 1.0,
                    wave: vec![1.5, 1.0],
                    phase: 0.3,
                },
            );
            s.description =
                "Tug-of-war with noise along the gradient of a 4-harmonic function".into();
            s.probes = vec![
                vec![0.0, 0.0],
                vec![0.5, 0.0],
                vec![-0.3, 0.4],
                vec![0.2, -0.6],
                vec![-0.6, -0.2],
            ];
            s
        }
        "ellipsoid-2d" => {
            let mut s = base(
                name,
                disk,
                Params {
                    eps: 0.08,
                    alpha: 0.5,
                    beta: 0.5,
                    lambda: 2.0,
                },
                MeasureFamily::EllipsoidShell {
                    axes: vec![2.0, 1.0],
                    rotation: RotationField::Polar {
                        turns: 1.0,
                        offset: 0.0,
                    },
                },
                FieldSpec::constant(0.0),
                FieldSpec::Quadratic {
                    constant: 0.0,
                    linear: vec![1.0, 0.5],
                    quadratic: vec![vec![0.5, 0.0], vec![0.0, -0.5]],
                },
            );
            s.description =
                "Uniform ellipse average, ellipse axes 2:1 rotating with the polar angle".into();
            s.probes = vec![
                vec![0.0, 0.0],
                vec![0.3, 0.2],
                vec![-0.4, 0.1],
                vec![0.1, -0.5],
                vec![-0.2, -0.2],
            ];
            s
        }
        "nonunique-1d" => {
            let mut s = base(
                name,
                Domain::cube(1, 2.0).unwrap(),
                Params { eps: 1.0, ..half },
                MeasureFamily::UniformBall { radius: 1.0 },
                FieldSpec::constant(0.0),
                FieldSpec::constant(0.0),
            );
            s.description = "Uniform ball average with eps = 1 on (-2,2); the DPP has a one-parameter family of solutions".into();
            s
        }
        "ln-failure-2d" => {
            let mut s = base(
                name,
                Domain::new_ball(vec![0.0, 0.0], 2.0).unwrap(),
                Params { eps: 1.0, ..half },
                MeasureFamily::DiracPair {
                    direction: DirectionField::Constant {
                        vector: vec![1.0, 0.0],
                    },
                },
                FieldSpec::constant(0.0),
                FieldSpec::constant(0.0),
            );
            s.description = "Dirac pair along e1 with eps = 1 on the radius-2 disk; the walk spends time outside any small set".into();
            s
        }
        "pucci-1d" => {
            let mut s = base(
                name,
                interval,
                half,
                MeasureFamily::PucciControl { resolution: 8 },
                FieldSpec::constant(1.0),
                FieldSpec::constant(0.0),
            );
            s.description = "Maximal and minimal Pucci DPP on (-1,1) with unit source".into();
            s.probes = vec![vec![0.0], vec![0.5]];
            s
        }
        "px-laplace-2d" => {
            let mut s = base(
                name,
                disk,
                Params { eps: 0.2, ..half },
                MeasureFamily::PucciControl { resolution: 4 },
                FieldSpec::constant(0.0),
                FieldSpec::Sine {
                    amplitude: 1.0,
                    wave: vec![2.0, 0.0],
                    phase: 0.0,
                },
            );
            s.description =
                "Pucci control with a space-dependent beta and sine boundary data on the unit disk"
                    .into();
            s.beta_field = Some(FieldSpec::Sum {
                terms: vec![
                    FieldSpec::constant(0.6),
                    FieldSpec::Affine {
                        constant: 0.0,
                        gradient: vec![0.2, 0.1],
                    },
                ],
            });
            s.probes = vec![vec![0.0, 0.0]];
            s
        }
        "indicator-1d" => {
            let mut s = base(
                name,
                interval,
                Params { eps: 0.05, ..half },
                MeasureFamily::DiracPair { direction: e1(1.0) },
                FieldSpec::BoxIndicator {
                    value: 1.0,
                    boxes: vec![AxisBox {
                        lo: vec![-0.1],
                        hi: vec![0.1],
                    }],
                },
                FieldSpec::constant(0.0),
            );
            s.description = "Dirac pair in 1D with an indicator source on (-0.1,0.1)".into();
            s.probes = vec![vec![0.0]];
            s
        }
        _ => return None,
    };
    Some(scn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for s in scenario_list() {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
        assert_eq!(scenario_list().len(), BUILTIN_NAMES.len());
    }

    #[test]
    fn ellipsoid_fixture() {
        let s = builtin("ellipsoid-2d").unwrap();
        assert_eq!(s.params.lambda, 2.0);
        assert!(matches!(
            s.family,
            MeasureFamily::EllipsoidShell {
                rotation: RotationField::Polar { .. },
                ..
            }
        ));
    }

    #[test]
    fn toml_round_trip_and_rejections() {
        let s = builtin("linear-1d").unwrap();
        let text = s.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(back.hash(), s.hash());

        let bad = text.replace("alpha = 0.5", "alpha = 0.51");
        let err = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("alpha") && err.contains("beta"), "{err}");

        let coarse = text.replace("h = 0.025", "h = 0.03");
        let err = Scenario::from_toml_str(&coarse).unwrap_err().to_string();
        assert!(err.contains("h"), "{err}");
    }
}
