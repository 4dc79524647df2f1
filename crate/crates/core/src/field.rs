//! Scalar fields used for the source term f, the boundary datum g and
//! variable coefficients. Each variant is a closed-form family so that the
//! solver (on nodes) and the walker (at arbitrary points) see the same function.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{dist2, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, a), b)| a < v && v < b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn overlaps(&self, other: &AxisBox) -> bool {
        (0..self.lo.len()).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `constant + gradient·x`
    Affine {
        constant: f64,
        gradient: Vec<f64>,
    },
    /// `constant + linear·x + xᵀ Q x`
    Quadratic {
        constant: f64,
        linear: Vec<f64>,
        quadratic: Vec<Vec<f64>>,
    },
    /// `coeff · |x - center|^exponent`
    RadialPower {
        center: Vec<f64>,
        coeff: f64,
        exponent: f64,
    },
    /// `amplitude · sin(wave·x + phase)`
    Sine {
        amplitude: f64,
        wave: Vec<f64>,
        phase: f64,
    },
    /// `above` where `x[axis] > threshold`, `below` elsewhere.
    Step {
        axis: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },
    /// `value` on a union of pairwise disjoint open boxes, zero elsewhere.
    BoxIndicator {
        value: f64,
        boxes: Vec<AxisBox>,
    },
    Sum {
        terms: Vec<FieldSpec>,
    },
    /// Values on the lattice `spacing·ℤ^N`, nearest-node lookup.
    Tabulated {
        spacing: f64,
        #[serde(skip)]
        table: HashMap<Vec<i64>, f64>,
        /// CSV with columns `x1..xN,value`; read by [`FieldSpec::load_tables`].
        path: String,
    },
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec::Constant { value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Affine { constant, gradient } => {
                constant + gradient.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            FieldSpec::Quadratic {
                constant,
                linear,
                quadratic,
            } => {
                let mut v = *constant + linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                for (i, row) in quadratic.iter().enumerate() {
                    for (j, q) in row.iter().enumerate() {
                        v += q * x[i] * x[j];
                    }
                }
                v
            }
            FieldSpec::RadialPower {
                center,
                coeff,
                exponent,
            } => coeff * dist2(x, center).sqrt().powf(*exponent),
            FieldSpec::Sine {
                amplitude,
                wave,
                phase,
            } => amplitude * (wave.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + phase).sin(),
            FieldSpec::Step {
                axis,
                threshold,
                below,
                above,
            } => {
                if x[*axis] > *threshold {
                    *above
                } else {
                    *below
                }
            }
            FieldSpec::BoxIndicator { value, boxes } => {
                if boxes.iter().any(|b| b.contains(x)) {
                    *value
                } else {
                    0.0
                }
            }
            FieldSpec::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            FieldSpec::Tabulated { spacing, table, .. } => {
                let k: Vec<i64> = x.iter().map(|v| (v / spacing).round() as i64).collect();
                table.get(&k).copied().unwrap_or(0.0)
            }
        }
    }

    /// Central-difference gradient.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = 1e-6;
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + d;
                let a = self.eval(&y);
                y[i] = x[i] - d;
                let b = self.eval(&y);
                y[i] = x[i];
                (a - b) / (2.0 * d)
            })
            .collect()
    }

    pub fn validate(&self, dim: usize, name: &str) -> Result<()> {
        let check_len = |v: &Vec<f64>, what: &str| -> Result<()> {
            if v.len() != dim {
                Err(LabError::invalid(
                    format!("{name}.{what}"),
                    format!("expected length {dim}, got {}", v.len()),
                ))
            } else {
                Ok(())
            }
        };
        match self {
            FieldSpec::Constant { .. } | FieldSpec::Tabulated { .. } => Ok(()),
            FieldSpec::Affine { gradient, .. } => check_len(gradient, "gradient"),
            FieldSpec::Quadratic {
                linear, quadratic, ..
            } => {
                check_len(linear, "linear")?;
                if quadratic.len() != dim || quadratic.iter().any(|r| r.len() != dim) {
                    return Err(LabError::invalid(
                        format!("{name}.quadratic"),
                        format!("expected {dim}x{dim} matrix"),
                    ));
                }
                Ok(())
            }
            FieldSpec::RadialPower { center, .. } => check_len(center, "center"),
            FieldSpec::Sine { wave, .. } => check_len(wave, "wave"),
            FieldSpec::Step { axis, .. } => {
                if *axis >= dim {
                    Err(LabError::invalid(format!("{name}.axis"), "out of range"))
                } else {
                    Ok(())
                }
            }
            FieldSpec::BoxIndicator { boxes, .. } => {
                for b in boxes {
                    check_len(&b.lo, "boxes.lo")?;
                    check_len(&b.hi, "boxes.hi")?;
                    if b.lo.iter().zip(&b.hi).any(|(a, c)| a >= c) {
                        return Err(LabError::invalid(
                            format!("{name}.boxes"),
                            "lo must be < hi",
                        ));
                    }
                }
                for (i, a) in boxes.iter().enumerate() {
                    if boxes[i + 1..].iter().any(|b| a.overlaps(b)) {
                        return Err(LabError::invalid(format!("{name}.boxes"), "boxes overlap"));
                    }
                }
                Ok(())
            }
            FieldSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate(dim, name)),
        }
    }

    /// Fill tabulated variants from their CSV files, resolving relative paths against `base`.
    pub fn load_tables(&mut self, base: &Path) -> Result<()> {
        match self {
            FieldSpec::Tabulated {
                spacing,
                table,
                path,
            } => {
                let p = base.join(&*path);
                let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(&p)?;
                table.clear();
                for rec in rdr.records() {
                    let rec = rec?;
                    let vals: Vec<f64> = rec
                        .iter()
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| LabError::invalid("tabulated", e.to_string()))?;
                    let (v, x) = vals
                        .split_last()
                        .ok_or_else(|| LabError::invalid("tabulated", "empty row"))?;
                    let k = x.iter().map(|c| (c / *spacing).round() as i64).collect();
                    table.insert(k, *v);
                }
                Ok(())
            }
            FieldSpec::Sum { terms } => terms.iter_mut().try_for_each(|t| t.load_tables(base)),
            _ => Ok(()),
        }
    }

    /// `sup_Ω |f|` when it is known in closed form.
    pub fn known_sup_abs(&self) -> Option<f64> {
        match self {
            FieldSpec::Constant { value } => Some(value.abs()),
            FieldSpec::BoxIndicator { value, boxes } => {
                Some(if boxes.is_empty() { 0.0 } else { value.abs() })
            }
            _ => None,
        }
    }

    /// `‖f‖_{L^N(Ω)}` when it is known in closed form. Indicator boxes must lie
    /// inside the domain.
    pub fn known_ln_norm(&self, domain: &Domain) -> Option<f64> {
        let n = domain.dim() as f64;
        match self {
            FieldSpec::Constant { value } => Some(value.abs() * domain.volume().powf(1.0 / n)),
            FieldSpec::BoxIndicator { value, boxes } => {
                let inside = boxes.iter().all(|b| {
                    let mut corner = b.lo.clone();
                    let dim = b.lo.len();
                    (0..1usize << dim).all(|m| {
                        for i in 0..dim {
                            corner[i] = if m >> i & 1 == 1 { b.hi[i] } else { b.lo[i] };
                        }
                        domain.contains(&corner) || domain.distance(&corner) == 0.0
                    })
                });
                inside.then(|| {
                    let vol: f64 = boxes.iter().map(AxisBox::volume).sum();
                    value.abs() * vol.powf(1.0 / n)
                })
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_families() {
        let q = FieldSpec::Quadratic {
            constant: 1.0,
            linear: vec![1.0, 0.0],
            quadratic: vec![vec![0.0, 0.5], vec![0.5, 0.0]],
        };
        assert_eq!(q.eval(&[2.0, 3.0]), 1.0 + 2.0 + 6.0);
        let s = FieldSpec::Step {
            axis: 0,
            threshold: 0.0,
            below: -1.0,
            above: 1.0,
        };
        assert_eq!(s.eval(&[0.0]), -1.0);
        assert_eq!(s.eval(&[1e-9]), 1.0);
        let g = FieldSpec::Affine {
            constant: 0.0,
            gradient: vec![2.0, -1.0],
        }
        .gradient(&[0.3, 0.4]);
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn known_norms() {
        let d = Domain::cube(1, 1.0).unwrap();
        let f = FieldSpec::BoxIndicator {
            value: 2.0,
            boxes: vec![AxisBox {
                lo: vec![0.0],
                hi: vec![0.01],
            }],
        };
        assert!((f.known_ln_norm(&d).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(FieldSpec::constant(3.0).known_ln_norm(&d), Some(6.0));
        let out = FieldSpec::BoxIndicator {
            value: 1.0,
            boxes: vec![AxisBox {
                lo: vec![0.5],
                hi: vec![1.5],
            }],
        };
        assert!(out.known_ln_norm(&d).is_none());
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let f = FieldSpec::BoxIndicator {
            value: 1.0,
            boxes: vec![
                AxisBox {
                    lo: vec![0.0],
                    hi: vec![0.5],
                },
                AxisBox {
                    lo: vec![0.4],
                    hi: vec![0.6],
                },
            ],
        };
        assert!(f.validate(1, "f").is_err());
    }
}
