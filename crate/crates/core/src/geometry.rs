//! Domains, cubes, the ε/4 cube cover and the lattice grid that carries
//! every discrete function in the crate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Bounded open domain: an axis-aligned box or a Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl Domain {
    pub fn new_box(center: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        let d = Domain::Box {
            center,
            half_widths,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    /// Symmetric interval or cube `(-r, r)^N`.
    pub fn cube(dim: usize, r: f64) -> Result<Self> {
        Self::new_box(vec![0.0; dim], vec![r; dim])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box {
                center,
                half_widths,
            } => {
                if center.is_empty() {
                    return Err(LabError::invalid("domain.center", "empty"));
                }
                if center.len() != half_widths.len() {
                    return Err(LabError::Dimension {
                        expected: center.len(),
                        got: half_widths.len(),
                    });
                }
                if half_widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(LabError::invalid(
                        "domain.half_widths",
                        "must be finite and positive",
                    ));
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(LabError::invalid("domain.center", "empty"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(LabError::invalid(
                        "domain.radius",
                        "must be finite and positive",
                    ));
                }
            }
        }
        if self.center().iter().any(|c| !c.is_finite()) {
            return Err(LabError::invalid("domain.center", "must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Domain::Box { center, .. } | Domain::Ball { center, .. } => center,
        }
    }

    /// Strict membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box {
                center,
                half_widths,
            } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((xi, ci), wi)| (xi - ci).abs() < *wi),
            Domain::Ball { center, radius } => dist2(x, center) < radius * radius,
        }
    }

    /// Euclidean distance from `x` to the closure of the domain (zero inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box {
                center,
                half_widths,
            } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .map(|((xi, ci), wi)| {
                    let g = ((xi - ci).abs() - wi).max(0.0);
                    g * g
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { center, radius } => (dist2(x, center).sqrt() - radius).max(0.0),
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            Domain::Box {
                center,
                half_widths,
            } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .map(|((xi, ci), wi)| wi - (xi - ci).abs())
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => radius - dist2(x, center).sqrt(),
        }
    }

    /// Distance from `x` to the closed axis-aligned box `[lo, hi]`, measured to
    /// the closure of the domain.
    pub fn distance_to_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match self {
            Domain::Box {
                center,
                half_widths,
            } => (0..center.len())
                .map(|i| {
                    let a = center[i] - half_widths[i];
                    let b = center[i] + half_widths[i];
                    let g = (lo[i] - b).max(a - hi[i]).max(0.0);
                    g * g
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { center, radius } => {
                let d2: f64 = (0..center.len())
                    .map(|i| {
                        let g = (lo[i] - center[i]).max(center[i] - hi[i]).max(0.0);
                        g * g
                    })
                    .sum();
                (d2.sqrt() - radius).max(0.0)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { half_widths, .. } => {
                2.0 * half_widths.iter().map(|w| w * w).sum::<f64>().sqrt()
            }
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { half_widths, .. } => half_widths.iter().map(|w| 2.0 * w).product(),
            Domain::Ball { radius, center } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box {
                center,
                half_widths,
            } => (
                center.iter().zip(half_widths).map(|(c, w)| c - w).collect(),
                center.iter().zip(half_widths).map(|(c, w)| c + w).collect(),
            ),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in R^N.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// The open set `Ω ∪ {x : dist(x, Ω) < margin}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collar {
    pub base: Domain,
    pub margin: f64,
}

impl Collar {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.base.contains(x) || self.base.distance(x) < self.margin
    }
}

pub fn make_collar(domain: &Domain, lambda_eps: f64) -> Result<Collar> {
    if !(lambda_eps.is_finite() && lambda_eps > 0.0) {
        return Err(LabError::invalid("collar.margin", "must be positive"));
    }
    Ok(Collar {
        base: domain.clone(),
        margin: lambda_eps,
    })
}

/// Open axis-aligned cube. Dyadic cubes keep a link to their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
    pub generation: u32,
    pub parent: Option<Arc<Cube>>,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Cube {
            center,
            side,
            generation: 0,
            parent: None,
        }
    }

    /// The unit cube `(-1/2, 1/2)^N`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], 1.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| (xi - ci).abs() < self.side / 2.0)
    }

    pub fn closure_contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| (xi - ci).abs() <= self.side / 2.0)
    }

    /// `ℓQ`: same center, side multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Cube {
        Cube::new(self.center.clone(), self.side * factor)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.len() as i32)
    }

    pub fn corners(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.side / 2.0;
        (
            self.center.iter().map(|c| c - r).collect(),
            self.center.iter().map(|c| c + r).collect(),
        )
    }
}

pub fn dyadic_split(q: &Cube) -> Vec<Cube> {
    let n = q.center.len();
    let parent = Arc::new(q.clone());
    (0..1usize << n)
        .map(|mask| {
            let center = q
                .center
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if mask >> i & 1 == 1 {
                        c + q.side / 4.0
                    } else {
                        c - q.side / 4.0
                    }
                })
                .collect();
            Cube {
                center,
                side: q.side / 2.0,
                generation: q.generation + 1,
                parent: Some(parent.clone()),
            }
        })
        .collect()
}

pub fn dyadic_pre(q: &Cube) -> Result<Cube> {
    if q.generation == 0 {
        return Err(LabError::invalid(
            "cube.generation",
            "pre of a generation-0 cube",
        ));
    }
    q.parent
        .as_deref()
        .cloned()
        .ok_or_else(|| LabError::invalid("cube.parent", "dyadic cube without parent link"))
}

/// Region argument for [`eps_cover`].
pub enum CoverRegion<'a> {
    Domain(&'a Domain),
    Points(&'a [Vec<f64>]),
}

/// Open cubes of side `ε/(4√N)` centred on the lattice `(ε/(4√N))ℤ^N` whose
/// closures meet the region, sorted by lattice index.
pub fn eps_cover(region: CoverRegion<'_>, eps: f64) -> Result<Vec<Cube>> {
    if !(eps > 0.0) {
        return Err(LabError::invalid("eps", "must be positive"));
    }
    let keys = match region {
        CoverRegion::Points(pts) => {
            let Some(first) = pts.first() else {
                return Ok(Vec::new());
            };
            let s = cover_side(eps, first.len());
            let mut keys = std::collections::BTreeSet::new();
            for p in pts {
                point_cells(p, s, &mut keys);
            }
            keys
        }
        CoverRegion::Domain(d) => {
            let n = d.dim();
            let s = cover_side(eps, n);
            let (lo, hi) = d.bounding_box();
            let klo: Vec<i64> = lo.iter().map(|v| (v / s).floor() as i64 - 1).collect();
            let khi: Vec<i64> = hi.iter().map(|v| (v / s).ceil() as i64 + 1).collect();
            let mut keys = std::collections::BTreeSet::new();
            for k in LatticeBox::new(klo, khi) {
                let clo: Vec<f64> = k.iter().map(|&ki| ki as f64 * s - s / 2.0).collect();
                let chi: Vec<f64> = k.iter().map(|&ki| ki as f64 * s + s / 2.0).collect();
                if closed_box_meets_open(d, &clo, &chi) {
                    keys.insert(k);
                }
            }
            keys
        }
    };
    let n = keys.iter().next().map_or(0, |k| k.len());
    let s = cover_side(eps, n.max(1));
    Ok(keys
        .into_iter()
        .map(|k| Cube::new(k.iter().map(|&ki| ki as f64 * s).collect(), s))
        .collect())
}

pub fn cover_side(eps: f64, dim: usize) -> f64 {
    eps / (4.0 * (dim as f64).sqrt())
}

/// Lattice indices of every cover cell whose closure contains `p`.
fn point_cells(p: &[f64], s: f64, out: &mut std::collections::BTreeSet<Vec<i64>>) {
    let choices: Vec<Vec<i64>> = p
        .iter()
        .map(|&v| {
            let t = v / s;
            let k = t.round() as i64;
            let mut c = vec![k];
            // exactly on a face: both neighbours
            if ((t - k as f64).abs() - 0.5).abs() < 1e-12 {
                c.push(if t > k as f64 { k + 1 } else { k - 1 });
            }
            c
        })
        .collect();
    let mut acc = vec![Vec::new()];
    for c in choices {
        acc = acc
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                c.iter().map(move |&v| {
                    let mut q = prefix.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out.extend(acc);
}

fn closed_box_meets_open(d: &Domain, lo: &[f64], hi: &[f64]) -> bool {
    match d {
        Domain::Box {
            center,
            half_widths,
        } => (0..center.len())
            .all(|i| hi[i] > center[i] - half_widths[i] && lo[i] < center[i] + half_widths[i]),
        Domain::Ball { center, radius } => {
            let d2: f64 = (0..center.len())
                .map(|i| {
                    let g = (lo[i] - center[i]).max(center[i] - hi[i]).max(0.0);
                    g * g
                })
                .sum();
            d2 < radius * radius
        }
    }
}

/// Iterator over integer vectors in the closed box `[lo, hi]`, last axis fastest.
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Vec<i64>>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        let next = if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
            Some(lo.clone())
        } else {
            None
        };
        LatticeBox { lo, hi, next }
    }
}

impl Iterator for LatticeBox {
    type Item = Vec<i64>;
    fn next(&mut self) -> Option<Vec<i64>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        for i in (0..nxt.len()).rev() {
            if nxt[i] < self.hi[i] {
                nxt[i] += 1;
                self.next = Some(nxt);
                return Some(cur);
            }
            nxt[i] = self.lo[i];
        }
        Some(cur)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    Collar,
    Exterior,
}

/// Lattice `hℤ^N` restricted to a box around the collar. Nodes strictly inside
/// Ω are interior; every other corner of a lattice cell that meets the collar
/// is a collar node, so multilinear interpolation anywhere in the collar only
/// touches classified nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: Domain,
    pub collar: Collar,
    pub h: f64,
    /// Lattice index of the first node along each axis.
    pub origin: Vec<i64>,
    /// Node count along each axis.
    pub shape: Vec<usize>,
    strides: Vec<usize>,
    pub class: Vec<NodeClass>,
    pub interior: Vec<usize>,
    pub collar_nodes: Vec<usize>,
}

pub fn build_grid(domain: &Domain, h: f64, lambda_eps: f64) -> Result<Grid> {
    domain.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(LabError::invalid("h", "must be positive"));
    }
    let collar = make_collar(domain, lambda_eps)?;
    let n = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let origin: Vec<i64> = lo
        .iter()
        .map(|v| ((v - lambda_eps) / h).floor() as i64 - 1)
        .collect();
    let top: Vec<i64> = hi
        .iter()
        .map(|v| ((v + lambda_eps) / h).ceil() as i64 + 1)
        .collect();
    let shape: Vec<usize> = origin
        .iter()
        .zip(&top)
        .map(|(a, b)| (b - a + 1) as usize)
        .collect();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let total: usize = shape.iter().product();
    if total > 50_000_000 {
        return Err(LabError::invalid(
            "h",
            format!("grid of {total} nodes is too large"),
        ));
    }
    let mut class = vec![NodeClass::Exterior; total];

    // cells meeting the open collar mark their corners
    let cell_hi: Vec<i64> = top.iter().map(|t| t - 1).collect();
    let mut x_lo = vec![0.0; n];
    let mut x_hi = vec![0.0; n];
    for cell in LatticeBox::new(origin.clone(), cell_hi) {
        for i in 0..n {
            x_lo[i] = cell[i] as f64 * h;
            x_hi[i] = (cell[i] + 1) as f64 * h;
        }
        if domain.distance_to_box(&x_lo, &x_hi) < lambda_eps {
            for mask in 0..1usize << n {
                let mut id = 0;
                for i in 0..n {
                    let k = cell[i] - origin[i] + (mask >> i & 1) as i64;
                    id += k as usize * strides[i];
                }
                class[id] = NodeClass::Collar;
            }
        }
    }
    let mut interior = Vec::new();
    let mut collar_nodes = Vec::new();
    let mut x = vec![0.0; n];
    for id in 0..total {
        if class[id] == NodeClass::Exterior {
            continue;
        }
        let mut rem = id;
        for i in 0..n {
            x[i] = (origin[i] + (rem / strides[i]) as i64) as f64 * h;
            rem %= strides[i];
        }
        if domain.contains(&x) {
            class[id] = NodeClass::Interior;
            interior.push(id);
        } else {
            collar_nodes.push(id);
        }
    }
    if interior.is_empty() {
        return Err(LabError::invalid("h", "no interior node"));
    }
    Ok(Grid {
        domain: domain.clone(),
        collar,
        h,
        origin,
        shape,
        strides,
        class,
        interior,
        collar_nodes,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn coords(&self, id: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords_into(id, &mut x);
        x
    }

    pub fn coords_into(&self, id: usize, x: &mut [f64]) {
        let mut rem = id;
        for i in 0..self.dim() {
            x[i] = (self.origin[i] + (rem / self.strides[i]) as i64) as f64 * self.h;
            rem %= self.strides[i];
        }
    }

    /// Integer lattice index of a node.
    pub fn lattice_index(&self, id: usize) -> Vec<i64> {
        let mut rem = id;
        (0..self.dim())
            .map(|i| {
                let k = self.origin[i] + (rem / self.strides[i]) as i64;
                rem %= self.strides[i];
                k
            })
            .collect()
    }

    /// Node id for a lattice index, if inside the stored box.
    pub fn node_at(&self, k: &[i64]) -> Option<usize> {
        let mut id = 0;
        for i in 0..self.dim() {
            let r = k[i] - self.origin[i];
            if r < 0 || r as usize >= self.shape[i] {
                return None;
            }
            id += r as usize * self.strides[i];
        }
        Some(id)
    }

    /// Node id displaced by a lattice offset, if inside the stored box.
    pub fn offset(&self, id: usize, off: &[i64]) -> Option<usize> {
        let mut rem = id;
        let mut out = 0usize;
        for i in 0..self.dim() {
            let k = (rem / self.strides[i]) as i64 + off[i];
            rem %= self.strides[i];
            if k < 0 || k as usize >= self.shape[i] {
                return None;
            }
            out += k as usize * self.strides[i];
        }
        Some(out)
    }

    pub fn is_classified(&self, id: usize) -> bool {
        self.class[id] != NodeClass::Exterior
    }

    /// Nodes in the closure of Ω: interior nodes and collar nodes on ∂Ω.
    pub fn in_closure(&self, id: usize) -> bool {
        match self.class[id] {
            NodeClass::Interior => true,
            NodeClass::Collar => self.domain.distance(&self.coords(id)) <= 1e-12 * self.h,
            NodeClass::Exterior => false,
        }
    }

    /// Classified nodes within distance `r` (open ball) of `c`.
    pub fn nodes_in_ball(&self, c: &[f64], r: f64) -> Vec<usize> {
        let n = self.dim();
        let lo: Vec<i64> = (0..n)
            .map(|i| ((c[i] - r) / self.h).floor() as i64)
            .collect();
        let hi: Vec<i64> = (0..n)
            .map(|i| ((c[i] + r) / self.h).ceil() as i64)
            .collect();
        let mut out = Vec::new();
        for k in LatticeBox::new(lo, hi) {
            if let Some(id) = self.node_at(&k) {
                if !self.is_classified(id) {
                    continue;
                }
                let x: Vec<f64> = k.iter().map(|&ki| ki as f64 * self.h).collect();
                if dist2(&x, c) < r * r {
                    out.push(id);
                }
            }
        }
        out.sort_unstable();
        out
    }
}
