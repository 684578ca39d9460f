//! Stratification of the layer-potential groupoid and extraction of limit
//! operators at conical points.

use crate::geometry::{DesingularizedBoundary, UVertexKind};
use crate::geometry::{norm, Point, SectorSide};
use crate::mellin::{ray_kernel, MellinKernel, MellinOperator};
use crate::quad;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupoidError {
    #[error("groupoid kind {kind:?} does not match a boundary built {}", if *.unfolded { "from an unfolded domain" } else { "without unfolding" })]
    KindMismatch { kind: GroupoidKind, unfolded: bool },
    #[error("kernel at stratum {stratum} is not homogeneous of degree -1 (relative defect {defect:e} at r = {r}, s = {s})")]
    NotHomogeneous { stratum: String, defect: f64, r: f64, s: f64 },
    #[error("missing kernel for components ({row}, {col}) at stratum {stratum}")]
    MissingKernel { stratum: String, row: usize, col: usize },
    #[error("kernel block at stratum {stratum} has size {found}, expected {expected}")]
    SizeMismatch { stratum: String, found: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupoidKind {
    NoCrack,
    Crack,
}

/// Which family of the crack stratification a vertex stratum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumFamily {
    NonCrack,
    CrackNonCrackPart,
    CrackCover,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorStratum {
    pub label: String,
    /// Restriction to the interior is the pair groupoid.
    pub pair_groupoid: bool,
}

/// Boundary stratum `(∂ω × ∂ω) × ℝ⁺` over one conical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexStratum {
    /// Unique key; equals the vertex id unless the vertex is split by unfolding.
    pub key: String,
    pub vertex_id: String,
    pub position: Point,
    pub family: StratumFamily,
    /// The finite set ∂ω, in the order used for limit-operator entries.
    pub component_labels: Vec<SectorSide>,
    /// Opening of the cone-base component each label bounds.
    pub label_widths: Vec<f64>,
    /// Index of the cone-base component each label bounds.
    pub label_intervals: Vec<usize>,
    pub collar_epsilon: f64,
    /// Isotropy is the dilation group ℝ⁺ (abelian, hence amenable).
    pub isotropy_dilations: bool,
}

impl VertexStratum {
    pub fn size(&self) -> usize {
        self.component_labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupoidDescriptor {
    #[serde(skip)]
    pub units: DesingularizedBoundary,
    pub interior: InteriorStratum,
    pub strata: Vec<VertexStratum>,
    pub kind: GroupoidKind,
}

impl GroupoidDescriptor {
    pub fn stratum(&self, key: &str) -> Option<&VertexStratum> {
        self.strata.iter().find(|s| s.key == key)
    }

    pub fn count_family(&self, f: StratumFamily) -> usize {
        self.strata.iter().filter(|s| s.family == f).count()
    }
}

pub fn build_groupoid(m: &DesingularizedBoundary, kind: GroupoidKind) -> Result<GroupoidDescriptor, GroupoidError> {
    if (kind == GroupoidKind::Crack) != m.unfolded {
        return Err(GroupoidError::KindMismatch { kind, unfolded: m.unfolded });
    }
    let unfolded = crate::geometry::unfold(&m.domain);
    let mut strata = Vec::new();
    for collar in &m.collars {
        let uv = &unfolded.vertices[collar.uvertex];
        let (family, key) = match uv.kind {
            UVertexKind::NonCrack => (StratumFamily::NonCrack, collar.vertex_id.clone()),
            UVertexKind::CrackNonCrackPart => (StratumFamily::CrackNonCrackPart, format!("{}#nc", collar.vertex_id)),
            UVertexKind::CrackCover { index } => {
                (StratumFamily::CrackCover, format!("{}#{}", collar.vertex_id, index))
            }
        };
        let mut widths = Vec::new();
        let mut intervals = Vec::new();
        for (i, iv) in uv.intervals.iter().enumerate() {
            widths.extend([iv.width, iv.width]);
            intervals.extend([i, i]);
        }
        strata.push(VertexStratum {
            key,
            vertex_id: collar.vertex_id.clone(),
            position: collar.position,
            family,
            component_labels: collar.labels.clone(),
            label_widths: widths,
            label_intervals: intervals,
            collar_epsilon: collar.epsilon,
            isotropy_dilations: true,
        });
    }
    Ok(GroupoidDescriptor {
        units: m.clone(),
        interior: InteriorStratum { label: "interior".into(), pair_groupoid: true },
        strata,
        kind,
    })
}

/// A unit chosen in one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "orbit", rename_all = "snake_case")]
pub enum OrbitRepresentative {
    Interior { point: Point },
    Vertex { stratum: String, label: usize },
}

/// One unit per orbit: an interior point, then the first label of every vertex stratum.
pub fn orbit_representatives(g: &GroupoidDescriptor) -> Vec<OrbitRepresentative> {
    let mut out = vec![OrbitRepresentative::Interior { point: interior_point(&g.units) }];
    out.extend(g.strata.iter().map(|s| OrbitRepresentative::Vertex { stratum: s.key.clone(), label: 0 }));
    out
}

fn interior_point(m: &DesingularizedBoundary) -> Point {
    let d = &m.domain;
    for (pi, p) in d.pieces.iter().enumerate() {
        let curve = &d.edges[p.edge].curve;
        let s = 0.5 * curve.length();
        let x = curve.point(s);
        let nu = d.piece_normal(pi, s);
        let mut h = 0.25 * curve.length();
        for _ in 0..40 {
            let y = [x[0] - h * nu[0], x[1] - h * nu[1]];
            if d.contains(y) && d.distance_to_boundary(y) > 0.25 * h {
                return y;
            }
            h *= 0.5;
        }
    }
    [f64::NAN, f64::NAN]
}

pub type LocalKernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GlobalKernelFn = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

/// Kernel `κ̃(r, s)` between two boundary components near a vertex, with r and
/// s the distances of x and y from the vertex, against the measure ds.
/// Point masses sit at `r/s = t₀` with weights against ds/s.
#[derive(Clone)]
pub struct LocalKernel {
    pub density: Option<LocalKernelFn>,
    pub atoms: Vec<(f64, f64)>,
    /// Decay of `t ↦ κ̃(t, 1)` at 0 and ∞.
    pub decay: (f64, f64),
    pub label: String,
}

impl fmt::Debug for LocalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalKernel").field("label", &self.label).field("atoms", &self.atoms).finish()
    }
}

impl LocalKernel {
    pub fn zero() -> Self {
        LocalKernel { density: None, atoms: Vec::new(), decay: (f64::INFINITY, f64::INFINITY), label: "0".into() }
    }

    pub fn from_fn<F>(f: F, decay: (f64, f64), label: impl Into<String>) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        LocalKernel { density: Some(Arc::new(f)), atoms: Vec::new(), decay, label: label.into() }
    }

    /// `κ̃(r, s) = κ(r/s)/s`.
    pub fn from_mellin(k: &MellinKernel) -> Self {
        let density = k.has_density().then(|| {
            let k = k.clone();
            Arc::new(move |r: f64, s: f64| k.eval(r / s) / s) as LocalKernelFn
        });
        LocalKernel { density, atoms: k.atoms.clone(), decay: k.decay, label: k.label.clone() }
    }

    pub fn eval(&self, r: f64, s: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |f| f(r, s))
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_none() && self.atoms.iter().all(|a| a.1 == 0.0)
    }

    pub fn add(&self, other: &LocalKernel) -> LocalKernel {
        let density = match (&self.density, &other.density) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |r, s| f(r, s) + g(r, s)) as LocalKernelFn)
            }
            (Some(f), None) => Some(f.clone()),
            (None, Some(g)) => Some(g.clone()),
            (None, None) => None,
        };
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        LocalKernel {
            density,
            atoms,
            decay: (self.decay.0.min(other.decay.0), self.decay.1.min(other.decay.1)),
            label: format!("{}+{}", self.label, other.label),
        }
    }

    pub fn scale(&self, c: f64) -> LocalKernel {
        if c == 0.0 {
            return LocalKernel::zero();
        }
        LocalKernel {
            density: self.density.as_ref().map(|f| {
                let f = f.clone();
                Arc::new(move |r, s| c * f(r, s)) as LocalKernelFn
            }),
            atoms: self.atoms.iter().map(|&(t, w)| (t, c * w)).collect(),
            decay: self.decay,
            label: format!("{c:e}*{}", self.label),
        }
    }

    /// Kernel of the composition, `∫₀^∞ κ̃₁(r, σ) κ̃₂(σ, s) dσ`, evaluated by
    /// quadrature in log σ.
    pub fn compose(&self, other: &LocalKernel) -> LocalKernel {
        let mut out = LocalKernel::zero();
        let decay = (self.decay.0.min(other.decay.0), self.decay.1.min(other.decay.1));
        if let (Some(f), Some(g)) = (&self.density, &other.density) {
            let (f, g) = (f.clone(), g.clone());
            let h = move |r: f64, s: f64| {
                let c = 0.5 * (r.ln() + s.ln());
                quad::integrate(
                    |v| {
                        let sigma = v.exp();
                        Complex64::new(f(r, sigma) * g(sigma, s) * sigma, 0.0)
                    },
                    c - 60.0,
                    c + 60.0,
                    16,
                    1e-14 / s,
                    4000,
                )
                .value
                .re
            };
            out = out.add(&LocalKernel::from_fn(h, decay, format!("({})o({})", self.label, other.label)));
        }
        // atom w at r/σ = t₀ acts as f ↦ (w/t₀) f(r/t₀)
        for &(t0, w) in &self.atoms {
            if let Some(g) = &other.density {
                let g = g.clone();
                out = out.add(&LocalKernel::from_fn(move |r, s| w / t0 * g(r / t0, s), other.decay, ""));
            }
        }
        for &(t1, w) in &other.atoms {
            if let Some(f) = &self.density {
                let f = f.clone();
                out = out.add(&LocalKernel::from_fn(move |r, s| w * f(r, t1 * s), self.decay, ""));
            }
        }
        for &(t0, w0) in &self.atoms {
            for &(t1, w1) in &other.atoms {
                out.atoms.push((t0 * t1, w0 * w1));
            }
        }
        out
    }
}

/// Square block of local kernels at one stratum. `None` marks an entry that
/// was never supplied.
pub type KernelBlock = Vec<Vec<Option<LocalKernel>>>;

/// An order-zero operator `c·I + K`: scalar part plus local kernels near each
/// stratum and an optional kernel on the smooth part.
#[derive(Clone, Debug)]
pub struct OperatorDescriptor {
    pub scalar: f64,
    /// Keyed by stratum key. A stratum absent here has kernels vanishing near it.
    pub local: BTreeMap<String, KernelBlock>,
    pub global: Option<GlobalKernel>,
    pub label: String,
}

#[derive(Clone)]
pub struct GlobalKernel(pub GlobalKernelFn);

impl fmt::Debug for GlobalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GlobalKernel")
    }
}

impl OperatorDescriptor {
    pub fn scalar(c: f64) -> Self {
        OperatorDescriptor { scalar: c, local: BTreeMap::new(), global: None, label: format!("{c}I") }
    }

    /// `c·I + K` with K the double layer operator, frozen on the tangent cone at
    /// every stratum. The smooth part is left to the Nyström assembler.
    pub fn double_layer(g: &GroupoidDescriptor, c: f64) -> Self {
        let mut local = BTreeMap::new();
        for st in &g.strata {
            local.insert(st.key.clone(), double_layer_block(st));
        }
        OperatorDescriptor { scalar: c, local, global: None, label: format!("{c}I+K") }
    }

    pub fn add(&self, other: &OperatorDescriptor) -> OperatorDescriptor {
        let mut local = self.local.clone();
        for (key, block) in &other.local {
            match local.get_mut(key) {
                None => {
                    local.insert(key.clone(), block.clone());
                }
                Some(mine) => {
                    for (row, orow) in mine.iter_mut().zip(block) {
                        for (e, o) in row.iter_mut().zip(orow) {
                            *e = match (e.take(), o) {
                                (Some(a), Some(b)) => Some(a.add(b)),
                                _ => None,
                            };
                        }
                    }
                }
            }
        }
        let global = match (&self.global, &other.global) {
            (Some(GlobalKernel(f)), Some(GlobalKernel(g))) => {
                let (f, g) = (f.clone(), g.clone());
                Some(GlobalKernel(Arc::new(move |x, y| f(x, y) + g(x, y)) as GlobalKernelFn))
            }
            (Some(f), None) | (None, Some(f)) => Some(f.clone()),
            (None, None) => None,
        };
        OperatorDescriptor {
            scalar: self.scalar + other.scalar,
            local,
            global,
            label: format!("({})+({})", self.label, other.label),
        }
    }

    pub fn scale(&self, c: f64) -> OperatorDescriptor {
        let local = self
            .local
            .iter()
            .map(|(k, b)| (k.clone(), b.iter().map(|r| r.iter().map(|e| e.as_ref().map(|e| e.scale(c))).collect()).collect()))
            .collect();
        let global = self.global.as_ref().map(|GlobalKernel(f)| {
            let f = f.clone();
            GlobalKernel(Arc::new(move |x, y| c * f(x, y)) as GlobalKernelFn)
        });
        OperatorDescriptor { scalar: c * self.scalar, local, global, label: format!("{c}({})", self.label) }
    }

    /// `(c₁ + K₁)(c₂ + K₂) = c₁c₂ + c₁K₂ + c₂K₁ + K₁K₂` on the local kernels.
    /// The smooth-part kernel of a product is not tracked.
    pub fn compose(&self, other: &OperatorDescriptor) -> OperatorDescriptor {
        let mut local = BTreeMap::new();
        let keys: std::collections::BTreeSet<&String> = self.local.keys().chain(other.local.keys()).collect();
        for key in keys {
            let (a, b) = (self.local.get(key), other.local.get(key));
            let k = a.or(b).map_or(0, |b| b.len());
            let zero_block = || vec![vec![Some(LocalKernel::zero()); k]; k];
            let a = a.cloned().unwrap_or_else(zero_block);
            let b = b.cloned().unwrap_or_else(zero_block);
            let mut block: KernelBlock = vec![vec![None; k]; k];
            for i in 0..k {
                for j in 0..k {
                    let mut acc = Some(LocalKernel::zero());
                    let mut push = |x: Option<LocalKernel>| {
                        acc = match (acc.take(), x) {
                            (Some(s), Some(x)) => Some(if x.is_zero() { s } else if s.is_zero() { x } else { s.add(&x) }),
                            _ => None,
                        }
                    };
                    push(b[i][j].as_ref().map(|e| e.scale(self.scalar)));
                    push(a[i][j].as_ref().map(|e| e.scale(other.scalar)));
                    for l in 0..k {
                        if let (Some(x), Some(y)) = (&a[i][l], &b[l][j]) {
                            if !x.is_zero() && !y.is_zero() {
                                push(Some(x.compose(y)));
                            }
                        } else {
                            push(None);
                        }
                    }
                    block[i][j] = acc;
                }
            }
            local.insert(key.clone(), block);
        }
        OperatorDescriptor {
            scalar: self.scalar * other.scalar,
            local,
            global: None,
            label: format!("({})o({})", self.label, other.label),
        }
    }
}

/// Double layer kernels between the rays of one stratum.
fn double_layer_block(st: &VertexStratum) -> KernelBlock {
    let k = st.size();
    let mut block = vec![vec![Some(LocalKernel::zero()); k]; k];
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let (la, lb) = (&st.component_labels[a], &st.component_labels[b]);
            let same_ray = norm([la.direction[0] - lb.direction[0], la.direction[1] - lb.direction[1]]) < 1e-12;
            if same_ray && st.label_intervals[a] != st.label_intervals[b] {
                // sheets of one crack seen from different components couple only
                // across strata, which the limit operator does not see
                continue;
            }
            let kern = ray_kernel(la.direction, lb.direction, lb.normal, st.label_widths[a]);
            block[a][b] = Some(LocalKernel::from_mellin(&kern));
        }
    }
    block
}

/// Limit operator: scalar part plus the Mellin convolution operator of the local kernels.
#[derive(Debug, Clone)]
pub struct LimitOperator {
    pub scalar: f64,
    pub mellin: MellinOperator,
}

/// Relative tolerance of the sampled homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 1e-10;

pub fn limit_operator(p: &OperatorDescriptor, stratum: &VertexStratum) -> Result<LimitOperator, GroupoidError> {
    let k = stratum.size();
    let mut op = MellinOperator::zero(stratum.key.clone(), k);
    if let Some(block) = p.local.get(&stratum.key) {
        if block.len() != k || block.iter().any(|r| r.len() != k) {
            return Err(GroupoidError::SizeMismatch { stratum: stratum.key.clone(), found: block.len(), expected: k });
        }
        for (i, row) in block.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let e = e.as_ref().ok_or(GroupoidError::MissingKernel { stratum: stratum.key.clone(), row: i, col: j })?;
                check_homogeneity(e, &stratum.key)?;
                let mut m = match &e.density {
                    Some(f) => {
                        let f = f.clone();
                        MellinKernel::from_fn(move |t| f(t, 1.0), e.decay, e.label.clone())
                    }
                    None => MellinKernel::zero(),
                };
                for &(t0, w) in &e.atoms {
                    m = m.add(&MellinKernel::atom(t0, w));
                }
                op.entries[i][j] = m;
            }
        }
    }
    Ok(LimitOperator { scalar: p.scalar, mellin: op })
}

/// `κ̃(τr, τs) = κ̃(r, s)/τ` at τ ∈ {1/2, 2} on 32 log-spaced base points.
fn check_homogeneity(e: &LocalKernel, key: &str) -> Result<(), GroupoidError> {
    let Some(f) = &e.density else { return Ok(()) };
    for j in 0..32 {
        let u = -4.0 + 8.0 * j as f64 / 31.0;
        let (r, s) = ((0.5 * u).exp(), (-0.5 * u).exp());
        let base = f(r, s);
        for tau in [0.5, 2.0] {
            let scaled = tau * f(tau * r, tau * s);
            let scale = base.abs().max(scaled.abs());
            let defect = (scaled - base).abs();
            if defect > HOMOGENEITY_TOL * scale && defect > 1e-300 {
                return Err(GroupoidError::NotHomogeneous {
                    stratum: key.into(),
                    defect: defect / scale,
                    r,
                    s,
                });
            }
        }
    }
    Ok(())
}
