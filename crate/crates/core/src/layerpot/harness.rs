use super::assemble::assemble_np;
use super::mesh::{mesh_domain, BoundaryMesh, MeshParams};
use super::verdict::{fredholm_verdict_with, limit_symbols, domain_groupoid, weight_windows, FredholmVerdict, Verdict, VerdictOptions};
use super::LayerError;
use crate::geometry::{ConicalDomain, DomainSpec, Point};
use crate::mellin::{admissible_weight_window, LineCalibration, LineCandidate, WindowOptions, WindowReport};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Solve, SVD};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct DirichletSolution {
    /// Solves `(I + K) φ = rhs_factor · g`.
    pub operator: String,
    pub rhs_factor: f64,
    pub density: Vec<f64>,
    /// Relative max-norm residual of the linear solve.
    pub residual: f64,
    #[serde(skip)]
    pub mesh: BoundaryMesh,
    pub verdict: FredholmVerdict,
}

impl DirichletSolution {
    /// Double layer potential `(1/2π) ∫ (y−x)·ν(y)/|x−y|² φ(y) dS(y)` at an interior point.
    pub fn evaluate(&self, x: Point) -> f64 {
        self.mesh
            .nodes
            .iter()
            .zip(&self.density)
            .map(|(n, phi)| {
                let d = [n.point[0] - x[0], n.point[1] - x[1]];
                (d[0] * n.normal[0] + d[1] * n.normal[1]) / (d[0] * d[0] + d[1] * d[1]) * phi * n.weight
            })
            .sum::<f64>()
            / (2.0 * PI)
    }
}

/// Interior Dirichlet problem through `(I + K) φ = 2g`, `u = Wφ`.
pub fn solve_dirichlet<G>(
    d: &ConicalDomain,
    g: G,
    a: f64,
    params: MeshParams,
    cal: &LineCalibration,
    opts: &VerdictOptions,
) -> Result<DirichletSolution, LayerError>
where
    G: Fn(Point) -> f64,
{
    if d.has_cracks() {
        return Err(LayerError::Unsupported("Dirichlet solves on cracked domains".into()));
    }
    let verdict = fredholm_verdict_with(d, 1.0, a, cal, opts)?;
    if verdict.overall != Verdict::Fredholm {
        return Err(LayerError::NotFredholm(verdict.overall));
    }
    let mesh = mesh_domain(d, params)?;
    let mut b = assemble_np(d, &mesh)?;
    for i in 0..mesh.len() {
        b[[i, i]] += 1.0;
    }
    let rhs: Array1<f64> = mesh.nodes.iter().map(|n| 2.0 * g(n.point)).collect();
    let phi = b.solve(&rhs).map_err(|e| LayerError::Linalg(e.to_string()))?;
    let res = &b.dot(&phi) - &rhs;
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    if residual > 1e-10 {
        return Err(LayerError::Residual(residual));
    }
    Ok(DirichletSolution { operator: "I + K".into(), rhs_factor: 2.0, density: phi.to_vec(), residual, mesh, verdict })
}

/// `D (c·I + A) D⁻¹` with `D = diag(√w · r_Ω^{−1/2−a})`, the discrete operator
/// in the `K^0_{1/2+a}` pairing.
pub fn weighted_operator(a_mat: &Array2<f64>, mesh: &BoundaryMesh, c: f64, a: f64) -> Array2<f64> {
    let e = -0.5 - a;
    let logd: Vec<f64> = mesh.nodes.iter().map(|n| 0.5 * n.weight.ln() + e * n.r.ln()).collect();
    let n = mesh.len();
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let v = a_mat[[i, j]] + if i == j { c } else { 0.0 };
            b[[i, j]] = if v == 0.0 { 0.0 } else { v * (logd[i] - logd[j]).exp() };
        }
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    BoundedBelow,
    Decaying,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub nodes: usize,
    pub n: usize,
    pub q: f64,
    pub nc: usize,
    pub p: usize,
    pub h_min: f64,
    /// Smallest singular values, ascending.
    pub sigma: Vec<f64>,
}

/// Number of singular values allowed to collapse under refinement while the
/// operator is still Fredholm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StudyBudget {
    /// Kernel dimension of the continuous operator.
    pub nullity: usize,
    /// Symbol zeros crossed between the reference weight 0 and a.
    pub index_jump: usize,
    /// Extra collapsing values of the truncated discretization.
    pub extra: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub domain_hash: String,
    pub operator: String,
    pub c: f64,
    pub a: f64,
    pub rows: Vec<StudyRow>,
    pub budget: StudyBudget,
    /// Trend of σ_{budget+1}, the value that stays bounded iff Fredholm.
    pub trend: Trend,
    pub slope: f64,
    /// Trend of σ_min itself.
    pub raw_trend: Trend,
    pub raw_slope: f64,
}

/// Local exponent β in `σ ≈ C h^β` over the last refinement step. A
/// collapsing value keeps β near its distance to the nearest symbol zero,
/// while a bounded one has β → 0.
pub fn classify_trend(sigma: &[f64], h: &[f64]) -> (Trend, f64) {
    let n = sigma.len();
    if n < 2 || h.len() != n || sigma.iter().chain(h).any(|v| !v.is_finite() || *v < 0.0) {
        return (Trend::Inconclusive, f64::NAN);
    }
    let last = sigma[n - 1];
    let slope = (last.max(1e-300) / sigma[n - 2].max(1e-300)).ln() / (h[n - 1] / h[n - 2]).ln();
    let trend = if last < 1e-8 || slope >= TREND_DECAY {
        Trend::Decaying
    } else if slope < TREND_BOUNDED {
        Trend::BoundedBelow
    } else {
        Trend::Inconclusive
    };
    (trend, slope)
}

const TREND_DECAY: f64 = 0.1;
const TREND_BOUNDED: f64 = 0.075;

/// Collapse budget at weight `a`. `windows` may be a precomputed report for
/// the same domain and scalar.
pub fn study_budget(
    d: &ConicalDomain,
    c: f64,
    a: f64,
    windows: Option<&WindowReport>,
    cal: &LineCalibration,
) -> Result<StudyBudget, LayerError> {
    let nullity = usize::from((c + 1.0).abs() < 1e-12);
    let owned;
    let report = match windows {
        Some(w) => w,
        None => {
            owned = weight_windows(d, c, cal, (-0.95, 0.95), &WindowOptions::default())?;
            &owned
        }
    };
    let (lo, hi) = if a < 0.0 { (a, 0.0) } else { (0.0, a) };
    let mut index_jump = 0;
    for e in &report.vertices {
        if let Some(w) = &e.window {
            index_jump += w.zeros.iter().filter(|z| z.a > lo && z.a < hi).count();
        }
    }
    // for a > 0 far-field data is constant near each vertex, which the weight
    // excludes; the global constant lies in the span of these modes
    let extra = if a > 0.0 { report.vertices.len() } else { 0 };
    Ok(StudyBudget { nullity, index_jump, extra, total: nullity.max(index_jump + extra) })
}

/// Five levels `n_c ∈ {6, 9, …, 18}` with `n = 8`, `q = 1/2`, four nodes per panel.
pub fn default_study_meshes() -> Vec<MeshParams> {
    [6, 9, 12, 15, 18].iter().map(|&nc| MeshParams::new(8, 0.5, nc).with_panel_nodes(4)).collect()
}

/// Refinement sequence for `d`: graded levels when it has corners or cracks,
/// otherwise `n ∈ {16, 32, 64, 128}` uniform nodes.
pub fn study_meshes(d: &ConicalDomain) -> Vec<MeshParams> {
    if d.has_cracks() || d.vertices.iter().any(|v| v.is_conical()) {
        default_study_meshes()
    } else {
        [16, 32, 64, 128].iter().map(|&n| MeshParams::new(n, 0.5, 2)).collect()
    }
}

pub fn min_singular_value_study(
    d: &ConicalDomain,
    c: f64,
    a: f64,
    meshes: &[MeshParams],
) -> Result<StudyReport, LayerError> {
    let budget = study_budget(d, c, a, None, &LineCalibration::analytic())?;
    min_singular_value_study_with(d, c, a, meshes, budget)
}

const STUDY_VALUES: usize = 24;

pub fn min_singular_value_study_with(
    d: &ConicalDomain,
    c: f64,
    a: f64,
    meshes: &[MeshParams],
    budget: StudyBudget,
) -> Result<StudyReport, LayerError> {
    let rows: Result<Vec<StudyRow>, LayerError> = meshes
        .par_iter()
        .map(|&p| {
            let mesh = mesh_domain(d, p)?;
            let a_mat = assemble_np(d, &mesh)?;
            let b = weighted_operator(&a_mat, &mesh, c, a);
            let (_, s, _) = b.svd(false, false).map_err(|e| LayerError::Linalg(e.to_string()))?;
            let mut s = s.to_vec();
            s.sort_by(f64::total_cmp);
            s.truncate(STUDY_VALUES);
            Ok(StudyRow { nodes: mesh.len(), n: p.n, q: p.q, nc: p.nc, p: p.p, h_min: mesh.h_min, sigma: s })
        })
        .collect();
    let rows = rows?;
    let h: Vec<f64> = rows.iter().map(|r| r.h_min).collect();
    let pick = |k: usize| -> Vec<f64> { rows.iter().map(|r| r.sigma.get(k).copied().unwrap_or(f64::NAN)).collect() };
    let (trend, slope) = classify_trend(&pick(budget.total), &h);
    let (raw_trend, raw_slope) = classify_trend(&pick(0), &h);
    Ok(StudyReport {
        domain_hash: d.hash.clone(),
        operator: format!("{c}*I + K"),
        c,
        a,
        rows,
        budget,
        trend,
        slope,
        raw_trend,
        raw_slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOptions {
    /// Regular polygons used as model corners.
    pub sides: Vec<usize>,
    pub meshes: Vec<MeshParams>,
    /// Negative weights searched for the onset of decay.
    pub search: (f64, f64),
    pub step: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            sides: vec![3, 4, 6],
            meshes: default_study_meshes(),
            search: (-0.95, -0.05),
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub sides: usize,
    /// First positive zero of det(I + K̂(iη)).
    pub symbol_zero: f64,
    /// Weight where the decay exponent of σ_min extrapolates to zero.
    pub onset: f64,
    /// Last decaying and first non-decaying sampled weights.
    pub bracket: (f64, f64),
    /// Sampled `(a, β)` pairs used in the fit.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub points: Vec<CalibrationPoint>,
    pub calibration: LineCalibration,
}

/// Fit `γ(a)` so that discrete decay onsets on model corners land on symbol zeros.
pub fn calibrate_line(opts: &CalibrationOptions) -> Result<CalibrationReport, LayerError> {
    let identity = LineCalibration { slope: 1.0, offset: 0.0, source: "identity".into(), candidates: Vec::new() };
    let mut points = Vec::new();
    for &n in &opts.sides {
        let d = ConicalDomain::from_spec(DomainSpec::regular_polygon(n))?;
        let g = domain_groupoid(&d)?;
        let sym = limit_symbols(&g, 1.0)?.remove(0).symbol;
        let w = admissible_weight_window(&sym, 1.0, &identity, (0.0, 0.95), &WindowOptions::default())?;
        let zero = w
            .zeros
            .iter()
            .map(|z| z.a)
            .find(|&z| z > 1e-9)
            .ok_or_else(|| LayerError::Calibration(format!("no symbol zero for the {n}-gon")))?;
        let budget = crate::layerpot::StudyBudget { nullity: 0, index_jump: 0, extra: 0, total: 0 };
        let mut samples = Vec::new();
        let mut bracket = None;
        let mut a = opts.search.0;
        while a <= opts.search.1 + 1e-12 {
            let r = min_singular_value_study_with(&d, 1.0, a, &opts.meshes, budget)?;
            if r.raw_trend != Trend::Decaying {
                bracket = samples.last().map(|&(prev, _)| (prev, a));
                break;
            }
            samples.push((a, r.raw_slope));
            a += opts.step;
        }
        let bracket = bracket
            .filter(|_| samples.len() >= 2)
            .ok_or_else(|| LayerError::Calibration(format!("no decay onset in {:?} for the {n}-gon", opts.search)))?;
        // β falls roughly linearly to zero at the onset
        let (slope, offset) = line_fit(&samples);
        let onset = if slope != 0.0 { -offset / slope } else { bracket.1 };
        points.push(CalibrationPoint { sides: n, symbol_zero: zero, onset, bracket, samples });
    }
    let fit = |sign: f64| -> LineCandidate {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.onset, sign * p.symbol_zero)).collect();
        let (slope, offset) = line_fit(&pts);
        let residual = pts.iter().map(|(x, y)| (slope * x + offset - y).powi(2)).sum::<f64>().sqrt();
        LineCandidate { slope, offset, residual }
    };
    // the symbol is even in λ, so both orientations fit equally well
    let candidates = vec![fit(1.0), fit(-1.0)];
    let primary = candidates[0].clone();
    Ok(CalibrationReport {
        points,
        calibration: LineCalibration {
            slope: primary.slope,
            offset: primary.offset,
            source: "calibrated".into(),
            candidates,
        },
    })
}

/// Least-squares line `y = slope·x + offset`; a single point gives a line through the origin.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        (sxy / sxx, my - sxy / sxx * mx)
    } else {
        (my / mx, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_dirichlet() {
        let d = ConicalDomain::from_spec(DomainSpec::circle(1.0)).unwrap();
        let cal = LineCalibration::analytic();
        let opts = VerdictOptions::default();
        let one = solve_dirichlet(&d, |_| 1.0, 0.0, MeshParams::new(64, 0.5, 4), &cal, &opts).unwrap();
        let lin = solve_dirichlet(&d, |x| x[0], 0.0, MeshParams::new(64, 0.5, 4), &cal, &opts).unwrap();
        for x in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]] {
            assert!((one.evaluate(x) - 1.0).abs() < 1e-10);
            assert!((lin.evaluate(x) - x[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn trend_classes() {
        let h = [1e-2, 1e-3, 1e-4, 1e-5];
        assert_eq!(classify_trend(&[0.5, 0.5, 0.49, 0.49], &h).0, Trend::BoundedBelow);
        assert_eq!(classify_trend(&[1e-1, 3e-2, 1e-2, 3e-3], &h).0, Trend::Decaying);
        assert_eq!(classify_trend(&[1e-3, 1e-6, 1e-9, 1e-12], &h).0, Trend::Decaying);
    }
}
