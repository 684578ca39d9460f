use super::kernel::{transform_with_tol, MellinOperator};
use super::MellinError;
use ndarray::Array2;
use ndarray_linalg::{Determinant, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

/// Affine map from the weight index `a` of the space K^0_{1/2+a} to the
/// offset `γ(a) = slope·a + offset` of the Mellin integration line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCalibration {
    pub slope: f64,
    pub offset: f64,
    /// "analytic" or "calibrated".
    pub source: String,
    /// Every convention consistent with the calibration data.
    #[serde(default)]
    pub candidates: Vec<LineCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCandidate {
    pub slope: f64,
    pub offset: f64,
    pub residual: f64,
}

impl LineCalibration {
    /// Conjugating by r^{1/2+a} against dr/r moves the line to Im λ = −a.
    pub fn analytic() -> Self {
        LineCalibration {
            slope: -1.0,
            offset: 0.0,
            source: "analytic".into(),
            candidates: vec![LineCandidate { slope: -1.0, offset: 0.0, residual: 0.0 }],
        }
    }

    pub fn gamma(&self, a: f64) -> f64 {
        self.slope * a + self.offset
    }

    pub fn weight(&self, gamma: f64) -> f64 {
        (gamma - self.offset) / self.slope
    }

    pub fn line(&self, a: f64) -> WeightLine {
        WeightLine { a, gamma: self.gamma(a) }
    }
}

/// The line `{ξ + iγ : ξ ∈ ℝ}` attached to weight `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightLine {
    pub a: f64,
    pub gamma: f64,
}

impl WeightLine {
    pub fn at(&self, xi: f64) -> Complex64 {
        Complex64::new(xi, self.gamma)
    }
}

/// Symbol `λ ↦ K̂(λ)` of a Mellin operator, with a per-λ cache.
#[derive(Debug)]
pub struct MellinSymbol {
    pub op: MellinOperator,
    pub tol: f64,
    cache: Mutex<HashMap<(u64, u64), Array2<Complex64>>>,
}

impl Clone for MellinSymbol {
    fn clone(&self) -> Self {
        MellinSymbol::new(self.op.clone())
    }
}

impl MellinSymbol {
    pub fn new(op: MellinOperator) -> Self {
        MellinSymbol { op, tol: 1e-10, cache: Mutex::new(HashMap::new()) }
    }

    pub fn size(&self) -> usize {
        self.op.size()
    }

    /// Open interval of Im λ where all entries converge.
    pub fn strip(&self) -> (f64, f64) {
        self.op.strip()
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<Array2<Complex64>, MellinError> {
        let key = (lambda.re.to_bits(), lambda.im.to_bits());
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let m = transform_with_tol(&self.op, lambda, self.tol)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() > 200_000 {
            cache.clear();
        }
        cache.insert(key, m.clone());
        Ok(m)
    }

    /// `c·I + K̂(λ)`.
    pub fn shifted(&self, c: f64, lambda: Complex64) -> Result<Array2<Complex64>, MellinError> {
        let mut m = self.evaluate(lambda)?;
        for i in 0..m.nrows() {
            m[[i, i]] += c;
        }
        Ok(m)
    }

    pub fn sigma_min(&self, c: f64, lambda: Complex64) -> Result<f64, MellinError> {
        smallest_singular_value(&self.shifted(c, lambda)?)
    }

    /// `det(c·I + K̂(iη))`, real for real kernels.
    pub fn det_on_axis(&self, c: f64, eta: f64) -> Result<f64, MellinError> {
        let m = self.shifted(c, Complex64::new(0.0, eta))?;
        let d = m.det().map_err(|e| MellinError::Linalg(e.to_string()))?;
        Ok(d.re)
    }

    /// Majorant of ‖K̂(ξ + iη)‖₂ for |ξ| ≥ 1 as `(C, A)` meaning `C/(1+|ξ|) + A`
    /// entrywise, combined in Frobenius norm by [`tail_bound`].
    pub fn majorants(&self, eta: f64) -> Result<Vec<(f64, f64)>, MellinError> {
        let mut out = Vec::new();
        for e in self.op.entries.iter().flatten() {
            if !e.is_zero() {
                out.push(e.tail_majorant(eta)?);
            }
        }
        Ok(out)
    }
}

pub fn tail_bound(majorants: &[(f64, f64)], xi: f64) -> f64 {
    let xi = xi.abs().max(1.0);
    majorants.iter().map(|&(c, a)| (c / (1.0 + xi) + a).powi(2)).sum::<f64>().sqrt()
}

pub fn smallest_singular_value(m: &Array2<Complex64>) -> Result<f64, MellinError> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    if m.nrows() == 1 {
        return Ok(m[[0, 0]].norm());
    }
    let (_, s, _) = m.svd(false, false).map_err(|e| MellinError::Linalg(e.to_string()))?;
    Ok(s.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolSample {
    pub xi: f64,
    #[serde(skip)]
    pub matrix: Array2<Complex64>,
    pub sigma_min: f64,
}

/// Minimize `f` on `[a, b]` by golden-section search.
pub(crate) fn golden_min<F>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64), MellinError>
where
    F: FnMut(f64) -> Result<f64, MellinError>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let fa = f(a)?;
    let fb = f(b)?;
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for cand in [(a, fa), (b, fb)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    Ok(best)
}

fn check_line(sym: &MellinSymbol, line: &WeightLine) -> Result<(), MellinError> {
    let (lo, hi) = sym.strip();
    if !(line.gamma > lo && line.gamma < hi) {
        return Err(MellinError::OutsideStrip { eta: line.gamma, lower: lo, upper: hi });
    }
    Ok(())
}

/// Samples of `c·I + K̂(ξ + iγ(a))` on `xi_grid`, refined near interior
/// minima of the smallest singular value.
pub fn symbol_on_line(
    sym: &MellinSymbol,
    c: f64,
    line: &WeightLine,
    xi_grid: &[f64],
) -> Result<Vec<SymbolSample>, MellinError> {
    check_line(sym, line)?;
    let mut grid = xi_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(grid.len());
    for &xi in &grid {
        let m = sym.shifted(c, line.at(xi))?;
        let s = smallest_singular_value(&m)?;
        out.push(SymbolSample { xi, matrix: m, sigma_min: s });
    }
    let mut extra = Vec::new();
    for i in 1..out.len().saturating_sub(1) {
        if out[i].sigma_min <= out[i - 1].sigma_min && out[i].sigma_min <= out[i + 1].sigma_min {
            let (x, _) = golden_min(|x| sym.sigma_min(c, line.at(x)), out[i - 1].xi, out[i + 1].xi, 40)?;
            let m = sym.shifted(c, line.at(x))?;
            let s = smallest_singular_value(&m)?;
            extra.push(SymbolSample { xi: x, matrix: m, sigma_min: s });
        }
    }
    out.extend(extra);
    out.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub xi_max: f64,
    pub xi_cap: f64,
    pub tol: f64,
    /// Grid points on [0, ξ_max].
    pub grid: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { xi_max: 50.0, xi_cap: 800.0, tol: 1e-8, grid: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanResult {
    pub invertible: bool,
    /// Minimum of σ_min over the line.
    pub margin: f64,
    pub witness_xi: f64,
    /// Final scan half-width after any doubling.
    pub xi_max: f64,
    /// Majorant of ‖K̂‖ at ξ_max.
    pub tail_bound: f64,
    /// Beyond this |ξ| the majorant alone bounds σ_min below by the margin.
    pub certified_beyond: f64,
}

/// Scan `σ_min(c·I + K̂(ξ + iγ))` over ξ.
///
/// Real kernels give `K̂(−ξ + iγ) = conj K̂(ξ + iγ)`, so only ξ ≥ 0 is sampled.
/// Grid points past the point where the tail majorant already guarantees
/// σ_min ≥ current minimum are skipped.
pub fn invertibility_scan(
    sym: &MellinSymbol,
    c: f64,
    line: &WeightLine,
    opts: &ScanOptions,
) -> Result<ScanResult, MellinError> {
    check_line(sym, line)?;
    let maj = sym.majorants(line.gamma)?;
    let lower_bound = |xi: f64| c.abs() - tail_bound(&maj, xi);
    let sigma = |xi: f64| sym.sigma_min(c, line.at(xi));

    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut best = (0.0, f64::INFINITY);
    let mut certified = f64::INFINITY;
    let alpha = 5.0;
    let n = opts.grid.max(8);
    let mut xi_max = opts.xi_max;
    for j in 0..=n {
        let xi = xi_max * (alpha * j as f64 / n as f64).sinh() / alpha.sinh();
        if xi >= 1.0 && lower_bound(xi) >= best.1 {
            certified = xi;
            break;
        }
        let s = sigma(xi)?;
        samples.push((xi, s));
        if s < best.1 {
            best = (xi, s);
        }
    }
    // refine around sampled local minima
    for i in 0..samples.len() {
        let lo = if i == 0 { samples[0].0 } else { samples[i - 1].0 };
        let hi = if i + 1 < samples.len() { samples[i + 1].0 } else { samples[i].0 };
        let left_ok = i == 0 || samples[i].1 <= samples[i - 1].1;
        let right_ok = i + 1 == samples.len() || samples[i].1 <= samples[i + 1].1;
        if left_ok && right_ok && hi > lo {
            let (x, s) = golden_min(sigma, lo, hi, 40)?;
            if s < best.1 {
                best = (x, s);
            }
        }
    }
    let margin = best.1;
    if margin <= opts.tol {
        return Ok(ScanResult {
            invertible: false,
            margin,
            witness_xi: best.0,
            xi_max,
            tail_bound: tail_bound(&maj, xi_max),
            certified_beyond: certified,
        });
    }
    // tail certificate, doubling ξ_max when needed
    loop {
        if lower_bound(xi_max) > opts.tol {
            break;
        }
        if xi_max * 2.0 > opts.xi_cap {
            return Err(MellinError::TailBound { xi_max });
        }
        let from = xi_max;
        xi_max *= 2.0;
        for j in 1..=n {
            let xi = from + (xi_max - from) * j as f64 / n as f64;
            if lower_bound(xi) >= best.1 {
                break;
            }
            let s = sigma(xi)?;
            if s < best.1 {
                best = (xi, s);
            }
        }
        if best.1 <= opts.tol {
            return Ok(ScanResult {
                invertible: false,
                margin: best.1,
                witness_xi: best.0,
                xi_max,
                tail_bound: tail_bound(&maj, xi_max),
                certified_beyond: certified,
            });
        }
    }
    Ok(ScanResult {
        invertible: true,
        margin: best.1,
        witness_xi: best.0,
        xi_max,
        tail_bound: tail_bound(&maj, xi_max),
        certified_beyond: certified,
    })
}

#[cfg(test)]
mod tests {
    use super::super::kernel::{wedge_np_kernel, MellinOperator};
    use super::*;
    use std::f64::consts::PI;

    fn square() -> MellinSymbol {
        MellinSymbol::new(wedge_np_kernel(PI / 2.0).unwrap())
    }

    #[test]
    fn zero_operator_is_identity() {
        let s = MellinSymbol::new(MellinOperator::zero("v", 2));
        let line = LineCalibration::analytic().line(0.3);
        for smp in symbol_on_line(&s, 1.0, &line, &[-2.0, 0.0, 5.0]).unwrap() {
            assert!((smp.sigma_min - 1.0).abs() < 1e-15);
        }
        let r = invertibility_scan(&s, 1.0, &line, &ScanOptions::default()).unwrap();
        assert!(r.invertible && (r.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_c_plus_one_at_zero_weight() {
        let s = square();
        let line = LineCalibration::analytic().line(0.0);
        let r = invertibility_scan(&s, 1.0, &line, &ScanOptions::default()).unwrap();
        assert!(r.invertible);
        assert!(r.witness_xi.abs() < 1e-6);
        // eigenvalues 1 ± 1/2 at ξ = 0
        assert!((r.margin - 0.5).abs() < 1e-8);
    }

    #[test]
    fn square_c_minus_one_at_zero_weight() {
        let s = square();
        let line = LineCalibration::analytic().line(0.0);
        let m = s.shifted(-1.0, line.at(0.0)).unwrap();
        assert!((smallest_singular_value(&m).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn square_endpoint_degenerates() {
        let s = square();
        let line = LineCalibration::analytic().line(-2.0 / 3.0);
        let r = invertibility_scan(&s, 1.0, &line, &ScanOptions::default()).unwrap();
        assert!(!r.invertible, "margin {}", r.margin);
    }

    #[test]
    fn line_outside_strip() {
        let s = square();
        let line = WeightLine { a: -1.5, gamma: 1.5 };
        assert!(matches!(
            invertibility_scan(&s, 1.0, &line, &ScanOptions::default()),
            Err(MellinError::OutsideStrip { .. })
        ));
    }

    #[test]
    fn calibration_round_trip() {
        let c = LineCalibration::analytic();
        assert_eq!(c.gamma(0.25), -0.25);
        assert!((c.weight(c.gamma(0.37)) - 0.37).abs() < 1e-15);
    }
}
