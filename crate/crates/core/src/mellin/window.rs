use super::symbol::{golden_min, invertibility_scan, LineCalibration, MellinSymbol, ScanOptions};
use super::MellinError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowOptions {
    pub scan: ScanOptions,
    /// Spacing of the coarse a-grid.
    pub a_step: f64,
    /// Reference weight whose component is the window.
    pub a_ref: f64,
    /// σ_min below this at a refined minimum counts as a symbol zero.
    pub zero_tol: f64,
    /// Keep |Im λ| this far inside a finite strip edge.
    pub strip_guard: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions { scan: ScanOptions::default(), a_step: 0.05, a_ref: 0.0, zero_tol: 1e-6, strip_guard: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolZero {
    pub a: f64,
    pub gamma: f64,
    pub xi: f64,
    /// σ_min at the located zero.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSample {
    pub a: f64,
    pub margin: f64,
    pub witness_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexWindow {
    pub vertex: String,
    pub c: f64,
    /// The component of invertible weights containing the reference weight.
    pub lower: f64,
    pub upper: f64,
    pub lower_is_zero: bool,
    pub upper_is_zero: bool,
    pub zeros: Vec<SymbolZero>,
    /// Searched range split at the zeros.
    pub intervals: Vec<(f64, f64)>,
    pub curve: Vec<MarginSample>,
}

impl VertexWindow {
    pub fn contains(&self, a: f64) -> bool {
        a > self.lower && a < self.upper
    }
}

/// Range of a with γ(a) safely inside the strip, intersected with `search`.
pub fn usable_range(sym: &MellinSymbol, cal: &LineCalibration, search: (f64, f64), guard: f64) -> (f64, f64) {
    let (lo, hi) = sym.strip();
    let lo = if lo.is_finite() { lo + guard } else { lo };
    let hi = if hi.is_finite() { hi - guard } else { hi };
    let (a1, a2) = (cal.weight(lo), cal.weight(hi));
    let (amin, amax) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
    (search.0.max(amin), search.1.min(amax))
}

fn margin_at(
    sym: &MellinSymbol,
    c: f64,
    cal: &LineCalibration,
    a: f64,
    opts: &WindowOptions,
) -> Result<MarginSample, MellinError> {
    let r = invertibility_scan(sym, c, &cal.line(a), &opts.scan)?;
    Ok(MarginSample { a, margin: r.margin, witness_xi: r.witness_xi })
}

/// Locate the symbol zeros along the weight axis and the window around `a_ref`.
pub fn admissible_weight_window(
    sym: &MellinSymbol,
    c: f64,
    cal: &LineCalibration,
    search: (f64, f64),
    opts: &WindowOptions,
) -> Result<VertexWindow, MellinError> {
    let (lo, hi) = usable_range(sym, cal, search, opts.strip_guard);
    if !(hi > lo) {
        return Err(MellinError::NoInvertibleWeight);
    }
    let n = ((hi - lo) / opts.a_step).ceil().max(2.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut curve = Vec::with_capacity(grid.len());
    let mut dets = Vec::with_capacity(grid.len());
    for &a in &grid {
        curve.push(margin_at(sym, c, cal, a, opts)?);
        dets.push(sym.det_on_axis(c, cal.gamma(a))?);
    }

    let mut zeros: Vec<SymbolZero> = Vec::new();
    let push = |zeros: &mut Vec<SymbolZero>, z: SymbolZero| {
        if !zeros.iter().any(|w| (w.a - z.a).abs() < 1e-7) {
            zeros.push(z);
        }
    };
    // zeros on the imaginary axis: sign changes of the real determinant
    for i in 0..n {
        if dets[i] == 0.0 || dets[i] * dets[i + 1] < 0.0 {
            let (mut x0, mut x1) = (grid[i], grid[i + 1]);
            let mut f0 = dets[i];
            for _ in 0..80 {
                let xm = 0.5 * (x0 + x1);
                let fm = sym.det_on_axis(c, cal.gamma(xm))?;
                if fm == 0.0 {
                    x0 = xm;
                    x1 = xm;
                    break;
                }
                if fm * f0 < 0.0 {
                    x1 = xm;
                } else {
                    x0 = xm;
                    f0 = fm;
                }
                if x1 - x0 < 1e-14 {
                    break;
                }
            }
            let a = 0.5 * (x0 + x1);
            let s = sym.sigma_min(c, cal.line(a).at(0.0))?;
            if s < opts.zero_tol {
                push(&mut zeros, SymbolZero { a, gamma: cal.gamma(a), xi: 0.0, residual: s });
            }
        }
    }
    // remaining zeros: refined local minima of the margin
    for i in 0..=n {
        let m = curve[i].margin;
        let left = i == 0 || m <= curve[i - 1].margin;
        let right = i == n || m <= curve[i + 1].margin;
        if !(left && right) {
            continue;
        }
        let (a0, a1) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n)]);
        if zeros.iter().any(|z| z.a >= a0 && z.a <= a1) {
            continue;
        }
        let xi0 = curve[i].witness_xi;
        let inner = |a: f64| -> Result<f64, MellinError> {
            let line = cal.line(a);
            let (_, s) = golden_min(|x| sym.sigma_min(c, line.at(x)), (xi0 - 0.5).max(0.0), xi0 + 0.5, 30)?;
            Ok(s)
        };
        let (a, s) = golden_min(inner, a0, a1, 50)?;
        if s < opts.zero_tol {
            let line = cal.line(a);
            let (xi, s) = golden_min(|x| sym.sigma_min(c, line.at(x)), (xi0 - 0.5).max(0.0), xi0 + 0.5, 40)?;
            push(&mut zeros, SymbolZero { a, gamma: cal.gamma(a), xi, residual: s });
        }
    }
    zeros.sort_by(|x, y| x.a.total_cmp(&y.a));

    // component containing the reference weight (or the nearest invertible grid point)
    let invertible: Vec<usize> = (0..=n).filter(|&i| curve[i].margin > opts.scan.tol).collect();
    if invertible.is_empty() {
        return Err(MellinError::NoInvertibleWeight);
    }
    let reference = if opts.a_ref > lo && opts.a_ref < hi && !zeros.iter().any(|z| (z.a - opts.a_ref).abs() < 1e-9) {
        opts.a_ref
    } else {
        let i = *invertible
            .iter()
            .min_by(|&&i, &&j| (grid[i] - opts.a_ref).abs().total_cmp(&(grid[j] - opts.a_ref).abs()))
            .expect("non-empty");
        grid[i]
    };
    let below = zeros.iter().rev().find(|z| z.a < reference);
    let above = zeros.iter().find(|z| z.a > reference);
    let mut cuts = vec![lo];
    cuts.extend(zeros.iter().map(|z| z.a));
    cuts.push(hi);
    let intervals = cuts.windows(2).map(|w| (w[0], w[1])).filter(|w| w.1 > w.0).collect();
    Ok(VertexWindow {
        vertex: sym.op.vertex.clone(),
        c,
        lower: below.map_or(lo, |z| z.a),
        upper: above.map_or(hi, |z| z.a),
        lower_is_zero: below.is_some(),
        upper_is_zero: above.is_some(),
        zeros,
        intervals,
        curve,
    })
}

/// Per-vertex windows combined into the global window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub c: f64,
    pub vertices: Vec<VertexWindowEntry>,
    /// Intersection of the per-vertex windows.
    pub global: Option<(f64, f64)>,
    /// (−θ₀, 1/2) for comparison.
    pub reference: Option<(f64, f64)>,
    /// Pointwise minimum of the per-vertex margin curves.
    pub margin_curve: Vec<MarginSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexWindowEntry {
    pub vertex: String,
    pub window: Option<VertexWindow>,
    pub error: Option<String>,
}

impl WindowReport {
    pub fn combine(c: f64, entries: Vec<VertexWindowEntry>, reference: Option<(f64, f64)>) -> Self {
        let mut global = Some((f64::NEG_INFINITY, f64::INFINITY));
        for e in &entries {
            global = match (&e.window, global) {
                (Some(w), Some((l, u))) => Some((l.max(w.lower), u.min(w.upper))),
                _ => None,
            };
        }
        let global = global.filter(|g| g.1 > g.0 && g.0.is_finite() && g.1.is_finite());
        let mut margin_curve: Vec<MarginSample> = Vec::new();
        for w in entries.iter().filter_map(|e| e.window.as_ref()) {
            if margin_curve.is_empty() {
                margin_curve = w.curve.clone();
            } else if margin_curve.len() == w.curve.len() {
                for (m, s) in margin_curve.iter_mut().zip(&w.curve) {
                    if s.margin < m.margin {
                        *m = *s;
                    }
                }
            }
        }
        WindowReport { c, vertices: entries, global, reference, margin_curve }
    }
}

#[cfg(test)]
mod tests {
    use super::super::kernel::{wedge_np_kernel, MellinOperator};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_window_endpoints() {
        let s = MellinSymbol::new(wedge_np_kernel(PI / 2.0).unwrap());
        let cal = LineCalibration::analytic();
        let w = admissible_weight_window(&s, 1.0, &cal, (-1.0, 1.0), &WindowOptions::default()).unwrap();
        assert!((w.lower + 2.0 / 3.0).abs() < 1e-6, "{}", w.lower);
        assert!((w.upper - 2.0 / 3.0).abs() < 1e-6, "{}", w.upper);
        assert!(w.lower_is_zero && w.upper_is_zero);
        assert_eq!(w.intervals.len(), 3);
    }

    #[test]
    fn zero_operator_window_is_whole_search() {
        let s = MellinSymbol::new(MellinOperator::zero("v", 2));
        let cal = LineCalibration::analytic();
        let w = admissible_weight_window(&s, 1.0, &cal, (-0.9, 0.9), &WindowOptions::default()).unwrap();
        assert_eq!((w.lower, w.upper), (-0.9, 0.9));
        assert!(w.zeros.is_empty());
    }

    #[test]
    fn reflex_vertex_minus_one() {
        let s = MellinSymbol::new(wedge_np_kernel(1.5 * PI).unwrap());
        let cal = LineCalibration::analytic();
        let w = admissible_weight_window(&s, -1.0, &cal, (-1.0, 1.0), &WindowOptions::default()).unwrap();
        assert!(w.lower < -2.0 / 3.0 + 1e-3 && w.upper > 0.5 - 1e-3);
        assert!((w.lower + 2.0 / 3.0).abs() < 1e-6);
    }
}
