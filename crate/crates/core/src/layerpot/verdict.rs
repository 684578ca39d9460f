use super::LayerError;
use crate::geometry::{
    desingularize_boundary, interior_angles, theta0, unfold, ConicalDomain,
};
use crate::groupoid::{
    build_groupoid, limit_operator, GroupoidDescriptor, GroupoidKind, OperatorDescriptor, StratumFamily,
    VertexStratum,
};
use crate::mellin::{
    admissible_weight_window, invertibility_scan, usable_range, LineCalibration, MellinError, MellinSymbol,
    ScanOptions, VertexWindowEntry, WindowOptions, WindowReport,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Groupoid of a domain: the plain one, or the unfolded one when cracks are present.
pub fn domain_groupoid(d: &ConicalDomain) -> Result<GroupoidDescriptor, LayerError> {
    let u = unfold(d);
    let kind = if d.has_cracks() { GroupoidKind::Crack } else { GroupoidKind::NoCrack };
    Ok(build_groupoid(&desingularize_boundary(&u), kind)?)
}

/// Symbol of the limit operator of `c·I + K` at one stratum. Strata with
/// identical kernels share one symbol.
#[derive(Debug, Clone)]
pub struct StratumSymbol {
    pub stratum: VertexStratum,
    pub scalar: f64,
    pub symbol: Arc<MellinSymbol>,
}

pub fn limit_symbols(g: &GroupoidDescriptor, c: f64) -> Result<Vec<StratumSymbol>, LayerError> {
    let p = OperatorDescriptor::double_layer(g, c);
    let mut shared: HashMap<String, Arc<MellinSymbol>> = HashMap::new();
    let mut out = Vec::new();
    for st in &g.strata {
        let lim = limit_operator(&p, st)?;
        let key = lim.mellin.fingerprint();
        let symbol = shared.entry(key).or_insert_with(|| Arc::new(MellinSymbol::new(lim.mellin.clone()))).clone();
        out.push(StratumSymbol { stratum: st.clone(), scalar: lim.scalar, symbol });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub scan: ScanOptions,
    /// Weights closer than this to a symbol zero are inconclusive.
    pub band: f64,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions { scan: ScanOptions::default(), band: 5e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumStatus {
    Invertible,
    Singular,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumVerdict {
    pub stratum: String,
    pub vertex_id: String,
    pub family: StratumFamily,
    pub size: usize,
    pub status: StratumStatus,
    pub margin: f64,
    pub witness_xi: f64,
    pub xi_max: f64,
    pub tail_bound: f64,
    /// Symbol zero within the band, if any.
    pub nearby_zero: Option<f64>,
    /// The symbol is singular on every admissible line.
    pub singular_everywhere: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Fredholm,
    NotFredholm,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmVerdict {
    pub domain_hash: String,
    pub operator: String,
    pub c: f64,
    pub a: f64,
    /// Offset of the integration line used for `a`.
    pub gamma: f64,
    pub calibration: LineCalibration,
    pub groupoid: GroupoidKind,
    pub elliptic: bool,
    pub strata: Vec<StratumVerdict>,
    pub overall: Verdict,
    /// First stratum whose symbol is singular.
    pub witness: Option<String>,
    pub reference_window: Option<(f64, f64)>,
    pub in_reference_window: Option<bool>,
    pub tol: f64,
    pub band: f64,
}

/// `(−θ₀, 1/2)` for crack-free domains with conical points.
pub fn reference_window(d: &ConicalDomain) -> Option<(f64, f64)> {
    if d.has_cracks() {
        return None;
    }
    let angles: Vec<f64> = interior_angles(d).into_iter().flat_map(|(_, a)| a).collect();
    theta0(&angles).ok().map(|t| (-t, 0.5))
}

pub fn fredholm_verdict(d: &ConicalDomain, c: f64, a: f64) -> Result<FredholmVerdict, LayerError> {
    fredholm_verdict_with(d, c, a, &LineCalibration::analytic(), &VerdictOptions::default())
}

/// `c·I + K` is Fredholm on `K^0_{1/2+a}` iff `c ≠ 0` and every limit-operator
/// symbol is invertible on the line of weight `a`.
pub fn fredholm_verdict_with(
    d: &ConicalDomain,
    c: f64,
    a: f64,
    cal: &LineCalibration,
    opts: &VerdictOptions,
) -> Result<FredholmVerdict, LayerError> {
    let g = domain_groupoid(d)?;
    let symbols = limit_symbols(&g, c)?;
    let line = cal.line(a);
    let elliptic = c != 0.0;
    let mut cache: HashMap<*const MellinSymbol, StratumVerdict> = HashMap::new();
    let mut strata = Vec::new();
    for s in &symbols {
        let key = Arc::as_ptr(&s.symbol);
        let v = match cache.get(&key) {
            Some(v) => v.clone(),
            None => {
                let v = stratum_verdict(&s.symbol, c, a, cal, opts)?;
                cache.insert(key, v.clone());
                v
            }
        };
        strata.push(StratumVerdict {
            stratum: s.stratum.key.clone(),
            vertex_id: s.stratum.vertex_id.clone(),
            family: s.stratum.family,
            size: s.stratum.size(),
            ..v
        });
    }
    let singular = strata.iter().find(|s| s.status == StratumStatus::Singular);
    let overall = if !elliptic || singular.is_some() {
        Verdict::NotFredholm
    } else if strata.iter().any(|s| s.status == StratumStatus::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Fredholm
    };
    let witness = singular
        .or_else(|| strata.iter().find(|s| s.status == StratumStatus::Inconclusive))
        .map(|s| s.stratum.clone());
    let pw = reference_window(d);
    Ok(FredholmVerdict {
        domain_hash: d.hash.clone(),
        operator: format!("{c}*I + K"),
        c,
        a,
        gamma: line.gamma,
        calibration: cal.clone(),
        groupoid: g.kind,
        elliptic,
        strata,
        overall,
        witness,
        reference_window: pw,
        in_reference_window: pw.map(|(l, u)| a > l && a < u),
        tol: opts.scan.tol,
        band: opts.band,
    })
}

fn stratum_verdict(
    sym: &MellinSymbol,
    c: f64,
    a: f64,
    cal: &LineCalibration,
    opts: &VerdictOptions,
) -> Result<StratumVerdict, LayerError> {
    let scan = invertibility_scan(sym, c, &cal.line(a), &opts.scan)?;
    let mut status = if scan.invertible { StratumStatus::Invertible } else { StratumStatus::Singular };
    let mut nearby_zero = None;
    let mut singular_everywhere = false;
    // symbol zeros within the band make the verdict inconclusive
    let wopts = WindowOptions { scan: opts.scan, a_step: opts.band / 2.0, a_ref: a, zero_tol: 1e-6, strip_guard: 0.0 };
    let (lo, hi) = usable_range(sym, cal, (a - opts.band, a + opts.band), 0.0);
    let search = (lo.max(a - opts.band), hi.min(a + opts.band));
    if search.1 > search.0 {
        match admissible_weight_window(sym, c, cal, search, &wopts) {
            Ok(w) => {
                if let Some(z) = w.zeros.iter().find(|z| (z.a - a).abs() < opts.band) {
                    nearby_zero = Some(z.a);
                    status = StratumStatus::Inconclusive;
                }
            }
            Err(MellinError::NoInvertibleWeight) => singular_everywhere = true,
            Err(e) => return Err(e.into()),
        }
    }
    if singular_everywhere {
        status = StratumStatus::Singular;
    }
    Ok(StratumVerdict {
        stratum: String::new(),
        vertex_id: String::new(),
        family: StratumFamily::NonCrack,
        size: sym.size(),
        status,
        margin: scan.margin,
        witness_xi: scan.witness_xi,
        xi_max: scan.xi_max,
        tail_bound: scan.tail_bound,
        nearby_zero,
        singular_everywhere,
    })
}

/// Per-stratum admissible windows and their intersection.
pub fn weight_windows(
    d: &ConicalDomain,
    c: f64,
    cal: &LineCalibration,
    search: (f64, f64),
    opts: &WindowOptions,
) -> Result<WindowReport, LayerError> {
    let g = domain_groupoid(d)?;
    let symbols = limit_symbols(&g, c)?;
    let mut cache: HashMap<*const MellinSymbol, VertexWindowEntry> = HashMap::new();
    let mut entries = Vec::new();
    for s in &symbols {
        let key = Arc::as_ptr(&s.symbol);
        let e = match cache.get(&key) {
            Some(e) => e.clone(),
            None => {
                let e = match admissible_weight_window(&s.symbol, c, cal, search, opts) {
                    Ok(w) => VertexWindowEntry { vertex: String::new(), window: Some(w), error: None },
                    Err(MellinError::NoInvertibleWeight) => VertexWindowEntry {
                        vertex: String::new(),
                        window: None,
                        error: Some(MellinError::NoInvertibleWeight.to_string()),
                    },
                    Err(e) => return Err(e.into()),
                };
                cache.insert(key, e.clone());
                e
            }
        };
        let mut e = e;
        e.vertex = s.stratum.key.clone();
        if let Some(w) = e.window.as_mut() {
            w.vertex = s.stratum.key.clone();
        }
        entries.push(e);
    }
    Ok(WindowReport::combine(c, entries, reference_window(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn square() -> ConicalDomain {
        ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap()
    }

    #[test]
    fn square_is_fredholm_at_zero() {
        let v = fredholm_verdict(&square(), 1.0, 0.0).unwrap();
        assert_eq!(v.overall, Verdict::Fredholm);
        assert_eq!(v.strata.len(), 4);
        assert!(v.strata.iter().all(|s| (s.margin - 0.5).abs() < 1e-8));
        assert_eq!(v.in_reference_window, Some(true));
    }

    #[test]
    fn endpoint_is_inconclusive() {
        let v = fredholm_verdict(&square(), 1.0, -2.0 / 3.0 + 1e-3).unwrap();
        assert_eq!(v.overall, Verdict::Inconclusive);
    }

    #[test]
    fn scalar_zero_is_not_elliptic() {
        let v = fredholm_verdict(&square(), 0.0, 0.0).unwrap();
        assert!(!v.elliptic);
        assert_eq!(v.overall, Verdict::NotFredholm);
    }

    #[test]
    fn outside_strip_is_an_error() {
        assert!(fredholm_verdict(&square(), 1.0, 1.2).is_err());
    }

    #[test]
    fn slit_square_is_not_fredholm() {
        let mut s = DomainSpec::unit_square();
        s.add_vertex("a", [0.3, 0.5]);
        s.add_vertex("b", [0.7, 0.5]);
        s.add_crack("k", "a", "b");
        let d = ConicalDomain::from_spec(s).unwrap();
        let v = fredholm_verdict(&d, 1.0, 0.0).unwrap();
        assert_eq!(v.overall, Verdict::NotFredholm);
        let w = v.witness.unwrap();
        assert!(w.starts_with("a#") || w.starts_with("b#"), "{w}");
    }
}
