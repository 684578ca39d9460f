//! One check per acceptance criterion, each printed as a PASS/FAIL line.

use conefred::geometry::{interior_angles, parse_domain, theta0, unfold, ConicalDomain, DomainSpec, VertexClass};
use conefred::groupoid::{orbit_representatives, StratumFamily};
use conefred::layerpot::{
    assemble_np, domain_groupoid, fredholm_verdict, mesh_domain, min_singular_value_study, solve_dirichlet,
    study_budget, study_meshes, default_study_meshes, min_singular_value_study_with, weight_windows, MeshParams,
    Trend, Verdict, VerdictOptions,
};
use conefred::mellin::{mellin_transform, wedge_np_kernel, LineCalibration, WindowOptions};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> ConicalDomain {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
    parse_domain(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn fixture_names() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str().map(String::from))
        .collect();
    names.sort();
    names
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_theta0() -> Outcome {
    let mut cases: Vec<(String, ConicalDomain, f64)> = vec![
        ("square".into(), fixture("square"), 2.0 / 3.0),
        ("l-shape".into(), fixture("l-shape"), 2.0 / 3.0),
        ("hexagon".into(), fixture("hexagon"), 0.75),
    ];
    // interior angle (n−2)π/n, so π/(2π−θ) = n/(n+2) is the smaller ratio
    for n in 3..=8 {
        cases.push((format!("{n}-gon"), fixture(&format!("ngon-{n}")), n as f64 / (n as f64 + 2.0)));
    }
    let mut worst: f64 = 0.0;
    for (name, d, expect) in &cases {
        let angles: Vec<f64> = interior_angles(d).into_iter().flat_map(|(_, a)| a).collect();
        let got = theta0(&angles).map_err(|e| format!("{name}: {e}"))?;
        let err = (got - expect).abs();
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("{name}: θ₀ = {got}, expected {expect}"));
        }
    }
    Ok(format!("{} domains, max deviation {worst:.1e}", cases.len()))
}

fn closed_form(theta: f64, l: Complex64) -> Complex64 {
    if l.norm() < 1e-12 {
        return Complex64::new((PI - theta) / PI, 0.0);
    }
    ((PI - theta) * l).sinh() / (PI * l).sinh()
}

/// Trapezoid rule in `u = log t`; spectrally accurate for this analytic, exponentially decaying integrand.
fn oracle(theta: f64, xi: f64) -> Complex64 {
    let (h, half) = (0.02, 45.0);
    let n = (2.0 * half / h) as i64;
    let (s, c) = theta.sin_cos();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let u = -half + k as f64 * h;
        let t = u.exp();
        let kappa = t * s / (PI * (t * t - 2.0 * t * c + 1.0));
        acc += kappa * Complex64::new(0.0, -xi * u).exp();
    }
    acc * h
}

fn c2_mellin() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut oracle_worst: f64 = 0.0;
    for theta in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, 1.5 * PI] {
        let op = wedge_np_kernel(theta).map_err(|e| e.to_string())?;
        for k in 0..=200 {
            let xi = -10.0 + 0.1 * k as f64;
            let l = Complex64::new(xi, 0.0);
            let m = mellin_transform(&op, l).map_err(|e| e.to_string())?;
            let exact = closed_form(theta, l);
            worst = worst.max((m[[0, 1]] - exact).norm()).max((m[[1, 0]] - exact).norm());
            if k % 10 == 0 {
                oracle_worst = oracle_worst.max((oracle(theta, xi) - exact).norm());
            }
        }
    }
    check(
        worst <= 1e-8 && oracle_worst <= 1e-10,
        format!("max |K̂ − closed form| = {worst:.2e} (≤ 1e-8); oracle vs closed form {oracle_worst:.1e}"),
    )
}

fn c3_diagonalization() -> Outcome {
    let (n, h, guard) = (512usize, 0.15, 30.0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for theta in [PI / 3.0, PI / 2.0, 1.5 * PI] {
        let op = wedge_np_kernel(theta).map_err(|e| e.to_string())?;
        for l in [Complex64::new(0.0, 0.0), Complex64::new(1.5, 0.0), Complex64::new(-3.0, 0.3)] {
            let sym = mellin_transform(&op, l).map_err(|e| e.to_string())?;
            let v = [Complex64::new(1.0, 0.0), Complex64::new(-0.5, 2.0)];
            let u0 = -(n as f64 - 1.0) * h / 2.0;
            let f: Vec<Vec<Complex64>> = (0..n)
                .map(|j| {
                    let p = (Complex64::new(0.0, 1.0) * l * (u0 + j as f64 * h)).exp();
                    vec![v[0] * p, v[1] * p]
                })
                .collect();
            let g = op.apply_log_grid(h, &f);
            for (j, gj) in g.iter().enumerate() {
                let u = u0 + j as f64 * h;
                if u - u0 < guard || u0 + (n as f64 - 1.0) * h - u < guard {
                    continue;
                }
                let p = (Complex64::new(0.0, 1.0) * l * u).exp();
                for a in 0..2 {
                    let expect = (sym[[a, 0]] * v[0] + sym[[a, 1]] * v[1]) * p;
                    worst = worst.max((gj[a] - expect).norm() / p.norm());
                }
                checked += 1;
            }
        }
    }
    check(worst <= 1e-6, format!("{checked} grid points, max relative deviation {worst:.2e} (≤ 1e-6)"))
}

fn c4_windows() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["square", "l-shape"] {
        let d = fixture(name);
        let t0 = 2.0 / 3.0;
        for c in [1.0, -1.0] {
            let r = weight_windows(&d, c, &LineCalibration::analytic(), (-0.95, 0.95), &WindowOptions::default())
                .map_err(|e| e.to_string())?;
            let Some((lo, hi)) = r.global else {
                return Err(format!("{name} c={c}: no global window"));
            };
            let contains = lo <= -t0 + 1e-3 && hi >= 0.5 - 1e-3;
            let zero = r
                .vertices
                .iter()
                .filter_map(|e| e.window.as_ref())
                .flat_map(|w| w.zeros.iter())
                .map(|z| (z.a + t0).abs())
                .fold(f64::INFINITY, f64::min);
            ok &= contains && zero <= 1e-6;
            lines.push(format!("{name} c={c:+}: ({lo:.7}, {hi:.7}), |zero + θ₀| = {zero:.1e}"));
        }
    }
    check(ok, lines.join("; "))
}

fn c5_consistency() -> Outcome {
    let start = Instant::now();
    let cal = LineCalibration::analytic();
    let grid: Vec<f64> = (0..20).map(|i| -0.9 + 1.8 * i as f64 / 19.0).collect();
    let (mut agree, mut total) = (0, 0);
    let mut mismatches = Vec::new();
    let mut verdicts = BTreeMap::new();
    for name in ["square", "l-shape", "hexagon"] {
        let d = fixture(name);
        let angles: Vec<f64> = interior_angles(&d).into_iter().flat_map(|(_, a)| a).collect();
        let t0 = theta0(&angles).unwrap();
        for c in [1.0, -1.0] {
            let w = weight_windows(&d, c, &cal, (-0.95, 0.95), &WindowOptions::default()).map_err(|e| e.to_string())?;
            for &a in &grid {
                if (a + t0).abs() < 5e-3 || (a - t0).abs() < 5e-3 || (a - 0.5).abs() < 5e-3 {
                    continue;
                }
                let v = fredholm_verdict(&d, c, a).map_err(|e| e.to_string())?;
                let b = study_budget(&d, c, a, Some(&w), &cal).map_err(|e| e.to_string())?;
                let s = min_singular_value_study_with(&d, c, a, &default_study_meshes(), b).map_err(|e| e.to_string())?;
                let same = match v.overall {
                    Verdict::Fredholm => s.trend == Trend::BoundedBelow,
                    Verdict::NotFredholm => s.trend == Trend::Decaying,
                    Verdict::Inconclusive => false,
                };
                *verdicts.entry(format!("{:?}", v.overall)).or_insert(0) += 1;
                total += 1;
                if same {
                    agree += 1;
                } else {
                    mismatches.push(format!("{name} c={c:+} a={a:+.3}: {:?} vs {:?}", v.overall, s.trend));
                }
            }
        }
    }
    check(
        agree == total,
        format!(
            "{agree}/{total} agree (verdicts {verdicts:?}) in {:.0}s{}",
            start.elapsed().as_secs_f64(),
            if mismatches.is_empty() { String::new() } else { format!("; {}", mismatches.join(", ")) }
        ),
    )
}

fn c6_cracks() -> Outcome {
    let d = fixture("slit-square");
    let v = fredholm_verdict(&d, 1.0, 0.0).map_err(|e| e.to_string())?;
    let witness = v.witness.clone().unwrap_or_default();
    let st = v.strata.iter().find(|s| s.stratum == witness);
    let tip = st
        .and_then(|s| d.vertices.iter().find(|x| x.id == s.vertex_id))
        .map(|x| x.classification == VertexClass::InnerCrack && x.ramification == 1)
        .unwrap_or(false);
    let mut ok = v.overall == Verdict::NotFredholm && tip && st.map(|s| s.family) == Some(StratumFamily::CrackCover);
    let mut lines = vec![format!("slit-square c=+1 a=0: {:?}, witness {witness} (crack tip: {tip})", v.overall)];
    for (name, expect) in [("slit-square", (2, 0)), ("slit-disk", (3, 0)), ("t-crack", (6, 0))] {
        let u = unfold(&fixture(name));
        ok &= (u.alpha, u.m_prime) == expect;
        lines.push(format!("{name} (α, m′) = ({}, {}) expected {expect:?}", u.alpha, u.m_prime));
    }
    check(ok, lines.join("; "))
}

fn c7_circle() -> Outcome {
    let d = fixture("circle");
    let mut worst: f64 = 0.0;
    for n in [64, 128, 256] {
        let m = mesh_domain(&d, MeshParams::new(n, 0.5, 2)).map_err(|e| e.to_string())?;
        let a = assemble_np(&d, &m).map_err(|e| e.to_string())?;
        for row in a.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
    }
    let s = min_singular_value_study(&d, -1.0, 0.0, &study_meshes(&d)).map_err(|e| e.to_string())?;
    let last = s.rows.last().unwrap();
    check(
        worst <= 1e-10 && s.raw_trend == Trend::Decaying && s.trend == Trend::BoundedBelow,
        format!(
            "max |A·1 − 1| = {worst:.1e}; c=−1: σ_min {:?} (σ_min = {:.1e}, σ_2 = {:.3}, σ_2 {:?})",
            s.raw_trend, last.sigma[0], last.sigma[1], s.trend
        ),
    )
}

fn c8_dirichlet() -> Outcome {
    let d = fixture("square");
    let g = |p: [f64; 2]| p[0] * p[0] - p[1] * p[1];
    let sol = solve_dirichlet(
        &d,
        g,
        0.0,
        MeshParams::new(32, 0.5, 12),
        &LineCalibration::analytic(),
        &VerdictOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut pts = Vec::new();
    for i in 0..=20 {
        for j in 0..=20 {
            let p = [i as f64 / 20.0, j as f64 / 20.0];
            if d.distance_to_boundary(p) >= 0.2 {
                pts.push(p);
            }
        }
    }
    let scale = pts.iter().map(|&p| g(p).abs()).fold(0.0, f64::max);
    let err = pts.iter().map(|&p| (sol.evaluate(p) - g(p)).abs()).fold(0.0, f64::max) / scale;
    check(err <= 1e-3, format!("{} points, max relative error {err:.2e} (≤ 1e-3)", pts.len()))
}

/// Counts recomputed from the edge list: rays at each vertex, gaps between
/// consecutive rays that point into the domain, crack rays bounding them.
struct Brute {
    ramification: BTreeMap<String, usize>,
    strata: usize,
    sizes: Vec<usize>,
    alpha: usize,
    m_prime: usize,
}

fn brute_force(spec: &DomainSpec, d: &ConicalDomain) -> Brute {
    let pos: BTreeMap<&str, [f64; 2]> = spec.vertices.iter().map(|v| (v.id.as_str(), [v.x, v.y])).collect();
    let mut rays: BTreeMap<&str, Vec<(f64, bool)>> = BTreeMap::new();
    let mut reach: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &spec.edges {
        let (a, b) = (pos[e.from.as_str()], pos[e.to.as_str()]);
        let ends: Vec<(&str, [f64; 2])> = match &e.params {
            None => {
                let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                for v in [e.from.as_str(), e.to.as_str()] {
                    let r = reach.entry(v).or_insert(f64::INFINITY);
                    *r = r.min(l);
                }
                vec![(e.from.as_str(), [b[0] - a[0], b[1] - a[1]]), (e.to.as_str(), [a[0] - b[0], a[1] - b[1]])]
            }
            Some(arc) => {
                let o = if arc.ccw { 1.0 } else { -1.0 };
                let ra = [a[0] - arc.center[0], a[1] - arc.center[1]];
                let rb = [b[0] - arc.center[0], b[1] - arc.center[1]];
                vec![(e.from.as_str(), [-o * ra[1], o * ra[0]]), (e.to.as_str(), [o * rb[1], -o * rb[0]])]
            }
        };
        for (v, dir) in ends {
            rays.entry(v).or_default().push((dir[1].atan2(dir[0]), e.crack));
        }
    }
    let mut out = Brute { ramification: BTreeMap::new(), strata: 0, sizes: Vec::new(), alpha: 0, m_prime: 0 };
    for (v, mut rs) in rays {
        rs.sort_by(|x, y| x.0.total_cmp(&y.0));
        rs.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-12 && x.1 == y.1);
        let has_crack = rs.iter().any(|r| r.1);
        let boundary: Vec<f64> = rs.iter().filter(|r| !r.1).map(|r| r.0).collect();
        let smooth_pair = boundary.len() == 2 && ((boundary[1] - boundary[0]).abs() - PI).abs() < 1e-9;
        if !has_crack && smooth_pair {
            continue;
        }
        let p = pos[v];
        let delta = 1e-3 * reach.get(v).copied().unwrap_or(1.0).min(1.0);
        let mut comps = Vec::new();
        for k in 0..rs.len() {
            let (a0, c0) = rs[k];
            let (mut a1, c1) = rs[(k + 1) % rs.len()];
            if a1 <= a0 {
                a1 += 2.0 * PI;
            }
            let mid = 0.5 * (a0 + a1);
            if d.contains([p[0] + delta * mid.cos(), p[1] + delta * mid.sin()]) {
                comps.push(c0 || c1);
            }
        }
        out.ramification.insert(v.to_string(), comps.len());
        if !has_crack {
            out.strata += 1;
            out.sizes.push(2 * comps.len());
            continue;
        }
        out.alpha += comps.len();
        let crack_comps = comps.iter().filter(|&&c| c).count();
        let plain = comps.len() - crack_comps;
        let conical = !smooth_pair && !boundary.is_empty();
        if conical && plain > 0 {
            out.m_prime += 1;
            out.strata += 1;
            out.sizes.push(2 * plain);
        }
        out.strata += crack_comps;
        out.sizes.extend(std::iter::repeat(2).take(crack_comps));
        if !conical {
            // inner and outer crack points: every component is a cover
            out.strata += plain;
            out.sizes.extend(std::iter::repeat(2).take(plain));
        }
    }
    out.alpha -= out.m_prime;
    out
}

fn c9_bookkeeping() -> Outcome {
    let mut lines = Vec::new();
    for name in fixture_names() {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
        let spec: DomainSpec = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let d = ConicalDomain::from_spec(spec.clone()).map_err(|e| e.to_string())?;
        let b = brute_force(&spec, &d);
        let g = domain_groupoid(&d).map_err(|e| e.to_string())?;
        let u = unfold(&d);
        let ram: BTreeMap<String, usize> =
            d.vertices.iter().filter(|v| v.is_conical()).map(|v| (v.id.clone(), v.ramification)).collect();
        let mut sizes: Vec<usize> = g.strata.iter().map(|s| s.size()).collect();
        let mut bsizes = b.sizes.clone();
        sizes.sort();
        bsizes.sort();
        let reps = orbit_representatives(&g).len();
        let ram_total: usize = ram.values().sum();
        let same = g.strata.len() == b.strata
            && sizes == bsizes
            && ram == b.ramification
            && reps == b.strata + 1
            && ram_total == b.ramification.values().sum::<usize>()
            && (u.alpha, u.m_prime) == (b.alpha, b.m_prime);
        if !same {
            return Err(format!(
                "{name}: strata {} vs {}, sizes {sizes:?} vs {bsizes:?}, k {ram:?} vs {:?}, reps {reps}, (α, m′) ({}, {}) vs ({}, {})",
                g.strata.len(),
                b.strata,
                b.ramification,
                u.alpha,
                u.m_prime,
                b.alpha,
                b.m_prime
            ));
        }
        lines.push(format!("{name} {}/{reps}/{ram_total}", g.strata.len()));
    }
    Ok(format!("strata/orbits/Σk per fixture: {}", lines.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 θ₀ arithmetic", c1_theta0),
        ("2 Mellin transform of the wedge kernel", c2_mellin),
        ("3 diagonalization on a log grid", c3_diagonalization),
        ("4 window containment", c4_windows),
        ("5 verdict vs singular value study", c5_consistency),
        ("6 cracks are not Fredholm", c6_cracks),
        ("7 circle identities", c7_circle),
        ("8 Dirichlet harness", c8_dirichlet),
        ("9 groupoid bookkeeping", c9_bookkeeping),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
