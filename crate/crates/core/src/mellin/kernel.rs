use super::MellinError;
use crate::geometry::{dot, Point};
use crate::quad;
use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Largest |log t| ever sampled; beyond this `exp` leaves the f64 range.
const MAX_LOG: f64 = 700.0;

/// A one-variable kernel on ℝ⁺ acting by multiplicative convolution against dt/t:
/// an integrable density plus point masses `(t₀, w)`.
#[derive(Clone)]
pub struct MellinKernel {
    density: Option<DensityFn>,
    pub atoms: Vec<(f64, f64)>,
    /// `κ(t) = O(t^decay.0)` as t → 0 and `O(t^-decay.1)` as t → ∞.
    pub decay: (f64, f64),
    /// Identical non-empty labels denote identical kernels.
    pub label: String,
}

impl fmt::Debug for MellinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MellinKernel")
            .field("label", &self.label)
            .field("density", &self.density.is_some())
            .field("atoms", &self.atoms)
            .field("decay", &self.decay)
            .finish()
    }
}

impl MellinKernel {
    pub fn zero() -> Self {
        MellinKernel { density: None, atoms: Vec::new(), decay: (f64::INFINITY, f64::INFINITY), label: "0".into() }
    }

    pub fn from_fn<F>(f: F, decay: (f64, f64), label: impl Into<String>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        MellinKernel { density: Some(Arc::new(f)), atoms: Vec::new(), decay, label: label.into() }
    }

    pub fn atom(t0: f64, weight: f64) -> Self {
        MellinKernel {
            density: None,
            atoms: vec![(t0, weight)],
            decay: (f64::INFINITY, f64::INFINITY),
            label: format!("atom({t0:e},{weight:e})"),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_none() && self.atoms.iter().all(|a| a.1 == 0.0)
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// Density value (atoms excluded).
    pub fn eval(&self, t: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |f| f(t))
    }

    /// Open interval of Im λ on which the transform converges absolutely.
    pub fn strip(&self) -> (f64, f64) {
        (-self.decay.0, self.decay.1)
    }

    pub fn add(&self, other: &MellinKernel) -> MellinKernel {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let density: Option<DensityFn> = match (&self.density, &other.density) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |t| f(t) + g(t)))
            }
            (Some(f), None) | (None, Some(f)) => Some(f.clone()),
            (None, None) => None,
        };
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        MellinKernel {
            density,
            atoms,
            decay: (self.decay.0.min(other.decay.0), self.decay.1.min(other.decay.1)),
            label: format!("({}+{})", self.label, other.label),
        }
    }

    pub fn scale(&self, s: f64) -> MellinKernel {
        if s == 0.0 {
            return MellinKernel::zero();
        }
        MellinKernel {
            density: self.density.as_ref().map(|f| {
                let f = f.clone();
                Arc::new(move |t| s * f(t)) as DensityFn
            }),
            atoms: self.atoms.iter().map(|&(t, w)| (t, s * w)).collect(),
            decay: self.decay,
            label: format!("{s:e}*{}", self.label),
        }
    }

    /// Multiplicative convolution `(κ ⋆ μ)(t) = ∫ κ(t/s) μ(s) ds/s`.
    pub fn convolve(&self, other: &MellinKernel) -> MellinKernel {
        let mut out = MellinKernel::zero();
        if let (Some(f), Some(g)) = (&self.density, &other.density) {
            let (f, g) = (f.clone(), g.clone());
            let span = 60.0;
            let h = move |t: f64| {
                let lt = t.ln();
                let r = quad::integrate(
                    |v| Complex64::new(f((lt - v).exp()) * g(v.exp()), 0.0),
                    -span,
                    span,
                    16,
                    1e-14,
                    4000,
                );
                r.value.re
            };
            let decay = (self.decay.0.min(other.decay.0), self.decay.1.min(other.decay.1));
            out = out.add(&MellinKernel::from_fn(h, decay, format!("{}*{}", self.label, other.label)));
        }
        for &(t0, w) in &self.atoms {
            if let Some(g) = &other.density {
                let g = g.clone();
                out = out.add(&MellinKernel::from_fn(move |t| w * g(t / t0), other.decay, ""));
            }
        }
        for &(t1, w) in &other.atoms {
            if let Some(f) = &self.density {
                let f = f.clone();
                out = out.add(&MellinKernel::from_fn(move |t| w * f(t / t1), self.decay, ""));
            }
        }
        for &(t0, w0) in &self.atoms {
            for &(t1, w1) in &other.atoms {
                out = out.add(&MellinKernel::atom(t0 * t1, w0 * w1));
            }
        }
        out
    }

    fn check_strip(&self, eta: f64) -> Result<(), MellinError> {
        let (lo, hi) = self.strip();
        if self.density.is_some() && !(eta > lo && eta < hi) {
            return Err(MellinError::OutsideStrip { eta, lower: lo, upper: hi });
        }
        Ok(())
    }

    /// Truncation points of the log-variable integral for line offset `eta`,
    /// with a flag per side telling whether the remaining tail should be
    /// added as a pure power `t^{∓decay}`.
    fn truncation(&self, eta: f64, tol: f64) -> Result<([f64; 2], [bool; 2]), MellinError> {
        let f = self.density.as_ref().expect("density");
        let mut ends = [0.0; 2];
        let mut extrapolate = [false; 2];
        for (side, sgn) in [(0usize, -1.0f64), (1, 1.0)] {
            let decay = if side == 0 { self.decay.0 } else { self.decay.1 };
            let rate = if side == 0 { decay + eta } else { decay - eta };
            let rate_c = rate.min(1.0);
            // amplitude relative to the leading power
            let amp = |u: f64| f((sgn * u).exp()) * (decay * u).exp();
            let mut u = 0.0;
            let mut quiet = 0;
            let mut quiet_x = 0;
            loop {
                u += 1.0;
                if u > MAX_LOG {
                    return Err(MellinError::NonConvergent { eta });
                }
                let x = sgn * u;
                let g = (f(x.exp()) * (eta * x).exp()).abs();
                quiet = if g / rate_c < 1e-3 * tol { quiet + 1 } else { 0 };
                if quiet >= 3 {
                    break;
                }
                if decay.is_finite() {
                    let dh = (amp(u + 1.0) - amp(u)).abs();
                    let rem = 2.0 * dh * (-rate * u).exp() / rate;
                    quiet_x = if rem < 1e-3 * tol { quiet_x + 1 } else { 0 };
                    if quiet_x >= 3 {
                        extrapolate[side] = true;
                        break;
                    }
                }
            }
            ends[side] = sgn * u;
        }
        Ok((ends, extrapolate))
    }

    /// `∫₀^∞ κ(t) t^{-iλ} dt/t` by adaptive Gauss-Kronrod in `u = log t`,
    /// split at t = 1, with absolute tolerance `tol`.
    pub fn transform(&self, lambda: Complex64, tol: f64) -> Result<Complex64, MellinError> {
        let mut total = Complex64::new(0.0, 0.0);
        for &(t0, w) in &self.atoms {
            total += w * (Complex64::new(0.0, -1.0) * lambda * t0.ln()).exp();
        }
        let Some(f) = &self.density else { return Ok(total) };
        let (xi, eta) = (lambda.re, lambda.im);
        self.check_strip(eta)?;
        let ([ul, ur], [xl, xr]) = self.truncation(eta, tol)?;
        let g = |u: f64| {
            let v = f(u.exp()) * (eta * u).exp();
            Complex64::from_polar(v, -xi * u)
        };
        let width = (4.0 / xi.abs().max(1e-9)).min(2.0);
        for (a, b) in [(ul, 0.0), (0.0, ur)] {
            let initial = ((b - a) / width).ceil() as usize;
            let r = quad::integrate(g, a, b, initial, 0.25 * tol, 200_000);
            if !r.converged {
                return Err(MellinError::Quadrature { lambda: (xi, eta), error: r.error });
            }
            total += r.value;
        }
        if xl {
            total += g(ul) / Complex64::new(self.decay.0 + eta, -xi);
        }
        if xr {
            total += g(ur) / Complex64::new(self.decay.1 - eta, xi);
        }
        Ok(total)
    }

    /// Constant `C` with `|K̂(ξ + iη) − atoms| ≤ C / (1 + |ξ|)` for |ξ| ≥ 1,
    /// from the sampled total variation of the log-variable integrand
    /// (times the conservative factor 2), plus the atom masses.
    pub fn tail_majorant(&self, eta: f64) -> Result<(f64, f64), MellinError> {
        let atoms: f64 = self.atoms.iter().map(|a| a.1.abs()).sum();
        let Some(f) = &self.density else { return Ok((0.0, atoms)) };
        self.check_strip(eta)?;
        let ([ul, ur], _) = self.truncation(eta, 1e-12)?;
        let n = 20_000;
        let h = (ur - ul) / n as f64;
        let mut tv = 0.0;
        let mut prev = 0.0;
        for i in 0..=n {
            let u = ul + h * i as f64;
            let v = f(u.exp()) * (eta * u).exp();
            if i > 0 {
                tv += (v - prev).abs();
            }
            prev = v;
        }
        // endpoint jumps to zero outside the truncation
        let first = f(ul.exp()) * (eta * ul).exp();
        tv += first.abs() + prev.abs();
        Ok((2.0 * tv, atoms))
    }
}

/// Matrix of Mellin kernels attached to a vertex stratum.
#[derive(Debug, Clone)]
pub struct MellinOperator {
    pub vertex: String,
    pub entries: Vec<Vec<MellinKernel>>,
    /// Set for the flat wedge, whose kernel vanishes identically.
    pub removable: bool,
}

impl MellinOperator {
    pub fn zero(vertex: impl Into<String>, k: usize) -> Self {
        MellinOperator { vertex: vertex.into(), entries: vec![vec![MellinKernel::zero(); k]; k], removable: false }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.is_zero())
    }

    pub fn strip(&self) -> (f64, f64) {
        self.entries.iter().flatten().filter(|e| e.has_density()).fold(
            (f64::NEG_INFINITY, f64::INFINITY),
            |(lo, hi), e| {
                let (a, b) = e.strip();
                (lo.max(a), hi.min(b))
            },
        )
    }

    /// Fingerprint for deduplicating identical operators.
    pub fn fingerprint(&self) -> String {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.label.as_str()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn add(&self, other: &MellinOperator) -> MellinOperator {
        assert_eq!(self.size(), other.size());
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a.add(b)).collect())
            .collect();
        MellinOperator { vertex: self.vertex.clone(), entries, removable: false }
    }

    pub fn scale(&self, s: f64) -> MellinOperator {
        let entries = self.entries.iter().map(|r| r.iter().map(|a| a.scale(s)).collect()).collect();
        MellinOperator { vertex: self.vertex.clone(), entries, removable: self.removable }
    }

    /// Operator product: entries combine by multiplicative convolution.
    pub fn compose(&self, other: &MellinOperator) -> MellinOperator {
        let k = self.size();
        assert_eq!(k, other.size());
        let mut entries = vec![vec![MellinKernel::zero(); k]; k];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                for l in 0..k {
                    let a = &self.entries[i][l];
                    let b = &other.entries[l][j];
                    if !a.is_zero() && !b.is_zero() {
                        *e = e.add(&a.convolve(b));
                    }
                }
            }
        }
        MellinOperator { vertex: self.vertex.clone(), entries, removable: false }
    }

    /// Discrete multiplicative convolution on a log-uniform grid with spacing
    /// `h` in `log t`, trapezoidal in `log t`. `f[j]` holds the k-vector at t_j.
    pub fn apply_log_grid(&self, h: f64, f: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let n = f.len();
        let k = self.size();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); k]; n];
        // kernel values depend only on i - j
        for a in 0..k {
            for b in 0..k {
                let e = &self.entries[a][b];
                if !e.has_density() {
                    continue;
                }
                let tab: Vec<f64> = (0..2 * n - 1).map(|d| e.eval(((d as f64 - (n as f64 - 1.0)) * h).exp())).collect();
                for (i, oi) in out.iter_mut().enumerate() {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (j, fj) in f.iter().enumerate() {
                        s += tab[i + n - 1 - j] * fj[b];
                    }
                    oi[a] += s * h;
                }
            }
        }
        out
    }
}

/// `K̂(λ)` for every entry, sharing work between identically labelled entries.
pub fn mellin_transform(op: &MellinOperator, lambda: Complex64) -> Result<Array2<Complex64>, MellinError> {
    transform_with_tol(op, lambda, 1e-10)
}

pub(crate) fn transform_with_tol(
    op: &MellinOperator,
    lambda: Complex64,
    tol: f64,
) -> Result<Array2<Complex64>, MellinError> {
    let k = op.size();
    let mut m = Array2::zeros((k, k));
    let mut seen: Vec<(&str, Complex64)> = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let e = &op.entries[i][j];
            if e.is_zero() {
                continue;
            }
            if let Some(v) = (!e.label.is_empty()).then(|| seen.iter().find(|s| s.0 == e.label)).flatten() {
                m[[i, j]] = v.1;
                continue;
            }
            let v = e.transform(lambda, tol)?;
            if !e.label.is_empty() {
                seen.push((&e.label, v));
            }
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

/// Kernel of the double layer operator between two rays leaving a vertex,
/// measured against dt/t with `t = r/s`: x = r·d_a, y = s·d_b, outer normal ν_b.
///
/// Coincident directions (two sides of a crack at its tip) give a point mass
/// of weight `(π − width)/π` at t = 1, the limit of the density as the
/// opening tends to `width`.
pub fn ray_kernel(d_a: Point, d_b: Point, nu_b: Point, width: f64) -> MellinKernel {
    let dn = dot(d_a, nu_b);
    let c = dot(d_a, d_b).clamp(-1.0, 1.0);
    let cross = d_a[0] * d_b[1] - d_a[1] * d_b[0];
    if cross.abs() < 1e-14 && c > 0.0 {
        return MellinKernel::atom(1.0, (PI - width) / PI);
    }
    if dn.abs() < 1e-15 {
        return MellinKernel::zero();
    }
    let label = format!("ray({:.12e},{:.12e})", dn, c);
    MellinKernel::from_fn(move |t| -dn * t / (PI * (t * t - 2.0 * t * c + 1.0)), (1.0, 1.0), label)
}

/// 2×2 double layer operator of the infinite wedge with opening `theta`.
///
/// Edge 1 runs along (1, 0) with outer normal (0, −1); edge 2 along
/// (cos θ, sin θ) with outer normal (−sin θ, cos θ).
pub fn wedge_np_kernel(theta: f64) -> Result<MellinOperator, MellinError> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(MellinError::AngleOutOfRange(theta));
    }
    let d1 = [1.0, 0.0];
    let n1 = [0.0, -1.0];
    let d2 = [theta.cos(), theta.sin()];
    let n2 = [-theta.sin(), theta.cos()];
    if (theta - PI).abs() < crate::geometry::FLAT_TOL {
        let mut op = MellinOperator::zero("wedge", 2);
        op.removable = true;
        return Ok(op);
    }
    let entries = vec![
        vec![MellinKernel::zero(), ray_kernel(d1, d2, n2, theta)],
        vec![ray_kernel(d2, d1, n1, theta), MellinKernel::zero()],
    ];
    Ok(MellinOperator { vertex: "wedge".into(), entries, removable: false })
}
