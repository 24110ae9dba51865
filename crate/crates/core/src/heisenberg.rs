//! Left translates on the Heisenberg group `ℍ¹`, the partial Fourier transform in
//! `t`, the bracket `G^φ_{k,l}`, condition C, canonical duals and Gram sections.
//!
//! Functions are finite sums of separable terms `c·(f⊗g⊗h)(a⁻¹X)`. The group law
//! acts on the metadata only, so three-dimensional samples are never required.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::GramSection;
use crate::grid::{cis, AxisGrid, AxisRole, Factor1D, GridSpec, SampledFunction, SeparableTerm, ZERO};
use crate::spectral::Integrability;
use crate::twisted::DEFAULT_WINDOW_CAP;
use crate::weyl::{
    hs_inner_sources, verify_scaling_plancherel, weyl_kernel, wide_xi_grid, KernelMatrix, KernelRoute,
    KernelSource, PlancherelCertificate,
};

/// Samples on the λ-grid of `(0, 1]`.
pub const LAMBDA_SAMPLES: usize = 64;
/// Default r-truncation of the bracket sum.
pub const DEFAULT_R: u32 = 8;
pub const CONDITION_C_THRESHOLD: f64 = 1e-8;
pub const PLANCHEREL_LAMBDAS: [f64; 3] = [0.25, 0.5, 1.0];
pub const PLANCHEREL_TOL: f64 = 1e-4;
/// λ-grid sizes for the `1/G₀₀` integrability probe.
pub const PROBE_SIZES: [usize; 4] = [64, 256, 1024, 4096];
/// Largest `|n|` kept in the dual's central expansion.
pub const DUAL_ORDER: i64 = 31;

const SAMPLE_CAP: usize = 1 << 24;
const TAIL_FIBERS: u32 = 64;
const DIRECT_TOL: f64 = 1e-4;
const DIRECT_SKIP: f64 = 1e-12;

/// Point `(x, y, t)` of `ℍ¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { x: 0.0, y: 0.0, t: 0.0 };

    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    /// `(x,y,t)(x′,y′,t′) = (x+x′, y+y′, t+t′+½(x′y − y′x))`.
    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement {
            x: self.x + o.x,
            y: self.y + o.y,
            t: self.t + o.t + 0.5 * (o.x * self.y - o.y * self.x),
        }
    }

    pub fn inv(&self) -> GroupElement {
        GroupElement {
            x: -self.x,
            y: -self.y,
            t: -self.t,
        }
    }
}

/// Lattice point acting as the group element `(2k, l, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HLatticeIndex {
    pub k: i64,
    pub l: i64,
    pub m: i64,
}

impl HLatticeIndex {
    pub const ZERO: HLatticeIndex = HLatticeIndex { k: 0, l: 0, m: 0 };

    pub fn new(k: i64, l: i64, m: i64) -> Self {
        Self { k, l, m }
    }

    pub fn element(&self) -> GroupElement {
        GroupElement::new(2.0 * self.k as f64, self.l as f64, self.m as f64)
    }

    /// Group product inside the lattice.
    pub fn mul(&self, o: &HLatticeIndex) -> HLatticeIndex {
        HLatticeIndex {
            k: self.k + o.k,
            l: self.l + o.l,
            m: self.m + o.m + o.k * self.l - o.l * self.k,
        }
    }

    pub fn inv(&self) -> HLatticeIndex {
        HLatticeIndex {
            k: -self.k,
            l: -self.l,
            m: -self.m,
        }
    }

    /// All indices with `|k|, |l|, |m| ≤ r`, in lexicographic order.
    pub fn window(r: i64) -> Vec<HLatticeIndex> {
        Self::window3(r, r, r)
    }

    pub fn window3(k_max: i64, l_max: i64, m_max: i64) -> Vec<HLatticeIndex> {
        let mut v = Vec::new();
        for k in -k_max..=k_max {
            for l in -l_max..=l_max {
                for m in -m_max..=m_max {
                    v.push(HLatticeIndex { k, l, m });
                }
            }
        }
        v
    }
}

/// `coeff · (f⊗g⊗h)(at⁻¹·X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTerm {
    pub coeff: Complex64,
    pub f: Factor1D,
    pub g: Factor1D,
    pub h: Factor1D,
    pub at: GroupElement,
}

impl HTerm {
    pub fn new(f: Factor1D, g: Factor1D, h: Factor1D) -> Self {
        Self {
            coeff: Complex64::new(1.0, 0.0),
            f,
            g,
            h,
            at: GroupElement::IDENTITY,
        }
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let u = self.at.inv().mul(&GroupElement::new(x, y, t));
        self.coeff * self.f.eval(u.x) * self.g.eval(u.y) * self.h.eval(u.t)
    }

    /// x-factor in the variable `x` (the translate's x-shift applied).
    fn fx(&self) -> Factor1D {
        self.f.shifted(self.at.x)
    }

    fn gy(&self) -> Factor1D {
        self.g.shifted(self.at.y)
    }
}

/// A function on `ℍ¹` given by separable terms, with the `(x, y, t)` grid used for
/// quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct HFunction {
    spec: GridSpec,
    terms: Vec<HTerm>,
}

/// `[-8, 8)² × [-4, 4)` at 32, 32 and 16 samples per unit, midpoint placement.
pub fn default_group_spec() -> GridSpec {
    let pp = GridSpec::default_phase_plane();
    GridSpec::group(*pp.axis(0), *pp.axis(1), GridSpec::default_t_axis())
}

impl HFunction {
    pub fn new(spec: GridSpec, terms: Vec<HTerm>) -> Result<Self> {
        if spec.role() != AxisRole::Group || spec.dim() != 3 {
            return Err(Error::InvalidGrid("Heisenberg functions need an (x, y, t) group grid".into()));
        }
        Ok(Self { spec, terms })
    }

    pub fn separable(spec: GridSpec, f: Factor1D, g: Factor1D, h: Factor1D) -> Result<Self> {
        Self::new(spec, vec![HTerm::new(f, g, h)])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn terms(&self) -> &[HTerm] {
        &self.terms
    }

    pub fn phase_plane_spec(&self) -> GridSpec {
        GridSpec::phase_plane(*self.spec.axis(0), *self.spec.axis(1))
    }

    pub fn t_axis(&self) -> &AxisGrid {
        self.spec.axis(2)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> Complex64 {
        self.terms.iter().map(|k| k.eval(x, y, t)).sum()
    }

    /// Row-major `(x, y, t)` samples. Refused for grids above 2²⁴ points.
    pub fn samples(&self) -> Result<Vec<Complex64>> {
        let n = self.spec.len();
        if n > SAMPLE_CAP {
            return Err(Error::WindowTooLarge {
                requested: n,
                cap: SAMPLE_CAP,
            });
        }
        let (xa, ya, ta) = (self.spec.axis(0), self.spec.axis(1), self.spec.axis(2));
        let plane = ya.len() * ta.len();
        let mut out = vec![ZERO; n];
        out.par_chunks_mut(plane).enumerate().for_each(|(i, chunk)| {
            let x = xa.point(i);
            for j in 0..ya.len() {
                for s in 0..ta.len() {
                    chunk[j * ta.len() + s] = self.eval(x, ya.point(j), ta.point(s));
                }
            }
        });
        Ok(out)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| HTerm {
                coeff: t.coeff * c,
                ..t.clone()
            })
            .collect();
        Self {
            spec: self.spec.clone(),
            terms,
        }
    }

    pub fn add(&self, other: &HFunction) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            spec: self.spec.clone(),
            terms,
        })
    }

    /// `‖φ‖²` with closed-form `t`-autocorrelations where available.
    pub fn norm_sq(&self) -> f64 {
        h_inner_pairs(self, self, TCorrelation::Analytic).re
    }
}

/// The six worked examples. `h` overrides the `t`-factor.
pub fn example_factory(id: u32, h: Option<Factor1D>, spec: &GridSpec) -> Result<HFunction> {
    let chi = Factor1D::indicator;
    let (f, g, h0) = match id {
        1 | 2 => (chi(0.0, 2.0), chi(0.0, 1.0), Factor1D::gaussian(1.0)),
        3 => (chi(0.0, 2.0), chi(0.0, 1.0), Factor1D::AbsExp),
        4 => (Factor1D::bump(0.0, 2.0), Factor1D::bump(0.0, 1.0), Factor1D::gaussian(1.0)),
        5 => (chi(0.0, 3.0), chi(0.0, 1.0), Factor1D::Sinc),
        6 => {
            if spec.dim() < 2 {
                return Err(Error::InvalidGrid("group grid expected".into()));
            }
            (
                Factor1D::AbsExp,
                Factor1D::step_decay_for_box(spec.axis(1).half_width()),
                Factor1D::Sinc,
            )
        }
        _ => return Err(Error::UnknownExample(id)),
    };
    HFunction::separable(spec.clone(), f, g, h.unwrap_or(h0))
}

fn inside(support: Option<(f64, f64)>, axis: &AxisGrid) -> bool {
    match support {
        Some((a, b)) => a >= -axis.half_width() - 1e-12 && b <= axis.half_width() + 1e-12,
        None => true,
    }
}

/// `φ ↦ φ(g⁻¹·X)` for an arbitrary group element.
pub fn translate_by(phi: &HFunction, g: GroupElement) -> HFunction {
    let terms: Vec<HTerm> = phi
        .terms
        .iter()
        .map(|t| HTerm {
            at: g.mul(&t.at),
            ..t.clone()
        })
        .collect();
    for t in &terms {
        if !inside(t.fx().support(), phi.spec.axis(0)) || !inside(t.gy().support(), phi.spec.axis(1)) {
            log::warn!("left translate by ({}, {}, {}) leaves the (x, y) box", g.x, g.y, g.t);
            break;
        }
    }
    HFunction {
        spec: phi.spec.clone(),
        terms,
    }
}

/// `L_{(2k,l,m)}φ(x,y,t) = φ(x−2k, y−l, t−m+ky−(l/2)x)`.
pub fn left_translate(phi: &HFunction, idx: HLatticeIndex) -> HFunction {
    translate_by(phi, idx.element())
}

/// Phase-plane terms of `φ^λ`, merging terms with identical `(x, y)` factors.
fn fiber_terms(phi: &HFunction, lambda: f64) -> Vec<SeparableTerm> {
    let mut out: Vec<SeparableTerm> = Vec::new();
    for t in &phi.terms {
        let c = t.coeff * t.h.fourier(-lambda) * cis(2.0 * PI * lambda * t.at.t);
        if c == ZERO {
            continue;
        }
        let fx = t.fx().modulated(lambda * t.at.y / 2.0);
        let gy = t.gy().modulated(-lambda * t.at.x / 2.0);
        match out.iter_mut().find(|s| s.factors[0] == fx && s.factors[1] == gy) {
            Some(s) => s.coeff += c,
            None => out.push(SeparableTerm::new(c, vec![fx, gy])),
        }
    }
    out
}

/// `φ^λ(x,y) = ∫ φ(x,y,t) e^{2πiλt} dt`, through the closed-form transform of
/// each `h`-factor.
pub fn partial_ft(phi: &HFunction, lambda: f64) -> Result<SampledFunction> {
    let ta = phi.t_axis();
    for t in &phi.terms {
        let tail = t.h.tail_mass(ta.half_width());
        if tail > 1e-6 {
            log::warn!(
                "partial_ft: h-factor has t-tail {tail:.2e} outside [-{0}, {0}); analytic transform used",
                ta.half_width()
            );
        }
    }
    SampledFunction::from_terms(phi.phase_plane_spec(), fiber_terms(phi, lambda))
}

/// `f̂(λ) = W_λ(f^λ)` as a kernel on the full-period ξ-grid.
pub fn group_fourier_kernel(phi: &HFunction, lambda: f64) -> Result<KernelMatrix> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    weyl_kernel(&partial_ft(phi, lambda)?, lambda)
}

/// The scaling-Plancherel certificate required by the reduced bracket route.
pub fn plancherel_prerequisite(spec: &GridSpec) -> Result<PlancherelCertificate> {
    let pp = match spec.role() {
        AxisRole::Group => GridSpec::phase_plane(*spec.axis(0), *spec.axis(1)),
        _ => spec.clone(),
    };
    verify_scaling_plancherel(&pp, &PLANCHEREL_LAMBDAS, PLANCHEREL_TOL)
}

fn supports_overlap(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> bool {
    match (a, b) {
        (Some((a0, a1)), Some((b0, b1))) => a0 < b1 && b0 < a1,
        _ => true,
    }
}

/// Nonzero `(point, f1·conj f2)` products on `axis`.
fn products(f1: &Factor1D, f2: &Factor1D, axis: &AxisGrid) -> Vec<(f64, Complex64)> {
    if !supports_overlap(f1.support(), f2.support()) {
        return Vec::new();
    }
    (0..axis.len())
        .filter_map(|i| {
            let x = axis.point(i);
            let v = f1.eval(x) * f2.eval(x).conj();
            (v != ZERO).then_some((x, v))
        })
        .collect()
}

fn factor_dot(f1: &Factor1D, f2: &Factor1D, axis: &AxisGrid) -> Complex64 {
    products(f1, f2, axis).iter().map(|p| p.1).sum::<Complex64>() * axis.spacing()
}

/// Phase-plane inner product of two fibers, axis by axis.
fn fiber_inner(a: &[SeparableTerm], b: &[SeparableTerm], xa: &AxisGrid, ya: &AxisGrid) -> Complex64 {
    let mut acc = ZERO;
    for s in a {
        for t in b {
            let c = s.coeff * t.coeff.conj();
            if c == ZERO {
                continue;
            }
            let dx = factor_dot(&s.factors[0], &t.factors[0], xa);
            if dx == ZERO {
                continue;
            }
            acc += c * dx * factor_dot(&s.factors[1], &t.factors[1], ya);
        }
    }
    acc
}

/// How the `t`-autocorrelation `A(s) = ∫ h₁(u) conj h₂(u − s) du` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TCorrelation {
    /// Closed form where known, `t`-grid quadrature otherwise.
    Analytic,
    /// Always quadrature on the `t`-grid.
    Grid,
}

fn term_pair_inner(t1: &HTerm, t2: &HTerm, spec: &GridSpec, mode: TCorrelation) -> Complex64 {
    let c = t1.coeff * t2.coeff.conj();
    if c == ZERO {
        return ZERO;
    }
    let (f1, f2, g1, g2) = (t1.fx(), t2.fx(), t1.gy(), t2.gy());
    if !supports_overlap(f1.support(), f2.support()) || !supports_overlap(g1.support(), g2.support()) {
        return ZERO;
    }
    let (xa, ya, ta) = (spec.axis(0), spec.axis(1), spec.axis(2));
    let px = products(&f1, &f2, xa);
    if px.is_empty() {
        return ZERO;
    }
    let py = products(&g1, &g2, ya);
    if py.is_empty() {
        return ZERO;
    }
    let closed = mode == TCorrelation::Analytic && t1.h.correlation(&t2.h, 0.0).is_some();
    let corr = |s: f64| -> Complex64 {
        if closed {
            t1.h.correlation(&t2.h, s).expect("closed form checked")
        } else {
            t1.h.correlation_on(&t2.h, s, ta)
        }
    };
    let dt = t2.at.t - t1.at.t;
    let dx = t1.at.x - t2.at.x;
    let dy = t1.at.y - t2.at.y;
    let sx: Complex64 = px.iter().map(|p| p.1).sum();
    let sy: Complex64 = py.iter().map(|p| p.1).sum();
    let v = if dx == 0.0 && dy == 0.0 {
        corr(dt) * sx * sy
    } else if dy == 0.0 {
        sx * py.iter().map(|&(y, v)| v * corr(dt + 0.5 * dx * y)).sum::<Complex64>()
    } else if dx == 0.0 {
        sy * px.iter().map(|&(x, v)| v * corr(dt - 0.5 * dy * x)).sum::<Complex64>()
    } else {
        let rows: Vec<Complex64> = px
            .par_iter()
            .map(|&(x, vx)| {
                vx * py
                    .iter()
                    .map(|&(y, vy)| vy * corr(dt + 0.5 * (dx * y - dy * x)))
                    .sum::<Complex64>()
            })
            .collect();
        rows.into_iter().sum()
    };
    c * v * (xa.spacing() * ya.spacing())
}

fn h_inner_pairs(a: &HFunction, b: &HFunction, mode: TCorrelation) -> Complex64 {
    let pairs: Vec<(usize, usize)> = (0..a.terms.len())
        .flat_map(|i| (0..b.terms.len()).map(move |j| (i, j)))
        .collect();
    let parts: Vec<Complex64> = pairs
        .par_iter()
        .map(|&(i, j)| term_pair_inner(&a.terms[i], &b.terms[j], &a.spec, mode))
        .collect();
    parts.into_iter().sum()
}

/// `⟨a, b⟩ = ∫ a·conj(b)` over `ℍ¹`: midpoint quadrature in `(x, y)` and the
/// closed-form `t`-autocorrelation of the `h`-factors.
pub fn h_inner(a: &HFunction, b: &HFunction) -> Result<Complex64> {
    h_inner_with(a, b, TCorrelation::Analytic)
}

pub fn h_inner_with(a: &HFunction, b: &HFunction, mode: TCorrelation) -> Result<Complex64> {
    if a.spec != b.spec {
        return Err(Error::SpecMismatch);
    }
    Ok(h_inner_pairs(a, b, mode))
}

/// `‖φ‖²` by quadrature on all three axes. `h`-factors whose tail leaves the
/// `t`-box (sinc) use the closed-form autocorrelation instead.
pub fn norm_sq_quadrature(phi: &HFunction) -> f64 {
    let ta = phi.t_axis();
    let heavy = phi.terms.iter().any(|t| t.h.tail_mass(ta.half_width()) > 1e-8);
    let mode = if heavy { TCorrelation::Analytic } else { TCorrelation::Grid };
    h_inner_pairs(phi, phi, mode).re
}

/// Uniform midpoint grid `(j + ½)/n`, `j < n`.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GRoute {
    /// Fiberwise phase-plane inner products of `φ^{λ+r}`.
    Reduced,
    /// HS pairings of the Weyl kernels, weighted by `|λ+r|`.
    KernelDirect,
}

/// Samples of `G^φ_{k,l}` on a λ-grid.
#[derive(Debug, Clone, Serialize)]
pub struct GSamples {
    k: i64,
    l: i64,
    lambdas: Vec<f64>,
    values: Vec<Complex64>,
    r_radius: u32,
    tail_bound: f64,
    route: GRoute,
}

impl GSamples {
    pub fn kl(&self) -> (i64, i64) {
        (self.k, self.l)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn r_radius(&self) -> u32 {
        self.r_radius
    }

    /// Largest Cauchy–Schwarz bound on the omitted fibers over the grid.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn route(&self) -> GRoute {
        self.route
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_re(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫₀¹ G e^{−2πimλ} dλ` by the rectangle rule on the stored grid.
    pub fn fourier_coeff(&self, m: i64) -> Complex64 {
        let n = self.values.len().max(1) as f64;
        self.lambdas
            .iter()
            .zip(&self.values)
            .map(|(&lam, v)| v * cis(-2.0 * PI * m as f64 * lam))
            .sum::<Complex64>()
            / n
    }

    pub fn mean(&self) -> Complex64 {
        self.fourier_coeff(0)
    }

    /// CSV rows `lambda,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(w, "lambda,re,im").map_err(io)?;
        for (lam, v) in self.lambdas.iter().zip(&self.values) {
            writeln!(w, "{lam:e},{:e},{:e}", v.re, v.im).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "k": self.k,
            "l": self.l,
            "samples": self.lambdas.len(),
            "r_radius": self.r_radius,
            "tail_bound": self.tail_bound,
            "route": self.route,
        }))?)
    }
}

/// `Σ_t |c_t|·|ĥ_t(−μ)|·‖f_t‖‖g_t‖`, bounding the fiber norm `‖φ^μ‖`.
struct FiberBound {
    terms: Vec<(f64, Factor1D)>,
}

impl FiberBound {
    fn new(phi: &HFunction) -> Self {
        let (xa, ya) = (phi.spec.axis(0), phi.spec.axis(1));
        let terms = phi
            .terms
            .iter()
            .map(|t| {
                let nf = factor_dot(&t.fx(), &t.fx(), xa).re;
                let ng = factor_dot(&t.gy(), &t.gy(), ya).re;
                (t.coeff.norm() * (nf * ng).sqrt(), t.h.clone())
            })
            .collect();
        Self { terms }
    }

    fn at(&self, mu: f64) -> f64 {
        self.terms.iter().map(|(n, h)| n * h.fourier(-mu).norm()).sum()
    }
}

/// `G^φ_{k,l}(λ) = Σ_{|r| ≤ R} ⟨φ̂(λ+r), (L_{(2k,l,0)}φ)^(λ+r)⟩_{𝓑₂}|λ+r|` on `lambdas`.
///
/// The reduced route needs a passed scaling-Plancherel certificate. The
/// kernel-direct route skips fibers whose bound is below `10⁻¹²` of the largest
/// one and adds them to the tail; it cannot represent a `λ + r = 0` fiber.
pub fn g_function(
    phi: &HFunction,
    kl: (i64, i64),
    lambdas: &[f64],
    r: u32,
    route: GRoute,
    cert: Option<&PlancherelCertificate>,
) -> Result<GSamples> {
    if lambdas.is_empty() {
        return Err(Error::EmptyInput("lambdas"));
    }
    if route == GRoute::Reduced {
        cert.ok_or_else(|| {
            Error::PrerequisiteUnverified("reduced G route needs a scaling-Plancherel certificate".into())
        })?
        .require()?;
    }
    let psi = left_translate(phi, HLatticeIndex::new(kl.0, kl.1, 0));
    let bp = FiberBound::new(phi);
    let bq = FiberBound::new(&psi);
    let (xa, ya) = (*phi.spec.axis(0), *phi.spec.axis(1));
    let ri = r as i64;
    let per_lambda: Vec<Result<(Complex64, f64)>> = lambdas
        .par_iter()
        .map(|&lam| {
            let mut tail = 0.0;
            for j in (ri + 1)..=(ri + TAIL_FIBERS as i64) {
                for mu in [lam + j as f64, lam - j as f64] {
                    tail += bp.at(mu) * bq.at(mu);
                }
            }
            let bounds: Vec<f64> = (-ri..=ri).map(|s| bp.at(lam + s as f64) * bq.at(lam + s as f64)).collect();
            let top = bounds.iter().cloned().fold(0.0, f64::max);
            let mut acc = ZERO;
            for (s, &b) in (-ri..=ri).zip(&bounds) {
                if b == 0.0 {
                    continue;
                }
                let mu = lam + s as f64;
                match route {
                    GRoute::Reduced => {
                        acc += fiber_inner(&fiber_terms(phi, mu), &fiber_terms(&psi, mu), &xa, &ya);
                    }
                    GRoute::KernelDirect => {
                        if b < DIRECT_SKIP * top {
                            tail += b;
                            continue;
                        }
                        if mu == 0.0 {
                            return Err(Error::ZeroLambda);
                        }
                        let fa = partial_ft(phi, mu)?;
                        let fb = partial_ft(&psi, mu)?;
                        let ga = wide_xi_grid(&fa, mu, DIRECT_TOL)?;
                        let gb = wide_xi_grid(&fb, mu, DIRECT_TOL)?;
                        let xi = if ga.len() >= gb.len() { ga } else { gb };
                        let ka = KernelSource::new(&fa, mu, KernelRoute::Separable)?;
                        let kb = KernelSource::new(&fb, mu, KernelRoute::Separable)?;
                        acc += hs_inner_sources(&ka, &kb, &xi)? * mu.abs();
                    }
                }
            }
            Ok((acc, tail))
        })
        .collect();
    let mut values = Vec::with_capacity(lambdas.len());
    let mut tail_bound: f64 = 0.0;
    for v in per_lambda {
        let (g, t) = v?;
        values.push(g);
        tail_bound = tail_bound.max(t);
    }
    Ok(GSamples {
        k: kl.0,
        l: kl.1,
        lambdas: lambdas.to_vec(),
        values,
        r_radius: r,
        tail_bound,
        route,
    })
}

/// Reduced-route `G^φ_{k,l}` on the default 64-point grid with `R = 8`.
pub fn g_function_default(phi: &HFunction, kl: (i64, i64), cert: &PlancherelCertificate) -> Result<GSamples> {
    g_function(phi, kl, &lambda_grid(LAMBDA_SAMPLES), DEFAULT_R, GRoute::Reduced, Some(cert))
}

/// `Ĝ^φ_{k,l}(m)` by both routes.
#[derive(Debug, Clone, Serialize)]
pub struct BracketCoefficient {
    pub index: HLatticeIndex,
    /// `∫₀¹ G^φ_{k,l}(λ) e^{−2πimλ} dλ`.
    pub via_g: Complex64,
    /// `⟨φ, L_{(2k,l,m)}φ⟩`.
    pub via_inner: Complex64,
    pub discrepancy: f64,
}

/// Both routes for `idx`, reusing precomputed `G^φ_{k,l}` samples.
pub fn bracket_coefficient(phi: &HFunction, idx: HLatticeIndex, g: &GSamples) -> Result<BracketCoefficient> {
    if g.kl() != (idx.k, idx.l) {
        return Err(Error::GridMisalignment(format!(
            "G samples are for (k,l) = {:?}, index has ({}, {})",
            g.kl(),
            idx.k,
            idx.l
        )));
    }
    let via_g = g.fourier_coeff(idx.m);
    let via_inner = h_inner(phi, &left_translate(phi, idx))?;
    Ok(BracketCoefficient {
        index: idx,
        via_g,
        via_inner,
        discrepancy: (via_g - via_inner).norm(),
    })
}

pub fn g_fourier_coeff(
    phi: &HFunction,
    kl: (i64, i64),
    m: i64,
    cert: &PlancherelCertificate,
) -> Result<BracketCoefficient> {
    let g = g_function_default(phi, kl, cert)?;
    bracket_coefficient(phi, HLatticeIndex::new(kl.0, kl.1, m), &g)
}

#[derive(Debug, Clone, Serialize)]
pub struct HConditionCEntry {
    pub index: HLatticeIndex,
    pub value: Complex64,
}

/// `⟨φ, L_{(2k,l,m)}φ⟩` over `(k,l) ≠ 0`, `|k| ≤ k_max`, `|l| ≤ l_max`, `|m| ≤ m_max`.
#[derive(Debug, Clone, Serialize)]
pub struct HConditionCReport {
    pub entries: Vec<HConditionCEntry>,
    pub threshold: f64,
}

impl HConditionCReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.value.norm()).fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> Option<HLatticeIndex> {
        self.entries
            .iter()
            .fold(None::<&HConditionCEntry>, |best, e| match best {
                Some(b) if b.value.norm() >= e.value.norm() => Some(b),
                _ => Some(e),
            })
            .map(|e| e.index)
    }

    pub fn value(&self, idx: HLatticeIndex) -> Option<Complex64> {
        self.entries.iter().find(|e| e.index == idx).map(|e| e.value)
    }

    pub fn satisfied(&self) -> bool {
        self.max_residual() <= self.threshold
    }
}

pub fn condition_c_residual_h(phi: &HFunction, k_max: u32, l_max: u32, m_max: u32) -> Result<HConditionCReport> {
    let idx: Vec<HLatticeIndex> = HLatticeIndex::window3(k_max as i64, l_max as i64, m_max as i64)
        .into_iter()
        .filter(|i| i.k != 0 || i.l != 0)
        .collect();
    let entries = idx
        .iter()
        .map(|&i| {
            Ok(HConditionCEntry {
                index: i,
                value: h_inner(phi, &left_translate(phi, i))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HConditionCReport {
        entries,
        threshold: CONDITION_C_THRESHOLD,
    })
}

/// Refinement study of `∫₀¹ 1/G₀₀` over [`PROBE_SIZES`].
#[derive(Debug, Clone, Serialize)]
pub struct GReciprocalProbe {
    /// `(grid size, rectangle-rule estimate)`.
    pub estimates: Vec<(usize, f64)>,
    pub min_sample: f64,
    pub verdict: Integrability,
}

impl GReciprocalProbe {
    pub fn finite(&self) -> bool {
        self.verdict == Integrability::Finite
    }
}

/// Finite when the two finest estimates agree to 1% and every sample is positive.
pub fn reciprocal_probe_g(phi: &HFunction, r: u32, cert: &PlancherelCertificate) -> Result<GReciprocalProbe> {
    let mut estimates = Vec::new();
    let mut min_sample = f64::INFINITY;
    for &n in &PROBE_SIZES {
        let g = g_function(phi, (0, 0), &lambda_grid(n), r, GRoute::Reduced, Some(cert))?;
        min_sample = min_sample.min(g.min_re());
        let est = if g.min_re() > 0.0 {
            g.values().iter().map(|v| 1.0 / v.re).sum::<f64>() / n as f64
        } else {
            f64::INFINITY
        };
        estimates.push((n, est));
    }
    let verdict = match estimates.as_slice() {
        [.., (_, a), (_, b)] if a.is_finite() && b.is_finite() && (b - a).abs() < 1e-2 * a.abs() => {
            Integrability::Finite
        }
        _ => Integrability::Divergent,
    };
    Ok(GReciprocalProbe {
        estimates,
        min_sample,
        verdict,
    })
}

/// The canonical dual with its diagnostics.
#[derive(Debug, Clone)]
pub struct HDual {
    pub function: HFunction,
    pub g00: GSamples,
    /// `d_n`, Fourier coefficients of `1/G₀₀`.
    pub coefficients: Vec<(i64, Complex64)>,
    pub probe: GReciprocalProbe,
    pub condition_c: HConditionCReport,
}

/// `φ̃ = Σ_{|n| ≤ 31} d_n L_{(0,0,n)}φ`, so that `φ̃^λ = φ^λ / G₀₀(λ)` up to the
/// truncation of the expansion of `1/G₀₀`.
///
/// Refuses when condition C fails on `|k|,|l|,|m| ≤ 2`, when a sampled `G₀₀`
/// falls to `ε`, or when `∫ 1/G₀₀` does not stabilize under refinement.
pub fn canonical_dual_h(phi: &HFunction, eps: f64, cert: &PlancherelCertificate) -> Result<HDual> {
    let condition_c = condition_c_residual_h(phi, 2, 2, 2)?;
    let g00 = g_function_default(phi, (0, 0), cert)?;
    let min_g = g00.min_re();
    if !condition_c.satisfied() {
        return Err(Error::DualRefused {
            min_weight: min_g,
            eps,
            reason: format!(
                "condition C violated: residual {:.3e} at {:?}",
                condition_c.max_residual(),
                condition_c.argmax()
            ),
        });
    }
    let probe = reciprocal_probe_g(phi, DEFAULT_R, cert)?;
    if min_g <= eps || probe.min_sample <= eps {
        return Err(Error::DualRefused {
            min_weight: min_g.min(probe.min_sample),
            eps,
            reason: format!("G₀₀ falls below ε; 1/G₀₀ probe verdict {:?}", probe.verdict),
        });
    }
    if !probe.finite() {
        return Err(Error::DualRefused {
            min_weight: probe.min_sample,
            eps,
            reason: format!(
                "∫ 1/G₀₀ does not stabilize under refinement: {:?}",
                probe.estimates
            ),
        });
    }
    let n = g00.values().len() as f64;
    let coefficients: Vec<(i64, Complex64)> = (-DUAL_ORDER..=DUAL_ORDER)
        .map(|m| {
            let d = g00
                .lambdas()
                .iter()
                .zip(g00.values())
                .map(|(&lam, v)| cis(-2.0 * PI * m as f64 * lam) / v.re)
                .sum::<Complex64>()
                / n;
            (m, d)
        })
        .collect();
    let terms = phi
        .terms
        .iter()
        .map(|t| HTerm {
            h: Factor1D::LatticeSum {
                inner: Box::new(t.h.clone()),
                step: 1.0,
                coeffs: coefficients.clone(),
            },
            ..t.clone()
        })
        .collect();
    Ok(HDual {
        function: HFunction {
            spec: phi.spec.clone(),
            terms,
        },
        g00,
        coefficients,
        probe,
        condition_c,
    })
}

/// `max_{|k|,|l|,|m| ≤ r} |⟨L_{(2k,l,m)}φ̃, φ⟩ − δ|`.
pub fn biorthogonality_h(dual: &HFunction, phi: &HFunction, r: u32) -> Result<f64> {
    if dual.spec != phi.spec {
        return Err(Error::SpecMismatch);
    }
    let mut worst: f64 = 0.0;
    for idx in HLatticeIndex::window(r as i64) {
        let v = h_inner(&left_translate(dual, idx), phi)?;
        let d = if idx == HLatticeIndex::ZERO { 1.0 } else { 0.0 };
        worst = worst.max((v - d).norm());
    }
    Ok(worst)
}

/// Hermitian Gram matrix `G_ab = ⟨L_bφ, L_aφ⟩ = ⟨L_{a⁻¹b}φ, φ⟩` over `|k|,|l|,|m| ≤ r`.
pub fn gram_h(phi: &HFunction, r: u32, cap: usize) -> Result<GramSection<HLatticeIndex>> {
    let idx = HLatticeIndex::window(r as i64);
    let n = idx.len();
    if n > cap {
        return Err(Error::WindowTooLarge { requested: n, cap });
    }
    let mut offsets: BTreeMap<HLatticeIndex, Complex64> = BTreeMap::new();
    for a in &idx {
        for b in &idx {
            let d = a.inv().mul(b);
            let rep = d.min(d.inv());
            offsets.insert(rep, ZERO);
        }
    }
    let keys: Vec<HLatticeIndex> = offsets.keys().cloned().collect();
    let vals = keys
        .par_iter()
        .map(|&d| h_inner(&left_translate(phi, d), phi))
        .collect::<Result<Vec<_>>>()?;
    for (k, v) in keys.iter().zip(vals) {
        let v = if *k == HLatticeIndex::ZERO { Complex64::new(v.re, 0.0) } else { v };
        offsets.insert(*k, v);
    }
    let mut m = DMatrix::from_element(n, n, ZERO);
    for (i, a) in idx.iter().enumerate() {
        for (j, b) in idx.iter().enumerate() {
            let d = a.inv().mul(b);
            let rep = d.min(d.inv());
            let v = offsets[&rep];
            m[(i, j)] = if rep == d { v } else { v.conj() };
        }
    }
    Ok(GramSection::new(r, idx, m))
}

pub fn gram_h_default(phi: &HFunction, r: u32) -> Result<GramSection<HLatticeIndex>> {
    gram_h(phi, r, DEFAULT_WINDOW_CAP)
}

/// `Σ_a c_a L_aφ`.
pub fn synthesize_h(c: &[(HLatticeIndex, Complex64)], phi: &HFunction) -> HFunction {
    let mut terms = Vec::new();
    for &(idx, ca) in c {
        if ca == ZERO {
            continue;
        }
        terms.extend(left_translate(phi, idx).scaled(ca).terms);
    }
    HFunction {
        spec: phi.spec.clone(),
        terms,
    }
}

fn rho(c: &[(HLatticeIndex, Complex64)], lam: f64) -> BTreeMap<(i64, i64), Complex64> {
    let mut out: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
    for &(idx, ca) in c {
        *out.entry((idx.k, idx.l)).or_insert(ZERO) += ca * cis(2.0 * PI * idx.m as f64 * lam);
    }
    out
}

/// `(‖Σ c L φ‖², Σ_{k,l} ∫₀¹ |Σ_m c e^{2πimλ}|² G₀₀(λ) dλ)` with the right side on
/// the grid of `g00`.
pub fn h_norm_identity(c: &[(HLatticeIndex, Complex64)], phi: &HFunction, g00: &GSamples) -> Result<(f64, f64)> {
    if g00.kl() != (0, 0) {
        return Err(Error::GridMisalignment("norm identity needs G₀₀ samples".into()));
    }
    let f = synthesize_h(c, phi);
    let lhs = f.norm_sq();
    let n = g00.lambdas().len() as f64;
    let rhs = g00
        .lambdas()
        .iter()
        .zip(g00.values())
        .map(|(&lam, g)| rho(c, lam).values().map(|p| p.norm_sqr()).sum::<f64>() * g.re)
        .sum::<f64>()
        / n;
    Ok((lhs, rhs))
}

/// `sup_λ ‖f^λ − Σ_{k,l} ρ_{k,l}(λ)(L_{(2k,l,0)}φ)^λ‖_∞ / ‖f^λ‖_∞` for `f = Σ c L φ`.
pub fn h_membership_residual(c: &[(HLatticeIndex, Complex64)], phi: &HFunction, lambdas: &[f64]) -> Result<f64> {
    let f = synthesize_h(c, phi);
    let mut worst: f64 = 0.0;
    for &lam in lambdas {
        let lhs = partial_ft(&f, lam)?;
        let mut rhs = SampledFunction::zeros(phi.phase_plane_spec());
        for ((k, l), p) in rho(c, lam) {
            let part = partial_ft(&left_translate(phi, HLatticeIndex::new(k, l, 0)), lam)?;
            rhs.axpy(p, &part)?;
        }
        let scale = lhs.values().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        worst = worst.max(lhs.max_abs_diff(&rhs)? / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn spec() -> GridSpec {
        default_group_spec()
    }

    fn cert() -> &'static PlancherelCertificate {
        static C: OnceLock<PlancherelCertificate> = OnceLock::new();
        C.get_or_init(|| plancherel_prerequisite(&spec()).unwrap())
    }

    fn ex(id: u32) -> HFunction {
        example_factory(id, None, &spec()).unwrap()
    }

    fn g00_closed(lam: f64) -> f64 {
        2.0 * PI * (-8..=8).map(|r| (-2.0 * PI * PI * (lam + r as f64).powi(2)).exp()).sum::<f64>()
    }

    #[test]
    fn group_law_and_lattice_product() {
        let a = GroupElement::new(0.3, -1.2, 0.7);
        let b = GroupElement::new(-2.0, 0.5, 1.1);
        let c = GroupElement::new(1.5, 2.0, -0.4);
        let l = a.mul(&b).mul(&c);
        let r = a.mul(&b.mul(&c));
        assert!((l.t - r.t).abs() < 1e-14 && (l.x - r.x).abs() < 1e-15);
        let e = a.mul(&a.inv());
        assert_eq!(e, GroupElement::IDENTITY);
        let i = HLatticeIndex::new(1, -2, 3);
        let j = HLatticeIndex::new(-1, 1, 2);
        let p = i.mul(&j).element();
        let q = i.element().mul(&j.element());
        assert_eq!(p, q);
    }

    #[test]
    fn left_translate_value_and_composition() {
        let phi = ex(1);
        let t = left_translate(&phi, HLatticeIndex::new(1, 0, 0));
        let v = t.eval(2.5, 0.5, 0.0);
        assert!((v.re - (-0.25f64).exp()).abs() < 1e-15 && v.im == 0.0);
        assert_eq!(left_translate(&phi, HLatticeIndex::ZERO), phi);
        let a = HLatticeIndex::new(1, 2, -1);
        let b = HLatticeIndex::new(-2, 1, 3);
        let two = left_translate(&left_translate(&phi, a), b);
        let one = left_translate(&phi, b.mul(&a));
        assert_eq!(two, one);
        let n0 = phi.norm_sq();
        let n1 = t.norm_sq();
        assert!((n0 - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((n0 - n1).abs() < 1e-12);
    }

    #[test]
    fn partial_ft_values() {
        let phi = ex(1);
        let f0 = partial_ft(&phi, 0.0).unwrap();
        let v = f0.eval_exact(&[1.0, 0.5]).unwrap();
        assert!((v.re - PI.sqrt()).abs() < 1e-14);
        let f1 = partial_ft(&phi, 1.0).unwrap();
        let v = f1.eval_exact(&[1.0, 0.5]).unwrap();
        assert!((v.re - PI.sqrt() * (-PI * PI).exp()).abs() < 1e-18);
        // ∫ φ(x,y,t) e^{2πiλt} dt by t-quadrature for a translate
        let t = left_translate(&phi, HLatticeIndex::new(0, 1, 2));
        let lam = 0.37;
        let ft = partial_ft(&t, lam).unwrap();
        let fine = AxisGrid::new(12.0, 256, true).unwrap();
        for &(x, y) in &[(0.3, 1.4), (1.7, 1.9)] {
            let quad: Complex64 = (0..fine.len())
                .map(|s| {
                    let tt = fine.point(s);
                    t.eval(x, y, tt) * cis(2.0 * PI * lam * tt)
                })
                .sum::<Complex64>()
                * fine.spacing();
            let an = ft.eval_exact(&[x, y]).unwrap();
            assert!((quad - an).norm() < 1e-10, "{quad} vs {an}");
        }
    }

    #[test]
    fn inner_product_against_three_d_quadrature() {
        let phi = ex(4);
        let t = left_translate(&phi, HLatticeIndex::new(0, 0, 1));
        let small = GridSpec::group(
            AxisGrid::new(2.0, 32, true).unwrap(),
            AxisGrid::new(2.0, 32, true).unwrap(),
            AxisGrid::new(6.0, 16, true).unwrap(),
        );
        let a = HFunction::new(small.clone(), phi.terms().to_vec()).unwrap();
        let b = HFunction::new(small.clone(), t.terms().to_vec()).unwrap();
        let sa = a.samples().unwrap();
        let sb = b.samples().unwrap();
        let brute: Complex64 = sa.iter().zip(&sb).map(|(u, v)| u * v.conj()).sum::<Complex64>() * small.cell_volume();
        let fast = h_inner(&a, &b).unwrap();
        assert!((brute - fast).norm() < 1e-9, "{brute} vs {fast}");
        let grid = h_inner_with(&a, &b, TCorrelation::Grid).unwrap();
        assert!((brute - grid).norm() < 1e-12);
    }

    #[test]
    fn example_values() {
        let v2 = h_inner(&ex(2), &left_translate(&ex(2), HLatticeIndex::new(0, 0, 1))).unwrap();
        let expect = 2.0 * (PI / 2.0).sqrt() * (-0.5f64).exp();
        assert!((v2.re - expect).abs() < 1e-10 && v2.im.abs() < 1e-12);
        let c5 = condition_c_residual_h(&ex(5), 1, 1, 1).unwrap();
        let v5 = c5.value(HLatticeIndex::new(1, 0, 0)).unwrap();
        assert!((v5.re - 0.589490).abs() < 1e-3, "{v5}");
        assert!(!c5.satisfied());
        for id in [1, 4] {
            let c = condition_c_residual_h(&ex(id), 2, 2, 2).unwrap();
            assert!(c.max_residual() <= 1e-10 && c.satisfied());
        }
        let c6 = condition_c_residual_h(&ex(6), 1, 1, 1).unwrap();
        let v6 = c6.value(HLatticeIndex::new(1, 0, 0)).unwrap();
        // 3e^{-2} ∫_0^7 g² sinc(−y) dy, by independent y-quadrature
        let fine = AxisGrid::new(8.0, 1024, true).unwrap();
        let g = Factor1D::step_decay_for_box(8.0);
        let iy: f64 = (0..fine.len())
            .map(|j| {
                let y = fine.point(j);
                g.eval(y).norm_sqr() * crate::grid::sinc(y)
            })
            .sum::<f64>()
            * fine.spacing();
        assert!((v6.re - 3.0 * (-2.0f64).exp() * iy).abs() < 1e-3, "{v6}");
        assert!(!c6.satisfied());
    }

    #[test]
    fn g00_closed_form_and_routes() {
        let phi = ex(1);
        let g = g_function(&phi, (0, 0), &[0.5, 1.0], DEFAULT_R, GRoute::Reduced, Some(cert())).unwrap();
        assert!((g.values()[0].re - 0.09038).abs() < 1e-4);
        assert!((g.values()[0].re - g00_closed(0.5)).abs() < 1e-12);
        assert!((g.values()[1].re - 2.0 * PI).abs() < 1e-6);
        assert!(g.tail_bound() < 1e-30);
        let lams = [0.25, 0.5, 0.75];
        let red = g_function(&phi, (0, 0), &lams, DEFAULT_R, GRoute::Reduced, Some(cert())).unwrap();
        let dir = g_function(&phi, (0, 0), &lams, DEFAULT_R, GRoute::KernelDirect, None).unwrap();
        for (a, b) in red.values().iter().zip(dir.values()) {
            assert!((a - b).norm() <= 1e-3 * a.norm(), "{a} vs {b}");
        }
        let off = g_function(&phi, (1, 0), &lams, DEFAULT_R, GRoute::KernelDirect, None).unwrap();
        assert!(off.max_abs() < 1e-3);
        let missing = g_function(&phi, (0, 0), &lams, DEFAULT_R, GRoute::Reduced, None);
        assert!(matches!(missing, Err(Error::PrerequisiteUnverified(_))));
    }

    #[test]
    fn off_diagonal_brackets_vanish_for_example_one() {
        let phi = ex(1);
        for kl in [(1, 0), (0, 1), (-1, 2), (2, -1)] {
            let g = g_function_default(&phi, kl, cert()).unwrap();
            assert!(g.max_abs() <= 1e-8);
        }
    }

    #[test]
    fn bracket_routes_agree_on_example_five() {
        let phi = ex(5);
        for kl in [(0, 0), (1, 0), (0, 1)] {
            let g = g_function_default(&phi, kl, cert()).unwrap();
            for m in -1..=1 {
                let b = bracket_coefficient(&phi, HLatticeIndex::new(kl.0, kl.1, m), &g).unwrap();
                assert!(b.discrepancy <= 1e-3 * (1.0 + b.via_inner.norm()), "{b:?}");
            }
        }
    }

    #[test]
    fn scaling_plancherel_for_example_one() {
        let phi = ex(1);
        for lam in PLANCHEREL_LAMBDAS {
            let f = partial_ft(&phi, lam).unwrap();
            let hs = crate::weyl::hs_norm_sq(&f, lam, 1e-5).unwrap() * lam;
            let n = f.norm_sq();
            assert!((hs - n).abs() <= 1e-4 * n, "λ={lam}: {hs} vs {n}");
        }
        assert!(cert().passed());
    }

    #[test]
    fn plancherel_over_lambda() {
        let g = Factor1D::gaussian(PI);
        let phi = HFunction::separable(spec(), g.clone(), g.shifted(0.5), Factor1D::gaussian(2.0)).unwrap();
        let n = 48;
        let width = 6.0;
        let step = width / n as f64;
        let total: f64 = (0..n)
            .map(|j| {
                let lam = -width / 2.0 + (j as f64 + 0.5) * step;
                let f = partial_ft(&phi, lam).unwrap();
                crate::weyl::hs_norm_sq(&f, lam, 1e-12).unwrap() * lam.abs()
            })
            .sum::<f64>()
            * step;
        let n2 = phi.norm_sq();
        assert!((total - n2).abs() <= 1e-2 * n2, "{total} vs {n2}");
    }

    #[test]
    fn dual_biorthogonal_and_refusal() {
        let phi = ex(1);
        let d = canonical_dual_h(&phi, 1e-6, cert()).unwrap();
        assert!(d.probe.finite());
        assert!(biorthogonality_h(&d.function, &phi, 1).unwrap() <= 1e-3);
        let gd = g_function_default(&d.function, (0, 0), cert()).unwrap();
        for (a, b) in gd.values().iter().zip(d.g00.values()) {
            assert!((a.re * b.re - 1.0).abs() <= 5e-2);
        }
        let psi = phi.add(&left_translate(&phi, HLatticeIndex::new(0, 0, 1))).unwrap();
        match canonical_dual_h(&psi, 1e-6, cert()) {
            Err(Error::DualRefused { .. }) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
        assert!(matches!(canonical_dual_h(&ex(5), 1e-6, cert()), Err(Error::DualRefused { .. })));
    }

    #[test]
    fn gram_entries_and_bound() {
        let phi = ex(1);
        let g = gram_h_default(&phi, 2).unwrap();
        assert_eq!(g.hermitian_defect(), 0.0);
        let idx = g.indices();
        let i0 = idx.iter().position(|&i| i == HLatticeIndex::ZERO).unwrap();
        let i1 = idx.iter().position(|&i| i == HLatticeIndex::new(0, 0, 1)).unwrap();
        assert!((g.matrix()[(i0, i1)].re - 1.520346).abs() < 1e-5);
        let i2 = idx.iter().position(|&i| i == HLatticeIndex::new(1, 0, 0)).unwrap();
        assert!(g.matrix()[(i0, i2)].norm() < 1e-14);
        assert!(g.lambda_max() <= g00_closed(0.0) + 1e-2);
    }

    #[test]
    fn norm_identity_and_membership() {
        let phi = ex(1);
        let g00 = g_function_default(&phi, (0, 0), cert()).unwrap();
        let c = vec![
            (HLatticeIndex::new(0, 0, 0), Complex64::new(1.0, 0.5)),
            (HLatticeIndex::new(0, 0, 1), Complex64::new(-0.3, 0.2)),
            (HLatticeIndex::new(1, -1, 2), Complex64::new(0.7, 0.0)),
            (HLatticeIndex::new(1, -1, 0), Complex64::new(0.0, -0.4)),
        ];
        let (lhs, rhs) = h_norm_identity(&c, &phi, &g00).unwrap();
        assert!((lhs - rhs).abs() <= 1e-6 * lhs, "{lhs} vs {rhs}");
        let res = h_membership_residual(&c, &phi, &[0.1, 0.6]).unwrap();
        assert!(res < 1e-12);
    }
}
