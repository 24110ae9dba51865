//! Discretized Weyl kernels `K^λ_f(ξ,η) = ∫ f(x, η−ξ) e^{πiλx(ξ+η)} dx` on the phase plane.
//!
//! Kernels are stored sheared: row `a` is `ξ_a`, column `j` is the lag `y_j = η − ξ`,
//! where `y_j` runs over the input's y-axis. Lags therefore land on input samples
//! exactly and no interpolation is ever needed.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cis, pi_phase, AxisGrid, Factor1D, GridSpec, SampledFunction, ZERO};

/// How kernel values are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelRoute {
    /// Separable fast path when metadata is present, otherwise direct quadrature.
    Auto,
    /// `f₂(η−ξ)·𝓕f₁(−λ(ξ+η)/2)` summed over separable terms.
    Separable,
    /// x-quadrature of the samples.
    Direct,
}

#[derive(Debug, Clone)]
struct SepTerm {
    coeff: Complex64,
    fx: Factor1D,
    gy: Vec<Complex64>,
    nonzero: Vec<usize>,
}

#[derive(Debug, Clone)]
struct DirectColumn {
    j: usize,
    idx: Vec<usize>,
    /// `h·f(x_i, y_j)·e^{πiλ x_i y_j}`.
    vals: Vec<Complex64>,
}

#[derive(Debug, Clone)]
enum Repr {
    Separable(Vec<SepTerm>),
    Direct(Vec<DirectColumn>),
}

/// Kernel values rows `ξ ↦ (K(ξ, ξ+y_j))_j` computed on demand.
pub trait KernelEval: Sync {
    fn lambda(&self) -> f64;
    fn lag_grid(&self) -> &AxisGrid;
    fn x_axis(&self) -> &AxisGrid;
    /// Writes the row at `ξ` into `out` (length = lag count). Rows outside the
    /// represented range are zero.
    fn row_at(&self, xi: f64, out: &mut [Complex64]);
    /// Integer `P` such that `ξ ↦ K(ξ,·)` is periodic or antiperiodic with period `P`.
    fn xi_period(&self) -> Option<i64> {
        None
    }
    /// Lags at which some row can be nonzero.
    fn active_lags(&self) -> Vec<usize> {
        (0..self.lag_grid().len()).collect()
    }
}

/// A kernel evaluator built from a phase-plane function.
#[derive(Debug, Clone)]
pub struct KernelSource {
    lambda: f64,
    x_axis: AxisGrid,
    lag: AxisGrid,
    repr: Repr,
}

impl KernelSource {
    pub fn new(f: &SampledFunction, lambda: f64, route: KernelRoute) -> Result<Self> {
        if lambda == 0.0 {
            return Err(Error::ZeroLambda);
        }
        f.spec().require_phase_plane()?;
        let x_axis = *f.spec().axis(0);
        let lag = *f.spec().axis(1);
        let use_sep = match route {
            KernelRoute::Direct => false,
            KernelRoute::Separable => {
                if f.terms().is_none() {
                    return Err(Error::NonSeparable);
                }
                true
            }
            KernelRoute::Auto => f.terms().is_some(),
        };
        let repr = if use_sep {
            let terms = f
                .terms()
                .expect("checked above")
                .iter()
                .map(|t| {
                    let gy = t.factors[1].samples_on(&lag);
                    let nonzero = (0..gy.len()).filter(|&j| gy[j] != ZERO).collect();
                    SepTerm {
                        coeff: t.coeff,
                        fx: t.factors[0].clone(),
                        gy,
                        nonzero,
                    }
                })
                .filter(|t| t.coeff != ZERO)
                .collect();
            Repr::Separable(terms)
        } else {
            let h = x_axis.spacing();
            let ny = lag.len();
            let cols = (0..ny)
                .into_par_iter()
                .filter_map(|j| {
                    let y = lag.point(j);
                    let mut idx = Vec::new();
                    let mut vals = Vec::new();
                    for i in 0..x_axis.len() {
                        let v = f.values()[i * ny + j];
                        if v != ZERO {
                            let x = x_axis.point(i);
                            idx.push(i);
                            vals.push(v * cis(PI * lambda * x * y) * h);
                        }
                    }
                    (!idx.is_empty()).then_some(DirectColumn { j, idx, vals })
                })
                .collect();
            Repr::Direct(cols)
        };
        Ok(Self {
            lambda,
            x_axis,
            lag,
            repr,
        })
    }

    pub fn route(&self) -> KernelRoute {
        match self.repr {
            Repr::Separable(_) => KernelRoute::Separable,
            Repr::Direct(_) => KernelRoute::Direct,
        }
    }

    /// Single value at `(ξ, ξ + y_j)`.
    pub fn at(&self, xi: f64, j: usize) -> Complex64 {
        let y = self.lag.point(j);
        match &self.repr {
            Repr::Separable(terms) => {
                let w = -self.lambda * (2.0 * xi + y) / 2.0;
                terms
                    .iter()
                    .filter(|t| t.gy[j] != ZERO)
                    .map(|t| t.coeff * t.gy[j] * t.fx.fourier(w))
                    .sum()
            }
            Repr::Direct(cols) => cols
                .iter()
                .find(|c| c.j == j)
                .map(|c| {
                    c.idx
                        .iter()
                        .zip(&c.vals)
                        .map(|(&i, v)| v * cis(2.0 * PI * self.lambda * self.x_axis.point(i) * xi))
                        .sum()
                })
                .unwrap_or(ZERO),
        }
    }
}

impl KernelEval for KernelSource {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn lag_grid(&self) -> &AxisGrid {
        &self.lag
    }

    fn x_axis(&self) -> &AxisGrid {
        &self.x_axis
    }

    fn row_at(&self, xi: f64, out: &mut [Complex64]) {
        out.fill(ZERO);
        match &self.repr {
            Repr::Separable(terms) => {
                for t in terms {
                    for &j in &t.nonzero {
                        let w = -self.lambda * (2.0 * xi + self.lag.point(j)) / 2.0;
                        out[j] += t.coeff * t.gy[j] * t.fx.fourier(w);
                    }
                }
            }
            Repr::Direct(cols) => {
                let e: Vec<Complex64> = (0..self.x_axis.len())
                    .map(|i| cis(2.0 * PI * self.lambda * self.x_axis.point(i) * xi))
                    .collect();
                for c in cols {
                    out[c.j] = c.idx.iter().zip(&c.vals).map(|(&i, v)| v * e[i]).sum();
                }
            }
        }
    }

    fn xi_period(&self) -> Option<i64> {
        match self.repr {
            Repr::Direct(_) => {
                let p = self.x_axis.samples_per_unit() as f64 / self.lambda.abs();
                let r = p.round();
                ((p - r).abs() < 1e-12 && r >= 1.0).then_some(r as i64)
            }
            Repr::Separable(_) => None,
        }
    }

    fn active_lags(&self) -> Vec<usize> {
        let mut on = vec![false; self.lag.len()];
        match &self.repr {
            Repr::Separable(terms) => terms.iter().flat_map(|t| &t.nonzero).for_each(|&j| on[j] = true),
            Repr::Direct(cols) => cols.iter().for_each(|c| on[c.j] = true),
        }
        (0..on.len()).filter(|&j| on[j]).collect()
    }
}

/// Kernel samples on a ξ-grid times the lag grid, tagged with `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    lambda: f64,
    x_axis: AxisGrid,
    xi: AxisGrid,
    lag: AxisGrid,
    values: Vec<Complex64>,
}

#[derive(Debug, Serialize)]
struct KernelSidecar<'a> {
    lambda: f64,
    x_axis: &'a AxisGrid,
    xi_grid: &'a AxisGrid,
    lag_grid: &'a AxisGrid,
    layout: &'static str,
}

impl KernelMatrix {
    pub fn from_values(
        lambda: f64,
        x_axis: AxisGrid,
        xi: AxisGrid,
        lag: AxisGrid,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if lambda == 0.0 {
            return Err(Error::ZeroLambda);
        }
        check_xi_grid(&xi, &lag)?;
        if values.len() != xi.len() * lag.len() {
            return Err(Error::DimensionMismatch {
                expected: xi.len() * lag.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            lambda,
            x_axis,
            xi,
            lag,
            values,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn xi_grid(&self) -> &AxisGrid {
        &self.xi
    }

    pub fn lag_grid(&self) -> &AxisGrid {
        &self.lag
    }

    pub fn x_axis(&self) -> &AxisGrid {
        &self.x_axis
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `K(ξ_a, ξ_a + y_j)`.
    #[inline]
    pub fn value(&self, a: usize, j: usize) -> Complex64 {
        self.values[a * self.lag.len() + j]
    }

    pub fn row(&self, a: usize) -> &[Complex64] {
        let n = self.lag.len();
        &self.values[a * n..(a + 1) * n]
    }

    /// `K(ξ_a, η)` when `η − ξ_a` is a lag sample.
    pub fn at_eta(&self, a: usize, eta: f64) -> Option<Complex64> {
        self.lag
            .index_of(eta - self.xi.point(a))
            .map(|j| self.value(a, j))
    }

    pub fn hs_norm_sq(&self) -> f64 {
        hs_inner(self, self).map(|z| z.re).unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }

    /// Multiplies row `ξ` by `s(ξ)`.
    pub fn scale_rows(&self, s: impl Fn(f64) -> Complex64 + Sync) -> Self {
        let n = self.lag.len();
        let mut values = self.values.clone();
        values.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
            let c = s(self.xi.point(a));
            row.iter_mut().for_each(|v| *v *= c);
        });
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &KernelMatrix) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    pub fn sup_diff(&self, other: &KernelMatrix) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Rows of `self` on the sub-grid `xi` (same spacing and offset).
    pub fn restrict_xi(&self, xi: &AxisGrid) -> Result<Self> {
        check_xi_grid(xi, &self.lag)?;
        let start = self
            .xi
            .index_of(xi.point(0))
            .filter(|s| s + xi.len() <= self.xi.len())
            .ok_or_else(|| Error::GridMisalignment("restriction window exceeds ξ-grid".into()))?;
        let n = self.lag.len();
        Ok(Self {
            xi: *xi,
            values: self.values[start * n..(start + xi.len()) * n].to_vec(),
            ..self.clone()
        })
    }

    fn check_same(&self, other: &KernelMatrix) -> Result<()> {
        if self.xi != other.xi || self.lag != other.lag || self.lambda != other.lambda {
            return Err(Error::GridMisalignment(
                "kernel matrices differ in grid or λ".into(),
            ));
        }
        Ok(())
    }

    /// CSV rows `xi,eta,re,im` in row-major order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "xi,eta,re,im").map_err(io)?;
        for a in 0..self.xi.len() {
            let xi = self.xi.point(a);
            for j in 0..self.lag.len() {
                let v = self.value(a, j);
                writeln!(w, "{},{},{:e},{:e}", xi, xi + self.lag.point(j), v.re, v.im).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&KernelSidecar {
            lambda: self.lambda,
            x_axis: &self.x_axis,
            xi_grid: &self.xi,
            lag_grid: &self.lag,
            layout: "row-major over (xi, eta - xi)",
        })?)
    }
}

impl KernelEval for KernelMatrix {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn lag_grid(&self) -> &AxisGrid {
        &self.lag
    }

    fn x_axis(&self) -> &AxisGrid {
        &self.x_axis
    }

    fn row_at(&self, xi: f64, out: &mut [Complex64]) {
        match self.xi.index_of(xi) {
            Some(a) => out.copy_from_slice(self.row(a)),
            None => out.fill(ZERO),
        }
    }
}

fn check_xi_grid(xi: &AxisGrid, lag: &AxisGrid) -> Result<()> {
    if xi.is_midpoint() || xi.samples_per_unit() != lag.samples_per_unit() {
        return Err(Error::GridMisalignment(
            "ξ-grid must have zero offset and the lag spacing".into(),
        ));
    }
    Ok(())
}

/// ξ-grid `[-P/2, P/2)` covering one full period `P = q/|λ|` of the direct kernel.
pub fn full_period_xi_grid(q: u32, lambda: f64) -> Result<AxisGrid> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let half = q as f64 / (2.0 * lambda.abs());
    let cells = (half * q as f64 - 1e-9).ceil() as i64;
    AxisGrid::from_cells(cells.max(1), q, false)
}

/// ξ-grid wide enough that the omitted `|K|²` mass is below `tol·‖f‖²`, using the
/// bandwidth of each x-factor.
pub fn wide_xi_grid(f: &SampledFunction, lambda: f64, tol: f64) -> Result<AxisGrid> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    f.spec().require_phase_plane()?;
    let lag = f.spec().axis(1);
    let omega = match f.terms() {
        Some(ts) if !ts.is_empty() => ts
            .iter()
            .map(|t| t.factors[0].bandwidth(tol))
            .fold(0.0, f64::max),
        _ => 0.5 * f.spec().axis(0).samples_per_unit() as f64,
    };
    let half = (omega / lambda.abs() + 0.5 * lag.half_width() + 1.0).ceil();
    AxisGrid::new(half, lag.samples_per_unit(), false)
}

pub fn materialize(src: &impl KernelEval, xi: &AxisGrid) -> Result<KernelMatrix> {
    let lag = *src.lag_grid();
    check_xi_grid(xi, &lag)?;
    let n = lag.len();
    let mut values = vec![ZERO; xi.len() * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(a, row)| src.row_at(xi.point(a), row));
    KernelMatrix::from_values(src.lambda(), *src.x_axis(), *xi, lag, values)
}

/// `K^λ_f` on the full-period ξ-grid, separable fast path when metadata is present.
pub fn weyl_kernel(f: &SampledFunction, lambda: f64) -> Result<KernelMatrix> {
    f.spec().require_phase_plane()?;
    let xi = full_period_xi_grid(f.spec().axis(1).samples_per_unit(), lambda)?;
    weyl_kernel_on(f, lambda, KernelRoute::Auto, &xi)
}

pub fn weyl_kernel_on(
    f: &SampledFunction,
    lambda: f64,
    route: KernelRoute,
    xi: &AxisGrid,
) -> Result<KernelMatrix> {
    let src = KernelSource::new(f, lambda, route)?;
    materialize(&src, xi)
}

/// `K^λ_f(ξ,η)` at an arbitrary point. Exact for separable metadata; the direct
/// route requires `η − ξ` to be a y-sample.
pub fn eval_point(f: &SampledFunction, lambda: f64, xi: f64, eta: f64) -> Result<Complex64> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    f.spec().require_phase_plane()?;
    if let Some(terms) = f.terms() {
        let w = -lambda * (xi + eta) / 2.0;
        return Ok(terms
            .iter()
            .map(|t| t.coeff * t.factors[1].eval(eta - xi) * t.factors[0].fourier(w))
            .sum());
    }
    let lag = f.spec().axis(1);
    let j = lag
        .index_of(eta - xi)
        .ok_or_else(|| Error::GridMisalignment(format!("η − ξ = {} is not a y-sample", eta - xi)))?;
    Ok(KernelSource::new(f, lambda, KernelRoute::Direct)?.at(xi, j))
}

/// `∫∫ K1·conj(K2) dξ dη` over the common grid.
pub fn hs_inner(k1: &KernelMatrix, k2: &KernelMatrix) -> Result<Complex64> {
    k1.check_same(k2)?;
    let n = k1.lag.len();
    let partial: Vec<Complex64> = k1
        .values
        .par_chunks(n)
        .zip(k2.values.par_chunks(n))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum())
        .collect();
    Ok(partial.into_iter().sum::<Complex64>() * (k1.xi.spacing() * k1.lag.spacing()))
}

/// HS pairing of two kernel evaluators over `xi`, without materializing either.
pub fn hs_inner_sources(a: &impl KernelEval, b: &impl KernelEval, xi: &AxisGrid) -> Result<Complex64> {
    if a.lag_grid() != b.lag_grid() || a.lambda() != b.lambda() {
        return Err(Error::GridMisalignment("kernels differ in lag grid or λ".into()));
    }
    check_xi_grid(xi, a.lag_grid())?;
    let n = a.lag_grid().len();
    let partial: Vec<Complex64> = (0..xi.len())
        .into_par_iter()
        .map_init(
            || (vec![ZERO; n], vec![ZERO; n]),
            |(ra, rb), s| {
                let x = xi.point(s);
                a.row_at(x, ra);
                b.row_at(x, rb);
                ra.iter().zip(rb.iter()).map(|(u, v)| u * v.conj()).sum::<Complex64>()
            },
        )
        .collect();
    Ok(partial.into_iter().sum::<Complex64>() * (xi.spacing() * a.lag_grid().spacing()))
}

/// `‖K^λ_f‖²_HS` over the window chosen by [`wide_xi_grid`] at tolerance `tol`.
pub fn hs_norm_sq(f: &SampledFunction, lambda: f64, tol: f64) -> Result<f64> {
    let src = KernelSource::new(f, lambda, KernelRoute::Auto)?;
    let xi = wide_xi_grid(f, lambda, tol)?;
    Ok(hs_inner_sources(&src, &src, &xi)?.re)
}

/// Discretized composition `∫ K1(ξ,ζ) K2(ζ,η) dζ` on the ξ-grid of `k1`.
///
/// Requires zero-offset lag grids and a `k2` ξ-window covering `ξ + y` for every
/// output row and lag.
pub fn compose(k1: &KernelMatrix, k2: &KernelMatrix) -> Result<KernelMatrix> {
    if k1.lag != k2.lag || k1.lambda != k2.lambda {
        return Err(Error::GridMisalignment("kernels differ in lag grid or λ".into()));
    }
    let lag = k1.lag;
    if lag.is_midpoint() {
        return Err(Error::GridMisalignment(
            "composition needs lag grids closed under subtraction (zero offset)".into(),
        ));
    }
    if k2.xi.half_width() + 1e-12 < k1.xi.half_width() + lag.half_width() {
        return Err(Error::GridMisalignment(
            "second kernel's ξ-window does not cover ξ + lag".into(),
        ));
    }
    let n = lag.len();
    let h = lag.spacing();
    let mut values = vec![ZERO; k1.xi.len() * n];
    values.par_chunks_mut(n).enumerate().for_each(|(a, out)| {
        let xi_num = k1.xi.numer(a);
        for (s, &k1v) in k1.row(a).iter().enumerate() {
            if k1v == ZERO {
                continue;
            }
            let Some(b) = k2.xi.index_of_numer(xi_num + lag.numer(s)) else {
                continue;
            };
            let row2 = k2.row(b);
            for (j, o) in out.iter_mut().enumerate() {
                if let Some(t) = lag.index_of_numer(lag.numer(j) - lag.numer(s)) {
                    *o += k1v * row2[t] * h;
                }
            }
        }
    });
    KernelMatrix::from_values(k1.lambda, k1.x_axis, k1.xi, lag, values)
}

/// `(f×g)(z) = ∫ f(z−w) g(w) e^{πi(yu − xv)} dw` by direct summation.
///
/// Needs zero-offset grids so that `z − w` is a grid point. Phases are exact
/// rational multiples of π.
pub fn twisted_convolution(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    if f.spec() != g.spec() {
        return Err(Error::SpecMismatch);
    }
    let spec = f.spec().clone();
    spec.require_phase_plane()?;
    let (ax, ay) = (*spec.axis(0), *spec.axis(1));
    if ax.is_midpoint() || ay.is_midpoint() {
        return Err(Error::GridMisalignment(
            "twisted convolution needs zero-offset grids".into(),
        ));
    }
    if ax.samples_per_unit() != ay.samples_per_unit() {
        return Err(Error::GridMisalignment("x and y spacings differ".into()));
    }
    let (nx, ny) = (ax.len(), ay.len());
    let den = ax.denom() * ay.denom();
    let table: Vec<Complex64> = (0..2 * den).map(|p| pi_phase(p, den)).collect();
    let g_nz: Vec<(i64, i64, usize, usize, Complex64)> = (0..nx)
        .flat_map(|c| (0..ny).map(move |d| (c, d)))
        .filter_map(|(c, d)| {
            let v = g.at2(c, d);
            (v != ZERO).then(|| (ax.numer(c), ay.numer(d), c, d, v))
        })
        .collect();
    let vol = spec.cell_volume();
    let spill = g_nz.iter().any(|&(_, _, c, d, _)| {
        (c == 0 || d == 0 || c + 1 == nx || d + 1 == ny) && g.at2(c, d).norm() > 1e-12
    });
    if spill {
        log::warn!("twisted_convolution: g does not vanish at the box edge");
    }
    let mut values = vec![ZERO; nx * ny];
    values.par_chunks_mut(ny).enumerate().for_each(|(a, row)| {
        let xn = ax.numer(a);
        for (b, out) in row.iter_mut().enumerate() {
            let yn = ay.numer(b);
            let mut acc = ZERO;
            for &(un, vn, _, _, gv) in &g_nz {
                let (Some(ia), Some(ib)) = (ax.index_of_numer(xn - un), ay.index_of_numer(yn - vn)) else {
                    continue;
                };
                let fv = f.at2(ia, ib);
                if fv == ZERO {
                    continue;
                }
                let p = (yn * un - xn * vn).rem_euclid(2 * den) as usize;
                acc += fv * gv * table[p];
            }
            *out = acc * vol;
        }
    });
    SampledFunction::from_values(spec, values)
}

/// Inverse of the kernel map on the x-axis and lag grid carried by `k`:
/// `f(x, y) = |λ| ∫ K(ξ, ξ+y) e^{−πiλx(2ξ+y)} dξ`. Exact against the direct
/// route when `k` covers one full ξ-period.
pub fn kernel_to_function(k: &KernelMatrix) -> Result<SampledFunction> {
    let (xa, lag, xi) = (k.x_axis, k.lag, k.xi);
    if xa.samples_per_unit() != lag.samples_per_unit() {
        return Err(Error::GridMisalignment("x and lag spacings differ".into()));
    }
    let lam = k.lambda;
    let (nx, ny, nxi) = (xa.len(), lag.len(), xi.len());
    let scale = lam.abs() * xi.spacing();
    let mut values = vec![ZERO; nx * ny];
    values.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let x = xa.point(i);
        for a in 0..nxi {
            let e = cis(-2.0 * PI * lam * x * xi.point(a));
            for (o, v) in row.iter_mut().zip(k.row(a)) {
                *o += v * e;
            }
        }
        for (j, o) in row.iter_mut().enumerate() {
            *o *= cis(-PI * lam * x * lag.point(j)) * scale;
        }
    });
    SampledFunction::from_values(GridSpec::phase_plane(xa, lag), values)
}

/// Record that `|λ|·‖K^λ_f‖²_HS = ‖f‖²` was checked numerically on Gaussian probes.
#[derive(Debug, Clone, Serialize)]
pub struct PlancherelCertificate {
    entries: Vec<(f64, f64)>,
    tol: f64,
    passed: bool,
}

impl PlancherelCertificate {
    /// `(λ, relative error)` pairs.
    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn passed(&self) -> bool {
        self.passed
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn require(&self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::PrerequisiteUnverified(format!(
                "scaling Plancherel failed: max relative error {:.2e} > {:.0e}",
                self.max_rel_error(),
                self.tol
            )))
        }
    }
}

/// Checks the λ-scaled Plancherel identity on two Gaussian probes at each `λ`.
pub fn verify_scaling_plancherel(spec: &GridSpec, lambdas: &[f64], tol: f64) -> Result<PlancherelCertificate> {
    if lambdas.is_empty() {
        return Err(Error::EmptyInput("lambdas"));
    }
    let probes = [
        vec![Factor1D::gaussian(PI), Factor1D::gaussian(PI)],
        vec![
            Factor1D::gaussian(1.5).shifted(0.5).modulated(0.3),
            Factor1D::gaussian(2.0).shifted(-0.25),
        ],
    ];
    let mut entries = Vec::new();
    for &lam in lambdas {
        let mut worst: f64 = 0.0;
        for p in &probes {
            let f = crate::grid::sample_separable(p.clone(), spec.clone())?;
            let lhs = hs_norm_sq(&f, lam, 1e-14)? * lam.abs();
            let rhs = f.norm_sq();
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
        entries.push((lam, worst));
    }
    let passed = entries.iter().all(|e| e.1 <= tol);
    Ok(PlancherelCertificate {
        entries,
        tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, make_grid, sample_separable};

    fn default_spec() -> GridSpec {
        GridSpec::default_phase_plane()
    }

    fn unit_square() -> SampledFunction {
        sample_separable(
            vec![Factor1D::indicator(0.0, 1.0), Factor1D::indicator(0.0, 1.0)],
            default_spec(),
        )
        .unwrap()
    }

    fn gaussian(spec: &GridSpec, a: f64, b: f64) -> SampledFunction {
        sample_separable(
            vec![Factor1D::gaussian(PI).shifted(a), Factor1D::gaussian(PI).shifted(b)],
            spec.clone(),
        )
        .unwrap()
    }

    #[test]
    fn unit_square_kernel_values() {
        let f = unit_square();
        let k = eval_point(&f, 1.0, 0.0, 0.5).unwrap();
        let expect = Complex64::new(2.0 / PI, 2.0 / PI);
        assert!((k - expect).norm() < 1e-14);
        assert_eq!(eval_point(&f, 1.0, 0.0, 1.5).unwrap(), ZERO);
        // independent x-quadrature of ∫ f(x, 0.5) e^{πi x/2} dx
        let fine = make_grid(2.0, 4096, true).unwrap();
        let quad: Complex64 = (0..fine.len())
            .map(|i| {
                let x = fine.point(i);
                f.eval_exact(&[x, 0.5]).unwrap() * cis(PI * x * 0.5)
            })
            .sum::<Complex64>()
            * fine.spacing();
        assert!((quad - expect).norm() < 1e-6);
    }

    #[test]
    fn zero_lambda_rejected() {
        assert!(matches!(weyl_kernel(&unit_square(), 0.0), Err(Error::ZeroLambda)));
        let line = GridSpec::line(make_grid(8.0, 32, true).unwrap());
        let f = sample_separable(vec![Factor1D::Sinc], line).unwrap();
        assert!(matches!(weyl_kernel(&f, 1.0), Err(Error::NotPhasePlane(_))));
    }

    #[test]
    fn separable_fast_path_matches_direct_quadrature() {
        let spec = default_spec();
        let f = sample_separable(
            vec![
                Factor1D::gaussian(2.0).shifted(0.4).modulated(0.3),
                Factor1D::gaussian(1.0).shifted(-0.5),
            ],
            spec,
        )
        .unwrap();
        let xi = make_grid(4.0, 32, false).unwrap();
        let a = weyl_kernel_on(&f, 1.0, KernelRoute::Separable, &xi).unwrap();
        let b = weyl_kernel_on(&f, 1.0, KernelRoute::Direct, &xi).unwrap();
        assert!(a.sup_diff(&b).unwrap() < 1e-8);
        let c = weyl_kernel_on(&f, -0.5, KernelRoute::Separable, &xi).unwrap();
        let d = weyl_kernel_on(&f, -0.5, KernelRoute::Direct, &xi).unwrap();
        assert!(c.sup_diff(&d).unwrap() < 1e-8);
    }

    #[test]
    fn unit_square_hs_norm() {
        let f = unit_square();
        let n = hs_norm_sq(&f, 1.0, 1e-4).unwrap();
        assert!((n - 1.0).abs() < 1e-3, "{n}");
        // direct route over one full period is exact discrete Parseval
        let k = weyl_kernel_on(&f, 1.0, KernelRoute::Direct, &full_period_xi_grid(32, 1.0).unwrap()).unwrap();
        assert!((k.hs_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_overlap_closed_form() {
        let spec = default_spec();
        let f = gaussian(&spec, 0.0, 0.0);
        let g = gaussian(&spec, 1.0, 0.0);
        let kf = weyl_kernel(&f, 1.0).unwrap();
        let kg = weyl_kernel(&g, 1.0).unwrap();
        let v = hs_inner(&kf, &kg).unwrap();
        let expect = (-PI / 2.0).exp() / 2.0;
        assert!((v.re - expect).abs() < 1e-9 && v.im.abs() < 1e-9, "{v}");
        assert!((inner_product(&f, &g).unwrap().re - expect).abs() < 1e-12);
        assert!(hs_inner(&kf, &kf).unwrap().re > 0.0);
    }

    #[test]
    fn scaling_plancherel_holds() {
        let cert = verify_scaling_plancherel(&default_spec(), &[-1.0, -0.5, 0.5, 1.0, 2.0], 1e-4).unwrap();
        assert!(cert.passed(), "{cert:?}");
        cert.require().unwrap();
        assert!(cert.max_rel_error() < 1e-8);
    }

    #[test]
    fn kernel_inversion_round_trips() {
        let spec = default_spec();
        let g = gaussian(&spec, 0.0, 0.0);
        let back = kernel_to_function(&weyl_kernel(&g, 1.0).unwrap()).unwrap();
        assert!(back.max_abs_diff(&g).unwrap() < 1e-6);

        let sq = unit_square();
        let xi = full_period_xi_grid(32, 1.0).unwrap();
        let k = weyl_kernel_on(&sq, 1.0, KernelRoute::Direct, &xi).unwrap();
        let back = kernel_to_function(&k).unwrap();
        assert!(back.max_abs_diff(&sq).unwrap() < 1e-2);

        let z = SampledFunction::zeros(spec);
        let kz = weyl_kernel(&z, 1.0).unwrap();
        assert!(kz.is_zero());
        assert!(kernel_to_function(&kz).unwrap().is_zero());
    }

    #[test]
    fn homomorphism_on_lattice_grid() {
        let a = make_grid(4.0, 16, false).unwrap();
        let spec = GridSpec::phase_plane(a, a);
        let f = gaussian(&spec, 0.0, 0.0);
        let g = sample_separable(vec![Factor1D::gaussian(2.0), Factor1D::gaussian(4.0)], spec.clone()).unwrap();
        let fg = twisted_convolution(&f, &g).unwrap();
        let inner = make_grid(4.0, 16, false).unwrap();
        let outer = make_grid(8.0, 16, false).unwrap();
        let kfg = weyl_kernel_on(&fg, 1.0, KernelRoute::Direct, &inner).unwrap();
        let kf = weyl_kernel_on(&f, 1.0, KernelRoute::Direct, &inner).unwrap();
        let kg = weyl_kernel_on(&g, 1.0, KernelRoute::Direct, &outer).unwrap();
        let comp = compose(&kf, &kg).unwrap();
        let err = kfg.sub(&comp).unwrap().hs_norm_sq().sqrt();
        let scale = (kf.hs_norm_sq() * kg.hs_norm_sq()).sqrt();
        assert!(err <= 1e-4 * scale, "{err} vs {scale}");

        let z = SampledFunction::zeros(spec.clone());
        assert!(twisted_convolution(&f, &z).unwrap().is_zero());

        let gs = gaussian(&spec, 1.0, 0.0);
        let d1 = twisted_convolution(&f, &gs).unwrap();
        let d2 = twisted_convolution(&gs, &f).unwrap();
        assert!(d1.max_abs_diff(&d2).unwrap() > 1e-3);
    }

    #[test]
    fn midpoint_grids_refuse_convolution() {
        let f = unit_square();
        assert!(matches!(twisted_convolution(&f, &f), Err(Error::GridMisalignment(_))));
    }

    #[test]
    fn restrict_and_csv() {
        let f = unit_square();
        let k = weyl_kernel(&f, 1.0).unwrap();
        let sub = k.restrict_xi(&make_grid(1.0, 32, false).unwrap()).unwrap();
        let a = k.xi_grid().index_of(0.5).unwrap();
        let b = sub.xi_grid().index_of(0.5).unwrap();
        assert_eq!(k.row(a), sub.row(b));
        assert!(k.restrict_xi(&make_grid(32.0, 32, false).unwrap()).is_err());
        let dir = std::env::temp_dir().join(format!("twistframe-k-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("k.csv");
        sub.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("xi,eta,re,im\n"));
        assert_eq!(text.lines().count(), 1 + sub.values().len());
        assert!(sub.sidecar_json().unwrap().contains("lambda"));
    }
}
