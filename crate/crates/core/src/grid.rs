//! Uniform grids, sampled functions and a small library of analytic 1-D factors.
//!
//! Grid points are stored as integer numerators over `2q`, so that integer
//! shifts and half-cell offsets are exact index arithmetic.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e^{iθ}`.
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// `e^{iπ p/den}` with the angle reduced modulo `2π` in integer arithmetic.
#[inline]
pub fn pi_phase(p: i64, den: i64) -> Complex64 {
    let r = p.rem_euclid(2 * den);
    cis(PI * r as f64 / den as f64)
}

/// Normalized sinc, `sin(πx)/(πx)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// One axis of a uniform grid on `[-L, L)`: `N = 2Lq` samples with spacing `1/q`,
/// optionally shifted by half a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisGrid {
    /// `L·q`, the number of cells in `[0, L)`.
    cells: i64,
    q: u32,
    midpoint: bool,
}

impl AxisGrid {
    pub fn new(half_width: f64, q: u32, midpoint: bool) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidGrid("samples_per_unit must be positive".into()));
        }
        let lq = half_width * q as f64;
        let cells = lq.round();
        if half_width.is_nan() || half_width <= 0.0 || (lq - cells).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "half_width {half_width} times q {q} is not a positive integer"
            )));
        }
        Ok(Self {
            cells: cells as i64,
            q,
            midpoint,
        })
    }

    pub fn from_cells(cells: i64, q: u32, midpoint: bool) -> Result<Self> {
        Self::new(cells as f64 / q as f64, q, midpoint)
    }

    pub fn half_width(&self) -> f64 {
        self.cells as f64 / self.q as f64
    }

    pub fn samples_per_unit(&self) -> u32 {
        self.q
    }

    pub fn is_midpoint(&self) -> bool {
        self.midpoint
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn offset(&self) -> f64 {
        if self.midpoint {
            0.5 * self.spacing()
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        (2 * self.cells) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    /// Denominator used by [`AxisGrid::numer`].
    pub fn denom(&self) -> i64 {
        2 * self.q as i64
    }

    /// Grid point `j` times `2q`, as an exact integer.
    #[inline]
    pub fn numer(&self, j: usize) -> i64 {
        2 * (j as i64 - self.cells) + self.midpoint as i64
    }

    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        self.numer(j) as f64 / self.denom() as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }

    pub fn index_of_numer(&self, n: i64) -> Option<usize> {
        let rel = n - self.midpoint as i64;
        if rel.rem_euclid(2) != 0 {
            return None;
        }
        let j = rel / 2 + self.cells;
        (0..self.len() as i64).contains(&j).then_some(j as usize)
    }

    /// Index of the grid point equal to `x`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let n = x * self.denom() as f64;
        let r = n.round();
        if (n - r).abs() > 1e-7 {
            return None;
        }
        self.index_of_numer(r as i64)
    }

    /// Index of `point(j) - units` (an integer shift is `units·q` cells).
    #[inline]
    pub fn shifted_index(&self, j: usize, units: i64) -> Option<usize> {
        let t = j as i64 - units * self.q as i64;
        (0..self.len() as i64).contains(&t).then_some(t as usize)
    }

    /// Same spacing and offset, so that points of one are points of the other's lattice.
    pub fn is_aligned_with(&self, other: &AxisGrid) -> bool {
        self.q == other.q && self.midpoint == other.midpoint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisRole {
    Line,
    PhasePlane,
    Group,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    axes: Vec<AxisGrid>,
    role: AxisRole,
}

impl GridSpec {
    pub fn line(x: AxisGrid) -> Self {
        Self {
            axes: vec![x],
            role: AxisRole::Line,
        }
    }

    pub fn phase_plane(x: AxisGrid, y: AxisGrid) -> Self {
        Self {
            axes: vec![x, y],
            role: AxisRole::PhasePlane,
        }
    }

    pub fn group(x: AxisGrid, y: AxisGrid, t: AxisGrid) -> Self {
        Self {
            axes: vec![x, y, t],
            role: AxisRole::Group,
        }
    }

    /// `[-8, 8)²` at 32 samples per unit, midpoint placement.
    pub fn default_phase_plane() -> Self {
        let a = AxisGrid::new(8.0, 32, true).expect("static grid");
        Self::phase_plane(a, a)
    }

    /// `[-4, 4)` at 16 samples per unit, midpoint placement.
    pub fn default_t_axis() -> AxisGrid {
        AxisGrid::new(4.0, 16, true).expect("static grid")
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &AxisGrid {
        &self.axes[i]
    }

    pub fn role(&self) -> AxisRole {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(AxisGrid::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(AxisGrid::spacing).product()
    }

    pub fn require_phase_plane(&self) -> Result<()> {
        match self.role {
            AxisRole::PhasePlane => Ok(()),
            AxisRole::Line => Err(Error::NotPhasePlane("line")),
            AxisRole::Group => Err(Error::NotPhasePlane("group")),
        }
    }
}

/// A 1-D factor with closed-form evaluation and, for most kinds, a closed-form
/// Fourier transform `∫ f(x) e^{-2πixω} dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Factor1D {
    /// `χ_[a,b)`.
    Indicator { a: f64, b: f64 },
    /// `e^{-αx²}`.
    Gaussian { alpha: f64 },
    /// `sin(πx)/(πx)`.
    Sinc,
    /// `e^{-|x|}`.
    AbsExp,
    /// `e^{-1/((x-a)(b-x))}` on `(a, b)`.
    Bump { a: f64, b: f64 },
    /// `Σ_{n ≤ n_max} (n+1)^{-1} χ_[2n, 2n+1)`.
    StepDecay { n_max: u32 },
    /// `x ↦ inner(x - by)`.
    Shift { inner: Box<Factor1D>, by: f64 },
    /// `x ↦ e^{2πi·freq·x} inner(x)`.
    Modulate { inner: Box<Factor1D>, freq: f64 },
    /// `x ↦ Σ_n c_n inner(x - n·step)`.
    LatticeSum {
        inner: Box<Factor1D>,
        step: f64,
        coeffs: Vec<(i64, Complex64)>,
    },
}

impl Factor1D {
    pub fn indicator(a: f64, b: f64) -> Self {
        Factor1D::Indicator { a, b }
    }

    pub fn gaussian(alpha: f64) -> Self {
        Factor1D::Gaussian { alpha }
    }

    pub fn bump(a: f64, b: f64) -> Self {
        Factor1D::Bump { a, b }
    }

    /// Step factor truncated to the pieces that fit in `[-L, L)`.
    pub fn step_decay_for_box(half_width: f64) -> Self {
        let n_max = ((half_width - 1.0) / 2.0).floor().max(0.0) as u32;
        Factor1D::StepDecay { n_max }
    }

    pub fn shifted(&self, by: f64) -> Self {
        if by == 0.0 {
            return self.clone();
        }
        match self {
            Factor1D::Shift { inner, by: b0 } => inner.shifted(b0 + by),
            _ => Factor1D::Shift {
                inner: Box::new(self.clone()),
                by,
            },
        }
    }

    pub fn modulated(&self, freq: f64) -> Self {
        if freq == 0.0 {
            return self.clone();
        }
        match self {
            Factor1D::Modulate { inner, freq: f0 } => inner.modulated(f0 + freq),
            _ => Factor1D::Modulate {
                inner: Box::new(self.clone()),
                freq,
            },
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Factor1D::Modulate { inner, freq } => cis(2.0 * PI * freq * x) * inner.eval(x),
            Factor1D::Shift { inner, by } => inner.eval(x - by),
            Factor1D::LatticeSum {
                inner,
                step,
                coeffs,
            } => coeffs
                .iter()
                .map(|&(n, c)| c * inner.eval(x - n as f64 * step))
                .sum(),
            _ => Complex64::new(self.eval_real(x), 0.0),
        }
    }

    fn eval_real(&self, x: f64) -> f64 {
        match *self {
            Factor1D::Indicator { a, b } => (a <= x && x < b) as u8 as f64,
            Factor1D::Gaussian { alpha } => (-alpha * x * x).exp(),
            Factor1D::Sinc => sinc(x),
            Factor1D::AbsExp => (-x.abs()).exp(),
            Factor1D::Bump { a, b } => {
                if a < x && x < b {
                    (-1.0 / ((x - a) * (b - x))).exp()
                } else {
                    0.0
                }
            }
            Factor1D::StepDecay { n_max } => {
                if x < 0.0 {
                    return 0.0;
                }
                let n = (x / 2.0).floor();
                if n as u32 <= n_max && x < 2.0 * n + 1.0 {
                    1.0 / (n + 1.0)
                } else {
                    0.0
                }
            }
            _ => unreachable!("complex-valued kinds handled in eval"),
        }
    }

    /// True when [`Factor1D::fourier`] is a closed form rather than a reference quadrature.
    pub fn has_closed_form_ft(&self) -> bool {
        match self {
            Factor1D::Bump { .. } => false,
            Factor1D::Shift { inner, .. }
            | Factor1D::Modulate { inner, .. }
            | Factor1D::LatticeSum { inner, .. } => inner.has_closed_form_ft(),
            _ => true,
        }
    }

    /// `∫ f(x) e^{-2πixω} dx`. Closed form for every kind except the bump, which
    /// uses a 64-panel Gauss–Legendre reference quadrature on its support.
    pub fn fourier(&self, omega: f64) -> Complex64 {
        match self {
            Factor1D::Indicator { a, b } => indicator_ft(*a, *b, omega),
            Factor1D::Gaussian { alpha } => Complex64::new(
                (PI / alpha).sqrt() * (-PI * PI * omega * omega / alpha).exp(),
                0.0,
            ),
            Factor1D::Sinc => {
                let w = omega.abs();
                let v = if w < 0.5 {
                    1.0
                } else if w == 0.5 {
                    0.5
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            }
            Factor1D::AbsExp => Complex64::new(2.0 / (1.0 + 4.0 * PI * PI * omega * omega), 0.0),
            Factor1D::Bump { a, b } => bump_ft_reference(*a, *b, omega),
            Factor1D::StepDecay { n_max } => (0..=*n_max)
                .map(|n| {
                    let a = 2.0 * n as f64;
                    indicator_ft(a, a + 1.0, omega) / (n as f64 + 1.0)
                })
                .sum(),
            Factor1D::Shift { inner, by } => cis(-2.0 * PI * by * omega) * inner.fourier(omega),
            Factor1D::Modulate { inner, freq } => inner.fourier(omega - freq),
            Factor1D::LatticeSum {
                inner,
                step,
                coeffs,
            } => {
                let m: Complex64 = coeffs
                    .iter()
                    .map(|&(n, c)| c * cis(-2.0 * PI * n as f64 * step * omega))
                    .sum();
                m * inner.fourier(omega)
            }
        }
    }

    /// Smallest interval containing the support, or `None` when unbounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Factor1D::Indicator { a, b } | Factor1D::Bump { a, b } => Some((*a, *b)),
            Factor1D::StepDecay { n_max } => Some((0.0, 2.0 * *n_max as f64 + 1.0)),
            Factor1D::Gaussian { .. } | Factor1D::Sinc | Factor1D::AbsExp => None,
            Factor1D::Shift { inner, by } => inner.support().map(|(a, b)| (a + by, b + by)),
            Factor1D::Modulate { inner, .. } => inner.support(),
            Factor1D::LatticeSum {
                inner,
                step,
                coeffs,
            } => {
                let (a, b) = inner.support()?;
                let lo = coeffs.iter().map(|&(n, _)| n as f64 * step).fold(f64::INFINITY, f64::min);
                let hi = coeffs
                    .iter()
                    .map(|&(n, _)| n as f64 * step)
                    .fold(f64::NEG_INFINITY, f64::max);
                coeffs.first().map(|_| (a + lo, b + hi))
            }
        }
    }

    /// `‖f‖²` in closed form, where one is known.
    pub fn norm_sq_exact(&self) -> Option<f64> {
        match self {
            Factor1D::Indicator { a, b } => Some(b - a),
            Factor1D::Gaussian { alpha } => Some((PI / (2.0 * alpha)).sqrt()),
            Factor1D::Sinc | Factor1D::AbsExp => Some(1.0),
            Factor1D::StepDecay { n_max } => {
                Some((0..=*n_max).map(|n| 1.0 / ((n + 1) as f64).powi(2)).sum())
            }
            Factor1D::Shift { inner, .. } | Factor1D::Modulate { inner, .. } => {
                inner.norm_sq_exact()
            }
            _ => None,
        }
    }

    /// Upper estimate of `∫_{|x|>L} |f|²`.
    pub fn tail_mass(&self, half_width: f64) -> f64 {
        let l = half_width;
        match self {
            Factor1D::Gaussian { alpha } => (-2.0 * alpha * l * l).exp() / (2.0 * alpha * l),
            Factor1D::Sinc => 2.0 / (PI * PI * l),
            Factor1D::AbsExp => (-2.0 * l).exp(),
            Factor1D::Shift { inner, by } => inner.tail_mass((l - by.abs()).max(1e-3)),
            Factor1D::Modulate { inner, .. } => inner.tail_mass(l),
            Factor1D::LatticeSum {
                inner,
                step,
                coeffs,
            } => {
                let reach = coeffs
                    .iter()
                    .map(|&(n, _)| (n as f64 * step).abs())
                    .fold(0.0, f64::max);
                let weight: f64 = coeffs.iter().map(|(_, c)| c.norm()).sum();
                weight * weight * inner.tail_mass((l - reach).max(1e-3))
            }
            _ => match self.support() {
                Some((a, b)) if a >= -l && b <= l => 0.0,
                Some((a, b)) => (b.min(f64::MAX) - a).max(0.0),
                None => f64::INFINITY,
            },
        }
    }

    /// A frequency `Ω` with `∫_{|ω|>Ω} |f̂|² ≲ tol·‖f‖²`.
    pub fn bandwidth(&self, tol: f64) -> f64 {
        let tol = tol.clamp(1e-300, 0.5);
        match self {
            Factor1D::Indicator { a, b } => 1.0 / (PI * PI * tol * (b - a)),
            Factor1D::StepDecay { .. } => 1.0 / (PI * PI * tol),
            Factor1D::Gaussian { alpha } => (alpha * (1.0 / tol).ln() / (2.0 * PI * PI)).sqrt() + 0.5,
            Factor1D::Sinc => 0.5,
            Factor1D::AbsExp => (1.0 / (6.0 * PI.powi(4) * tol)).cbrt(),
            Factor1D::Bump { a, b } => 64.0 / (b - a),
            Factor1D::Shift { inner, .. } | Factor1D::LatticeSum { inner, .. } => {
                inner.bandwidth(tol)
            }
            Factor1D::Modulate { inner, freq } => inner.bandwidth(tol) + freq.abs(),
        }
    }

    /// Pieces `(weight, a, b)` when the factor is a finite combination of indicators.
    fn indicator_pieces(&self) -> Option<Vec<(f64, f64, f64)>> {
        match *self {
            Factor1D::Indicator { a, b } => Some(vec![(1.0, a, b)]),
            Factor1D::StepDecay { n_max } => Some(
                (0..=n_max)
                    .map(|n| {
                        let a = 2.0 * n as f64;
                        (1.0 / (n as f64 + 1.0), a, a + 1.0)
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Closed-form cross-correlation `∫ f(u) conj(g(u - s)) du`, where one is known.
    pub fn correlation(&self, other: &Factor1D, s: f64) -> Option<Complex64> {
        use Factor1D::*;
        match (self, other) {
            (Shift { inner, by }, _) => inner.correlation(other, s - by),
            (_, Shift { inner, by }) => self.correlation(inner, s + by),
            (
                LatticeSum {
                    inner,
                    step,
                    coeffs,
                },
                _,
            ) => coeffs
                .iter()
                .map(|&(n, c)| inner.correlation(other, s - n as f64 * step).map(|v| c * v))
                .sum(),
            (
                _,
                LatticeSum {
                    inner,
                    step,
                    coeffs,
                },
            ) => coeffs
                .iter()
                .map(|&(n, c)| {
                    self.correlation(inner, s + n as f64 * step)
                        .map(|v| c.conj() * v)
                })
                .sum(),
            (Gaussian { alpha }, Gaussian { alpha: beta }) => {
                let sum = alpha + beta;
                Some(Complex64::new(
                    (PI / sum).sqrt() * (-alpha * beta * s * s / sum).exp(),
                    0.0,
                ))
            }
            (Sinc, Sinc) => Some(Complex64::new(sinc(s), 0.0)),
            (AbsExp, AbsExp) => Some(Complex64::new((1.0 + s.abs()) * (-s.abs()).exp(), 0.0)),
            _ => {
                let p = self.indicator_pieces()?;
                let q = other.indicator_pieces()?;
                let mut acc = 0.0;
                for &(w1, a1, b1) in &p {
                    for &(w2, a2, b2) in &q {
                        let lo = a1.max(a2 + s);
                        let hi = b1.min(b2 + s);
                        if hi > lo {
                            acc += w1 * w2 * (hi - lo);
                        }
                    }
                }
                Some(Complex64::new(acc, 0.0))
            }
        }
    }

    /// Cross-correlation by quadrature on `axis`; fallback when no closed form exists.
    pub fn correlation_on(&self, other: &Factor1D, s: f64, axis: &AxisGrid) -> Complex64 {
        let h = axis.spacing();
        (0..axis.len())
            .map(|j| {
                let u = axis.point(j);
                self.eval(u) * other.eval(u - s).conj()
            })
            .sum::<Complex64>()
            * h
    }

    /// Fourier transform by midpoint/rectangle quadrature on `axis`.
    pub fn fourier_on(&self, axis: &AxisGrid, omega: f64) -> Complex64 {
        let h = axis.spacing();
        (0..axis.len())
            .map(|j| {
                let x = axis.point(j);
                self.eval(x) * cis(-2.0 * PI * x * omega)
            })
            .sum::<Complex64>()
            * h
    }

    pub fn samples_on(&self, axis: &AxisGrid) -> Vec<Complex64> {
        (0..axis.len()).map(|j| self.eval(axis.point(j))).collect()
    }
}

fn indicator_ft(a: f64, b: f64, omega: f64) -> Complex64 {
    let d = b - a;
    cis(-PI * (a + b) * omega) * (d * sinc(d * omega))
}

fn bump_ft_reference(a: f64, b: f64, omega: f64) -> Complex64 {
    const PANELS: usize = 64;
    let (nodes, weights) = gauss_legendre_16();
    let width = (b - a) / PANELS as f64;
    let f = Factor1D::Bump { a, b };
    let mut acc = ZERO;
    for p in 0..PANELS {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (t, w) in nodes.iter().zip(weights.iter()) {
            let x = mid + 0.5 * width * t;
            acc += f.eval(x) * cis(-2.0 * PI * x * omega) * (w * 0.5 * width);
        }
    }
    acc
}

/// 16-point Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_16`).
fn gauss_legendre_16() -> (Vec<f64>, Vec<f64>) {
    const N: usize = 16;
    let mut nodes = Vec::with_capacity(N);
    let mut weights = Vec::with_capacity(N);
    for i in 0..N {
        let mut x = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=N {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `coeff · Π_d factors[d](x_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub coeff: Complex64,
    pub factors: Vec<Factor1D>,
}

impl SeparableTerm {
    pub fn new(coeff: Complex64, factors: Vec<Factor1D>) -> Self {
        Self { coeff, factors }
    }

    pub fn eval(&self, point: &[f64]) -> Complex64 {
        self.factors
            .iter()
            .zip(point)
            .fold(self.coeff, |acc, (f, &x)| acc * f.eval(x))
    }
}

/// Complex samples on a grid, row-major in axis order, with optional metadata
/// describing the function as a finite sum of separable terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    spec: GridSpec,
    values: Vec<Complex64>,
    terms: Option<Vec<SeparableTerm>>,
}

impl SampledFunction {
    pub fn from_values(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            spec,
            values,
            terms: None,
        })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            values: vec![ZERO; n],
            terms: Some(Vec::new()),
        }
    }

    /// Samples a finite sum of separable terms.
    pub fn from_terms(spec: GridSpec, terms: Vec<SeparableTerm>) -> Result<Self> {
        let dim = spec.dim();
        for t in &terms {
            if t.factors.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: t.factors.len(),
                });
            }
        }
        let mut values = vec![ZERO; spec.len()];
        for t in &terms {
            let axis_samples: Vec<Vec<Complex64>> = t
                .factors
                .iter()
                .zip(spec.axes())
                .map(|(f, a)| f.samples_on(a))
                .collect();
            accumulate_outer(&mut values, t.coeff, &axis_samples);
        }
        Ok(Self {
            spec,
            values,
            terms: Some(terms),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn terms(&self) -> Option<&[SeparableTerm]> {
        self.terms.as_deref()
    }

    pub(crate) fn from_parts_unchecked(
        spec: GridSpec,
        values: Vec<Complex64>,
        terms: Option<Vec<SeparableTerm>>,
    ) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self {
            spec,
            values,
            terms,
        }
    }

    /// Drops the separable metadata, forcing sample-based routes downstream.
    pub fn without_terms(mut self) -> Self {
        self.terms = None;
        self
    }

    /// Phase-plane sample at `(x_i, y_j)`.
    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.spec.axis(1).len() + j]
    }

    /// Exact evaluation from the separable metadata.
    pub fn eval_exact(&self, point: &[f64]) -> Option<Complex64> {
        self.terms
            .as_ref()
            .map(|ts| ts.iter().map(|t| t.eval(point)).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        inner_product(self, self).map(|z| z.re).unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            terms: self.terms.as_ref().map(|ts| {
                ts.iter()
                    .map(|t| SeparableTerm::new(t.coeff * c, t.factors.clone()))
                    .collect()
            }),
        }
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        let terms = match (&self.terms, &other.terms) {
            (Some(a), Some(b)) => Some(a.iter().chain(b.iter()).cloned().collect()),
            _ => None,
        };
        Ok(Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            terms,
        })
    }

    /// Accumulates `c·other` into `self`.
    pub fn axpy(&mut self, c: Complex64, other: &SampledFunction) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        self.terms = match (self.terms.take(), &other.terms) {
            (Some(mut a), Some(b)) => {
                a.extend(
                    b.iter()
                        .map(|t| SeparableTerm::new(t.coeff * c, t.factors.clone())),
                );
                Some(a)
            }
            _ => None,
        };
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &SampledFunction) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Index bounding box `(i0..i1, j0..j1)` of nonzero phase-plane samples.
    pub fn support_box(&self) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let ny = self.spec.axis(1).len();
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for (n, v) in self.values.iter().enumerate() {
            if *v != ZERO {
                let (i, j) = (n / ny, n % ny);
                bounds = Some(match bounds {
                    None => (i, i, j, j),
                    Some((a, b, c, d)) => (a.min(i), b.max(i), c.min(j), d.max(j)),
                });
            }
        }
        bounds.map(|(a, b, c, d)| (a..b + 1, c..d + 1))
    }
}

fn accumulate_outer(values: &mut [Complex64], coeff: Complex64, axis_samples: &[Vec<Complex64>]) {
    match axis_samples.len() {
        1 => {
            for (v, a) in values.iter_mut().zip(&axis_samples[0]) {
                *v += coeff * a;
            }
        }
        2 => {
            let (xs, ys) = (&axis_samples[0], &axis_samples[1]);
            let ny = ys.len();
            for (i, xv) in xs.iter().enumerate() {
                if *xv == ZERO {
                    continue;
                }
                let c = coeff * xv;
                for (v, yv) in values[i * ny..(i + 1) * ny].iter_mut().zip(ys) {
                    *v += c * yv;
                }
            }
        }
        _ => {
            let inner: usize = axis_samples[1..].iter().map(Vec::len).product();
            let mut rest = vec![ZERO; inner];
            accumulate_outer(&mut rest, Complex64::new(1.0, 0.0), &axis_samples[1..]);
            for (i, xv) in axis_samples[0].iter().enumerate() {
                let c = coeff * xv;
                for (v, r) in values[i * inner..(i + 1) * inner].iter_mut().zip(&rest) {
                    *v += c * r;
                }
            }
        }
    }
}

pub fn make_grid(half_width: f64, q: u32, midpoint: bool) -> Result<AxisGrid> {
    AxisGrid::new(half_width, q, midpoint)
}

pub fn sample_separable(factors: Vec<Factor1D>, spec: GridSpec) -> Result<SampledFunction> {
    SampledFunction::from_terms(spec, vec![SeparableTerm::new(Complex64::new(1.0, 0.0), factors)])
}

const SEPARABLE_PAIR_LIMIT: usize = 256;

/// `Σ f·conj(g)·(cell volume)`.
///
/// When both functions carry separable metadata the sum is evaluated axis by axis;
/// this is the same finite sum reordered.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<Complex64> {
    if f.spec != g.spec {
        return Err(Error::SpecMismatch);
    }
    if let (Some(tf), Some(tg)) = (&f.terms, &g.terms) {
        if tf.len() * tg.len() <= SEPARABLE_PAIR_LIMIT {
            return Ok(separable_inner(&f.spec, tf, tg));
        }
    }
    Ok(sampled_inner(&f.spec, &f.values, &g.values))
}

/// Sample-by-sample quadrature, ignoring metadata.
pub fn inner_product_sampled(f: &SampledFunction, g: &SampledFunction) -> Result<Complex64> {
    if f.spec != g.spec {
        return Err(Error::SpecMismatch);
    }
    Ok(sampled_inner(&f.spec, &f.values, &g.values))
}

fn sampled_inner(spec: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let row = spec.axes().last().map(AxisGrid::len).unwrap_or(1);
    let partial: Vec<Complex64> = a
        .par_chunks(row)
        .zip(b.par_chunks(row))
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum())
        .collect();
    partial.into_iter().sum::<Complex64>() * spec.cell_volume()
}

fn separable_inner(spec: &GridSpec, tf: &[SeparableTerm], tg: &[SeparableTerm]) -> Complex64 {
    let sf: Vec<Vec<Vec<Complex64>>> = tf
        .iter()
        .map(|t| t.factors.iter().zip(spec.axes()).map(|(f, a)| f.samples_on(a)).collect())
        .collect();
    let sg: Vec<Vec<Vec<Complex64>>> = tg
        .iter()
        .map(|t| t.factors.iter().zip(spec.axes()).map(|(f, a)| f.samples_on(a)).collect())
        .collect();
    let mut acc = ZERO;
    for (t1, s1) in tf.iter().zip(&sf) {
        for (t2, s2) in tg.iter().zip(&sg) {
            let mut prod = t1.coeff * t2.coeff.conj();
            for (d, axis) in spec.axes().iter().enumerate() {
                let dot: Complex64 = s1[d].iter().zip(&s2[d]).map(|(u, v)| u * v.conj()).sum();
                prod *= dot * axis.spacing();
            }
            acc += prod;
        }
    }
    acc
}

/// `∫ f(x) e^{-2πixω} dx` for a function on a line grid. Closed-form factor
/// transforms are used when the metadata allows it.
pub fn fourier_1d(f: &SampledFunction, omega: f64) -> Result<Complex64> {
    if f.spec.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.spec.dim(),
        });
    }
    let axis = f.spec.axis(0);
    if let Some(terms) = &f.terms {
        let tail: f64 = terms.iter().map(|t| t.factors[0].tail_mass(axis.half_width())).sum();
        if tail > 1e-6 {
            log::warn!("fourier_1d: box [-{0}, {0}) truncates tail mass {tail:.2e}", axis.half_width());
        }
        return Ok(terms.iter().map(|t| t.coeff * t.factors[0].fourier(omega)).sum());
    }
    Ok(fourier_1d_quadrature(f, omega))
}

pub fn fourier_1d_quadrature(f: &SampledFunction, omega: f64) -> Complex64 {
    let axis = f.spec.axis(0);
    f.values
        .iter()
        .enumerate()
        .map(|(j, v)| v * cis(-2.0 * PI * axis.point(j) * omega))
        .sum::<Complex64>()
        * axis.spacing()
}
