//! Twisted translations `T_{(k,l)}φ(x,y) = e^{πi(xl − yk)} φ(x−k, y−l)`, their action
//! on Weyl kernels, Gram sections, and finite synthesis with fiber symbols.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::GramSection;
use crate::grid::{cis, pi_phase, AxisGrid, SampledFunction, SeparableTerm, ZERO};
use crate::spectral::{ConditionCReport, WeightSamples};
use crate::weyl::{KernelEval, KernelMatrix, KernelRoute, KernelSource};

/// Default cap on the number of indices in a Gram window.
pub const DEFAULT_WINDOW_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub k: i64,
    pub l: i64,
}

impl LatticeIndex {
    pub const ZERO: LatticeIndex = LatticeIndex { k: 0, l: 0 };

    pub fn new(k: i64, l: i64) -> Self {
        Self { k, l }
    }

    /// All indices with `|k|, |l| ≤ r`, lexicographic.
    pub fn window(r: i64) -> Vec<LatticeIndex> {
        (-r..=r)
            .flat_map(|k| (-r..=r).map(move |l| LatticeIndex { k, l }))
            .collect()
    }
}

/// The multiplier in `T_a T_b = e^{πi(l_a k_b − k_a l_b)} T_{a+b}`.
pub fn composition_phase(a: LatticeIndex, b: LatticeIndex) -> Complex64 {
    pi_phase(a.l * b.k - a.k * b.l, 1)
}

/// Finitely supported coefficients `c_{k,l}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    coeffs: BTreeMap<LatticeIndex, Complex64>,
}

impl CoefficientField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(idx: LatticeIndex, c: Complex64) -> Self {
        let mut f = Self::new();
        f.insert(idx, c);
        f
    }

    pub fn insert(&mut self, idx: LatticeIndex, c: Complex64) {
        self.coeffs.insert(idx, c);
    }

    pub fn get(&self, idx: &LatticeIndex) -> Complex64 {
        self.coeffs.get(idx).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Restriction to the indices accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&LatticeIndex) -> bool) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(i, _)| keep(i))
                .map(|(i, c)| (*i, *c))
                .collect(),
        }
    }
}

/// Samples of `ρ_l(ξ) = Σ_k c_{k,l} e^{πilk} e^{2πikξ}` on the torus grid `ξ_t = t/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSymbol {
    q: u32,
    coeffs: BTreeMap<i64, Vec<(i64, Complex64)>>,
    samples: BTreeMap<i64, Vec<Complex64>>,
}

impl FiberSymbol {
    pub fn from_coefficients(c: &CoefficientField, q: u32) -> Self {
        let mut coeffs: BTreeMap<i64, Vec<(i64, Complex64)>> = BTreeMap::new();
        for (idx, v) in c.iter() {
            coeffs.entry(idx.l).or_default().push((idx.k, *v));
        }
        let samples = coeffs
            .iter()
            .map(|(&l, ks)| (l, (0..q as i64).map(|t| eval_on_grid(ks, l, t, q)).collect()))
            .collect();
        Self { q, coeffs, samples }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn ls(&self) -> impl Iterator<Item = i64> + '_ {
        self.samples.keys().copied()
    }

    pub fn samples(&self, l: i64) -> Option<&[Complex64]> {
        self.samples.get(&l).map(Vec::as_slice)
    }

    /// `ρ_l(ξ)` at any real `ξ`.
    pub fn eval(&self, l: i64, xi: f64) -> Complex64 {
        self.coeffs
            .get(&l)
            .map(|ks| {
                ks.iter()
                    .map(|&(k, c)| c * pi_phase(l * k, 1) * cis(2.0 * PI * k as f64 * xi))
                    .sum()
            })
            .unwrap_or(ZERO)
    }

    /// Recomputes every stored sample from the coefficients and compares bitwise.
    pub fn is_consistent(&self) -> bool {
        self.coeffs.iter().all(|(&l, ks)| {
            let s = &self.samples[&l];
            (0..self.q as i64).all(|t| eval_on_grid(ks, l, t, self.q) == s[t as usize])
        })
    }
}

fn eval_on_grid(ks: &[(i64, Complex64)], l: i64, t: i64, q: u32) -> Complex64 {
    let q = q as i64;
    ks.iter()
        .map(|&(k, c)| c * pi_phase(l * k * q + 2 * k * t, q))
        .sum()
}

fn translate_terms(terms: &[SeparableTerm], idx: LatticeIndex) -> Vec<SeparableTerm> {
    let (k, l) = (idx.k as f64, idx.l as f64);
    terms
        .iter()
        .map(|t| {
            SeparableTerm::new(
                t.coeff,
                vec![
                    t.factors[0].shifted(k).modulated(l / 2.0),
                    t.factors[1].shifted(l).modulated(-k / 2.0),
                ],
            )
        })
        .collect()
}

/// `T_{(k,l)}φ` by exact index shift and exact rational phases.
pub fn twisted_translate(phi: &SampledFunction, idx: LatticeIndex) -> Result<SampledFunction> {
    let spec = phi.spec();
    spec.require_phase_plane()?;
    if idx == LatticeIndex::ZERO {
        return Ok(phi.clone());
    }
    let (ax, ay) = (*spec.axis(0), *spec.axis(1));
    let (nx, ny) = (ax.len(), ay.len());
    let (dx, dy) = (ax.denom(), ay.denom());
    let src = phi.values();
    let mut values = vec![ZERO; nx * ny];
    values.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let Some(si) = ax.shifted_index(i, idx.k) else {
            return;
        };
        let xn = ax.numer(i);
        for (j, out) in row.iter_mut().enumerate() {
            if let Some(sj) = ay.shifted_index(j, idx.l) {
                let v = src[si * ny + sj];
                if v != ZERO {
                    // x·l − y·k with x = xn/dx, y = yn/dy
                    let p = xn * idx.l * dy - ay.numer(j) * idx.k * dx;
                    *out = v * pi_phase(p, dx * dy);
                }
            }
        }
    });
    if let Some((ri, rj)) = phi.support_box() {
        let fits = |r: &std::ops::Range<usize>, shift: i64, q: u32, n: usize| {
            let s = shift * q as i64;
            r.start as i64 + s >= 0 && r.end as i64 + s <= n as i64
        };
        if !fits(&ri, idx.k, ax.samples_per_unit(), nx) || !fits(&rj, idx.l, ay.samples_per_unit(), ny) {
            log::warn!("twisted_translate: support shifted by ({}, {}) leaves the box", idx.k, idx.l);
        }
    }
    let terms = phi.terms().map(|ts| translate_terms(ts, idx));
    Ok(SampledFunction::from_parts_unchecked(spec.clone(), values, terms))
}

/// Kernel of `T_{(k,l)}φ` from the kernel of `φ`:
/// `K_{Tφ}(ξ,η) = e^{πi(2ξ+l)k} K_φ(ξ+l, η)`, on the ξ-window shrunk by `|l|`.
pub fn kernel_of_translate(k_phi: &KernelMatrix, idx: LatticeIndex) -> Result<KernelMatrix> {
    let xi = k_phi.xi_grid();
    let cells = (xi.len() / 2) as i64 - idx.l.abs() * xi.samples_per_unit() as i64;
    if cells <= 0 {
        return Err(Error::GridMisalignment("ξ-window too narrow for the l-shift".into()));
    }
    let out = AxisGrid::from_cells(cells, xi.samples_per_unit(), false)?;
    kernel_of_translate_onto(k_phi, idx, &out)
}

/// As [`kernel_of_translate`], onto an explicit ξ-grid.
pub fn kernel_of_translate_onto(k_phi: &KernelMatrix, idx: LatticeIndex, out: &AxisGrid) -> Result<KernelMatrix> {
    if k_phi.lambda() != 1.0 {
        return Err(Error::GridMisalignment("kernel translation law holds at λ = 1".into()));
    }
    let (xi, lag) = (k_phi.xi_grid(), k_phi.lag_grid());
    if !out.is_aligned_with(xi) {
        return Err(Error::GridMisalignment("output ξ-grid not aligned with source".into()));
    }
    let den = xi.denom();
    let n = lag.len();
    let mut values = vec![ZERO; out.len() * n];
    let mut missing = false;
    for a in 0..out.len() {
        let num = out.numer(a);
        let Some(b) = xi.index_of_numer(num + idx.l * den) else {
            missing = true;
            break;
        };
        let phase = pi_phase((2 * num + idx.l * den) * idx.k, den);
        let src = k_phi.row(b);
        let row = &mut values[a * n..(a + 1) * n];
        for (j, o) in row.iter_mut().enumerate() {
            if let Some(sj) = lag.shifted_index(j, idx.l) {
                *o = phase * src[sj];
            }
        }
    }
    if missing {
        return Err(Error::GridMisalignment(format!(
            "ξ + {} falls outside the source ξ-grid",
            idx.l
        )));
    }
    KernelMatrix::from_values(1.0, *k_phi.x_axis(), *out, *lag, values)
}

/// `⟨T_dφ, φ⟩` in the space domain.
pub fn translate_autocorrelation(phi: &SampledFunction, d: LatticeIndex) -> Result<Complex64> {
    let spec = phi.spec();
    spec.require_phase_plane()?;
    let (ax, ay) = (*spec.axis(0), *spec.axis(1));
    let ny = ay.len();
    let Some((ri, rj)) = phi.support_box() else {
        return Ok(ZERO);
    };
    let (sx, sy) = (d.k * ax.samples_per_unit() as i64, d.l * ay.samples_per_unit() as i64);
    let lo_i = (ri.start as i64).max(ri.start as i64 + sx);
    let hi_i = (ri.end as i64).min(ri.end as i64 + sx);
    let lo_j = (rj.start as i64).max(rj.start as i64 + sy);
    let hi_j = (rj.end as i64).min(rj.end as i64 + sy);
    if lo_i >= hi_i || lo_j >= hi_j {
        return Ok(ZERO);
    }
    let (dx, dy) = (ax.denom(), ay.denom());
    let v = phi.values();
    let partial: Vec<Complex64> = (lo_i..hi_i)
        .into_par_iter()
        .map(|i| {
            let iu = i as usize;
            let si = (i - sx) as usize;
            let xn = ax.numer(iu);
            let mut acc = ZERO;
            for j in lo_j..hi_j {
                let ju = j as usize;
                let a = v[si * ny + (j - sy) as usize];
                let b = v[iu * ny + ju];
                if a != ZERO && b != ZERO {
                    let p = xn * d.l * dy - ay.numer(ju) * d.k * dx;
                    acc += a * pi_phase(p, dx * dy) * b.conj();
                }
            }
            acc
        })
        .collect();
    Ok(partial.into_iter().sum::<Complex64>() * spec.cell_volume())
}

/// Gram section `G_{ab} = ⟨T_bφ, T_aφ⟩` over `|k|, |l| ≤ r`, so that
/// `c*Gc = ‖Σ c_a T_aφ‖²`.
pub fn gram_matrix(phi: &SampledFunction, r: u32, cap: usize) -> Result<GramSection<LatticeIndex>> {
    let idx = LatticeIndex::window(r as i64);
    if idx.len() > cap {
        return Err(Error::WindowTooLarge {
            requested: idx.len(),
            cap,
        });
    }
    let r = r as i64;
    let diffs = LatticeIndex::window(2 * r);
    let gamma: HashMap<LatticeIndex, Complex64> = diffs
        .par_iter()
        .map(|&d| translate_autocorrelation(phi, d).map(|g| (d, g)))
        .collect::<Result<_>>()?;
    let n = idx.len();
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for (a, ia) in idx.iter().enumerate() {
        for (b, ib) in idx.iter().enumerate().skip(a) {
            // ⟨T_bφ, T_aφ⟩ = e^{πi(k_a l_b − l_a k_b)} ⟨T_{b−a}φ, φ⟩
            let d = LatticeIndex::new(ib.k - ia.k, ib.l - ia.l);
            let v = pi_phase(ia.k * ib.l - ia.l * ib.k, 1) * gamma[&d];
            m[(a, b)] = v;
            m[(b, a)] = v.conj();
        }
        m[(a, a)] = Complex64::new(m[(a, a)].re, 0.0);
    }
    Ok(GramSection::new(r as u32, idx, m))
}

/// `Σ c_{k,l} T_{(k,l)}φ`.
pub fn synthesize(c: &CoefficientField, phi: &SampledFunction) -> Result<SampledFunction> {
    if c.is_empty() {
        return Err(Error::EmptyInput("coefficient field"));
    }
    let translates: Vec<(Complex64, SampledFunction)> = c
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(i, v)| twisted_translate(phi, **i).map(|t| (**v, t)))
        .collect::<Result<_>>()?;
    let mut f = SampledFunction::zeros(phi.spec().clone());
    for (v, t) in &translates {
        f.axpy(*v, t)?;
    }
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub f: SampledFunction,
    pub symbol: FiberSymbol,
    /// `Σ_l ∫_𝕋 |ρ_l|² w`.
    pub rhs: f64,
    /// True only when a satisfied condition-C report was supplied.
    pub identity_guaranteed: bool,
}

/// Synthesis plus the right-hand side of the norm identity
/// `‖Σ c T φ‖² = Σ_l ∫_𝕋 |ρ_l(ξ)|² w(ξ) dξ`.
pub fn synthesize_and_norm(
    c: &CoefficientField,
    phi: &SampledFunction,
    w: &WeightSamples,
    condition_c: Option<&ConditionCReport>,
) -> Result<Synthesis> {
    let f = synthesize(c, phi)?;
    let symbol = FiberSymbol::from_coefficients(c, w.q());
    let rhs = symbol
        .ls()
        .map(|l| {
            symbol
                .samples(l)
                .expect("l from symbol")
                .iter()
                .zip(w.values())
                .map(|(r, wv)| r.norm_sqr() * wv)
                .sum::<f64>()
                / w.q() as f64
        })
        .sum();
    let identity_guaranteed = condition_c.is_some_and(|r| r.satisfied());
    Ok(Synthesis {
        f,
        symbol,
        rhs,
        identity_guaranteed,
    })
}

/// `‖K_f − Σ_l ρ_l(ξ) K_φ(ξ+l, ·)‖_HS / ‖K_f‖_HS` over the ξ-grid `xi`.
pub fn membership_residual(
    f: &SampledFunction,
    symbol: &FiberSymbol,
    phi: &SampledFunction,
    xi: &AxisGrid,
) -> Result<f64> {
    let kf = KernelSource::new(f, 1.0, KernelRoute::Auto)?;
    let kp = KernelSource::new(phi, 1.0, KernelRoute::Auto)?;
    let lag = *kf.lag_grid();
    let n = lag.len();
    let ls: Vec<i64> = symbol.ls().collect();
    let (num, den): (f64, f64) = (0..xi.len())
        .into_par_iter()
        .map_init(
            || (vec![ZERO; n], vec![ZERO; n]),
            |(rf, rp), a| {
                let x = xi.point(a);
                kf.row_at(x, rf);
                let mut model = vec![ZERO; n];
                for &l in &ls {
                    let rho = symbol.eval(l, x);
                    kp.row_at(x + l as f64, rp);
                    for (j, m) in model.iter_mut().enumerate() {
                        if let Some(sj) = lag.shifted_index(j, l) {
                            *m += rho * rp[sj];
                        }
                    }
                }
                let e: f64 = rf.iter().zip(&model).map(|(u, v)| (u - v).norm_sqr()).sum();
                let d: f64 = rf.iter().map(|u| u.norm_sqr()).sum();
                (e, d)
            },
        )
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((num / den).sqrt())
}
