//! The weight function `w_φ(ξ) = Σ_m ∫|K_φ(ξ+m,η)|² dη`, condition-C residuals,
//! the canonical dual `K_φ̃ = K_φ / w_φ`, and integrability probes for `1/w`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cis, SampledFunction, ZERO};
use crate::twisted::{synthesize, CoefficientField, LatticeIndex};
use crate::weyl::{full_period_xi_grid, kernel_to_function, materialize, KernelEval, KernelRoute, KernelSource};

/// Default m-sum truncation.
pub const DEFAULT_M: u32 = 256;
/// Default division threshold for the canonical dual.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Default ε-schedule for [`reciprocal_probe`].
pub const DEFAULT_EPS_SCHEDULE: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// `w` on the torus grid `ξ_t = t/q`, `t = 0..q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSamples {
    q: u32,
    values: Vec<f64>,
    m_radius: u32,
    tail_bound: f64,
    exact_periodization: bool,
    source_norm_sq: Option<f64>,
}

impl WeightSamples {
    /// Builds samples directly; used for closed-form weights and tests.
    pub fn from_values(values: Vec<f64>, m_radius: u32, tail_bound: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("weight samples"));
        }
        Ok(Self {
            q: values.len() as u32,
            values,
            m_radius,
            tail_bound,
            exact_periodization: false,
            source_norm_sq: None,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn xi(&self, t: usize) -> f64 {
        t as f64 / self.q as f64
    }

    pub fn m_radius(&self) -> u32 {
        self.m_radius
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// True when the m-sum covered a whole period of a periodic discrete kernel.
    pub fn exact_periodization(&self) -> bool {
        self.exact_periodization
    }

    pub fn source_norm_sq(&self) -> Option<f64> {
        self.source_norm_sq
    }

    pub fn with_source_norm_sq(mut self, n: f64) -> Self {
        self.source_norm_sq = Some(n);
        self
    }

    /// `∫_𝕋 w` (the rule is exact for trigonometric polynomials of degree < q).
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.q as f64
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sample at the torus point nearest `ξ mod 1`; exact on the torus grid.
    pub fn at(&self, xi: f64) -> f64 {
        let t = (xi * self.q as f64).round() as i64;
        self.values[t.rem_euclid(self.q as i64) as usize]
    }

    /// CSV rows `xi,w`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(w, "xi,w").map_err(io)?;
        for (t, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{:e}", self.xi(t), v).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// m-values in the order `0, 1, −1, 2, −2, …` over `lo..=hi`.
fn m_order(lo: i64, hi: i64) -> Vec<i64> {
    let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
    let reach = lo.abs().max(hi.abs());
    for r in 0..=reach {
        if r == 0 {
            if lo <= 0 && 0 <= hi {
                out.push(0);
            }
            continue;
        }
        if r <= hi && r >= lo {
            out.push(r);
        }
        if -r >= lo && -r <= hi {
            out.push(-r);
        }
    }
    out
}

/// The m-range actually summed and whether it is an exact period.
fn m_range(k: &impl KernelEval, m: u32) -> (i64, i64, bool) {
    match k.xi_period() {
        Some(p) => {
            let lo = -(p / 2);
            (lo, lo + p - 1, true)
        }
        None => (-(m as i64), m as i64, false),
    }
}

fn check_torus(k: &impl KernelEval) -> Result<u32> {
    if k.lambda() != 1.0 {
        return Err(Error::RequiresUnitLambda(k.lambda()));
    }
    Ok(k.lag_grid().samples_per_unit())
}

/// Per torus point, `Σ_j h |K(ξ_t + m, ξ_t + m + y_j)|²` for each m in `ms`.
fn slab_energies(k: &impl KernelEval, q: u32, ms: &[i64]) -> Vec<Vec<f64>> {
    let n = k.lag_grid().len();
    let h = k.lag_grid().spacing();
    (0..q)
        .into_par_iter()
        .map(|t| {
            let mut row = vec![ZERO; n];
            ms.iter()
                .map(|&m| {
                    k.row_at(t as f64 / q as f64 + m as f64, &mut row);
                    row.iter().map(|v| v.norm_sqr()).sum::<f64>() * h
                })
                .collect()
        })
        .collect()
}

/// `w_φ` on the torus grid from a λ = 1 kernel.
///
/// Direct-quadrature kernels are periodic in ξ, so the m-sum runs over exactly
/// one period and has no truncation error. Otherwise `|m| ≤ M` and the tail is
/// estimated from the two edge slabs assuming `1/m²` decay.
pub fn weight_function(k: &impl KernelEval, m: u32) -> Result<WeightSamples> {
    let q = check_torus(k)?;
    let (lo, hi, exact) = m_range(k, m);
    let ms = m_order(lo, hi);
    let slabs = slab_energies(k, q, &ms);
    let values: Vec<f64> = slabs.iter().map(|s| s.iter().sum()).collect();
    let tail_bound = if exact {
        0.0
    } else {
        let edge = |s: &Vec<f64>| s[s.len() - 1] + s[s.len() - 2];
        2.0 * m as f64 * slabs.iter().map(edge).fold(0.0, f64::max)
    };
    if !exact && m < 16 {
        log::warn!("weight_function: M = {m} is small; tail bound {tail_bound:.2e}");
    }
    Ok(WeightSamples {
        q,
        values,
        m_radius: if exact { (hi - lo + 1) as u32 / 2 } else { m },
        tail_bound,
        exact_periodization: exact,
        source_norm_sq: None,
    })
}

/// `w_φ` for a phase-plane function, with `‖φ‖²` recorded.
pub fn weight_of(phi: &SampledFunction, m: u32) -> Result<WeightSamples> {
    let src = KernelSource::new(phi, 1.0, KernelRoute::Auto)?;
    Ok(weight_function(&src, m)?.with_source_norm_sq(phi.norm_sq()))
}

/// `w_φ(ξ)` at an arbitrary real `ξ`, truncated at `|m| ≤ M`.
pub fn weight_at(k: &impl KernelEval, xi: f64, m: u32) -> f64 {
    let n = k.lag_grid().len();
    let h = k.lag_grid().spacing();
    let (lo, hi, _) = m_range(k, m);
    let mut row = vec![ZERO; n];
    m_order(lo, hi)
        .into_iter()
        .map(|mm| {
            k.row_at(xi + mm as f64, &mut row);
            row.iter().map(|v| v.norm_sqr()).sum::<f64>() * h
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCEntry {
    pub l: i64,
    pub residual: f64,
}

/// Sup-residuals of `R_l(ξ) = Σ_m ∫ K(ξ+m,η) conj K(ξ+m+l,η) dη` for `1 ≤ |l| ≤ l_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCReport {
    pub entries: Vec<ConditionCEntry>,
    pub l_max: u32,
    pub m_radius: u32,
    pub tail_bound: f64,
    pub threshold: f64,
    satisfied: bool,
}

impl ConditionCReport {
    pub fn satisfied(&self) -> bool {
        self.satisfied
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn residual(&self, l: i64) -> Option<f64> {
        self.entries.iter().find(|e| e.l == l).map(|e| e.residual)
    }
}

pub fn condition_c_residual(k: &impl KernelEval, l_max: u32, m: u32) -> Result<ConditionCReport> {
    let q = check_torus(k)?;
    if l_max == 0 {
        return Err(Error::EmptyInput("l_max"));
    }
    let lag = *k.lag_grid();
    let n = lag.len();
    let h = lag.spacing();
    let lm = l_max as i64;
    let (lo, hi, exact) = m_range(k, m);
    let ms = m_order(lo, hi);
    let ls: Vec<i64> = (1..=lm).flat_map(|l| [l, -l]).collect();
    // per torus point: (Σ_m R_l for each l, edge energy for the tail)
    let per_t: Vec<(Vec<f64>, f64)> = (0..q)
        .into_par_iter()
        .map(|t| {
            let xi0 = t as f64 / q as f64;
            let row = |off: i64| {
                let mut r = vec![ZERO; n];
                k.row_at(xi0 + off as f64, &mut r);
                r
            };
            let base_off = lo - lm;
            let rows: Vec<Vec<Complex64>> = (base_off..=hi + lm).map(row).collect();
            let get = |off: i64| &rows[(off - base_off) as usize];
            let mut acc = vec![ZERO; ls.len()];
            for &mm in &ms {
                let base = get(mm);
                for (s, &l) in ls.iter().enumerate() {
                    let other = get(mm + l);
                    let mut v = ZERO;
                    for (j, b) in base.iter().enumerate() {
                        if *b == ZERO {
                            continue;
                        }
                        if let Some(sj) = lag.shifted_index(j, l) {
                            v += b * other[sj].conj();
                        }
                    }
                    acc[s] += v * h;
                }
            }
            let edge = if exact {
                0.0
            } else {
                let e = |off: i64| get(off).iter().map(|v| v.norm_sqr()).sum::<f64>() * h;
                e(hi) + e(lo)
            };
            (acc.iter().map(|z| z.norm()).collect(), edge)
        })
        .collect();
    let tail_bound = if exact {
        0.0
    } else {
        2.0 * m as f64 * per_t.iter().map(|p| p.1).fold(0.0, f64::max)
    };
    let entries: Vec<ConditionCEntry> = ls
        .iter()
        .enumerate()
        .map(|(s, &l)| ConditionCEntry {
            l,
            residual: per_t.iter().map(|p| p.0[s]).fold(0.0, f64::max),
        })
        .collect();
    let threshold = (10.0 * tail_bound).max(1e-8);
    let satisfied = entries.iter().all(|e| e.residual <= threshold);
    Ok(ConditionCReport {
        entries,
        l_max,
        m_radius: if exact { (hi - lo + 1) as u32 / 2 } else { m },
        tail_bound,
        threshold,
        satisfied,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    Finite,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReciprocalProbe {
    /// `(ε, ∫ 1/max(w, ε))`.
    pub estimates: Vec<(f64, f64)>,
    pub verdict: Integrability,
}

impl ReciprocalProbe {
    pub fn finite(&self) -> bool {
        self.verdict == Integrability::Finite
    }

    pub fn last_estimate(&self) -> f64 {
        self.estimates.last().map(|e| e.1).unwrap_or(f64::NAN)
    }
}

/// Estimates `∫_𝕋 1/max(w, ε)` along a decreasing ε-schedule. Finite when the
/// last two estimates differ by less than 1% relative.
pub fn reciprocal_probe(values: &[f64], schedule: &[f64]) -> ReciprocalProbe {
    let n = values.len().max(1) as f64;
    let estimates: Vec<(f64, f64)> = schedule
        .iter()
        .map(|&eps| (eps, values.iter().map(|&w| 1.0 / w.max(eps)).sum::<f64>() / n))
        .collect();
    let verdict = match estimates.as_slice() {
        [.., (_, a), (_, b)] if (b - a).abs() < 1e-2 * a.abs() => Integrability::Finite,
        [(_, _)] => Integrability::Finite,
        _ => Integrability::Divergent,
    };
    ReciprocalProbe { estimates, verdict }
}

fn check_dual_preconditions(w: &WeightSamples, eps: f64) -> Result<ReciprocalProbe> {
    let probe = reciprocal_probe(w.values(), &DEFAULT_EPS_SCHEDULE);
    let min_weight = w.inf();
    if min_weight <= eps {
        return Err(Error::DualRefused {
            min_weight,
            eps,
            reason: format!(
                "weight falls below ε; 1/w probe verdict {:?} (estimate {:.3e} at ε = {:.0e})",
                probe.verdict,
                probe.last_estimate(),
                DEFAULT_EPS_SCHEDULE[DEFAULT_EPS_SCHEDULE.len() - 1]
            ),
        });
    }
    if !probe.finite() {
        return Err(Error::DualRefused {
            min_weight,
            eps,
            reason: "∫ 1/w does not stabilize".into(),
        });
    }
    Ok(probe)
}

/// `φ̃` with `K_φ̃(ξ,η) = K_φ(ξ,η) / w(ξ)`, `w` extended 1-periodically.
///
/// Uses the direct kernel over one full ξ-period, for which inversion is exact.
/// Refuses when `w` drops to `ε` or the reciprocal probe diverges.
pub fn canonical_dual(phi: &SampledFunction, w: &WeightSamples, eps: f64) -> Result<SampledFunction> {
    phi.spec().require_phase_plane()?;
    check_dual_preconditions(w, eps)?;
    let q = phi.spec().axis(1).samples_per_unit();
    if w.q() != q {
        return Err(Error::GridMisalignment(format!(
            "weight torus grid has {} samples, kernel spacing needs {q}",
            w.q()
        )));
    }
    let src = KernelSource::new(phi, 1.0, KernelRoute::Direct)?;
    let k = materialize(&src, &full_period_xi_grid(q, 1.0)?)?;
    let scaled = k.scale_rows(|xi| Complex64::new(1.0 / w.at(xi), 0.0));
    kernel_to_function(&scaled)
}

/// Fourier coefficients `c_k = ∫_𝕋 e^{−2πikξ}/w(ξ) dξ` for `|k| ≤ k_max`.
pub fn reciprocal_coefficients(w: &WeightSamples, k_max: i64) -> Vec<(i64, Complex64)> {
    let q = w.q() as f64;
    (-k_max..=k_max)
        .map(|k| {
            let c: Complex64 = w
                .values()
                .iter()
                .enumerate()
                .map(|(t, &v)| cis(-2.0 * PI * k as f64 * t as f64 / q) / v)
                .sum::<Complex64>()
                / q;
            (k, c)
        })
        .collect()
}

/// Canonical dual as the finite series `Σ_k c_k T_{(k,0)}φ` with `c_k` the Fourier
/// coefficients of `1/w`. Keeps separable metadata; independent of the kernel route.
pub fn canonical_dual_series(
    phi: &SampledFunction,
    w: &WeightSamples,
    eps: f64,
    k_max: i64,
) -> Result<SampledFunction> {
    check_dual_preconditions(w, eps)?;
    let mut c = CoefficientField::new();
    for (k, v) in reciprocal_coefficients(w, k_max) {
        c.insert(LatticeIndex::new(k, 0), v);
    }
    synthesize(&c, phi)
}
