//! Finite-section frame diagnostics: Gram spectra, Bessel bounds against `sup w`,
//! ℓ²-independence probes, biorthogonality, and Hilbertian/Besselian witnesses.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{inner_product, AxisGrid, GridSpec, SampledFunction, ZERO};
use crate::spectral::{ConditionCReport, WeightSamples};
use crate::twisted::{
    gram_matrix, synthesize, synthesize_and_norm, twisted_translate, CoefficientField, LatticeIndex,
    DEFAULT_WINDOW_CAP,
};

/// Default radii for the section probes.
pub const DEFAULT_RADII: [u32; 4] = [2, 4, 8, 16];

/// Hermitian Gram matrix over a finite index window with its extreme spectrum.
///
/// The eigensolve splits the matrix into the connected components of its nonzero
/// pattern; for generators with compact support this is block diagonal.
#[derive(Debug, Clone)]
pub struct GramSection<I> {
    radius: u32,
    indices: Vec<I>,
    matrix: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
    min_vector: DVector<Complex64>,
}

#[derive(Debug, Serialize)]
struct GramSummary {
    radius: u32,
    dim: usize,
    lambda_min: f64,
    lambda_max: f64,
    sigma_min: f64,
}

impl<I: Clone> GramSection<I> {
    pub fn new(radius: u32, indices: Vec<I>, matrix: DMatrix<Complex64>) -> Self {
        let n = matrix.nrows();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for a in 0..n {
            for b in a + 1..n {
                if matrix[(a, b)] != ZERO {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for a in 0..n {
            let r = find(&mut parent, a);
            groups.entry(r).or_default().push(a);
        }
        let mut eigenvalues = Vec::with_capacity(n);
        let mut best = (f64::INFINITY, DVector::<Complex64>::zeros(n));
        for members in groups.values() {
            let s = members.len();
            let sub = DMatrix::from_fn(s, s, |i, j| matrix[(members[i], members[j])]);
            let eig = SymmetricEigen::new(sub);
            for (c, &ev) in eig.eigenvalues.iter().enumerate() {
                eigenvalues.push(ev);
                if ev < best.0 {
                    let mut v = DVector::<Complex64>::zeros(n);
                    for (i, &m) in members.iter().enumerate() {
                        v[m] = eig.eigenvectors[(i, c)];
                    }
                    best = (ev, v);
                }
            }
        }
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        Self {
            radius,
            indices,
            matrix,
            eigenvalues,
            min_vector: best.1,
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn indices(&self) -> &[I] {
        &self.indices
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Smallest singular value of the synthesis map restricted to the window.
    pub fn sigma_min(&self) -> f64 {
        self.lambda_min().max(0.0).sqrt()
    }

    /// Unit eigenvector for `λ_min`, in window order.
    pub fn min_eigenvector(&self) -> &DVector<Complex64> {
        &self.min_vector
    }

    pub fn hermitian_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut d: f64 = 0.0;
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                d = d.max((m[(a, b)] - m[(b, a)].conj()).norm());
            }
        }
        d
    }

    /// CSV rows `i,j,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(w, "i,j,re,im").map_err(io)?;
        for a in 0..self.matrix.nrows() {
            for b in 0..self.matrix.ncols() {
                let v = self.matrix[(a, b)];
                writeln!(w, "{a},{b},{:e},{:e}", v.re, v.im).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GramSummary {
            radius: self.radius,
            dim: self.dim(),
            lambda_min: self.lambda_min(),
            lambda_max: self.lambda_max(),
            sigma_min: self.sigma_min(),
        })?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    /// Condition C holds and every section obeys `λ_max ≤ sup w + tol`.
    BesselBoundHolds,
    BesselBoundExceeded,
    /// Condition C not established; values reported only.
    NotAsserted,
    ConsistentWithIndependence,
    InconsistentWithIndependence,
    /// The generator is zero.
    Dependent,
    /// `w` vanishes on more than isolated grid samples and no null vector was found.
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub radii: Vec<u32>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub sigma_min: Vec<f64>,
    /// `‖Σ v_a T_aφ‖ / ‖v‖` for the `λ_min` eigenvector, synthesized in space.
    pub null_residual: Vec<f64>,
    pub sup_w: Option<f64>,
    pub inf_w: Option<f64>,
    /// `λ_max` nondecreasing and `λ_min` nonincreasing within 1e-10.
    pub interlacing: bool,
    pub verdict: ProbeVerdict,
}

fn sections(phi: &SampledFunction, radii: &[u32]) -> Result<Vec<GramSection<LatticeIndex>>> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("radii"));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&r| gram_matrix(phi, r, DEFAULT_WINDOW_CAP)).collect()
}

fn interlaces(max: &[f64], min: &[f64]) -> bool {
    max.windows(2).all(|w| w[1] >= w[0] - 1e-10) && min.windows(2).all(|w| w[1] <= w[0] + 1e-10)
}

fn base_report(secs: &[GramSection<LatticeIndex>], w: Option<&WeightSamples>) -> ProbeReport {
    let lambda_min: Vec<f64> = secs.iter().map(|s| s.lambda_min()).collect();
    let lambda_max: Vec<f64> = secs.iter().map(|s| s.lambda_max()).collect();
    ProbeReport {
        radii: secs.iter().map(|s| s.radius()).collect(),
        sigma_min: secs.iter().map(|s| s.sigma_min()).collect(),
        interlacing: interlaces(&lambda_max, &lambda_min),
        lambda_min,
        lambda_max,
        null_residual: Vec::new(),
        sup_w: w.map(WeightSamples::sup),
        inf_w: w.map(WeightSamples::inf),
        verdict: ProbeVerdict::NotAsserted,
    }
}

/// `λ_max` of Gram sections per radius, compared with `sup w` when condition C holds.
pub fn bessel_bound_estimate(
    phi: &SampledFunction,
    radii: &[u32],
    w: Option<&WeightSamples>,
    condition_c: Option<&ConditionCReport>,
    tol: f64,
) -> Result<ProbeReport> {
    let secs = sections(phi, radii)?;
    let mut rep = base_report(&secs, w);
    if let (Some(w), Some(c)) = (w, condition_c) {
        if c.satisfied() {
            let ok = rep.interlacing && rep.lambda_max.iter().all(|&l| l <= w.sup() + tol);
            rep.verdict = if ok {
                ProbeVerdict::BesselBoundHolds
            } else {
                ProbeVerdict::BesselBoundExceeded
            };
        }
    }
    Ok(rep)
}

fn zeros_isolated(w: &WeightSamples) -> bool {
    let z: Vec<bool> = w.values().iter().map(|&v| v <= 1e-12).collect();
    let n = z.len();
    let count = z.iter().filter(|&&b| b).count();
    count < n / 2 && (0..n).all(|i| !(z[i] && z[(i + 1) % n]))
}

/// `phi` zero-padded by `kx` units on each side in x and `ly` in y, so lattice
/// translates within that reach stay on the grid.
fn padded(phi: &SampledFunction, kx: i64, ly: i64) -> Result<SampledFunction> {
    let (ax, ay) = (*phi.spec().axis(0), *phi.spec().axis(1));
    let grow = |a: &AxisGrid, units: i64| AxisGrid::new(a.half_width() + units as f64, a.samples_per_unit(), a.is_midpoint());
    let (bx, by) = (grow(&ax, kx)?, grow(&ay, ly)?);
    let (ox, oy) = ((kx * ax.samples_per_unit() as i64) as usize, (ly * ay.samples_per_unit() as i64) as usize);
    let mut values = vec![ZERO; bx.len() * by.len()];
    for i in 0..ax.len() {
        let dst = (i + ox) * by.len() + oy;
        values[dst..dst + ay.len()].copy_from_slice(&phi.values()[i * ay.len()..(i + 1) * ay.len()]);
    }
    SampledFunction::from_values(GridSpec::phase_plane(bx, by), values)
}

/// `σ_min` of Gram sections and the space-domain residual of the `λ_min` eigenvector,
/// synthesized on a grid padded to hold every translate it touches.
pub fn independence_probe(phi: &SampledFunction, radii: &[u32], w: Option<&WeightSamples>) -> Result<ProbeReport> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("radii"));
    }
    if phi.is_zero() {
        let n = radii.len();
        return Ok(ProbeReport {
            radii: radii.to_vec(),
            lambda_min: vec![0.0; n],
            lambda_max: vec![0.0; n],
            sigma_min: vec![0.0; n],
            null_residual: vec![0.0; n],
            sup_w: w.map(WeightSamples::sup),
            inf_w: w.map(WeightSamples::inf),
            interlacing: true,
            verdict: ProbeVerdict::Dependent,
        });
    }
    let secs = sections(phi, radii)?;
    let mut rep = base_report(&secs, w);
    for s in &secs {
        let v = s.min_eigenvector();
        let mut c = CoefficientField::new();
        for (idx, coef) in s.indices().iter().zip(v.iter()) {
            if *coef != ZERO {
                c.insert(*idx, *coef);
            }
        }
        let kx = c.iter().map(|(i, _)| i.k.abs()).max().unwrap_or(0);
        let ly = c.iter().map(|(i, _)| i.l.abs()).max().unwrap_or(0);
        let wide = padded(phi, kx, ly)?;
        let mut f = SampledFunction::zeros(wide.spec().clone());
        for (idx, coef) in c.iter() {
            f.axpy(*coef, &twisted_translate(&wide, *idx)?)?;
        }
        rep.null_residual.push((f.norm_sq().max(0.0) / c.l2_norm_sq()).sqrt());
    }
    rep.verdict = if rep.null_residual.iter().any(|&r| r < 1e-6) {
        ProbeVerdict::InconsistentWithIndependence
    } else if w.is_none_or(zeros_isolated) {
        ProbeVerdict::ConsistentWithIndependence
    } else {
        ProbeVerdict::Undetermined
    };
    Ok(rep)
}

/// `max_{|k|,|l| ≤ r} |⟨T_{(k,l)}φ̃, φ⟩ − δ_{(k,l),0}|`.
pub fn biorthogonality_check(dual: &SampledFunction, phi: &SampledFunction, r: u32) -> Result<f64> {
    if dual.spec() != phi.spec() {
        return Err(Error::SpecMismatch);
    }
    let mut worst: f64 = 0.0;
    for idx in LatticeIndex::window(r as i64) {
        let t = twisted_translate(dual, idx)?;
        let v = inner_product(&t, phi)?;
        let d = if idx == LatticeIndex::ZERO { 1.0 } else { 0.0 };
        worst = worst.max((v - d).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyWitness {
    pub inner: u32,
    pub outer: u32,
    /// `‖S_B − S_A‖²`.
    pub lhs: f64,
    /// `Σ_{B∖A} |c|²`.
    pub coeff_mass: f64,
    /// `‖w‖_∞ Σ_{B∖A}|c|² (1 + 1e-2)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualWitness {
    pub cut: u32,
    /// `Σ_A |c|²`.
    pub lhs: f64,
    /// `‖w‖_∞ ‖Σ_A c T φ̃‖² (1 + 1e-2)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HilbertianReport {
    pub sup_w: f64,
    pub cauchy: Vec<CauchyWitness>,
    /// Absent when no dual was supplied.
    pub dual: Option<Vec<DualWitness>>,
    /// False when condition C is not established.
    pub asserting: bool,
}

impl HilbertianReport {
    pub fn all_hold(&self) -> bool {
        self.cauchy.iter().all(|c| c.holds) && self.dual.iter().flatten().all(|d| d.holds)
    }
}

/// `c_{k,l} = (1 + k² + l²)^{-1}` on `|k|, |l| ≤ r`.
pub fn decaying_coefficients(r: u32) -> CoefficientField {
    let mut c = CoefficientField::new();
    for idx in LatticeIndex::window(r as i64) {
        c.insert(idx, Complex64::new(1.0 / (1.0 + (idx.k * idx.k + idx.l * idx.l) as f64), 0.0));
    }
    c
}

fn in_window(idx: &LatticeIndex, r: u32) -> bool {
    idx.k.unsigned_abs() <= r as u64 && idx.l.unsigned_abs() <= r as u64
}

/// Cauchy witnesses `‖S_B − S_A‖² ≤ ‖w‖_∞ Σ_{B∖A}|c|²` over nested square cuts, and,
/// given a dual, the Besselian witnesses `Σ_A|c|² ≤ ‖w‖_∞ ‖Σ_A c T φ̃‖²`.
pub fn hilbertian_probe(
    phi: &SampledFunction,
    w: &WeightSamples,
    c: &CoefficientField,
    cuts: &[u32],
    dual: Option<&SampledFunction>,
    condition_c: Option<&ConditionCReport>,
) -> Result<HilbertianReport> {
    if cuts.len() < 2 {
        return Err(Error::EmptyInput("need at least two cut radii"));
    }
    let mut cuts = cuts.to_vec();
    cuts.sort_unstable();
    let sup = w.sup();
    let mut cauchy = Vec::new();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let band = c.filter(|i| in_window(i, b) && !in_window(i, a));
        if band.is_empty() {
            continue;
        }
        let lhs = synthesize(&band, phi)?.norm_sq();
        let coeff_mass = band.l2_norm_sq();
        let bound = sup * coeff_mass * (1.0 + 1e-2);
        cauchy.push(CauchyWitness {
            inner: a,
            outer: b,
            lhs,
            coeff_mass,
            bound,
            holds: lhs <= bound,
        });
    }
    let dual = match dual {
        Some(d) => {
            let mut out = Vec::new();
            for &a in &cuts {
                let part = c.filter(|i| in_window(i, a));
                if part.is_empty() {
                    continue;
                }
                let lhs = part.l2_norm_sq();
                let bound = sup * synthesize(&part, d)?.norm_sq() * (1.0 + 1e-2);
                out.push(DualWitness {
                    cut: a,
                    lhs,
                    bound,
                    holds: lhs <= bound,
                });
            }
            Some(out)
        }
        None => None,
    };
    Ok(HilbertianReport {
        sup_w: sup,
        cauchy,
        dual,
        asserting: condition_c.is_some_and(|r| r.satisfied()),
    })
}

/// Single-atom check: `‖c·T_aφ‖² = |c|² ∫ w` within the stated tolerance.
pub fn single_atom_norm(phi: &SampledFunction, w: &WeightSamples, idx: LatticeIndex, c: Complex64) -> Result<(f64, f64)> {
    let s = synthesize_and_norm(&CoefficientField::single(idx, c), phi, w, None)?;
    Ok((s.f.norm_sq(), s.rhs))
}
