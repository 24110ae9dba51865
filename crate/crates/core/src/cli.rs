//! Command-line front end. [`run`] parses arguments, merges a flat JSON config
//! file with flag overrides, executes one pipeline and returns the exit code with
//! the report. Exit codes: 0 success, 1 usage or configuration error, 2 refusal.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{bessel_bound_estimate, biorthogonality_check, independence_probe};
use crate::grid::{sample_separable, AxisGrid, Factor1D, GridSpec, SampledFunction};
use crate::heisenberg::{
    bracket_coefficient, biorthogonality_h, canonical_dual_h, condition_c_residual_h, example_factory,
    g_function, g_function_default, h_inner, lambda_grid, left_translate, norm_sq_quadrature,
    plancherel_prerequisite, GRoute, HFunction, HLatticeIndex,
};
use crate::report::{emit_report, Report, ReportFormat};
use crate::spectral::{canonical_dual, condition_c_residual, weight_of};
use crate::twisted::{gram_matrix, twisted_translate, LatticeIndex, DEFAULT_WINDOW_CAP};
use crate::weyl::{KernelRoute, KernelSource};

/// Environment variable consulted when `threads` is not configured.
pub const THREADS_ENV: &str = "TWISTFRAME_THREADS";

/// Run configuration. Keys match the long flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Half-width of the `x` and `y` axes.
    #[serde(rename = "L")]
    pub half_width: f64,
    pub q: u32,
    pub midpoint: bool,
    #[serde(rename = "t_L")]
    pub t_half_width: f64,
    pub t_q: u32,
    /// m-truncation of the weight periodization.
    #[serde(rename = "M")]
    pub m: u32,
    /// r-truncation of the bracket sum.
    #[serde(rename = "R")]
    pub r: u32,
    pub k_max: u32,
    pub l_max: u32,
    pub m_max: u32,
    pub eps: f64,
    /// Threshold for the Heisenberg condition-C verdict.
    pub threshold: f64,
    pub radii: Vec<u32>,
    pub lambda_samples: usize,
    pub phi: String,
    pub example: u32,
    pub k: i64,
    pub l: i64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub format: ReportFormat,
    pub record_time: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            q: 32,
            midpoint: true,
            t_half_width: 4.0,
            t_q: 16,
            m: crate::spectral::DEFAULT_M,
            r: crate::heisenberg::DEFAULT_R,
            k_max: 2,
            l_max: 2,
            m_max: 2,
            eps: crate::spectral::DEFAULT_EPS,
            threshold: crate::heisenberg::CONDITION_C_THRESHOLD,
            radii: crate::frames::DEFAULT_RADII.to_vec(),
            lambda_samples: crate::heisenberg::LAMBDA_SAMPLES,
            phi: "unit-square".into(),
            example: 1,
            k: 0,
            l: 0,
            out: PathBuf::from("."),
            threads: None,
            format: ReportFormat::Json,
            record_time: false,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive")))
            }
        };
        pos(self.half_width > 0.0 && self.half_width.is_finite(), "L")?;
        pos(self.t_half_width > 0.0 && self.t_half_width.is_finite(), "t_L")?;
        pos(self.q > 0, "q")?;
        pos(self.t_q > 0, "t_q")?;
        pos(self.m > 0, "M")?;
        pos(self.eps > 0.0, "eps")?;
        pos(self.threshold > 0.0, "threshold")?;
        pos(self.lambda_samples > 0, "lambda_samples")?;
        pos(!self.radii.is_empty() && self.radii.iter().all(|&r| r > 0), "radii")?;
        if let Some(t) = self.threads {
            pos(t > 0, "threads")?;
        }
        Ok(())
    }

    pub fn phase_plane(&self) -> Result<GridSpec> {
        let a = AxisGrid::new(self.half_width, self.q, self.midpoint)?;
        Ok(GridSpec::phase_plane(a, a))
    }

    pub fn group(&self) -> Result<GridSpec> {
        let a = AxisGrid::new(self.half_width, self.q, self.midpoint)?;
        let t = AxisGrid::new(self.t_half_width, self.t_q, self.midpoint)?;
        Ok(GridSpec::group(a, a, t))
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Parser)]
#[command(name = "twistframe", version, about = "Twisted-translate and Heisenberg frame diagnostics")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Default, Args)]
struct Overrides {
    /// Flat JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "L", global = true)]
    half_width: Option<f64>,
    #[arg(long, global = true)]
    q: Option<u32>,
    #[arg(long, global = true)]
    midpoint: Option<bool>,
    #[arg(long = "t-L", global = true)]
    t_half_width: Option<f64>,
    #[arg(long = "t-q", global = true)]
    t_q: Option<u32>,
    #[arg(long = "M", global = true)]
    m: Option<u32>,
    #[arg(long = "R", global = true)]
    r: Option<u32>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<u32>,
    #[arg(long = "l-max", global = true)]
    l_max: Option<u32>,
    #[arg(long = "m-max", global = true)]
    m_max: Option<u32>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<u32>>,
    #[arg(long = "lambda-samples", global = true)]
    lambda_samples: Option<usize>,
    /// Phase-plane generator: unit-square, rect-2x1, gaussian, psi.
    #[arg(long, global = true)]
    phi: Option<String>,
    /// Heisenberg example id, 1..=6.
    #[arg(long, global = true)]
    example: Option<u32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    k: Option<i64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    l: Option<i64>,
    /// Output directory, or a `.csv` path for the primary data file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    /// Record wall-clock seconds in the report (breaks byte-identical output).
    #[arg(long = "record-time", global = true)]
    record_time: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weight function w_φ on the torus.
    Weight,
    /// Condition-C residuals on the phase plane.
    ConditionC,
    /// Gram sections of twisted translates.
    Gram,
    /// Canonical dual on the phase plane.
    Dual,
    /// Bessel-bound and independence probes.
    Probe,
    /// Bracket G_{k,l} on the λ-grid.
    HeisenbergG,
    /// Condition C on the Heisenberg group.
    HeisenbergConditionC,
    /// Canonical dual on the Heisenberg group.
    HeisenbergDual,
    /// Reproduce a worked example: `example-N`, N = 1..=6.
    Reproduce { target: String },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Weight => "weight",
            Command::ConditionC => "condition-c",
            Command::Gram => "gram",
            Command::Dual => "dual",
            Command::Probe => "probe",
            Command::HeisenbergG => "heisenberg-g",
            Command::HeisenbergConditionC => "heisenberg-condition-c",
            Command::HeisenbergDual => "heisenberg-dual",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

fn merge(o: &Overrides) -> Result<Config> {
    let mut c = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str::<Config>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => Config::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { c.$f = v; } )* };
    }
    set!(half_width, q, midpoint, t_half_width, t_q, m, r, k_max, l_max, m_max, eps, threshold, radii,
        lambda_samples, phi, example, k, l, out, format);
    if o.threads.is_some() {
        c.threads = o.threads;
    }
    if o.record_time {
        c.record_time = true;
    }
    if c.threads.is_none() {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let n = v
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
            c.threads = Some(n);
        }
    }
    c.validate()?;
    Ok(c)
}

/// Output directory and primary data path for `default_name`.
fn targets(c: &Config, default_name: &str) -> (PathBuf, PathBuf) {
    if c.out.extension().is_some_and(|e| e == "csv") {
        let dir = c.out.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
        (dir, c.out.clone())
    } else {
        (c.out.clone(), c.out.join(default_name))
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Named phase-plane generators.
pub fn named_phi(name: &str, spec: &GridSpec) -> Result<SampledFunction> {
    let chi = Factor1D::indicator;
    match name {
        "unit-square" => sample_separable(vec![chi(0.0, 1.0), chi(0.0, 1.0)], spec.clone()),
        "rect-2x1" => sample_separable(vec![chi(0.0, 2.0), chi(0.0, 1.0)], spec.clone()),
        "gaussian" => sample_separable(
            vec![Factor1D::gaussian(std::f64::consts::PI), Factor1D::gaussian(std::f64::consts::PI)],
            spec.clone(),
        ),
        "psi" => {
            let sq = sample_separable(vec![chi(0.0, 1.0), chi(0.0, 1.0)], spec.clone())?;
            sq.add(&twisted_translate(&sq, LatticeIndex::new(1, 0))?)
        }
        other => Err(Error::Config(format!(
            "unknown phi {other:?} (expected unit-square, rect-2x1, gaussian, psi)"
        ))),
    }
}

fn status(ok: bool, yes: &str, no: &str) -> String {
    if ok { yes } else { no }.to_string()
}

fn cmd_weight(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = named_phi(&c.phi, &c.phase_plane()?)?;
    let w = weight_of(&phi, c.m)?;
    let (dir, path) = targets(c, "weight.csv");
    ensure_dir(&dir)?;
    w.write_csv(&path)?;
    rep.add_file(file_name(&path));
    rep.push_result("w_sup", w.sup(), None, "periodization");
    rep.push_result("w_inf", w.inf(), None, "periodization");
    rep.push_result("w_mass", w.mass(), Some(1e-2 * phi.norm_sq()), "periodization");
    rep.push_result("norm_sq", phi.norm_sq(), None, "quadrature");
    rep.push_result("tail_bound", w.tail_bound(), None, "edge-slab estimate");
    let mass_ok = (w.mass() - phi.norm_sq()).abs() <= 1e-2 * phi.norm_sq();
    rep.push_verdict("weight-mass", status(mass_ok, "holds", "fails"));
    Ok(())
}

fn cmd_condition_c(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = named_phi(&c.phi, &c.phase_plane()?)?;
    let src = KernelSource::new(&phi, 1.0, KernelRoute::Auto)?;
    let cc = condition_c_residual(&src, c.l_max.max(1), c.m)?;
    for e in &cc.entries {
        rep.push_result(format!("residual_l{}", e.l), e.residual, Some(cc.threshold), "periodization");
    }
    rep.push_result("max_residual", cc.max_residual(), Some(cc.threshold), "periodization");
    rep.push_result("tail_bound", cc.tail_bound, None, "edge-slab estimate");
    rep.push_verdict(
        "condition-c",
        status(cc.satisfied(), "condition C satisfied", "condition C violated"),
    );
    Ok(())
}

fn cmd_gram(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = named_phi(&c.phi, &c.phase_plane()?)?;
    let (dir, _) = targets(c, "");
    ensure_dir(&dir)?;
    for &r in &c.radii {
        let g = gram_matrix(&phi, r, DEFAULT_WINDOW_CAP)?;
        let path = dir.join(format!("gram_r{r}.csv"));
        g.write_csv(&path)?;
        rep.add_file(file_name(&path));
        rep.push_result(format!("lambda_min_r{r}"), g.lambda_min(), None, "eigensolve");
        rep.push_result(format!("lambda_max_r{r}"), g.lambda_max(), None, "eigensolve");
        rep.push_result(format!("hermitian_defect_r{r}"), g.hermitian_defect(), Some(0.0), "eigensolve");
    }
    Ok(())
}

fn cmd_dual(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = named_phi(&c.phi, &c.phase_plane()?)?;
    let w = weight_of(&phi, c.m)?;
    rep.push_result("w_inf", w.inf(), Some(c.eps), "periodization");
    let dual = canonical_dual(&phi, &w, c.eps)?;
    let dev = biorthogonality_check(&dual, &phi, 3)?;
    rep.push_result("biorthogonality_r3", dev, Some(1e-2), "quadrature");
    let wd = weight_of(&dual, c.m)?;
    let (dir, path) = targets(c, "dual_weight.csv");
    ensure_dir(&dir)?;
    wd.write_csv(&path)?;
    rep.add_file(file_name(&path));
    let mut worst: f64 = 0.0;
    for (a, b) in wd.values().iter().zip(w.values()) {
        if *b > 0.1 {
            worst = worst.max((a * b - 1.0).abs());
        }
    }
    rep.push_result("dual_weight_identity", worst, Some(5e-2), "periodization");
    rep.push_verdict("dual", status(dev <= 1e-2, "biorthogonal", "not biorthogonal"));
    Ok(())
}

fn cmd_probe(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = named_phi(&c.phi, &c.phase_plane()?)?;
    let w = weight_of(&phi, c.m)?;
    let src = KernelSource::new(&phi, 1.0, KernelRoute::Auto)?;
    let cc = condition_c_residual(&src, c.l_max.max(1), c.m)?;
    let bessel = bessel_bound_estimate(&phi, &c.radii, Some(&w), Some(&cc), 1e-2)?;
    let indep = independence_probe(&phi, &c.radii, Some(&w))?;
    for (i, r) in bessel.radii.iter().enumerate() {
        rep.push_result(format!("lambda_max_r{r}"), bessel.lambda_max[i], Some(1e-2), "eigensolve");
        rep.push_result(format!("lambda_min_r{r}"), bessel.lambda_min[i], None, "eigensolve");
        rep.push_result(format!("sigma_min_r{r}"), indep.sigma_min[i], None, "eigensolve");
        if let Some(n) = indep.null_residual.get(i) {
            rep.push_result(format!("null_residual_r{r}"), *n, Some(1e-3), "synthesis");
        }
    }
    rep.push_result("w_sup", w.sup(), None, "periodization");
    rep.push_verdict("bessel", format!("{:?}", bessel.verdict));
    rep.push_verdict("independence", format!("{:?}", indep.verdict));
    Ok(())
}

fn example_phi(c: &Config, id: u32) -> Result<HFunction> {
    example_factory(id, None, &c.group()?)
}

fn cmd_heisenberg_g(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = example_phi(c, c.example)?;
    let cert = plancherel_prerequisite(phi.spec())?;
    rep.push_result("plancherel_max_rel_error", cert.max_rel_error(), Some(cert.tol()), "kernel quadrature");
    let g = g_function(
        &phi,
        (c.k, c.l),
        &lambda_grid(c.lambda_samples),
        c.r,
        GRoute::Reduced,
        Some(&cert),
    )?;
    let (dir, path) = targets(c, "g.csv");
    ensure_dir(&dir)?;
    g.write_csv(&path)?;
    rep.add_file(file_name(&path));
    rep.push_result("g_max_abs", g.max_abs(), None, "fiber quadrature");
    rep.push_result("g_min_re", g.min_re(), None, "fiber quadrature");
    rep.push_result("g_mean_re", g.mean().re, None, "fiber quadrature");
    rep.push_result("tail_bound", g.tail_bound(), None, "cauchy-schwarz");
    Ok(())
}

fn cmd_heisenberg_condition_c(c: &Config, rep: &mut Report, id: u32) -> Result<bool> {
    let phi = example_phi(c, id)?;
    let mut cc = condition_c_residual_h(&phi, c.k_max, c.l_max, c.m_max)?;
    cc.threshold = c.threshold;
    rep.push_result("condition_c_residual", cc.max_residual(), Some(cc.threshold), "quadrature");
    if let Some(a) = cc.argmax().filter(|_| cc.max_residual() > 0.0) {
        rep.push_result("argmax_k", a.k as f64, None, "index");
        rep.push_result("argmax_l", a.l as f64, None, "index");
        rep.push_result("argmax_m", a.m as f64, None, "index");
    }
    rep.push_verdict(
        "condition-c",
        status(cc.satisfied(), "condition C satisfied", "condition C violated"),
    );
    Ok(cc.satisfied())
}

fn cmd_heisenberg_dual(c: &Config, rep: &mut Report) -> Result<()> {
    let phi = example_phi(c, c.example)?;
    let cert = plancherel_prerequisite(phi.spec())?;
    let d = canonical_dual_h(&phi, c.eps, &cert)?;
    let dev = biorthogonality_h(&d.function, &phi, 2)?;
    rep.push_result("biorthogonality_r2", dev, Some(1e-3), "quadrature");
    let gd = g_function_default(&d.function, (0, 0), &cert)?;
    let worst = gd
        .values()
        .iter()
        .zip(d.g00.values())
        .map(|(a, b)| (a.re * b.re - 1.0).abs())
        .fold(0.0, f64::max);
    rep.push_result("dual_g00_identity", worst, Some(5e-2), "fiber quadrature");
    let (dir, path) = targets(c, "dual_g00.csv");
    ensure_dir(&dir)?;
    gd.write_csv(&path)?;
    rep.add_file(file_name(&path));
    rep.push_verdict("dual", status(dev <= 1e-3, "biorthogonal", "not biorthogonal"));
    Ok(())
}

fn cmd_reproduce(c: &Config, rep: &mut Report, target: &str) -> Result<()> {
    let id: u32 = target
        .strip_prefix("example-")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("reproduce target {target:?} is not example-N")))?;
    let phi = example_phi(c, id)?;
    cmd_heisenberg_condition_c(c, rep, id)?;
    let probe = |idx: HLatticeIndex| -> Result<Complex64> { h_inner(&phi, &left_translate(&phi, idx)) };
    match id {
        2 => {
            let v = probe(HLatticeIndex::new(0, 0, 1))?;
            rep.push_result("inner_L_0_0_1", v.re, Some(1e-4), "quadrature, closed-form t-correlation");
        }
        5 | 6 => {
            let v = probe(HLatticeIndex::new(1, 0, 0))?;
            let tol = (id == 5).then_some(1e-2);
            rep.push_result("inner_L_2_0_0", v.re, tol, "quadrature, closed-form t-correlation");
        }
        _ => {}
    }
    let cert = plancherel_prerequisite(phi.spec())?;
    let g = g_function_default(&phi, (0, 0), &cert)?;
    let n2 = norm_sq_quadrature(&phi);
    rep.push_result("norm_sq", n2, None, "quadrature");
    rep.push_result("g00_integral", g.mean().re, Some(1e-2 * n2), "fiber quadrature");
    let b = bracket_coefficient(&phi, HLatticeIndex::ZERO, &g)?;
    rep.push_result("bracket_route_discrepancy", b.discrepancy, Some(1e-3 * (1.0 + b.via_inner.norm())), "two routes");
    let (dir, path) = targets(c, "g00.csv");
    ensure_dir(&dir)?;
    g.write_csv(&path)?;
    rep.add_file(file_name(&path));
    Ok(())
}

fn dispatch(cmd: &Command, c: &Config, rep: &mut Report) -> Result<()> {
    match cmd {
        Command::Weight => cmd_weight(c, rep),
        Command::ConditionC => cmd_condition_c(c, rep),
        Command::Gram => cmd_gram(c, rep),
        Command::Dual => cmd_dual(c, rep),
        Command::Probe => cmd_probe(c, rep),
        Command::HeisenbergG => cmd_heisenberg_g(c, rep),
        Command::HeisenbergConditionC => cmd_heisenberg_condition_c(c, rep, c.example).map(|_| ()),
        Command::HeisenbergDual => cmd_heisenberg_dual(c, rep),
        Command::Reproduce { target } => cmd_reproduce(c, rep, target),
    }
}

fn usage_report(command: &str, message: &str) -> Report {
    let mut r = Report::new(command, serde_json::Value::Null);
    r.push_verdict("usage", message.trim_end());
    r
}

/// Executes one command line (including the program name) and returns the exit
/// code and report. Reports are also written to the output directory on success
/// and on refusal.
pub fn run<I, T>(argv: I) -> (i32, Report)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return (code, usage_report("usage", &e.render().to_string()));
        }
    };
    let cfg = match merge(&cli.opts) {
        Ok(c) => c,
        Err(e) => return (1, usage_report(cli.cmd.name(), &e.to_string())),
    };
    let start = Instant::now();
    let mut rep = Report::new(cli.cmd.name(), cfg.snapshot());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build();
    let outcome = match pool {
        Ok(p) => p.install(|| dispatch(&cli.cmd, &cfg, &mut rep)),
        Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
    };
    let code = match &outcome {
        Ok(()) => 0,
        Err(Error::DualRefused { min_weight, eps, reason }) => {
            rep.push_result("min_weight", *min_weight, Some(*eps), "refusal diagnostic");
            rep.push_verdict("dual", format!("refused: {reason}"));
            2
        }
        Err(Error::Config(m)) => {
            rep.push_verdict("usage", m.clone());
            1
        }
        Err(Error::UnknownExample(_)) => {
            rep.push_verdict("usage", outcome.as_ref().unwrap_err().to_string());
            1
        }
        Err(e) => {
            rep.push_verdict("error", e.to_string());
            1
        }
    };
    if cfg.record_time {
        rep.seconds = Some(start.elapsed().as_secs_f64());
    }
    if code != 1 {
        let (dir, _) = targets(&cfg, "");
        if let Err(e) = emit_report(&rep, cfg.format, &dir) {
            rep.push_verdict("error", e.to_string());
            return (1, rep);
        }
    }
    (code, rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let c = Config::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&s).unwrap(), c);
        assert!(Config::from_json(r#"{"q": 0}"#).is_err());
        assert!(Config::from_json(r#"{"bogus": 1}"#).is_err());
        let partial = Config::from_json(r#"{"M": 64, "phi": "psi"}"#).unwrap();
        assert_eq!(partial.m, 64);
        assert_eq!(partial.q, 32);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, rep) = run(["twistframe", "frobnicate"]);
        assert_eq!(code, 1);
        assert!(rep.verdict("usage").unwrap().contains("Usage"));
    }

    #[test]
    fn out_path_with_csv_extension() {
        let mut c = Config {
            out: PathBuf::from("/tmp/x/w.csv"),
            ..Config::default()
        };
        let (dir, path) = targets(&c, "weight.csv");
        assert_eq!(dir, PathBuf::from("/tmp/x"));
        assert_eq!(path, PathBuf::from("/tmp/x/w.csv"));
        c.out = PathBuf::from("runs");
        assert_eq!(targets(&c, "g.csv").1, PathBuf::from("runs/g.csv"));
    }

    #[test]
    fn unknown_phi_and_example_are_usage_errors() {
        let dir = std::env::temp_dir().join("twistframe-cli-unit");
        let out = dir.to_string_lossy().into_owned();
        let (code, _) = run(["twistframe", "weight", "--phi", "blob", "--out", &out]);
        assert_eq!(code, 1);
        let (code, _) = run(["twistframe", "reproduce", "example-9", "--out", &out]);
        assert_eq!(code, 1);
    }
}
