//! `avar` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use avar_core::domain::VoxelDomain;
use avar_core::ellipticity::{check_cancelling, check_ellipticity, Field, SearchParams};
use avar_core::inequality::{
    counterexample_blowup, scaling_study, sobolev_trace_verify, Constraint, PoincareProblem,
};
use avar_core::nullspace::kernel_basis;
use avar_core::polynomial::apply_operator_to_polynomial;
use avar_core::projection::{build_projection, DEFAULT_CONSTANT_SAMPLES};
use avar_core::Operator;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::formats::{self, DomainSpec, FormatError, HypersurfaceSpec, ShapeSpec, SideSpec};
use crate::json;
use crate::report::*;
use crate::suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

const DEFAULT_H: f64 = 1.0 / 64.0;

#[derive(Debug, Parser)]
#[command(
    name = "avar",
    version,
    about = "Ellipticity, nullspaces and Poincaré-type constants for first-order operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify real or complex ellipticity of the symbol.
    CheckEllipticity(Common),
    /// Check the cancelling condition.
    Cancelling(Common),
    /// Polynomial kernel up to a degree cap.
    Kernel(Common),
    /// Kernel projection on a domain, subset or hypersurface.
    Projection(Common),
    /// Poincaré constant (eigenproblem for p = 2, sampled lower bound otherwise).
    Poincare(Common),
    /// Re-check a Poincaré constant on fresh samples.
    Verify(Common),
    /// Trace-style Sobolev inequality with the dilation study.
    Sobolev(Common),
    /// Trace constant on balls of several radii.
    Scaling(Common),
    /// Blow-up of the trace inequality for an operator that is not real-elliptic.
    Counterexample(Common),
    /// Run an acceptance battery.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Subset,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Inside,
    Outside,
}

#[derive(Debug, Args)]
struct Common {
    /// Catalog name, operator JSON file or inline JSON.
    #[arg(long)]
    operator: Option<String>,
    /// Domain preset (interval, unit-square, unit-cube, unit-disk, unit-ball), JSON file or inline JSON.
    #[arg(long)]
    domain: Option<String>,
    /// Auxiliary set omega (shape or hypersurface JSON) whose boundary is Gamma.
    #[arg(long)]
    omega: Option<String>,
    /// Gamma preset: left, right or boundary.
    #[arg(long)]
    gamma: Option<String>,
    /// Side of Gamma the trace is taken from (inside = the omega side).
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    #[arg(long, value_enum, default_value = "subset")]
    mode: Mode,
    /// Shape JSON selecting the subset E (default: the whole domain).
    #[arg(long)]
    subset: Option<String>,
    #[arg(long, value_enum, default_value = "real")]
    field: FieldArg,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Grid spacing; for `scaling` the spacing relative to the radius.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = avar_core::nullspace::DEFAULT_DEGREE_CAP)]
    max_degree: usize,
    /// Radii for `scaling`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    radii: Vec<f64>,
    /// Constant to verify instead of recomputing it.
    #[arg(long)]
    constant: Option<f64>,
    /// Binary grid-function file for the minimizing eigenvector.
    #[arg(long)]
    eigenvector_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// catalog, projection, convergence, scaling, verification, extension, sobolev or counterexample.
    name: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    /// The output is still written.
    Verification(String, String),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<avar_core::Error> for Failure {
    fn from(e: avar_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<String, Failure>;

/// Parses `argv`, runs the command and writes its output. Returns the exit code.
pub fn cli_main<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (out, result) = match cli.command {
        Command::Suite(a) => (a.out.clone(), run_suite(&a)),
        Command::CheckEllipticity(c) => (c.out.clone(), check_ellipticity_cmd(&c)),
        Command::Cancelling(c) => (c.out.clone(), cancelling_cmd(&c)),
        Command::Kernel(c) => (c.out.clone(), kernel_cmd(&c)),
        Command::Projection(c) => (c.out.clone(), projection_cmd(&c)),
        Command::Poincare(c) => (c.out.clone(), poincare_cmd(&c)),
        Command::Verify(c) => (c.out.clone(), verify_cmd(&c)),
        Command::Sobolev(c) => (c.out.clone(), sobolev_cmd(&c)),
        Command::Scaling(c) => (c.out.clone(), scaling_cmd(&c)),
        Command::Counterexample(c) => (c.out.clone(), counterexample_cmd(&c)),
    };
    let (text, code) = match result {
        Ok(text) => (text, EXIT_OK),
        Err(Failure::Verification(text, why)) => {
            let _ = writeln!(stderr, "verification failed: {why}");
            (text, EXIT_VERIFICATION)
        }
        Err(Failure::Input(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    match out {
        Some(path) => {
            if let Err(e) = fs::write(&path, text) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_INPUT;
            }
        }
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    code
}

fn emit<T: Serialize>(meta: Meta, result: T) -> String {
    json::to_string(&Report { meta, result })
}

fn json_only(c: &Common) -> Result<(), Failure> {
    if c.format == Format::Csv {
        return Err(Failure::Input(
            "--format csv applies to tabular studies only (scaling, suite)".into(),
        ));
    }
    Ok(())
}

fn operator(c: &Common) -> Result<Operator, Failure> {
    let arg = c
        .operator
        .as_deref()
        .ok_or_else(|| Failure::Input("--operator is required".into()))?;
    Ok(formats::load_operator(arg)?)
}

fn check_h(h: f64) -> Result<f64, Failure> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Failure::Input("--h must be positive".into()));
    }
    Ok(h)
}

/// Domain spec with its spacing resolved (`--h`, then the file, then 1/64).
/// Without `--domain` the unit cube of the operator's dimension is used.
fn domain(
    c: &Common,
    op: &Operator,
    default_ball: bool,
) -> Result<(DomainSpec, VoxelDomain), Failure> {
    let mut spec = match &c.domain {
        Some(arg) => formats::load_domain(arg)?,
        None => {
            let d = op.dim_space();
            let shape = if default_ball {
                ShapeSpec::Ball {
                    center: vec![0.0; d],
                    radius: 1.0,
                }
            } else {
                ShapeSpec::Box {
                    lo: vec![0.0; d],
                    hi: vec![1.0; d],
                }
            };
            DomainSpec { shape, h: None }
        }
    };
    let h = check_h(c.h.or(spec.h).unwrap_or(DEFAULT_H))?;
    spec = spec.with_h(h);
    let dom = spec.build()?;
    if dom.dim() != op.dim_space() {
        return Err(Failure::Input(format!(
            "domain has dimension {} but the operator acts on R^{}",
            dom.dim(),
            op.dim_space()
        )));
    }
    Ok((spec, dom))
}

fn hypersurface(
    c: &Common,
    spec: &DomainSpec,
    dom: &VoxelDomain,
) -> Result<HypersurfaceSpec, Failure> {
    let mut hs = match (&c.gamma, &c.omega) {
        (Some(_), Some(_)) => {
            return Err(Failure::Input(
                "give either --gamma or --omega, not both".into(),
            ))
        }
        (Some(g), None) => HypersurfaceSpec::preset(g, dom, &spec.shape)?,
        (None, Some(o)) => formats::load_hypersurface(o)?,
        (None, None) => HypersurfaceSpec::preset("boundary", dom, &spec.shape)?,
    };
    if let Some(side) = c.side {
        hs.side = match side {
            SideArg::Inside => SideSpec::Inside,
            SideArg::Outside => SideSpec::Outside,
        };
    }
    Ok(hs)
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ConstraintJson {
    Subset {
        subset: Option<ShapeSpec>,
        cells: usize,
    },
    Trace {
        gamma: HypersurfaceSpec,
        facets: usize,
    },
}

fn constraint(
    c: &Common,
    spec: &DomainSpec,
    dom: &VoxelDomain,
) -> Result<(Constraint, ConstraintJson), Failure> {
    match c.mode {
        Mode::Subset => {
            if c.gamma.is_some() || c.omega.is_some() {
                return Err(Failure::Input("--gamma/--omega need --mode trace".into()));
            }
            let (cells, shape) = match &c.subset {
                Some(arg) => {
                    let s = formats::load_shape(arg)?;
                    (dom.cells_in(&s.to_shape()?), Some(s))
                }
                None => ((0..dom.num_cells()).collect(), None),
            };
            let n = cells.len();
            Ok((
                Constraint::Subset(cells),
                ConstraintJson::Subset {
                    subset: shape,
                    cells: n,
                },
            ))
        }
        Mode::Trace => {
            if c.subset.is_some() {
                return Err(Failure::Input("--subset needs --mode subset".into()));
            }
            let hs = hypersurface(c, spec, dom)?;
            let gamma = hs.select(dom)?;
            let n = gamma.facets.len();
            Ok((
                Constraint::Trace(gamma),
                ConstraintJson::Trace {
                    gamma: hs,
                    facets: n,
                },
            ))
        }
    }
}

fn check_ellipticity_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let field = match c.field {
        FieldArg::Real => Field::Real,
        FieldArg::Complex => Field::Complex,
    };
    let params = SearchParams {
        samples: c.samples.unwrap_or(SearchParams::default().samples),
        refine_rounds: c.refine.unwrap_or(SearchParams::default().refine_rounds),
        seed: c.seed,
    };
    let cert = check_ellipticity(&op, field, c.tol, params)?;
    let meta = Meta::new("check-ellipticity")
        .operator(op.label())
        .seed(c.seed)
        .tolerance("singular_value", c.tol);
    Ok(emit(meta, CertificateJson::from(&cert)))
}

fn cancelling_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let cert = check_cancelling(&op, c.samples.unwrap_or(64), c.tol, c.seed)?;
    let meta = Meta::new("cancelling")
        .operator(op.label())
        .seed(c.seed)
        .tolerance("rank", c.tol);
    Ok(emit(meta, CancellingJson::from(&cert)))
}

fn kernel_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let k = kernel_basis(&op, c.max_degree);
    let mut worst = 0.0f64;
    for p in &k.elements {
        worst = worst.max(apply_operator_to_polynomial(&op, p)?.max_abs_coefficient());
    }
    let meta = Meta::new("kernel")
        .operator(op.label())
        .tolerance("rank_cutoff", avar_core::nullspace::RANK_CUTOFF);
    Ok(emit(meta, KernelJson::new(&k, worst)))
}

#[derive(Debug, Serialize)]
struct ProjectionOut {
    constraint: ConstraintJson,
    projection: ProjectionJson,
}

fn projection_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let (spec, dom) = domain(c, &op, false)?;
    let (constraint, cj) = constraint(c, &spec, &dom)?;
    let mu = match &constraint {
        Constraint::Subset(cells) => dom.volume_measure(Some(cells))?,
        Constraint::Trace(g) => g.measure()?,
    };
    let kernel = kernel_basis(&op, c.max_degree);
    let pi = build_projection(&kernel, &mu)?;
    let samples = c.samples.unwrap_or(DEFAULT_CONSTANT_SAMPLES);
    let refine = c.refine.unwrap_or(3);
    let est = pi.linf_l1_constant(samples, refine, c.seed);
    let meta = Meta::new("projection")
        .operator(op.label())
        .domain(&spec)
        .seed(c.seed)
        .tolerance("rank_cutoff", avar_core::nullspace::RANK_CUTOFF);
    let out = ProjectionOut {
        constraint: cj,
        projection: ProjectionJson::new(&pi, &est),
    };
    if pi.is_rank_deficient() {
        return Err(Failure::Verification(
            emit(meta, out),
            format!(
                "projection rank {} < kernel dimension {}",
                pi.gram_rank(),
                pi.kernel_dimension()
            ),
        ));
    }
    Ok(emit(meta, out))
}

#[derive(Debug, Serialize)]
struct PoincareOut {
    constraint: ConstraintJson,
    estimate: ConstantJson,
}

fn problem(c: &Common) -> Result<(Operator, DomainSpec, PoincareProblem, ConstraintJson), Failure> {
    let op = operator(c)?;
    let (spec, dom) = domain(c, &op, false)?;
    let (constraint, cj) = constraint(c, &spec, &dom)?;
    let prob = PoincareProblem::new(&op, &dom, constraint)?;
    Ok((op, spec, prob, cj))
}

fn check_p(p: f64) -> Result<(), Failure> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Failure::Input("--p must be a finite number >= 1".into()));
    }
    Ok(())
}

fn estimate(
    c: &Common,
    prob: &PoincareProblem,
) -> Result<avar_core::inequality::ConstantEstimate, Failure> {
    check_p(c.p)?;
    if c.p == 2.0 {
        Ok(prob.poincare_constant_p2()?)
    } else {
        Ok(prob.sample_lower_bound(c.p, c.samples.unwrap_or(200), c.seed)?)
    }
}

fn poincare_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let (op, spec, prob, cj) = problem(c)?;
    let est = estimate(c, &prob)?;
    if let (Some(path), Some(v)) = (&c.eigenvector_out, &est.eigenvector) {
        let u = avar_core::grid::GridFunction::new(
            avar_core::grid::GridKind::Cell,
            op.dim_from(),
            v.clone(),
        )?;
        formats::save_grid_function(path, &u, op.dim_space())?;
    }
    let meta = Meta::new("poincare")
        .operator(op.label())
        .domain(&spec)
        .seed(c.seed)
        .tolerance("eigen_residual", avar_core::eigen::DEFAULT_RESIDUAL_TOL)
        .tolerance("rank_cutoff", avar_core::nullspace::RANK_CUTOFF);
    Ok(emit(
        meta,
        PoincareOut {
            constraint: cj,
            estimate: ConstantJson::from(&est),
        },
    ))
}

#[derive(Debug, Serialize)]
struct VerifyOut {
    constraint: ConstraintJson,
    estimate: Option<ConstantJson>,
    verification: VerificationJson,
}

fn verify_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let (op, spec, prob, cj) = problem(c)?;
    let (mut est, certified) = match c.constant {
        Some(value) => {
            check_p(c.p)?;
            if !(value > 0.0) {
                return Err(Failure::Input("--constant must be positive".into()));
            }
            let mut e = prob.sample_lower_bound(c.p, 0, c.seed)?;
            e.value = value;
            (e, true)
        }
        None => {
            let e = estimate(c, &prob)?;
            let certified = e.eigen.is_some();
            (e, certified)
        }
    };
    // Fresh samples come from the next seed.
    let seed = c.seed.wrapping_add(1);
    let rep = prob.verify(&est, c.samples.unwrap_or(200), seed)?;
    est.violations = rep.violations;
    let meta = Meta::new("verify")
        .operator(op.label())
        .domain(&spec)
        .seed(c.seed)
        .tolerance("tol_rel", rep.tol_rel);
    let text = emit(
        meta,
        VerifyOut {
            constraint: cj,
            estimate: c.constant.is_none().then(|| ConstantJson::from(&est)),
            verification: VerificationJson::new(est.value, &rep),
        },
    );
    if certified && rep.violations > 0 {
        return Err(Failure::Verification(
            text,
            format!("{} violations", rep.violations),
        ));
    }
    Ok(text)
}

fn sobolev_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let (spec, dom) = domain(c, &op, true)?;
    let rep = sobolev_trace_verify(&op, &dom, c.samples.unwrap_or(100), c.seed)?;
    let meta = Meta::new("sobolev")
        .operator(op.label())
        .domain(&spec)
        .seed(c.seed)
        .tolerance("dilation", 0.02);
    let j = SobolevJson::from(&rep);
    let bad = j.unbounded > 0 || !j.max_ratio.is_finite() || j.dilation_max_deviation > 0.02;
    let text = emit(meta, j);
    if bad {
        return Err(Failure::Verification(
            text,
            "unbounded ratio or dilation deviation above 2%".into(),
        ));
    }
    Ok(text)
}

fn scaling_cmd(c: &Common) -> CmdResult {
    let op = operator(c)?;
    if c.domain.is_some() {
        return Err(Failure::Input(
            "scaling runs on balls; --domain is not used".into(),
        ));
    }
    let rel = check_h(c.h.unwrap_or(DEFAULT_H))?;
    let cells = (1.0 / rel).round();
    if cells < 1.0 || (cells * rel - 1.0).abs() > 1e-9 {
        return Err(Failure::Input(
            "for scaling --h is h/r and must be 1/m for an integer m".into(),
        ));
    }
    let study = scaling_study(&op, &c.radii, cells as usize)?;
    let j = ScalingJson::from(&study);
    let text = match c.format {
        Format::Csv => j.table().to_csv(),
        Format::Json => {
            let meta = Meta::new("scaling")
                .operator(op.label())
                .h(rel)
                .tolerance("max_deviation", study.tolerance);
            emit(meta, &j)
        }
    };
    if !study.passed() {
        return Err(Failure::Verification(
            text,
            format!("C(r)/r deviates by {:.3e}", study.max_deviation),
        ));
    }
    Ok(text)
}

fn counterexample_cmd(c: &Common) -> CmdResult {
    json_only(c)?;
    let op = operator(c)?;
    let (spec, dom) = domain(c, &op, false)?;
    let coarse = counterexample_blowup(&op, &dom)?;
    let fine_spec = spec.with_h(dom.h() / 2.0);
    let fine = counterexample_blowup(&op, &fine_spec.build()?)?;
    let j = CounterexampleJson::new(&coarse, &fine);
    let meta = Meta::new("counterexample")
        .operator(op.label())
        .domain(&spec)
        .tolerance("variation", 10.0 * dom.h())
        .tolerance("refinement", 0.01);
    let ok = j.blowup_certified;
    let text = emit(meta, j);
    if !ok {
        return Err(Failure::Verification(text, "blow-up not certified".into()));
    }
    Ok(text)
}

fn run_suite(a: &SuiteArgs) -> CmdResult {
    let rep = suite::run_suite(&a.name, a.seed).map_err(Failure::Input)?;
    let text = match a.format {
        Format::Json => json::to_string(&rep),
        Format::Csv => {
            if rep.tables.is_empty() {
                return Err(Failure::Input(format!(
                    "suite {} has no table for CSV output",
                    a.name
                )));
            }
            let mut out = String::new();
            for t in &rep.tables {
                let table = Table {
                    headers: t.headers.clone(),
                    rows: t.rows.clone(),
                };
                out.push_str(&table.to_csv());
            }
            out
        }
    };
    if !rep.passed {
        let failed: Vec<String> = rep
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .flat_map(|c| c.failures.iter().map(move |f| format!("[{}] {f}", c.id)))
            .collect();
        return Err(Failure::Verification(text, failed.join("; ")));
    }
    Ok(text)
}
