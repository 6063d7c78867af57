//! Serializable report records and CSV tables.

use std::collections::BTreeMap;
use std::io;

use avar_core::ellipticity::{CancellingCertificate, EllipticityCertificate, Field, FieldVector};
use avar_core::inequality::{
    ConstantEstimate, CounterexampleReport, InequalityKind, Method, ScalingStudy, SobolevReport,
    VerificationReport,
};
use avar_core::nullspace::KernelBasis;
use avar_core::projection::{LinfL1Estimate, MeasureKind, ProjectionOperator};
use serde::Serialize;

use crate::formats::{DomainSpec, PolynomialSpec};

/// Metadata carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub command: String,
    pub operator: Option<String>,
    pub domain: Option<DomainSpec>,
    pub domain_hash: Option<String>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Meta {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            operator: None,
            domain: None,
            domain_hash: None,
            h: None,
            seed: None,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn operator(mut self, name: &str) -> Self {
        self.operator = Some(name.to_string());
        self
    }

    pub fn domain(mut self, spec: &DomainSpec) -> Self {
        self.domain_hash = Some(spec.hash());
        self.h = spec.h;
        self.domain = Some(spec.clone());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report<T: Serialize> {
    pub meta: Meta,
    pub result: T,
}

/// Real vectors as plain lists, complex ones as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum VectorJson {
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

impl From<&FieldVector> for VectorJson {
    fn from(v: &FieldVector) -> Self {
        match v {
            FieldVector::Real(x) => VectorJson::Real(x.clone()),
            FieldVector::Complex(z) => {
                VectorJson::Complex(z.iter().map(|c| [c.re, c.im]).collect())
            }
        }
    }
}

pub fn field_name(f: Field) -> &'static str {
    match f {
        Field::Real => "real",
        Field::Complex => "complex",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessJson {
    pub xi: VectorJson,
    pub v: VectorJson,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateJson {
    pub field: &'static str,
    pub verdict: &'static str,
    pub min_singular: f64,
    pub witness: Option<WitnessJson>,
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub near_tolerance: bool,
}

impl From<&EllipticityCertificate> for CertificateJson {
    fn from(c: &EllipticityCertificate) -> Self {
        Self {
            field: field_name(c.field),
            verdict: if c.is_elliptic() {
                "elliptic"
            } else {
                "not_elliptic"
            },
            min_singular: c.min_singular,
            witness: c.witness.as_ref().map(|w| WitnessJson {
                xi: (&w.xi).into(),
                v: (&w.v).into(),
                residual: w.residual,
            }),
            samples: c.samples,
            refine_rounds: c.refine_rounds,
            seed: c.seed,
            tolerance: c.tolerance,
            near_tolerance: c.near_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancellingJson {
    pub verdict: &'static str,
    pub residual_dim: usize,
    pub witness_directions: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub seed: u64,
}

impl From<&CancellingCertificate> for CancellingJson {
    fn from(c: &CancellingCertificate) -> Self {
        Self {
            verdict: if c.is_cancelling() {
                "cancelling"
            } else {
                "not_cancelling"
            },
            residual_dim: c.residual_dim,
            witness_directions: c.witness_directions.clone(),
            tolerance: c.tolerance,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelJson {
    pub dimension: usize,
    pub degree_cap: usize,
    pub dims_by_degree: Vec<usize>,
    pub stabilized: bool,
    pub stable_degree: Option<usize>,
    pub warning: Option<String>,
    /// Largest coefficient of `A p` over the basis.
    pub max_residual: f64,
    pub basis: Vec<PolynomialSpec>,
}

impl KernelJson {
    pub fn new(k: &KernelBasis, max_residual: f64) -> Self {
        Self {
            dimension: k.dimension(),
            degree_cap: k.degree_cap,
            dims_by_degree: k.dims_by_degree.clone(),
            stabilized: k.stabilized,
            stable_degree: k.stable_degree,
            warning: k.warning.clone(),
            max_residual,
            basis: k.elements.iter().map(PolynomialSpec::from_field).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinfL1Json {
    pub value: f64,
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
    pub evaluations: usize,
}

impl From<&LinfL1Estimate> for LinfL1Json {
    fn from(e: &LinfL1Estimate) -> Self {
        Self {
            value: e.value,
            samples: e.samples,
            refine_rounds: e.refine_rounds,
            seed: e.seed,
            evaluations: e.evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionJson {
    pub measure: &'static str,
    pub points: usize,
    pub total_mass: f64,
    pub kernel_dimension: usize,
    pub gram_rank: usize,
    pub l: usize,
    pub rank_deficient: bool,
    pub gram: Vec<Vec<f64>>,
    pub linf_l1: LinfL1Json,
    /// `C * l * mass(mu)`, the constant of `|Pi u|_{L^1} <= C l mu(S) |u|_{L^1(mu)}`.
    pub l1_chain_constant: f64,
}

impl ProjectionJson {
    pub fn new(p: &ProjectionOperator, c: &LinfL1Estimate) -> Self {
        let mu = p.measure();
        Self {
            measure: match mu.kind() {
                MeasureKind::Volume => "volume",
                MeasureKind::Surface => "surface",
            },
            points: mu.len(),
            total_mass: mu.total_mass(),
            kernel_dimension: p.kernel_dimension(),
            gram_rank: p.gram_rank(),
            l: p.gram_rank(),
            rank_deficient: p.is_rank_deficient(),
            gram: p.gram(),
            linf_l1: c.into(),
            l1_chain_constant: c.value * p.gram_rank() as f64 * mu.total_mass(),
        }
    }
}

pub fn inequality_name(k: InequalityKind) -> &'static str {
    match k {
        InequalityKind::SubsetPoincare => "subset_poincare",
        InequalityKind::TracePoincare => "trace_poincare",
        InequalityKind::SobolevTrace => "sobolev_trace",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenJson {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantJson {
    pub inequality: &'static str,
    pub p: f64,
    pub value: f64,
    pub method: &'static str,
    pub eigenvalue: Option<EigenJson>,
    pub h: f64,
    pub seed: Option<u64>,
    pub sample_count: usize,
    pub skipped: usize,
    pub blowup_witnesses: usize,
    pub violations: usize,
    pub gram_rank: usize,
    pub kernel_dimension: usize,
    pub warnings: Vec<String>,
}

impl From<&ConstantEstimate> for ConstantJson {
    fn from(e: &ConstantEstimate) -> Self {
        Self {
            inequality: inequality_name(e.inequality),
            p: e.p,
            value: e.value,
            method: match e.method {
                Method::Eigenproblem => "eigenproblem",
                Method::SampleMax => "sample_max",
            },
            eigenvalue: e.eigen.as_ref().map(|i| EigenJson {
                lambda: i.lambda,
                residual: i.residual,
                iterations: i.iterations,
                constraint_residual: i.constraint_residual,
            }),
            h: e.h,
            seed: e.seed,
            sample_count: e.sample_count,
            skipped: e.skipped,
            blowup_witnesses: e.blowup_witnesses,
            violations: e.violations,
            gram_rank: e.gram_rank,
            kernel_dimension: e.kernel_dimension,
            warnings: e.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationJson {
    pub constant: f64,
    pub samples: usize,
    pub skipped: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    pub tol_rel: f64,
    pub seed: u64,
}

impl VerificationJson {
    pub fn new(constant: f64, r: &VerificationReport) -> Self {
        Self {
            constant,
            samples: r.samples,
            skipped: r.skipped,
            violations: r.violations,
            worst_ratio: r.worst_ratio,
            tol_rel: r.tol_rel,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationRowJson {
    pub radius: f64,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevJson {
    pub samples: usize,
    pub skipped: usize,
    pub unbounded: usize,
    pub max_ratio: f64,
    pub h: f64,
    pub seed: u64,
    pub cancelling: CancellingJson,
    pub dilation: Vec<DilationRowJson>,
    pub dilation_max_deviation: f64,
}

impl From<&SobolevReport> for SobolevJson {
    fn from(r: &SobolevReport) -> Self {
        Self {
            samples: r.samples,
            skipped: r.skipped,
            unbounded: r.unbounded,
            max_ratio: r.max_ratio,
            h: r.h,
            seed: r.seed,
            cancelling: (&r.cancelling).into(),
            dilation: r
                .dilation
                .rows
                .iter()
                .map(|d| DilationRowJson {
                    radius: d.radius,
                    h: d.h,
                    lhs: d.lhs,
                    rhs: d.rhs,
                    ratio: d.ratio,
                })
                .collect(),
            dilation_max_deviation: r.dilation.max_deviation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRowJson {
    pub radius: f64,
    pub h: f64,
    pub constant: f64,
    pub ratio: f64,
    pub eigen_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingJson {
    pub rows: Vec<ScalingRowJson>,
    pub mean_ratio: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&ScalingStudy> for ScalingJson {
    fn from(s: &ScalingStudy) -> Self {
        Self {
            rows: s
                .rows
                .iter()
                .map(|r| ScalingRowJson {
                    radius: r.radius,
                    h: r.h,
                    constant: r.constant,
                    ratio: r.ratio,
                    eigen_residual: r.eigen_residual,
                })
                .collect(),
            mean_ratio: s.mean_ratio,
            max_deviation: s.max_deviation,
            tolerance: s.tolerance,
            passed: s.passed(),
        }
    }
}

impl ScalingJson {
    pub fn table(&self) -> Table {
        Table {
            headers: vec!["radius", "h", "constant", "ratio", "eigen_residual"],
            rows: self
                .rows
                .iter()
                .map(|r| vec![r.radius, r.h, r.constant, r.ratio, r.eigen_residual])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleJson {
    pub normal: Vec<f64>,
    pub direction: Vec<f64>,
    pub h: f64,
    pub interior_variation: f64,
    pub total_variation: f64,
    pub l1_distance: f64,
    pub l1_distance_refined: f64,
    pub refinement_change: f64,
    pub projection_coefficients: Vec<f64>,
    pub gamma_facets: usize,
    pub gram_rank: usize,
    pub kernel_warning: Option<String>,
    /// Interior variation zero, total variation at most `10 h`, and the
    /// `L^1` distance positive and stable within 1% under `h -> h/2`.
    pub blowup_certified: bool,
}

impl CounterexampleJson {
    pub fn new(coarse: &CounterexampleReport, fine: &CounterexampleReport) -> Self {
        let change = (fine.l1_distance - coarse.l1_distance).abs() / coarse.l1_distance;
        Self {
            normal: coarse.normal.clone(),
            direction: coarse.direction.clone(),
            h: coarse.h,
            interior_variation: coarse.interior_variation,
            total_variation: coarse.total_variation,
            l1_distance: coarse.l1_distance,
            l1_distance_refined: fine.l1_distance,
            refinement_change: change,
            projection_coefficients: coarse.projection_coefficients.clone(),
            gamma_facets: coarse.gamma_facets,
            gram_rank: coarse.gram_rank,
            kernel_warning: coarse.kernel_warning.clone(),
            blowup_certified: coarse.interior_variation == 0.0
                && coarse.total_variation <= 10.0 * coarse.h
                && coarse.l1_distance > 0.0
                && change <= 0.01,
        }
    }
}

/// A numeric table for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.headers)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}
