//! Batch front end: parse a run configuration, execute the requested slice
//! of the pipeline (expand, audits, residuals, fits, bound checks), write
//! machine-readable tables into the output directory, and print a one-page
//! summary on standard output.
//!
//! Determinism contract: for a fixed config, precision, and thread count,
//! every output file is byte-identical across reruns. All scalar values
//! pass through [`Scalar::to_decimal`], and every table is emitted in a
//! sorted order that does not depend on hash state or timing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::cohomology::{diophantine_profile, Frequency};
use crate::diagnostics::{
    check_inductive_conditions, degree_audit, gevrey_fit, residual_order_fit, scale_series_lower,
    scale_series_maximal, ConditionKind, DegreeAudit, GevreyFit, InductiveReport,
};
use crate::error::{Error, Result};
use crate::fourier::{NormParams, Potential, PotentialTerm, TrigPoly};
use crate::lower::{expand_lower, find_beta0, residual_lower, LowerExpansion, LowerModel,
    LowerTopology};
use crate::maximal::{expand, residual, MaximalExpansion, MaximalModel, ResidualPoint};
use crate::scalar::{set_precision_bits, MpReal, Scalar};

/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "lindstedt",
    version,
    about = "Arbitrary-order expansions of invariant tori for dissipative standard-like maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Expand a maximal torus: coefficient dump, norm table, degree audit.
    ExpandMax(CommonArgs),
    /// Expand a lower-dimensional torus along its winding vector.
    ExpandLower(CommonArgs),
    /// Evaluate truncated-residual norms on the configured eps grid.
    Residual(CommonArgs),
    /// Fit the factorial-growth envelope of the coefficient norms.
    GevreyFit(CommonArgs),
    /// Rescale the series and evaluate the inductive smallness conditions.
    CheckBounds(CommonArgs),
    /// Tabulate small divisors and the empirical Diophantine profile.
    ProfileFrequency(CommonArgs),
}

impl Verb {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Verb::ExpandMax(a)
            | Verb::ExpandLower(a)
            | Verb::Residual(a)
            | Verb::GevreyFit(a)
            | Verb::CheckBounds(a)
            | Verb::ProfileFrequency(a) => a,
        }
    }

    fn kind(&self) -> VerbKind {
        match self {
            Verb::ExpandMax(_) => VerbKind::ExpandMax,
            Verb::ExpandLower(_) => VerbKind::ExpandLower,
            Verb::Residual(_) => VerbKind::Residual,
            Verb::GevreyFit(_) => VerbKind::GevreyFit,
            Verb::CheckBounds(_) => VerbKind::CheckBounds,
            Verb::ProfileFrequency(_) => VerbKind::ProfileFrequency,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VerbKind {
    ExpandMax,
    ExpandLower,
    Residual,
    GevreyFit,
    CheckBounds,
    ProfileFrequency,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (reserved; current pipelines are sequential).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Working precision in bits: 53 = hardware binary64, >= 64 = software
    /// high precision (overrides the config's problem.precision_bits).
    #[arg(long)]
    pub precision_bits: Option<u32>,
}

// ---------------------------------------------------------------------------
// Raw config file (serde view; all numbers are decimal strings)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: Option<u32>,
    problem: Option<ProblemSection>,
    potential: Option<PotentialSection>,
    frequency: Option<FrequencySection>,
    topology: Option<TopologySection>,
    norm: Option<NormSection>,
    residual: Option<ResidualSection>,
    fit: Option<FitSection>,
    bounds: Option<BoundsSection>,
    profile: Option<ProfileSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    kind: Option<String>,
    dimension: Option<usize>,
    order: Option<usize>,
    gamma: Option<String>,
    precision_bits: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSection {
    term: Option<Vec<TermSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSection {
    mode: Vec<i64>,
    cos: Option<String>,
    sin: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrequencySection {
    kind: String,
    omega: Option<Vec<String>>,
    nu: Option<String>,
    tau: Option<String>,
    numerator: Option<i64>,
    denominator: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    k: Vec<i64>,
    k_perp: Option<Vec<i64>>,
    beta0_index: Option<usize>,
    scan_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormSection {
    rho: Option<String>,
    r: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResidualSection {
    n_trunc: Vec<usize>,
    eps: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    n_lo: usize,
    n_hi: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    a: String,
    b: String,
    sigma: String,
    eta: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSection {
    ell_max: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Maximal,
    LowerConservative,
    LowerDissipative,
}

impl ProblemKind {
    pub fn is_lower(self) -> bool {
        !matches!(self, ProblemKind::Maximal)
    }
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Maximal => "maximal",
            ProblemKind::LowerConservative => "lower-conservative",
            ProblemKind::LowerDissipative => "lower-dissipative",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TermSpec {
    pub mode: Vec<i64>,
    pub cos: String,
    pub sin: String,
}

#[derive(Clone, Debug)]
pub enum FrequencySpec {
    Golden,
    Explicit {
        omega: Vec<String>,
        nu: f64,
        tau: f64,
    },
}

#[derive(Clone, Debug)]
pub struct TopologySpec {
    pub k: Vec<i64>,
    pub k_perp: Option<Vec<i64>>,
    pub beta0_index: usize,
    pub scan_points: usize,
}

#[derive(Clone, Debug)]
pub struct ResidualSpec {
    pub n_trunc: Vec<usize>,
    pub eps: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BoundsSpec {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub eta: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub dimension: usize,
    pub order: usize,
    pub gamma: String,
    pub precision_bits: u32,
    pub potential_terms: Vec<TermSpec>,
    pub frequency: FrequencySpec,
    pub topology: Option<TopologySpec>,
    pub norm_rho: String,
    pub norm_r: String,
    pub residual: Option<ResidualSpec>,
    pub fit: Option<(usize, usize)>,
    pub bounds: Option<BoundsSpec>,
    pub profile_ell_max: i64,
    pub out_dir: PathBuf,
}

/// Checks a decimal string and returns its binary64 value for range
/// checks; high-precision runs re-parse the original string at full
/// precision, so nothing is lost here.
fn check_decimal(s: &str, field: &str, violations: &mut Vec<String>) -> Option<f64> {
    match f64::parse_decimal(s) {
        Some(v) => Some(v),
        None => {
            violations.push(format!("{field}: cannot parse decimal string '{s}'"));
            None
        }
    }
}

/// Parses and validates a run configuration. All field-level violations
/// are collected and reported together. A rational frequency is rejected
/// with the resonance error class after structural validation.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;

    let mut v: Vec<String> = Vec::new();

    match file.schema_version {
        None => v.push("schema_version: missing (expected 1)".into()),
        Some(s) if s != SCHEMA_VERSION => {
            v.push(format!("schema_version: unsupported value {s} (expected 1)"))
        }
        _ => {}
    }

    // problem
    let (mut kind, mut dimension, mut order) = (None, 1usize, 1usize);
    let mut gamma = "0".to_string();
    let mut precision_bits = 53u32;
    match &file.problem {
        None => v.push("problem: section missing".into()),
        Some(p) => {
            match p.kind.as_deref() {
                Some("maximal") => kind = Some(ProblemKind::Maximal),
                Some("lower-conservative") => kind = Some(ProblemKind::LowerConservative),
                Some("lower-dissipative") => kind = Some(ProblemKind::LowerDissipative),
                Some(other) => v.push(format!(
                    "problem.kind: unknown '{other}' (expected maximal | lower-conservative | lower-dissipative)"
                )),
                None => v.push("problem.kind: missing".into()),
            }
            match p.dimension {
                Some(d) if d >= 1 => dimension = d,
                Some(d) => v.push(format!("problem.dimension: must be >= 1, got {d}")),
                None => v.push("problem.dimension: missing".into()),
            }
            match p.order {
                Some(n) if n >= 1 => order = n,
                Some(n) => v.push(format!("problem.order: must be >= 1, got {n}")),
                None => v.push("problem.order: missing".into()),
            }
            match &p.gamma {
                Some(g) => {
                    if check_decimal(g, "problem.gamma", &mut v).is_some() {
                        gamma = g.clone();
                    }
                }
                None => v.push("problem.gamma: missing".into()),
            }
            if let Some(bits) = p.precision_bits {
                precision_bits = bits;
            }
        }
    }
    if precision_bits != 53 && !(64..=1_048_576).contains(&precision_bits) {
        v.push(format!(
            "problem.precision_bits: must be 53 (binary64) or in 64..=1048576, got {precision_bits}"
        ));
    }
    let gamma_val = f64::parse_decimal(&gamma).unwrap_or(0.0);
    match kind {
        Some(ProblemKind::LowerConservative) if gamma_val != 0.0 => {
            v.push("problem.gamma: must be 0 for lower-conservative runs".into())
        }
        Some(ProblemKind::LowerDissipative) if gamma_val == 0.0 => {
            v.push("problem.gamma: must be nonzero for lower-dissipative runs".into())
        }
        _ => {}
    }
    if kind.map(ProblemKind::is_lower).unwrap_or(false) && dimension != 2 {
        v.push(format!(
            "problem.dimension: lower-dimensional tori require dimension 2, got {dimension}"
        ));
    }

    // potential
    let mut potential_terms = Vec::new();
    match &file.potential {
        None => v.push("potential: section missing".into()),
        Some(p) => {
            for (i, t) in p.term.as_deref().unwrap_or(&[]).iter().enumerate() {
                if t.mode.len() != dimension {
                    v.push(format!(
                        "potential.term[{i}].mode: length {} does not match dimension {dimension}",
                        t.mode.len()
                    ));
                }
                let cos = t.cos.clone().unwrap_or_else(|| "0".to_string());
                let sin = t.sin.clone().unwrap_or_else(|| "0".to_string());
                check_decimal(&cos, &format!("potential.term[{i}].cos"), &mut v);
                check_decimal(&sin, &format!("potential.term[{i}].sin"), &mut v);
                potential_terms.push(TermSpec {
                    mode: t.mode.clone(),
                    cos,
                    sin,
                });
            }
        }
    }

    // frequency
    let mut frequency = None;
    let mut rational: Option<(i64, i64)> = None;
    match &file.frequency {
        None => v.push("frequency: section missing".into()),
        Some(f) => match f.kind.as_str() {
            "golden" => {
                if f.omega.is_some() || f.nu.is_some() || f.tau.is_some() {
                    v.push(
                        "frequency: golden kind takes no omega/nu/tau fields".into(),
                    );
                }
                if f.numerator.is_some() || f.denominator.is_some() {
                    v.push("frequency: golden kind takes no numerator/denominator".into());
                }
                frequency = Some(FrequencySpec::Golden);
            }
            "explicit" => {
                let omega = f.omega.clone().unwrap_or_default();
                if omega.is_empty() {
                    v.push("frequency.omega: required (non-empty) for explicit kind".into());
                }
                for (i, w) in omega.iter().enumerate() {
                    check_decimal(w, &format!("frequency.omega[{i}]"), &mut v);
                }
                let mut nu = 0.0;
                let mut tau = 0.0;
                match &f.nu {
                    Some(s) => {
                        if let Some(x) = check_decimal(s, "frequency.nu", &mut v) {
                            if x > 0.0 {
                                nu = x;
                            } else {
                                v.push(format!("frequency.nu: must be positive, got {x}"));
                            }
                        }
                    }
                    None => v.push("frequency.nu: required for explicit kind".into()),
                }
                match &f.tau {
                    Some(s) => {
                        if let Some(x) = check_decimal(s, "frequency.tau", &mut v) {
                            if x > 0.0 {
                                tau = x;
                            } else {
                                v.push(format!("frequency.tau: must be positive, got {x}"));
                            }
                        }
                    }
                    None => v.push("frequency.tau: required for explicit kind".into()),
                }
                frequency = Some(FrequencySpec::Explicit { omega, nu, tau });
            }
            "rational" => match (f.numerator, f.denominator) {
                (Some(p), Some(q)) if q != 0 => rational = Some((p, q)),
                _ => v.push(
                    "frequency: rational kind needs numerator and a nonzero denominator".into(),
                ),
            },
            other => v.push(format!(
                "frequency.kind: unknown '{other}' (expected golden | explicit | rational)"
            )),
        },
    }
    if let Some(FrequencySpec::Explicit { omega, .. }) = &frequency {
        let want = if kind.map(ProblemKind::is_lower).unwrap_or(false) {
            1
        } else {
            dimension
        };
        if !omega.is_empty() && omega.len() != want {
            v.push(format!(
                "frequency.omega: expected {want} component(s) for this problem, got {}",
                omega.len()
            ));
        }
    }

    // topology
    let mut topology = None;
    if let Some(t) = &file.topology {
        if t.k.len() != 2 {
            v.push(format!(
                "topology.k: winding vector must have two components, got {}",
                t.k.len()
            ));
        } else if let Err(e) = LowerTopology::new(t.k.clone(), t.k_perp.clone()) {
            v.push(format!("topology: {e}"));
        }
        topology = Some(TopologySpec {
            k: t.k.clone(),
            k_perp: t.k_perp.clone(),
            beta0_index: t.beta0_index.unwrap_or(0),
            scan_points: t.scan_points.unwrap_or(0),
        });
    } else if kind.map(ProblemKind::is_lower).unwrap_or(false) {
        v.push("topology: section required for lower-dimensional runs".into());
    }

    // norm
    let (mut norm_rho, mut norm_r) = ("0".to_string(), "0".to_string());
    if let Some(n) = &file.norm {
        if let Some(rho) = &n.rho {
            if let Some(x) = check_decimal(rho, "norm.rho", &mut v) {
                if x < 0.0 {
                    v.push(format!("norm.rho: must be >= 0, got {x}"));
                }
                norm_rho = rho.clone();
            }
        }
        if let Some(r) = &n.r {
            if let Some(x) = check_decimal(r, "norm.r", &mut v) {
                if x < 0.0 {
                    v.push(format!("norm.r: must be >= 0, got {x}"));
                }
                norm_r = r.clone();
            }
        }
    }

    // residual
    let mut residual_spec = None;
    if let Some(r) = &file.residual {
        if r.n_trunc.is_empty() {
            v.push("residual.n_trunc: must be non-empty".into());
        }
        for &n in &r.n_trunc {
            if n > order {
                v.push(format!(
                    "residual.n_trunc: truncation {n} exceeds expansion order {order}"
                ));
            }
        }
        if r.eps.is_empty() {
            v.push("residual.eps: must be non-empty".into());
        }
        let mut prev = f64::INFINITY;
        for (i, e) in r.eps.iter().enumerate() {
            if let Some(x) = check_decimal(e, &format!("residual.eps[{i}]"), &mut v) {
                if x <= 0.0 {
                    v.push(format!("residual.eps[{i}]: must be positive, got {x}"));
                }
                if x >= prev {
                    v.push(format!(
                        "residual.eps[{i}]: grid must be strictly decreasing ({x} after {prev})"
                    ));
                }
                prev = x;
            }
        }
        residual_spec = Some(ResidualSpec {
            n_trunc: r.n_trunc.clone(),
            eps: r.eps.clone(),
        });
    }

    // fit
    let mut fit = None;
    if let Some(f) = &file.fit {
        if f.n_lo < 3 {
            v.push(format!("fit.n_lo: must be >= 3, got {}", f.n_lo));
        }
        if f.n_hi < f.n_lo {
            v.push(format!(
                "fit: window [{}, {}] is empty",
                f.n_lo, f.n_hi
            ));
        }
        if f.n_hi > order {
            v.push(format!(
                "fit.n_hi: window end {} exceeds expansion order {order}",
                f.n_hi
            ));
        }
        fit = Some((f.n_lo, f.n_hi));
    }

    // bounds
    let mut bounds = None;
    if let Some(b) = &file.bounds {
        let a = check_decimal(&b.a, "bounds.a", &mut v).unwrap_or(0.0);
        let bb = check_decimal(&b.b, "bounds.b", &mut v).unwrap_or(0.0);
        let sigma = check_decimal(&b.sigma, "bounds.sigma", &mut v).unwrap_or(0.0);
        for (name, x) in [("bounds.a", a), ("bounds.b", bb), ("bounds.sigma", sigma)] {
            if x <= 0.0 {
                v.push(format!("{name}: must be positive, got {x}"));
            }
        }
        if let Some(eta) = &b.eta {
            if let Some(x) = check_decimal(eta, "bounds.eta", &mut v) {
                if x <= 0.0 {
                    v.push(format!("bounds.eta: must be positive, got {x}"));
                }
            }
        }
        bounds = Some(BoundsSpec {
            a,
            b: bb,
            sigma,
            eta: b.eta.clone(),
        });
    }

    // profile
    let mut profile_ell_max = 1000i64;
    if let Some(p) = &file.profile {
        if let Some(m) = p.ell_max {
            if m < 1 {
                v.push(format!("profile.ell_max: must be >= 1, got {m}"));
            }
            profile_ell_max = m;
        }
    }

    let out_dir = PathBuf::from(
        file.output
            .as_ref()
            .and_then(|o| o.dir.clone())
            .unwrap_or_else(|| "out".to_string()),
    );

    if !v.is_empty() {
        return Err(Error::Config(v.join("\n")));
    }

    // A rational rotation number is an exact resonance: q * omega is a
    // multiple of the full circle, so the multiplier vanishes at |q|.
    if let Some((p, q)) = rational {
        let g = gcd_i64(p.unsigned_abs(), q.unsigned_abs()).max(1);
        return Err(Error::ExactResonance {
            mode: vec![(q.unsigned_abs() / g) as i64],
        });
    }

    Ok(RunConfig {
        problem: kind.expect("validated above"),
        dimension,
        order,
        gamma,
        precision_bits,
        potential_terms,
        frequency: frequency.expect("validated above"),
        topology,
        norm_rho,
        norm_r,
        residual: residual_spec,
        fit,
        bounds,
        profile_ell_max,
        out_dir,
    })
}

fn gcd_i64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Runs a parsed command line to completion, printing the summary.
pub fn execute(cli: Cli) -> Result<()> {
    let args = cli.verb.common();
    let mut cfg = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(bits) = args.precision_bits {
        if bits != 53 && !(64..=1_048_576).contains(&bits) {
            return Err(Error::Config(format!(
                "--precision-bits: must be 53 (binary64) or in 64..=1048576, got {bits}"
            )));
        }
        cfg.precision_bits = bits;
    }
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::Config("--threads: must be at least 1".into()));
        }
    }
    let verb = cli.verb.kind();
    let lines = if cfg.precision_bits == 53 {
        run_typed::<f64>(&cfg, verb)?
    } else {
        set_precision_bits(cfg.precision_bits);
        run_typed::<MpReal>(&cfg, verb)?
    };
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn parse_field<T: Scalar>(s: &str, field: &str) -> Result<T> {
    T::parse_decimal(s)
        .ok_or_else(|| Error::Config(format!("{field}: cannot parse decimal string '{s}'")))
}

fn build_potential<T: Scalar>(cfg: &RunConfig) -> Result<Potential<T>> {
    let mut terms = Vec::with_capacity(cfg.potential_terms.len());
    for (i, t) in cfg.potential_terms.iter().enumerate() {
        terms.push(PotentialTerm {
            mode: t.mode.clone(),
            cos_amp: parse_field::<T>(&t.cos, &format!("potential.term[{i}].cos"))?,
            sin_amp: parse_field::<T>(&t.sin, &format!("potential.term[{i}].sin"))?,
        });
    }
    Potential::from_terms(cfg.dimension, &terms)
}

fn build_frequency<T: Scalar>(cfg: &RunConfig) -> Result<Frequency<T>> {
    match &cfg.frequency {
        FrequencySpec::Golden => Ok(Frequency::golden()),
        FrequencySpec::Explicit { omega, nu, tau } => {
            let om = omega
                .iter()
                .enumerate()
                .map(|(i, w)| parse_field::<T>(w, &format!("frequency.omega[{i}]")))
                .collect::<Result<Vec<T>>>()?;
            Frequency::explicit(om, *nu, *tau)
        }
    }
}

fn norm_params<T: Scalar>(cfg: &RunConfig) -> Result<NormParams<T>> {
    NormParams::new(
        parse_field::<T>(&cfg.norm_rho, "norm.rho")?,
        parse_field::<T>(&cfg.norm_r, "norm.r")?,
    )
}

fn build_maximal<T: Scalar>(cfg: &RunConfig) -> Result<(MaximalModel<T>, MaximalExpansion<T>)> {
    let model = MaximalModel::new(
        build_potential(cfg)?,
        build_frequency(cfg)?,
        parse_field::<T>(&cfg.gamma, "problem.gamma")?,
        cfg.order,
    )?;
    let ex = expand(&model)?;
    Ok((model, ex))
}

struct LowerRun<T: Scalar> {
    model: LowerModel<T>,
    ex: LowerExpansion<T>,
    roots: Vec<T>,
}

fn build_lower<T: Scalar>(cfg: &RunConfig) -> Result<LowerRun<T>> {
    let topo_spec = cfg
        .topology
        .as_ref()
        .ok_or_else(|| Error::Config("topology: section required".into()))?;
    let potential = build_potential::<T>(cfg)?;
    let topology = LowerTopology::new(topo_spec.k.clone(), topo_spec.k_perp.clone())?;
    let mut roots = find_beta0(&potential, &topology, topo_spec.scan_points)?;
    roots.sort_by(|a, b| a.to_f64().total_cmp(&b.to_f64()));
    if topo_spec.beta0_index >= roots.len() {
        return Err(Error::Config(format!(
            "topology.beta0_index: {} out of range ({} root(s) found)",
            topo_spec.beta0_index,
            roots.len()
        )));
    }
    let beta0 = roots[topo_spec.beta0_index].clone();
    let model = LowerModel::new(
        potential,
        build_frequency(cfg)?,
        topology,
        parse_field::<T>(&cfg.gamma, "problem.gamma")?,
        beta0,
        cfg.order,
    )?;
    let ex = expand_lower(&model)?;
    Ok(LowerRun { model, ex, roots })
}

fn run_typed<T: Scalar>(cfg: &RunConfig, verb: VerbKind) -> Result<Vec<String>> {
    match verb {
        VerbKind::ExpandMax => {
            if cfg.problem != ProblemKind::Maximal {
                return Err(Error::Config(format!(
                    "expand-max requires problem.kind = maximal, config says {}",
                    cfg.problem.as_str()
                )));
            }
            run_expand_max::<T>(cfg)
        }
        VerbKind::ExpandLower => {
            if !cfg.problem.is_lower() {
                return Err(Error::Config(
                    "expand-lower requires problem.kind = lower-conservative or lower-dissipative"
                        .into(),
                ));
            }
            run_expand_lower::<T>(cfg)
        }
        VerbKind::Residual => run_residual::<T>(cfg),
        VerbKind::GevreyFit => run_gevrey::<T>(cfg),
        VerbKind::CheckBounds => run_check_bounds::<T>(cfg),
        VerbKind::ProfileFrequency => run_profile::<T>(cfg),
    }
}

// ---------------------------------------------------------------------------
// Tables and dumps
// ---------------------------------------------------------------------------

/// One line of the coefficient dump. All numeric payloads are decimal
/// strings, so serialization is the identity on parsed records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpRecord {
    /// "u" or "g" for series coefficients, "mu" for drifts, "beta" for the
    /// per-order free constants of lower runs.
    pub kind: String,
    pub n: usize,
    /// Empty for mu/beta records.
    pub mode: Vec<i64>,
    /// Range-component index.
    pub component: usize,
    pub re: String,
    pub im: String,
}

pub fn serialize_dump(records: &[DumpRecord]) -> String {
    let mut s = String::from("kind,n,mode,component,re,im\n");
    for r in records {
        let mode = r
            .mode
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "{},{},{},{},{},{}", r.kind, r.n, mode, r.component, r.re, r.im);
    }
    s
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("kind,n,mode,component,re,im") => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "coefficient dump header missing or unrecognized: {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::InvalidArgument(format!(
                "dump line {}: expected 6 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let mode = if cols[2].is_empty() {
            Vec::new()
        } else {
            cols[2]
                .split(' ')
                .map(|x| {
                    x.parse::<i64>().map_err(|_| {
                        Error::InvalidArgument(format!("dump line {}: bad mode '{}'", i + 2, cols[2]))
                    })
                })
                .collect::<Result<Vec<i64>>>()?
        };
        out.push(DumpRecord {
            kind: cols[0].to_string(),
            n: cols[1]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("dump line {}: bad order", i + 2)))?,
            mode,
            component: cols[3].parse().map_err(|_| {
                Error::InvalidArgument(format!("dump line {}: bad component", i + 2))
            })?,
            re: cols[4].to_string(),
            im: cols[5].to_string(),
        });
    }
    Ok(out)
}

fn coefficient_records<T: Scalar>(
    series_kind: &str,
    series: &[TrigPoly<T>],
    mu: &[Vec<T>],
    beta: Option<&[T]>,
) -> Vec<DumpRecord> {
    let zero = T::zero().to_decimal();
    let mut records = Vec::new();
    for (n, poly) in series.iter().enumerate() {
        for (mode, vals) in poly.iter() {
            for (c, val) in vals.iter().enumerate() {
                records.push(DumpRecord {
                    kind: series_kind.to_string(),
                    n,
                    mode: mode.clone(),
                    component: c,
                    re: val.re.to_decimal(),
                    im: val.im.to_decimal(),
                });
            }
        }
    }
    for (n, mun) in mu.iter().enumerate() {
        for (c, val) in mun.iter().enumerate() {
            records.push(DumpRecord {
                kind: "mu".to_string(),
                n,
                mode: Vec::new(),
                component: c,
                re: val.to_decimal(),
                im: zero.clone(),
            });
        }
    }
    if let Some(betas) = beta {
        for (n, b) in betas.iter().enumerate() {
            records.push(DumpRecord {
                kind: "beta".to_string(),
                n,
                mode: Vec::new(),
                component: 0,
                re: b.to_decimal(),
                im: zero.clone(),
            });
        }
    }
    records
}

fn euclid_norm<T: Scalar>(v: &[T]) -> T {
    let mut acc = T::zero();
    for x in v {
        acc = acc + x.clone() * x.clone();
    }
    acc.sqrt()
}

/// Writes the norm table and returns (n, norm-as-f64) pairs for fits.
fn norm_table<T: Scalar>(
    series: &[TrigPoly<T>],
    mu: &[Vec<T>],
    np: &NormParams<T>,
) -> Result<(String, Vec<(usize, f64)>)> {
    let mut table = String::from("n,norm,mu_abs,degree\n");
    let mut points = Vec::with_capacity(series.len());
    for (n, poly) in series.iter().enumerate() {
        let norm = poly.norm(np)?;
        let mu_abs = euclid_norm(&mu[n]);
        let _ = writeln!(
            table,
            "{n},{},{},{}",
            norm.to_decimal(),
            mu_abs.to_decimal(),
            poly.degree()
        );
        points.push((n, norm.to_f64()));
    }
    Ok((table, points))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents.as_bytes())?;
    Ok(path)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn audit_line(audit: &DegreeAudit) -> String {
    if audit.ok {
        let max_attained = audit.rows.iter().map(|r| r.attained).max().unwrap_or(0);
        let max_bound = audit.rows.iter().map(|r| r.bound).max().unwrap_or(0);
        format!("degree audit: OK (max attained {max_attained} <= bound {max_bound})")
    } else {
        format!("degree audit: FAILED at orders {:?}", audit.failures)
    }
}

fn fit_report_text(fit: &GevreyFit) -> String {
    let skipped = fit
        .skipped
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "a = {}\nr = {}\nsigma = {}\nwindow = {}..{}\nused = {}\nskipped = {}\nresidual_rms = {}\nsigma_stirling = {}\nstirling_delta = {}\n",
        fmt_f64(fit.a),
        fmt_f64(fit.r),
        fmt_f64(fit.sigma),
        fit.fit_window.0,
        fit.fit_window.1,
        fit.used,
        skipped,
        fmt_f64(fit.residual_rms),
        fmt_f64(fit.sigma_stirling),
        fmt_f64(fit.stirling_delta),
    )
}

fn bounds_report_text<T: Scalar>(
    report: &InductiveReport,
    eta: &T,
    upsilon_scaled: &T,
    gamma_scaled: &T,
    envelope_violations: &[usize],
    envelope_checked: usize,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind = {}", report.kind);
    let _ = writeln!(s, "eta = {}", eta.to_decimal());
    let _ = writeln!(s, "upsilon_scaled = {}", upsilon_scaled.to_decimal());
    let _ = writeln!(s, "gamma_scaled = {}", gamma_scaled.to_decimal());
    let _ = writeln!(s, "gamma_sigma = {}", fmt_f64(report.gamma_sigma));
    for c in &report.checks {
        let _ = writeln!(
            s,
            "check: {} | lhs = {} | rhs = {} | {}",
            c.label,
            fmt_f64(c.lhs),
            fmt_f64(c.rhs),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "envelope_orders_checked = {envelope_checked} (n >= 4)");
    let viol = if envelope_violations.is_empty() {
        "none".to_string()
    } else {
        envelope_violations
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "envelope_violations = {viol}");
    let _ = writeln!(
        s,
        "all_pass = {}",
        report.all_pass && envelope_violations.is_empty()
    );
    s
}

// ---------------------------------------------------------------------------
// Verb bodies
// ---------------------------------------------------------------------------

fn describe_common<T: Scalar>(cfg: &RunConfig, freq: &Frequency<T>) -> Vec<String> {
    let omega = freq
        .omega()
        .iter()
        .map(|w| w.to_decimal())
        .collect::<Vec<_>>()
        .join(" ");
    let kind = match freq.kind() {
        crate::cohomology::FrequencyKind::GoldenMean => "golden",
        crate::cohomology::FrequencyKind::Explicit => "explicit",
        crate::cohomology::FrequencyKind::ContinuedFraction => "continued-fraction",
    };
    vec![
        format!(
            "problem: {} (dimension {}, order {}, gamma {}, precision {} bits)",
            cfg.problem.as_str(),
            cfg.dimension,
            cfg.order,
            cfg.gamma,
            cfg.precision_bits
        ),
        format!(
            "frequency: {kind} omega = [{omega}] nu = {} tau = {}",
            fmt_f64(freq.nu()),
            fmt_f64(freq.tau())
        ),
    ]
}

fn expansion_stat_lines(
    orders: usize,
    modes: usize,
    max_inv: f64,
    lemma_violations: usize,
    cert_violations: usize,
    warnings: &[String],
) -> Vec<String> {
    let mut lines = vec![
        format!(
            "expansion: {orders} order(s) solved, {modes} mode(s), max |1/multiplier| = {}",
            fmt_f64(max_inv)
        ),
        format!(
            "small divisors: {lemma_violations} lemma-bound violation(s), {cert_violations} certificate violation(s)"
        ),
    ];
    if warnings.is_empty() {
        lines.push("warnings: none".to_string());
    } else {
        for w in warnings {
            lines.push(format!("warning: {w}"));
        }
    }
    lines
}

fn run_expand_max<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let (model, ex) = build_maximal::<T>(cfg)?;
    let np = norm_params::<T>(cfg)?;
    let records = coefficient_records("u", &ex.u, &ex.mu, None);
    let dump = serialize_dump(&records);
    let (table, _) = norm_table(&ex.u, &ex.mu, &np)?;
    let audit = degree_audit(&ex.u, model.potential.degree_j());

    let coeff_path = write_out(&cfg.out_dir, "coefficients.csv", &dump)?;
    let norm_path = write_out(&cfg.out_dir, "norms.csv", &table)?;

    let mut lines = describe_common(cfg, &model.freq);
    lines.push(format!(
        "potential: {} term(s), degree J = {}, Upsilon = {}",
        cfg.potential_terms.len(),
        model.potential.degree_j(),
        model.potential.upsilon().to_decimal()
    ));
    let modes: usize = ex.solves.iter().map(|s| s.modes_solved).sum();
    let max_inv = ex
        .solves
        .iter()
        .map(|s| s.max_inv_multiplier)
        .fold(0.0, f64::max);
    let lemma: usize = ex.solves.iter().map(|s| s.lemma_violations.len()).sum();
    let cert: usize = ex
        .solves
        .iter()
        .map(|s| s.certificate_violations.len())
        .sum();
    lines.extend(expansion_stat_lines(
        ex.order(),
        modes,
        max_inv,
        lemma,
        cert,
        &ex.warnings,
    ));
    lines.push(audit_line(&audit));
    lines.push(format!(
        "wrote: {} ({} record(s)), {} ({} row(s))",
        coeff_path.display(),
        records.len(),
        norm_path.display(),
        ex.u.len()
    ));
    Ok(lines)
}

fn run_expand_lower<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let run = build_lower::<T>(cfg)?;
    let np = norm_params::<T>(cfg)?;
    let records = coefficient_records("g", &run.ex.g, &run.ex.mu, Some(&run.ex.beta));
    let dump = serialize_dump(&records);
    let (table, _) = norm_table(&run.ex.g, &run.ex.mu, &np)?;
    let j_eff = run.model.topology.effective_degree(&run.model.potential);
    let audit = degree_audit(&run.ex.g, j_eff);

    let coeff_path = write_out(&cfg.out_dir, "coefficients.csv", &dump)?;
    let norm_path = write_out(&cfg.out_dir, "norms.csv", &table)?;

    let mut lines = describe_common(cfg, &run.model.freq);
    let roots = run
        .roots
        .iter()
        .map(|r| r.to_decimal())
        .collect::<Vec<_>>()
        .join(", ");
    lines.push(format!(
        "topology: k = {:?}, k_perp = {:?}, effective degree J = {j_eff}",
        run.model.topology.k(),
        run.model.topology.k_perp()
    ));
    lines.push(format!(
        "transversal roots: [{roots}], chosen index {} -> beta0 = {}",
        cfg.topology.as_ref().map(|t| t.beta0_index).unwrap_or(0),
        run.ex.chosen_beta0.to_decimal()
    ));
    lines.push(format!(
        "nondegeneracy constant: {}",
        run.ex.nondeg_constant.to_decimal()
    ));
    let modes: usize = run.ex.solves.iter().map(|s| s.modes_solved).sum();
    let max_inv = run
        .ex
        .solves
        .iter()
        .map(|s| s.max_inv_multiplier)
        .fold(0.0, f64::max);
    let lemma: usize = run.ex.solves.iter().map(|s| s.lemma_violations.len()).sum();
    let cert: usize = run
        .ex
        .solves
        .iter()
        .map(|s| s.certificate_violations.len())
        .sum();
    lines.extend(expansion_stat_lines(
        run.ex.order(),
        modes,
        max_inv,
        lemma,
        cert,
        &run.ex.warnings,
    ));
    lines.push(audit_line(&audit));
    let max_k_rel = run.ex.k_average_rel.iter().copied().fold(0.0, f64::max);
    lines.push(format!(
        "drift: parallel to k at every order, max |k-average|/scale = {}",
        fmt_f64(max_k_rel)
    ));
    lines.push(format!(
        "wrote: {} ({} record(s)), {} ({} row(s))",
        coeff_path.display(),
        records.len(),
        norm_path.display(),
        run.ex.g.len()
    ));
    Ok(lines)
}

fn residual_rows<T: Scalar>(
    cfg: &RunConfig,
    spec: &ResidualSpec,
    eval: impl Fn(usize, &[T]) -> Result<Vec<ResidualPoint<T>>>,
) -> Result<(String, Vec<String>)> {
    let eps: Vec<T> = spec
        .eps
        .iter()
        .enumerate()
        .map(|(i, e)| parse_field::<T>(e, &format!("residual.eps[{i}]")))
        .collect::<Result<_>>()?;
    let mut table = String::from("n_trunc,eps,residual\n");
    let mut fit_lines = Vec::new();
    for &n_trunc in &spec.n_trunc {
        let points = eval(n_trunc, &eps)?;
        let mut fit_data = Vec::with_capacity(points.len());
        for p in &points {
            let _ = writeln!(
                table,
                "{n_trunc},{},{}",
                p.eps.to_decimal(),
                p.norm.to_decimal()
            );
            fit_data.push((p.eps.to_f64(), p.norm.to_f64()));
        }
        match residual_order_fit(&fit_data) {
            Ok(fit) => fit_lines.push(format!(
                "residual slope at n_trunc = {n_trunc}: {} (expected about {}), rms {}",
                fmt_f64(fit.slope),
                n_trunc + 1,
                fmt_f64(fit.residual_rms)
            )),
            Err(e) => fit_lines.push(format!(
                "residual slope at n_trunc = {n_trunc}: fit skipped ({e})"
            )),
        }
    }
    let _ = cfg;
    Ok((table, fit_lines))
}

fn run_residual<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let spec = cfg
        .residual
        .as_ref()
        .ok_or_else(|| Error::Config("residual: section required for this verb".into()))?
        .clone();
    let np = norm_params::<T>(cfg)?;
    let (mut lines, table, fit_lines) = match cfg.problem {
        ProblemKind::Maximal => {
            if cfg.dimension != 1 {
                return Err(Error::Config(
                    "residual: maximal residual evaluation requires dimension 1".into(),
                ));
            }
            let (model, ex) = build_maximal::<T>(cfg)?;
            let lines = describe_common(cfg, &model.freq);
            let (table, fits) =
                residual_rows(cfg, &spec, |n, eps| residual(&model, &ex, n, eps, &np))?;
            (lines, table, fits)
        }
        _ => {
            let run = build_lower::<T>(cfg)?;
            let lines = describe_common(cfg, &run.model.freq);
            let (table, fits) = residual_rows(cfg, &spec, |n, eps| {
                residual_lower(&run.model, &run.ex, n, eps, &np)
            })?;
            (lines, table, fits)
        }
    };
    let path = write_out(&cfg.out_dir, "residuals.csv", &table)?;
    lines.extend(fit_lines);
    lines.push(format!(
        "wrote: {} ({} truncation(s) x {} eps)",
        path.display(),
        spec.n_trunc.len(),
        spec.eps.len()
    ));
    Ok(lines)
}

fn norm_points_for<T: Scalar>(cfg: &RunConfig) -> Result<(Vec<String>, String, Vec<(usize, f64)>)> {
    let np = norm_params::<T>(cfg)?;
    match cfg.problem {
        ProblemKind::Maximal => {
            let (model, ex) = build_maximal::<T>(cfg)?;
            let lines = describe_common(cfg, &model.freq);
            let (table, points) = norm_table(&ex.u, &ex.mu, &np)?;
            Ok((lines, table, points))
        }
        _ => {
            let run = build_lower::<T>(cfg)?;
            let lines = describe_common(cfg, &run.model.freq);
            let (table, points) = norm_table(&run.ex.g, &run.ex.mu, &np)?;
            Ok((lines, table, points))
        }
    }
}

fn run_gevrey<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let (n_lo, n_hi) = cfg
        .fit
        .ok_or_else(|| Error::Config("fit: section required for this verb".into()))?;
    let (mut lines, table, points) = norm_points_for::<T>(cfg)?;
    let fit = gevrey_fit(&points, n_lo, n_hi)?;
    let norm_path = write_out(&cfg.out_dir, "norms.csv", &table)?;
    let fit_path = write_out(&cfg.out_dir, "fit_report.txt", &fit_report_text(&fit))?;
    lines.push(format!(
        "growth fit on [{n_lo}, {n_hi}]: a = {}, r = {}, sigma = {}, rms = {}",
        fmt_f64(fit.a),
        fmt_f64(fit.r),
        fmt_f64(fit.sigma),
        fmt_f64(fit.residual_rms)
    ));
    lines.push(format!(
        "stirling cross-check: sigma = {} (delta {})",
        fmt_f64(fit.sigma_stirling),
        fmt_f64(fit.stirling_delta)
    ));
    if !fit.skipped.is_empty() {
        lines.push(format!("skipped zero-norm orders: {:?}", fit.skipped));
    }
    lines.push(format!(
        "wrote: {}, {}",
        norm_path.display(),
        fit_path.display()
    ));
    Ok(lines)
}

fn envelope_violations<T: Scalar>(
    series: &[TrigPoly<T>],
    np: &NormParams<T>,
    b: f64,
    sigma: f64,
) -> Result<(Vec<usize>, usize)> {
    let mut violations = Vec::new();
    let mut checked = 0usize;
    let mut lf = 0.0f64; // ln(n!)
    for (n, poly) in series.iter().enumerate() {
        if n > 0 {
            lf += (n as f64).ln();
        }
        if n < 4 {
            continue;
        }
        checked += 1;
        let norm = poly.norm(np)?.to_f64();
        if norm > 0.0 && norm.ln() > b.ln() + sigma * lf {
            violations.push(n);
        }
    }
    Ok((violations, checked))
}

fn run_check_bounds<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let spec = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| Error::Config("bounds: section required for this verb".into()))?
        .clone();
    let eta_str = spec.eta.clone().unwrap_or_else(|| "1".to_string());
    let eta = parse_field::<T>(&eta_str, "bounds.eta")?;
    let np = norm_params::<T>(cfg)?;

    let kind = match cfg.problem {
        ProblemKind::Maximal => ConditionKind::Maximal,
        ProblemKind::LowerConservative => ConditionKind::LowerConservative,
        ProblemKind::LowerDissipative => ConditionKind::LowerDissipative,
    };

    let (mut lines, report, eta_t, ups_scaled, gamma_scaled, env_viol, env_checked) =
        match cfg.problem {
            ProblemKind::Maximal => {
                let (model, ex) = build_maximal::<T>(cfg)?;
                let lines = describe_common(cfg, &model.freq);
                let (scaled, srep) = scale_series_maximal(&ex, &model, &eta);
                let j = model.potential.degree_j().max(1) as f64;
                let report = check_inductive_conditions(
                    kind,
                    spec.a,
                    spec.b,
                    spec.sigma,
                    model.freq.tau(),
                    model.freq.nu(),
                    j,
                    srep.upsilon_scaled.to_f64(),
                    srep.gamma_scaled.to_f64(),
                )?;
                let (viol, checked) = envelope_violations(&scaled.u, &np, spec.b, spec.sigma)?;
                (
                    lines,
                    report,
                    srep.eta,
                    srep.upsilon_scaled,
                    srep.gamma_scaled,
                    viol,
                    checked,
                )
            }
            _ => {
                let run = build_lower::<T>(cfg)?;
                let lines = describe_common(cfg, &run.model.freq);
                let (scaled, srep) = scale_series_lower(&run.ex, &run.model, &eta);
                let j = run
                    .model
                    .topology
                    .effective_degree(&run.model.potential)
                    .max(1) as f64;
                let report = check_inductive_conditions(
                    kind,
                    spec.a,
                    spec.b,
                    spec.sigma,
                    run.model.freq.tau(),
                    run.model.freq.nu(),
                    j,
                    srep.upsilon_scaled.to_f64(),
                    srep.gamma_scaled.to_f64(),
                )?;
                let (viol, checked) = envelope_violations(&scaled.g, &np, spec.b, spec.sigma)?;
                (
                    lines,
                    report,
                    srep.eta,
                    srep.upsilon_scaled,
                    srep.gamma_scaled,
                    viol,
                    checked,
                )
            }
        };

    let text = bounds_report_text(
        &report,
        &eta_t,
        &ups_scaled,
        &gamma_scaled,
        &env_viol,
        env_checked,
    );
    let path = write_out(&cfg.out_dir, "bounds_report.txt", &text)?;
    for c in &report.checks {
        lines.push(format!(
            "condition {}: {}",
            c.label,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    lines.push(format!(
        "scaled-series envelope (n >= 4): {} of {} order(s) violate",
        env_viol.len(),
        env_checked
    ));
    lines.push(format!(
        "all conditions: {}",
        if report.all_pass && env_viol.is_empty() {
            "PASS"
        } else {
            "FAIL"
        }
    ));
    lines.push(format!("wrote: {}", path.display()));
    Ok(lines)
}

fn run_profile<T: Scalar>(cfg: &RunConfig) -> Result<Vec<String>> {
    let freq = build_frequency::<T>(cfg)?;
    let profile = diophantine_profile(&freq, cfg.profile_ell_max)?;
    let mut table = String::from("mode,ell_abs,dist,ratio,inv_multiplier,is_record\n");
    for e in &profile.entries {
        let mode = e
            .mode
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            table,
            "{mode},{},{},{},{},{}",
            e.ell_abs,
            fmt_f64(e.dist),
            fmt_f64(e.ratio),
            fmt_f64(e.inv_multiplier),
            e.is_record
        );
    }
    let path = write_out(&cfg.out_dir, "profile.csv", &table)?;
    let mut lines = describe_common(cfg, &freq);
    lines.push(format!(
        "profile to |ell| <= {}: fitted tau = {}, fitted nu = {}",
        cfg.profile_ell_max,
        fmt_f64(profile.tau_fit),
        fmt_f64(profile.nu_fit)
    ));
    lines.push(format!(
        "declared certificate (nu = {}, tau = {}): {} violation(s)",
        fmt_f64(freq.nu()),
        fmt_f64(freq.tau()),
        profile.declared_violations.len()
    ));
    lines.push(format!(
        "wrote: {} ({} mode(s))",
        path.display(),
        profile.entries.len()
    ));
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_config(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().expect("temp file");
        f.write_all(contents.as_bytes()).expect("write config");
        f
    }

    const MINIMAL_MAXIMAL: &str = r#"
schema_version = 1

[problem]
kind = "maximal"
dimension = 1
order = 10
gamma = "0.1"

[[potential.term]]
mode = [1]
cos = "1"

[frequency]
kind = "golden"
"#;

    #[test]
    fn minimal_maximal_config_parses() {
        let f = write_config(MINIMAL_MAXIMAL);
        let cfg = parse_config(f.path()).unwrap();
        assert_eq!(cfg.problem, ProblemKind::Maximal);
        assert_eq!(cfg.order, 10);
        assert_eq!(cfg.precision_bits, 53);
        assert_eq!(cfg.potential_terms.len(), 1);
        assert!(matches!(cfg.frequency, FrequencySpec::Golden));
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn missing_schema_version_is_config_error() {
        let f = write_config(&MINIMAL_MAXIMAL.replace("schema_version = 1", ""));
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("schema_version"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn float_literal_rejected_for_decimal_field() {
        let f = write_config(&MINIMAL_MAXIMAL.replace("gamma = \"0.1\"", "gamma = 0.1"));
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("TOML parse error"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn violations_are_collected_not_first_only() {
        let bad = r#"
schema_version = 1

[problem]
kind = "nonsense"
dimension = 0
gamma = "zzz"

[frequency]
kind = "golden"
"#;
        let f = write_config(bad);
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("problem.kind"), "{msg}");
                assert!(msg.contains("problem.dimension"), "{msg}");
                assert!(msg.contains("problem.order"), "{msg}");
                assert!(msg.contains("problem.gamma"), "{msg}");
                assert!(msg.contains("potential"), "{msg}");
            }
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn rational_frequency_is_exact_resonance() {
        let cfgtext = r#"
schema_version = 1

[problem]
kind = "maximal"
dimension = 1
order = 5
gamma = "0"

[[potential.term]]
mode = [1]
cos = "1"

[frequency]
kind = "rational"
numerator = 2
denominator = 6
"#;
        let f = write_config(cfgtext);
        match parse_config(f.path()) {
            Err(Error::ExactResonance { mode }) => assert_eq!(mode, vec![3]),
            other => panic!("expected ExactResonance, got {other:?}"),
        }
    }

    #[test]
    fn non_orthogonal_k_perp_is_config_error() {
        let cfgtext = r#"
schema_version = 1

[problem]
kind = "lower-conservative"
dimension = 2
order = 4
gamma = "0"

[[potential.term]]
mode = [1, 0]
cos = "1"

[[potential.term]]
mode = [0, 1]
cos = "1"

[frequency]
kind = "golden"

[topology]
k = [1, 0]
k_perp = [1, 1]
"#;
        let f = write_config(cfgtext);
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("topology"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn increasing_eps_grid_rejected() {
        let cfgtext = format!(
            "{MINIMAL_MAXIMAL}\n[residual]\nn_trunc = [2]\neps = [\"1e-3\", \"1e-2\"]\n"
        );
        let f = write_config(&cfgtext);
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("strictly decreasing"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn conservative_with_nonzero_gamma_rejected() {
        let cfgtext = r#"
schema_version = 1

[problem]
kind = "lower-conservative"
dimension = 2
order = 4
gamma = "0.2"

[[potential.term]]
mode = [1, 0]
cos = "1"

[frequency]
kind = "golden"

[topology]
k = [1, 0]
"#;
        let f = write_config(cfgtext);
        match parse_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("problem.gamma"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn dump_round_trips_bytewise() {
        let records = vec![
            DumpRecord {
                kind: "u".into(),
                n: 1,
                mode: vec![-2, 3],
                component: 0,
                re: "0.125".into(),
                im: "-0.5".into(),
            },
            DumpRecord {
                kind: "mu".into(),
                n: 3,
                mode: vec![],
                component: 1,
                re: "2.443346464249177".into(),
                im: "0.0".into(),
            },
        ];
        let text = serialize_dump(&records);
        let parsed = parse_dump(&text).unwrap();
        assert_eq!(parsed, records);
        assert_eq!(serialize_dump(&parsed), text);
    }

    #[test]
    fn expand_max_runs_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let f = write_config(&format!(
            "{MINIMAL_MAXIMAL}\n[output]\ndir = \"{}\"\n",
            dir.path().display()
        ));
        let cfg = parse_config(f.path()).unwrap();
        let lines = run_typed::<f64>(&cfg, VerbKind::ExpandMax).unwrap();
        assert!(lines.iter().any(|l| l.contains("degree audit: OK")), "{lines:?}");
        let dump = std::fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
        let records = parse_dump(&dump).unwrap();
        assert_eq!(serialize_dump(&records), dump, "dump must round trip");
        assert!(records.iter().any(|r| r.kind == "mu"));
        let norms = std::fs::read_to_string(dir.path().join("norms.csv")).unwrap();
        assert_eq!(norms.lines().count(), 12, "header + 11 orders");
    }

    #[test]
    fn expand_max_rejects_lower_config() {
        let cfgtext = r#"
schema_version = 1

[problem]
kind = "lower-conservative"
dimension = 2
order = 4
gamma = "0"

[[potential.term]]
mode = [1, 0]
cos = "1"

[[potential.term]]
mode = [0, 1]
cos = "1"

[frequency]
kind = "golden"

[topology]
k = [1, 0]
"#;
        let f = write_config(cfgtext);
        let cfg = parse_config(f.path()).unwrap();
        match run_typed::<f64>(&cfg, VerbKind::ExpandMax) {
            Err(Error::Config(msg)) => assert!(msg.contains("expand-max"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }
}
