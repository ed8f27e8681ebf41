//! C ABI for the lindstedt expansion engine.
//!
//! The surface is a single opaque run handle created from a TOML config
//! file. The handle owns an immutable snapshot of the expansion (orders,
//! coefficient table, drift components, per-order norms and degrees), and
//! scalar queries read from it without further computation. All functions
//! are panic-safe: a Rust panic is caught at the boundary and surfaces as
//! `LDT_STATUS_INTERNAL`.
//!
//! Memory rules: every `LdtRun` returned through `ldt_run_from_config`
//! must be released exactly once with `ldt_run_free`. Strings returned by
//! `ldt_last_error_message` are owned by a thread-local buffer and remain
//! valid until the next `ldt_*` call on the same thread; callers must not
//! free them.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lindstedt::cli::{parse_config, ProblemKind, RunConfig};
use lindstedt::error::Error;
use lindstedt::fourier::{Mode, NormParams, TrigPoly};
use lindstedt::lower::{expand_lower, find_beta0, LowerModel, LowerTopology};
use lindstedt::maximal::{expand, MaximalModel};
use lindstedt::scalar::{set_precision_bits, MpReal, Scalar};

/// Status codes returned by every fallible entry point. The numeric values
/// of the first six match the process exit codes of the `lindstedt` binary.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdtStatus {
    /// Success.
    Ok = 0,
    /// Unexpected internal failure (including caught panics).
    Internal = 1,
    /// Configuration file unreadable, unparsable, or invalid.
    Config = 2,
    /// The requested rotation number is exactly resonant.
    Resonance = 3,
    /// A transversality or nondegeneracy requirement failed.
    Nondegeneracy = 4,
    /// A weighted norm overflowed the working precision.
    NormOverflow = 5,
    /// A required pointer argument was null.
    NullArgument = 6,
    /// A string argument was not valid UTF-8.
    BadUtf8 = 7,
    /// An index (order, component, or mode) is out of range.
    OutOfRange = 8,
}

/// Problem family of a run handle.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdtProblemKind {
    Maximal = 0,
    LowerConservative = 1,
    LowerDissipative = 2,
}

/// Opaque expansion handle. Create with `ldt_run_from_config`, release
/// with `ldt_run_free`.
pub struct LdtRun {
    kind: LdtProblemKind,
    order: usize,
    range_dim: usize,
    precision_bits: u32,
    norms: Vec<f64>,
    degrees: Vec<i64>,
    mu: Vec<Vec<f64>>,
    beta: Vec<f64>,
    coeffs: Vec<BTreeMap<Mode, Vec<(f64, f64)>>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new("").unwrap());
}

fn status_of(err: &Error) -> LdtStatus {
    match err.exit_code() {
        2 => LdtStatus::Config,
        3 => LdtStatus::Resonance,
        4 => LdtStatus::Nondegeneracy,
        5 => LdtStatus::NormOverflow,
        _ => LdtStatus::Internal,
    }
}

fn fail(status: LdtStatus, msg: &str) -> LdtStatus {
    set_last_error(msg);
    status
}

/// Wraps an entry point body with panic isolation.
fn guarded(body: impl FnOnce() -> LdtStatus) -> LdtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(LdtStatus::Internal, "internal panic in lindstedt-ffi"),
    }
}

fn snapshot_series<T: Scalar>(
    series: &[TrigPoly<T>],
    np: &NormParams<T>,
) -> Result<(Vec<f64>, Vec<i64>, Vec<BTreeMap<Mode, Vec<(f64, f64)>>>), Error> {
    let mut norms = Vec::with_capacity(series.len());
    let mut degrees = Vec::with_capacity(series.len());
    let mut coeffs = Vec::with_capacity(series.len());
    for poly in series {
        norms.push(poly.norm(np)?.to_f64());
        degrees.push(poly.degree());
        let mut table = BTreeMap::new();
        for (mode, vals) in poly.iter() {
            table.insert(
                mode.clone(),
                vals.iter()
                    .map(|c| (c.re.to_f64(), c.im.to_f64()))
                    .collect::<Vec<_>>(),
            );
        }
        coeffs.push(table);
    }
    Ok((norms, degrees, coeffs))
}

fn build_run<T: Scalar>(cfg: &RunConfig) -> Result<LdtRun, Error> {
    let parse = |s: &str, field: &str| -> Result<T, Error> {
        T::parse_decimal(s)
            .ok_or_else(|| Error::Config(format!("{field}: cannot parse decimal string '{s}'")))
    };
    let np = NormParams::new(
        parse(&cfg.norm_rho, "norm.rho")?,
        parse(&cfg.norm_r, "norm.r")?,
    )?;
    let mut terms = Vec::with_capacity(cfg.potential_terms.len());
    for (i, t) in cfg.potential_terms.iter().enumerate() {
        terms.push(lindstedt::fourier::PotentialTerm {
            mode: t.mode.clone(),
            cos_amp: parse(&t.cos, &format!("potential.term[{i}].cos"))?,
            sin_amp: parse(&t.sin, &format!("potential.term[{i}].sin"))?,
        });
    }
    let potential = lindstedt::fourier::Potential::from_terms(cfg.dimension, &terms)?;
    let freq = match &cfg.frequency {
        lindstedt::cli::FrequencySpec::Golden => lindstedt::cohomology::Frequency::golden(),
        lindstedt::cli::FrequencySpec::Explicit { omega, nu, tau } => {
            let om = omega
                .iter()
                .enumerate()
                .map(|(i, w)| parse(w, &format!("frequency.omega[{i}]")))
                .collect::<Result<Vec<T>, Error>>()?;
            lindstedt::cohomology::Frequency::explicit(om, *nu, *tau)?
        }
    };
    let gamma = parse(&cfg.gamma, "problem.gamma")?;
    match cfg.problem {
        ProblemKind::Maximal => {
            let model = MaximalModel::new(potential, freq, gamma, cfg.order)?;
            let ex = expand(&model)?;
            let (norms, degrees, coeffs) = snapshot_series(&ex.u, &np)?;
            Ok(LdtRun {
                kind: LdtProblemKind::Maximal,
                order: cfg.order,
                range_dim: cfg.dimension,
                precision_bits: cfg.precision_bits,
                norms,
                degrees,
                mu: ex
                    .mu
                    .iter()
                    .map(|m| m.iter().map(Scalar::to_f64).collect())
                    .collect(),
                beta: Vec::new(),
                coeffs,
            })
        }
        ProblemKind::LowerConservative | ProblemKind::LowerDissipative => {
            let topo_spec = cfg
                .topology
                .as_ref()
                .ok_or_else(|| Error::Config("topology: section required".into()))?;
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
            let model = LowerModel::new(potential, freq, topology, gamma, beta0, cfg.order)?;
            let ex = expand_lower(&model)?;
            let (norms, degrees, coeffs) = snapshot_series(&ex.g, &np)?;
            Ok(LdtRun {
                kind: if cfg.problem == ProblemKind::LowerConservative {
                    LdtProblemKind::LowerConservative
                } else {
                    LdtProblemKind::LowerDissipative
                },
                order: cfg.order,
                range_dim: 2,
                precision_bits: cfg.precision_bits,
                norms,
                degrees,
                mu: ex
                    .mu
                    .iter()
                    .map(|m| m.iter().map(Scalar::to_f64).collect())
                    .collect(),
                beta: ex.beta.iter().map(Scalar::to_f64).collect(),
                coeffs,
            })
        }
    }
}

fn run_from_path(path: &Path) -> Result<LdtRun, Error> {
    let cfg = parse_config(path)?;
    if cfg.precision_bits == 53 {
        build_run::<f64>(&cfg)
    } else {
        set_precision_bits(cfg.precision_bits);
        build_run::<MpReal>(&cfg)
    }
}

/// ABI revision of this library. Incremented on any breaking change to
/// the function signatures or status codes.
#[no_mangle]
pub extern "C" fn ldt_abi_version() -> u32 {
    1
}

/// Parses the TOML run configuration at `config_path`, computes the
/// configured expansion, and stores a handle in `out_run`. On any failure
/// `*out_run` is left null and a message is available through
/// `ldt_last_error_message`.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string and `out_run` a
/// valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_from_config(
    config_path: *const c_char,
    out_run: *mut *mut LdtRun,
) -> LdtStatus {
    guarded(|| {
        if out_run.is_null() {
            return fail(LdtStatus::NullArgument, "out_run is null");
        }
        unsafe { *out_run = std::ptr::null_mut() };
        if config_path.is_null() {
            return fail(LdtStatus::NullArgument, "config_path is null");
        }
        let path = match unsafe { CStr::from_ptr(config_path) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(LdtStatus::BadUtf8, "config_path is not valid UTF-8"),
        };
        match run_from_path(Path::new(path)) {
            Ok(run) => {
                unsafe { *out_run = Box::into_raw(Box::new(run)) };
                clear_last_error();
                LdtStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// Releases a run handle. Passing null is a no-op.
///
/// # Safety
/// `run` must be null or a pointer produced by `ldt_run_from_config` that
/// has not been freed before.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_free(run: *mut LdtRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Returns the most recent error message on this thread (empty string if
/// the last call succeeded). The pointer is owned by the library and is
/// valid until the next `ldt_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ldt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn with_run<R>(
    run: *const LdtRun,
    out: *mut R,
    body: impl FnOnce(&LdtRun) -> Result<R, (LdtStatus, String)>,
) -> LdtStatus {
    guarded(AssertUnwindSafe(|| {
        if run.is_null() {
            return fail(LdtStatus::NullArgument, "run is null");
        }
        if out.is_null() {
            return fail(LdtStatus::NullArgument, "out pointer is null");
        }
        match body(unsafe { &*run }) {
            Ok(v) => {
                unsafe { *out = v };
                clear_last_error();
                LdtStatus::Ok
            }
            Err((s, msg)) => fail(s, &msg),
        }
    }))
}

/// Problem family of the run.
///
/// # Safety
/// `run` must be a live handle; `out_kind` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_kind(
    run: *const LdtRun,
    out_kind: *mut LdtProblemKind,
) -> LdtStatus {
    unsafe { with_run(run, out_kind, |r| Ok(r.kind)) }
}

/// Expansion order N (coefficients exist for 0 <= n <= N).
///
/// # Safety
/// `run` must be a live handle; `out_order` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_order(run: *const LdtRun, out_order: *mut usize) -> LdtStatus {
    unsafe { with_run(run, out_order, |r| Ok(r.order)) }
}

/// Number of range components per coefficient (the torus dimension for
/// maximal runs, 2 for lower-dimensional runs).
///
/// # Safety
/// `run` must be a live handle; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_range_dim(run: *const LdtRun, out_dim: *mut usize) -> LdtStatus {
    unsafe { with_run(run, out_dim, |r| Ok(r.range_dim)) }
}

/// Working precision of the run in bits (53 = hardware binary64).
///
/// # Safety
/// `run` must be a live handle; `out_bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_precision_bits(
    run: *const LdtRun,
    out_bits: *mut u32,
) -> LdtStatus {
    unsafe { with_run(run, out_bits, |r| Ok(r.precision_bits)) }
}

fn order_check(r: &LdtRun, n: usize) -> Result<(), (LdtStatus, String)> {
    if n > r.order {
        Err((
            LdtStatus::OutOfRange,
            format!("order {n} out of range (expansion order {})", r.order),
        ))
    } else {
        Ok(())
    }
}

/// Weighted norm of the order-`n` coefficient, evaluated with the norm
/// parameters of the run configuration.
///
/// # Safety
/// `run` must be a live handle; `out_norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_norm(
    run: *const LdtRun,
    n: usize,
    out_norm: *mut f64,
) -> LdtStatus {
    unsafe {
        with_run(run, out_norm, |r| {
            order_check(r, n)?;
            Ok(r.norms[n])
        })
    }
}

/// Trigonometric degree of the order-`n` coefficient (0 for an empty
/// polynomial).
///
/// # Safety
/// `run` must be a live handle; `out_degree` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_degree(
    run: *const LdtRun,
    n: usize,
    out_degree: *mut i64,
) -> LdtStatus {
    unsafe {
        with_run(run, out_degree, |r| {
            order_check(r, n)?;
            Ok(r.degrees[n])
        })
    }
}

/// Component `component` of the order-`n` drift correction.
///
/// # Safety
/// `run` must be a live handle; `out_mu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_mu(
    run: *const LdtRun,
    n: usize,
    component: usize,
    out_mu: *mut f64,
) -> LdtStatus {
    unsafe {
        with_run(run, out_mu, |r| {
            order_check(r, n)?;
            let mu = &r.mu[n];
            if component >= mu.len() {
                return Err((
                    LdtStatus::OutOfRange,
                    format!("component {component} out of range ({} available)", mu.len()),
                ));
            }
            Ok(mu[component])
        })
    }
}

/// Order-`n` free constant of a lower-dimensional run. Returns
/// `LDT_STATUS_OUT_OF_RANGE` for maximal runs, which have no such
/// constants.
///
/// # Safety
/// `run` must be a live handle; `out_beta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_beta(
    run: *const LdtRun,
    n: usize,
    out_beta: *mut f64,
) -> LdtStatus {
    unsafe {
        with_run(run, out_beta, |r| {
            if r.beta.is_empty() {
                return Err((
                    LdtStatus::OutOfRange,
                    "this run has no free constants (maximal problem)".to_string(),
                ));
            }
            order_check(r, n)?;
            Ok(r.beta[n])
        })
    }
}

/// Number of Fourier modes carried by the order-`n` coefficient.
///
/// # Safety
/// `run` must be a live handle; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_mode_count(
    run: *const LdtRun,
    n: usize,
    out_count: *mut usize,
) -> LdtStatus {
    unsafe {
        with_run(run, out_count, |r| {
            order_check(r, n)?;
            Ok(r.coeffs[n].len())
        })
    }
}

/// Complex coefficient of mode `mode` (an integer vector of length
/// `mode_len`, which must match the domain dimension of the run's hull
/// function) at order `n`, component `component`. A mode absent from the
/// table is an exact zero and returns success with `(0, 0)`.
///
/// # Safety
/// `run` must be a live handle; `mode` must point to `mode_len` readable
/// values; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldt_run_coefficient(
    run: *const LdtRun,
    n: usize,
    mode: *const i64,
    mode_len: usize,
    component: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> LdtStatus {
    guarded(AssertUnwindSafe(|| {
        if run.is_null() {
            return fail(LdtStatus::NullArgument, "run is null");
        }
        if mode.is_null() {
            return fail(LdtStatus::NullArgument, "mode is null");
        }
        if out_re.is_null() || out_im.is_null() {
            return fail(LdtStatus::NullArgument, "out pointer is null");
        }
        let r = unsafe { &*run };
        if let Err((s, msg)) = order_check(r, n) {
            return fail(s, &msg);
        }
        let dom = r.coeffs[n].keys().next().map(|m| m.len());
        if let Some(d) = dom {
            if mode_len != d {
                return fail(
                    LdtStatus::OutOfRange,
                    &format!("mode length {mode_len} does not match domain dimension {d}"),
                );
            }
        }
        if component >= r.range_dim {
            return fail(
                LdtStatus::OutOfRange,
                &format!(
                    "component {component} out of range ({} available)",
                    r.range_dim
                ),
            );
        }
        let key: Mode = unsafe { std::slice::from_raw_parts(mode, mode_len) }.to_vec();
        let (re, im) = r.coeffs[n]
            .get(&key)
            .and_then(|v| v.get(component).copied())
            .unwrap_or((0.0, 0.0));
        unsafe {
            *out_re = re;
            *out_im = im;
        }
        clear_last_error();
        LdtStatus::Ok
    }))
}
