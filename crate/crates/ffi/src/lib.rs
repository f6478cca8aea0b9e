//! C ABI over `lbps_ctmc`.
//!
//! Every fallible function returns an [`LbpsStatus`]. On failure a message is
//! stored per thread and can be read with [`lbps_last_error_message`]. Objects
//! are handed out as opaque pointers and released with the matching `_free`.
//! Output arrays are caller-allocated; the `len` argument must equal the
//! required size exactly.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lbps_ctmc::aa::{aa_index, grantham_distance, nnpaao_ordering, DistanceTable, ALPHABET};
use lbps_ctmc::bps::{reflect, solve_bounce_normal, solve_bounce_sojourn, solve_bounce_transition};
use lbps_ctmc::diagnostics::{ard, ess_batch_means, ks_two_sample};
use lbps_ctmc::hmc::HmcConfig;
use lbps_ctmc::inference::{run_chain, ChainOutput, Kernel, RunConfig};
use lbps_ctmc::io::read_series;
use lbps_ctmc::paths::ObservedSeries;
use lbps_ctmc::ratematrix::{build_rate_matrix, matrix_exponential};
use lbps_ctmc::{Error, FeatureKind, FeatureSet, PairOrdering, RateMatrix, StateSpace, WeightVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpsKernel {
    LbpsHmc = 0,
    HmcOnly = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpsFeatures {
    Gtr = 0,
    Chain = 1,
}

/// Sampler settings for [`lbps_run_chain`]. Fill with
/// [`lbps_run_options_default`] before changing fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LbpsRunOptions {
    pub kernel: LbpsKernel,
    pub features: LbpsFeatures,
    pub iterations: usize,
    pub trajectory_length: f64,
    pub refresh_rate: f64,
    pub hmc_steps: usize,
    pub step_size: f64,
    pub kappa: f64,
    pub burn_in: f64,
    pub thin: usize,
    pub seed: u64,
}

/// Opaque rate matrix.
pub struct LbpsRateMatrix {
    inner: RateMatrix,
}

/// Opaque set of observed series with its state space.
pub struct LbpsDataset {
    states: StateSpace,
    series: Vec<ObservedSeries>,
}

/// Opaque output of one chain.
pub struct LbpsChain {
    output: ChainOutput,
    features: FeatureSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LbpsStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => LbpsStatus::InvalidArgument,
        Error::Precondition(_) => LbpsStatus::Precondition,
        Error::Augmentation { source, .. } => status_of(source),
        Error::Numerical(_) => LbpsStatus::Numerical,
        Error::Internal(_) => LbpsStatus::Internal,
        Error::Parse { .. } => LbpsStatus::Parse,
        Error::Io(_) => LbpsStatus::Io,
    }
}

struct Fail(LbpsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LbpsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LbpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LbpsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LbpsStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(LbpsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(LbpsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len != need {
        return Err(invalid(format!("{what} needs length {need}, got {len}")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(LbpsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail(LbpsStatus::NullPointer, format!("{what} is null")));
    }
    p.write(v);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(LbpsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn state_space(alphabet: &str) -> Result<StateSpace, Fail> {
    match alphabet.to_ascii_lowercase().as_str() {
        "dna" => Ok(StateSpace::dna()),
        "aa" | "protein" | "amino" => Ok(StateSpace::amino_acids()),
        n => Ok(StateSpace::numbered(
            n.parse().map_err(|_| invalid(format!("unknown alphabet '{n}'")))?,
        )?),
    }
}

fn default_ordering(states: &StateSpace) -> PairOrdering {
    if *states == StateSpace::amino_acids() {
        lbps_ctmc::aa::default_amino_ordering()
    } else {
        PairOrdering::lexicographic(states.len())
    }
}

fn feature_kind(f: LbpsFeatures) -> FeatureKind {
    match f {
        LbpsFeatures::Gtr => FeatureKind::Gtr,
        LbpsFeatures::Chain => FeatureKind::Chain,
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lbps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn lbps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the rate matrix of weights `(wu, wb)` under GTR or chain features
/// with the lexicographic pair order. `wu` has `n_states` entries and `wb`
/// has `n_states (n_states - 1) / 2`.
#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_new(
    n_states: usize,
    features: LbpsFeatures,
    wu: *const f64,
    wu_len: usize,
    wb: *const f64,
    wb_len: usize,
    out: *mut *mut LbpsRateMatrix,
) -> LbpsStatus {
    guard(|| {
        let f = FeatureSet::build(feature_kind(features), PairOrdering::lexicographic(n_states))?;
        let w = WeightVector::new(slice(wu, wu_len, "wu")?.to_vec(), slice(wb, wb_len, "wb")?.to_vec(), 1.0)?;
        if w.wu.len() != f.p1() || w.wb.len() != f.p2() {
            return Err(invalid(format!("expected {} + {} weights, got {} + {}", f.p1(), f.p2(), wu_len, wb_len)));
        }
        let inner = build_rate_matrix(&w, &f)?;
        write(out, Box::into_raw(Box::new(LbpsRateMatrix { inner })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_free(m: *mut LbpsRateMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of states, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_n_states(m: *const LbpsRateMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.n_states())
}

/// Generator in row-major order; `len` must be `n_states^2`.
#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_q(m: *const LbpsRateMatrix, out: *mut f64, len: usize) -> LbpsStatus {
    guard(|| {
        let m = &nonnull(m, "matrix")?.inner;
        let n = m.n_states();
        let out = out_slice(out, len, n * n, "out")?;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = m.q()[(i, j)];
            }
        }
        Ok(())
    })
}

/// Stationary distribution; `len` must be `n_states`.
#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_pi(m: *const LbpsRateMatrix, out: *mut f64, len: usize) -> LbpsStatus {
    guard(|| {
        let m = &nonnull(m, "matrix")?.inner;
        out_slice(out, len, m.n_states(), "out")?.copy_from_slice(m.pi());
        Ok(())
    })
}

/// `exp(Q t)` in row-major order; `len` must be `n_states^2`.
#[no_mangle]
pub unsafe extern "C" fn lbps_rate_matrix_transition(
    m: *const LbpsRateMatrix,
    t: f64,
    out: *mut f64,
    len: usize,
) -> LbpsStatus {
    guard(|| {
        let m = &nonnull(m, "matrix")?.inner;
        let n = m.n_states();
        let out = out_slice(out, len, n * n, "out")?;
        let p = matrix_exponential(m, t)?;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = p[(i, j)];
            }
        }
        Ok(())
    })
}

/// Time to a bounce of a sojourn factor `h q0 exp(<w, phi>)` moving with
/// directional derivative `dot`, for energy gap `c`. Infinite if it never bounces.
#[no_mangle]
pub unsafe extern "C" fn lbps_bounce_time_sojourn(h: f64, q0: f64, dot: f64, c: f64, out: *mut f64) -> LbpsStatus {
    guard(|| write(out, solve_bounce_sojourn(h, q0, dot, c)?, "out"))
}

/// Time to a bounce of a transition-count factor.
#[no_mangle]
pub unsafe extern "C" fn lbps_bounce_time_transition(count: f64, dot: f64, c: f64, out: *mut f64) -> LbpsStatus {
    guard(|| write(out, solve_bounce_transition(count, dot, c)?, "out"))
}

/// Time to a bounce under intensity `max(0, a + b t)`.
#[no_mangle]
pub unsafe extern "C" fn lbps_bounce_time_normal(a: f64, b: f64, c: f64, out: *mut f64) -> LbpsStatus {
    guard(|| write(out, solve_bounce_normal(a, b, c)?, "out"))
}

/// Reflects `v` off the hyperplane orthogonal to `grad`.
#[no_mangle]
pub unsafe extern "C" fn lbps_reflect(v: *const f64, grad: *const f64, n: usize, out: *mut f64) -> LbpsStatus {
    guard(|| {
        let r = reflect(slice(v, n, "v")?, slice(grad, n, "grad")?)?;
        out_slice(out, n, n, "out")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Batch-means effective sample size. `degenerate` (may be null) is set to 1
/// for a constant sequence.
#[no_mangle]
pub unsafe extern "C" fn lbps_ess_batch_means(x: *const f64, n: usize, ess: *mut f64, degenerate: *mut i32) -> LbpsStatus {
    guard(|| {
        let e = ess_batch_means(slice(x, n, "x")?)?;
        if !degenerate.is_null() {
            degenerate.write(i32::from(e.degenerate));
        }
        write(ess, e.ess, "ess")
    })
}

/// Absolute relative difference `|x - y| / max(x, y)`.
#[no_mangle]
pub unsafe extern "C" fn lbps_ard(x: f64, y: f64, out: *mut f64) -> LbpsStatus {
    guard(|| write(out, ard(x, y)?, "out"))
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[no_mangle]
pub unsafe extern "C" fn lbps_ks_two_sample(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> LbpsStatus {
    guard(|| {
        let r = ks_two_sample(slice(a, na, "a")?, slice(b, nb, "b")?)?;
        write(statistic, r.statistic, "statistic")?;
        write(p_value, r.p_value, "p_value")
    })
}

/// Grantham distance between two one-letter amino-acid codes.
#[no_mangle]
pub unsafe extern "C" fn lbps_grantham(a: c_char, b: c_char, out: *mut u16) -> LbpsStatus {
    guard(|| {
        let (a, b) = ((a as u8 as char).to_string(), (b as u8 as char).to_string());
        write(out, grantham_distance(&a, &b)?, "out")
    })
}

/// The 20 one-letter codes in table order, as a static string.
#[no_mangle]
pub extern "C" fn lbps_amino_alphabet() -> *const c_char {
    static CODES: &str = "YHQRTNKDEGFLASPIMVCW\0";
    debug_assert_eq!(CODES.chars().take(20).collect::<Vec<_>>(), ALPHABET);
    CODES.as_ptr().cast()
}

/// Nearest-neighbour pair ranking over the Grantham table. Writes the two
/// members of the pair at each rank as one-letter codes; `len` must be 190.
#[no_mangle]
pub unsafe extern "C" fn lbps_nnpaao_ordering(first: *mut c_char, second: *mut c_char, len: usize) -> LbpsStatus {
    guard(|| {
        let ranks = nnpaao_ordering(&DistanceTable::grantham());
        if len != ranks.len() {
            return Err(invalid(format!("ranking has {} pairs, got len {len}", ranks.len())));
        }
        if first.is_null() || second.is_null() {
            return Err(Fail(LbpsStatus::NullPointer, "output is null".into()));
        }
        for r in 0..len {
            let (a, b) = ranks.label(r);
            debug_assert!(aa_index(a).is_some() && aa_index(b).is_some());
            first.add(r).write(a as u8 as c_char);
            second.add(r).write(b as u8 as c_char);
        }
        Ok(())
    })
}

/// Reads a `series_id,time,state` CSV file. `alphabet` is `dna`, `aa`, or a
/// number of states.
#[no_mangle]
pub unsafe extern "C" fn lbps_dataset_read_csv(
    path: *const c_char,
    alphabet: *const c_char,
    out: *mut *mut LbpsDataset,
) -> LbpsStatus {
    guard(|| {
        let states = state_space(string(alphabet, "alphabet")?)?;
        let path = string(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Fail(LbpsStatus::Io, format!("{path}: {e}")))?;
        let series = read_series(file, &states)?;
        write(out, Box::into_raw(Box::new(LbpsDataset { states, series })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lbps_dataset_free(d: *mut LbpsDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of series, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_dataset_len(d: *const LbpsDataset) -> usize {
    d.as_ref().map_or(0, |d| d.series.len())
}

/// Number of states, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_dataset_n_states(d: *const LbpsDataset) -> usize {
    d.as_ref().map_or(0, |d| d.states.len())
}

#[no_mangle]
pub unsafe extern "C" fn lbps_run_options_default(out: *mut LbpsRunOptions) -> LbpsStatus {
    guard(|| {
        let d = RunConfig::default();
        let opts = LbpsRunOptions {
            kernel: LbpsKernel::LbpsHmc,
            features: LbpsFeatures::Chain,
            iterations: d.iterations,
            trajectory_length: d.trajectory_length,
            refresh_rate: d.refresh_rate,
            hmc_steps: d.hmc.steps,
            step_size: d.hmc.step_size,
            kappa: d.kappa,
            burn_in: d.burn_in,
            thin: d.thin,
            seed: d.seed,
        };
        write(out, opts, "out")
    })
}

/// Runs one chain on `data`.
#[no_mangle]
pub unsafe extern "C" fn lbps_run_chain(
    data: *const LbpsDataset,
    options: *const LbpsRunOptions,
    out: *mut *mut LbpsChain,
) -> LbpsStatus {
    guard(|| {
        let data = nonnull(data, "data")?;
        let o = *nonnull(options, "options")?;
        if out.is_null() {
            return Err(Fail(LbpsStatus::NullPointer, "out is null".into()));
        }
        let features = FeatureSet::build(feature_kind(o.features), default_ordering(&data.states))?;
        let config = RunConfig {
            kernel: match o.kernel {
                LbpsKernel::LbpsHmc => Kernel::LbpsHmc,
                LbpsKernel::HmcOnly => Kernel::HmcOnly,
            },
            iterations: o.iterations,
            trajectory_length: o.trajectory_length,
            refresh_rate: o.refresh_rate,
            hmc: HmcConfig { steps: o.hmc_steps, step_size: o.step_size },
            kappa: o.kappa,
            burn_in: o.burn_in,
            seed: o.seed,
            thin: o.thin,
            gradient_scale: 1.0,
        };
        let output = run_chain(&data.series, &features, &config)?;
        write(out, Box::into_raw(Box::new(LbpsChain { output, features })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lbps_chain_free(c: *mut LbpsChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of retained samples, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_num_samples(c: *const LbpsChain) -> usize {
    c.as_ref().map_or(0, |c| c.output.len())
}

/// Length of one weight sample (`wu` then `wb`), or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_dim(c: *const LbpsChain) -> usize {
    c.as_ref().map_or(0, |c| c.output.p1 + c.output.p2)
}

/// Number of exchangeable parameters, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_num_theta(c: *const LbpsChain) -> usize {
    c.as_ref().map_or(0, |c| c.output.p2)
}

/// All retained weight samples, row-major; `len` must be samples x dim.
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_samples(c: *const LbpsChain, out: *mut f64, len: usize) -> LbpsStatus {
    guard(|| {
        let c = &nonnull(c, "chain")?.output;
        let d = c.p1 + c.p2;
        let out = out_slice(out, len, c.len() * d, "out")?;
        for (row, s) in out.chunks_exact_mut(d.max(1)).zip(&c.samples) {
            row.copy_from_slice(s);
        }
        Ok(())
    })
}

/// Post-burn-in means of the exchangeable parameters; `len` must be
/// [`lbps_chain_num_theta`].
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_theta_means(c: *const LbpsChain, out: *mut f64, len: usize) -> LbpsStatus {
    guard(|| {
        let c = nonnull(c, "chain")?;
        let means = c.output.theta_means(&c.features)?;
        out_slice(out, len, means.len(), "out")?.copy_from_slice(&means);
        Ok(())
    })
}

/// Total wall-clock seconds the chain spent, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lbps_chain_seconds(c: *const LbpsChain) -> f64 {
    c.as_ref().map_or(0.0, |c| c.output.times.total)
}
