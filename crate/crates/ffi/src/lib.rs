//! C interface to the franson-cnot simulator.
//!
//! Every entry point returns an [`FcStatus`]; on failure the message is kept
//! per thread and can be read with [`fc_last_error_message`]. Gates are
//! opaque handles created by [`fc_gate_new`] and released with
//! [`fc_gate_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use franson_cnot::circuits::{validate_cascade_timing, CascadeConfig, GateConfig};
use franson_cnot::measurement::{self, CoincidenceWindow};
use franson_cnot::montecarlo::{self, NoiseConfig};
use franson_cnot::state::{JonesVector, Polarization, C64};
use franson_cnot::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    EmptyOutcome = 4,
    Fit = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for FcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Validation { .. } => FcStatus::InvalidArgument,
            Error::Precondition(_) => FcStatus::Precondition,
            Error::EmptyOutcome(_) => FcStatus::EmptyOutcome,
            Error::Fit(_) => FcStatus::Fit,
            Error::Io(_) => FcStatus::Io,
        }
    }
}

/// A gate together with its coincidence window.
pub struct FcGate {
    gate: GateConfig,
    window: CoincidenceWindow,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FcEntangleResult {
    pub success: f64,
    /// P(HH), P(HV), P(VH), P(VV) of the post-selected state.
    pub histogram: [f64; 4],
    pub concurrence: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FcFringeFit {
    pub amplitude: f64,
    pub visibility: f64,
    pub phase: f64,
    /// NaN when the fit has no spare degrees of freedom.
    pub visibility_stderr: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FcNoiseConfig {
    pub pair_rate: f64,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
    pub dark_rate_1: f64,
    pub dark_rate_2: f64,
    pub phase_jitter_sigma: f64,
    pub leakage: f64,
    pub integration_s: f64,
    pub window_s: f64,
    pub seed: u64,
}

impl From<FcNoiseConfig> for NoiseConfig {
    fn from(n: FcNoiseConfig) -> Self {
        NoiseConfig {
            pair_rate: n.pair_rate,
            efficiency_1: n.efficiency_1,
            efficiency_2: n.efficiency_2,
            dark_rate_1: n.dark_rate_1,
            dark_rate_2: n.dark_rate_2,
            phase_jitter_sigma: n.phase_jitter_sigma,
            leakage: n.leakage,
            integration_s: n.integration_s,
            window_s: n.window_s,
            seed: n.seed,
        }
    }
}

impl From<NoiseConfig> for FcNoiseConfig {
    fn from(n: NoiseConfig) -> Self {
        FcNoiseConfig {
            pair_rate: n.pair_rate,
            efficiency_1: n.efficiency_1,
            efficiency_2: n.efficiency_2,
            dark_rate_1: n.dark_rate_1,
            dark_rate_2: n.dark_rate_2,
            phase_jitter_sigma: n.phase_jitter_sigma,
            leakage: n.leakage,
            integration_s: n.integration_s,
            window_s: n.window_s,
            seed: n.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(FcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(FcStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FcStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            FcStatus::Panic
        }
    }
}

unsafe fn gate_ref<'a>(gate: *const FcGate) -> Result<&'a FcGate, Fail> {
    gate.as_ref().ok_or_else(|| null("gate"))
}

/// Creates a gate with the given path delay (in bins), interferometer
/// phases and coincidence window (in bins, must be below the delay).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn fc_gate_new(
    delay_bins: u32,
    theta1: f64,
    theta2: f64,
    window_bins: u32,
    out: *mut *mut FcGate,
) -> FcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(theta1.is_finite() && theta2.is_finite()) {
            return Err(Fail(FcStatus::InvalidArgument, "phases must be finite".into()));
        }
        let gate = GateConfig::new(delay_bins, theta1, theta2)?;
        let window = CoincidenceWindow::new(window_bins)?;
        if window_bins >= delay_bins {
            return Err(Fail(
                FcStatus::InvalidArgument,
                format!("window {window_bins} bins must be shorter than the delay {delay_bins} bins"),
            ));
        }
        *out = Box::into_raw(Box::new(FcGate { gate, window }));
        Ok(())
    })
}

/// # Safety
/// `gate` must come from [`fc_gate_new`] and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn fc_gate_free(gate: *mut FcGate) {
    if !gate.is_null() {
        drop(Box::from_raw(gate));
    }
}

/// Writes the 4×4 table of post-selected probabilities, row-major; rows
/// are inputs HH, HV, VH, VV and columns detected outputs in the same order.
///
/// # Safety
/// `out` must point to 16 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_truth_table(gate: *const FcGate, out: *mut f64) -> FcStatus {
    guard(|| {
        let g = gate_ref(gate)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = measurement::truth_table(&g.gate, g.window)?;
        let flat: Vec<f64> = t.probs.iter().flatten().copied().collect();
        ptr::copy_nonoverlapping(flat.as_ptr(), out, 16);
        Ok(())
    })
}

/// Runs the control input `alpha|H> + beta|V>` with the target in `H`
/// (`target_v == 0`) or `V`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_entangle(
    gate: *const FcGate,
    alpha_re: f64,
    alpha_im: f64,
    beta_re: f64,
    beta_im: f64,
    target_v: u8,
    out: *mut FcEntangleResult,
) -> FcStatus {
    guard(|| {
        let g = gate_ref(gate)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let control = JonesVector::new(C64::new(alpha_re, alpha_im), C64::new(beta_re, beta_im))
            .map_err(|e| Fail(FcStatus::InvalidArgument, e.to_string()))?;
        let target = if target_v == 0 {
            Polarization::H
        } else {
            Polarization::V
        };
        let r = measurement::entangle(&g.gate, g.window, control, target)?;
        *out = FcEntangleResult {
            success: r.success,
            histogram: r.histogram,
            concurrence: r.concurrence,
        };
        Ok(())
    })
}

/// Coincidence probability behind diagonal analyzers at each total phase.
/// The gate's own phases are replaced by `thetas[k]`.
///
/// # Safety
/// `thetas` and `out` must point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn fc_fringe_scan(gate: *const FcGate, thetas: *const f64, n: usize, out: *mut f64) -> FcStatus {
    guard(|| {
        let g = gate_ref(gate)?;
        if thetas.is_null() || out.is_null() {
            return Err(null("thetas/out"));
        }
        let th = std::slice::from_raw_parts(thetas, n);
        let scan = measurement::fringe_scan(&g.gate, th, g.window)?;
        for (k, (_, p)) in scan.into_iter().enumerate() {
            *out.add(k) = p;
        }
        Ok(())
    })
}

/// # Safety
/// `thetas` and `values` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_fit_fringe(
    thetas: *const f64,
    values: *const f64,
    n: usize,
    out: *mut FcFringeFit,
) -> FcStatus {
    guard(|| {
        if thetas.is_null() || values.is_null() || out.is_null() {
            return Err(null("thetas/values/out"));
        }
        let samples: Vec<(f64, f64)> = std::slice::from_raw_parts(thetas, n)
            .iter()
            .copied()
            .zip(std::slice::from_raw_parts(values, n).iter().copied())
            .collect();
        let f = measurement::fit_fringe(&samples)?;
        *out = FcFringeFit {
            amplitude: f.amplitude,
            visibility: f.visibility,
            phase: f.phase,
            visibility_stderr: f.visibility_stderr.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// `(p_hh + p_vv + visibility) / 2`
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_fidelity(p_hh: f64, p_vv: f64, visibility: f64, out: *mut f64) -> FcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = measurement::fidelity(p_hh, p_vv, visibility)?;
        Ok(())
    })
}

/// Number of branch pairs of a cascade that land inside the window.
/// Zero means the cascade is safe.
///
/// # Safety
/// `delays` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_cascade_conflict_count(
    delays: *const u32,
    n: usize,
    window_bins: u32,
    out: *mut usize,
) -> FcStatus {
    guard(|| {
        if delays.is_null() || out.is_null() {
            return Err(null("delays/out"));
        }
        let cascade = CascadeConfig::from_delays(std::slice::from_raw_parts(delays, n), window_bins)?;
        *out = validate_cascade_timing(&cascade)?.len();
        Ok(())
    })
}

/// Fills `out` with the noiseless defaults (unit efficiencies, no dark
/// counts, leakage or jitter).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_noise_default(out: *mut FcNoiseConfig) -> FcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = NoiseConfig::default().into();
        Ok(())
    })
}

/// Counting version of [`fc_truth_table`]. Both outputs are 16 values,
/// row-major; `renormalized` divides each row by its count total.
///
/// # Safety
/// `noise` must be readable; `counts` and `renormalized` must each point to
/// 16 writable values.
#[no_mangle]
pub unsafe extern "C" fn fc_montecarlo_truth_table(
    gate: *const FcGate,
    noise: *const FcNoiseConfig,
    counts: *mut u64,
    renormalized: *mut f64,
) -> FcStatus {
    guard(|| {
        let g = gate_ref(gate)?;
        let n = noise.as_ref().ok_or_else(|| null("noise"))?;
        if counts.is_null() || renormalized.is_null() {
            return Err(null("counts/renormalized"));
        }
        let exp = montecarlo::run_truth_table_experiment(&g.gate, g.window, &(*n).into())?;
        for i in 0..4 {
            for j in 0..4 {
                *counts.add(4 * i + j) = exp.records[i][j].counts;
                *renormalized.add(4 * i + j) = exp.renormalized[i][j];
            }
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (always NUL
/// terminated when `len > 0`) and returns the length the full message needs,
/// including the terminator. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn fc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
