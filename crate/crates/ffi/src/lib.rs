//! C ABI over the scoring and calibration core.
//!
//! Scorers are opaque handles created and freed here; every fallible
//! call returns a [`PmStatus`], and the message behind the most recent
//! failure is kept per thread for [`pm_last_error`]. Strings cross the
//! boundary as nul-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use prefmetric::calibration::{apply_sigmoid, default_grid, select_temperature, DEFAULT_BINS};
use prefmetric::ingest::TranslationInstance;
use prefmetric::objective::{bt_loss, reg_loss};
use prefmetric::scorer::{forward, FeatureExtractor, ScorerParams};
use prefmetric::Error;

/// Call outcome. Anything but `PM_OK` leaves a message for
/// `pm_last_error` on the calling thread.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    PmOk = 0,
    PmErrIo = 1,
    PmErrSchema = 2,
    PmErrNumeric = 3,
    PmErrNull = 4,
    PmErrUtf8 = 5,
    PmErrContract = 6,
}

/// A loaded reward scorer and the feature extractor matching its
/// input dimension.
pub struct PmScorer {
    params: ScorerParams,
    extractor: FeatureExtractor,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean: String = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).unwrap_or_default();
    });
}

fn fail(err: &Error) -> PmStatus {
    set_error(&err.to_string());
    match err {
        Error::Io { .. } => PmStatus::PmErrIo,
        Error::Schema { .. } | Error::Range { .. } | Error::Conflict(_) | Error::Alignment(_) => {
            PmStatus::PmErrSchema
        }
        Error::NonFinite { .. } => PmStatus::PmErrNumeric,
        Error::Config(_) | Error::Contract(_) => PmStatus::PmErrContract,
    }
}

fn fail_null(what: &str) -> PmStatus {
    set_error(&format!("{what} must not be null"));
    PmStatus::PmErrNull
}

/// # Safety
/// `ptr` must be null or point to a nul-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, PmStatus> {
    if ptr.is_null() {
        return Err(fail_null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        PmStatus::PmErrUtf8
    })
}

fn guarded(body: impl FnOnce() -> PmStatus) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            PmStatus::PmErrContract
        }
    }
}

fn scorer_from_params(params: ScorerParams) -> Result<PmScorer, Error> {
    params.validate()?;
    let extractor = FeatureExtractor::new(params.input_dim)?;
    Ok(PmScorer { params, extractor })
}

fn install(scorer: Result<PmScorer, Error>, out: *mut *mut PmScorer) -> PmStatus {
    match scorer {
        Ok(scorer) => {
            unsafe { *out = Box::into_raw(Box::new(scorer)) };
            PmStatus::PmOk
        }
        Err(e) => fail(&e),
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message from the most recent failed call on this thread; the empty
/// string when nothing has failed. The pointer stays valid until the
/// next failure on the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load scorer parameters from a JSON file and return a handle in
/// `*out`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pm_scorer_load(
    path: *const c_char,
    out: *mut *mut PmScorer,
) -> PmStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        install(
            ScorerParams::load(Path::new(path)).and_then(scorer_from_params),
            out,
        )
    })
}

/// Build a scorer from parameter JSON held in memory.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pm_scorer_from_json(
    json: *const c_char,
    out: *mut *mut PmScorer,
) -> PmStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let json = match utf8_arg(json, "json") {
            Ok(j) => j,
            Err(status) => return status,
        };
        install(ScorerParams::from_json(json).and_then(scorer_from_params), out)
    })
}

/// Free a scorer returned by a constructor. Null is a no-op.
///
/// # Safety
/// `scorer` must be null or a handle from a constructor, freed at most
/// once and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_scorer_free(scorer: *mut PmScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Report the scorer's feature and hidden dimensions.
///
/// # Safety
/// All pointers must be valid; `scorer` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pm_scorer_dims(
    scorer: *const PmScorer,
    input_dim: *mut usize,
    hidden_dim: *mut usize,
) -> PmStatus {
    if scorer.is_null() {
        return fail_null("scorer");
    }
    if input_dim.is_null() {
        return fail_null("input_dim");
    }
    if hidden_dim.is_null() {
        return fail_null("hidden_dim");
    }
    let scorer = &*scorer;
    *input_dim = scorer.params.input_dim;
    *hidden_dim = scorer.params.hidden_dim;
    PmStatus::PmOk
}

/// Score one candidate translation and write the raw reward to
/// `*out_reward`. `reference` may be null for reference-free scoring.
///
/// # Safety
/// `scorer` must be a live handle, the strings nul-terminated, and
/// `out_reward` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_score(
    scorer: *const PmScorer,
    source: *const c_char,
    candidate: *const c_char,
    reference: *const c_char,
    out_reward: *mut f64,
) -> PmStatus {
    guarded(|| {
        if scorer.is_null() {
            return fail_null("scorer");
        }
        if out_reward.is_null() {
            return fail_null("out_reward");
        }
        let source = match utf8_arg(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let candidate = match utf8_arg(candidate, "candidate") {
            Ok(c) => c,
            Err(status) => return status,
        };
        let reference = if reference.is_null() {
            None
        } else {
            match utf8_arg(reference, "reference") {
                Ok(r) => Some(r.to_string()),
                Err(status) => return status,
            }
        };
        let scorer = &*scorer;
        let instance = TranslationInstance {
            segment_id: String::new(),
            system_id: String::new(),
            lang_pair: String::new(),
            source: source.to_string(),
            candidate: candidate.to_string(),
            reference,
        };
        let features = scorer.extractor.extract(&instance);
        match forward(&scorer.params, &features) {
            Ok(reward) => {
                *out_reward = reward.value;
                PmStatus::PmOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Select the entropy-maximizing sigmoid temperature for a reward
/// sample, searching the built-in grid with the default bin count.
/// `out_entropy` may be null.
///
/// # Safety
/// `rewards` must point to `len` doubles and `out_tau` be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_select_temperature(
    rewards: *const f64,
    len: usize,
    out_tau: *mut f64,
    out_entropy: *mut f64,
) -> PmStatus {
    guarded(|| {
        if rewards.is_null() {
            return fail_null("rewards");
        }
        if out_tau.is_null() {
            return fail_null("out_tau");
        }
        let sample = std::slice::from_raw_parts(rewards, len);
        match select_temperature(sample, DEFAULT_BINS, &default_grid()) {
            Ok(result) => {
                *out_tau = result.tau;
                if !out_entropy.is_null() {
                    *out_entropy = result.entropy;
                }
                PmStatus::PmOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Calibrated score σ(reward / tau). Returns NaN (and records an
/// error) when tau is not a positive finite number.
#[no_mangle]
pub extern "C" fn pm_apply_sigmoid(reward: f64, tau: f64) -> f64 {
    if !(tau > 0.0 && tau.is_finite()) {
        set_error(&format!("temperature must be positive and finite, got {tau}"));
        return f64::NAN;
    }
    apply_sigmoid(reward, tau)
}

/// Ranking loss −log σ(r_plus − r_minus − margin).
#[no_mangle]
pub extern "C" fn pm_bt_loss(r_plus: f64, r_minus: f64, margin: f64) -> f64 {
    bt_loss(r_plus, r_minus, margin)
}

/// Quadratic band penalty outside [beta_lower, beta_upper].
#[no_mangle]
pub extern "C" fn pm_reg_loss(reward: f64, beta_upper: f64, beta_lower: f64) -> f64 {
    reg_loss(reward, beta_upper, beta_lower)
}
