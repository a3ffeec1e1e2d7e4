//! C ABI over the locomotion environment and trained policies.
//!
//! Handles are opaque; every fallible call returns a [`TwStatus`] and
//! writes results through out-pointers. The generated header lands in
//! `include/tilewalk.h` at build time.
//!
//! Conventions:
//! - Pointers are only read or written during the call; nothing is retained.
//! - A non-`TW_OK` status leaves out-parameters untouched and stores a
//!   message retrievable with [`tw_last_error`] (per thread).
//! - Handles must be freed exactly once with their `_destroy` function;
//!   destroying a null handle is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tilewalk::env::{Env, EpisodeConfig, Scenario, OBS_DIM};
use tilewalk::gait::{Action, ActionBounds, ACTION_DIM};
use tilewalk::learn::{load_checkpoint, ObsNorm, PolicyValue};
use tilewalk::robot::RobotModel;
use tilewalk::sim::SimConfig;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwStatus {
    /// Success.
    TwOk = 0,
    /// A required pointer argument was null.
    TwNullPointer = 1,
    /// An argument failed validation (bad scenario name, non-UTF-8 path).
    TwInvalidArgument = 2,
    /// The call is illegal in the current state (step before reset, step
    /// after the episode ended).
    TwBadState = 3,
    /// A file could not be read or parsed.
    TwIo = 4,
    /// The checkpoint's network shape does not match this build.
    TwShapeMismatch = 5,
    /// The callee panicked; the handle may be poisoned and should only be
    /// destroyed.
    TwPanic = 6,
}

/// Episode progress reported by [`tw_env_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwDone {
    /// The episode continues.
    TwRunning = 0,
    /// Early termination (fall, forbidden contact, divergence).
    TwTerminated = 1,
    /// The phase cap was reached.
    TwTruncated = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| {
        let mut bytes = msg.into().into_bytes();
        bytes.retain(|&b| b != 0);
        bytes.push(0);
        *slot.borrow_mut() = bytes;
    });
}

fn fail(status: TwStatus, msg: impl Into<String>) -> TwStatus {
    set_last_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> TwStatus) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(TwStatus::TwPanic, format!("internal panic: {msg}"))
        }
    }
}

/// Copies the current thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `cap` bytes. Returns the full
/// message length including the terminator (0 when no error is stored), so
/// callers can detect truncation.
#[no_mangle]
pub extern "C" fn tw_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if msg.is_empty() {
            return 0;
        }
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        msg.len()
    })
}

/// Number of components in an observation vector.
#[no_mangle]
pub extern "C" fn tw_obs_dim() -> usize {
    OBS_DIM
}

/// Number of components in an action vector.
#[no_mangle]
pub extern "C" fn tw_act_dim() -> usize {
    ACTION_DIM
}

/// An environment instance plus its episode bookkeeping.
pub struct TwEnv {
    env: Env,
    started: bool,
    done: bool,
}

/// A loaded policy checkpoint (network plus observation normalizer).
pub struct TwPolicy {
    pv: PolicyValue,
    obs_norm: Option<ObsNorm>,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, TwStatus> {
    if ptr.is_null() {
        return Err(fail(TwStatus::TwNullPointer, "null string argument"));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(TwStatus::TwInvalidArgument, "string argument is not UTF-8"))
}

/// Creates an environment on the named terrain scenario (`"rigid"`,
/// `"t_c2"`..`"t_c5"`, `"t_v2"`, `"t_v8"`) with default robot, physics,
/// and episode settings. On success writes the handle to `out`.
///
/// # Safety
/// `scenario` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_env_create(
    scenario: *const c_char,
    seed: u64,
    out: *mut *mut TwEnv,
) -> TwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(TwStatus::TwNullPointer, "null out pointer");
        }
        let name = match unsafe { cstr(scenario) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let scenario: Scenario = match name.parse() {
            Ok(s) => s,
            Err(e) => return fail(TwStatus::TwInvalidArgument, e),
        };
        let env = Env::new(
            RobotModel::default(),
            SimConfig::default(),
            ActionBounds::default(),
            EpisodeConfig { scenario, ..EpisodeConfig::default() },
            seed,
        );
        let handle = Box::new(TwEnv { env, started: false, done: false });
        unsafe { out.write(Box::into_raw(handle)) };
        TwStatus::TwOk
    })
}

/// Frees an environment handle. Null is ignored.
///
/// # Safety
/// `env` must be a handle from [`tw_env_create`] not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn tw_env_destroy(env: *mut TwEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Starts a fresh episode and writes its first observation to `obs_out`
/// (length [`tw_obs_dim`]).
///
/// # Safety
/// `env` must be a live handle; `obs_out` must point to `tw_obs_dim()`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_env_reset(env: *mut TwEnv, obs_out: *mut f64) -> TwStatus {
    guarded(|| {
        if env.is_null() || obs_out.is_null() {
            return fail(TwStatus::TwNullPointer, "null env or obs pointer");
        }
        let handle = unsafe { &mut *env };
        let obs = handle.env.reset();
        handle.started = true;
        handle.done = false;
        unsafe { std::ptr::copy_nonoverlapping(obs.0.as_ptr(), obs_out, OBS_DIM) };
        TwStatus::TwOk
    })
}

/// Advances one gait phase under `action` (length [`tw_act_dim`],
/// components clamped to [-1, 1]). Writes the next observation, the phase
/// reward, and the episode progress flag.
///
/// # Safety
/// `env` must be a live handle; `action` must point to `tw_act_dim()`
/// readable doubles; `obs_out` to `tw_obs_dim()` writable doubles;
/// `reward_out` and `done_out` to one writable value each.
#[no_mangle]
pub unsafe extern "C" fn tw_env_step(
    env: *mut TwEnv,
    action: *const f64,
    obs_out: *mut f64,
    reward_out: *mut f64,
    done_out: *mut TwDone,
) -> TwStatus {
    guarded(|| {
        if env.is_null()
            || action.is_null()
            || obs_out.is_null()
            || reward_out.is_null()
            || done_out.is_null()
        {
            return fail(TwStatus::TwNullPointer, "null pointer argument");
        }
        let handle = unsafe { &mut *env };
        if !handle.started {
            return fail(TwStatus::TwBadState, "step before reset");
        }
        if handle.done {
            return fail(TwStatus::TwBadState, "episode is over; reset first");
        }
        let mut a = Action::zeros();
        unsafe { std::ptr::copy_nonoverlapping(action, a.0.as_mut_ptr(), ACTION_DIM) };
        let res = match handle.env.step(&a) {
            Ok(res) => res,
            Err(e) => return fail(TwStatus::TwBadState, e.to_string()),
        };
        handle.done = res.done();
        unsafe {
            std::ptr::copy_nonoverlapping(res.obs.0.as_ptr(), obs_out, OBS_DIM);
            reward_out.write(res.reward.total);
            done_out.write(if res.terminated {
                TwDone::TwTerminated
            } else if res.truncated {
                TwDone::TwTruncated
            } else {
                TwDone::TwRunning
            });
        }
        TwStatus::TwOk
    })
}

/// Loads a checkpoint written by the trainer. On success writes the handle
/// to `out`. Rejects files whose network does not map `tw_obs_dim()`
/// observations to `tw_act_dim()` actions.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_policy_load(path: *const c_char, out: *mut *mut TwPolicy) -> TwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(TwStatus::TwNullPointer, "null out pointer");
        }
        let path = match unsafe { cstr(path) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ck = match load_checkpoint(Path::new(path)) {
            Ok(ck) => ck,
            Err(e) => return fail(TwStatus::TwIo, e.to_string()),
        };
        if ck.pv.obs_dim() != OBS_DIM || ck.pv.act_dim() != ACTION_DIM {
            return fail(
                TwStatus::TwShapeMismatch,
                format!(
                    "checkpoint maps {} -> {}, expected {} -> {}",
                    ck.pv.obs_dim(),
                    ck.pv.act_dim(),
                    OBS_DIM,
                    ACTION_DIM
                ),
            );
        }
        let handle = Box::new(TwPolicy { pv: ck.pv, obs_norm: ck.obs_norm });
        unsafe { out.write(Box::into_raw(handle)) };
        TwStatus::TwOk
    })
}

/// Frees a policy handle. Null is ignored.
///
/// # Safety
/// `policy` must be a handle from [`tw_policy_load`] not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn tw_policy_destroy(policy: *mut TwPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Computes the deterministic (mean) action for one observation,
/// applying the checkpoint's observation normalization when present.
///
/// # Safety
/// `policy` must be a live handle; `obs` must point to `tw_obs_dim()`
/// readable doubles and `action_out` to `tw_act_dim()` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_policy_act(
    policy: *const TwPolicy,
    obs: *const f64,
    action_out: *mut f64,
) -> TwStatus {
    guarded(|| {
        if policy.is_null() || obs.is_null() || action_out.is_null() {
            return fail(TwStatus::TwNullPointer, "null pointer argument");
        }
        let handle = unsafe { &*policy };
        let raw = unsafe { std::slice::from_raw_parts(obs, OBS_DIM) };
        let mut normed = [0.0; OBS_DIM];
        match &handle.obs_norm {
            Some(n) => n.normalize_into(raw, &mut normed),
            None => normed.copy_from_slice(raw),
        }
        let mean = handle.pv.mean_action(&normed);
        unsafe { std::ptr::copy_nonoverlapping(mean.as_ptr(), action_out, ACTION_DIM) };
        TwStatus::TwOk
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn checked(status: TwStatus) {
        assert_eq!(status, TwStatus::TwOk, "{}", last_error_string());
    }

    fn last_error_string() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = tw_last_error(buf.as_mut_ptr(), buf.len());
        if n == 0 {
            return String::new();
        }
        let bytes: Vec<u8> = buf[..n.min(buf.len()) - 1].iter().map(|&b| b as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    #[test]
    fn env_lifecycle_runs_a_full_episode() {
        let scenario = CString::new("rigid").unwrap();
        let mut env: *mut TwEnv = ptr::null_mut();
        unsafe {
            checked(tw_env_create(scenario.as_ptr(), 11, &mut env));
            assert!(!env.is_null());

            let mut obs = vec![0.0f64; tw_obs_dim()];
            checked(tw_env_reset(env, obs.as_mut_ptr()));
            assert!(obs.iter().any(|&x| x != 0.0), "reset observation is non-trivial");

            let action = vec![0.0f64; tw_act_dim()];
            let mut reward = 0.0f64;
            let mut done = TwDone::TwRunning;
            for _ in 0..500 {
                checked(tw_env_step(
                    env,
                    action.as_ptr(),
                    obs.as_mut_ptr(),
                    &mut reward,
                    &mut done,
                ));
                if done != TwDone::TwRunning {
                    break;
                }
            }
            assert_ne!(done, TwDone::TwRunning, "zero action episode ends");

            // Stepping past the end is a state error, not a crash.
            let status =
                tw_env_step(env, action.as_ptr(), obs.as_mut_ptr(), &mut reward, &mut done);
            assert_eq!(status, TwStatus::TwBadState);
            assert!(last_error_string().contains("reset"));

            // Reset clears the state and the episode runs again.
            checked(tw_env_reset(env, obs.as_mut_ptr()));
            checked(tw_env_step(env, action.as_ptr(), obs.as_mut_ptr(), &mut reward, &mut done));

            tw_env_destroy(env);
        }
    }

    #[test]
    fn create_rejects_bad_arguments() {
        unsafe {
            let mut env: *mut TwEnv = ptr::null_mut();
            assert_eq!(tw_env_create(ptr::null(), 0, &mut env), TwStatus::TwNullPointer);

            let bogus = CString::new("uphill").unwrap();
            assert_eq!(
                tw_env_create(bogus.as_ptr(), 0, &mut env),
                TwStatus::TwInvalidArgument
            );
            assert!(last_error_string().contains("uphill"));

            let ok = CString::new("t_v2").unwrap();
            assert_eq!(tw_env_create(ok.as_ptr(), 0, ptr::null_mut()), TwStatus::TwNullPointer);

            let mut obs = vec![0.0f64; tw_obs_dim()];
            assert_eq!(tw_env_reset(ptr::null_mut(), obs.as_mut_ptr()), TwStatus::TwNullPointer);
        }
    }

    #[test]
    fn step_before_reset_is_a_state_error() {
        let scenario = CString::new("t_c5").unwrap();
        let mut env: *mut TwEnv = ptr::null_mut();
        unsafe {
            checked(tw_env_create(scenario.as_ptr(), 0, &mut env));
            let action = vec![0.0f64; tw_act_dim()];
            let mut obs = vec![0.0f64; tw_obs_dim()];
            let mut reward = 0.0;
            let mut done = TwDone::TwRunning;
            let status =
                tw_env_step(env, action.as_ptr(), obs.as_mut_ptr(), &mut reward, &mut done);
            assert_eq!(status, TwStatus::TwBadState);
            tw_env_destroy(env);
        }
    }

    #[test]
    fn policy_roundtrip_matches_the_rust_api() {
        use rand::SeedableRng;
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pv = PolicyValue::new(OBS_DIM, ACTION_DIM, &mut rng);
        let ck = dir.path().join("policy.txt");
        tilewalk::learn::save_checkpoint(&ck, &pv, None).unwrap();

        let path = CString::new(ck.to_str().unwrap()).unwrap();
        let mut policy: *mut TwPolicy = ptr::null_mut();
        unsafe {
            checked(tw_policy_load(path.as_ptr(), &mut policy));

            let obs: Vec<f64> = (0..OBS_DIM).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut action = vec![0.0f64; ACTION_DIM];
            checked(tw_policy_act(policy, obs.as_ptr(), action.as_mut_ptr()));
            let expect = pv.mean_action(&obs);
            for (a, e) in action.iter().zip(&expect) {
                assert_eq!(a, e, "C API action matches the Rust API exactly");
            }
            tw_policy_destroy(policy);
        }
    }

    #[test]
    fn policy_load_reports_missing_files_and_shape_mismatches() {
        use rand::SeedableRng;
        let dir = tempfile::tempdir().unwrap();
        let mut policy: *mut TwPolicy = ptr::null_mut();
        unsafe {
            let missing = CString::new(dir.path().join("nope.txt").to_str().unwrap()).unwrap();
            assert_eq!(tw_policy_load(missing.as_ptr(), &mut policy), TwStatus::TwIo);

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            let small = PolicyValue::new(3, 2, &mut rng);
            let ck = dir.path().join("small.txt");
            tilewalk::learn::save_checkpoint(&ck, &small, None).unwrap();
            let path = CString::new(ck.to_str().unwrap()).unwrap();
            assert_eq!(tw_policy_load(path.as_ptr(), &mut policy), TwStatus::TwShapeMismatch);
            assert!(last_error_string().contains("3 -> 2"), "{}", last_error_string());
        }
    }

    #[test]
    fn error_messages_survive_truncation() {
        unsafe {
            let bogus = CString::new("nowhere").unwrap();
            let mut env: *mut TwEnv = ptr::null_mut();
            assert_eq!(tw_env_create(bogus.as_ptr(), 0, &mut env), TwStatus::TwInvalidArgument);
        }
        let mut tiny = vec![0 as c_char; 4];
        let full = tw_last_error(tiny.as_mut_ptr(), tiny.len());
        assert!(full > 4, "full length exceeds the buffer");
        assert_eq!(tiny[3], 0, "always NUL-terminated");
        assert_eq!(tw_last_error(std::ptr::null_mut(), 0), full, "length query works");
    }

    #[test]
    fn generated_header_declares_the_api() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tilewalk.h");
        let text = std::fs::read_to_string(&header)
            .unwrap_or_else(|e| panic!("missing generated header {}: {e}", header.display()));
        for symbol in [
            "tw_env_create",
            "tw_env_reset",
            "tw_env_step",
            "tw_env_destroy",
            "tw_policy_load",
            "tw_policy_act",
            "tw_policy_destroy",
            "tw_obs_dim",
            "tw_act_dim",
            "tw_last_error",
            "TwStatus",
            "TwDone",
        ] {
            assert!(text.contains(symbol), "header lacks {symbol}");
        }
    }
}
