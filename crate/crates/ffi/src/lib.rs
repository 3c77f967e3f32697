//! C interface to the skill-chaining library.
//!
//! Every function returns an [`ScStatus`]; on failure the message is kept
//! per thread and can be copied out with [`sc_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use skillchain::harness::{self, ExperimentConfig};
use skillchain::tasks::{make_chain_world, ChainWorld, ChainWorldConfig};
use skillchain::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    Format = 5,
    Training = 6,
    InvalidArgument = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// Stages of an experiment that can be run one at a time.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStage {
    CollectDemos = 0,
    TrainSkills = 1,
    /// Chaining policy or baseline, depending on the configured method.
    TrainPolicy = 2,
    Evaluate = 3,
    Calibrate = 4,
}

/// Evaluation summary.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScEvalMetrics {
    pub success_rate: f64,
    pub subtask_completion: f64,
    pub rollout_length: f64,
    pub episodes: u64,
}

/// A parsed experiment configuration.
pub struct ScExperiment {
    cfg: ExperimentConfig,
}

/// An analytic chain world with exact dynamic-programming values.
pub struct ScChainWorld {
    world: ChainWorld,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: ScStatus, msg: impl Into<String>) -> ScStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(e: Error) -> ScStatus {
    let status = match &e {
        Error::InvalidConfig(_) => ScStatus::InvalidConfig,
        Error::Io(_) => ScStatus::Io,
        Error::Format(_) => ScStatus::Format,
        Error::Training(_) | Error::Demonstration(_) | Error::NonFinite(_) => ScStatus::Training,
        _ => ScStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ScStatus>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(ScStatus::Internal, "panic inside the library"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ScStatus> {
    if p.is_null() {
        return Err(fail(ScStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ScStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, ScStatus> {
    p.as_ref()
        .ok_or_else(|| fail(ScStatus::NullArgument, "null handle"))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, ScStatus> {
    p.as_mut()
        .ok_or_else(|| fail(ScStatus::NullArgument, "null output pointer"))
}

/// Copies `s` with a terminating NUL into `buf` of `cap` bytes.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize) -> Result<(), ScStatus> {
    if buf.is_null() {
        return Err(fail(ScStatus::NullArgument, "null buffer"));
    }
    if s.len() + 1 > cap {
        return Err(fail(
            ScStatus::BufferTooSmall,
            format!("{} bytes needed", s.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (truncated to
/// fit) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Parses a TOML experiment configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_from_toml(text: *const c_char, out: *mut *mut ScExperiment) -> ScStatus {
    guard(|| {
        let out = out_arg(out)?;
        let cfg = ExperimentConfig::from_toml(str_arg(text)?).map_err(from_error)?;
        *out = Box::into_raw(Box::new(ScExperiment { cfg }));
        Ok(())
    })
}

/// Releases an experiment handle; null is ignored.
///
/// # Safety
/// `exp` must come from [`sc_experiment_from_toml`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_free(exp: *mut ScExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Replaces the output directory.
///
/// # Safety
/// `exp` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_set_out_dir(exp: *mut ScExperiment, dir: *const c_char) -> ScStatus {
    guard(|| {
        let exp = out_arg(exp)?;
        exp.cfg.out_dir = PathBuf::from(str_arg(dir)?);
        Ok(())
    })
}

/// Writes the configuration hash used in every output file name.
///
/// # Safety
/// `exp` must be a live handle and `buf` point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_hash(exp: *const ScExperiment, buf: *mut c_char, cap: usize) -> ScStatus {
    guard(|| {
        let h = handle(exp)?.cfg.hash().map_err(from_error)?;
        copy_out(&h, buf, cap)
    })
}

/// Runs one stage for one seed, reading earlier stages' outputs from the
/// output directory.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_run_stage(exp: *const ScExperiment, seed: u64, stage: ScStage) -> ScStatus {
    guard(|| {
        let cfg = &handle(exp)?.cfg;
        let r = match stage {
            ScStage::CollectDemos => harness::collect_demos(cfg, seed).map(drop),
            ScStage::TrainSkills => harness::train_skills(cfg, seed).map(drop),
            ScStage::TrainPolicy => harness::train_policy(cfg, seed).map(drop),
            ScStage::Evaluate => harness::evaluate(cfg, seed).map(drop),
            ScStage::Calibrate => harness::calibrate(cfg, seed).map(drop),
        };
        r.map_err(from_error)
    })
}

/// Evaluates the stored policy of `seed`.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_evaluate(exp: *const ScExperiment, seed: u64, out: *mut ScEvalMetrics) -> ScStatus {
    guard(|| {
        let cfg = &handle(exp)?.cfg;
        let out = out_arg(out)?;
        let m = harness::evaluate(cfg, seed).map_err(from_error)?;
        *out = ScEvalMetrics {
            success_rate: m.success_rate,
            subtask_completion: m.subtask_completion,
            rollout_length: m.rollout_length,
            episodes: m.episodes.len() as u64,
        };
        Ok(())
    })
}

/// Runs every stage for every seed. `failed_stages` receives the number of
/// stages that failed; their messages are in the run manifest.
///
/// # Safety
/// `exp` must be a live handle and `failed_stages` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_experiment_run(exp: *const ScExperiment, failed_stages: *mut u32) -> ScStatus {
    guard(|| {
        let cfg = &handle(exp)?.cfg;
        let failed = out_arg(failed_stages)?;
        let m = harness::run_experiment(cfg).map_err(from_error)?;
        *failed = m.stages.iter().filter(|s| s.error.is_some()).count() as u32;
        Ok(())
    })
}

/// Creates a chain world: the peaked three-subtask world, or with
/// `conflict` set the one where greedy subgoals are globally poor.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_chain_world_new(conflict: bool, out: *mut *mut ScChainWorld) -> ScStatus {
    guard(|| {
        let out = out_arg(out)?;
        let cfg = if conflict {
            ChainWorldConfig::conflict()
        } else {
            ChainWorldConfig::default()
        };
        let world = make_chain_world(&cfg).map_err(from_error)?;
        *out = Box::into_raw(Box::new(ScChainWorld { world }));
        Ok(())
    })
}

/// Releases a chain world; null is ignored.
///
/// # Safety
/// `world` must come from [`sc_chain_world_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sc_chain_world_free(world: *mut ScChainWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Number of subtasks.
///
/// # Safety
/// `world` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_chain_world_num_subtasks(world: *const ScChainWorld, out: *mut u32) -> ScStatus {
    guard(|| {
        *out_arg(out)? = handle(world)?.world.config().num_subtasks() as u32;
        Ok(())
    })
}

/// Exact value of boundary state `x` before subtask `i` (1-based) on an
/// `n`-point grid, under the optimal chaining policy or, with `optimal`
/// false, under uniformly random subgoals.
///
/// # Safety
/// `world` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_chain_world_value(world: *const ScChainWorld, i: u32, x: f64, n: u32, optimal: bool, out: *mut f64) -> ScStatus {
    guard(|| {
        let w = &handle(world)?.world;
        let out = out_arg(out)?;
        let k = w.config().num_subtasks();
        if i == 0 || i as usize > k || n < 3 || !(0.0..=1.0).contains(&x) {
            return Err(fail(
                ScStatus::InvalidArgument,
                format!("need 1 <= i <= {k}, n >= 3 and x in [0, 1]"),
            ));
        }
        let table = &w.dp_values(n as usize, optimal)[i as usize - 1];
        *out = skillchain::tasks::chain_world::interpolate(table, x);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { sc_last_error(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
        assert_eq!(s.len(), n.min(255));
        s
    }

    #[test]
    fn bad_configs_report_codes_and_messages() {
        let mut h = ptr::null_mut();
        let text = CString::new("method = \"hiro\"").unwrap();
        assert_eq!(unsafe { sc_experiment_from_toml(text.as_ptr(), &mut h) }, ScStatus::InvalidConfig);
        assert!(h.is_null());
        assert!(last_error().contains("hiro"));
        assert_eq!(unsafe { sc_experiment_from_toml(ptr::null(), &mut h) }, ScStatus::NullArgument);
    }

    #[test]
    fn hash_needs_room_for_the_terminator() {
        let mut h = ptr::null_mut();
        let text = CString::new("task = \"chain_world\"").unwrap();
        assert_eq!(unsafe { sc_experiment_from_toml(text.as_ptr(), &mut h) }, ScStatus::Ok);
        let mut small = [0 as c_char; 16];
        assert_eq!(unsafe { sc_experiment_hash(h, small.as_mut_ptr(), small.len()) }, ScStatus::BufferTooSmall);
        let mut buf = [0 as c_char; 17];
        assert_eq!(unsafe { sc_experiment_hash(h, buf.as_mut_ptr(), buf.len()) }, ScStatus::Ok);
        let got = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(got, unsafe { &*h }.cfg.hash().unwrap());
        unsafe { sc_experiment_free(h) };
    }

    #[test]
    fn chain_world_values_match_the_library() {
        let mut w = ptr::null_mut();
        assert_eq!(unsafe { sc_chain_world_new(true, &mut w) }, ScStatus::Ok);
        let mut k = 0;
        assert_eq!(unsafe { sc_chain_world_num_subtasks(w, &mut k) }, ScStatus::Ok);
        assert_eq!(k, 3);
        let mut v = 0.0;
        assert_eq!(unsafe { sc_chain_world_value(w, 1, 0.0, 101, true, &mut v) }, ScStatus::Ok);
        let direct = make_chain_world(&ChainWorldConfig::conflict()).unwrap().dp_values(101, true)[0][0];
        assert_eq!(v, direct);
        assert_eq!(unsafe { sc_chain_world_value(w, 4, 0.5, 101, true, &mut v) }, ScStatus::InvalidArgument);
        unsafe { sc_chain_world_free(w) };
    }
}
