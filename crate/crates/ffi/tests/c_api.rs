use std::ffi::{CStr, CString};
use std::ptr;

use trajdiff_ffi::*;

fn last_error() -> String {
    let p = td_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem(name: &str) -> *mut TdProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { td_problem_new(name.as_ptr(), &mut p) }, TdStatus::Ok);
    assert!(!p.is_null());
    p
}

fn config(iterations: u64) -> TdConfig {
    let mut c = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { td_config_default(c.as_mut_ptr()) }, TdStatus::Ok);
    let mut c = unsafe { c.assume_init() };
    c.iterations = iterations;
    c.snapshot_stride = 0;
    assert_eq!(unsafe { td_config_reanneal(&mut c) }, TdStatus::Ok);
    c
}

#[test]
fn default_config_mirrors_the_library() {
    let c = config(20_000);
    let d = trajdiff::SolverConfig::default();
    assert_eq!((c.alpha, c.mu, c.sigma0, c.sigma_min), (d.alpha, d.mu, d.sigma0, d.sigma_min));
    assert_eq!(c.gamma, d.gamma);
    assert_eq!(c.gradient, TdGradient::Exact);
}

#[test]
fn problem_dimensions_and_guess() {
    let p = problem("pendulum");
    let n = unsafe { td_problem_num_variables(p) };
    let m = unsafe { td_problem_num_constraints(p) };
    assert_eq!((n, m), (50 + 51 * 2, 51 * 2));
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    unsafe {
        assert_eq!(td_problem_initial_guess(p, 3, a.as_mut_ptr(), n), TdStatus::Ok);
        assert_eq!(td_problem_initial_guess(p, 3, b.as_mut_ptr(), n), TdStatus::Ok);
        assert_eq!(td_problem_initial_guess(p, 3, a.as_mut_ptr(), n - 1), TdStatus::Dimension);
        td_problem_free(p);
    }
    assert_eq!(a, b);
}

#[test]
fn unknown_problem_sets_the_error_message() {
    let name = CString::new("cartpole").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { td_problem_new(name.as_ptr(), &mut p) }, TdStatus::UnknownName);
    assert!(p.is_null());
    assert!(last_error().contains("pendulum, bugtrap, toy_kkt"));
    td_clear_error();
    assert!(td_last_error_message().is_null());
}

#[test]
fn null_arguments_are_reported() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(td_problem_new(ptr::null(), &mut p), TdStatus::NullPointer);
        assert_eq!(td_config_default(ptr::null_mut()), TdStatus::NullPointer);
        assert_eq!(td_problem_num_variables(ptr::null()), 0);
        assert!(td_solution_violation(ptr::null()).is_nan());
        td_problem_free(ptr::null_mut());
        td_solution_free(ptr::null_mut());
        td_batch_free(ptr::null_mut());
    }
}

#[test]
fn toy_solve_reaches_the_kkt_point() {
    let p = problem("toy_kkt");
    let c = config(20_000);
    let x0 = [0.1, -0.3];
    let mut sol = ptr::null_mut();
    unsafe {
        let status = td_solve(p, &c, x0.as_ptr(), 2, ptr::null(), 1, &mut sol);
        assert_eq!(status, TdStatus::Ok);
        let mut x = [0.0; 2];
        let mut lam = [0.0; 1];
        assert_eq!(td_solution_xbar(sol, x.as_mut_ptr(), 2), TdStatus::Ok);
        assert_eq!(td_solution_lambda(sol, lam.as_mut_ptr(), 1), TdStatus::Ok);
        assert!((x[0] - 0.5).abs() < 1e-2 && (x[1] - 0.5).abs() < 1e-2, "{x:?}");
        assert!((lam[0] + 0.5).abs() < 5e-2, "{lam:?}");
        assert_eq!(td_solution_iterations(sol), 20_000);
        let len = td_solution_trace_len(sol);
        let mut hsq = vec![0.0; len];
        assert_eq!(td_solution_hsq_trace(sol, hsq.as_mut_ptr(), len), TdStatus::Ok);
        assert!(hsq.last().unwrap() < &1e-3);
        assert_eq!(td_solution_xbar(sol, x.as_mut_ptr(), 1), TdStatus::Dimension);
        td_solution_free(sol);
        td_problem_free(p);
    }
}

#[test]
fn invalid_config_and_start_are_rejected() {
    let p = problem("toy_kkt");
    let mut c = config(100);
    c.mu = -1.0;
    let x0 = [0.1, 0.2];
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(td_solve(p, &c, x0.as_ptr(), 2, ptr::null(), 1, &mut sol), TdStatus::InvalidConfig);
        assert!(sol.is_null());
        let c = config(100);
        assert_eq!(td_solve(p, &c, x0.as_ptr(), 3, ptr::null(), 1, &mut sol), TdStatus::Dimension);
        assert!(last_error().contains("expected 2"));
        td_problem_free(p);
    }
}

#[test]
fn batch_matches_single_solves() {
    let p = problem("toy_kkt");
    let c = config(500);
    let x0s = [0.1, 0.2, -0.4, 0.9, 0.3, 0.3];
    let mut batch = ptr::null_mut();
    unsafe {
        assert_eq!(td_solve_batch(p, &c, x0s.as_ptr(), 3, 2, 2, &mut batch), TdStatus::Ok);
        assert_eq!(td_batch_len(batch), 3);
        for i in 0..3 {
            assert_eq!(td_batch_status(batch, i), TdStatus::Ok);
            let view = td_batch_solution(batch, i);
            let mut from_batch = [0.0; 2];
            td_solution_xbar(view, from_batch.as_mut_ptr(), 2);

            let mut single_cfg = c;
            single_cfg.seed = c.seed + i as u64;
            let mut sol = ptr::null_mut();
            assert_eq!(td_solve(p, &single_cfg, x0s[2 * i..].as_ptr(), 2, ptr::null(), 1, &mut sol), TdStatus::Ok);
            let mut single = [0.0; 2];
            td_solution_xbar(sol, single.as_mut_ptr(), 2);
            assert_eq!(from_batch.map(f64::to_bits), single.map(f64::to_bits));
            td_solution_free(sol);
        }
        assert_eq!(td_batch_status(batch, 3), TdStatus::InvalidArgument);
        assert!(td_batch_solution(batch, 3).is_null());
        td_batch_free(batch);
        td_problem_free(p);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/trajdiff.h")).unwrap();
    for name in [
        "typedef struct TdProblem TdProblem;",
        "TD_STATUS_STEP_REJECTED = 9",
        "td_problem_new",
        "td_solve(",
        "td_solve_batch(",
        "td_batch_solution(",
        "td_solution_hsq_trace(",
        "td_last_error_message(void)",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
