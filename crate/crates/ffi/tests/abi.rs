use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use l1pca_ffi::*;

fn last_error() -> String {
    let p = l1pca_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn identity_problem() -> *mut L1pcaProblem {
    let data = [1.0, 0.0, 0.0, 1.0];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { l1pca_problem_new_dense(data.as_ptr(), 2, 2, 1, &mut p) }, L1pcaStatus::Ok);
    p
}

#[test]
fn solves_identity_to_sqrt_two() {
    let prob = identity_problem();
    let mut opts = std::mem::MaybeUninit::<L1pcaOptions>::uninit();
    assert_eq!(unsafe { l1pca_options_default(L1pcaMethod::Pame as u32, opts.as_mut_ptr()) }, L1pcaStatus::Ok);
    let mut opts = unsafe { opts.assume_init() };
    assert_eq!((opts.alpha, opts.beta, opts.gamma), (1e-5, 1e3, 1.0));
    opts.beta = 1.0;
    opts.gamma = 0.5;

    let mut res = ptr::null_mut();
    assert_eq!(unsafe { l1pca_solve(prob, &opts, &mut res) }, L1pcaStatus::Ok);
    assert!(unsafe { l1pca_result_converged(res) });
    assert!((unsafe { l1pca_result_objective(res) } - 2f64.sqrt()).abs() < 1e-8);

    let mut q = [0.0; 2];
    assert_eq!(unsafe { l1pca_result_q(res, q.as_mut_ptr(), 2) }, L1pcaStatus::Ok);
    assert!((q[0].hypot(q[1]) - 1.0).abs() < 1e-12);
    let mut tiny = [0.0; 1];
    assert_eq!(unsafe { l1pca_result_q(res, tiny.as_mut_ptr(), 1) }, L1pcaStatus::BufferTooSmall);

    let len = unsafe { l1pca_result_trace_len(res) };
    assert_eq!(len, unsafe { l1pca_result_iterations(res) } + 1);
    let mut h = vec![0.0; len];
    assert_eq!(unsafe { l1pca_result_h_values(res, h.as_mut_ptr(), len) }, L1pcaStatus::Ok);
    let mut t = 0.0;
    assert_eq!(unsafe { l1pca_tev(prob, res, &mut t) }, L1pcaStatus::Ok);
    assert!(t <= 1.0 + 1e-12);

    let (mut d, mut n, mut k) = (0, 0, 0);
    assert_eq!(unsafe { l1pca_problem_dims(prob, &mut d, &mut n, &mut k) }, L1pcaStatus::Ok);
    assert_eq!((d, n, k), (2, 2, 1));
    unsafe {
        l1pca_result_free(res);
        l1pca_problem_free(prob);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let data = [1.0, 2.0];
    let mut p = ptr::null_mut();
    let s = unsafe { l1pca_problem_new_dense(data.as_ptr(), 2, 1, 2, &mut p) };
    assert_eq!(s, L1pcaStatus::InvalidInput);
    assert!(last_error().contains("K=2"));
    assert!(p.is_null());

    assert_eq!(unsafe { l1pca_problem_new_dense(ptr::null(), 2, 1, 1, &mut p) }, L1pcaStatus::NullPointer);

    let prob = identity_problem();
    let mut opts = std::mem::MaybeUninit::<L1pcaOptions>::uninit();
    unsafe { l1pca_options_default(L1pcaMethod::Pame as u32, opts.as_mut_ptr()) };
    let mut opts = unsafe { opts.assume_init() };
    opts.theorem_mode = true;
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { l1pca_solve(prob, &opts, &mut res) }, L1pcaStatus::TheoremCondition);
    assert!(last_error().contains("(iii)"));
    opts.method = 99;
    assert_eq!(unsafe { l1pca_solve(prob, &opts, &mut res) }, L1pcaStatus::InvalidConfig);
    assert!(res.is_null());
    unsafe { l1pca_problem_free(prob) };
    unsafe { l1pca_problem_free(ptr::null_mut()) };
}

#[test]
fn reads_sparse_text_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    std::fs::write(&path, "1 1:3\n-1 2:1\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { l1pca_problem_from_file(c.as_ptr(), 1, &mut p) }, L1pcaStatus::Ok);
    unsafe { l1pca_problem_free(p) };

    std::fs::write(&path, "1 1:3\n-1 2:x\n").unwrap();
    assert_eq!(unsafe { l1pca_problem_from_file(c.as_ptr(), 1, &mut p) }, L1pcaStatus::Parse);
    assert!(last_error().contains("line 2"));
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(l1pca_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "l1pca.h"

int main(void) {
    double x[4] = {1.0, 0.0, 0.0, 1.0};
    L1pcaProblem *prob = NULL;
    L1pcaResult *res = NULL;
    L1pcaOptions opts;
    if (l1pca_problem_new_dense(x, 2, 2, 1, &prob) != L1PCA_STATUS_OK) return 1;
    if (l1pca_options_default(L1PCA_METHOD_PAM, &opts) != L1PCA_STATUS_OK) return 2;
    opts.beta = 1.0;
    if (l1pca_solve(prob, &opts, &res) != L1PCA_STATUS_OK) return 3;
    double obj = l1pca_result_objective(res);
    l1pca_result_free(res);
    l1pca_problem_free(prob);
    printf("%.12f\n", obj);
    return fabs(obj - sqrt(2.0)) < 1e-8 ? 0 : 4;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let staticlib = lib_dir.join("libl1pca_ffi.a");
    assert!(staticlib.exists(), "missing {}", staticlib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
