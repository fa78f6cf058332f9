//! Exercise the C ABI through the exported extern "C" functions, the same
//! way a foreign caller would: raw pointers, status codes, and the
//! thread-local error message.

use std::ffi::{CStr, CString};
use std::ptr;

use chess_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(chess_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn create_dims_data_free() {
    let mut f: *mut ChessField = ptr::null_mut();
    assert_eq!(chess_field_create(2, 8, &mut f), ChessStatus::Ok);
    let (mut n, mut size, mut len) = (0usize, 0usize, 0usize);
    assert_eq!(
        chess_field_dims(f, &mut n, &mut size, &mut len),
        ChessStatus::Ok
    );
    assert_eq!((n, size, len), (2, 8, 4096));
    let data = chess_field_data(f);
    assert!(!data.is_null());
    unsafe {
        for i in 0..len {
            assert_eq!(*data.add(i), 0.0);
        }
        *data.add(7) = 1.5;
        assert_eq!(*data.add(7), 1.5);
    }
    chess_field_free(f);
}

#[test]
fn invalid_grid_and_null_pointers() {
    let mut f: *mut ChessField = ptr::null_mut();
    assert_eq!(chess_field_create(2, 7, &mut f), ChessStatus::Parameter);
    assert!(!last_error().is_empty());
    assert_eq!(
        chess_field_create(2, 8, ptr::null_mut()),
        ChessStatus::NullPointer
    );
    let mut m = 0.0;
    assert_eq!(
        chess_cone_margin(ptr::null(), 2, &mut m),
        ChessStatus::NullPointer
    );
}

#[test]
fn mms_forward_margin_and_solve() {
    let mut phi: *mut ChessField = ptr::null_mut();
    let mut rhs: *mut ChessField = ptr::null_mut();
    let mut margin = 0.0;
    assert_eq!(
        chess_mms_generate(2, 8, 2, 0.02, 7, &mut phi, &mut rhs, &mut margin),
        ChessStatus::Ok
    );
    assert!(margin >= 0.5, "margin {margin}");

    let mut forward: *mut ChessField = ptr::null_mut();
    assert_eq!(chess_apply_op(phi, 2, &mut forward), ChessStatus::Ok);
    let mut m2 = 0.0;
    assert_eq!(chess_cone_margin(phi, 2, &mut m2), ChessStatus::Ok);
    assert!((m2 - margin).abs() < 1e-14);

    // forward image equals the generated rhs sample-for-sample
    let (mut n, mut size, mut len) = (0usize, 0usize, 0usize);
    assert_eq!(
        chess_field_dims(forward, &mut n, &mut size, &mut len),
        ChessStatus::Ok
    );
    let a = chess_field_data(forward);
    let b = chess_field_data(rhs);
    unsafe {
        for i in 0..len {
            assert_eq!(*a.add(i), *b.add(i));
        }
    }

    let mut sol: *mut ChessField = ptr::null_mut();
    let mut residual = -1.0;
    assert_eq!(
        chess_solve(rhs, 2, 0.0, 0, 0, &mut sol, &mut residual),
        ChessStatus::Ok
    );
    assert!(residual <= 1e-9, "residual {residual}");
    // solution equals phi* after mean-zeroing
    let s = chess_field_data(sol);
    let p = chess_field_data(phi);
    unsafe {
        let mean: f64 = (0..len).map(|i| *p.add(i)).sum::<f64>() / len as f64;
        let err = (0..len)
            .map(|i| (*s.add(i) - (*p.add(i) - mean)).abs())
            .fold(0.0_f64, f64::max);
        assert!(err <= 1e-8, "recovery error {err}");
    }

    chess_field_free(phi);
    chess_field_free(rhs);
    chess_field_free(forward);
    chess_field_free(sol);
}

#[test]
fn solve_rejects_nonpositive_rhs() {
    let mut rhs: *mut ChessField = ptr::null_mut();
    assert_eq!(chess_field_create(2, 8, &mut rhs), ChessStatus::Ok);
    let (mut n, mut size, mut len) = (0usize, 0usize, 0usize);
    chess_field_dims(rhs, &mut n, &mut size, &mut len);
    let d = chess_field_data(rhs);
    unsafe {
        for i in 0..len {
            *d.add(i) = 1.0;
        }
        *d.add(3) = -0.5;
        *d.add(4) = 2.5;
    }
    let mut sol: *mut ChessField = ptr::null_mut();
    let mut residual = 0.0;
    assert_eq!(
        chess_solve(rhs, 2, 0.0, 0, 0, &mut sol, &mut residual),
        ChessStatus::Positivity
    );
    assert!(last_error().contains("positive"));
    chess_field_free(rhs);
}

#[test]
fn file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("field.json").to_str().unwrap()).unwrap();

    let mut phi: *mut ChessField = ptr::null_mut();
    let mut rhs: *mut ChessField = ptr::null_mut();
    let mut margin = 0.0;
    assert_eq!(
        chess_mms_generate(2, 8, 2, 0.01, 3, &mut phi, &mut rhs, &mut margin),
        ChessStatus::Ok
    );
    assert_eq!(chess_field_write(phi, path.as_ptr()), ChessStatus::Ok);
    let mut back: *mut ChessField = ptr::null_mut();
    assert_eq!(chess_field_read(path.as_ptr(), &mut back), ChessStatus::Ok);

    let (mut n, mut size, mut len) = (0usize, 0usize, 0usize);
    chess_field_dims(phi, &mut n, &mut size, &mut len);
    let a = chess_field_data(phi);
    let b = chess_field_data(back);
    unsafe {
        for i in 0..len {
            assert_eq!(*a.add(i), *b.add(i));
        }
    }
    let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
    let mut nope: *mut ChessField = ptr::null_mut();
    assert_eq!(
        chess_field_read(missing.as_ptr(), &mut nope),
        ChessStatus::Io
    );

    chess_field_free(phi);
    chess_field_free(rhs);
    chess_field_free(back);
}

#[test]
fn props_through_abi() {
    let mut worst = 1.0;
    assert_eq!(chess_run_props(3, 2, 200, 1, &mut worst), ChessStatus::Ok);
    assert!(worst >= -1e-9, "worst slack {worst}");
    // k out of range is rejected up front rather than crossing the
    // boundary as a panic
    let mut w2 = 0.0;
    assert_eq!(chess_run_props(2, 5, 10, 1, &mut w2), ChessStatus::Parameter);
    assert!(last_error().contains("k"));
}
