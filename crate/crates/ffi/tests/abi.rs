use std::ffi::CString;
use std::process::Command;
use std::ptr;

use modelkit_ffi::*;

fn model(expr: &str) -> *mut MkModel {
    let c = CString::new(expr).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mk_model_from_expr(c.as_ptr(), &mut m) }, MkStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let n = unsafe { mk_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n + 1];
    unsafe { mk_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.pop();
    String::from_utf8(buf).unwrap()
}

#[test]
fn normal_round_trip() {
    let m = model("normal");
    let mut n = 0;
    assert_eq!(unsafe { mk_model_param_count(m, &mut n) }, MkStatus::Ok);
    assert_eq!(n, 2);
    let mut dim = 0;
    unsafe { mk_model_data_dim(m, &mut dim) };
    assert_eq!(dim, 1);

    let truth = [1.5, 2.0];
    let s = mk_stream_new(11);
    let mut data = Vec::new();
    for _ in 0..5000 {
        let (mut x, mut w) = (0.0, 0);
        assert_eq!(unsafe { mk_model_draw(m, truth.as_ptr(), 2, s, &mut x, 1, &mut w) }, MkStatus::Ok);
        assert_eq!(w, 1);
        data.push(x);
    }
    let mut est = [0.0; 2];
    assert_eq!(
        unsafe { mk_model_estimate(m, data.as_ptr(), data.len(), 1, est.as_mut_ptr(), 2) },
        MkStatus::Ok
    );
    assert!((est[0] - 1.5).abs() < 0.1 && (est[1] - 2.0).abs() < 0.1, "{est:?}");

    let (mut c, p0) = (0.0, [0.0, 1.0]);
    assert_eq!(unsafe { mk_model_cdf(m, [0.0].as_ptr(), 1, p0.as_ptr(), 2, &mut c) }, MkStatus::Ok);
    assert!((c - 0.5).abs() < 1e-12);

    let mut ll = 0.0;
    assert_eq!(
        unsafe { mk_model_log_likelihood(m, [0.0].as_ptr(), 1, 1, p0.as_ptr(), 2, &mut ll) },
        MkStatus::Ok
    );
    assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    unsafe {
        mk_stream_free(s);
        mk_model_free(m);
    }
}

#[test]
fn seeded_streams_repeat() {
    let m = model("exponential");
    let p = [2.0];
    let run = |seed| {
        let s = mk_stream_new(seed);
        let v: Vec<f64> = (0..20)
            .map(|_| {
                let (mut x, mut w) = (0.0, 0);
                unsafe { mk_model_draw(m, p.as_ptr(), 1, s, &mut x, 1, &mut w) };
                x
            })
            .collect();
        unsafe { mk_stream_free(s) };
        v
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
    unsafe { mk_model_free(m) };
}

#[test]
fn errors_set_status_and_message() {
    let bad = CString::new("cross(normal, normal").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mk_model_from_expr(bad.as_ptr(), &mut m) }, MkStatus::Syntax);
    assert!(m.is_null());
    assert!(last_error().contains("offset 20"), "{}", last_error());

    let unknown = CString::new("gamma").unwrap();
    assert_eq!(unsafe { mk_model_from_expr(unknown.as_ptr(), &mut m) }, MkStatus::UnknownName);
    assert_eq!(unsafe { mk_model_from_expr(ptr::null(), &mut m) }, MkStatus::NullPointer);

    let m = model("normal");
    let mut ll = 0.0;
    assert_eq!(
        unsafe { mk_model_log_likelihood(m, [0.0].as_ptr(), 1, 1, [0.0].as_ptr(), 1, &mut ll) },
        MkStatus::DimensionMismatch
    );
    let mut small = [0.0; 1];
    assert_eq!(unsafe { mk_model_default_params(m, small.as_mut_ptr(), 1) }, MkStatus::BufferTooSmall);
    let mut buf = [0u8; 8];
    let full = unsafe { mk_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    assert!(full > 7);
    assert_eq!(buf[7], 0);
    unsafe { mk_model_free(m) };
    unsafe { mk_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/modelkit.h")).unwrap();
    for f in [
        "mk_model_from_expr",
        "mk_model_free",
        "mk_model_log_likelihood",
        "mk_model_estimate",
        "mk_model_draw",
        "mk_model_cdf",
        "mk_stream_new",
        "mk_stream_free",
        "mk_last_error_message",
        "MK_STATUS_OK = 0",
    ] {
        assert!(header.contains(f), "{f}");
    }
    // Compile a caller against it when a C compiler is present.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"modelkit.h\"\nint f(void) { MkModel *m = 0; return mk_model_from_expr(\"normal\", &m) == MK_STATUS_OK; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include]).arg(&src).status() {
        Ok(st) => assert!(st.success()),
        Err(_) => eprintln!("no C compiler; skipped compiling the header"),
    }
}
