use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use vvlab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { vv_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn model(name: &str) -> *mut VvModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { vv_model_builtin(name.as_ptr(), &mut m) }, VvStatus::VV_OK);
    assert!(!m.is_null());
    m
}

#[test]
fn model_lifecycle_and_errors() {
    let m = model("shared_frame2");
    assert_eq!(unsafe { vv_model_dim(m) }, 2);
    unsafe { vv_model_free(m) };

    let bad = CString::new("no_such_system").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { vv_model_builtin(bad.as_ptr(), &mut out) }, VvStatus::VV_UNKNOWN_SYSTEM);
    assert!(out.is_null());
    assert!(last_error().contains("no_such_system"));

    assert_eq!(unsafe { vv_model_builtin(ptr::null(), &mut out) }, VvStatus::VV_NULL_POINTER);
    assert_eq!(unsafe { vv_model_dim(ptr::null()) }, 0);
    unsafe { vv_model_free(ptr::null_mut()) };
}

#[test]
fn hypotheses_and_frame() {
    let m = model("decoupled2");
    let mut s = VvHypothesisSummary::default();
    assert_eq!(unsafe { vv_check_hypotheses(m, 20, &mut s) }, VvStatus::VV_OK);
    assert!(s.passed && s.samples > 0 && s.mu_floor > 0.0);

    // A = diag(u0, 1 + u1), B = diag(1, 2) at u = (0.1, -0.05)
    let u = [0.1, -0.05];
    let (mut l, mut mu, mut r) = ([0.0; 2], [0.0; 2], [0.0; 4]);
    let st = unsafe { vv_decompose(m, u.as_ptr(), l.as_mut_ptr(), mu.as_mut_ptr(), r.as_mut_ptr()) };
    assert_eq!(st, VvStatus::VV_OK);
    assert!((l[0] - 0.1).abs() < 1e-14 && (l[1] - 0.95).abs() < 1e-14);
    assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] - 2.0).abs() < 1e-14);
    assert!((r[0].abs() - 1.0).abs() < 1e-14 && r[1].abs() < 1e-14);
    assert!(r[2].abs() < 1e-14 && (r[3].abs() - 1.0).abs() < 1e-14);

    let st = unsafe { vv_decompose(m, u.as_ptr(), ptr::null_mut(), mu.as_mut_ptr(), r.as_mut_ptr()) };
    assert_eq!(st, VvStatus::VV_NULL_POINTER);
    unsafe { vv_model_free(m) };
}

#[test]
fn heat_simulation_conserves_mass() {
    let m = model("heat");
    let cells = 128;
    let h = 20.0 / cells as f64;
    let u0: Vec<f64> = (0..cells)
        .map(|j| {
            let x = -10.0 + (j as f64 + 0.5) * h;
            0.1 * (-x * x).exp()
        })
        .collect();
    let mut sim = ptr::null_mut();
    let st = unsafe { vv_sim_new(m, -10.0, 10.0, cells, u0.as_ptr(), true, 1.0, &mut sim) };
    assert_eq!(st, VvStatus::VV_OK);
    assert_eq!(unsafe { vv_sim_time(sim) }, 0.0);
    assert_eq!(unsafe { vv_sim_advance(sim, 0.5) }, VvStatus::VV_OK);
    assert!((unsafe { vv_sim_time(sim) } - 0.5).abs() < 1e-12);

    let mut small = vec![0.0; cells - 1];
    let st = unsafe { vv_sim_values(sim, small.as_mut_ptr(), small.len()) };
    assert_eq!(st, VvStatus::VV_BUFFER_TOO_SMALL);

    let mut u = vec![0.0; cells];
    assert_eq!(unsafe { vv_sim_values(sim, u.as_mut_ptr(), u.len()) }, VvStatus::VV_OK);
    let mass0: f64 = u0.iter().sum();
    let mass: f64 = u.iter().sum();
    assert!((mass - mass0).abs() < 1e-12 * mass0.max(1.0));
    // peak of a heat-kernel-smoothed Gaussian: 0.1 / sqrt(1 + 4t)
    let peak = u.iter().cloned().fold(f64::MIN, f64::max);
    assert!((peak - 0.1 / 3f64.sqrt()).abs() < 2e-3, "{peak}");

    unsafe {
        vv_sim_free(sim);
        vv_model_free(m);
    }
    assert!(unsafe { vv_sim_time(ptr::null()) }.is_nan());
}

#[test]
fn functionals_match_brute_force() {
    let q = [0.0, 1.0, -0.5, 0.25];
    let mut out = 0.0;
    assert_eq!(unsafe { vv_tv(q.as_ptr(), q.len(), &mut out) }, VvStatus::VV_OK);
    assert!((out - 3.25).abs() < 1e-15);

    let z: [f64; 5] = [0.3, -0.1, 0.0, 0.7, 0.2];
    let zs: [f64; 5] = [-0.2, 0.4, 0.1, 0.0, -0.5];
    let (h, c, c1) = (0.1, 1.3, 0.7);
    let mut brute = 0.0;
    for (j, a) in z.iter().enumerate() {
        for (k, b) in zs.iter().enumerate() {
            let s = (j as f64 - k as f64) * h;
            let kern = if s >= 0.0 { 1.0 / c } else { (c * s / (2.0 * c1)).exp() / c };
            brute += h * h * kern * a.abs() * b.abs();
        }
    }
    assert_eq!(unsafe { vv_transversal_q(z.as_ptr(), zs.as_ptr(), z.len(), h, c, c1, &mut out) }, VvStatus::VV_OK);
    assert!((out - brute).abs() < 1e-15, "{out} {brute}");

    let mut brute = 0.0;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            brute += 0.5 * h * h * (z[j] * zs[k] - z[k] * zs[j]).abs();
        }
    }
    assert_eq!(unsafe { vv_area(z.as_ptr(), zs.as_ptr(), z.len(), h, &mut out) }, VvStatus::VV_OK);
    assert!((out - brute).abs() < 1e-15, "{out} {brute}");

    let st = unsafe { vv_transversal_q(z.as_ptr(), zs.as_ptr(), z.len(), h, -1.0, c1, &mut out) };
    assert_eq!(st, VvStatus::VV_INVALID_INPUT);
    assert!(last_error().contains("positive"));
}

#[test]
fn error_message_truncates() {
    let mut out = 0.0;
    unsafe { vv_tv(ptr::null(), 3, &mut out) };
    let mut buf = [0 as c_char; 4];
    let full = unsafe { vv_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
    assert_eq!(unsafe { vv_last_error_message(ptr::null_mut(), 0) }, full);
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vvlab.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["vv_model_builtin", "vv_sim_new", "vv_transversal_q", "VV_BUFFER_TOO_SMALL"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"vvlab.h\"\nint main(void) { VvModel *m = 0; return vv_model_builtin(\"heat\", &m) == VV_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(status.success());
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("vvlab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
