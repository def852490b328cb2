use std::ffi::CString;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use so3sr_ffi::*;

const ID: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

fn kernel(s: u32, n: u32) -> *mut So3srKernel {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { so3sr_kernel_new(s, n, &mut k) }, SO3SR_OK);
    assert!(!k.is_null());
    k
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { so3sr_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

/// Quaternion of the rotation by `t` about z.
fn rz(t: f64) -> [f64; 4] {
    [(t / 2.0).cos(), 0.0, 0.0, (t / 2.0).sin()]
}

#[test]
fn kernel_lifecycle_and_values() {
    let k = kernel(8, 20);
    let mut n = 0u32;
    let mut v = 0.0;
    unsafe {
        assert_eq!(so3sr_kernel_degree(k, &mut n), SO3SR_OK);
        assert_eq!(n, 20);
        assert_eq!(so3sr_kernel_sigma(k, ID.as_ptr(), ID.as_ptr(), &mut v), SO3SR_OK);
        assert!((v - 1.0).abs() < 1e-12);
        // zonal: sigma(x, y) equals the profile at the angle between them
        let (x, y) = (rz(0.4), rz(1.1));
        let mut p = 0.0;
        assert_eq!(so3sr_kernel_sigma(k, x.as_ptr(), y.as_ptr(), &mut v), SO3SR_OK);
        assert_eq!(so3sr_kernel_profile(k, 0.7, 0, &mut p), SO3SR_OK);
        assert!((v - p).abs() < 1e-12, "{v} {p}");
        let name = CString::new("c_s").unwrap();
        assert_eq!(so3sr_kernel_constant(k, name.as_ptr(), &mut v), SO3SR_OK);
        assert!((v - 0.999 / 18.0).abs() < 1e-15);
        so3sr_kernel_free(k);
        so3sr_kernel_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_and_messages() {
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(so3sr_kernel_new(7, 20, &mut k), SO3SR_ERR_DOMAIN);
        assert!(k.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(so3sr_kernel_new(8, 20, ptr::null_mut()), SO3SR_ERR_NULL);
        assert!(last_error().contains("null"));

        let k = kernel(8, 20);
        let mut v = 0.0;
        let bad = [2.0, 0.0, 0.0, 0.0];
        assert_eq!(so3sr_kernel_sigma(k, bad.as_ptr(), ID.as_ptr(), &mut v), SO3SR_ERR_DOMAIN);
        assert!(last_error().contains("unit quaternion"));
        assert_eq!(so3sr_kernel_profile(k, 0.1, 5, &mut v), SO3SR_ERR_CAPABILITY);
        let name = CString::new("nope").unwrap();
        assert_eq!(so3sr_kernel_constant(k, name.as_ptr(), &mut v), SO3SR_ERR_DOMAIN);
        assert_eq!(so3sr_kernel_sigma(ptr::null(), ID.as_ptr(), ID.as_ptr(), &mut v), SO3SR_ERR_NULL);

        // two coincident centers violate the separation hypothesis
        let centers = [ID, ID].concat();
        let signs = [1i8, -1];
        let mut c = ptr::null_mut();
        let rc = so3sr_certificate_new(k, centers.as_ptr(), signs.as_ptr(), 2, &mut c);
        assert_eq!(rc, SO3SR_ERR_DOMAIN);
        assert!(c.is_null());
        so3sr_kernel_free(k);
    }
    // truncation reports the full length
    let full = last_error().len();
    let mut small = [0 as std::ffi::c_char; 4];
    assert_eq!(unsafe { so3sr_last_error(small.as_mut_ptr(), 4) }, full);
    assert_eq!(small[3], 0);
}

#[test]
fn certificate_interpolates_and_verifies() {
    let k = kernel(8, 40);
    let centers = [rz(0.0), rz(2.0), [0.0, 1.0, 0.0, 0.0]].concat();
    let signs = [1i8, -1, 1];
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(so3sr_certificate_new(k, centers.as_ptr(), signs.as_ptr(), 3, &mut c), SO3SR_OK, "{}", last_error());
        for (i, s) in signs.iter().enumerate() {
            let (mut q, mut g) = (0.0, [9.0; 3]);
            assert_eq!(so3sr_certificate_eval(c, centers[4 * i..].as_ptr(), &mut q, g.as_mut_ptr()), SO3SR_OK);
            assert!((q - *s as f64).abs() < 1e-8);
            assert!(g.iter().all(|v| v.abs() < 1e-8));
            let mut q2 = 0.0;
            assert_eq!(so3sr_certificate_eval(c, centers[4 * i..].as_ptr(), &mut q2, ptr::null_mut()), SO3SR_OK);
            assert!((q - q2).abs() < 1e-14);
        }
        let mut cond = 0.0;
        assert_eq!(so3sr_certificate_condition(c, &mut cond), SO3SR_OK);
        assert!(cond >= 1.0 && cond.is_finite());
        let (mut far, mut pass) = (0.0, -1);
        assert_eq!(so3sr_certificate_verify(c, 500, 1, &mut far, &mut pass), SO3SR_OK, "{}", last_error());
        assert_eq!(pass, 1);
        assert!(far < 1.0 - 1e-3);
        so3sr_certificate_free(c);
        so3sr_kernel_free(k);
    }
}

fn profile_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_is_current_and_links_from_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/so3sr.h")).unwrap();
    for sym in ["so3sr_kernel_new", "so3sr_certificate_verify", "SO3SR_ERR_SINGULAR", "typedef struct So3srKernel So3srKernel"] {
        assert!(header.contains(sym), "{sym}");
    }
    let lib = profile_dir().join("libso3sr_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link: no staticlib or cc");
        return;
    }
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("so3sr_smoke");
    let st = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
