use std::ffi::{CStr, CString};
use std::ptr;

use galerkin_ffi::*;

fn last_error() -> String {
    let n = unsafe { gk_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n + 1];
    let m = unsafe { gk_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(m, n);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn c(re: f64, im: f64) -> GkComplex {
    GkComplex { re, im }
}

#[test]
fn arrays_round_trip_through_spectrum() {
    let t = [c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
    let m = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    let mut forms = ptr::null_mut();
    unsafe {
        assert_eq!(gk_forms_from_arrays(2, t.as_ptr(), m.as_ptr(), &mut forms), GkStatus::Ok);
        assert_eq!(gk_forms_dim(forms), 2);
        let mut spec = ptr::null_mut();
        assert_eq!(gk_spectrum_of_t(forms, &mut spec), GkStatus::Ok);
        assert_eq!(gk_spectrum_len(spec), 2);
        let mut out = [GkComplex::default(); 2];
        assert_eq!(gk_spectrum_copy(spec, out.as_mut_ptr(), 1), GkStatus::DimensionMismatch);
        assert_eq!(gk_spectrum_copy(spec, out.as_mut_ptr(), 2), GkStatus::Ok);
        assert!((out[0].re - 1.0).abs() < 1e-13 && (out[1].re - 3.0).abs() < 1e-13);

        let mut s = f64::NAN;
        assert_eq!(gk_sigma_n(forms, c(1.0, 0.5), &mut s), GkStatus::Ok);
        assert!((s - 0.5).abs() < 1e-13, "{s}");

        gk_spectrum_free(spec);
        gk_forms_free(forms);
    }
}

#[test]
fn invalid_input_reports_status_and_message() {
    let t = [c(1.0, 0.0), c(5.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    let m = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    let mut forms = ptr::null_mut();
    unsafe {
        assert_eq!(gk_forms_from_arrays(2, t.as_ptr(), m.as_ptr(), &mut forms), GkStatus::NotHermitian);
        assert!(forms.is_null());
        assert!(!last_error().is_empty());

        let neg = [c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let herm = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(gk_forms_from_arrays(2, herm.as_ptr(), neg.as_ptr(), &mut forms), GkStatus::NotPositiveDefinite);

        assert_eq!(gk_forms_from_arrays(2, ptr::null(), m.as_ptr(), &mut forms), GkStatus::NullPointer);
        assert!(last_error().contains("t_hat"));
        assert_eq!(gk_forms_from_arrays(0, t.as_ptr(), m.as_ptr(), &mut forms), GkStatus::InvalidArgument);
        assert_eq!(gk_spectrum_of_t(ptr::null(), &mut ptr::null_mut()), GkStatus::NullPointer);
        assert_eq!(gk_forms_dim(ptr::null()), 0);
        assert_eq!(gk_run_rank(ptr::null()), 0);
        assert!(gk_run_to_json(ptr::null()).is_null());
        gk_forms_free(ptr::null_mut());
        gk_run_free(ptr::null_mut());
        gk_string_free(ptr::null_mut());

        let mut small = [0 as std::ffi::c_char; 5];
        let full = gk_last_error_message(small.as_mut_ptr(), small.len());
        assert!(full > 4);
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_bytes().len(), 4);
    }
}

#[test]
fn import_of_missing_file_and_sample() {
    let missing = CString::new("/nonexistent/forms.gfm").unwrap();
    let sample = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/sample_2x2.gfm")).unwrap();
    let mut forms = ptr::null_mut();
    unsafe {
        assert_eq!(gk_forms_import(missing.as_ptr(), &mut forms), GkStatus::Io);
        assert_eq!(gk_forms_import(ptr::null(), &mut forms), GkStatus::NullPointer);
        assert_eq!(gk_forms_import(sample.as_ptr(), &mut forms), GkStatus::Ok);
        assert_eq!(gk_forms_dim(forms), 2);
        gk_forms_free(forms);
    }
}

#[test]
fn builtin_assembly_and_bad_level() {
    let mut forms = ptr::null_mut();
    unsafe {
        assert_eq!(gk_forms_assemble(GkProblem::FourierRankOne, 10, &mut forms), GkStatus::Ok);
        assert_eq!(gk_forms_dim(forms), 21);
        gk_forms_free(forms);
        let mut bad = ptr::null_mut();
        assert_ne!(gk_forms_assemble(GkProblem::BlockFem, 0, &mut bad), GkStatus::Ok);
        assert!(bad.is_null());
    }
}

#[test]
fn two_stage_fourier_run() {
    let mut run = ptr::null_mut();
    unsafe {
        let pi = std::f64::consts::PI;
        assert_eq!(
            gk_two_stage(GkProblem::FourierRankOne, 25, 200, -pi, pi, GkMode::Direct, 0.0, &mut run),
            GkStatus::Ok
        );
        assert_eq!(gk_run_rank(run), 4);
        let n = gk_run_stage_two_len(run);
        assert_eq!(n, 401);
        let mut values = vec![GkComplex::default(); n];
        assert_eq!(gk_run_stage_two_copy(run, values.as_mut_ptr(), n), GkStatus::Ok);
        let near = values
            .iter()
            .filter(|z| ((z.re + 1.64834270).powi(2) + (z.im - 1.0).powi(2)).sqrt() < 0.1)
            .count();
        assert_eq!(near, 1);

        let k = gk_run_pollution_len(run);
        assert!(k > 0);
        let (mut v, mut g) = (0.0, false);
        assert_eq!(gk_run_pollution_entry(run, 0, &mut v, &mut g), GkStatus::Ok);
        assert!(v.is_finite());
        assert_eq!(gk_run_pollution_entry(run, k, &mut v, &mut g), GkStatus::InvalidArgument);

        let json = gk_run_to_json(run);
        assert!(!json.is_null());
        let parsed: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(parsed["rank"], 4);
        gk_string_free(json);
        gk_run_free(run);

        let mut bad = ptr::null_mut();
        assert_eq!(
            gk_two_stage(GkProblem::FourierRankOne, 25, 200, 1.0, 0.0, GkMode::Direct, 0.0, &mut bad),
            GkStatus::InvalidArgument
        );
        assert!(bad.is_null());
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(gk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/galerkin.h")).unwrap();
    assert!(header.contains("#ifndef GALERKIN_H"));
    for name in [
        "gk_version",
        "gk_last_error_message",
        "gk_forms_assemble",
        "gk_forms_from_arrays",
        "gk_forms_import",
        "gk_forms_dim",
        "gk_forms_free",
        "gk_spectrum_of_t",
        "gk_spectrum_len",
        "gk_spectrum_copy",
        "gk_spectrum_free",
        "gk_sigma_n",
        "gk_two_stage",
        "gk_run_rank",
        "gk_run_stage_two_len",
        "gk_run_stage_two_copy",
        "gk_run_pollution_len",
        "gk_run_pollution_entry",
        "gk_run_to_json",
        "gk_string_free",
        "gk_run_free",
        "GK_STATUS_SHIFT_NOT_BELOW_SPECTRUM",
        "typedef struct GkForms GkForms",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
