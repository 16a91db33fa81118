use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gyrocav_ffi::*;

fn spin_system() -> *mut GcSpinSystem {
    let mut sys = ptr::null_mut();
    let st = unsafe { gc_spin_system_new(12.0347, 30.0, 2.0023, 1.0, &mut sys) };
    assert_eq!(st, GcStatus::Ok);
    assert!(!sys.is_null());
    sys
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        gc_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(gc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn transition_frequencies_at_operating_field() {
    let sys = spin_system();
    let (mut p, mut m) = (0.0, 0.0);
    assert_eq!(unsafe { gc_transition_frequencies(sys, 43.687, &mut p, &mut m) }, GcStatus::Ok);
    assert!((p - 13.259).abs() < 1e-3 && (m - 10.8104).abs() < 1e-3);
    let mut e = 0.0;
    assert_eq!(unsafe { gc_level_energy(sys, 1, 0.0, &mut e) }, GcStatus::Ok);
    assert_eq!(e, 0.0);
    unsafe { gc_spin_system_free(sys) };
}

#[test]
fn invalid_parameters_set_message() {
    let mut sys = ptr::null_mut();
    let st = unsafe { gc_spin_system_new(12.0, 30.0, -1.0, 1.0, &mut sys) };
    assert_eq!(st, GcStatus::Validation);
    assert!(sys.is_null());
    assert!(last_error().contains("g_factor"));
    assert!(gc_last_error_length() > 0);
}

#[test]
fn null_pointers_rejected() {
    assert_eq!(unsafe { gc_spin_system_new(12.0, 30.0, 2.0, 1.0, ptr::null_mut()) }, GcStatus::NullPointer);
    let mut e = 0.0;
    assert_eq!(unsafe { gc_level_energy(ptr::null(), 1, 0.0, &mut e) }, GcStatus::NullPointer);
    unsafe {
        gc_spin_system_free(ptr::null_mut());
        gc_sweep_free(ptr::null_mut());
    }
    assert_eq!(unsafe { gc_sweep_rows(ptr::null()) }, 0);
}

#[test]
fn thermal_state_high_temperature() {
    let sys = spin_system();
    let mut t = GcThermal::default();
    assert_eq!(unsafe { gc_thermal_state(sys, 43.7, 1e6, &mut t) }, GcStatus::Ok);
    assert!((t.n_plus - 1.0 / 6.0).abs() < 1e-3);
    assert_eq!(unsafe { gc_thermal_state(sys, 43.7, 0.0, &mut t) }, GcStatus::Validation);
    unsafe { gc_spin_system_free(sys) };
}

#[test]
fn eigenmodes_and_buffer_size() {
    let d = GcDoublet { f_r_ghz: 13.259, f_l_ghz: 13.259, kappa_r_mhz: 1e-4, kappa_l_mhz: 1e-4, g_rl_mhz: 0.0 };
    let e = GcEnsemble { g_plus_mhz: 6.0, g_minus_mhz: 0.0, gamma_mhz: 25.0, f_plus_ghz: 13.259, f_minus_ghz: 10.81 };
    let mut out = [0.0; 3];
    let mut len = 0;
    assert_eq!(unsafe { gc_eigenmodes(&d, &e, GC_SELECTION_PLUS, out.as_mut_ptr(), 2, &mut len) }, GcStatus::BufferTooSmall);
    assert_eq!(len, 3);
    assert_eq!(unsafe { gc_eigenmodes(&d, &e, GC_SELECTION_PLUS, out.as_mut_ptr(), 3, &mut len) }, GcStatus::Ok);
    assert!((out[0] - 13.253).abs() < 1e-12 && (out[2] - 13.265).abs() < 1e-12);
    assert_eq!(unsafe { gc_eigenmodes(&d, &e, 9, out.as_mut_ptr(), 3, &mut len) }, GcStatus::Validation);
}

#[test]
fn sweep_handle_round_trip() {
    let sys = spin_system();
    let d = GcDoublet { f_r_ghz: 13.261, f_l_ghz: 13.259, kappa_r_mhz: 1e-4, kappa_l_mhz: 1e-4, g_rl_mhz: 1.0 };
    let grid: Vec<f64> = (0..101).map(|i| 38.7 + 0.1 * i as f64).collect();
    let mut sweep = ptr::null_mut();
    let st = unsafe {
        gc_field_sweep(sys, &d, 6.0 / 0.14, 0.0, 25.0, 0.036, GC_COUPLING_POPULATION, GC_SELECTION_PLUS, grid.as_ptr(), grid.len(), &mut sweep)
    };
    assert_eq!(st, GcStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { gc_sweep_rows(sweep) }, 101);
    assert_eq!(unsafe { gc_sweep_branches(sweep) }, 3);
    let (mut b, mut f, mut w) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { gc_sweep_branch(sweep, 0, 1, GC_LABEL_L, &mut b, &mut f, &mut w) }, GcStatus::Ok);
    assert_eq!(b, 38.7);
    assert!(w > 0.0 && w <= 1.0);
    assert_eq!(unsafe { gc_sweep_branch(sweep, 500, 0, GC_LABEL_L, &mut b, &mut f, &mut w) }, GcStatus::OutOfRange);
    let mut gap = GcGap::default();
    assert_eq!(unsafe { gc_sweep_gap_excluding(sweep, GC_LABEL_R, &mut gap) }, GcStatus::Ok);
    assert!(gap.gap_mhz > 5.0 && gap.field_mt > 40.0 && gap.field_mt < 47.0);
    unsafe {
        gc_sweep_free(sweep);
        gc_spin_system_free(sys);
    }
}

#[test]
fn monotone_separation_reports_no_crossing() {
    let sys = spin_system();
    let d = GcDoublet { f_r_ghz: 13.261, f_l_ghz: 13.259, kappa_r_mhz: 1e-4, kappa_l_mhz: 1e-4, g_rl_mhz: 1.0 };
    let grid = [0.0, 1.0, 2.0, 3.0];
    let mut sweep = ptr::null_mut();
    let st = unsafe {
        gc_field_sweep(sys, &d, 1.0, 1.0, 25.0, 1.0, GC_COUPLING_POPULATION, GC_SELECTION_PLUS, grid.as_ptr(), grid.len(), &mut sweep)
    };
    assert_eq!(st, GcStatus::Ok);
    let mut gap = GcGap::default();
    assert_eq!(unsafe { gc_sweep_gap(sweep, 0, 1, &mut gap) }, GcStatus::NoCrossing);
    unsafe {
        gc_sweep_free(sweep);
        gc_spin_system_free(sys);
    }
}

#[test]
fn transmission_peak_magnitude() {
    let d = GcDoublet { f_r_ghz: 13.261, f_l_ghz: 13.259, kappa_r_mhz: 0.1, kappa_l_mhz: 0.1, g_rl_mhz: 0.0 };
    let e = GcEnsemble { g_plus_mhz: 0.0, g_minus_mhz: 0.0, gamma_mhz: 25.0, f_plus_ghz: 0.0, f_minus_ghz: 0.0 };
    let ports = GcPorts { input_r: 0.25, input_l: 0.25, output_r: 0.25, output_l: 0.25 };
    let f = [13.259, 13.261];
    let mut mag = [0.0; 2];
    let st = unsafe { gc_transmission(&d, &e, GC_SELECTION_NONE, &ports, f.as_ptr(), 2, mag.as_mut_ptr()) };
    assert_eq!(st, GcStatus::Ok);
    assert!((mag[0] - 0.5).abs() < 1e-3 && (mag[1] - 0.5).abs() < 1e-3);
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header.join("gyrocav.h").exists());
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"gyrocav.h\"\n\
         int main(void) {\n\
           GcSpinSystem *s = NULL;\n\
           GcStatus st = gc_spin_system_new(12.0347, 30.0, 2.0023, 1.0, &s);\n\
           gc_spin_system_free(s);\n\
           return st == GC_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler found; skipping header check");
            return;
        }
    };
    assert!(status.success());
}

fn tempfile_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi_header");
    std::fs::create_dir_all(&d).unwrap();
    d
}
