//! C ABI for the gyrocav library.
//!
//! Conventions:
//! - Every fallible function returns a [`GcStatus`]; results go through out
//!   pointers, which are left untouched on failure.
//! - After a failure, [`gc_last_error_message`] returns a description. The
//!   message is per thread and replaced by the next failure.
//! - Objects created by `gc_*_new` or `gc_field_sweep` are owned by the
//!   caller and released with the matching `gc_*_free`. Passing NULL to a
//!   free function is a no-op.
//! - Panics never cross the boundary; they surface as
//!   `GC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use gyrocav::cavityqed::{coupled_mode_matrix, eigenmodes, BasisLabel, EnsembleCoupling, ModeDoublet, Selection};
use gyrocav::spectra::{extract_gap, field_sweep, transmission, BranchPair, CavityModel, PortCoupling, SweepResult};
use gyrocav::spinmodel::{level_energy, minus_transition_ghz, plus_transition_ghz, SpinProjection, SpinSystemParams};
use gyrocav::thermo::{partition_function, populations, susceptibility_thermal, CouplingModel, PerSpinCoupling};
use gyrocav::Error;

pub const GC_SELECTION_NONE: i32 = 0;
pub const GC_SELECTION_PLUS: i32 = 1;
pub const GC_SELECTION_MINUS: i32 = 2;
pub const GC_SELECTION_BOTH: i32 = 3;

pub const GC_LABEL_R: i32 = 0;
pub const GC_LABEL_L: i32 = 1;
pub const GC_LABEL_SPIN_PLUS: i32 = 2;
pub const GC_LABEL_SPIN_MINUS: i32 = 3;

pub const GC_COUPLING_POPULATION: i32 = 0;
pub const GC_COUPLING_POLARIZATION: i32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numerical = 3,
    NoCrossing = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Spin Hamiltonian parameters (opaque).
pub struct GcSpinSystem {
    params: SpinSystemParams,
}

/// Result of a field sweep (opaque).
pub struct GcSweep {
    inner: SweepResult,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GcDoublet {
    pub f_r_ghz: f64,
    pub f_l_ghz: f64,
    pub kappa_r_mhz: f64,
    pub kappa_l_mhz: f64,
    pub g_rl_mhz: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GcEnsemble {
    pub g_plus_mhz: f64,
    pub g_minus_mhz: f64,
    pub gamma_mhz: f64,
    pub f_plus_ghz: f64,
    pub f_minus_ghz: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GcPorts {
    pub input_r: f64,
    pub input_l: f64,
    pub output_r: f64,
    pub output_l: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GcThermal {
    pub partition_function: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub chi_plus: f64,
    pub chi_minus: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GcGap {
    pub field_mt: f64,
    pub gap_mhz: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(GcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NoCrossing => GcStatus::NoCrossing,
            ref e if e.is_validation() => GcStatus::Validation,
            _ => GcStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(GcStatus::NullPointer, format!("{name} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            GcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn input_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

fn selection(code: i32) -> Result<Selection, Failure> {
    match code {
        GC_SELECTION_NONE => Ok(Selection::None),
        GC_SELECTION_PLUS => Ok(Selection::Plus),
        GC_SELECTION_MINUS => Ok(Selection::Minus),
        GC_SELECTION_BOTH => Ok(Selection::Both),
        _ => Err(Failure(GcStatus::Validation, format!("unknown selection code {code}"))),
    }
}

fn label(code: i32) -> Result<BasisLabel, Failure> {
    match code {
        GC_LABEL_R => Ok(BasisLabel::R),
        GC_LABEL_L => Ok(BasisLabel::L),
        GC_LABEL_SPIN_PLUS => Ok(BasisLabel::SpinPlus),
        GC_LABEL_SPIN_MINUS => Ok(BasisLabel::SpinMinus),
        _ => Err(Failure(GcStatus::Validation, format!("unknown label code {code}"))),
    }
}

fn coupling_model(code: i32) -> Result<CouplingModel, Failure> {
    match code {
        GC_COUPLING_POPULATION => Ok(CouplingModel::Population),
        GC_COUPLING_POLARIZATION => Ok(CouplingModel::Polarization),
        _ => Err(Failure(GcStatus::Validation, format!("unknown coupling model code {code}"))),
    }
}

impl From<GcDoublet> for ModeDoublet {
    fn from(d: GcDoublet) -> Self {
        ModeDoublet {
            f_r_ghz: d.f_r_ghz,
            f_l_ghz: d.f_l_ghz,
            kappa_r_mhz: d.kappa_r_mhz,
            kappa_l_mhz: d.kappa_l_mhz,
            g_rl_mhz: d.g_rl_mhz,
        }
    }
}

impl From<GcEnsemble> for EnsembleCoupling {
    fn from(e: GcEnsemble) -> Self {
        EnsembleCoupling {
            g_plus_mhz: e.g_plus_mhz,
            g_minus_mhz: e.g_minus_mhz,
            gamma_mhz: e.gamma_mhz,
            f_plus_ghz: e.f_plus_ghz,
            f_minus_ghz: e.f_minus_ghz,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn gc_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written excluding the NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |s| s.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Creates a spin system. Zero-field splittings in GHz.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_spin_system_new(
    zfs_12_32_ghz: f64,
    zfs_32_52_ghz: f64,
    g_factor: f64,
    total_ions: f64,
    out: *mut *mut GcSpinSystem,
) -> GcStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let params = SpinSystemParams {
            zfs_12_32_ghz,
            zfs_32_52_ghz,
            g_factor,
            total_ions,
        };
        params.validate()?;
        *slot = Box::into_raw(Box::new(GcSpinSystem { params }));
        Ok(())
    })
}

/// # Safety
/// `system` must be NULL or a pointer from [`gc_spin_system_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn gc_spin_system_free(system: *mut GcSpinSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Energy of level `m = twice_m / 2` at `field_mt`, GHz.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_level_energy(
    system: *const GcSpinSystem,
    twice_m: i32,
    field_mt: f64,
    out: *mut f64,
) -> GcStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = self::out(out, "out")?;
        let twice = i8::try_from(twice_m).map_err(|_| Failure(GcStatus::Validation, format!("invalid 2m = {twice_m}")))?;
        let m = SpinProjection::from_twice(twice)?;
        *slot = level_energy(&sys.params, m, field_mt);
        Ok(())
    })
}

/// Frequencies of the `+1/2 → +3/2` and `−1/2 → −3/2` lines, GHz.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_transition_frequencies(
    system: *const GcSpinSystem,
    field_mt: f64,
    out_plus_ghz: *mut f64,
    out_minus_ghz: *mut f64,
) -> GcStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let p = self::out(out_plus_ghz, "out_plus_ghz")?;
        let m = self::out(out_minus_ghz, "out_minus_ghz")?;
        *p = plus_transition_ghz(&sys.params, field_mt);
        *m = minus_transition_ghz(&sys.params, field_mt);
        Ok(())
    })
}

/// Thermal statistics at one field and temperature.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_thermal_state(
    system: *const GcSpinSystem,
    field_mt: f64,
    temperature_k: f64,
    out: *mut GcThermal,
) -> GcStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = self::out(out, "out")?;
        let z = partition_function(&sys.params, field_mt, temperature_k)?;
        let pops = populations(&sys.params, field_mt, temperature_k)?;
        let chi = susceptibility_thermal(&sys.params, field_mt, temperature_k)?;
        *slot = GcThermal {
            partition_function: z,
            n_plus: pops.n_plus,
            n_minus: pops.n_minus,
            chi_plus: chi.chi_plus,
            chi_minus: chi.chi_minus,
        };
        Ok(())
    })
}

/// Eigenfrequencies (ascending, GHz) of the coupled-mode matrix.
///
/// `*out_len` always receives the number of branches; if `capacity` is
/// smaller, nothing else is written and `GC_STATUS_BUFFER_TOO_SMALL` is
/// returned.
///
/// # Safety
/// `out_freqs` must have room for `capacity` values; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn gc_eigenmodes(
    doublet: *const GcDoublet,
    ensemble: *const GcEnsemble,
    selection_code: i32,
    out_freqs: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> GcStatus {
    guard(|| {
        let d: ModeDoublet = (*deref(doublet, "doublet")?).into();
        let e: EnsembleCoupling = (*deref(ensemble, "ensemble")?).into();
        let len = self::out(out_len, "out_len")?;
        let m = coupled_mode_matrix(&d, &e, selection(selection_code)?)?;
        let branches = eigenmodes(&m)?;
        *len = branches.len();
        if capacity < branches.len() {
            return Err(Failure(GcStatus::BufferTooSmall, format!("need room for {} values", branches.len())));
        }
        if out_freqs.is_null() {
            return Err(null("out_freqs"));
        }
        let dst = slice::from_raw_parts_mut(out_freqs, branches.len());
        for (d, b) in dst.iter_mut().zip(&branches) {
            *d = b.frequency_ghz;
        }
        Ok(())
    })
}

/// `|S21|` at each of `n` ascending frequencies, written to `out_mag`.
///
/// # Safety
/// `f_grid_ghz` and `out_mag` must each hold `n` values; other pointers
/// valid.
#[no_mangle]
pub unsafe extern "C" fn gc_transmission(
    doublet: *const GcDoublet,
    ensemble: *const GcEnsemble,
    selection_code: i32,
    ports: *const GcPorts,
    f_grid_ghz: *const f64,
    n: usize,
    out_mag: *mut f64,
) -> GcStatus {
    guard(|| {
        let d: ModeDoublet = (*deref(doublet, "doublet")?).into();
        let e: EnsembleCoupling = (*deref(ensemble, "ensemble")?).into();
        let p = deref(ports, "ports")?;
        let grid = input_slice(f_grid_ghz, n, "f_grid_ghz")?;
        if n > 0 && out_mag.is_null() {
            return Err(null("out_mag"));
        }
        let ports = PortCoupling {
            input_r: p.input_r,
            input_l: p.input_l,
            output_r: p.output_r,
            output_l: p.output_l,
        };
        let spectrum = transmission(&d, &e, selection(selection_code)?, grid, &ports)?;
        let dst = slice::from_raw_parts_mut(out_mag, n);
        for (d, pt) in dst.iter_mut().zip(&spectrum.points) {
            *d = pt.magnitude;
        }
        Ok(())
    })
}

/// Sweeps the field over `n` monotone values. Per-spin couplings in MHz.
///
/// # Safety
/// `field_grid_mt` must hold `n` values; `out` must be valid; other
/// pointers valid.
#[no_mangle]
pub unsafe extern "C" fn gc_field_sweep(
    system: *const GcSpinSystem,
    doublet: *const GcDoublet,
    per_spin_plus_mhz: f64,
    per_spin_minus_mhz: f64,
    gamma_mhz: f64,
    temperature_k: f64,
    coupling_model_code: i32,
    selection_code: i32,
    field_grid_mt: *const f64,
    n: usize,
    out: *mut *mut GcSweep,
) -> GcStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let d: ModeDoublet = (*deref(doublet, "doublet")?).into();
        let slot = self::out(out, "out")?;
        let grid = input_slice(field_grid_mt, n, "field_grid_mt")?;
        let model = CavityModel {
            spin: sys.params,
            doublet: d,
            per_spin: PerSpinCoupling {
                plus_mhz: per_spin_plus_mhz,
                minus_mhz: per_spin_minus_mhz,
            },
            gamma_mhz,
            temperature_k,
            coupling_model: coupling_model(coupling_model_code)?,
        };
        let inner = field_sweep(&model, selection(selection_code)?, grid)?;
        *slot = Box::into_raw(Box::new(GcSweep { inner }));
        Ok(())
    })
}

/// # Safety
/// `sweep` must be NULL or a pointer from [`gc_field_sweep`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_free(sweep: *mut GcSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// Number of rows; 0 for NULL.
///
/// # Safety
/// `sweep` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_rows(sweep: *const GcSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.inner.rows.len())
}

/// Branches per row; 0 for NULL.
///
/// # Safety
/// `sweep` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_branches(sweep: *const GcSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.inner.branch_count())
}

unsafe fn branch<'a>(sweep: *const GcSweep, row: usize, index: usize) -> Result<(f64, &'a gyrocav::cavityqed::Branch), Failure> {
    let s = deref(sweep, "sweep")?;
    let r = s
        .inner
        .rows
        .get(row)
        .ok_or_else(|| Failure(GcStatus::OutOfRange, format!("row {row} out of range")))?;
    let b = r
        .branches
        .get(index)
        .ok_or_else(|| Failure(GcStatus::OutOfRange, format!("branch {index} out of range")))?;
    Ok((r.field_mt, b))
}

/// Field, frequency (GHz) and composition weight of one branch.
/// `label_code` is one of the `GC_LABEL_*` constants.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_branch(
    sweep: *const GcSweep,
    row: usize,
    index: usize,
    label_code: i32,
    out_field_mt: *mut f64,
    out_frequency_ghz: *mut f64,
    out_fraction: *mut f64,
) -> GcStatus {
    guard(|| {
        let (field, b) = branch(sweep, row, index)?;
        let l = label(label_code)?;
        *self::out(out_field_mt, "out_field_mt")? = field;
        *self::out(out_frequency_ghz, "out_frequency_ghz")? = b.frequency_ghz;
        *self::out(out_fraction, "out_fraction")? = b.fraction(l);
        Ok(())
    })
}

/// Minimum separation between branches `a` and `b` over the sweep.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_gap(sweep: *const GcSweep, a: usize, b: usize, out: *mut GcGap) -> GcStatus {
    guard(|| {
        let s = deref(sweep, "sweep")?;
        let slot = self::out(out, "out")?;
        let g = extract_gap(&s.inner, BranchPair::Indices(a, b))?;
        *slot = GcGap {
            field_mt: g.field_mt,
            gap_mhz: g.gap_mhz,
        };
        Ok(())
    })
}

/// Minimum separation of the two branches left after dropping, in each
/// row, the branch with the largest weight on `label_code`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_sweep_gap_excluding(sweep: *const GcSweep, label_code: i32, out: *mut GcGap) -> GcStatus {
    guard(|| {
        let s = deref(sweep, "sweep")?;
        let slot = self::out(out, "out")?;
        let g = extract_gap(&s.inner, BranchPair::ExcludingDominant(label(label_code)?))?;
        *slot = GcGap {
            field_mt: g.field_mt,
            gap_mhz: g.gap_mhz,
        };
        Ok(())
    })
}
