//! C ABI over the `tnsp` library. Objects are opaque heap handles released with
//! the matching `*_free`; every fallible call returns a [`TnspStatus`] and, on
//! failure, leaves a message retrievable with [`tnsp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tnsp::error::Error;
use tnsp::experiment::{run, ExperimentConfig};
use tnsp::hamiltonian::{pauli_sum, tfim_bond, tfim_three_site, LocalTerm};
use tnsp::mera::{MeraNetwork, MeraShape};
use tnsp::mps::{extensive_placements, Mps};
use tnsp::spectra::{eigenvalues, channel_matrix, Family, Flavor, Mover};
use tnsp::tensor::{ComplexMatrix, RngSeed, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TnspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDimension = 3,
    ShapeMismatch = 4,
    NotHermitian = 5,
    NotUnitary = 6,
    Constraint = 7,
    OutOfRange = 8,
    InsufficientSamples = 9,
    InvalidConfig = 10,
    Io = 11,
    Serialization = 12,
    /// The experiment ran but at least one tolerance gate failed.
    GateFailed = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

pub const TNSP_FAMILY_BINARY1D: u32 = 0;
pub const TNSP_FAMILY_TERNARY1D: u32 = 1;
pub const TNSP_FAMILY_NONARY2D: u32 = 2;
pub const TNSP_FLAVOR_MERA: u32 = 0;
pub const TNSP_FLAVOR_TTNS: u32 = 1;
pub const TNSP_MOVER_AVERAGE: u32 = 0;
pub const TNSP_MOVER_LEFT: u32 = 1;
pub const TNSP_MOVER_CENTER: u32 = 2;
pub const TNSP_MOVER_RIGHT: u32 = 3;

/// Local Hamiltonian term.
pub struct TnspTerm(LocalTerm);

/// Haar-random open-boundary MPS.
pub struct TnspMps(Mps);

/// Haar-random MERA or TTNS.
pub struct TnspMera(MeraNetwork);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> TnspStatus {
    match err {
        Error::InvalidDimension(_) => TnspStatus::InvalidDimension,
        Error::ShapeMismatch { .. } => TnspStatus::ShapeMismatch,
        Error::NotHermitian(_) => TnspStatus::NotHermitian,
        Error::NotUnitary(_) => TnspStatus::NotUnitary,
        Error::Constraint(_) => TnspStatus::Constraint,
        Error::OutOfRange(_) => TnspStatus::OutOfRange,
        Error::InsufficientSamples(_) => TnspStatus::InsufficientSamples,
        Error::InvalidConfig(_) => TnspStatus::InvalidConfig,
        Error::Io(_) => TnspStatus::Io,
        Error::Json(_) | Error::Csv(_) => TnspStatus::Serialization,
    }
}

enum Failure {
    Status(TnspStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure::Status(TnspStatus::InvalidArgument, message.into())
}

fn guard(body: impl FnOnce() -> Result<TnspStatus, Failure>) -> TnspStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TnspStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Status(TnspStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn family(code: u32) -> Result<Family, Failure> {
    match code {
        TNSP_FAMILY_BINARY1D => Ok(Family::Binary1d),
        TNSP_FAMILY_TERNARY1D => Ok(Family::Ternary1d),
        TNSP_FAMILY_NONARY2D => Ok(Family::Nonary2d),
        c => Err(invalid(format!("unknown family code {c}"))),
    }
}

fn flavor(code: u32) -> Result<Flavor, Failure> {
    match code {
        TNSP_FLAVOR_MERA => Ok(Flavor::Mera),
        TNSP_FLAVOR_TTNS => Ok(Flavor::Ttns),
        c => Err(invalid(format!("unknown flavor code {c}"))),
    }
}

fn mover(code: u32) -> Result<Option<Mover>, Failure> {
    match code {
        TNSP_MOVER_AVERAGE => Ok(None),
        TNSP_MOVER_LEFT => Ok(Some(Mover::Left)),
        TNSP_MOVER_CENTER => Ok(Some(Mover::Center)),
        TNSP_MOVER_RIGHT => Ok(Some(Mover::Right)),
        c => Err(invalid(format!("unknown mover code {c}"))),
    }
}

fn boxed<T>(out: *mut *mut T, value: T) -> TnspStatus {
    // SAFETY: callers checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    TnspStatus::Ok
}

/// Message of the last failed call on this thread. Valid until the next call
/// on the same thread; never null.
#[no_mangle]
pub extern "C" fn tnsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Term from `terms` weighted Pauli words (`words[k]` over {I,X,Y,Z}, all the
/// same length).
///
/// # Safety
/// `weights` and `words` must point to `count` valid entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_term_pauli(
    weights: *const f64,
    words: *const *const c_char,
    count: usize,
    out: *mut *mut TnspTerm,
) -> TnspStatus {
    guard(|| {
        non_null(weights, "weights")?;
        non_null(words, "words")?;
        non_null(out, "out")?;
        let mut terms = Vec::with_capacity(count);
        for k in 0..count {
            let word = *words.add(k);
            non_null(word, "word")?;
            let text = CStr::from_ptr(word).to_str().map_err(|_| invalid("word is not UTF-8"))?;
            terms.push((*weights.add(k), text.to_string()));
        }
        Ok(boxed(out, TnspTerm(pauli_sum(&terms)?)))
    })
}

/// Term from a row-major Hermitian matrix on `support` sites of dimension
/// `site_dim`; `re` and `im` each hold (site_dim^support)^2 entries.
///
/// # Safety
/// `re` and `im` must point to enough entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_term_from_matrix(
    support: usize,
    site_dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut TnspTerm,
) -> TnspStatus {
    guard(|| {
        non_null(re, "re")?;
        non_null(im, "im")?;
        non_null(out, "out")?;
        let dim = site_dim
            .checked_pow(support as u32)
            .filter(|&n| n > 0 && n <= 1 << 12)
            .ok_or_else(|| invalid(format!("support {support} with site dimension {site_dim}")))?;
        let matrix = ComplexMatrix::from_fn(dim, dim, |r, c| {
            let k = r * dim + c;
            C64::new(*re.add(k), *im.add(k))
        });
        Ok(boxed(out, TnspTerm(LocalTerm::new(matrix, support, site_dim)?)))
    })
}

/// Transverse-field Ising term with field `g` on 2 (bond) or 3 (periodic window) sites.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_term_tfim(g: f64, support: usize, out: *mut *mut TnspTerm) -> TnspStatus {
    guard(|| {
        non_null(out, "out")?;
        let term = match support {
            2 => tfim_bond(g),
            3 => tfim_three_site(g),
            s => return Err(invalid(format!("tfim support {s}"))),
        };
        Ok(boxed(out, TnspTerm(term)))
    })
}

/// # Safety
/// `term` must come from a `tnsp_term_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tnsp_term_free(term: *mut TnspTerm) {
    if !term.is_null() {
        drop(Box::from_raw(term));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mps_random(
    length: usize,
    phys_dim: usize,
    bond_dim: usize,
    seed: u64,
    out: *mut *mut TnspMps,
) -> TnspStatus {
    guard(|| {
        non_null(out, "out")?;
        let mps = Mps::random_seeded(length, phys_dim, bond_dim, RngSeed::new(seed))?;
        Ok(boxed(out, TnspMps(mps)))
    })
}

/// Expectation of a term whose first site is `first_site` (1-based).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mps_expectation(
    mps: *const TnspMps,
    term: *const TnspTerm,
    first_site: usize,
    out: *mut f64,
) -> TnspStatus {
    guard(|| {
        non_null(mps, "mps")?;
        non_null(term, "term")?;
        non_null(out, "out")?;
        *out = (*mps).0.expectation_local(&(*term).0, first_site)?;
        Ok(TnspStatus::Ok)
    })
}

/// Energy of the open chain carrying `term` at every position.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mps_energy(mps: *const TnspMps, term: *const TnspTerm, out: *mut f64) -> TnspStatus {
    guard(|| {
        non_null(mps, "mps")?;
        non_null(term, "term")?;
        non_null(out, "out")?;
        let mps = &(*mps).0;
        *out = mps.energy(&extensive_placements(mps.shape().length(), &(*term).0))?;
        Ok(TnspStatus::Ok)
    })
}

/// # Safety
/// `mps` must come from `tnsp_mps_random` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mps_free(mps: *mut TnspMps) {
    if !mps.is_null() {
        drop(Box::from_raw(mps));
    }
}

/// Random network with 2^`lattice_exp` (binary) or 3^`lattice_exp` (ternary)
/// sites and `layers` layers above a product top state.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mera_random(
    family_code: u32,
    flavor_code: u32,
    chi: usize,
    layers: usize,
    lattice_exp: usize,
    seed: u64,
    out: *mut *mut TnspMera,
) -> TnspStatus {
    guard(|| {
        non_null(out, "out")?;
        let shape = MeraShape::new(family(family_code)?, flavor(flavor_code)?, chi, layers, lattice_exp)?;
        Ok(boxed(out, TnspMera(MeraNetwork::random_seeded(shape, RngSeed::new(seed)))))
    })
}

/// Number of physical sites.
///
/// # Safety
/// `mera` must be live.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mera_length(mera: *const TnspMera) -> usize {
    if mera.is_null() {
        0
    } else {
        (*mera).0.shape().length()
    }
}

/// Periodic energy with `term` on every window of the network.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mera_energy(mera: *const TnspMera, term: *const TnspTerm, out: *mut f64) -> TnspStatus {
    guard(|| {
        non_null(mera, "mera")?;
        non_null(term, "term")?;
        non_null(out, "out")?;
        *out = (*mera).0.energy(&(*term).0)?;
        Ok(TnspStatus::Ok)
    })
}

/// # Safety
/// `mera` must come from `tnsp_mera_random` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tnsp_mera_free(mera: *mut TnspMera) {
    if !mera.is_null() {
        drop(Box::from_raw(mera));
    }
}

/// Eigenvalues (real and imaginary parts, sorted by decreasing modulus) of a
/// layer-transition channel. `*len` receives the count; returns
/// `BufferTooSmall` without writing when `capacity` is insufficient.
///
/// # Safety
/// `re` and `im` must have room for `capacity` entries; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_channel_spectrum(
    family_code: u32,
    flavor_code: u32,
    mover_code: u32,
    chi: usize,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> TnspStatus {
    guard(|| {
        non_null(len, "len")?;
        let m = channel_matrix(family(family_code)?, flavor(flavor_code)?, mover(mover_code)?, chi)?;
        let values = eigenvalues(&m);
        *len = values.len();
        if values.len() > capacity {
            return Err(Failure::Status(
                TnspStatus::BufferTooSmall,
                format!("{} eigenvalues, capacity {capacity}", values.len()),
            ));
        }
        non_null(re, "re")?;
        non_null(im, "im")?;
        for (k, z) in values.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        Ok(TnspStatus::Ok)
    })
}

/// Runs a JSON experiment config and hands back the JSON summary (release it
/// with `tnsp_string_free`). Returns `GateFailed` with the summary still set
/// when a tolerance gate fails.
///
/// # Safety
/// `config` must be a NUL-terminated string; `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tnsp_run_experiment(config: *const c_char, summary: *mut *mut c_char) -> TnspStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(summary, "summary")?;
        *summary = ptr::null_mut();
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| Failure::Status(TnspStatus::InvalidConfig, "config is not UTF-8".into()))?;
        let outcome = run(&ExperimentConfig::from_json(text)?)?;
        let json = CString::new(outcome.summary_json()?).map_err(|_| invalid("summary contains NUL"))?;
        *summary = json.into_raw();
        if outcome.passed {
            Ok(TnspStatus::Ok)
        } else {
            set_error("tolerance gate failed");
            Ok(TnspStatus::GateFailed)
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tnsp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
