//! C ABI over `uitrim`.
//!
//! Conventions: every fallible function returns a [`UitrimStatus`] and
//! writes results through out-pointers. On failure, `uitrim_last_error`
//! returns a message for the calling thread (valid until that thread's next
//! call). Handles and strings handed out must be released with the matching
//! `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uitrim::dsl::{parse_library, validate_program, TransformProgram};
use uitrim::evaluation::TokenCounter;
use uitrim::representations::RenderKind;
use uitrim::runtime::transform_tree;
use uitrim::ui_tree::{parse_any, UITree};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UitrimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    MalformedDocument = 3,
    InvalidProgram = 4,
    TransformFailed = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Parsed UI tree (opaque).
pub struct UitrimTree {
    tree: UITree,
}

/// Parsed and validated program library (opaque).
pub struct UitrimLibrary {
    programs: Vec<TransformProgram>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), (UitrimStatus, String)>) -> UitrimStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UitrimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            UitrimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (UitrimStatus, String)> {
    if p.is_null() {
        return Err((UitrimStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (UitrimStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

fn check_out<T>(p: *mut T, name: &str) -> Result<(), (UitrimStatus, String)> {
    if p.is_null() {
        Err((UitrimStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uitrim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
#[no_mangle]
pub extern "C" fn uitrim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a canonical or Android XML document.
///
/// # Safety
/// `document` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn uitrim_tree_parse(document: *const c_char, out: *mut *mut UitrimTree) -> UitrimStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let doc = str_arg(document, "document")?;
        let tree = parse_any(doc).map_err(|e| (UitrimStatus::MalformedDocument, e.to_string()))?;
        *out = Box::into_raw(Box::new(UitrimTree { tree }));
        Ok(())
    })
}

/// # Safety
/// `tree` must come from `uitrim_tree_parse`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uitrim_tree_node_count(tree: *const UitrimTree, out: *mut usize) -> UitrimStatus {
    guard(|| {
        check_out(out, "out")?;
        let t = tree.as_ref().ok_or((UitrimStatus::NullPointer, "`tree` is null".into()))?;
        *out = t.tree.node_count;
        Ok(())
    })
}

/// # Safety
/// `tree` must come from `uitrim_tree_parse` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uitrim_tree_free(tree: *mut UitrimTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Parses and validates a library (zero or more programs).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn uitrim_library_parse(text: *const c_char, out: *mut *mut UitrimLibrary) -> UitrimStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let programs = parse_library(text).map_err(|e| (UitrimStatus::InvalidProgram, e.to_string()))?;
        for p in &programs {
            if let Some(v) = validate_program(p).violations.first() {
                return Err((UitrimStatus::InvalidProgram, format!("program {}: {v}", p.program_id)));
            }
        }
        *out = Box::into_raw(Box::new(UitrimLibrary { programs }));
        Ok(())
    })
}

/// # Safety
/// `lib` must come from `uitrim_library_parse`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uitrim_library_len(lib: *const UitrimLibrary, out: *mut usize) -> UitrimStatus {
    guard(|| {
        check_out(out, "out")?;
        let l = lib.as_ref().ok_or((UitrimStatus::NullPointer, "`lib` is null".into()))?;
        *out = l.programs.len();
        Ok(())
    })
}

/// # Safety
/// `lib` must come from `uitrim_library_parse` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uitrim_library_free(lib: *mut UitrimLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Applies `lib` (null = no programs) to `tree` and renders the result.
/// `kind` is a view renderer name (`hierarchical`, `dfs`, `random`) or null
/// for hierarchical. The rendered text is written to `out_text` and must be
/// released with `uitrim_string_free`; token counts use the default counter.
///
/// # Safety
/// Pointers must be valid as documented; `out_before`/`out_after` may be null.
#[no_mangle]
pub unsafe extern "C" fn uitrim_transform(
    tree: *const UitrimTree,
    lib: *const UitrimLibrary,
    kind: *const c_char,
    seed: u64,
    out_text: *mut *mut c_char,
    out_before: *mut usize,
    out_after: *mut usize,
) -> UitrimStatus {
    guard(|| {
        check_out(out_text, "out_text")?;
        *out_text = ptr::null_mut();
        let t = tree.as_ref().ok_or((UitrimStatus::NullPointer, "`tree` is null".into()))?;
        let programs: &[TransformProgram] = lib.as_ref().map_or(&[], |l| &l.programs);
        let kind = if kind.is_null() {
            RenderKind::Hierarchical
        } else {
            let k: RenderKind = str_arg(kind, "kind")?
                .parse()
                .map_err(|e| (UitrimStatus::InvalidArgument, format!("{e}")))?;
            if !k.is_view_kind() {
                return Err((UitrimStatus::InvalidArgument, format!("`{k}` is not a view renderer")));
            }
            k
        };
        let out = transform_tree(&t.tree, programs, kind, Some(seed), &TokenCounter::Default)
            .map_err(|e| (UitrimStatus::TransformFailed, e.to_string()))?;
        let text = CString::new(out.representation.text())
            .map_err(|e| (UitrimStatus::TransformFailed, e.to_string()))?;
        if !out_before.is_null() {
            *out_before = out.tokens_before;
        }
        if !out_after.is_null() {
            *out_after = out.tokens_after;
        }
        *out_text = text.into_raw();
        Ok(())
    })
}

/// Counts tokens with the default deterministic tokenizer.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn uitrim_count_tokens(text: *const c_char, out: *mut usize) -> UitrimStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = uitrim::evaluation::count_default(str_arg(text, "text")?);
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library (e.g. `uitrim_transform`). Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uitrim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
