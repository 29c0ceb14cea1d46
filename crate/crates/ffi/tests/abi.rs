use std::ffi::{CStr, CString};
use std::ptr;

use eisdist_ffi::*;

fn owned(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { eis_string_free(s) };
    out
}

fn last_error() -> String {
    let p = eis_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn parametrize_basis_function() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(eis_config_default(&mut cfg), EisStatus::Ok);
        let mut phi = ptr::null_mut();
        let input = CString::new("basis:1,0@3").unwrap();
        assert_eq!(eis_schwartz_parse(cfg, input.as_ptr(), &mut phi), EisStatus::Ok);

        let group = CString::new("K3@3").unwrap();
        let mut classes = Vec::new();
        for path in [EisPath::Canonical, EisPath::Orbit, EisPath::Stabilizer] {
            let mut x = ptr::null_mut();
            assert_eq!(eis_parametrize(cfg, phi, 2, group.as_ptr(), path, &mut x), EisStatus::Ok, "{}", last_error());
            classes.push(x);
        }
        for &x in &classes[1..] {
            let mut same = -1;
            assert_eq!(eis_class_same(cfg, classes[0], x, &mut same), EisStatus::Ok);
            assert_eq!(same, 1);
        }

        let mut s = ptr::null_mut();
        assert_eq!(eis_class_to_json(classes[0], &mut s), EisStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&owned(s)).unwrap();
        assert_eq!(doc["format"], 1);
        assert_eq!(doc["kind"], "class");
        assert_eq!(doc["terms"], serde_json::json!([{"residue": [1, 0], "coeff": "9/1"}]));

        for x in classes {
            eis_class_free(x);
        }
        eis_schwartz_free(phi);
        eis_config_free(cfg);
    }
}

#[test]
fn class_round_trip_and_normal_form() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let json = CString::new(r#"{"genus": 1, "p": 5}"#).unwrap();
        assert_eq!(eis_config_from_json(json.as_ptr(), &mut cfg), EisStatus::Ok);
        let mut x = ptr::null_mut();
        let input = CString::new("eps:3,0@9").unwrap();
        assert_eq!(eis_class_parse(input.as_ptr(), 1, &mut x), EisStatus::Ok);
        let mut nf = ptr::null_mut();
        assert_eq!(eis_class_normal_form(cfg, x, &mut nf), EisStatus::Ok);

        let mut s = ptr::null_mut();
        assert_eq!(eis_class_to_json(nf, &mut s), EisStatus::Ok);
        let text = CString::new(owned(s)).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(eis_class_parse(text.as_ptr(), 0, &mut back), EisStatus::Ok);
        let mut same = -1;
        assert_eq!(eis_class_same(cfg, x, back, &mut same), EisStatus::Ok);
        assert_eq!(same, 1);

        eis_class_free(back);
        eis_class_free(nf);
        eis_class_free(x);
        eis_config_free(cfg);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new(r#"{"p": 4}"#).unwrap();
        assert_eq!(eis_config_from_json(bad.as_ptr(), &mut cfg), EisStatus::Malformed);
        assert!(last_error().contains("not prime"));
        assert!(cfg.is_null());

        assert_eq!(eis_config_default(&mut cfg), EisStatus::Ok);
        assert!(eis_last_error().is_null());

        let mut x = ptr::null_mut();
        let inadmissible = CString::new("eps:1,0@5").unwrap();
        assert_eq!(eis_class_parse(inadmissible.as_ptr(), 0, &mut x), EisStatus::Ok);
        let mut nf = ptr::null_mut();
        assert_eq!(eis_class_normal_form(cfg, x, &mut nf), EisStatus::Inadmissible);
        assert!(nf.is_null());

        assert_eq!(eis_class_normal_form(cfg, ptr::null(), &mut nf), EisStatus::NullArgument);
        assert_eq!(eis_schwartz_parse(cfg, ptr::null(), ptr::null_mut()), EisStatus::NullArgument);

        eis_class_free(x);
        eis_config_free(cfg);
    }
}

#[test]
fn selftest_reports_json() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(eis_config_default(&mut cfg), EisStatus::Ok);
        let levels = [3u64];
        let mut s = ptr::null_mut();
        let status = eis_selftest(cfg, levels.as_ptr(), levels.len(), &mut s);
        let doc: serde_json::Value = serde_json::from_str(&owned(s)).unwrap();
        assert_eq!(status, EisStatus::Ok, "{doc}");
        assert_eq!(doc["format"], 1);
        assert_eq!(doc["passed"], true);
        assert_eq!(doc["report"]["criteria"].as_array().unwrap().len(), 11);
        eis_config_free(cfg);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/eisdist.h");
    for name in [
        "eis_last_error",
        "eis_string_free",
        "eis_version",
        "eis_config_default",
        "eis_config_from_json",
        "eis_config_free",
        "eis_schwartz_parse",
        "eis_schwartz_to_json",
        "eis_schwartz_free",
        "eis_class_parse",
        "eis_class_to_json",
        "eis_class_normal_form",
        "eis_class_same",
        "eis_class_free",
        "eis_parametrize",
        "eis_selftest",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct EisClass EisClass;"));
}
