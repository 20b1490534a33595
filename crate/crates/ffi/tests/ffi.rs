use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use toric_gauge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    unsafe { assert_eq!(tg_last_error(buf.as_mut_ptr() as *mut c_char, buf.len(), ptr::null_mut()), TgStatus::Ok) };
    let end = buf.iter().position(|&b| b == 0).unwrap();
    String::from_utf8(buf[..end].to_vec()).unwrap()
}

fn parse(text: &str) -> *mut TgConfig {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe { assert_eq!(tg_config_parse(c.as_ptr(), &mut cfg), TgStatus::Ok) };
    cfg
}

fn table_csv(res: *const TgResult, i: usize) -> String {
    let mut need = 0;
    unsafe {
        assert_eq!(tg_result_table_csv(res, i, ptr::null_mut(), 0, &mut need), TgStatus::BufferTooSmall);
        let mut buf = vec![0u8; need];
        assert_eq!(tg_result_table_csv(res, i, buf.as_mut_ptr() as *mut c_char, need, ptr::null_mut()), TgStatus::Ok);
        buf.pop();
        String::from_utf8(buf).unwrap()
    }
}

#[test]
fn run_matches_library() {
    let cfg = parse("[lattice]\nd = 3\n[noise]\nbeta0 = 2\nbeta = 2\nq = 0.02\n[run]\ntrials = 30\n");
    unsafe {
        assert_eq!(tg_config_set_seed(cfg, 11), TgStatus::Ok);
        let mut res = ptr::null_mut();
        let name = CString::new("decode").unwrap();
        assert_eq!(tg_run(cfg, name.as_ptr(), &mut res), TgStatus::Ok);
        assert_eq!(tg_result_table_count(res), 1);
        assert_eq!(tg_result_ok(res), 1);
        let mut lib = toric_gauge::config::RunConfig::parse("[lattice]\nd = 3\n[noise]\nbeta0 = 2\nbeta = 2\nq = 0.02\n[run]\ntrials = 30\n").unwrap();
        lib.seed = 11;
        let want = toric_gauge::cli::run(toric_gauge::config::Experiment::Decode, &lib).unwrap();
        assert_eq!(table_csv(res, 0), want.tables[0].to_csv());
        tg_result_free(res);
        tg_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let bad = CString::new("[noise]\nq = 2\n").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(tg_config_parse(bad.as_ptr(), &mut cfg), TgStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("noise.q"));

        assert_eq!(tg_config_parse(ptr::null(), &mut cfg), TgStatus::NullPointer);

        let cfg = parse("");
        let mut res = ptr::null_mut();
        let name = CString::new("nonsense").unwrap();
        assert_eq!(tg_run(cfg, name.as_ptr(), &mut res), TgStatus::InvalidArgument);
        assert!(last_error().contains("nonsense"));
        tg_config_free(cfg);

        let (mut r, mut e) = (0.0, 0.0);
        assert_eq!(tg_failure_rate(1, 1, 1.0, 1.0, 1.0, 0, 10, 0, &mut r, &mut e), TgStatus::InvalidArgument);
        assert_eq!(tg_failure_rate(3, 1, 1.0, 1.0, 1.0, 7, 10, 0, &mut r, &mut e), TgStatus::InvalidArgument);
        assert_eq!(tg_failure_rate(3, 1, 1.0, 1.0, 1.0, 0, 10, 0, ptr::null_mut(), &mut e), TgStatus::NullPointer);
        tg_config_free(ptr::null_mut());
        tg_result_free(ptr::null_mut());
    }
}

#[test]
fn failure_rate_and_magnitude() {
    let (mut r, mut e, mut m) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(tg_failure_rate(3, 1, f64::INFINITY, 3.0, 3.0, 1, 200, 5, &mut r, &mut e), TgStatus::Ok);
        assert_eq!(tg_coherent_error_magnitude(3.0, &mut m), TgStatus::Ok);
    }
    assert!((0.0..0.1).contains(&r) && e >= 0.0);
    let want = toric_gauge::realmeas::coherent_error_magnitude(3.0).unwrap();
    assert_eq!(m, want);
}

#[test]
fn config_text_round_trips() {
    let cfg = parse("[lattice]\nd = 4\n");
    let mut need = 0;
    unsafe {
        tg_config_text(cfg, ptr::null_mut(), 0, &mut need);
        let mut buf = vec![0u8; need];
        assert_eq!(tg_config_text(cfg, buf.as_mut_ptr() as *mut c_char, need, ptr::null_mut()), TgStatus::Ok);
        buf.pop();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(toric_gauge::config::RunConfig::parse(&text).unwrap().d, vec![4]);
        tg_config_free(cfg);
    }
}

/// Compiles the C smoke program against the generated header and the static library.
#[test]
fn c_program_links() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("examples/libc_static.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let out = std::env::temp_dir().join(format!("tg_smoke_{}", std::process::id()));
    let st = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let o = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "exit {:?}: {text}", o.status.code());
    assert!(text.starts_with("t,s,coefficient_class"));
    assert!(text.contains("version 0.1.0"));
}
