use std::ffi::{CStr, CString};
use std::ptr;

use lpbf_twin_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let n = unsafe { lpbf_last_error(buf.as_mut_ptr(), buf.len()) };
    if n == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn simulate_json() -> CString {
    CString::new(
        r#"{
        "domain": { "dx": 1e-5, "length": 5e-4, "width": 3e-4, "height": 1.5e-4, "symmetric": true },
        "path": { "track_length": 3e-4, "n_tracks": 1, "hatch": 1e-4, "n_layers": 1, "layer_thickness": 4e-5, "start": [1e-4, 0.0, 0.0] },
        "process": { "power_w": 285.0, "speed_mm_s": 960.0 },
        "source": { "kind": "law", "law": [4e-7, 2.2e-3, 2e-7] },
        "output_dir": "unused"
    }"#,
    )
    .unwrap()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(lpbf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lpbf_surrogate_load(ptr::null(), &mut out) }, LpbfStatus::NullPointer);
    assert!(out.is_null());
    assert!(last_error().contains("null"));
    let (mut w, mut d, mut c) = (0.0, 0.0, 0);
    let q = [240.0, 4e-7, 2e-3, 2e-7];
    assert_eq!(
        unsafe { lpbf_surrogate_predict(ptr::null(), q.as_ptr(), &mut w, &mut d, &mut c) },
        LpbfStatus::NullPointer
    );
    lpbf_clear_error();
    assert_eq!(last_error(), "");
    unsafe {
        lpbf_surrogate_free(ptr::null_mut());
        lpbf_simulation_free(ptr::null_mut());
    }
}

#[test]
fn bad_json_is_a_config_error() {
    let text = CString::new("{ not json").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lpbf_surrogate_load(text.as_ptr(), &mut out) }, LpbfStatus::Config);
    assert!(!last_error().is_empty());

    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { lpbf_simulation_new(text.as_ptr(), ptr::null(), &mut sim) }, LpbfStatus::Config);
    assert!(last_error().contains("line 1"), "{}", last_error());
}

#[test]
fn unknown_command_is_rejected() {
    let cmd = CString::new("frobnicate").unwrap();
    let path = CString::new("nowhere.json").unwrap();
    assert_eq!(unsafe { lpbf_run_command(cmd.as_ptr(), path.as_ptr()) }, LpbfStatus::Config);
    assert!(last_error().contains("frobnicate"));
}

#[test]
fn error_message_truncates_safely() {
    let text = CString::new("{ not json").unwrap();
    let mut out = ptr::null_mut();
    unsafe { lpbf_surrogate_load(text.as_ptr(), &mut out) };
    let mut small = [1 as std::ffi::c_char; 8];
    let full = unsafe { lpbf_last_error(small.as_mut_ptr(), small.len()) };
    assert!(full > 7);
    assert_eq!(small[7], 0);
}

#[test]
fn simulation_steps_to_completion() {
    let json = simulate_json();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { lpbf_simulation_new(json.as_ptr(), ptr::null(), &mut sim) }, LpbfStatus::Ok, "{}", last_error());
    let mut done = 0;
    let (mut t, mut steps) = (0.0, 0u64);
    unsafe {
        assert_eq!(lpbf_simulation_step(sim, 10, &mut done), LpbfStatus::Ok);
        assert_eq!(done, 0);
        lpbf_simulation_time(sim, &mut t, &mut steps);
        assert_eq!(steps, 10);
        assert!(t > 0.0);
        while done == 0 {
            assert_eq!(lpbf_simulation_step(sim, 1000, &mut done), LpbfStatus::Ok);
        }
        let (mut w, mut d) = (0.0, 0.0);
        assert_eq!(lpbf_simulation_meltpool(sim, 2.5e-4, &mut w, &mut d), LpbfStatus::Ok);
        assert!(w > 0.0 && d > 0.0, "{w} {d}");
        let n = lpbf_simulation_cells(sim);
        let mut field = vec![0.0; n];
        assert_eq!(lpbf_simulation_temperature(sim, field.as_mut_ptr(), n - 1), LpbfStatus::Config);
        assert_eq!(lpbf_simulation_temperature(sim, field.as_mut_ptr(), n), LpbfStatus::Ok);
        assert!(field.iter().all(|v| v.is_finite() && *v > 0.0));
        lpbf_simulation_free(sim);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/lpbf_twin.h");
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 12);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct LpbfSurrogate LpbfSurrogate;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile_dir();
    let src = dir.join("t.c");
    std::fs::write(&src, "#include \"lpbf_twin.h\"\nint main(void) { return lpbf_version() == 0; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(name)).find(|p| p.is_file()))
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("lpbf-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn build_and_query_surrogate_through_the_abi() {
    let dir = tempfile_dir().join("sur");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, r#"{ "surrogate": { "levels": [2, 2, 2, 2] }, "output_dir": "out" }"#).unwrap();
    let cmd = CString::new("build-surrogate").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lpbf_run_command(cmd.as_ptr(), path.as_ptr()) }, LpbfStatus::Ok, "{}", last_error());

    let json = CString::new(std::fs::read_to_string(dir.join("out/surrogate.json")).unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { lpbf_surrogate_load(json.as_ptr(), &mut h) }, LpbfStatus::Ok, "{}", last_error());
    let (mut w, mut d, mut c) = (0.0, 0.0, -1);
    let inside = [240.0, 3.5e-7, 1.5e-3, 2e-7];
    let outside = [1000.0, 3.5e-7, 1.5e-3, 2e-7];
    unsafe {
        assert_eq!(lpbf_surrogate_predict(h, inside.as_ptr(), &mut w, &mut d, &mut c), LpbfStatus::Ok);
        assert_eq!(c, 0);
        assert!(w > 1e-5 && w < 1e-3 && d > 1e-5 && d < 1e-3, "{w} {d}");
        assert_eq!(lpbf_surrogate_predict(h, outside.as_ptr(), &mut w, &mut d, &mut c), LpbfStatus::Ok);
        assert_eq!(c, 1);
        let nan = [f64::NAN, 0.0, 0.0, 0.0];
        assert_eq!(lpbf_surrogate_predict(h, nan.as_ptr(), &mut w, &mut d, &mut c), LpbfStatus::Config);
        lpbf_surrogate_free(h);
    }
}
