use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use spinorbit::{Dynamics, MapMode, Model, State};
use spinorbit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(spinorbit_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn model(params: Option<&str>) -> (SoStatus, *mut SoModel) {
    let text = params.map(|p| CString::new(p).unwrap());
    let mut out = ptr::null_mut();
    let status =
        unsafe { spinorbit_model_new(text.as_ref().map_or(ptr::null(), |t| t.as_ptr()), &mut out) };
    (status, out)
}

#[test]
fn model_calls_match_the_library() {
    let (status, m) = model(None);
    assert_eq!(status, SoStatus::Ok);
    let lib = Model::mercury().unwrap();
    unsafe {
        let mut n = 0.0;
        assert_eq!(spinorbit_model_mean_motion(m, &mut n), SoStatus::Ok);
        assert_eq!(n, lib.n());

        let mut g = 0.0;
        assert_eq!(spinorbit_g20(m, 3, &mut g), SoStatus::Ok);
        assert_eq!(g, lib.table().get(3).unwrap());
        assert_eq!(spinorbit_g20(m, 10_000, &mut g), SoStatus::Config);
        assert!(last_error().contains("10000"));

        let (mut tri, mut tide, mut total) = (0.0, 0.0, 0.0);
        let (theta, x, t) = (0.3, 1.37 * n, 0.05);
        assert_eq!(
            spinorbit_accel(m, theta, x, t, &mut tri, &mut tide, &mut total),
            SoStatus::Ok
        );
        assert_eq!(tri, lib.accel_tri(theta, t));
        assert_eq!(tide, lib.accel_tide_exact(x));
        assert_eq!(total, tri + tide);
        // Outputs are optional.
        assert_eq!(
            spinorbit_accel(m, theta, x, t, ptr::null_mut(), ptr::null_mut(), &mut total),
            SoStatus::Ok
        );

        let mut d = 0.0;
        assert_eq!(spinorbit_accel_tide_deriv(m, x, &mut d), SoStatus::Ok);
        assert_eq!(d, lib.accel_tide_deriv(x).unwrap());
        assert_eq!(spinorbit_accel_tide_deriv(m, n, &mut d), SoStatus::Domain);
        spinorbit_model_free(m);
    }
}

#[test]
fn parameters_and_null_pointers_are_reported() {
    let (status, m) = model(Some("e = 0.3\nmu = 0\n"));
    assert_eq!(status, SoStatus::Ok);
    unsafe {
        let mut tide = 1.0;
        spinorbit_accel(
            m,
            0.0,
            40.0,
            0.0,
            ptr::null_mut(),
            &mut tide,
            ptr::null_mut(),
        );
        assert_eq!(tide, 0.0);
        spinorbit_model_free(m);
    }

    let (status, m) = model(Some("nonsense = 3"));
    assert_eq!(status, SoStatus::Config);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    let (status, _) = model(Some("e = 1.5"));
    assert_eq!(status, SoStatus::Domain);
    assert!(last_error().contains("eccentricity"), "{}", last_error());

    unsafe {
        assert_eq!(
            spinorbit_model_new(ptr::null(), ptr::null_mut()),
            SoStatus::NullPointer
        );
        let mut x = 0.0;
        assert_eq!(
            spinorbit_model_mean_motion(ptr::null(), &mut x),
            SoStatus::NullPointer
        );
        assert_eq!(
            spinorbit_iterate(ptr::null(), false, false, 1, &mut x, &mut x.clone()),
            SoStatus::NullPointer
        );
        // Freeing NULL is a no-op.
        spinorbit_model_free(ptr::null_mut());
        spinorbit_dynamics_free(ptr::null_mut());
        spinorbit_detector_free(ptr::null_mut());
    }
}

#[test]
fn iterate_matches_the_library_map() {
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { spinorbit_dynamics_new(ptr::null(), &mut d) },
        SoStatus::Ok
    );
    let lib = Dynamics::with_defaults(Model::mercury().unwrap()).unwrap();
    for (rk_only, exact) in [(false, false), (true, false), (true, true)] {
        let mode = MapMode {
            method: if rk_only {
                spinorbit::integrators::Method::RkOnly
            } else {
                spinorbit::integrators::Method::Hybrid
            },
            tide: if exact {
                spinorbit::integrators::TideEval::Exact
            } else {
                spinorbit::integrators::TideEval::Fast
            },
        };
        let want = lib
            .propagator(mode)
            .iterate(State::new(1.0, 49.0, 0.0), 20)
            .unwrap();
        let (mut theta, mut rate) = (1.0, 49.0);
        let status = unsafe { spinorbit_iterate(d, rk_only, exact, 20, &mut theta, &mut rate) };
        assert_eq!(status, SoStatus::Ok);
        assert_eq!((theta, rate), (want.theta, want.theta_dot));
    }
    unsafe { spinorbit_dynamics_free(d) };
}

#[test]
fn detector_captures_a_constant_stream() {
    let n = Model::mercury().unwrap().n();
    let mut det = ptr::null_mut();
    unsafe {
        assert_eq!(
            spinorbit_detector_new(50, 3, 1e-3, 1e-6, n, &mut det),
            SoStatus::Ok
        );
        let (mut captured, mut two_p) = (false, 0);
        let mut fed = 0u64;
        while !captured {
            assert_eq!(
                spinorbit_detector_update(det, 1.5 * n, &mut captured, &mut two_p),
                SoStatus::Ok
            );
            fed += 1;
            assert!(fed <= 150);
        }
        assert_eq!((fed, two_p), (150, 3));
        let mut samples = 0;
        spinorbit_detector_samples(det, &mut samples);
        assert_eq!(samples, 150);
        spinorbit_detector_free(det);

        let mut bad = ptr::null_mut();
        assert_eq!(
            spinorbit_detector_new(0, 3, 1e-3, 1e-6, n, &mut bad),
            SoStatus::Config
        );
        assert!(bad.is_null());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/spinorbit.h")).unwrap();
    for name in [
        "spinorbit_last_error",
        "spinorbit_model_new",
        "spinorbit_model_free",
        "spinorbit_model_mean_motion",
        "spinorbit_g20",
        "spinorbit_accel",
        "spinorbit_accel_tide_deriv",
        "spinorbit_dynamics_new",
        "spinorbit_dynamics_free",
        "spinorbit_iterate",
        "spinorbit_detector_new",
        "spinorbit_detector_update",
        "spinorbit_detector_samples",
        "spinorbit_detector_free",
        "typedef struct SoModel SoModel",
        "SO_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
    // Compile a use of the header when a C compiler is around.
    let Ok(probe) = Command::new("cc").arg("--version").output() else {
        return;
    };
    if !probe.status.success() {
        return;
    }
    let tmp = std::env::temp_dir().join(format!("spinorbit_header_{}.c", std::process::id()));
    std::fs::write(
        &tmp,
        "#include \"spinorbit.h\"\nint main(void) { SoModel *m = 0; \
         SoStatus s = spinorbit_model_new(0, &m); spinorbit_model_free(m); return (int)s; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&tmp)
        .output()
        .unwrap();
    let _ = std::fs::remove_file(&tmp);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
