use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sqsem_ffi::*;

fn last_error() -> String {
    let p = sqsem_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn detector() -> SqsemDetector {
    SqsemDetector {
        efficiency: 0.85,
        electronic_noise_psd: 0.0,
        bandwidth: 1.0e8,
    }
}

fn gain(g0: f64) -> SqsemSemConfig {
    SqsemSemConfig {
        g0,
        omega0: 2.0 * std::f64::consts::PI * 4.0e6,
        p0: 1.0e6,
        kappa: 1.25e-8,
        fano: 1.0,
        rho_t: 0.0,
    }
}

#[test]
fn moments_match_oracle() {
    let mut closed = SqsemMoments {
        mean: 0.0,
        variance: 0.0,
        fano: 0.0,
    };
    let mut oracle = closed;
    unsafe {
        assert_eq!(
            sqsem_squeezed_moments(2.0, 0.3, 0.5, &mut closed),
            SqsemStatus::Ok
        );
        assert_eq!(
            sqsem_fock_oracle_moments(2.0, 0.3, 0.5, 100, &mut oracle),
            SqsemStatus::Ok
        );
    }
    assert!((closed.variance - oracle.variance).abs() < 1e-6 * closed.variance);
}

#[test]
fn errors_set_status_and_message() {
    let mut m = SqsemMoments {
        mean: 0.0,
        variance: 0.0,
        fano: 0.0,
    };
    unsafe {
        assert_eq!(
            sqsem_squeezed_moments(1.0, 0.0, 0.1, ptr::null_mut()),
            SqsemStatus::NullPointer
        );
        assert!(last_error().contains("out"));
        assert_eq!(
            sqsem_fock_oracle_moments(5.0, 1.0, 1.0, 20, &mut m),
            SqsemStatus::OutOfRange
        );
        assert!(last_error().contains("tail"));
        let mut p = 0.0;
        assert_eq!(
            sqsem_invert_deamplification(0.1, 1.0, 0.58, &mut p),
            SqsemStatus::OutOfRange
        );
    }
}

#[test]
fn opa_and_snr() {
    let cfg = SqsemOpaConfig {
        beta: 1.0,
        chi: 0.58,
        eta_p: 1.0,
        eta_d: 1.0,
    };
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            sqsem_opa_output_power(&cfg, 1.0, 1.0, true, &mut out),
            SqsemStatus::Ok
        );
        assert!((out - (0.42 + 0.58 * std::f64::consts::E)).abs() < 1e-12);
        let bad = SqsemOpaConfig { chi: 2.0, ..cfg };
        assert_eq!(
            sqsem_opa_output_fano(&bad, 1.0, false, &mut out),
            SqsemStatus::OutOfRange
        );
        let sem = SqsemSemConfig {
            fano: 10f64.powf(-0.03),
            rho_t: 1.0,
            ..gain(1.01)
        };
        assert_eq!(sqsem_snr_improvement(&sem, &mut out), SqsemStatus::Ok);
        assert!((10.0 * out.log10() - 0.30).abs() < 0.01);
    }
}

#[test]
fn trace_and_psd_handles() {
    let pt = SqsemPulseTrain {
        rep_rate: 8.0e7,
        photons_per_pulse: 1.0e6,
        fano: 1.0,
        duration: 2.0e-3,
        seed: 9,
    };
    let tn = SqsemTechnicalNoise {
        rho_t: 0.0,
        corner_freq: 1.0e5,
    };
    let window = CString::new("hann").unwrap();
    unsafe {
        let mut trace = ptr::null_mut();
        assert_eq!(
            sqsem_trace_simulate(&pt, &gain(1.01), &tn, &detector(), &mut trace),
            SqsemStatus::Ok
        );
        assert_eq!(sqsem_trace_len(trace), 160_000);
        assert_eq!(sqsem_trace_sample_rate(trace), 8.0e7);
        let samples = std::slice::from_raw_parts(sqsem_trace_samples(trace), 160_000);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean / (0.85 * 1.0e6 * 1.005) - 1.0).abs() < 1e-3);

        let mut psd = ptr::null_mut();
        assert_eq!(
            sqsem_psd_estimate(trace, 1.0e4, 10, window.as_ptr(), &mut psd),
            SqsemStatus::Ok
        );
        let n = sqsem_psd_len(psd);
        let mut f = vec![0.0; n];
        assert_eq!(
            sqsem_psd_copy(psd, f.as_mut_ptr(), ptr::null_mut(), n),
            SqsemStatus::Ok
        );
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            sqsem_psd_copy(psd, f.as_mut_ptr(), ptr::null_mut(), n - 1),
            SqsemStatus::InvalidArgument
        );

        let mut peak = SqsemPeak {
            frequency: 0.0,
            peak_power: 0.0,
            local_floor: 0.0,
            floor_std_error: 0.0,
            peak_std_error: 0.0,
        };
        assert_eq!(
            sqsem_psd_extract_peak(psd, 4.0e6, 3, 8, 50, &mut peak),
            SqsemStatus::Ok
        );
        let expected = (0.85e6 * 0.005f64).powi(2) / 2.0;
        assert!((peak.peak_power / expected - 1.0).abs() < 0.01);

        let bad = CString::new("kaiser").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(
            sqsem_psd_estimate(trace, 1.0e4, 10, bad.as_ptr(), &mut other),
            SqsemStatus::InvalidArgument
        );
        assert!(other.is_null());

        sqsem_psd_free(psd);
        sqsem_trace_free(trace);
        sqsem_psd_free(ptr::null_mut());
    }
}

#[test]
fn amplification_fit_round_trip() {
    let (beta, chi) = (1.2, 0.58);
    let x: Vec<f64> = (0..10).map(|i| (0.15 * i as f64 / beta).powi(2)).collect();
    let amp: Vec<f64> = x
        .iter()
        .map(|p| 1.0 - chi + chi * (beta * p.sqrt()).exp())
        .collect();
    let deamp: Vec<f64> = x
        .iter()
        .map(|p| 1.0 - chi + chi * (-beta * p.sqrt()).exp())
        .collect();
    let mut out = SqsemFitOutput {
        beta: 0.0,
        chi: 0.0,
        eta: 0.0,
        residual_norm: 0.0,
        iterations: 0,
        converged: false,
    };
    unsafe {
        let status = sqsem_fit_amplification(
            x.as_ptr(),
            amp.as_ptr(),
            deamp.as_ptr(),
            ptr::null(),
            x.len(),
            1.0,
            0.5,
            1.0,
            &mut out,
        );
        assert_eq!(status, SqsemStatus::Ok);
    }
    assert!(out.converged);
    assert!((out.chi - chi).abs() < 1e-3 * chi);
    assert!((out.beta - beta).abs() < 1e-3 * beta);
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/c_abi-xxxx
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let lib = target_dir().join("libsqsem_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler not available");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("sqsem_smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
