use std::ffi::{CStr, CString};
use std::ptr;

use lbps_ctmc_ffi::*;

fn last_error() -> String {
    let p = lbps_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn rate_matrix_round_trip() {
    let wu = [0.1, -0.2, 0.3, 0.0];
    let wb = [0.5, 0.1, -0.3, 0.2, 0.0, 0.4];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            lbps_rate_matrix_new(4, LbpsFeatures::Gtr, wu.as_ptr(), 4, wb.as_ptr(), 6, &mut m),
            LbpsStatus::Ok
        );
        assert_eq!(lbps_rate_matrix_n_states(m), 4);
        let mut q = [0.0; 16];
        assert_eq!(lbps_rate_matrix_q(m, q.as_mut_ptr(), 16), LbpsStatus::Ok);
        for i in 0..4 {
            let row: f64 = q[i * 4..i * 4 + 4].iter().sum();
            assert!(row.abs() < 1e-12);
        }
        let mut pi = [0.0; 4];
        assert_eq!(lbps_rate_matrix_pi(m, pi.as_mut_ptr(), 4), LbpsStatus::Ok);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut p = [0.0; 16];
        assert_eq!(lbps_rate_matrix_transition(m, 50.0, p.as_mut_ptr(), 16), LbpsStatus::Ok);
        for i in 0..4 {
            for j in 0..4 {
                assert!((p[i * 4 + j] - pi[j]).abs() < 1e-8);
            }
        }
        assert_eq!(lbps_rate_matrix_q(m, q.as_mut_ptr(), 15), LbpsStatus::InvalidArgument);
        lbps_rate_matrix_free(m);
        assert_eq!(
            lbps_rate_matrix_new(4, LbpsFeatures::Chain, wu.as_ptr(), 4, wb.as_ptr(), 5, &mut m),
            LbpsStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        lbps_rate_matrix_free(ptr::null_mut());
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(lbps_bounce_time_normal(1.0, 1.0, 1.0, ptr::null_mut()), LbpsStatus::NullPointer);
        assert_eq!(lbps_rate_matrix_pi(ptr::null(), ptr::null_mut(), 0), LbpsStatus::NullPointer);
        assert_eq!(lbps_chain_num_samples(ptr::null()), 0);
    }
    assert!(last_error().contains("null"));
}

#[test]
fn solvers_and_diagnostics() {
    unsafe {
        let mut t = 0.0;
        assert_eq!(lbps_bounce_time_normal(0.0, 2.0, 1.0, &mut t), LbpsStatus::Ok);
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(lbps_bounce_time_transition(2.0, -0.5, 1.0, &mut t), LbpsStatus::Ok);
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(lbps_bounce_time_sojourn(1.0, 1.0, 1.0, 1.0, &mut t), LbpsStatus::Ok);
        assert!((t - 2f64.ln()).abs() < 1e-12);
        assert_eq!(lbps_bounce_time_normal(0.0, 2.0, -1.0, &mut t), LbpsStatus::InvalidArgument);

        let v = [1.0, 0.0];
        let g = [1.0, 1.0];
        let mut r = [0.0; 2];
        assert_eq!(lbps_reflect(v.as_ptr(), g.as_ptr(), 2, r.as_mut_ptr()), LbpsStatus::Ok);
        assert!((r[0] - 0.0).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15);

        let x: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64).collect();
        let (mut ess, mut deg) = (0.0, -1);
        assert_eq!(lbps_ess_batch_means(x.as_ptr(), x.len(), &mut ess, &mut deg), LbpsStatus::Ok);
        assert!(ess > 0.0 && ess <= 100.0 && deg == 0);
        let mut a = 0.0;
        assert_eq!(lbps_ard(2.0, 1.0, &mut a), LbpsStatus::Ok);
        assert_eq!(a, 0.5);
        let (mut d, mut p) = (0.0, 0.0);
        assert_eq!(lbps_ks_two_sample(x.as_ptr(), 100, x.as_ptr(), 100, &mut d, &mut p), LbpsStatus::Ok);
        assert_eq!((d, p), (0.0, 1.0));
    }
}

#[test]
fn amino_acids() {
    unsafe {
        let mut d = 0u16;
        assert_eq!(lbps_grantham(b'I' as _, b'L' as _, &mut d), LbpsStatus::Ok);
        assert_eq!(d, 5);
        assert_eq!(lbps_grantham(b'B' as _, b'L' as _, &mut d), LbpsStatus::InvalidArgument);
        let mut a = [0 as std::ffi::c_char; 190];
        let mut b = [0 as std::ffi::c_char; 190];
        assert_eq!(lbps_nnpaao_ordering(a.as_mut_ptr(), b.as_mut_ptr(), 190), LbpsStatus::Ok);
        let mut first = [a[0] as u8, b[0] as u8];
        first.sort();
        assert_eq!(&first, b"IL");
        assert_eq!(lbps_nnpaao_ordering(a.as_mut_ptr(), b.as_mut_ptr(), 10), LbpsStatus::InvalidArgument);
        assert_eq!(CStr::from_ptr(lbps_amino_alphabet()).to_str().unwrap().len(), 20);
    }
}

#[test]
fn chain_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "series_id,time,state\n0,0,A\n0,0.5,C\n0,1,C\n1,0,G\n1,0.5,T\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let dna = CString::new("dna").unwrap();
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(lbps_dataset_read_csv(cpath.as_ptr(), dna.as_ptr(), &mut data), LbpsStatus::Ok);
        assert_eq!(lbps_dataset_len(data), 2);
        assert_eq!(lbps_dataset_n_states(data), 4);
        let mut opts = std::mem::zeroed::<LbpsRunOptions>();
        assert_eq!(lbps_run_options_default(&mut opts), LbpsStatus::Ok);
        opts.iterations = 50;
        opts.seed = 3;
        let mut chain = ptr::null_mut();
        assert_eq!(lbps_run_chain(data, &opts, &mut chain), LbpsStatus::Ok);
        let (n, d) = (lbps_chain_num_samples(chain), lbps_chain_dim(chain));
        assert_eq!((n, d), (50, 10));
        let mut s = vec![0.0; n * d];
        assert_eq!(lbps_chain_samples(chain, s.as_mut_ptr(), s.len()), LbpsStatus::Ok);
        assert!(s.iter().all(|x| x.is_finite()));
        let mut m = vec![0.0; lbps_chain_num_theta(chain)];
        assert_eq!(lbps_chain_theta_means(chain, m.as_mut_ptr(), m.len()), LbpsStatus::Ok);
        assert!(m.iter().all(|&x| x > 0.0));
        assert!(lbps_chain_seconds(chain) > 0.0);
        lbps_chain_free(chain);

        opts.iterations = 0;
        assert_eq!(lbps_run_chain(data, &opts, &mut chain), LbpsStatus::InvalidArgument);
        lbps_dataset_free(data);

        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        assert_eq!(lbps_dataset_read_csv(missing.as_ptr(), dna.as_ptr(), &mut data), LbpsStatus::Io);
        std::fs::write(&path, "series_id,time,state\n0,x,A\n").unwrap();
        assert_eq!(lbps_dataset_read_csv(cpath.as_ptr(), dna.as_ptr(), &mut data), LbpsStatus::Parse);
        assert!(last_error().contains("line 2"));
    }
}
