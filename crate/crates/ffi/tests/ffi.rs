use std::ffi::{CStr, CString};
use std::ptr;

use banditmt::estimator::{Estimator, EstimatorConfig};
use banditmt::policy::{Policy, PolicyConfig};
use banditmt::text::{Sentence, Vocab};
use banditmt_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(bmt_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn matrix_alpha_through_handles() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(bmt_matrix_new(BmtScale::Interval, &mut m), BmtStatus::Ok);
        for (r, vals) in [("a", [1.0, 2.0, 3.0, 4.0]), ("b", [1.0, 2.0, 3.0, 3.0])] {
            for (u, v) in vals.iter().enumerate() {
                assert_eq!(bmt_matrix_add(m, c(r).as_ptr(), c(&format!("u{u}")).as_ptr(), *v), BmtStatus::Ok);
            }
        }
        let mut alpha = f64::NAN;
        assert_eq!(bmt_matrix_alpha(m, &mut alpha), BmtStatus::Ok);
        // D_o = 2/8, D_e = 126/56
        assert!((alpha - 8.0 / 9.0).abs() < 1e-12, "{alpha}");
        let mut z = ptr::null_mut();
        assert_eq!(bmt_matrix_zscore(m, &mut z), BmtStatus::Ok);
        let mut az = f64::NAN;
        assert_eq!(bmt_matrix_alpha(z, &mut az), BmtStatus::Ok);
        assert!(az.is_finite());
        assert_eq!(bmt_matrix_add(m, c("a").as_ptr(), c("u0").as_ptr(), f64::NAN), BmtStatus::InvalidInput);
        assert!(!last_error().is_empty());
        bmt_matrix_free(z);
        bmt_matrix_free(m);
        bmt_matrix_free(ptr::null_mut());
    }
}

#[test]
fn matrix_from_json_and_undefined_alpha() {
    unsafe {
        let mut m = ptr::null_mut();
        let json = c(r#"{"scale":"interval","entries":[{"rater":"a","unit":"u","value":1.0}]}"#);
        assert_eq!(bmt_matrix_from_json(json.as_ptr(), &mut m), BmtStatus::Ok);
        let mut a = 0.0;
        assert_eq!(bmt_matrix_alpha(m, &mut a), BmtStatus::UndefinedAlpha);
        bmt_matrix_free(m);
        assert_eq!(bmt_matrix_from_json(c("{").as_ptr(), &mut m), BmtStatus::Parse);
    }
}

#[test]
fn metrics_and_errors() {
    unsafe {
        let s = c("the cat sat on the mat");
        let mut v = 0.0;
        for f in [bmt_sbleu, bmt_gleu, bmt_chrf] {
            assert_eq!(f(s.as_ptr(), s.as_ptr(), &mut v), BmtStatus::Ok);
            assert_eq!(v, 1.0);
        }
        assert_eq!(bmt_ter(s.as_ptr(), s.as_ptr(), &mut v), BmtStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(bmt_ter(s.as_ptr(), c("").as_ptr(), &mut v), BmtStatus::InvalidInput);
        assert_eq!(bmt_sbleu(ptr::null(), s.as_ptr(), &mut v), BmtStatus::NullPointer);
        assert_eq!(bmt_sbleu(s.as_ptr(), s.as_ptr(), ptr::null_mut()), BmtStatus::NullPointer);
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(bmt_gleu(bad.as_ptr().cast(), s.as_ptr(), &mut v), BmtStatus::InvalidUtf8);
        assert_eq!(bmt_gleu(s.as_ptr(), s.as_ptr(), &mut v), BmtStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(CStr::from_ptr(bmt_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn models_load_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let v = Vocab::from_words(["a", "b", "c"]);
    let policy = Policy::new(PolicyConfig { emb_dim: 4, hidden: 6, attn_dim: 4, max_len: 5 }, v.clone(), v.clone(), 1).unwrap();
    let est = Estimator::new(EstimatorConfig { emb_dim: 4, hidden: 4, n_filters: 2, ..Default::default() }, v.clone(), v, 1).unwrap();
    let (pp, ep) = (dir.path().join("p.json"), dir.path().join("e.json"));
    policy.save(&pp).unwrap();
    est.save(&ep).unwrap();
    let x = Sentence::parse("a b");
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(bmt_policy_load(c(pp.to_str().unwrap()).as_ptr(), &mut p), BmtStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(bmt_policy_translate(p, c("a b").as_ptr(), &mut out), BmtStatus::Ok);
        let got = CStr::from_ptr(out).to_str().unwrap().to_owned();
        bmt_string_free(out);
        assert_eq!(got, policy.greedy_decode(&x).unwrap().translation.text());
        let mut lp = 0.0;
        assert_eq!(bmt_policy_log_prob(p, c("a b").as_ptr(), c("c a").as_ptr(), &mut lp), BmtStatus::Ok);
        assert_eq!(lp, policy.log_prob(&x, &Sentence::parse("c a")).unwrap().log_prob);
        bmt_policy_free(p);

        let mut e = ptr::null_mut();
        assert_eq!(bmt_estimator_load(c(ep.to_str().unwrap()).as_ptr(), &mut e), BmtStatus::Ok);
        let mut r = 0.0;
        assert_eq!(bmt_estimator_predict(e, c("a b").as_ptr(), c("c").as_ptr(), &mut r), BmtStatus::Ok);
        assert_eq!(r, est.predict(&x, &Sentence::parse("c")).unwrap());
        assert_eq!(bmt_estimator_predict(e, c("a b").as_ptr(), c("").as_ptr(), &mut r), BmtStatus::InvalidInput);
        bmt_estimator_free(e);

        let mut missing = ptr::null_mut();
        assert_eq!(bmt_policy_load(c("/nonexistent/p.json").as_ptr(), &mut missing), BmtStatus::Io);
        assert!(last_error().contains("/nonexistent/p.json"));
    }
}
