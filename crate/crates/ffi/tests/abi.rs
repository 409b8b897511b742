//! The exported functions called as a C caller would.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use pizza_mwl_ffi::*;
use serde_json::Value;

unsafe fn take(s: *mut c_char) -> Value {
    assert!(!s.is_null());
    let v = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
    pmwl_string_free(s);
    v
}

unsafe fn last_error() -> String {
    let p = pmwl_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn sequence_handle() {
    unsafe {
        let cfg = CString::new(r#"{"n_level":1,"trial_count":11,"target_rate":0.3,"seed":42}"#).unwrap();
        let mut seq = ptr::null_mut();
        assert_eq!(pmwl_sequence_generate(cfg.as_ptr(), &mut seq), PmwlStatus::Ok);
        assert!(pmwl_last_error().is_null());
        assert_eq!(pmwl_sequence_len(seq), 11);
        let mut targets = 0;
        for i in 0..11 {
            let mut t = false;
            assert_eq!(pmwl_sequence_is_target(seq, i, &mut t), PmwlStatus::Ok);
            targets += t as usize;
        }
        assert_eq!(targets, 3);
        let mut t = false;
        assert_eq!(pmwl_sequence_is_target(seq, 11, &mut t), PmwlStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        let mut json = ptr::null_mut();
        assert_eq!(pmwl_sequence_to_json(seq, &mut json), PmwlStatus::Ok);
        assert_eq!(take(json)["orders"].as_array().unwrap().len(), 11);
        pmwl_sequence_free(seq);
        pmwl_sequence_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_report_status() {
    unsafe {
        let mut seq = ptr::null_mut();
        let bad = CString::new(r#"{"target_rate":1.5}"#).unwrap();
        assert_eq!(pmwl_sequence_generate(bad.as_ptr(), &mut seq), PmwlStatus::ConfigInvalid);
        assert!(seq.is_null());
        assert!(last_error().contains("target_rate"));
        let junk = CString::new("{").unwrap();
        assert_eq!(pmwl_sequence_generate(junk.as_ptr(), &mut seq), PmwlStatus::InvalidJson);
        assert_eq!(pmwl_sequence_generate(ptr::null(), ptr::null_mut()), PmwlStatus::NullPointer);
        let invalid_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(pmwl_sequence_generate(invalid_utf8.as_ptr().cast(), &mut seq), PmwlStatus::InvalidUtf8);
        assert_eq!(pmwl_sequence_len(ptr::null()), 0);
        let mut out = ptr::null_mut();
        assert_eq!(pmwl_session_tick(ptr::null_mut(), 5, &mut out), PmwlStatus::NullPointer);
        assert!(!CStr::from_ptr(pmwl_version()).to_bytes().is_empty());
    }
}

#[test]
fn pipeline_handle() {
    unsafe {
        let mut pipe = ptr::null_mut();
        assert_eq!(pmwl_pipeline_new(ptr::null(), &mut pipe), PmwlStatus::Ok);
        let fs = 250.0;
        let frames = 125;
        let mut produced = 0;
        for k in 0..8 {
            let t0 = k as f64 * 0.5;
            let mut buf = vec![0.0; 16 * frames];
            for c in 0..16 {
                for i in 0..frames {
                    let t = t0 + i as f64 / fs;
                    buf[c * frames + i] = 10.0 * (2.0 * std::f64::consts::PI * 6.0 * t).sin();
                }
            }
            let mut out = ptr::null_mut();
            assert_eq!(pmwl_pipeline_push(pipe, buf.as_ptr(), 16, frames, t0, &mut out), PmwlStatus::Ok);
            produced += take(out).as_array().unwrap().len();
        }
        // 4 s of data, 2 s window, 0.5 s step
        assert_eq!(produced, 5);
        let buf = vec![0.0; 8 * 10];
        let mut out = ptr::null_mut();
        assert_eq!(pmwl_pipeline_push(pipe, buf.as_ptr(), 8, 10, 4.0, &mut out), PmwlStatus::SignalError);
        assert_eq!(pmwl_pipeline_push(pipe, ptr::null(), 16, 10, 4.0, &mut out), PmwlStatus::NullPointer);
        pmwl_pipeline_free(pipe);

        let cfg = CString::new(r#"{"window_s": 2}"#).unwrap();
        assert_eq!(pmwl_pipeline_new(cfg.as_ptr(), &mut pipe), PmwlStatus::InvalidJson);
    }
}

#[test]
fn session_round_trip_and_replay() {
    unsafe {
        let id = CString::new("ffi").unwrap();
        let cfg = CString::new(r#"{"session_duration_s":5.0}"#).unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(pmwl_session_new(id.as_ptr(), cfg.as_ptr(), 1_700_000_000_000, &mut s), PmwlStatus::Ok);
        let send = |s: *mut PmwlSession, json: &str| -> Value {
            let m = CString::new(json).unwrap();
            let mut out = ptr::null_mut();
            assert_eq!(pmwl_session_handle_message(s, 1, m.as_ptr(), &mut out), PmwlStatus::Ok);
            take(out)
        };
        let env = send(s, r#"{"type":"subscribe","session_id":"ffi","role":"player"}"#);
        assert_eq!(env[0]["message"]["type"], "state_snapshot");
        assert_eq!(env[0]["to"]["conn"], 1);
        let env = send(s, r#"{"type":"start_session","session_id":"ffi"}"#);
        let order = env[0]["message"]["order"].clone();
        assert_eq!(env[0]["message"]["type"], "order_presented");
        let env = send(s, r#"{"type":"submit_drink","session_id":"ffi","drink":"cola"}"#);
        assert_eq!(env[0]["message"]["code"], "illegal_transition");
        send(s, r#"{"type":"submit_judgment","session_id":"ffi","judgment":"no"}"#);
        send(s, &format!(r#"{{"type":"submit_drink","session_id":"ffi","drink":{}}}"#, order["drink_cue"]));
        let env = send(s, &format!(r#"{{"type":"submit_ingredients","session_id":"ffi","ingredients":{}}}"#, order["ingredients"]));
        assert!(env.as_array().unwrap().iter().any(|e| e["message"]["type"] == "trial_feedback"));

        let bad = CString::new("{nope").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(pmwl_session_handle_message(s, 1, bad.as_ptr(), &mut out), PmwlStatus::InvalidJson);

        let mut out = ptr::null_mut();
        assert_eq!(pmwl_session_tick(s, 6_000_000, &mut out), PmwlStatus::Ok);
        let env = take(out);
        assert_eq!(env.as_array().unwrap().last().unwrap()["message"]["type"], "session_end");

        let mut out = ptr::null_mut();
        assert_eq!(pmwl_session_state(s, &mut out), PmwlStatus::Ok);
        let state = take(out);
        assert_eq!(state["phase"], "finished");

        let mut log = ptr::null_mut();
        assert_eq!(pmwl_session_log(s, &mut log), PmwlStatus::Ok);
        let text = CStr::from_ptr(log).to_str().unwrap().to_string();
        let mut out = ptr::null_mut();
        assert_eq!(pmwl_replay_log(log, &mut out), PmwlStatus::Ok);
        assert_eq!(take(out), state);
        pmwl_string_free(log);

        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(lines.len() - 2);
        let cut = CString::new(lines.join("\n")).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(pmwl_replay_log(cut.as_ptr(), &mut out), PmwlStatus::LogCorrupt);
        assert!(last_error().contains("corrupt"));
        pmwl_session_free(s);
    }
}
