mod common;

use std::fs;

use freqstab_core::io::{
    read_event, read_metrics_csv, read_recording_csv, read_trace_csv, resample, write_metrics_csv,
    write_recording_csv, write_sweep_csv, write_trace_csv, EVENT_RESAMPLE_DT,
};
use freqstab_core::metrics::standard_report;
use freqstab_core::{simulate, sweep, AreaId, Disturbance, Error, SimConfig};

use common::{anchor, data_dir, reference_model};

fn reference_trace() -> freqstab_core::FrequencyTrace {
    let cfg = SimConfig {
        t_end: 10.0,
        ..SimConfig::default()
    };
    simulate(&reference_model(), &Disturbance::reference(), &cfg).unwrap()
}

#[test]
fn trace_csv_round_trip() {
    let tr = reference_trace();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &tr).unwrap();
    assert!(buf.starts_with(b"t,f_ip,f_ce,p_tie\n"));
    let back = read_trace_csv(buf.as_slice(), 50.0).unwrap();
    assert_eq!(back.len(), tr.len());
    for k in 0..tr.len() {
        assert!((back.f_ip[k] - tr.f_ip[k]).abs() < 1e-7);
        assert!((back.p_tie[k] - tr.p_tie[k]).abs() < 1e-9);
    }
    assert!((back.sample_dt - 0.01).abs() < 1e-12);
}

#[test]
fn trace_csv_is_byte_deterministic() {
    let a = reference_trace();
    let b = reference_trace();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    write_trace_csv(&mut x, &a).unwrap();
    write_trace_csv(&mut y, &b).unwrap();
    assert_eq!(x, y);
}

#[test]
fn metrics_csv_round_trip() {
    let tr = reference_trace();
    let rows: Vec<_> = AreaId::ALL
        .iter()
        .map(|&a| ("ref".to_owned(), standard_report(&tr, a).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows).unwrap();
    let back = read_metrics_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].area, AreaId::Ip);
    assert!((back[0].nadir_hz.unwrap() - rows[0].1.nadir_hz).abs() < 1e-7);
}

#[test]
fn sweep_csv_marks_status() {
    let anchor = anchor();
    let traj = freqstab_core::io::read_trajectory(&data_dir().join("scenarios/peak_pv.json")).unwrap();
    let cfg = SimConfig {
        t_end: 6.0,
        ..SimConfig::default()
    };
    let rows = sweep(&anchor, &traj, &Disturbance::reference(), &cfg);
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with(",status"), "{header}");
    assert_eq!(text.lines().count(), rows.len() + 1);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn recording_resamples_onto_a_uniform_grid() {
    let csv = "t,f_ip,f_ce\n10.0,50.0,50.0\n10.3,49.7,49.97\n10.5,49.6,49.96\n";
    let raw = read_recording_csv(csv.as_bytes()).unwrap();
    let (tr, t0) = resample(&raw, 0.1, 50.0).unwrap();
    assert_eq!(t0, 10.0);
    assert_eq!(tr.len(), 6);
    assert!((tr.f_ip[1] - 49.9).abs() < 1e-12);
    assert!((tr.f_ip[4] - 49.65).abs() < 1e-12);
}

#[test]
fn recording_with_missing_column_is_rejected() {
    let csv = "t,f_ip\n0,50\n0.1,50\n";
    let err = read_recording_csv(csv.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Invalid { .. }), "{err}");
}

#[test]
fn shipped_event_loads() {
    let dir = data_dir().join("events");
    let ev = read_event(
        &dir.join("synthetic_ip_loss.csv"),
        &dir.join("synthetic_ip_loss.json"),
        EVENT_RESAMPLE_DT,
    )
    .unwrap();
    assert_eq!(ev.dist.area, AreaId::Ip);
    assert!((ev.dist.dp - 0.1).abs() < 1e-12);
    assert!((ev.trace.span() - 60.0).abs() < 1e-9);
    assert!(ev.mix_at_event.is_some());
}

#[test]
fn event_time_axis_is_rebased() {
    let dir = tempfile::tempdir().unwrap();
    let tr = reference_trace();
    let mut shifted = tr.clone();
    shifted.t.iter_mut().for_each(|t| *t += 100.0);
    let csv = dir.path().join("ev.csv");
    let mut buf = Vec::new();
    write_recording_csv(&mut buf, &shifted).unwrap();
    fs::write(&csv, buf).unwrap();
    let side = dir.path().join("ev.json");
    fs::write(
        &side,
        r#"{"disturbance": {"area": "ce", "mw": 500.0, "t_start": 101.0}, "s_base": 10.0}"#,
    )
    .unwrap();
    let ev = read_event(&csv, &side, 0.01).unwrap();
    assert!((ev.dist.t_start - 1.0).abs() < 1e-9);
    assert!((ev.dist.dp - 0.05).abs() < 1e-12);
    assert_eq!(ev.dist.area, AreaId::Ce);
    assert!(ev.mix_at_event.is_none());
}

#[test]
fn model_files_report_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    let text = fs::read_to_string(data_dir().join("reference_model.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["area_ip"]["h"] = serde_json::json!(-1.0);
    fs::write(&p, v.to_string()).unwrap();
    let err = freqstab_core::io::read_system(&p).unwrap_err().to_string();
    assert!(err.contains("m.json") && err.contains("area_ip"), "{err}");
}
