//! File formats: model, anchor and trajectory JSON; trace, metrics, recorded
//! event and run-log CSV.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::RecordedEvent;
use crate::metrics::MetricsReport;
use crate::model::{build_system, AreaId, Disturbance, SystemConfig, TwoAreaSystem};
use crate::scenarios::{
    expand_keyframes, DispatchSnapshot, Keyframe, MonthProfile, PerArea, ReferenceAnchor, ScenarioPoint,
    ScenarioTrajectory, SweepRow, TypicalInertia, Variants,
};
use crate::simulator::FrequencyTrace;

pub const TRACE_HEADER: [&str; 4] = ["t", "f_ip", "f_ce", "p_tie"];
pub const METRICS_HEADER: [&str; 7] = ["scenario_id", "area", "nadir_hz", "t_nadir", "rocof100", "rocof500", "f_ss"];
pub const RUN_LOG_HEADER: [&str; 2] = ["iter", "best_cost"];

/// Formats `x` with `sig` significant digits in positional notation, trailing
/// zeros removed. Magnitudes below 1e-12 fall back to exponent notation.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -12 {
        return format!("{:.*e}", sig.saturating_sub(1), x);
    }
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

/// Digits used for every numeric CSV field.
pub const SIG_DIGITS: usize = 9;

fn num(x: f64) -> String {
    fmt_sig(x, SIG_DIGITS)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(context: impl Into<String>) -> impl FnOnce(csv::Error) -> Error {
    let context = context.into();
    move |source| Error::Csv { context, source }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Reads and validates a model file. Validation errors are prefixed with the
/// file name.
pub fn read_system(path: &Path) -> Result<TwoAreaSystem> {
    let cfg: SystemConfig = read_json(path)?;
    build_system(&cfg).map_err(|e| match e {
        Error::Invalid { field, reason } => Error::Invalid {
            field: format!("{}: {field}", path.display()),
            reason,
        },
        other => other,
    })
}

pub fn write_system(path: &Path, sys: &TwoAreaSystem) -> Result<()> {
    write_json(path, &sys.to_config())
}

// ---------------------------------------------------------------------------
// Anchor and trajectories
// ---------------------------------------------------------------------------

/// Reference anchor: calibrated model plus the dispatch at the calibration
/// event and the typical inertia table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Model file, relative to the anchor file.
    pub model: PathBuf,
    pub mix_o: PerArea<DispatchSnapshot>,
    #[serde(default)]
    pub typical_h: TypicalInertia,
    #[serde(default)]
    pub load_inertia_scales: bool,
}

pub fn read_anchor(path: &Path) -> Result<ReferenceAnchor> {
    let file: AnchorFile = read_json(path)?;
    let model_path = path.parent().unwrap_or(Path::new(".")).join(&file.model);
    let model = read_system(&model_path)?;
    let mut anchor = ReferenceAnchor::new(model, file.mix_o, file.typical_h)?;
    anchor.load_inertia_scales = file.load_inertia_scales;
    Ok(anchor)
}

/// Trajectory file: explicit snapshots or keyframes expanded yearly (and
/// monthly when month profiles are present).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(default)]
    pub variants: Variants,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<Keyframe>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub months: Vec<MonthProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<ScenarioPoint>,
}

impl TrajectoryFile {
    pub fn into_trajectory(self) -> Result<ScenarioTrajectory> {
        if !self.keyframes.is_empty() && !self.snapshots.is_empty() {
            return Err(Error::invalid(
                format!("{}.snapshots", self.name),
                "give either keyframes or snapshots, not both",
            ));
        }
        let points = if self.keyframes.is_empty() {
            self.snapshots
        } else {
            expand_keyframes(&self.name, &self.keyframes, &self.months)?
        };
        ScenarioTrajectory::new(self.name, points, self.variants)
    }
}

pub fn read_trajectory(path: &Path) -> Result<ScenarioTrajectory> {
    read_json::<TrajectoryFile>(path)?.into_trajectory()
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

pub fn write_trace_csv<W: Write>(out: W, trace: &FrequencyTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err("trace"))?;
    for k in 0..trace.len() {
        w.write_record([
            num(trace.t[k]),
            num(trace.f_ip[k]),
            num(trace.f_ce[k]),
            num(trace.p_tie[k]),
        ])
        .map_err(csv_err("trace"))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<trace>"),
        source,
    })
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("line {line}.{what}"), format!("not a number: `{field}`")))
}

fn column_index(headers: &csv::StringRecord, name: &str, context: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::invalid(format!("{context}.header"), format!("missing column `{name}`")))
}

/// Reads a trace written by [`write_trace_csv`]. `f0` is the nominal frequency
/// of the model that produced it.
pub fn read_trace_csv<R: Read>(input: R, f0: f64) -> Result<FrequencyTrace> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err("trace"))?.clone();
    let idx: Vec<usize> = TRACE_HEADER
        .iter()
        .map(|h| column_index(&headers, h, "trace"))
        .collect::<Result<_>>()?;
    let mut trace = FrequencyTrace {
        t: vec![],
        f_ip: vec![],
        f_ce: vec![],
        p_tie: vec![],
        f0,
        sample_dt: 0.0,
        warnings: vec![],
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err("trace"))?;
        let line = i + 2;
        trace.t.push(parse_f64(&rec[idx[0]], "t", line)?);
        trace.f_ip.push(parse_f64(&rec[idx[1]], "f_ip", line)?);
        trace.f_ce.push(parse_f64(&rec[idx[2]], "f_ce", line)?);
        trace.p_tie.push(parse_f64(&rec[idx[3]], "p_tie", line)?);
    }
    if trace.t.len() >= 2 {
        trace.sample_dt = (trace.t[trace.t.len() - 1] - trace.t[0]) / (trace.t.len() - 1) as f64;
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

fn metrics_fields(scenario_id: &str, m: &MetricsReport) -> Vec<String> {
    vec![
        scenario_id.to_owned(),
        m.area.as_str().to_owned(),
        num(m.nadir_hz),
        num(m.t_nadir),
        m.rocof_ms(100).map(num).unwrap_or_default(),
        m.rocof_ms(500).map(num).unwrap_or_default(),
        num(m.f_ss),
    ]
}

/// One metrics row per `(scenario, area)` report.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[(String, MetricsReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER).map_err(csv_err("metrics"))?;
    for (id, m) in rows {
        w.write_record(metrics_fields(id, m)).map_err(csv_err("metrics"))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<metrics>"),
        source,
    })
}

/// Sweep output: the metrics schema plus a trailing `status` column holding
/// `ok` or the per-snapshot error.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = METRICS_HEADER.to_vec();
    header.push("status");
    w.write_record(&header).map_err(csv_err("sweep"))?;
    for row in rows {
        let mut fields = match &row.outcome {
            Ok(m) => {
                let mut f = metrics_fields(&row.scenario_id, m);
                f.push("ok".to_owned());
                f
            }
            Err(e) => {
                let mut f = vec![row.scenario_id.clone(), row.area.as_str().to_owned()];
                f.extend(std::iter::repeat_n(String::new(), 5));
                f.push(format!("error: {e}"));
                f
            }
        };
        fields.shrink_to_fit();
        w.write_record(&fields).map_err(csv_err("sweep"))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<sweep>"),
        source,
    })
}

/// Parsed metrics row. Failed sweep rows carry `None` metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub area: AreaId,
    pub nadir_hz: Option<f64>,
    pub t_nadir: Option<f64>,
    pub rocof100: Option<f64>,
    pub rocof500: Option<f64>,
    pub f_ss: Option<f64>,
    pub status: Option<String>,
}

/// Reads files written by [`write_metrics_csv`] or [`write_sweep_csv`].
pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err("metrics"))?.clone();
    let idx: Vec<usize> = METRICS_HEADER
        .iter()
        .map(|h| column_index(&headers, h, "metrics"))
        .collect::<Result<_>>()?;
    let status_idx = headers.iter().position(|h| h == "status");
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err("metrics"))?;
        let line = i + 2;
        let opt = |k: usize, what: &str| -> Result<Option<f64>> {
            let s = &rec[idx[k]];
            if s.trim().is_empty() {
                Ok(None)
            } else {
                parse_f64(s, what, line).map(Some)
            }
        };
        rows.push(MetricsRow {
            scenario_id: rec[idx[0]].to_owned(),
            area: rec[idx[1]].parse()?,
            nadir_hz: opt(2, "nadir_hz")?,
            t_nadir: opt(3, "t_nadir")?,
            rocof100: opt(4, "rocof100")?,
            rocof500: opt(5, "rocof500")?,
            f_ss: opt(6, "f_ss")?,
            status: status_idx.map(|s| rec[s].to_owned()),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Recorded events
// ---------------------------------------------------------------------------

/// Disturbance as described in an event sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarDisturbance {
    pub area: AreaId,
    /// Lost generation, MW.
    pub mw: f64,
    /// Start time on the recording's time axis, s.
    pub t_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub disturbance: SidecarDisturbance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch: Option<PerArea<DispatchSnapshot>>,
    /// Nominal frequency, Hz.
    #[serde(default = "default_f0")]
    pub f0: f64,
    /// Power base the disturbance is expressed on, GVA.
    #[serde(default = "default_s_base")]
    pub s_base: f64,
}

fn default_f0() -> f64 {
    50.0
}

fn default_s_base() -> f64 {
    10.0
}

/// Raw `t,f_ip,f_ce` samples at an arbitrary (possibly non-uniform) rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub t: Vec<f64>,
    pub f_ip: Vec<f64>,
    pub f_ce: Vec<f64>,
}

pub fn read_recording_csv<R: Read>(input: R) -> Result<RawRecording> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err("recording"))?.clone();
    let it = column_index(&headers, "t", "recording")?;
    let iip = column_index(&headers, "f_ip", "recording")?;
    let ice = column_index(&headers, "f_ce", "recording")?;
    let mut raw = RawRecording {
        t: vec![],
        f_ip: vec![],
        f_ce: vec![],
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err("recording"))?;
        let line = i + 2;
        let t = parse_f64(&rec[it], "t", line)?;
        if let Some(&prev) = raw.t.last() {
            if t <= prev {
                return Err(Error::invalid(format!("line {line}.t"), "time must be strictly increasing"));
            }
        }
        raw.t.push(t);
        raw.f_ip.push(parse_f64(&rec[iip], "f_ip", line)?);
        raw.f_ce.push(parse_f64(&rec[ice], "f_ce", line)?);
    }
    if raw.t.len() < 2 {
        return Err(Error::invalid("recording", "need at least two samples"));
    }
    Ok(raw)
}

fn interp(t: &[f64], y: &[f64], at: f64) -> f64 {
    let j = t.partition_point(|&x| x <= at);
    if j == 0 {
        return y[0];
    }
    if j >= t.len() {
        return y[t.len() - 1];
    }
    let (t0, t1) = (t[j - 1], t[j]);
    y[j - 1] + (y[j] - y[j - 1]) * (at - t0) / (t1 - t0)
}

/// Linearly resamples a recording onto `k * step`, `k = 0..`, with time
/// rebased so the first sample is at zero. Returns the rebasing offset.
pub fn resample(raw: &RawRecording, step: f64, f0: f64) -> Result<(FrequencyTrace, f64)> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config("resampling step must be positive".into()));
    }
    let t0 = raw.t[0];
    let span = raw.t[raw.t.len() - 1] - t0;
    let n = (span / step + 1e-9).floor() as usize + 1;
    let rel: Vec<f64> = raw.t.iter().map(|t| t - t0).collect();
    let t: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let f_ip = t.iter().map(|&x| interp(&rel, &raw.f_ip, x)).collect();
    let f_ce = t.iter().map(|&x| interp(&rel, &raw.f_ce, x)).collect();
    Ok((
        FrequencyTrace {
            p_tie: vec![0.0; n],
            t,
            f_ip,
            f_ce,
            f0,
            sample_dt: step,
            warnings: vec![],
        },
        t0,
    ))
}

/// Default resampling interval of recorded events, s: the 50 frames/s
/// reporting rate of phasor measurement units.
pub const EVENT_RESAMPLE_DT: f64 = 0.02;

/// Loads a recorded event from its trace CSV and sidecar JSON.
pub fn read_event(trace_path: &Path, sidecar_path: &Path, resample_dt: f64) -> Result<RecordedEvent> {
    let sidecar: EventSidecar = read_json(sidecar_path)?;
    let file = fs::File::open(trace_path).map_err(io_err(trace_path))?;
    let raw = read_recording_csv(file).map_err(|e| match e {
        Error::Invalid { field, reason } => Error::Invalid {
            field: format!("{}: {field}", trace_path.display()),
            reason,
        },
        other => other,
    })?;
    let (trace, t0) = resample(&raw, resample_dt, sidecar.f0)?;
    let dist = Disturbance {
        area: sidecar.disturbance.area,
        dp: sidecar.disturbance.mw / 1000.0 / sidecar.s_base,
        t_start: sidecar.disturbance.t_start - t0,
    };
    dist.validate()?;
    RecordedEvent::new(trace, dist, sidecar.dispatch)
}

/// Writes a trace as a recording (`t,f_ip,f_ce`).
pub fn write_recording_csv<W: Write>(out: W, trace: &FrequencyTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "f_ip", "f_ce"]).map_err(csv_err("recording"))?;
    for k in 0..trace.len() {
        w.write_record([num(trace.t[k]), num(trace.f_ip[k]), num(trace.f_ce[k])])
            .map_err(csv_err("recording"))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<recording>"),
        source,
    })
}

pub fn write_run_log<W: Write>(out: W, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_LOG_HEADER).map_err(csv_err("run log"))?;
    for (k, c) in history.iter().enumerate() {
        w.write_record([k.to_string(), num(*c)]).map_err(csv_err("run log"))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<run log>"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(49.912345678901, 9), "49.9123457");
        assert_eq!(fmt_sig(0.01, 9), "0.01");
        assert_eq!(fmt_sig(60.0, 9), "60");
        assert_eq!(fmt_sig(-0.000123456789123, 9), "-0.000123456789");
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(-1e-20, 9), "-1.00000000e-20");
    }

    #[test]
    fn resampling_is_linear() {
        let raw = RawRecording {
            t: vec![10.0, 10.3, 11.0],
            f_ip: vec![50.0, 49.7, 49.7],
            f_ce: vec![50.0, 50.0, 49.9],
        };
        let (tr, t0) = resample(&raw, 0.1, 50.0).unwrap();
        assert_eq!(t0, 10.0);
        assert_eq!(tr.len(), 11);
        assert!((tr.f_ip[1] - 49.9).abs() < 1e-12);
        assert!((tr.f_ip[3] - 49.7).abs() < 1e-12);
        assert!((tr.f_ce[10] - 49.9).abs() < 1e-12);
    }

    #[test]
    fn recording_requires_increasing_time() {
        let csv = "t,f_ip,f_ce\n0,50,50\n0,50,50\n";
        assert!(read_recording_csv(csv.as_bytes()).is_err());
    }
}
