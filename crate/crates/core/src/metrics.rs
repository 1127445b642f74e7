//! Frequency-stability indices: Nadir, sliding-window RoCoF and late-time
//! mean frequency.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AreaId;
use crate::simulator::FrequencyTrace;

/// RoCoF windows always reported, ms.
pub const STANDARD_WINDOWS_MS: [u32; 2] = [100, 500];
/// Default averaging tail for the steady-state frequency.
pub const DEFAULT_TAIL: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub area: AreaId,
    pub nadir_hz: f64,
    pub t_nadir: f64,
    /// Window length (ms) to maximum |df/dt| (Hz/s).
    pub rocof: BTreeMap<u32, f64>,
    pub f_ss: f64,
}

impl MetricsReport {
    pub fn rocof_ms(&self, window_ms: u32) -> Option<f64> {
        self.rocof.get(&window_ms).copied()
    }
}

/// Sampled minimum frequency and the first time it is reached.
pub fn nadir(trace: &FrequencyTrace, area: AreaId) -> Result<(f64, f64)> {
    let f = trace.freq(area);
    if f.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut best = 0;
    for (k, &v) in f.iter().enumerate() {
        if v < f[best] {
            best = k;
        }
    }
    Ok((f[best], trace.t[best]))
}

/// Number of samples spanned by `window`, which must be a whole multiple of
/// the sampling interval.
fn window_samples(trace: &FrequencyTrace, window: f64) -> Result<usize> {
    let ratio = window / trace.sample_dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "window {window} s must be a positive whole multiple of the sample interval {} s",
            trace.sample_dt
        )));
    }
    Ok(n as usize)
}

/// Maximum of `|f(t + W) - f(t)| / W` over every window lying inside the trace.
pub fn rocof_sliding(trace: &FrequencyTrace, area: AreaId, window: Duration) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let w = window.as_secs_f64();
    let m = window_samples(trace, w)?;
    let f = trace.freq(area);
    if m >= f.len() {
        return Err(Error::WindowTooLong {
            window: w,
            span: trace.span(),
        });
    }
    Ok(f.windows(m + 1)
        .map(|s| (s[m] - s[0]).abs() / w)
        .fold(0.0, f64::max))
}

/// Mean frequency over the final `tail` of the trace.
pub fn steady_state(trace: &FrequencyTrace, area: AreaId, tail: Duration) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let tail = tail.as_secs_f64();
    let span = trace.span();
    if tail > span + 1e-9 {
        return Err(Error::WindowTooLong { window: tail, span });
    }
    let t_last = *trace.t.last().unwrap();
    let from = t_last - tail - 1e-9;
    let f = trace.freq(area);
    let (sum, n) = trace
        .t
        .iter()
        .zip(f)
        .filter(|(t, _)| **t >= from)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    Ok(sum / n as f64)
}

/// Full report for one area with the given RoCoF windows (ms).
pub fn report(
    trace: &FrequencyTrace,
    area: AreaId,
    windows_ms: &[u32],
    tail: Duration,
) -> Result<MetricsReport> {
    let (nadir_hz, t_nadir) = nadir(trace, area)?;
    let mut rocof = BTreeMap::new();
    for &w in windows_ms {
        rocof.insert(w, rocof_sliding(trace, area, Duration::from_millis(u64::from(w)))?);
    }
    Ok(MetricsReport {
        area,
        nadir_hz,
        t_nadir,
        rocof,
        f_ss: steady_state(trace, area, tail)?,
    })
}

/// Report with the standard 100 ms / 500 ms windows and 5 s tail.
pub fn standard_report(trace: &FrequencyTrace, area: AreaId) -> Result<MetricsReport> {
    report(trace, area, &STANDARD_WINDOWS_MS, DEFAULT_TAIL)
}
