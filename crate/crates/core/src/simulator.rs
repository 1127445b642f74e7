//! Time-domain integration of the two-area model under a step disturbance.
//!
//! Per area the swing equation is
//!
//! ```text
//! 2 H dw/dt   = dPm - dPload - D dw -/+ T (ddelta_ip - ddelta_ce)
//! dddelta/dt  = 2 pi f0 dw
//! ```
//!
//! with the tie-line term leaving the Iberian area and entering the Central
//! European one. Generation loss is applied as a load step in the disturbed
//! area. State layout: `[dw_ip, ddelta_ip, dw_ce, ddelta_ce, governors...]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AreaId, Disturbance, GovernorParams, TwoAreaSystem};
use crate::ode::Rk4;

/// Governor time constants smaller than this multiple of `dt` trigger a warning.
const STEP_WARNING_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Horizon, s.
    pub t_end: f64,
    /// Output sampling interval, s. Must be a whole multiple of `dt`.
    pub sample_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.005,
            t_end: 60.0,
            sample_dt: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt.is_finite()
            && self.sample_dt.is_finite()
            && self.t_end.is_finite()
            && self.dt > 0.0
            && self.dt <= self.sample_dt * (1.0 + 1e-12)
            && self.sample_dt <= self.t_end;
        if !ok {
            return Err(Error::Config(format!(
                "need 0 < dt <= sample_dt <= t_end (dt = {}, sample_dt = {}, t_end = {})",
                self.dt, self.sample_dt, self.t_end
            )));
        }
        self.steps_per_sample()?;
        Ok(())
    }

    fn steps_per_sample(&self) -> Result<usize> {
        let ratio = self.sample_dt / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::Config(format!(
                "sample_dt = {} is not a whole multiple of dt = {}",
                self.sample_dt, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Number of output samples over `[0, t_end]`.
    pub fn n_samples(&self) -> usize {
        (self.t_end / self.sample_dt + 1e-9).floor() as usize + 1
    }
}

/// Uniformly sampled frequency response of both areas.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub t: Vec<f64>,
    pub f_ip: Vec<f64>,
    pub f_ce: Vec<f64>,
    /// Tie-line flow deviation, p.u.; positive from CE into IP.
    pub p_tie: Vec<f64>,
    pub f0: f64,
    pub sample_dt: f64,
    /// Non-fatal diagnostics raised while producing the trace.
    pub warnings: Vec<String>,
}

impl FrequencyTrace {
    pub fn freq(&self, area: AreaId) -> &[f64] {
        match area {
            AreaId::Ip => &self.f_ip,
            AreaId::Ce => &self.f_ce,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Time covered between the first and last sample.
    pub fn span(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Keeps the samples with index `< n`.
    pub fn truncated(&self, n: usize) -> FrequencyTrace {
        let n = n.min(self.len());
        FrequencyTrace {
            t: self.t[..n].to_vec(),
            f_ip: self.f_ip[..n].to_vec(),
            f_ce: self.f_ce[..n].to_vec(),
            p_tie: self.p_tie[..n].to_vec(),
            f0: self.f0,
            sample_dt: self.sample_dt,
            warnings: self.warnings.clone(),
        }
    }
}

/// Power terms of one area's swing equation, p.u. on the common base.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AreaPowers {
    pub mechanical: f64,
    pub load: f64,
    pub damping: f64,
    /// Tie-line flow leaving the area.
    pub tie_export: f64,
}

#[derive(Debug, Clone)]
struct AreaDynamics {
    two_h: f64,
    d: f64,
    w: usize,
    delta: usize,
    governors: Vec<(GovernorParams, usize)>,
}

/// Right-hand side of the two-area model, compiled from a [`TwoAreaSystem`].
#[derive(Debug, Clone)]
pub struct Dynamics {
    areas: [AreaDynamics; 2],
    t_coeff: f64,
    omega0: f64,
    f0: f64,
    dist_area: usize,
    dp: f64,
    dim: usize,
    min_time_constant: f64,
}

fn area_index(id: AreaId) -> usize {
    match id {
        AreaId::Ip => 0,
        AreaId::Ce => 1,
    }
}

impl Dynamics {
    pub fn new(sys: &TwoAreaSystem, dist: &Disturbance) -> Self {
        let mut offset = 4;
        let mut min_tc = f64::INFINITY;
        let mut build = |id: AreaId, w: usize| {
            let area = sys.area(id);
            let governors = area
                .blocks
                .iter()
                .filter_map(|b| b.governor)
                .map(|g| {
                    let at = offset;
                    offset += g.n_states();
                    min_tc = min_tc.min(g.min_time_constant());
                    (g, at)
                })
                .collect();
            AreaDynamics {
                two_h: 2.0 * area.h,
                d: area.d,
                w,
                delta: w + 1,
                governors,
            }
        };
        let ip = build(AreaId::Ip, 0);
        let ce = build(AreaId::Ce, 2);
        Dynamics {
            areas: [ip, ce],
            t_coeff: sys.tie.t_coeff,
            omega0: 2.0 * PI * sys.base.f0,
            f0: sys.base.f0,
            dist_area: area_index(dist.area),
            dp: dist.dp,
            dim: offset,
            min_time_constant: min_tc,
        }
    }

    /// State-vector dimension: 4 plus the governor states.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min_time_constant(&self) -> f64 {
        self.min_time_constant
    }

    /// Swing-equation power terms of both areas (`[ip, ce]`).
    pub fn powers(&self, load_on: bool, x: &[f64]) -> [AreaPowers; 2] {
        let export_ip = self.t_coeff * (x[self.areas[0].delta] - x[self.areas[1].delta]);
        let mut out = [AreaPowers::default(); 2];
        for (i, a) in self.areas.iter().enumerate() {
            let dw = x[a.w];
            let mechanical: f64 = a
                .governors
                .iter()
                .map(|(g, at)| g.output(dw, &x[*at..*at + g.n_states()]))
                .sum();
            out[i] = AreaPowers {
                mechanical,
                load: if load_on && i == self.dist_area { self.dp } else { 0.0 },
                damping: a.d * dw,
                tie_export: if i == 0 { export_ip } else { -export_ip },
            };
        }
        out
    }

    pub fn derivatives(&self, load_on: bool, x: &[f64], dx: &mut [f64]) {
        let export_ip = self.t_coeff * (x[self.areas[0].delta] - x[self.areas[1].delta]);
        for (i, a) in self.areas.iter().enumerate() {
            let dw = x[a.w];
            let mut mechanical = 0.0;
            for (g, at) in &a.governors {
                let n = g.n_states();
                mechanical += g.output(dw, &x[*at..*at + n]);
                g.derivatives(dw, &x[*at..*at + n], &mut dx[*at..*at + n]);
            }
            let load = if load_on && i == self.dist_area { self.dp } else { 0.0 };
            let tie = if i == 0 { export_ip } else { -export_ip };
            dx[a.w] = (mechanical - load - a.d * dw - tie) / a.two_h;
            dx[a.delta] = self.omega0 * dw;
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for a in &self.areas {
            for (g, at) in &a.governors {
                g.clamp_states(&mut x[*at..*at + g.n_states()]);
            }
        }
    }

    fn frequency(&self, area: usize, x: &[f64]) -> f64 {
        self.f0 * (1.0 + x[self.areas[area].w])
    }

    fn tie_import_ip(&self, x: &[f64]) -> f64 {
        self.t_coeff * (x[self.areas[1].delta] - x[self.areas[0].delta])
    }
}

/// Simulates the response of `sys` to `dist` over `[0, cfg.t_end]`.
pub fn simulate(sys: &TwoAreaSystem, dist: &Disturbance, cfg: &SimConfig) -> Result<FrequencyTrace> {
    run(sys, dist, cfg, |_, _| {})
}

/// As [`simulate`], also returning the full state vector at every sample.
pub fn simulate_states(
    sys: &TwoAreaSystem,
    dist: &Disturbance,
    cfg: &SimConfig,
) -> Result<(FrequencyTrace, Vec<Vec<f64>>)> {
    let mut states = Vec::with_capacity(cfg.n_samples());
    let trace = run(sys, dist, cfg, |_, x| states.push(x.to_vec()))?;
    Ok((trace, states))
}

fn run<O>(sys: &TwoAreaSystem, dist: &Disturbance, cfg: &SimConfig, mut observe: O) -> Result<FrequencyTrace>
where
    O: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    dist.validate()?;
    let dynamics = Dynamics::new(sys, dist);
    let per_sample = cfg.steps_per_sample()?;
    let n_samples = cfg.n_samples();
    let dt = cfg.dt;

    let mut warnings = Vec::new();
    let min_tc = dynamics.min_time_constant();
    if dt > STEP_WARNING_RATIO * min_tc {
        warnings.push(format!(
            "dt = {dt} s exceeds {STEP_WARNING_RATIO} x smallest time constant ({min_tc} s)"
        ));
    }

    let mut trace = FrequencyTrace {
        t: Vec::with_capacity(n_samples),
        f_ip: Vec::with_capacity(n_samples),
        f_ce: Vec::with_capacity(n_samples),
        p_tie: Vec::with_capacity(n_samples),
        f0: sys.base.f0,
        sample_dt: cfg.sample_dt,
        warnings,
    };

    let mut x = vec![0.0; dynamics.dim()];
    let mut rk = Rk4::new(dynamics.dim());
    let t_start = dist.t_start;
    let mut step = 0usize;
    for k in 0..n_samples {
        trace.t.push(k as f64 * cfg.sample_dt);
        trace.f_ip.push(dynamics.frequency(0, &x));
        trace.f_ce.push(dynamics.frequency(1, &x));
        trace.p_tie.push(dynamics.tie_import_ip(&x));
        observe(k, &x);
        if k + 1 == n_samples {
            break;
        }
        for _ in 0..per_sample {
            let t0 = step as f64 * dt;
            let t1 = (step + 1) as f64 * dt;
            if t_start <= t0 + 1e-12 {
                rk.step(&mut x, dt, |s, d| dynamics.derivatives(true, s, d));
            } else if t_start >= t1 - 1e-12 {
                rk.step(&mut x, dt, |s, d| dynamics.derivatives(false, s, d));
            } else {
                // split the step at the discontinuity
                rk.step(&mut x, t_start - t0, |s, d| dynamics.derivatives(false, s, d));
                rk.step(&mut x, t1 - t_start, |s, d| dynamics.derivatives(true, s, d));
            }
            dynamics.clamp(&mut x);
            step += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { step, t: t1 });
            }
        }
    }
    Ok(trace)
}
