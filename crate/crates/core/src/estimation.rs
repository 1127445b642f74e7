//! Model calibration from a recorded two-area frequency response.
//!
//! The cost of a parameter vector is the sum of squared frequency errors of
//! both areas on the recorded sample grid (Hz^2), plus weighted plausibility
//! penalties. It is minimised with a particle swarm whose inertia weight
//! descends along a logistic chaotic sequence:
//!
//! ```text
//! w(k)   = (w_max - w_min) (K - k) / K z(k) + w_min
//! z(k+1) = 4 z(k) (1 - z(k))
//! ```
//!
//! Calibration runs in two stages: a reduced model with one equivalent
//! governor per area, then the full per-technology model initialised from
//! the reduced fit. The full stage can finish with a bounded
//! Levenberg-Marquardt refinement of the swarm's best point.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AreaId, AreaModel, Disturbance, GenerationBlock, GovernorParams, SystemBase, TechnologyKind, TieLine,
    TwoAreaSystem,
};
use crate::scenarios::{DispatchSnapshot, PerArea};
use crate::simulator::{simulate, FrequencyTrace, SimConfig};

/// Cost assigned to parameter vectors whose model is invalid or diverges.
pub const SENTINEL_COST: f64 = 1e9;

/// Measured response to a known outage.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEvent {
    pub trace: FrequencyTrace,
    pub dist: Disturbance,
    pub mix_at_event: Option<PerArea<DispatchSnapshot>>,
}

impl RecordedEvent {
    pub fn new(
        trace: FrequencyTrace,
        dist: Disturbance,
        mix_at_event: Option<PerArea<DispatchSnapshot>>,
    ) -> Result<Self> {
        let n = trace.len();
        if n < 2 {
            return Err(Error::EmptyTrace);
        }
        if trace.f_ip.len() != n || trace.f_ce.len() != n {
            return Err(Error::invalid("event.trace", "area traces have different lengths"));
        }
        if !(trace.sample_dt.is_finite() && trace.sample_dt > 0.0) {
            return Err(Error::invalid("event.trace.sample_dt", "must be positive"));
        }
        for (k, &t) in trace.t.iter().enumerate() {
            if (t - k as f64 * trace.sample_dt).abs() > 1e-6 * trace.sample_dt.max(1.0) {
                return Err(Error::invalid(
                    format!("event.trace.t[{k}]"),
                    "samples must lie on a uniform grid starting at zero",
                ));
            }
        }
        if trace.f_ip.iter().chain(&trace.f_ce).any(|f| !f.is_finite()) {
            return Err(Error::invalid("event.trace", "non-finite frequency sample"));
        }
        dist.validate()?;
        if let Some(mix) = &mix_at_event {
            mix.ip.validate()?;
            mix.ce.validate()?;
        }
        Ok(RecordedEvent {
            trace,
            dist,
            mix_at_event,
        })
    }
}

/// Simulates `sys` and records both area frequencies every `record_dt` with
/// additive Gaussian noise of standard deviation `noise_hz`.
pub fn synthetic_event(
    sys: &TwoAreaSystem,
    dist: &Disturbance,
    mix_at_event: Option<PerArea<DispatchSnapshot>>,
    span: f64,
    record_dt: f64,
    noise_hz: f64,
    seed: u64,
) -> Result<RecordedEvent> {
    let cfg = SimConfig {
        dt: 0.005,
        t_end: span,
        sample_dt: record_dt,
    };
    let mut trace = simulate(sys, dist, &cfg)?;
    if noise_hz > 0.0 {
        let noise = Normal::new(0.0, noise_hz).map_err(|e| Error::invalid("noise_hz", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..trace.len() {
            trace.f_ip[k] += noise.sample(&mut rng);
            trace.f_ce[k] += noise.sample(&mut rng);
        }
    }
    trace.p_tie.iter_mut().for_each(|p| *p = 0.0);
    trace.warnings.clear();
    RecordedEvent::new(trace, *dist, mix_at_event)
}

// ---------------------------------------------------------------------------
// Parameter space and templates
// ---------------------------------------------------------------------------

/// Model field a parameter writes to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Binding {
    /// Total area inertia, s.
    AreaH { area: AreaId },
    AreaD { area: AreaId },
    /// Synchronizing coefficient of the tie line.
    Tie,
    /// Governor time constant shared by every governed block.
    SharedTg,
    BlockDroop { area: AreaId, block: String },
    BlockRt { area: AreaId, block: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binding: Binding,
    /// Search in `ln x` rather than `x`. Needs a positive lower bound.
    #[serde(default)]
    pub log_scale: bool,
}

impl ParamEntry {
    pub fn to_search(&self, x: f64) -> f64 {
        if self.log_scale {
            x.ln()
        } else {
            x
        }
    }

    pub fn from_search(&self, u: f64) -> f64 {
        let x = if self.log_scale { u.exp() } else { u };
        x.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Penalty {
    /// `weight * max(0, R - Rt)`.
    RtAtLeastR { rt: String, r: String, weight: f64 },
    /// `weight * distance of the parameter outside [lo, hi]`.
    Band { param: String, lo: f64, hi: f64, weight: f64 },
}

impl Penalty {
    pub fn label(&self) -> String {
        match self {
            Penalty::RtAtLeastR { rt, r, .. } => format!("{rt} >= {r}"),
            Penalty::Band { param, lo, hi, .. } => format!("{param} in [{lo}, {hi}]"),
        }
    }

    fn weight(&self) -> f64 {
        match self {
            Penalty::RtAtLeastR { weight, .. } | Penalty::Band { weight, .. } => *weight,
        }
    }
}

/// Bounded box of named parameters plus plausibility penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub entries: Vec<ParamEntry>,
    #[serde(default)]
    pub penalties: Vec<Penalty>,
}

impl ParamSpace {
    pub fn new(entries: Vec<ParamEntry>, penalties: Vec<Penalty>) -> Result<Self> {
        let space = ParamSpace { entries, penalties };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("parameter space is empty".into()));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.lower.is_finite() && e.upper.is_finite() && e.lower < e.upper) {
                return Err(Error::invalid(
                    format!("bounds.{}", e.name),
                    format!("need lower < upper, got [{}, {}]", e.lower, e.upper),
                ));
            }
            if e.log_scale && e.lower <= 0.0 {
                return Err(Error::invalid(
                    format!("bounds.{}", e.name),
                    "log-scaled parameters need a positive lower bound",
                ));
            }
            if self.entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::invalid(format!("bounds.{}", e.name), "duplicate parameter"));
            }
        }
        for p in &self.penalties {
            if !(p.weight().is_finite() && p.weight() > 0.0) {
                return Err(Error::invalid(format!("penalties.{}", p.label()), "weight must be positive"));
            }
            let names: Vec<&str> = match p {
                Penalty::RtAtLeastR { rt, r, .. } => vec![rt, r],
                Penalty::Band { param, lo, hi, .. } => {
                    if !(lo <= hi) {
                        return Err(Error::invalid(format!("penalties.{}", p.label()), "need lo <= hi"));
                    }
                    vec![param]
                }
            };
            for n in names {
                if self.index_of(n).is_none() {
                    return Err(Error::invalid(
                        format!("penalties.{}", p.label()),
                        format!("unknown parameter `{n}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.entries.iter().zip(x).all(|(e, &v)| e.lower <= v && v <= e.upper)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (e, v) in self.entries.iter().zip(x.iter_mut()) {
            *v = v.clamp(e.lower, e.upper);
        }
    }

    /// Weighted violation of each penalty at `x`, in declaration order.
    pub fn penalty_terms(&self, x: &[f64]) -> Vec<f64> {
        let at = |n: &str| x[self.index_of(n).expect("validated penalty parameter")];
        self.penalties
            .iter()
            .map(|p| match p {
                Penalty::RtAtLeastR { rt, r, weight } => weight * (at(r) - at(rt)).max(0.0),
                Penalty::Band { param, lo, hi, weight } => {
                    let v = at(param);
                    weight * ((lo - v).max(0.0) + (v - hi).max(0.0))
                }
            })
            .collect()
    }

    pub fn penalty(&self, x: &[f64]) -> f64 {
        self.penalty_terms(x).iter().sum()
    }

    /// Labels of the penalties that are nonzero at `x`.
    pub fn active_penalties(&self, x: &[f64]) -> Vec<String> {
        self.penalties
            .iter()
            .zip(self.penalty_terms(x))
            .filter(|(_, v)| *v > 0.0)
            .map(|(p, _)| p.label())
            .collect()
    }
}

/// Model structure with fixed turbine constants plus the parameter space that
/// fills in the estimated fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub system: TwoAreaSystem,
    pub space: ParamSpace,
}

impl ModelTemplate {
    /// Checks that every binding refers to an existing field. The per-block
    /// inertia split is cleared: estimation sees only area totals.
    pub fn new(mut system: TwoAreaSystem, space: ParamSpace) -> Result<Self> {
        space.validate()?;
        for id in AreaId::ALL {
            let area = system.area_mut(id);
            for b in &mut area.blocks {
                b.h_contrib = 0.0;
            }
            area.h_load = area.h;
        }
        for e in &space.entries {
            let ok = match &e.binding {
                Binding::AreaH { .. } | Binding::AreaD { .. } | Binding::Tie | Binding::SharedTg => true,
                Binding::BlockDroop { area, block } => system
                    .area(*area)
                    .block(block)
                    .is_some_and(|b| b.governor.is_some()),
                Binding::BlockRt { area, block } => system
                    .area(*area)
                    .block(block)
                    .and_then(|b| b.governor.as_ref())
                    .is_some_and(|g| g.rt().is_some()),
            };
            if !ok {
                return Err(Error::invalid(
                    format!("bounds.{}", e.name),
                    format!("binding {:?} does not match the model structure", e.binding),
                ));
            }
        }
        Ok(ModelTemplate { system, space })
    }

    /// Writes `x` into a copy of the template. Fails if the result violates a
    /// model invariant.
    pub fn instantiate(&self, x: &[f64]) -> Result<TwoAreaSystem> {
        if x.len() != self.space.dim() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.space.dim(),
                x.len()
            )));
        }
        let mut sys = self.system.clone();
        for (e, &v) in self.space.entries.iter().zip(x) {
            match &e.binding {
                Binding::AreaH { area } => {
                    let a = sys.area_mut(*area);
                    a.set_total_inertia(v);
                }
                Binding::AreaD { area } => sys.area_mut(*area).d = v,
                Binding::Tie => sys.tie.t_coeff = v,
                Binding::SharedTg => {
                    for id in AreaId::ALL {
                        for g in sys.area_mut(id).blocks.iter_mut().filter_map(|b| b.governor.as_mut()) {
                            g.set_tg(v);
                        }
                    }
                }
                Binding::BlockDroop { area, block } => {
                    if let Some(g) = sys.area_mut(*area).block_mut(block).and_then(|b| b.governor.as_mut()) {
                        g.set_r(v);
                    }
                }
                Binding::BlockRt { area, block } => {
                    if let Some(g) = sys.area_mut(*area).block_mut(block).and_then(|b| b.governor.as_mut()) {
                        g.set_rt(v);
                    }
                }
            }
        }
        sys.validate()?;
        Ok(sys)
    }

    /// Reads the bound fields back out of `sys` (same structure as the template).
    pub fn extract(&self, sys: &TwoAreaSystem) -> Result<Vec<f64>> {
        self.space
            .entries
            .iter()
            .map(|e| {
                let missing = || Error::invalid(format!("bounds.{}", e.name), "field absent from model");
                Ok(match &e.binding {
                    Binding::AreaH { area } => sys.area(*area).h,
                    Binding::AreaD { area } => sys.area(*area).d,
                    Binding::Tie => sys.tie.t_coeff,
                    Binding::SharedTg => AreaId::ALL
                        .iter()
                        .flat_map(|&id| sys.area(id).blocks.iter())
                        .find_map(|b| b.governor.as_ref())
                        .ok_or_else(missing)?
                        .tg(),
                    Binding::BlockDroop { area, block } => sys
                        .area(*area)
                        .block(block)
                        .and_then(|b| b.governor.as_ref())
                        .ok_or_else(missing)?
                        .r(),
                    Binding::BlockRt { area, block } => sys
                        .area(*area)
                        .block(block)
                        .and_then(|b| b.governor.as_ref())
                        .and_then(|g| g.rt())
                        .ok_or_else(missing)?,
                })
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Configuration of the estimation problem
// ---------------------------------------------------------------------------

/// Closed interval `[lo, hi]`.
pub type Interval = [f64; 2];

/// Bounds, penalty bands and fixed constants of both estimation stages.
/// Inertia, damping and droop bounds are per area because the two areas
/// differ by an order of magnitude on a common base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSetup {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub h: PerArea<Interval>,
    pub d: PerArea<Interval>,
    /// Per-technology droop bounds (full stage).
    pub r: PerArea<Interval>,
    /// Equivalent droop bounds (reduced stage).
    pub r_equivalent: PerArea<Interval>,
    pub rt: Interval,
    pub tg: Interval,
    pub t: Interval,
    /// Plausibility band on the area inertia.
    pub h_band: PerArea<Interval>,
    pub t_band: Interval,
    pub band_weight: f64,
    pub rt_weight: f64,
    /// Turbine lead/lag of the reduced stage's equivalent TGOV1, s.
    pub reduced_t2: f64,
    pub reduced_t3: f64,
    /// Integration step of the model inside the objective, s.
    pub sim_dt: f64,
    /// Refine the full-stage swarm result by least squares.
    #[serde(default)]
    pub refine: bool,
}

impl Default for EstimationSetup {
    fn default() -> Self {
        EstimationSetup {
            notes: None,
            h: PerArea {
                ip: [1.0, 10.0],
                ce: [1.0, 10.0],
            },
            d: PerArea {
                ip: [0.1, 3.0],
                ce: [0.1, 3.0],
            },
            r: PerArea {
                ip: [0.01, 0.5],
                ce: [0.01, 0.5],
            },
            r_equivalent: PerArea {
                ip: [0.01, 0.5],
                ce: [0.01, 0.5],
            },
            rt: [0.05, 1.5],
            tg: [0.05, 1.0],
            t: [0.1, 5.0],
            h_band: PerArea {
                ip: [1.0, 10.0],
                ce: [1.0, 10.0],
            },
            t_band: [0.1, 5.0],
            band_weight: 100.0,
            rt_weight: 100.0,
            reduced_t2: 1.0,
            reduced_t3: 5.0,
            sim_dt: 0.005,
            refine: false,
        }
    }
}

fn entry(name: impl Into<String>, iv: Interval, binding: Binding) -> ParamEntry {
    ParamEntry {
        name: name.into(),
        lower: iv[0],
        upper: iv[1],
        binding,
        log_scale: true,
    }
}

fn upper(id: AreaId) -> &'static str {
    match id {
        AreaId::Ip => "IP",
        AreaId::Ce => "CE",
    }
}

impl EstimationSetup {
    fn common_penalties(&self) -> Vec<Penalty> {
        let mut p: Vec<Penalty> = AreaId::ALL
            .iter()
            .map(|&id| Penalty::Band {
                param: format!("H_{}", upper(id)),
                lo: self.h_band.get(id)[0],
                hi: self.h_band.get(id)[1],
                weight: self.band_weight,
            })
            .collect();
        p.push(Penalty::Band {
            param: "T".into(),
            lo: self.t_band[0],
            hi: self.t_band[1],
            weight: self.band_weight,
        });
        p
    }

    /// Eight-parameter model: one equivalent TGOV1 loop per area.
    pub fn reduced_template(&self, base: SystemBase) -> Result<ModelTemplate> {
        let area = |id: AreaId| AreaModel {
            id,
            h: self.h.get(id)[0],
            h_load: self.h.get(id)[0],
            d: self.d.get(id)[0],
            blocks: vec![GenerationBlock {
                name: "equivalent".into(),
                kind: TechnologyKind::SteamTgov1,
                technologies: vec![],
                governor: Some(GovernorParams::SteamTgov1 {
                    r: self.r_equivalent.get(id)[1],
                    tg: self.tg[1],
                    t2: self.reduced_t2,
                    t3: self.reduced_t3,
                    dt: 0.0,
                }),
                pg: 0.0,
                h_contrib: 0.0,
            }],
        };
        let system = TwoAreaSystem {
            base,
            area_ip: area(AreaId::Ip),
            area_ce: area(AreaId::Ce),
            tie: TieLine { t_coeff: self.t[0] },
        };
        let mut entries = Vec::with_capacity(8);
        for id in [AreaId::Ce, AreaId::Ip] {
            entries.push(entry(format!("H_{}", upper(id)), *self.h.get(id), Binding::AreaH { area: id }));
        }
        for id in [AreaId::Ce, AreaId::Ip] {
            entries.push(entry(format!("D_{}", upper(id)), *self.d.get(id), Binding::AreaD { area: id }));
        }
        for id in [AreaId::Ce, AreaId::Ip] {
            entries.push(entry(
                format!("R_{}", upper(id)),
                *self.r_equivalent.get(id),
                Binding::BlockDroop {
                    area: id,
                    block: "equivalent".into(),
                },
            ));
        }
        entries.push(entry("Tg", self.tg, Binding::SharedTg));
        entries.push(entry("T", self.t, Binding::Tie));
        ModelTemplate::new(system, ParamSpace::new(entries, self.common_penalties())?)
    }

    /// Full model over the structure of `model`: area inertia and damping,
    /// droop of every governed block, transient droop of every hydro block,
    /// tie coefficient and one shared governor time constant.
    pub fn full_template(&self, model: &TwoAreaSystem) -> Result<ModelTemplate> {
        let mut entries = Vec::new();
        let mut penalties = self.common_penalties();
        for id in [AreaId::Ce, AreaId::Ip] {
            entries.push(entry(format!("H_{}", upper(id)), *self.h.get(id), Binding::AreaH { area: id }));
        }
        for id in [AreaId::Ce, AreaId::Ip] {
            entries.push(entry(format!("D_{}", upper(id)), *self.d.get(id), Binding::AreaD { area: id }));
        }
        for id in [AreaId::Ce, AreaId::Ip] {
            for b in model.area(id).blocks.iter().filter(|b| b.governor.is_some()) {
                entries.push(entry(
                    format!("R_{}_{}", b.name, upper(id)),
                    *self.r.get(id),
                    Binding::BlockDroop {
                        area: id,
                        block: b.name.clone(),
                    },
                ));
            }
        }
        for id in [AreaId::Ce, AreaId::Ip] {
            for b in &model.area(id).blocks {
                if b.governor.as_ref().and_then(|g| g.rt()).is_some() {
                    let rt = format!("Rt_{}_{}", b.name, upper(id));
                    entries.push(entry(
                        rt.clone(),
                        self.rt,
                        Binding::BlockRt {
                            area: id,
                            block: b.name.clone(),
                        },
                    ));
                    penalties.push(Penalty::RtAtLeastR {
                        rt,
                        r: format!("R_{}_{}", b.name, upper(id)),
                        weight: self.rt_weight,
                    });
                }
            }
        }
        entries.push(entry("T", self.t, Binding::Tie));
        entries.push(entry("Tg", self.tg, Binding::SharedTg));
        ModelTemplate::new(model.clone(), ParamSpace::new(entries, penalties)?)
    }
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// Sum of squared frequency errors of both areas, Hz^2.
pub fn squared_error(model: &FrequencyTrace, recorded: &FrequencyTrace) -> f64 {
    let n = model.len().min(recorded.len());
    let mut acc = 0.0;
    for k in 0..n {
        let a = model.f_ip[k] - recorded.f_ip[k];
        let b = model.f_ce[k] - recorded.f_ce[k];
        acc += a * a + b * b;
    }
    acc
}

/// Evaluates candidate parameter vectors against one recorded event.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub event: &'a RecordedEvent,
    pub template: &'a ModelTemplate,
    pub sim: SimConfig,
}

impl<'a> Objective<'a> {
    pub fn new(event: &'a RecordedEvent, template: &'a ModelTemplate, sim_dt: f64) -> Result<Self> {
        let sim = SimConfig {
            dt: sim_dt,
            t_end: event.trace.span(),
            sample_dt: event.trace.sample_dt,
        };
        sim.validate()?;
        if sim.n_samples() != event.trace.len() {
            return Err(Error::Config(format!(
                "simulation grid has {} samples, recording has {}",
                sim.n_samples(),
                event.trace.len()
            )));
        }
        Ok(Objective { event, template, sim })
    }

    /// Model trace for `x` on the recorded grid.
    pub fn model_trace(&self, x: &[f64]) -> Result<FrequencyTrace> {
        let sys = self.template.instantiate(x)?;
        simulate(&sys, &self.event.dist, &self.sim)
    }

    /// Unpenalised cost. Invalid or divergent models cost [`SENTINEL_COST`].
    pub fn cost(&self, x: &[f64]) -> f64 {
        match self.model_trace(x) {
            Ok(tr) => {
                let c = squared_error(&tr, &self.event.trace);
                if c.is_finite() {
                    c.min(SENTINEL_COST)
                } else {
                    SENTINEL_COST
                }
            }
            Err(_) => SENTINEL_COST,
        }
    }

    pub fn penalized_cost(&self, x: &[f64]) -> f64 {
        self.cost(x) + self.template.space.penalty(x)
    }
}

// ---------------------------------------------------------------------------
// CDIW particle swarm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Initial value of the logistic chaos sequence, in (0, 1).
    pub chaos_seed: f64,
    pub rng_seed: u64,
    /// Stop once the best cost improves by less than this over
    /// `stall_iters` iterations. Zero disables early stopping.
    pub stop_tol: f64,
    pub stall_iters: usize,
    /// Velocity limit as a fraction of each parameter range.
    pub v_max_frac: f64,
    /// Share of the swarm placed near the initial guess, when one is given.
    pub seeded_fraction: f64,
    /// Standard deviation of the jitter around the guess, fraction of range.
    pub jitter_frac: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 40,
            max_iters: 300,
            c1: 2.0,
            c2: 2.0,
            w_max: 0.9,
            w_min: 0.4,
            chaos_seed: 0.7,
            rng_seed: 1,
            stop_tol: 0.0,
            stall_iters: 50,
            v_max_frac: 0.2,
            seeded_fraction: 0.25,
            jitter_frac: 0.05,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, r: &str| Err(Error::invalid(format!("pso.{f}"), r));
        if self.swarm_size < 10 {
            return bad("swarm_size", "must be at least 10");
        }
        if !(self.w_min > 0.0 && self.w_max > self.w_min && self.w_max.is_finite()) {
            return bad("w_max", "need w_max > w_min > 0");
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return bad("c1", "acceleration coefficients must be finite and >= 0");
        }
        let z = self.chaos_seed;
        if !(z > 0.0 && z < 1.0) || [0.25, 0.5, 0.75].contains(&z) {
            return bad("chaos_seed", "must lie in (0, 1) and avoid 0.25, 0.5 and 0.75");
        }
        if !(self.stop_tol >= 0.0) {
            return bad("stop_tol", "must be >= 0");
        }
        if !(self.v_max_frac > 0.0 && self.v_max_frac.is_finite()) {
            return bad("v_max_frac", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.seeded_fraction) {
            return bad("seeded_fraction", "must lie in [0, 1]");
        }
        if !(self.jitter_frac >= 0.0 && self.jitter_frac.is_finite()) {
            return bad("jitter_frac", "must be >= 0");
        }
        Ok(())
    }

    /// Inertia weights `w(0..max_iters)`.
    pub fn inertia_weights(&self) -> Vec<f64> {
        let k_max = self.max_iters as f64;
        let mut z = self.chaos_seed;
        (0..self.max_iters)
            .map(|k| {
                let w = (self.w_max - self.w_min) * (k_max - k as f64) / k_max * z + self.w_min;
                z = 4.0 * z * (1.0 - z);
                w
            })
            .collect()
    }
}

/// Optimiser output over a bare cost function.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best_x: Vec<f64>,
    pub best_cost: f64,
    /// Global-best cost after initialisation (index 0) and each iteration.
    pub history: Vec<f64>,
    /// Costs of the initial swarm.
    pub initial_costs: Vec<f64>,
    pub evaluations: usize,
}

/// Minimises `cost` over the box of `space`. `guess`, when given, is placed
/// as particle 0 with a share of the swarm jittered around it. Log-scaled
/// entries are searched, jittered and velocity-limited in `ln x`.
pub fn pso_optimize<F>(space: &ParamSpace, cfg: &PsoConfig, guess: Option<&[f64]>, cost: F) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    space.validate()?;
    cfg.validate()?;
    let dim = space.dim();
    if let Some(g) = guess {
        if !space.contains(g) {
            return Err(Error::Config("initial guess lies outside the bounds".into()));
        }
    }
    let lo: Vec<f64> = space.entries.iter().map(|e| e.to_search(e.lower)).collect();
    let hi: Vec<f64> = space.entries.iter().map(|e| e.to_search(e.upper)).collect();
    let to_x = |u: &[f64]| -> Vec<f64> { space.entries.iter().zip(u).map(|(e, &v)| e.from_search(v)).collect() };
    let guess: Option<Vec<f64>> = guess.map(|g| space.entries.iter().zip(g).map(|(e, &v)| e.to_search(v)).collect());
    let v_max: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| cfg.v_max_frac * (h - l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = cfg.swarm_size;

    let n_seeded = match &guess {
        Some(_) => ((cfg.seeded_fraction * n as f64).round() as usize).clamp(1, n),
        None => 0,
    };
    let mut pos: Vec<Vec<f64>> = Vec::with_capacity(n);
    for p in 0..n {
        let x: Vec<f64> = match &guess {
            Some(g) if p == 0 => g.to_vec(),
            Some(g) if p < n_seeded => (0..dim)
                .map(|j| {
                    let sd = cfg.jitter_frac * (hi[j] - lo[j]);
                    let v = if sd > 0.0 {
                        g[j] + Normal::new(0.0, sd).expect("positive sd").sample(&mut rng)
                    } else {
                        g[j]
                    };
                    v.clamp(lo[j], hi[j])
                })
                .collect(),
            _ => (0..dim).map(|j| rng.random_range(lo[j]..=hi[j])).collect(),
        };
        pos.push(x);
    }
    let mut vel: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|j| rng.random_range(-v_max[j]..=v_max[j])).collect())
        .collect();

    let eval = |pos: &[Vec<f64>]| -> Vec<f64> {
        pos.par_iter()
            .map(|x| {
                let c = cost(&to_x(x));
                if c.is_nan() {
                    SENTINEL_COST
                } else {
                    c
                }
            })
            .collect()
    };
    let mut costs = eval(&pos);
    let mut evaluations = n;
    let initial_costs = costs.clone();
    let mut pbest = pos.clone();
    let mut pbest_cost = costs.clone();
    let mut g = argmin(&pbest_cost);
    let mut gbest = pbest[g].clone();
    let mut gbest_cost = pbest_cost[g];
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    history.push(gbest_cost);

    for w in cfg.inertia_weights() {
        for p in 0..n {
            for j in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut v = w * vel[p][j]
                    + cfg.c1 * r1 * (pbest[p][j] - pos[p][j])
                    + cfg.c2 * r2 * (gbest[j] - pos[p][j]);
                v = v.clamp(-v_max[j], v_max[j]);
                let mut x = pos[p][j] + v;
                if x < lo[j] || x > hi[j] {
                    x = x.clamp(lo[j], hi[j]);
                    v = 0.0;
                }
                vel[p][j] = v;
                pos[p][j] = x;
            }
        }
        costs = eval(&pos);
        evaluations += n;
        for p in 0..n {
            if costs[p] < pbest_cost[p] {
                pbest_cost[p] = costs[p];
                pbest[p].clone_from(&pos[p]);
            }
        }
        g = argmin(&pbest_cost);
        if pbest_cost[g] < gbest_cost {
            gbest_cost = pbest_cost[g];
            gbest.clone_from(&pbest[g]);
        }
        history.push(gbest_cost);
        if cfg.stop_tol > 0.0 && history.len() > cfg.stall_iters {
            let past = history[history.len() - 1 - cfg.stall_iters];
            if past - gbest_cost < cfg.stop_tol {
                break;
            }
        }
    }
    Ok(PsoOutcome {
        best_x: to_x(&gbest),
        best_cost: gbest_cost,
        history,
        initial_costs,
        evaluations,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c < v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Estimation stages
// ---------------------------------------------------------------------------

/// Outcome of one estimation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub names: Vec<String>,
    pub best_params: Vec<f64>,
    /// Penalised cost at `best_params`.
    pub best_cost: f64,
    /// Unpenalised squared error at `best_params`, Hz^2.
    pub objective: f64,
    pub cost_history: Vec<f64>,
    pub active_penalties: Vec<String>,
    /// False when the cost surface carried no information about the parameters.
    pub identifiable: bool,
    pub rng_seed: u64,
    pub chaos_seed: f64,
    pub evaluations: usize,
    /// True when a least-squares refinement replaced the swarm's best point.
    #[serde(default)]
    pub refined: bool,
}

impl EstimationResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.best_params[i])
    }

    pub fn feasible(&self) -> bool {
        self.active_penalties.is_empty()
    }
}

impl fmt::Display for EstimationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in self.names.iter().zip(&self.best_params) {
            writeln!(f, "{n:>20} = {v:.6}")?;
        }
        write!(f, "cost = {:.6e} (objective {:.6e})", self.best_cost, self.objective)
    }
}

fn run_stage(
    event: &RecordedEvent,
    template: &ModelTemplate,
    cfg: &PsoConfig,
    sim_dt: f64,
    guess: Option<&[f64]>,
) -> Result<EstimationResult> {
    let objective = Objective::new(event, template, sim_dt)?;
    let out = pso_optimize(&template.space, cfg, guess, |x| objective.penalized_cost(x))?;
    let finite: Vec<f64> = out.initial_costs.iter().copied().filter(|c| *c < SENTINEL_COST).collect();
    let spread = match (
        finite.iter().copied().reduce(f64::min),
        finite.iter().copied().reduce(f64::max),
    ) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let identifiable = event.dist.dp != 0.0 && spread > 1e-12 * finite.iter().fold(1.0f64, |m, c| m.max(*c));
    Ok(EstimationResult {
        names: template.space.names(),
        objective: objective.cost(&out.best_x),
        active_penalties: template.space.active_penalties(&out.best_x),
        best_params: out.best_x,
        best_cost: out.best_cost,
        cost_history: out.history,
        identifiable,
        rng_seed: cfg.rng_seed,
        chaos_seed: cfg.chaos_seed,
        evaluations: out.evaluations,
        refined: false,
    })
}

/// Stage one: the eight-parameter equivalent model.
pub fn estimate_reduced(
    event: &RecordedEvent,
    template: &ModelTemplate,
    cfg: &PsoConfig,
    sim_dt: f64,
) -> Result<EstimationResult> {
    run_stage(event, template, cfg, sim_dt, None)
}

/// Stage two: the full model, with `init` as particle 0.
pub fn estimate_full(
    event: &RecordedEvent,
    template: &ModelTemplate,
    init: &[f64],
    cfg: &PsoConfig,
    sim_dt: f64,
) -> Result<EstimationResult> {
    run_stage(event, template, cfg, sim_dt, Some(init))
}

// ---------------------------------------------------------------------------
// Least-squares refinement
// ---------------------------------------------------------------------------

/// Forward-difference step in the unbounded coordinates.
const FD_STEP: f64 = 1e-6;

/// Residuals of both area traces in unbounded coordinates `z`: parameter `i`
/// is `lo + (hi - lo)(1 + sin z_i)/2` in search space, so every iterate stays
/// in bounds. Transient droops are lifted to their permanent droop.
struct Residuals<'o, 'a> {
    objective: &'o Objective<'a>,
    z: DVector<f64>,
    rt_pairs: Vec<(usize, usize)>,
    simulations: AtomicUsize,
}

impl Residuals<'_, '_> {
    fn params(&self, z: &DVector<f64>) -> Vec<f64> {
        let space = &self.objective.template.space;
        let mut x: Vec<f64> = space
            .entries
            .iter()
            .zip(z.iter())
            .map(|(e, &zi)| {
                let (lo, hi) = (e.to_search(e.lower), e.to_search(e.upper));
                e.from_search(lo + (hi - lo) * 0.5 * (1.0 + zi.sin()))
            })
            .collect();
        for &(rt, r) in &self.rt_pairs {
            x[rt] = x[rt].max(x[r]);
        }
        x
    }

    fn residuals_at(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        self.simulations.fetch_add(1, Ordering::Relaxed);
        let model = self.objective.model_trace(&self.params(z)).ok()?;
        let rec = &self.objective.event.trace;
        let r: Vec<f64> = (0..rec.len())
            .flat_map(|k| [model.f_ip[k] - rec.f_ip[k], model.f_ce[k] - rec.f_ce[k]])
            .collect();
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Residuals<'_, '_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, z: &DVector<f64>) {
        self.z.copy_from(z);
    }

    fn params(&self) -> DVector<f64> {
        self.z.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.residuals_at(&self.z)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let r0 = self.residuals_at(&self.z)?;
        let cols: Option<Vec<DVector<f64>>> = (0..self.z.len())
            .into_par_iter()
            .map(|j| {
                let mut z = self.z.clone();
                z[j] += FD_STEP;
                self.residuals_at(&z).map(|r| (r - &r0) / FD_STEP)
            })
            .collect();
        Some(DMatrix::from_columns(&cols?))
    }
}

/// Levenberg-Marquardt on the unpenalised squared error, started from `x0`.
/// Returns the refined point and the number of simulations run.
pub fn refine_least_squares(objective: &Objective, x0: &[f64]) -> Result<(Vec<f64>, usize)> {
    let space = &objective.template.space;
    if x0.len() != space.dim() {
        return Err(Error::invalid("x0", format!("expected {} values, got {}", space.dim(), x0.len())));
    }
    let rt_pairs = space
        .penalties
        .iter()
        .filter_map(|p| match p {
            Penalty::RtAtLeastR { rt, r, .. } => Some((space.index_of(rt)?, space.index_of(r)?)),
            Penalty::Band { .. } => None,
        })
        .collect();
    let z0 = space.entries.iter().zip(x0).map(|(e, &x)| {
        let (lo, hi) = (e.to_search(e.lower), e.to_search(e.upper));
        let u = ((e.to_search(x.clamp(e.lower, e.upper)) - lo) / (hi - lo)).clamp(0.0, 1.0);
        (2.0 * u - 1.0).asin()
    });
    let problem = Residuals {
        objective,
        z: DVector::from_iterator(space.dim(), z0),
        rt_pairs,
        simulations: AtomicUsize::new(0),
    };
    let (problem, _) = LevenbergMarquardt::new().minimize(problem);
    Ok((problem.params(&problem.z), problem.simulations.into_inner()))
}

/// Refines a full-stage result and keeps the refined point when it lowers
/// the penalised cost.
pub fn refine_result(
    event: &RecordedEvent,
    template: &ModelTemplate,
    result: &EstimationResult,
    sim_dt: f64,
) -> Result<EstimationResult> {
    let objective = Objective::new(event, template, sim_dt)?;
    let (x, evals) = refine_least_squares(&objective, &result.best_params)?;
    let mut out = result.clone();
    out.evaluations += evals;
    let cost = objective.penalized_cost(&x);
    if cost < result.best_cost {
        out.objective = objective.cost(&x);
        out.best_cost = cost;
        out.active_penalties = template.space.active_penalties(&x);
        out.best_params = x;
        out.refined = true;
    }
    Ok(out)
}

/// Droops of technologies sharing an area's equivalent gain `1/r_area` in
/// proportion to their dispatch.
pub fn split_droop(r_area: f64, dispatch: &[f64]) -> Result<Vec<f64>> {
    if !(r_area.is_finite() && r_area > 0.0) {
        return Err(Error::invalid("R_area", "must be positive"));
    }
    if dispatch.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("dispatch", "must be finite and >= 0"));
    }
    let total: f64 = dispatch.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("dispatch", "no dispatch among governed technologies"));
    }
    Ok(dispatch
        .iter()
        .map(|&p| if p > 0.0 { r_area * total / p } else { f64::INFINITY })
        .collect())
}

/// Starting point of the full stage from a reduced fit: inertia, damping, tie
/// coefficient and governor time constant carried over, the equivalent droop
/// of each area split over its governed blocks by dispatch share, and hydro
/// transient droops at five times the steady-state value. Values are clamped
/// into the full-stage bounds.
pub fn allocate_droops(
    reduced: &EstimationResult,
    mix: &PerArea<DispatchSnapshot>,
    full: &ModelTemplate,
) -> Result<Vec<f64>> {
    let value = |n: &str| {
        reduced
            .get(n)
            .ok_or_else(|| Error::invalid(format!("reduced.{n}"), "missing from reduced result"))
    };
    let mut droops: Vec<(AreaId, String, f64)> = Vec::new();
    for id in AreaId::ALL {
        let r_area = value(&format!("R_{}", upper(id)))?;
        let blocks: Vec<&GenerationBlock> = full.system.area(id).blocks.iter().filter(|b| b.governor.is_some()).collect();
        let snap = mix.get(id);
        let dispatch: Vec<f64> = blocks
            .iter()
            .map(|b| b.technologies.iter().map(|&t| snap.pg(t)).sum())
            .collect();
        let r = split_droop(r_area, &dispatch).map_err(|e| match e {
            Error::Invalid { reason, .. } => Error::invalid(format!("mix.{id}"), reason),
            other => other,
        })?;
        for (b, r) in blocks.iter().zip(r) {
            droops.push((id, b.name.clone(), r));
        }
    }
    let droop_of = |id: AreaId, block: &str| {
        droops
            .iter()
            .find(|(a, b, _)| *a == id && b == block)
            .map(|(_, _, r)| *r)
            .expect("governed block")
    };
    let mut x = Vec::with_capacity(full.space.dim());
    for e in &full.space.entries {
        let v = match &e.binding {
            Binding::AreaH { area } => value(&format!("H_{}", upper(*area)))?,
            Binding::AreaD { area } => value(&format!("D_{}", upper(*area)))?,
            Binding::Tie => value("T")?,
            Binding::SharedTg => value("Tg")?,
            Binding::BlockDroop { area, block } => droop_of(*area, block),
            Binding::BlockRt { area, block } => 5.0 * droop_of(*area, block),
        };
        x.push(v);
    }
    full.space.clamp(&mut x);
    Ok(x)
}

/// Result of the two-stage procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageResult {
    pub reduced: EstimationResult,
    pub init: Vec<f64>,
    pub full: EstimationResult,
    pub model: TwoAreaSystem,
}

/// Runs both stages. The full stage uses `cfg` with `rng_seed + 1`.
pub fn estimate_both(
    event: &RecordedEvent,
    setup: &EstimationSetup,
    structure: &TwoAreaSystem,
    cfg: &PsoConfig,
) -> Result<TwoStageResult> {
    let mix = event
        .mix_at_event
        .as_ref()
        .ok_or_else(|| Error::Config("event has no dispatch snapshot; needed to allocate droops".into()))?;
    let reduced_t = setup.reduced_template(structure.base)?;
    let reduced = estimate_reduced(event, &reduced_t, cfg, setup.sim_dt)?;
    let full_t = setup.full_template(structure)?;
    let init = allocate_droops(&reduced, mix, &full_t)?;
    let cfg_full = PsoConfig {
        rng_seed: cfg.rng_seed.wrapping_add(1),
        ..*cfg
    };
    let mut full = estimate_full(event, &full_t, &init, &cfg_full, setup.sim_dt)?;
    if setup.refine {
        full = refine_result(event, &full_t, &full, setup.sim_dt)?;
    }
    let model = full_t.instantiate(&full.best_params)?;
    Ok(TwoStageResult {
        reduced,
        init,
        full,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_space(dim: usize) -> ParamSpace {
        ParamSpace::new(
            (0..dim)
                .map(|i| ParamEntry {
                    name: format!("x{i}"),
                    lower: -5.0,
                    upper: 5.0,
                    binding: Binding::Tie,
                    log_scale: false,
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn chaotic_weights_stay_in_range() {
        let cfg = PsoConfig::default();
        let w = cfg.inertia_weights();
        assert_eq!(w.len(), 300);
        assert!(w.iter().all(|&v| v >= cfg.w_min && v <= cfg.w_max));
        assert!((w[0] - (0.5 * 0.7 + 0.4)).abs() < 1e-15);
        assert!((w[1] - (0.5 * 299.0 / 300.0 * 0.84 + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_returns_initial_best() {
        let cfg = PsoConfig {
            max_iters: 0,
            ..PsoConfig::default()
        };
        let out = pso_optimize(&sphere_space(3), &cfg, None, |x| x.iter().map(|v| v * v).sum()).unwrap();
        assert_eq!(out.history.len(), 1);
        let min = out.initial_costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_cost, min);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            PsoConfig {
                swarm_size: 5,
                ..PsoConfig::default()
            },
            PsoConfig {
                w_min: 0.95,
                ..PsoConfig::default()
            },
            PsoConfig {
                chaos_seed: 0.5,
                ..PsoConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn penalty_arithmetic() {
        let space = ParamSpace::new(
            vec![
                ParamEntry {
                    name: "R".into(),
                    lower: 0.01,
                    upper: 0.5,
                    binding: Binding::Tie,
                    log_scale: false,
                },
                ParamEntry {
                    name: "Rt".into(),
                    lower: 0.01,
                    upper: 1.5,
                    binding: Binding::Tie,
                    log_scale: false,
                },
            ],
            vec![Penalty::RtAtLeastR {
                rt: "Rt".into(),
                r: "R".into(),
                weight: 100.0,
            }],
        )
        .unwrap();
        assert!((space.penalty(&[0.2, 0.19]) - 1.0).abs() < 1e-12);
        assert_eq!(space.penalty(&[0.2, 0.2]), 0.0);
        assert_eq!(space.active_penalties(&[0.2, 0.19]), vec!["Rt >= R".to_owned()]);
    }

    #[test]
    fn droop_split_examples() {
        let r = split_droop(0.05, &[1.0, 1.0]).unwrap();
        assert!((r[0] - 0.1).abs() < 1e-15 && (r[1] - 0.1).abs() < 1e-15);
        assert_eq!(split_droop(0.05, &[2.0]).unwrap(), vec![0.05]);
        let r = split_droop(0.05, &[3.0, 1.0]).unwrap();
        assert!((r[0] - 0.2 / 3.0).abs() < 1e-15 && (r[1] - 0.2).abs() < 1e-15);
        assert!(split_droop(0.05, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn reduced_template_has_eight_parameters() {
        let t = EstimationSetup::default().reduced_template(SystemBase::default()).unwrap();
        assert_eq!(
            t.space.names(),
            ["H_CE", "H_IP", "D_CE", "D_IP", "R_CE", "R_IP", "Tg", "T"]
        );
        let x = [5.0, 4.0, 1.0, 1.5, 0.05, 0.08, 0.3, 0.8];
        let sys = t.instantiate(&x).unwrap();
        assert_eq!(t.extract(&sys).unwrap(), x.to_vec());
        assert_eq!(sys.area_ip.h_load, 4.0);
    }
}
