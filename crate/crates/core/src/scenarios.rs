//! Rescaling of the calibrated reference model to other dispatch conditions,
//! scenario trajectories, synchronous-condenser mitigation and sweeps.
//!
//! The reference model characterises the system at the calibration instant
//! `o`. For another instant `t` each technology `i` is adjusted as
//!
//! ```text
//! R_ti = R_oi * Pg_oi / Pg_ti
//! D_t  = D_o  * Pd_t / Pd_o
//! H_ti = H_oi * Pg_ti / Pg_oi,   H_t = Hload_o + sum_i H_ti
//! ```
//!
//! where `H_o = Hload_o + sum_i H_oi` is split using typical per-technology
//! inertia constants. Tie-line coefficient and governor time constants are
//! kept at their reference values.

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::model::{AreaId, AreaModel, Disturbance, Technology, TwoAreaSystem};
use crate::simulator::{simulate, SimConfig};

/// Per-technology generation and load of one area at one instant. Powers in GW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSnapshot {
    pub id: String,
    pub area: AreaId,
    pub generation: BTreeMap<Technology, f64>,
    pub load: f64,
}

impl DispatchSnapshot {
    pub fn pg(&self, tech: Technology) -> f64 {
        self.generation.get(&tech).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (tech, &pg) in &self.generation {
            if !(pg.is_finite() && pg >= 0.0) {
                return Err(Error::invalid(
                    format!("{}.generation.{tech}", self.id),
                    "generation must be finite and >= 0",
                ));
            }
        }
        if !(self.load.is_finite() && self.load > 0.0) {
            return Err(Error::invalid(format!("{}.load", self.id), "load must be positive"));
        }
        Ok(())
    }
}

/// Pair of values indexed by area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerArea<T> {
    pub ip: T,
    pub ce: T,
}

impl<T> PerArea<T> {
    pub fn get(&self, area: AreaId) -> &T {
        match area {
            AreaId::Ip => &self.ip,
            AreaId::Ce => &self.ce,
        }
    }

    pub fn get_mut(&mut self, area: AreaId) -> &mut T {
        match area {
            AreaId::Ip => &mut self.ip,
            AreaId::Ce => &mut self.ce,
        }
    }
}

/// Typical inertia constants on own rating, s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypicalInertia(pub BTreeMap<Technology, f64>);

impl Default for TypicalInertia {
    fn default() -> Self {
        TypicalInertia(BTreeMap::from([
            (Technology::Nuclear, 6.0),
            (Technology::Coal, 4.0),
            (Technology::Ccgt, 5.0),
            (Technology::Hydro, 3.0),
            (Technology::SmallSteam, 3.0),
        ]))
    }
}

/// Droop of a technology at dispatch `pg_ti`, or `None` when the technology is
/// not dispatched and its loop is removed.
pub fn scale_droop(r_oi: f64, pg_oi: f64, pg_ti: f64) -> Result<Option<f64>> {
    if !(pg_oi > 0.0) {
        return Err(Error::invalid("pg_oi", "reference dispatch must be positive"));
    }
    if !(pg_ti >= 0.0) {
        return Err(Error::invalid("pg_ti", "dispatch must be >= 0"));
    }
    if pg_ti == 0.0 {
        return Ok(None);
    }
    Ok(Some(r_oi * (pg_oi / pg_ti)))
}

pub fn scale_damping(d_o: f64, pd_o: f64, pd_t: f64) -> Result<f64> {
    if !(pd_o > 0.0) {
        return Err(Error::invalid("pd_o", "reference load must be positive"));
    }
    if !(pd_t > 0.0) {
        return Err(Error::invalid("pd_t", "load must be positive"));
    }
    Ok(d_o * (pd_t / pd_o))
}

/// Generation inertia of technology `i` at dispatch `pg_ti`.
pub fn scale_inertia(h_oi: f64, pg_oi: f64, pg_ti: f64) -> f64 {
    if pg_ti == 0.0 {
        return 0.0;
    }
    h_oi * (pg_ti / pg_oi)
}

/// Decomposition of an area's reference inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertiaSplit {
    pub per_technology: BTreeMap<Technology, f64>,
    pub h_load: f64,
}

/// Splits `h_o` into per-technology parts `typical_i * pg_oi / s_base` and the
/// load remainder.
pub fn split_inertia(
    h_o: f64,
    mix_o: &DispatchSnapshot,
    typical: &TypicalInertia,
    s_base: f64,
) -> Result<InertiaSplit> {
    let mut per_technology = BTreeMap::new();
    for (&tech, &pg) in &mix_o.generation {
        if !tech.is_synchronous() || pg == 0.0 {
            continue;
        }
        let h_typ = typical.0.get(&tech).ok_or_else(|| {
            Error::invalid(
                format!("typical_h.{tech}"),
                "no typical inertia for a dispatched synchronous technology",
            )
        })?;
        per_technology.insert(tech, h_typ * pg / s_base);
    }
    let h_load = h_o - per_technology.values().sum::<f64>();
    if h_load < 0.0 {
        return Err(Error::invalid(
            format!("{}.h", mix_o.area),
            format!("typical inertia table inconsistent with estimated H (load share {h_load:.4} s)"),
        ));
    }
    Ok(InertiaSplit {
        per_technology,
        h_load,
    })
}

/// Calibrated model together with the dispatch it was calibrated at.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceAnchor {
    pub params_o: TwoAreaSystem,
    pub mix_o: PerArea<DispatchSnapshot>,
    pub h_split_o: PerArea<InertiaSplit>,
    pub typical_h: TypicalInertia,
    /// Scale the load inertia share with load instead of holding it constant.
    pub load_inertia_scales: bool,
}

fn block_dispatch(techs: &[Technology], snap: &DispatchSnapshot) -> f64 {
    techs.iter().map(|&t| snap.pg(t)).sum()
}

fn check_mapping(area: &AreaModel, snap: &DispatchSnapshot) -> Result<()> {
    for (&tech, &pg) in &snap.generation {
        if tech.is_synchronous() && pg > 0.0 && !area.blocks.iter().any(|b| b.technologies.contains(&tech)) {
            return Err(Error::invalid(
                format!("{}.generation.{tech}", snap.id),
                format!("no block of area {} represents this technology", area.id),
            ));
        }
    }
    Ok(())
}

impl ReferenceAnchor {
    /// Splits the calibrated inertia of each area and installs the split and
    /// the reference dispatch into the model blocks, so that applying
    /// `mix_o` reproduces the installed model exactly.
    pub fn new(
        model: TwoAreaSystem,
        mix_o: PerArea<DispatchSnapshot>,
        typical_h: TypicalInertia,
    ) -> Result<Self> {
        let mut params_o = model;
        let s_base = params_o.base.s_base;
        let mut splits = Vec::with_capacity(2);
        for id in AreaId::ALL {
            let mix = mix_o.get(id);
            mix.validate()?;
            if mix.area != id {
                return Err(Error::invalid(
                    format!("{}.area", mix.id),
                    format!("snapshot for area {} given as {id}", mix.area),
                ));
            }
            let area = params_o.area_mut(id);
            check_mapping(area, mix)?;
            let split = split_inertia(area.h, mix, &typical_h, s_base)?;
            for block in &mut area.blocks {
                if block.technologies.is_empty() {
                    return Err(Error::invalid(
                        format!("area_{id}.{}.technologies", block.name),
                        "block is not mapped to any dispatch technology",
                    ));
                }
                let pg = block_dispatch(&block.technologies, mix);
                if pg <= 0.0 {
                    return Err(Error::invalid(
                        format!("area_{id}.{}.pg", block.name),
                        "block has zero dispatch in the reference mix",
                    ));
                }
                block.pg = pg / s_base;
                block.h_contrib = block
                    .technologies
                    .iter()
                    .map(|t| split.per_technology.get(t).copied().unwrap_or(0.0))
                    .sum();
            }
            area.h_load = split.h_load;
            area.h = split.h_load + area.generation_inertia();
            splits.push(split);
        }
        params_o.validate()?;
        let ce = splits.pop().unwrap();
        let ip = splits.pop().unwrap();
        Ok(ReferenceAnchor {
            params_o,
            mix_o,
            h_split_o: PerArea { ip, ce },
            typical_h,
            load_inertia_scales: false,
        })
    }
}

/// Adjusts the reference model to the dispatch `snap` of both areas.
pub fn apply_snapshot(anchor: &ReferenceAnchor, snap: &PerArea<DispatchSnapshot>) -> Result<TwoAreaSystem> {
    let mut sys = anchor.params_o.clone();
    let s_base = sys.base.s_base;
    for id in AreaId::ALL {
        let snap_t = snap.get(id);
        snap_t.validate()?;
        let mix_o = anchor.mix_o.get(id);
        let split = anchor.h_split_o.get(id);
        let area = sys.area_mut(id);
        check_mapping(area, snap_t)?;

        area.d = scale_damping(area.d, mix_o.load, snap_t.load)?;
        let mut blocks = Vec::with_capacity(area.blocks.len());
        for mut block in std::mem::take(&mut area.blocks) {
            let pg_o = block_dispatch(&block.technologies, mix_o);
            let pg_t = block_dispatch(&block.technologies, snap_t);
            if pg_t == 0.0 {
                continue;
            }
            if let Some(gov) = block.governor.as_mut() {
                let r = scale_droop(gov.r(), pg_o, pg_t)?
                    .expect("dispatched block keeps its droop loop");
                // transient droop is on the same plant base, so it moves with r
                if let Some(rt) = gov.rt() {
                    gov.set_rt(rt * (pg_o / pg_t));
                }
                gov.set_r(r);
            }
            block.h_contrib = block
                .technologies
                .iter()
                .map(|&tech| {
                    let pg_oi = mix_o.pg(tech);
                    let pg_ti = snap_t.pg(tech);
                    match split.per_technology.get(&tech) {
                        Some(&h_oi) if pg_oi > 0.0 => scale_inertia(h_oi, pg_oi, pg_ti),
                        // not dispatched at the reference instant: H_oi / Pg_oi is
                        // the typical constant over the base
                        _ => anchor.typical_h.0.get(&tech).copied().unwrap_or(0.0) * pg_ti / s_base,
                    }
                })
                .sum();
            block.pg = pg_t / s_base;
            blocks.push(block);
        }
        area.blocks = blocks;
        area.h_load = if anchor.load_inertia_scales {
            split.h_load * (snap_t.load / mix_o.load)
        } else {
            split.h_load
        };
        area.h = area.h_load + area.generation_inertia();
    }
    sys.validate()?;
    Ok(sys)
}

/// Synchronous condensers added to the Iberian area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationSpec {
    pub count: u32,
    /// Inertia constant on own rating, s.
    pub h_each: f64,
    /// Rating of each unit, GVA.
    pub rating_each: f64,
    pub online_from: i32,
}

impl Default for MitigationSpec {
    fn default() -> Self {
        MitigationSpec {
            count: 3,
            h_each: 4.0,
            rating_each: 0.25,
            online_from: 2025,
        }
    }
}

impl MitigationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_each.is_finite() && self.h_each >= 0.0) {
            return Err(Error::invalid("mitigation.h_each", "must be >= 0"));
        }
        if !(self.rating_each.is_finite() && self.rating_each >= 0.0) {
            return Err(Error::invalid("mitigation.rating_each", "must be >= 0"));
        }
        Ok(())
    }

    /// Added inertia on the common base, s.
    pub fn added_inertia(&self, s_base: f64) -> f64 {
        f64::from(self.count) * self.h_each * self.rating_each / s_base
    }
}

/// Adds the condensers' inertia to the Iberian area when they are online in
/// `year`. Condensers carry no governor and do not change damping; their
/// inertia is booked in the non-generation share so the block list keeps only
/// dispatchable technologies.
pub fn apply_mitigation(sys: &TwoAreaSystem, spec: &MitigationSpec, year: i32) -> TwoAreaSystem {
    let mut out = sys.clone();
    if spec.count == 0 || year < spec.online_from {
        return out;
    }
    let added = spec.added_inertia(out.base.s_base);
    out.area_ip.h += added;
    out.area_ip.h_load += added;
    out
}

/// Reduction of the Iberian small steam turbine fleet after 2030, reaching half
/// of its value in 2040.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallSteamReduction {
    pub from_year: i32,
    pub to_year: i32,
    pub final_fraction: f64,
}

impl Default for SmallSteamReduction {
    fn default() -> Self {
        SmallSteamReduction {
            from_year: 2030,
            to_year: 2040,
            final_fraction: 0.5,
        }
    }
}

impl SmallSteamReduction {
    pub fn factor(&self, year: i32) -> f64 {
        if year <= self.from_year {
            1.0
        } else if year >= self.to_year {
            self.final_fraction
        } else {
            let w = f64::from(year - self.from_year) / f64::from(self.to_year - self.from_year);
            1.0 - w * (1.0 - self.final_fraction)
        }
    }

    pub fn apply(&self, snap: &DispatchSnapshot, year: i32) -> DispatchSnapshot {
        let mut out = snap.clone();
        if let Some(pg) = out.generation.get_mut(&Technology::SmallSteam) {
            *pg *= self.factor(year);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Variants {
    #[serde(default)]
    pub small_steam_halving: bool,
    #[serde(default)]
    pub mitigation: Option<MitigationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPoint {
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub month: Option<u8>,
    pub ip: DispatchSnapshot,
    pub ce: DispatchSnapshot,
}

impl ScenarioPoint {
    pub fn label(&self) -> String {
        match self.month {
            Some(m) => format!("{}-{m:02}", self.year),
            None => self.year.to_string(),
        }
    }

    fn key(&self) -> (i32, u8) {
        (self.year, self.month.unwrap_or(0))
    }

    pub fn dispatch(&self) -> PerArea<DispatchSnapshot> {
        PerArea {
            ip: self.ip.clone(),
            ce: self.ce.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrajectory {
    pub name: String,
    pub snapshots: Vec<ScenarioPoint>,
    pub variants: Variants,
}

impl ScenarioTrajectory {
    pub fn new(name: impl Into<String>, snapshots: Vec<ScenarioPoint>, variants: Variants) -> Result<Self> {
        let name = name.into();
        for pair in snapshots.windows(2) {
            if pair[1].key() <= pair[0].key() {
                return Err(Error::invalid(
                    format!("{name}.snapshots"),
                    format!("snapshots not strictly ordered in time at {}", pair[1].label()),
                ));
            }
        }
        for s in &snapshots {
            s.ip.validate()?;
            s.ce.validate()?;
        }
        if let Some(m) = &variants.mitigation {
            m.validate()?;
        }
        Ok(ScenarioTrajectory {
            name,
            snapshots,
            variants,
        })
    }

    /// Name with variant suffixes, used for output file stems.
    pub fn variant_id(&self) -> String {
        let mut id = self.name.clone();
        if self.variants.small_steam_halving {
            id.push_str("+halved-small-steam");
        }
        if self.variants.mitigation.is_some_and(|m| m.count > 0) {
            id.push_str("+sc");
        }
        id
    }
}

/// One row of a sweep: a snapshot, an area, and its metrics or the error that
/// prevented them.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario_id: String,
    pub year: i32,
    pub month: Option<u8>,
    pub area: AreaId,
    pub outcome: std::result::Result<MetricsReport, String>,
}

/// Model of one trajectory point with the trajectory's variants applied.
pub fn snapshot_system(anchor: &ReferenceAnchor, traj: &ScenarioTrajectory, point: &ScenarioPoint) -> Result<TwoAreaSystem> {
    let mut dispatch = point.dispatch();
    if traj.variants.small_steam_halving {
        dispatch.ip = SmallSteamReduction::default().apply(&dispatch.ip, point.year);
    }
    let sys = apply_snapshot(anchor, &dispatch)?;
    Ok(match &traj.variants.mitigation {
        Some(spec) => apply_mitigation(&sys, spec, point.year),
        None => sys,
    })
}

fn run_point(
    anchor: &ReferenceAnchor,
    traj: &ScenarioTrajectory,
    point: &ScenarioPoint,
    dist: &Disturbance,
    cfg: &SimConfig,
    tail: Duration,
) -> Result<PerArea<MetricsReport>> {
    let sys = snapshot_system(anchor, traj, point)?;
    let trace = simulate(&sys, dist, cfg)?;
    Ok(PerArea {
        ip: metrics::report(&trace, AreaId::Ip, &metrics::STANDARD_WINDOWS_MS, tail)?,
        ce: metrics::report(&trace, AreaId::Ce, &metrics::STANDARD_WINDOWS_MS, tail)?,
    })
}

/// Simulates `dist` on every snapshot of `traj`. Snapshots run concurrently;
/// rows come back in snapshot order, IP before CE. A failing snapshot yields
/// error rows and the sweep continues.
pub fn sweep(
    anchor: &ReferenceAnchor,
    traj: &ScenarioTrajectory,
    dist: &Disturbance,
    cfg: &SimConfig,
) -> Vec<SweepRow> {
    let tail = metrics::DEFAULT_TAIL.min(Duration::from_secs_f64(cfg.t_end.max(0.0)));
    let results: Vec<_> = traj
        .snapshots
        .par_iter()
        .map(|p| run_point(anchor, traj, p, dist, cfg, tail))
        .collect();
    let mut rows = Vec::with_capacity(2 * results.len());
    for (point, res) in traj.snapshots.iter().zip(results) {
        let scenario_id = format!("{}/{}", traj.variant_id(), point.label());
        for area in AreaId::ALL {
            rows.push(SweepRow {
                scenario_id: scenario_id.clone(),
                year: point.year,
                month: point.month,
                area,
                outcome: match &res {
                    Ok(m) => Ok(m.get(area).clone()),
                    Err(e) => Err(e.to_string()),
                },
            });
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Keyframed trajectory description
// ---------------------------------------------------------------------------

/// Generation shares and load of one area at a keyframe year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixShares {
    /// Load, GW.
    pub load: f64,
    /// Fraction of load served by each technology.
    pub shares: BTreeMap<Technology, f64>,
    /// Technology covering whatever the others leave unserved.
    #[serde(default)]
    pub residual: Option<Technology>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub year: i32,
    pub ip: MixShares,
    pub ce: MixShares,
}

/// Seasonal modulation of one area's mix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonalFactors {
    #[serde(default = "one")]
    pub load_factor: f64,
    #[serde(default)]
    pub share_factors: BTreeMap<Technology, f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthProfile {
    pub month: u8,
    pub ip: SeasonalFactors,
    pub ce: SeasonalFactors,
}

fn lerp_mix(a: &MixShares, b: &MixShares, w: f64) -> MixShares {
    let mut shares = BTreeMap::new();
    for tech in a.shares.keys().chain(b.shares.keys()) {
        let sa = a.shares.get(tech).copied().unwrap_or(0.0);
        let sb = b.shares.get(tech).copied().unwrap_or(0.0);
        shares.insert(*tech, sa + w * (sb - sa));
    }
    MixShares {
        load: a.load + w * (b.load - a.load),
        shares,
        residual: a.residual.or(b.residual),
    }
}

fn realise(mix: &MixShares, season: Option<&SeasonalFactors>, id: String, area: AreaId) -> DispatchSnapshot {
    let load = mix.load * season.map_or(1.0, |s| s.load_factor);
    let mut shares: BTreeMap<Technology, f64> = mix
        .shares
        .iter()
        .map(|(&t, &s)| {
            let f = season.and_then(|s| s.share_factors.get(&t)).copied().unwrap_or(1.0);
            (t, s * f)
        })
        .collect();
    if let Some(res) = mix.residual {
        let others: f64 = shares.iter().filter(|(t, _)| **t != res).map(|(_, s)| s).sum();
        shares.insert(res, (1.0 - others).max(0.0));
    }
    DispatchSnapshot {
        id,
        area,
        generation: shares.into_iter().map(|(t, s)| (t, s * load)).collect(),
        load,
    }
}

/// Expands keyframes into one snapshot per year (and per month when month
/// profiles are given), interpolating shares and load linearly between
/// keyframes.
pub fn expand_keyframes(name: &str, keyframes: &[Keyframe], months: &[MonthProfile]) -> Result<Vec<ScenarioPoint>> {
    if keyframes.is_empty() {
        return Ok(Vec::new());
    }
    for pair in keyframes.windows(2) {
        if pair[1].year <= pair[0].year {
            return Err(Error::invalid(
                format!("{name}.keyframes"),
                "keyframe years must be strictly increasing",
            ));
        }
    }
    for (i, m) in months.iter().enumerate() {
        if !(1..=12).contains(&m.month) {
            return Err(Error::invalid(format!("{name}.months[{i}].month"), "month must be 1..=12"));
        }
    }
    let first = keyframes[0].year;
    let last = keyframes[keyframes.len() - 1].year;
    let mut points = Vec::new();
    for year in first..=last {
        let seg = keyframes
            .windows(2)
            .find(|p| year >= p[0].year && year <= p[1].year);
        let (ip, ce) = match seg {
            Some(p) => {
                let w = f64::from(year - p[0].year) / f64::from(p[1].year - p[0].year);
                (lerp_mix(&p[0].ip, &p[1].ip, w), lerp_mix(&p[0].ce, &p[1].ce, w))
            }
            None => (keyframes[0].ip.clone(), keyframes[0].ce.clone()),
        };
        if months.is_empty() {
            points.push(ScenarioPoint {
                year,
                month: None,
                ip: realise(&ip, None, format!("{name}-{year}-ip"), AreaId::Ip),
                ce: realise(&ce, None, format!("{name}-{year}-ce"), AreaId::Ce),
            });
        } else {
            for m in months {
                points.push(ScenarioPoint {
                    year,
                    month: Some(m.month),
                    ip: realise(&ip, Some(&m.ip), format!("{name}-{year}-{:02}-ip", m.month), AreaId::Ip),
                    ce: realise(&ce, Some(&m.ce), format!("{name}-{year}-{:02}-ce", m.month), AreaId::Ce),
                });
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(gen: &[(Technology, f64)], load: f64) -> DispatchSnapshot {
        DispatchSnapshot {
            id: "s".into(),
            area: AreaId::Ip,
            generation: gen.iter().copied().collect(),
            load,
        }
    }

    #[test]
    fn droop_scaling() {
        assert_eq!(scale_droop(0.05, 4.0, 2.0).unwrap(), Some(0.1));
        assert_eq!(scale_droop(0.05, 4.0, 4.0).unwrap(), Some(0.05));
        assert_eq!(scale_droop(0.05, 4.0, 0.0).unwrap(), None);
        assert!(scale_droop(0.05, 0.0, 1.0).is_err());
    }

    #[test]
    fn damping_scaling() {
        assert_eq!(scale_damping(1.0, 30.0, 30.0).unwrap(), 1.0);
        assert!((scale_damping(1.0, 30.0, 45.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(scale_damping(1.0, 30.0, 0.0).is_err());
    }

    #[test]
    fn inertia_scaling() {
        assert_eq!(scale_inertia(2.4, 4.0, 4.0), 2.4);
        assert_eq!(scale_inertia(2.4, 4.0, 0.0), 0.0);
        assert_eq!(scale_inertia(2.4, 4.0, 8.0), 4.8);
    }

    #[test]
    fn split_examples() {
        let typical = TypicalInertia::default();
        // 6 s * 5 GW / 10 GVA + 4 s * 3 GW / 10 GVA = 3.0 + 1.2 = 4.2
        let mix = snap(&[(Technology::Nuclear, 5.0), (Technology::Coal, 3.0), (Technology::Wind, 9.0)], 30.0);
        let s = split_inertia(5.0, &mix, &typical, 10.0).unwrap();
        assert!((s.h_load - 0.8).abs() < 1e-12);
        assert_eq!(s.per_technology.len(), 2);

        let empty = snap(&[], 30.0);
        assert_eq!(split_inertia(5.0, &empty, &typical, 10.0).unwrap().h_load, 5.0);

        let heavy = snap(&[(Technology::Nuclear, 5.0), (Technology::Coal, 6.25)], 30.0);
        let err = split_inertia(5.0, &heavy, &typical, 10.0).unwrap_err().to_string();
        assert!(err.contains("typical inertia table inconsistent with estimated H"), "{err}");
    }

    #[test]
    fn mitigation_gating() {
        let spec = MitigationSpec {
            count: 3,
            h_each: 4.0,
            rating_each: 1.0,
            online_from: 2025,
        };
        // 4 s * 1 GVA / 10 GVA = 0.4 s per unit
        assert!((spec.added_inertia(10.0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn small_steam_factor() {
        let r = SmallSteamReduction::default();
        assert_eq!(r.factor(2025), 1.0);
        assert_eq!(r.factor(2030), 1.0);
        assert!((r.factor(2035) - 0.75).abs() < 1e-15);
        assert_eq!(r.factor(2040), 0.5);
    }

    #[test]
    fn keyframes_interpolate_and_fill_residual() {
        let mix = |wind: f64, load: f64| MixShares {
            load,
            shares: BTreeMap::from([(Technology::Wind, wind), (Technology::Hydro, 0.1)]),
            residual: Some(Technology::Ccgt),
        };
        let kf = vec![
            Keyframe { year: 2020, ip: mix(0.2, 30.0), ce: mix(0.2, 300.0) },
            Keyframe { year: 2030, ip: mix(0.6, 40.0), ce: mix(0.4, 300.0) },
        ];
        let pts = expand_keyframes("t", &kf, &[]).unwrap();
        assert_eq!(pts.len(), 11);
        let p = &pts[5];
        assert_eq!(p.year, 2025);
        assert!((p.ip.load - 35.0).abs() < 1e-12);
        assert!((p.ip.pg(Technology::Wind) - 0.4 * 35.0).abs() < 1e-12);
        assert!((p.ip.pg(Technology::Ccgt) - 0.5 * 35.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_rejects_disorder() {
        let p = |year| ScenarioPoint {
            year,
            month: None,
            ip: snap(&[], 30.0),
            ce: DispatchSnapshot { area: AreaId::Ce, ..snap(&[], 300.0) },
        };
        assert!(ScenarioTrajectory::new("x", vec![p(2021), p(2020)], Variants::default()).is_err());
        assert!(ScenarioTrajectory::new("x", vec![p(2020), p(2020)], Variants::default()).is_err());
        assert!(ScenarioTrajectory::new("x", vec![p(2020), p(2021)], Variants::default()).is_ok());
    }
}
