//! Domain types for the two-area electromechanical model.
//!
//! Every power and inertia quantity is expressed on the single common base
//! carried by [`SystemBase`]. Models are described by the loosely typed
//! [`SystemConfig`] (the JSON file schema) and turned into a validated
//! [`TwoAreaSystem`] by [`build_system`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance of the additive inertia decomposition check.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaId {
    Ip,
    Ce,
}

impl AreaId {
    pub const ALL: [AreaId; 2] = [AreaId::Ip, AreaId::Ce];

    pub fn as_str(self) -> &'static str {
        match self {
            AreaId::Ip => "ip",
            AreaId::Ce => "ce",
        }
    }

    pub fn other(self) -> AreaId {
        match self {
            AreaId::Ip => AreaId::Ce,
            AreaId::Ce => AreaId::Ip,
        }
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AreaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ip" => Ok(AreaId::Ip),
            "ce" => Ok(AreaId::Ce),
            other => Err(Error::invalid("area", format!("unknown area `{other}` (expected ip or ce)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemBase {
    /// Apparent power base, GVA.
    pub s_base: f64,
    /// Nominal frequency, Hz.
    pub f0: f64,
}

impl Default for SystemBase {
    fn default() -> Self {
        SystemBase {
            s_base: 10.0,
            f0: 50.0,
        }
    }
}

/// Turbine-governor family used by an equivalent generation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechnologyKind {
    SteamTgov1,
    GasGast,
    HydroClassic,
}

impl TechnologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TechnologyKind::SteamTgov1 => "steam_tgov1",
            TechnologyKind::GasGast => "gas_gast",
            TechnologyKind::HydroClassic => "hydro_classic",
        }
    }
}

impl FromStr for TechnologyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "steam_tgov1" => Ok(TechnologyKind::SteamTgov1),
            "gas_gast" => Ok(TechnologyKind::GasGast),
            "hydro_classic" => Ok(TechnologyKind::HydroClassic),
            other => Err(format!(
                "unknown technology kind `{other}` (expected steam_tgov1, gas_gast or hydro_classic)"
            )),
        }
    }
}

/// Generation technology as it appears in dispatch snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    Nuclear,
    Coal,
    Ccgt,
    Hydro,
    /// Biomass, cogeneration and solar thermal units.
    SmallSteam,
    Wind,
    SolarPv,
    Other,
}

impl Technology {
    pub const ALL: [Technology; 8] = [
        Technology::Nuclear,
        Technology::Coal,
        Technology::Ccgt,
        Technology::Hydro,
        Technology::SmallSteam,
        Technology::Wind,
        Technology::SolarPv,
        Technology::Other,
    ];

    /// Converter-interfaced technologies contribute neither inertia nor FCR.
    pub fn is_synchronous(self) -> bool {
        matches!(
            self,
            Technology::Nuclear
                | Technology::Coal
                | Technology::Ccgt
                | Technology::Hydro
                | Technology::SmallSteam
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Nuclear => "nuclear",
            Technology::Coal => "coal",
            Technology::Ccgt => "ccgt",
            Technology::Hydro => "hydro",
            Technology::SmallSteam => "small_steam",
            Technology::Wind => "wind",
            Technology::SolarPv => "solar_pv",
            Technology::Other => "other",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technology {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Technology::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown technology `{s}`"))
    }
}

/// Governor and turbine constants of one equivalent primary-control loop.
///
/// `r` is the permanent droop on the common base; time constants are in
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GovernorParams {
    /// TGOV1: governor lag `tg`, turbine lead/lag `t2`/`t3`, turbine damping `dt`.
    SteamTgov1 {
        r: f64,
        tg: f64,
        t2: f64,
        t3: f64,
        dt: f64,
    },
    /// GAST: fuel valve lag `tg`, turbine lag `t2`, exhaust temperature lag
    /// `t3`, incremental load limit `lmax`, temperature-loop gain `kt`.
    GasGast {
        r: f64,
        tg: f64,
        t2: f64,
        t3: f64,
        lmax: f64,
        kt: f64,
    },
    /// Hydro governor with transient droop `rt` and reset time `tr`, feeding a
    /// non-elastic penstock with water starting time `tw`.
    HydroClassic {
        r: f64,
        tg: f64,
        rt: f64,
        tr: f64,
        tw: f64,
    },
}

impl GovernorParams {
    pub fn kind(&self) -> TechnologyKind {
        match self {
            GovernorParams::SteamTgov1 { .. } => TechnologyKind::SteamTgov1,
            GovernorParams::GasGast { .. } => TechnologyKind::GasGast,
            GovernorParams::HydroClassic { .. } => TechnologyKind::HydroClassic,
        }
    }

    pub fn r(&self) -> f64 {
        match *self {
            GovernorParams::SteamTgov1 { r, .. }
            | GovernorParams::GasGast { r, .. }
            | GovernorParams::HydroClassic { r, .. } => r,
        }
    }

    pub fn set_r(&mut self, value: f64) {
        match self {
            GovernorParams::SteamTgov1 { r, .. }
            | GovernorParams::GasGast { r, .. }
            | GovernorParams::HydroClassic { r, .. } => *r = value,
        }
    }

    pub fn tg(&self) -> f64 {
        match *self {
            GovernorParams::SteamTgov1 { tg, .. }
            | GovernorParams::GasGast { tg, .. }
            | GovernorParams::HydroClassic { tg, .. } => tg,
        }
    }

    pub fn set_tg(&mut self, value: f64) {
        match self {
            GovernorParams::SteamTgov1 { tg, .. }
            | GovernorParams::GasGast { tg, .. }
            | GovernorParams::HydroClassic { tg, .. } => *tg = value,
        }
    }

    /// Transient droop, hydro only.
    pub fn rt(&self) -> Option<f64> {
        match *self {
            GovernorParams::HydroClassic { rt, .. } => Some(rt),
            _ => None,
        }
    }

    pub fn set_rt(&mut self, value: f64) -> bool {
        match self {
            GovernorParams::HydroClassic { rt, .. } => {
                *rt = value;
                true
            }
            _ => false,
        }
    }

    /// Smallest dynamic time constant realised by the block, used for the
    /// step-size check.
    pub fn min_time_constant(&self) -> f64 {
        match *self {
            GovernorParams::SteamTgov1 { tg, t3, .. } => tg.min(t3),
            GovernorParams::GasGast { tg, t2, t3, .. } => tg.min(t2).min(t3),
            GovernorParams::HydroClassic { r, tg, rt, tr, tw } => {
                tg.min(0.5 * tw).min(tr * rt / r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationBlock {
    pub name: String,
    pub kind: TechnologyKind,
    /// Dispatch technologies aggregated by this block.
    pub technologies: Vec<Technology>,
    /// `None` for inertia-only blocks.
    pub governor: Option<GovernorParams>,
    /// Dispatched power, p.u. on the common base.
    pub pg: f64,
    /// Inertia contribution, s on the common base.
    pub h_contrib: f64,
}

impl GenerationBlock {
    pub fn fcr_enabled(&self) -> bool {
        self.governor.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaModel {
    pub id: AreaId,
    /// Total inertia constant, s.
    pub h: f64,
    /// Load share of the inertia, s.
    pub h_load: f64,
    /// Load damping, p.u. power per p.u. frequency.
    pub d: f64,
    pub blocks: Vec<GenerationBlock>,
}

impl AreaModel {
    pub fn block(&self, name: &str) -> Option<&GenerationBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut GenerationBlock> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    /// Sum of 1/R over governed blocks.
    pub fn fcr_gain(&self) -> f64 {
        self.blocks
            .iter()
            .filter_map(|b| b.governor.as_ref())
            .map(|g| 1.0 / g.r())
            .sum()
    }

    pub fn generation_inertia(&self) -> f64 {
        self.blocks.iter().map(|b| b.h_contrib).sum()
    }

    /// Sets the total inertia, keeping the per-block split and moving the
    /// difference into the load share.
    pub fn set_total_inertia(&mut self, h: f64) {
        self.h = h;
        self.h_load = h - self.generation_inertia();
    }
}

/// True iff `h` equals the load share plus the sum of block contributions.
pub fn validate_decomposition(area: &AreaModel) -> bool {
    (area.h - area.h_load - area.generation_inertia()).abs() <= DECOMPOSITION_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieLine {
    /// Synchronizing torque coefficient, p.u. power per rad. Zero is islanded.
    pub t_coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAreaSystem {
    pub base: SystemBase,
    pub area_ip: AreaModel,
    pub area_ce: AreaModel,
    pub tie: TieLine,
}

impl TwoAreaSystem {
    pub fn area(&self, id: AreaId) -> &AreaModel {
        match id {
            AreaId::Ip => &self.area_ip,
            AreaId::Ce => &self.area_ce,
        }
    }

    pub fn area_mut(&mut self, id: AreaId) -> &mut AreaModel {
        match id {
            AreaId::Ip => &mut self.area_ip,
            AreaId::Ce => &mut self.area_ce,
        }
    }

    pub fn areas(&self) -> [&AreaModel; 2] {
        [&self.area_ip, &self.area_ce]
    }

    /// Re-checks every construction invariant. Used after programmatic edits.
    pub fn validate(&self) -> Result<()> {
        build_system(&self.to_config()).map(|_| ())
    }

    pub fn to_config(&self) -> SystemConfig {
        SystemConfig {
            notes: None,
            base: BaseConfig {
                s_base: Some(self.base.s_base),
                f0: Some(self.base.f0),
            },
            area_ip: area_to_config(&self.area_ip),
            area_ce: area_to_config(&self.area_ce),
            tie: TieConfig {
                t_coeff: Some(self.tie.t_coeff),
            },
        }
    }
}

/// Step change of power balance in one area. Positive `dp` is a loss of
/// generation, p.u. on the common base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub area: AreaId,
    pub dp: f64,
    pub t_start: f64,
}

impl Disturbance {
    /// Loss of 1 GW (0.1 p.u. on 10 GVA) in the Iberian area at t = 1 s.
    pub fn reference() -> Self {
        Disturbance {
            area: AreaId::Ip,
            dp: 0.1,
            t_start: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dp.is_finite() {
            return Err(Error::invalid("disturbance.dp", "must be finite"));
        }
        if !(self.t_start.is_finite() && self.t_start >= 0.0) {
            return Err(Error::invalid("disturbance.t_start", "must be >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

/// JSON model description. Numeric fields are optional at the serde level so
/// that missing values are reported by [`build_system`] with their path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub base: BaseConfig,
    pub area_ip: AreaConfig,
    pub area_ce: AreaConfig,
    pub tie: TieConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub s_base: Option<f64>,
    pub f0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub h: Option<f64>,
    #[serde(default)]
    pub h_load: Option<f64>,
    pub d: Option<f64>,
    #[serde(default)]
    pub blocks: Vec<BlockConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub name: String,
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub technologies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governor: Option<GovernorConfig>,
    pub pg: Option<f64>,
    #[serde(default)]
    pub h_contrib: Option<f64>,
    #[serde(default)]
    pub fcr_enabled: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieConfig {
    pub t_coeff: Option<f64>,
}

fn area_to_config(area: &AreaModel) -> AreaConfig {
    AreaConfig {
        id: Some(area.id.as_str().to_owned()),
        h: Some(area.h),
        h_load: Some(area.h_load),
        d: Some(area.d),
        blocks: area.blocks.iter().map(block_to_config).collect(),
    }
}

fn block_to_config(block: &GenerationBlock) -> BlockConfig {
    BlockConfig {
        name: block.name.clone(),
        kind: Some(block.kind.as_str().to_owned()),
        technologies: block.technologies.iter().map(|t| t.as_str().to_owned()).collect(),
        governor: block.governor.as_ref().map(governor_to_config),
        pg: Some(block.pg),
        h_contrib: Some(block.h_contrib),
        fcr_enabled: Some(block.fcr_enabled()),
    }
}

fn governor_to_config(g: &GovernorParams) -> GovernorConfig {
    let mut c = GovernorConfig::default();
    match *g {
        GovernorParams::SteamTgov1 { r, tg, t2, t3, dt } => {
            c.r = Some(r);
            c.tg = Some(tg);
            c.t2 = Some(t2);
            c.t3 = Some(t3);
            c.dt = Some(dt);
        }
        GovernorParams::GasGast {
            r,
            tg,
            t2,
            t3,
            lmax,
            kt,
        } => {
            c.r = Some(r);
            c.tg = Some(tg);
            c.t2 = Some(t2);
            c.t3 = Some(t3);
            c.lmax = Some(lmax);
            c.kt = Some(kt);
        }
        GovernorParams::HydroClassic { r, tg, rt, tr, tw } => {
            c.r = Some(r);
            c.tg = Some(tg);
            c.rt = Some(rt);
            c.tr = Some(tr);
            c.tw = Some(tw);
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn require(value: Option<f64>, field: &str) -> Result<f64> {
    let v = value.ok_or_else(|| Error::invalid(field, "missing value"))?;
    if !v.is_finite() {
        return Err(Error::invalid(field, "must be finite"));
    }
    Ok(v)
}

fn time_constant(value: Option<f64>, field: &str) -> Result<f64> {
    let v = value.ok_or_else(|| Error::invalid(field, "missing time constant"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(field, "time constant must be positive"));
    }
    Ok(v)
}

fn non_negative(value: f64, field: &str, what: &str) -> Result<f64> {
    if value < 0.0 {
        return Err(Error::invalid(field, format!("{what} must be non-negative")));
    }
    Ok(value)
}

/// Builds and validates a [`TwoAreaSystem`] from its file description.
pub fn build_system(cfg: &SystemConfig) -> Result<TwoAreaSystem> {
    let s_base = require(cfg.base.s_base, "base.s_base")?;
    let f0 = require(cfg.base.f0, "base.f0")?;
    if s_base <= 0.0 {
        return Err(Error::invalid("base.s_base", "power base must be positive"));
    }
    if f0 <= 0.0 {
        return Err(Error::invalid("base.f0", "nominal frequency must be positive"));
    }
    let area_ip = build_area(&cfg.area_ip, AreaId::Ip, "area_ip")?;
    let area_ce = build_area(&cfg.area_ce, AreaId::Ce, "area_ce")?;
    let t_coeff = require(cfg.tie.t_coeff, "tie.t_coeff")?;
    if t_coeff < 0.0 {
        return Err(Error::invalid(
            "tie.t_coeff",
            "synchronizing coefficient must be non-negative",
        ));
    }
    Ok(TwoAreaSystem {
        base: SystemBase { s_base, f0 },
        area_ip,
        area_ce,
        tie: TieLine { t_coeff },
    })
}

fn build_area(cfg: &AreaConfig, id: AreaId, path: &str) -> Result<AreaModel> {
    if let Some(given) = &cfg.id {
        let parsed: AreaId = given
            .parse()
            .map_err(|_| Error::invalid(format!("{path}.id"), format!("unknown area `{given}`")))?;
        if parsed != id {
            return Err(Error::invalid(
                format!("{path}.id"),
                format!("section {path} carries id `{given}`"),
            ));
        }
    }
    let h = require(cfg.h, &format!("{path}.h"))?;
    if h <= 0.0 {
        return Err(Error::invalid(format!("{path}.h"), "inertia must be positive"));
    }
    let d = require(cfg.d, &format!("{path}.d"))?;
    non_negative(d, &format!("{path}.d"), "damping")?;

    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    for (i, b) in cfg.blocks.iter().enumerate() {
        let bpath = format!("{path}.blocks[{i}]");
        if blocks.iter().any(|x: &GenerationBlock| x.name == b.name) {
            return Err(Error::invalid(
                format!("{bpath}.name"),
                format!("duplicate block name `{}`", b.name),
            ));
        }
        blocks.push(build_block(b, &bpath)?);
    }

    let generation: f64 = blocks.iter().map(|b| b.h_contrib).sum();
    let h_load = match cfg.h_load {
        Some(v) => {
            let v = require(Some(v), &format!("{path}.h_load"))?;
            non_negative(v, &format!("{path}.h_load"), "load inertia")?;
            if v > h {
                return Err(Error::invalid(
                    format!("{path}.h_load"),
                    "load inertia exceeds total inertia",
                ));
            }
            v
        }
        None => h - generation,
    };
    if h_load < 0.0 {
        return Err(Error::invalid(
            format!("{path}.h_load"),
            "block inertia contributions exceed total inertia",
        ));
    }
    let area = AreaModel {
        id,
        h,
        h_load,
        d,
        blocks,
    };
    if !validate_decomposition(&area) {
        return Err(Error::invalid(
            format!("{path}.h"),
            format!(
                "inertia decomposition does not add up: h = {h}, h_load + sum(h_contrib) = {}",
                h_load + generation
            ),
        ));
    }
    Ok(area)
}

fn build_block(cfg: &BlockConfig, path: &str) -> Result<GenerationBlock> {
    if cfg.name.trim().is_empty() {
        return Err(Error::invalid(format!("{path}.name"), "block name is empty"));
    }
    let kind_str = cfg
        .kind
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("{path}.kind"), "missing technology kind"))?;
    let kind: TechnologyKind = kind_str
        .parse()
        .map_err(|e: String| Error::invalid(format!("{path}.kind"), e))?;
    let technologies = cfg
        .technologies
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.parse::<Technology>()
                .map_err(|e| Error::invalid(format!("{path}.technologies[{i}]"), e))
        })
        .collect::<Result<Vec<_>>>()?;
    let pg = require(cfg.pg, &format!("{path}.pg"))?;
    non_negative(pg, &format!("{path}.pg"), "dispatch")?;
    let h_contrib = require(Some(cfg.h_contrib.unwrap_or(0.0)), &format!("{path}.h_contrib"))?;
    non_negative(h_contrib, &format!("{path}.h_contrib"), "inertia contribution")?;

    let fcr = cfg.fcr_enabled.unwrap_or(cfg.governor.is_some());
    let governor = match (fcr, &cfg.governor) {
        (true, Some(g)) => Some(build_governor(g, kind, &format!("{path}.governor"))?),
        (true, None) => {
            return Err(Error::invalid(
                format!("{path}.governor"),
                "fcr_enabled block needs governor parameters",
            ))
        }
        (false, Some(_)) => {
            return Err(Error::invalid(
                format!("{path}.governor"),
                "inertia-only block (fcr_enabled = false) must not carry a governor",
            ))
        }
        (false, None) => None,
    };
    Ok(GenerationBlock {
        name: cfg.name.clone(),
        kind,
        technologies,
        governor,
        pg,
        h_contrib,
    })
}

fn build_governor(g: &GovernorConfig, kind: TechnologyKind, path: &str) -> Result<GovernorParams> {
    let field = |name: &str| format!("{path}.{name}");
    let unused = |present: &[(&str, Option<f64>)]| -> Result<()> {
        for (name, v) in present {
            if v.is_some() {
                return Err(Error::invalid(
                    field(name),
                    format!("not a parameter of {}", kind.as_str()),
                ));
            }
        }
        Ok(())
    };
    let r = require(g.r, &field("r"))?;
    if r <= 0.0 {
        return Err(Error::invalid(field("r"), "droop must be positive"));
    }
    let tg = time_constant(g.tg, &field("tg"))?;
    let params = match kind {
        TechnologyKind::SteamTgov1 => {
            unused(&[("lmax", g.lmax), ("kt", g.kt), ("rt", g.rt), ("tr", g.tr), ("tw", g.tw)])?;
            let t2 = require(g.t2, &field("t2"))?;
            non_negative(t2, &field("t2"), "lead time constant")?;
            let t3 = time_constant(g.t3, &field("t3"))?;
            let dt = g.dt.unwrap_or(0.0);
            non_negative(dt, &field("dt"), "turbine damping")?;
            GovernorParams::SteamTgov1 { r, tg, t2, t3, dt }
        }
        TechnologyKind::GasGast => {
            unused(&[("dt", g.dt), ("rt", g.rt), ("tr", g.tr), ("tw", g.tw)])?;
            let t2 = time_constant(g.t2, &field("t2"))?;
            let t3 = time_constant(g.t3, &field("t3"))?;
            let lmax = require(g.lmax, &field("lmax"))?;
            non_negative(lmax, &field("lmax"), "load limit")?;
            let kt = require(g.kt, &field("kt"))?;
            non_negative(kt, &field("kt"), "temperature gain")?;
            GovernorParams::GasGast {
                r,
                tg,
                t2,
                t3,
                lmax,
                kt,
            }
        }
        TechnologyKind::HydroClassic => {
            unused(&[("t2", g.t2), ("t3", g.t3), ("dt", g.dt), ("lmax", g.lmax), ("kt", g.kt)])?;
            let rt = require(g.rt, &field("rt"))?;
            if rt < r {
                return Err(Error::invalid(
                    field("rt"),
                    "transient droop must be >= permanent droop",
                ));
            }
            let tr = time_constant(g.tr, &field("tr"))?;
            let tw = time_constant(g.tw, &field("tw"))?;
            GovernorParams::HydroClassic { r, tg, rt, tr, tw }
        }
    };
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(h: f64, h_load: f64, contribs: &[f64]) -> AreaModel {
        AreaModel {
            id: AreaId::Ip,
            h,
            h_load,
            d: 1.0,
            blocks: contribs
                .iter()
                .enumerate()
                .map(|(i, &c)| GenerationBlock {
                    name: format!("b{i}"),
                    kind: TechnologyKind::SteamTgov1,
                    technologies: vec![],
                    governor: None,
                    pg: 0.1,
                    h_contrib: c,
                })
                .collect(),
        }
    }

    #[test]
    fn decomposition_predicate() {
        assert!(validate_decomposition(&area(5.0, 0.8, &[2.0, 1.5, 0.7])));
        assert!(!validate_decomposition(&area(5.0, 0.8, &[2.0, 1.5, 0.5])));
        assert!(validate_decomposition(&area(5.0, 5.0, &[])));
    }

    fn minimal() -> SystemConfig {
        serde_json::from_str(
            r#"{
              "base": {"s_base": 10.0, "f0": 50.0},
              "area_ip": {"h": 5.0, "d": 1.0, "blocks": [
                 {"name": "coal", "kind": "steam_tgov1", "pg": 0.2, "h_contrib": 0.8,
                  "governor": {"r": 0.05, "tg": 0.3, "t2": 2.1, "t3": 7.0}}
              ]},
              "area_ce": {"h": 50.0, "d": 20.0, "blocks": []},
              "tie": {"t_coeff": 0.2}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn builds_minimal_config() {
        let sys = build_system(&minimal()).unwrap();
        assert_eq!(sys.base, SystemBase::default());
        assert!((sys.area_ip.h_load - 4.2).abs() < 1e-12);
        assert!(sys.area_ip.blocks[0].fcr_enabled());
    }

    #[test]
    fn zero_inertia_rejected() {
        let mut cfg = minimal();
        cfg.area_ip.h = Some(0.0);
        let err = build_system(&cfg).unwrap_err().to_string();
        assert!(err.contains("area_ip.h"), "{err}");
        assert!(err.contains("inertia must be positive"), "{err}");
    }

    #[test]
    fn islanded_is_valid() {
        let mut cfg = minimal();
        cfg.tie.t_coeff = Some(0.0);
        assert_eq!(build_system(&cfg).unwrap().tie.t_coeff, 0.0);
    }

    #[test]
    fn negative_damping_rejected() {
        let mut cfg = minimal();
        cfg.area_ce.d = Some(-0.1);
        let err = build_system(&cfg).unwrap_err().to_string();
        assert!(err.starts_with("area_ce.d"), "{err}");
    }

    #[test]
    fn missing_time_constant_named() {
        let mut cfg = minimal();
        cfg.area_ip.blocks[0].governor.as_mut().unwrap().t3 = None;
        let err = build_system(&cfg).unwrap_err().to_string();
        assert_eq!(err, "area_ip.blocks[0].governor.t3: missing time constant");
    }

    #[test]
    fn unknown_kind_named() {
        let mut cfg = minimal();
        cfg.area_ip.blocks[0].kind = Some("diesel".into());
        let err = build_system(&cfg).unwrap_err().to_string();
        assert!(err.starts_with("area_ip.blocks[0].kind: unknown technology kind"), "{err}");
    }

    #[test]
    fn hydro_transient_droop_must_exceed_droop() {
        let mut cfg = minimal();
        cfg.area_ip.blocks[0].kind = Some("hydro_classic".into());
        cfg.area_ip.blocks[0].governor = Some(GovernorConfig {
            r: Some(0.05),
            tg: Some(0.2),
            rt: Some(0.04),
            tr: Some(5.0),
            tw: Some(1.0),
            ..Default::default()
        });
        let err = build_system(&cfg).unwrap_err().to_string();
        assert!(err.contains("governor.rt"), "{err}");
    }

    #[test]
    fn inertia_only_block_rejects_governor() {
        let mut cfg = minimal();
        cfg.area_ip.blocks[0].fcr_enabled = Some(false);
        assert!(build_system(&cfg).is_err());
        cfg.area_ip.blocks[0].governor = None;
        let sys = build_system(&cfg).unwrap();
        assert!(!sys.area_ip.blocks[0].fcr_enabled());
    }

    #[test]
    fn contributions_exceeding_h_rejected() {
        let mut cfg = minimal();
        cfg.area_ip.blocks[0].h_contrib = Some(5.5);
        assert!(build_system(&cfg).is_err());
    }

    #[test]
    fn config_round_trip() {
        let sys = build_system(&minimal()).unwrap();
        let json = serde_json::to_string(&sys.to_config()).unwrap();
        let back: SystemConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(build_system(&back).unwrap(), sys);
    }

    #[test]
    fn unknown_field_rejected_by_schema() {
        let err = serde_json::from_str::<SystemConfig>(
            r#"{"base": {"s_base": 10, "f0": 50, "fnom": 1}, "area_ip": {"h":1,"d":1}, "area_ce": {"h":1,"d":1}, "tie": {"t_coeff": 0}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("fnom"));
    }
}
