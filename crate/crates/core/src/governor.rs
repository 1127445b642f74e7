//! State-space realisations of the equivalent turbine-governor loops.
//!
//! Each loop is driven by the local speed deviation `dw` (p.u.) and returns a
//! mechanical power deviation on the common base. States start at zero, the
//! pre-disturbance equilibrium.

use crate::error::{Error, Result};
use crate::model::{GenerationBlock, GovernorParams};
use crate::ode::Rk4;

impl GovernorParams {
    pub fn n_states(&self) -> usize {
        match self {
            GovernorParams::SteamTgov1 { .. } => 2,
            GovernorParams::GasGast { .. } => 3,
            GovernorParams::HydroClassic { .. } => 3,
        }
    }

    /// Mechanical power deviation for speed deviation `dw` and block states `x`.
    #[inline]
    pub fn output(&self, dw: f64, x: &[f64]) -> f64 {
        match *self {
            GovernorParams::SteamTgov1 { t2, t3, dt, .. } => {
                let a = t2 / t3;
                a * x[0] + (1.0 - a) * x[1] - dt * dw
            }
            GovernorParams::GasGast { .. } => x[1],
            // (1 - Tw s) / (1 + Tw s / 2) = -2 + 3 / (1 + Tw s / 2)
            GovernorParams::HydroClassic { .. } => 3.0 * x[2] - 2.0 * x[1],
        }
    }

    #[inline]
    pub fn derivatives(&self, dw: f64, x: &[f64], dx: &mut [f64]) {
        match *self {
            GovernorParams::SteamTgov1 { r, tg, t3, .. } => {
                // valve lag, then turbine lead/lag
                dx[0] = (-dw / r - x[0]) / tg;
                dx[1] = (x[0] - x[1]) / t3;
            }
            GovernorParams::GasGast {
                r,
                tg,
                t2,
                t3,
                lmax,
                kt,
            } => {
                let speed_demand = -dw / r;
                let temperature_limit = lmax + kt * (lmax - x[2]);
                let demand = speed_demand.min(temperature_limit);
                let mut dvalve = (demand - x[0]) / tg;
                // anti-windup on the limited fuel valve state
                if x[0] >= lmax && dvalve > 0.0 {
                    dvalve = 0.0;
                }
                dx[0] = dvalve;
                dx[1] = (x[0] - x[1]) / t2;
                dx[2] = (x[1] - x[2]) / t3;
            }
            GovernorParams::HydroClassic { r, tg, rt, tr, tw } => {
                // transient droop compensation (1 + Tr s) / (1 + Tr Rt/R s)
                let ta = tr * rt / r;
                let u = -dw;
                let compensated = x[0] + (tr / ta) * (u - x[0]);
                dx[0] = (u - x[0]) / ta;
                dx[1] = (compensated / r - x[1]) / tg;
                dx[2] = (x[1] - x[2]) / (0.5 * tw);
            }
        }
    }

    /// Projects states back onto their admissible set after a step.
    #[inline]
    pub fn clamp_states(&self, x: &mut [f64]) {
        if let GovernorParams::GasGast { lmax, .. } = *self {
            if x[0] > lmax {
                x[0] = lmax;
            }
        }
    }
}

/// Response of a single governed block to a sampled speed-deviation history.
///
/// `dw_history[k]` is held constant over `[k dt, (k + 1) dt)`; the returned
/// vector has the mechanical power deviation at every sample instant.
pub fn block_response(block: &GenerationBlock, dw_history: &[f64], dt: f64) -> Result<Vec<f64>> {
    let gov = block
        .governor
        .as_ref()
        .ok_or_else(|| Error::NoGovernor(block.name.clone()))?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config("block_response: dt must be positive".into()));
    }
    let n = gov.n_states();
    let mut x = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut out = Vec::with_capacity(dw_history.len());
    for &dw in dw_history {
        out.push(gov.output(dw, &x));
        rk.step(&mut x, dt, |s, d| gov.derivatives(dw, s, d));
        gov.clamp_states(&mut x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TechnologyKind;

    fn block(g: GovernorParams) -> GenerationBlock {
        GenerationBlock {
            name: "b".into(),
            kind: g.kind(),
            technologies: vec![],
            governor: Some(g),
            pg: 0.3,
            h_contrib: 0.0,
        }
    }

    #[test]
    fn tgov1_dc_gain() {
        let b = block(GovernorParams::SteamTgov1 {
            r: 0.05,
            tg: 0.3,
            t2: 2.1,
            t3: 7.0,
            dt: 0.0,
        });
        let out = block_response(&b, &vec![-0.01; 30_000], 0.005).unwrap();
        assert!((out.last().unwrap() - 0.2).abs() < 1e-6);
    }

    #[test]
    fn hydro_dips_before_recovering() {
        let b = block(GovernorParams::HydroClassic {
            r: 0.05,
            tg: 0.2,
            rt: 0.25,
            tr: 5.0,
            tw: 1.5,
        });
        let out = block_response(&b, &vec![-0.01; 60_000], 0.005).unwrap();
        let early = out[..200].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(early < 0.0, "no inverse response: {early}");
        assert!((out.last().unwrap() - 0.2).abs() < 1e-3);
    }

    #[test]
    fn gast_with_zero_limit_stays_at_zero() {
        let b = block(GovernorParams::GasGast {
            r: 0.05,
            tg: 0.4,
            t2: 0.1,
            t3: 3.0,
            lmax: 0.0,
            kt: 2.0,
        });
        let out = block_response(&b, &vec![-0.01; 4_000], 0.005).unwrap();
        assert!(out.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn gast_limit_caps_output() {
        let b = block(GovernorParams::GasGast {
            r: 0.05,
            tg: 0.4,
            t2: 0.1,
            t3: 3.0,
            lmax: 0.05,
            kt: 2.0,
        });
        let out = block_response(&b, &vec![-0.01; 8_000], 0.005).unwrap();
        let peak = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(peak <= 0.05 + 1e-9, "{peak}");
        assert!(peak > 0.04);
    }

    #[test]
    fn inertia_only_block_has_no_response() {
        let b = GenerationBlock {
            name: "nuclear".into(),
            kind: TechnologyKind::SteamTgov1,
            technologies: vec![],
            governor: None,
            pg: 0.7,
            h_contrib: 4.2,
        };
        let err = block_response(&b, &[0.0], 0.01).unwrap_err();
        assert_eq!(err.to_string(), "block `nuclear` has no governor");
    }
}
