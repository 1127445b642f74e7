mod common;

use freqstab_core::io;
use freqstab_core::model::Technology;
use freqstab_core::scenarios::{scale_damping, scale_droop, scale_inertia, snapshot_system, SmallSteamReduction};
use freqstab_core::{
    apply_mitigation, apply_snapshot, simulate, sweep, AreaId, DispatchSnapshot, Disturbance, MitigationSpec,
    PerArea, SimConfig, TwoAreaSystem,
};
use proptest::prelude::*;

use common::{anchor, data_dir};

fn scaled(snap: &DispatchSnapshot, gen: f64, load: f64) -> DispatchSnapshot {
    let mut s = snap.clone();
    s.generation.values_mut().for_each(|p| *p *= gen);
    s.load *= load;
    s
}

fn assert_same_model(a: &TwoAreaSystem, b: &TwoAreaSystem, tol: f64) {
    for id in AreaId::ALL {
        let (x, y) = (a.area(id), b.area(id));
        assert!((x.h - y.h).abs() <= tol, "{id}.h");
        assert!((x.h_load - y.h_load).abs() <= tol, "{id}.h_load");
        assert!((x.d - y.d).abs() <= tol, "{id}.d");
        assert_eq!(x.blocks.len(), y.blocks.len());
        for (p, q) in x.blocks.iter().zip(&y.blocks) {
            assert_eq!(p.name, q.name);
            assert!((p.pg - q.pg).abs() <= tol, "{}.pg", p.name);
            assert!((p.h_contrib - q.h_contrib).abs() <= tol, "{}.h_contrib", p.name);
            match (&p.governor, &q.governor) {
                (Some(g), Some(h)) => assert!((g.r() - h.r()).abs() <= tol, "{}.r", p.name),
                (None, None) => {}
                _ => panic!("{}: governor presence differs", p.name),
            }
        }
    }
    assert_eq!(a.tie, b.tie);
}

#[test]
fn reference_mix_reproduces_the_anchor() {
    let anchor = anchor();
    let sys = apply_snapshot(&anchor, &anchor.mix_o).unwrap();
    assert_same_model(&sys, &anchor.params_o, 1e-12);
    let cfg = SimConfig::default();
    let a = simulate(&sys, &Disturbance::reference(), &cfg).unwrap();
    let b = simulate(&anchor.params_o, &Disturbance::reference(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn anchor_keeps_the_calibrated_inertia() {
    let anchor = anchor();
    let model = common::reference_model();
    for id in AreaId::ALL {
        assert!((anchor.params_o.area(id).h - model.area(id).h).abs() < 1e-12);
        assert!(anchor.params_o.area(id).h_load >= 0.0);
    }
}

#[test]
fn synchronous_condensers_add_exactly_their_inertia() {
    let anchor = anchor();
    let spec = MitigationSpec::default();
    let base = &anchor.params_o;
    let before = apply_mitigation(base, &spec, 2024);
    assert_eq!(&before, base);
    let after = apply_mitigation(base, &spec, 2025);
    assert!((after.area_ip.h - base.area_ip.h - 0.3).abs() < 1e-12);
    assert_eq!(after.area_ce, base.area_ce);
    assert_eq!(after.area_ip.fcr_gain(), base.area_ip.fcr_gain());
    assert_eq!(after.area_ip.d, base.area_ip.d);
}

#[test]
fn more_inertia_never_worsens_initial_rocof() {
    let anchor = anchor();
    let cfg = SimConfig {
        t_end: 10.0,
        ..SimConfig::default()
    };
    let base = simulate(&anchor.params_o, &Disturbance::reference(), &cfg).unwrap();
    let sc = apply_mitigation(&anchor.params_o, &MitigationSpec::default(), 2030);
    let with_sc = simulate(&sc, &Disturbance::reference(), &cfg).unwrap();
    let r = |tr| freqstab_core::rocof_sliding(tr, AreaId::Ip, std::time::Duration::from_millis(100)).unwrap();
    assert!(r(&with_sc) < r(&base));
    let n = |tr| freqstab_core::nadir(tr, AreaId::Ip).unwrap().0;
    assert!(n(&with_sc) > n(&base));
}

#[test]
fn dropping_a_technology_removes_its_block() {
    let anchor = anchor();
    let mut mix = anchor.mix_o.clone();
    mix.ip.generation.insert(Technology::Coal, 0.0);
    let sys = apply_snapshot(&anchor, &mix).unwrap();
    assert!(sys.area_ip.block("coal").is_none());
    let coal = anchor.params_o.area_ip.block("coal").unwrap();
    assert!((anchor.params_o.area_ip.h - sys.area_ip.h - coal.h_contrib).abs() < 1e-12);
}

#[test]
fn unmapped_technology_is_rejected() {
    let anchor = anchor();
    let mut mix = anchor.mix_o.clone();
    mix.ce.generation.insert(Technology::SmallSteam, 1.0);
    let err = apply_snapshot(&anchor, &mix).unwrap_err().to_string();
    assert!(err.contains("small_steam"), "{err}");
}

#[test]
fn small_steam_halving_only_touches_small_steam() {
    let anchor = anchor();
    let f = SmallSteamReduction::default();
    let snap = anchor.mix_o.ip.clone();
    let halved = f.apply(&snap, 2040);
    for (tech, &pg) in &snap.generation {
        let expected = if *tech == Technology::SmallSteam { pg * 0.5 } else { pg };
        assert!((halved.pg(*tech) - expected).abs() < 1e-12);
    }
    assert_eq!(f.apply(&snap, 2030), snap);
}

#[test]
fn shipped_trajectories_sweep_without_errors() {
    let anchor = anchor();
    let cfg = SimConfig {
        t_end: 20.0,
        ..SimConfig::default()
    };
    for name in ["monthly_average", "winter_valley", "peak_pv"] {
        let traj = io::read_trajectory(&data_dir().join(format!("scenarios/{name}.json"))).unwrap();
        assert!(!traj.snapshots.is_empty());
        let rows = sweep(&anchor, &traj, &Disturbance::reference(), &cfg);
        assert_eq!(rows.len(), 2 * traj.snapshots.len());
        for r in &rows {
            assert!(r.outcome.is_ok(), "{}: {:?}", r.scenario_id, r.outcome);
        }
        // Rows come back in snapshot order, IP first.
        for (pair, p) in rows.chunks(2).zip(&traj.snapshots) {
            assert_eq!(pair[0].area, AreaId::Ip);
            assert_eq!(pair[1].area, AreaId::Ce);
            assert_eq!((pair[0].year, pair[0].month), (p.year, p.month));
        }
    }
}

#[test]
fn snapshot_system_applies_variants() {
    let anchor = anchor();
    let mut traj = io::read_trajectory(&data_dir().join("scenarios/winter_valley.json")).unwrap();
    let point = traj.snapshots.last().unwrap().clone();
    let plain = snapshot_system(&anchor, &traj, &point).unwrap();
    traj.variants.small_steam_halving = true;
    let halved = snapshot_system(&anchor, &traj, &point).unwrap();
    assert!(halved.area_ip.h < plain.area_ip.h);
    traj.variants.mitigation = Some(MitigationSpec::default());
    let with_sc = snapshot_system(&anchor, &traj, &point).unwrap();
    assert!((with_sc.area_ip.h - halved.area_ip.h - 0.3).abs() < 1e-12);
}

proptest! {
    #[test]
    fn droop_gain_is_proportional_to_dispatch(r in 0.01f64..1.0, pg_o in 0.1f64..20.0, k in 0.05f64..5.0) {
        let r_t = scale_droop(r, pg_o, k * pg_o).unwrap().unwrap();
        prop_assert!(((1.0 / r_t) / (1.0 / r) - k).abs() < 1e-12 * k.max(1.0));
        prop_assert_eq!(scale_droop(r, pg_o, 0.0).unwrap(), None);
    }

    #[test]
    fn damping_is_proportional_to_load(d in 0.1f64..30.0, pd in 1.0f64..400.0, k in 0.1f64..3.0) {
        let d_t = scale_damping(d, pd, k * pd).unwrap();
        prop_assert!((d_t / d - k).abs() < 1e-12 * k.max(1.0));
    }

    #[test]
    fn inertia_is_proportional_to_dispatch(h in 0.0f64..10.0, pg_o in 0.1f64..20.0, k in 0.0f64..5.0) {
        let h_t = scale_inertia(h, pg_o, k * pg_o);
        prop_assert!((h_t - k * h).abs() < 1e-12 * (1.0 + h * k));
    }

    #[test]
    fn scaled_mix_scales_the_model(gen in 0.2f64..3.0, load in 0.5f64..2.0) {
        let anchor = anchor();
        let mix = PerArea {
            ip: scaled(&anchor.mix_o.ip, gen, load),
            ce: scaled(&anchor.mix_o.ce, gen, load),
        };
        let sys = apply_snapshot(&anchor, &mix).unwrap();
        for id in AreaId::ALL {
            let (a, o) = (sys.area(id), anchor.params_o.area(id));
            // Inertia decomposition stays exact.
            prop_assert!((a.h - a.h_load - a.generation_inertia()).abs() < 1e-12);
            prop_assert!((a.h_load - o.h_load).abs() < 1e-12);
            prop_assert!((a.generation_inertia() - gen * o.generation_inertia()).abs() < 1e-9);
            prop_assert!((a.fcr_gain() - gen * o.fcr_gain()).abs() < 1e-9 * o.fcr_gain());
            prop_assert!((a.d - load * o.d).abs() < 1e-12 * o.d.max(1.0));
            for (b, bo) in a.blocks.iter().zip(&o.blocks) {
                if let (Some(g), Some(go)) = (b.governor, bo.governor) {
                    if let (Some(rt), Some(rto)) = (g.rt(), go.rt()) {
                        prop_assert!((rt / g.r() - rto / go.r()).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
