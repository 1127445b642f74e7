//! `freqstab`: simulate, measure, calibrate and sweep the two-area model.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when the
//! numerics fail (divergence).

mod manifest;
mod svg;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freqstab_core::estimation::{self, synthetic_event, EstimationResult, TwoStageResult};
use freqstab_core::io::{self as fio, EventSidecar, SidecarDisturbance};
use freqstab_core::metrics;
use freqstab_core::{
    AreaId, Disturbance, Error, EstimationSetup, MetricsReport, MitigationSpec, ModelTemplate, PsoConfig, Result,
    SimConfig, SweepRow,
};
use manifest::Recorder;
use serde_json::json;

#[derive(Parser)]
#[command(name = "freqstab", version, about = "Two-area frequency stability toolchain")]
struct Cli {
    /// Directory receiving all output files.
    #[arg(long, global = true, env = "FREQSTAB_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a loss of generation on a model file.
    Simulate(SimulateArgs),
    /// Compute Nadir, RoCoF and steady-state frequency from a trace CSV.
    Metrics(MetricsArgs),
    /// Calibrate model parameters against a recorded event.
    Estimate(EstimateArgs),
    /// Run a scenario trajectory through the anchored model.
    Sweep(SweepArgs),
    /// Generate a noisy synthetic event from a known model.
    SynthEvent(SynthArgs),
}

#[derive(Args, Clone)]
struct DisturbanceArgs {
    /// Lost generation, GW.
    #[arg(long, default_value_t = 1.0)]
    dp_gw: f64,
    #[arg(long, default_value = "ip")]
    area: AreaId,
    #[arg(long, default_value_t = 1.0)]
    t_start: f64,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    #[arg(long, default_value_t = 60.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    sample_dt: f64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_end: self.t_end,
            sample_dt: self.sample_dt,
        }
    }
}

fn disturbance(d: &DisturbanceArgs, s_base: f64) -> Result<Disturbance> {
    let dist = Disturbance {
        area: d.area,
        dp: d.dp_gw / s_base,
        t_start: d.t_start,
    };
    dist.validate()?;
    Ok(dist)
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    dist: DisturbanceArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Scenario id written in the metrics file.
    #[arg(long, default_value = "simulate")]
    id: String,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Nominal frequency of the trace, Hz.
    #[arg(long, default_value_t = 50.0)]
    f0: f64,
    /// Steady-state averaging tail, s.
    #[arg(long, default_value_t = 5.0)]
    tail_s: f64,
    #[arg(long, default_value = "trace")]
    id: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Reduced,
    Full,
    Both,
}

#[derive(Args)]
struct EstimateArgs {
    /// Recording CSV with columns t,f_ip,f_ce.
    #[arg(long)]
    event: PathBuf,
    /// Event description (disturbance, dispatch at the event).
    #[arg(long)]
    sidecar: PathBuf,
    /// Bounds and penalties.
    #[arg(long)]
    setup: PathBuf,
    /// Model file whose block structure the full stage estimates.
    #[arg(long)]
    structure: PathBuf,
    /// Starting model of a full-only run. Defaults to the structure model.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    stage: Stage,
    /// PSO configuration JSON; flags below override it.
    #[arg(long)]
    pso: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chaos_seed: Option<f64>,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Resampling interval of the recording, s.
    #[arg(long, default_value_t = fio::EVENT_RESAMPLE_DT)]
    resample_dt: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    anchor: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    /// Halve Iberian small-steam dispatch between 2030 and 2040.
    #[arg(long)]
    halve_small_steam: bool,
    /// Add synchronous condensers to the Iberian area.
    #[arg(long)]
    with_sc: bool,
    #[arg(long, default_value_t = MitigationSpec::default().count)]
    sc_count: u32,
    /// Inertia constant of each condenser on its own rating, s.
    #[arg(long, default_value_t = MitigationSpec::default().h_each)]
    sc_h: f64,
    /// Rating of each condenser, GVA.
    #[arg(long, default_value_t = MitigationSpec::default().rating_each)]
    sc_rating: f64,
    #[arg(long, default_value_t = MitigationSpec::default().online_from)]
    sc_from: i32,
    #[command(flatten)]
    dist: DisturbanceArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Also draw the Iberian Nadir and RoCoF as SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    anchor: PathBuf,
    #[command(flatten)]
    dist: DisturbanceArgs,
    /// Recorded span, s.
    #[arg(long, default_value_t = 60.0)]
    span: f64,
    #[arg(long, default_value_t = 0.02)]
    record_dt: f64,
    /// Standard deviation of additive noise, mHz.
    #[arg(long, default_value_t = 1.0)]
    noise_mhz: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file stem inside the output directory.
    #[arg(long, default_value = "event")]
    name: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out_dir).map_err(|source| Error::Io {
        path: cli.out_dir.clone(),
        source,
    })?;
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Metrics(a) => cmd_metrics(&a, out),
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::SynthEvent(a) => cmd_synth(&a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_report(id: &str, m: &MetricsReport) {
    println!(
        "{id} {}: nadir {:.4} Hz at {:.2} s, rocof100 {:.4} Hz/s, rocof500 {:.4} Hz/s, f_ss {:.4} Hz",
        m.area,
        m.nadir_hz,
        m.t_nadir,
        m.rocof_ms(100).unwrap_or(f64::NAN),
        m.rocof_ms(500).unwrap_or(f64::NAN),
        m.f_ss
    );
}

fn cmd_simulate(a: &SimulateArgs, out: &Path) -> Result<()> {
    let sys = fio::read_system(&a.model)?;
    let dist = disturbance(&a.dist, sys.base.s_base)?;
    let cfg = a.sim.config();
    let mut rec = Recorder::new("simulate", json!({ "disturbance": dist, "sim": cfg }));
    rec.input(&a.model)?;
    let trace = freqstab_core::simulate(&sys, &dist, &cfg)?;
    for w in &trace.warnings {
        rec.warn(w.clone());
    }
    let trace_path = out.join("trace.csv");
    fio::write_trace_csv(create(&trace_path)?, &trace)?;
    rec.output(&trace_path)?;

    let tail = metrics::DEFAULT_TAIL.min(Duration::from_secs_f64(cfg.t_end));
    let mut rows = Vec::new();
    for area in AreaId::ALL {
        let m = metrics::report(&trace, area, &metrics::STANDARD_WINDOWS_MS, tail)?;
        print_report(&a.id, &m);
        rows.push((a.id.clone(), m));
    }
    let metrics_path = out.join("metrics.csv");
    fio::write_metrics_csv(create(&metrics_path)?, &rows)?;
    rec.output(&metrics_path)?;
    rec.finish(out)?;
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs, out: &Path) -> Result<()> {
    if !(a.tail_s.is_finite() && a.tail_s > 0.0) {
        return Err(Error::Config("--tail-s must be positive".into()));
    }
    let mut rec = Recorder::new("metrics", json!({ "f0": a.f0, "tail_s": a.tail_s }));
    rec.input(&a.trace)?;
    let trace = fio::read_trace_csv(open(&a.trace)?, a.f0)?;
    if trace.len() < 2 {
        return Err(Error::EmptyTrace);
    }
    for (k, &t) in trace.t.iter().enumerate() {
        if (t - trace.t[0] - k as f64 * trace.sample_dt).abs() > 1e-6 * trace.sample_dt {
            return Err(Error::Config(format!(
                "{}: samples are not uniformly spaced (row {})",
                a.trace.display(),
                k + 2
            )));
        }
    }
    let mut rows = Vec::new();
    for area in AreaId::ALL {
        let m = metrics::report(&trace, area, &metrics::STANDARD_WINDOWS_MS, Duration::from_secs_f64(a.tail_s))?;
        print_report(&a.id, &m);
        rows.push((a.id.clone(), m));
    }
    let path = out.join("metrics.csv");
    fio::write_metrics_csv(create(&path)?, &rows)?;
    rec.output(&path)?;
    rec.finish(out)?;
    Ok(())
}

fn pso_config(a: &EstimateArgs) -> Result<PsoConfig> {
    let mut cfg: PsoConfig = match &a.pso {
        Some(p) => fio::read_json(p)?,
        None => PsoConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    if let Some(z) = a.chaos_seed {
        cfg.chaos_seed = z;
    }
    if let Some(n) = a.swarm {
        cfg.swarm_size = n;
    }
    if let Some(n) = a.iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_stage(
    rec: &mut Recorder,
    out: &Path,
    stage: &str,
    result: &EstimationResult,
    template: &ModelTemplate,
) -> Result<()> {
    println!("[{stage}]\n{result}");
    if !result.feasible() {
        rec.warn(format!("{stage}: active penalties: {}", result.active_penalties.join(", ")));
    }
    let result_path = out.join(format!("estimate_{stage}.json"));
    fio::write_json(&result_path, result)?;
    rec.output(&result_path)?;
    let log_path = out.join(format!("run_log_{stage}.csv"));
    fio::write_run_log(create(&log_path)?, &result.cost_history)?;
    rec.output(&log_path)?;
    let model_path = out.join(format!("model_{stage}.json"));
    fio::write_system(&model_path, &template.instantiate(&result.best_params)?)?;
    rec.output(&model_path)?;
    if !result.identifiable {
        return Err(Error::Unidentifiable(format!("{stage} stage: the cost surface is flat over the initial swarm")));
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs, out: &Path) -> Result<()> {
    let cfg = pso_config(a)?;
    let setup: EstimationSetup = fio::read_json(&a.setup)?;
    let structure = fio::read_system(&a.structure)?;
    let event = fio::read_event(&a.event, &a.sidecar, a.resample_dt)?;
    if event.dist.dp == 0.0 {
        return Err(Error::Unidentifiable("the sidecar describes a zero disturbance".into()));
    }
    let mut rec = Recorder::new(
        "estimate",
        json!({ "pso": cfg, "setup": setup, "resample_dt": a.resample_dt, "disturbance": event.dist }),
    );
    rec.seeds(cfg.rng_seed, Some(cfg.chaos_seed));
    for p in [&a.event, &a.sidecar, &a.setup, &a.structure] {
        rec.input(p)?;
    }
    match a.stage {
        Stage::Reduced => {
            let t = setup.reduced_template(structure.base)?;
            let r = estimation::estimate_reduced(&event, &t, &cfg, setup.sim_dt)?;
            write_stage(&mut rec, out, "reduced", &r, &t)?;
        }
        Stage::Full => {
            let t = setup.full_template(&structure)?;
            let init_model = match &a.init {
                Some(p) => {
                    rec.input(p)?;
                    fio::read_system(p)?
                }
                None => structure.clone(),
            };
            let mut x0 = t.extract(&init_model)?;
            t.space.clamp(&mut x0);
            let mut r = estimation::estimate_full(&event, &t, &x0, &cfg, setup.sim_dt)?;
            if setup.refine {
                r = estimation::refine_result(&event, &t, &r, setup.sim_dt)?;
            }
            write_stage(&mut rec, out, "full", &r, &t)?;
        }
        Stage::Both => {
            let TwoStageResult { reduced, full, .. } = estimation::estimate_both(&event, &setup, &structure, &cfg)?;
            write_stage(&mut rec, out, "reduced", &reduced, &setup.reduced_template(structure.base)?)?;
            write_stage(&mut rec, out, "full", &full, &setup.full_template(&structure)?)?;
        }
    }
    rec.finish(out)?;
    Ok(())
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn decimal_year(row: &SweepRow) -> f64 {
    f64::from(row.year) + row.month.map_or(0.0, |m| (f64::from(m) - 0.5) / 12.0)
}

fn write_plot_data(path: &Path, rows: &[SweepRow], columns: &[(&str, fn(&MetricsReport) -> f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |source| Error::Csv {
        context: path.display().to_string(),
        source,
    };
    let mut header = vec!["year".to_owned(), "month".to_owned()];
    for area in AreaId::ALL {
        header.extend(columns.iter().map(|(name, _)| format!("{name}_{area}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for pair in rows.chunks(2) {
        let mut rec = vec![pair[0].year.to_string(), pair[0].month.map(|m| m.to_string()).unwrap_or_default()];
        for row in pair {
            for (_, f) in columns {
                rec.push(row.outcome.as_ref().map(|m| fio::fmt_sig(f(m), fio::SIG_DIGITS)).unwrap_or_default());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_sweep(a: &SweepArgs, out: &Path) -> Result<()> {
    let anchor = fio::read_anchor(&a.anchor)?;
    let mut traj = fio::read_trajectory(&a.trajectory)?;
    if a.halve_small_steam {
        traj.variants.small_steam_halving = true;
    }
    if a.with_sc {
        let spec = MitigationSpec {
            count: a.sc_count,
            h_each: a.sc_h,
            rating_each: a.sc_rating,
            online_from: a.sc_from,
        };
        spec.validate()?;
        traj.variants.mitigation = Some(spec);
    }
    let dist = disturbance(&a.dist, anchor.params_o.base.s_base)?;
    let cfg = a.sim.config();
    cfg.validate()?;
    let mut rec = Recorder::new(
        "sweep",
        json!({ "disturbance": dist, "sim": cfg, "variants": traj.variants }),
    );
    rec.input(&a.anchor)?;
    rec.input(&a.trajectory)?;

    let rows = freqstab_core::sweep(&anchor, &traj, &dist, &cfg);
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count() / 2;
    if failed > 0 {
        rec.warn(format!("{failed} snapshot(s) failed; see the status column"));
    }
    let stem = file_stem(&traj.variant_id());
    let sweep_path = out.join(format!("sweep_{stem}.csv"));
    fio::write_sweep_csv(create(&sweep_path)?, &rows)?;
    rec.output(&sweep_path)?;

    let nadir_path = out.join(format!("plot_{stem}_nadir.csv"));
    write_plot_data(&nadir_path, &rows, &[("nadir_hz", |m| m.nadir_hz)])?;
    rec.output(&nadir_path)?;
    let rocof_path = out.join(format!("plot_{stem}_rocof.csv"));
    write_plot_data(
        &rocof_path,
        &rows,
        &[
            ("rocof100", |m| m.rocof_ms(100).unwrap_or(f64::NAN)),
            ("rocof500", |m| m.rocof_ms(500).unwrap_or(f64::NAN)),
        ],
    )?;
    rec.output(&rocof_path)?;

    if a.svg {
        let ip: Vec<&SweepRow> = rows.iter().filter(|r| r.area == AreaId::Ip).collect();
        let points = |f: fn(&MetricsReport) -> f64| -> Vec<(f64, f64)> {
            ip.iter()
                .map(|r| (decimal_year(r), r.outcome.as_ref().map(f).unwrap_or(f64::NAN)))
                .collect()
        };
        let nadir_svg = svg::line_chart(
            &format!("{}: IP Nadir", traj.variant_id()),
            "Hz",
            &[svg::Series {
                label: "nadir",
                points: points(|m| m.nadir_hz),
            }],
        );
        let rocof_svg = svg::line_chart(
            &format!("{}: IP RoCoF", traj.variant_id()),
            "Hz/s",
            &[
                svg::Series {
                    label: "100 ms",
                    points: points(|m| m.rocof_ms(100).unwrap_or(f64::NAN)),
                },
                svg::Series {
                    label: "500 ms",
                    points: points(|m| m.rocof_ms(500).unwrap_or(f64::NAN)),
                },
            ],
        );
        for (name, body) in [("nadir", nadir_svg), ("rocof", rocof_svg)] {
            let p = out.join(format!("plot_{stem}_{name}.svg"));
            write_text(&p, &body)?;
            rec.output(&p)?;
        }
    }

    let worst = rows
        .iter()
        .filter(|r| r.area == AreaId::Ip)
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r, m)))
        .max_by(|a, b| a.1.rocof_ms(100).partial_cmp(&b.1.rocof_ms(100)).unwrap_or(std::cmp::Ordering::Equal));
    println!("{}: {} snapshots, {failed} failed", traj.variant_id(), rows.len() / 2);
    if let Some((row, m)) = worst {
        print_report(&row.scenario_id, m);
    }
    rec.finish(out)?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &Path) -> Result<()> {
    let anchor = fio::read_anchor(&a.anchor)?;
    let s_base = anchor.params_o.base.s_base;
    let dist = disturbance(&a.dist, s_base)?;
    let mut rec = Recorder::new(
        "synth-event",
        json!({ "disturbance": dist, "span": a.span, "record_dt": a.record_dt, "noise_mhz": a.noise_mhz }),
    );
    rec.seeds(a.seed, None);
    rec.input(&a.anchor)?;
    let event = synthetic_event(
        &anchor.params_o,
        &dist,
        Some(anchor.mix_o.clone()),
        a.span,
        a.record_dt,
        a.noise_mhz * 1e-3,
        a.seed,
    )?;
    let csv_path = out.join(format!("{}.csv", a.name));
    fio::write_recording_csv(create(&csv_path)?, &event.trace)?;
    rec.output(&csv_path)?;
    let sidecar = EventSidecar {
        notes: Some(format!(
            "synthetic: reference model, {} mHz Gaussian noise, seed {}",
            a.noise_mhz, a.seed
        )),
        disturbance: SidecarDisturbance {
            area: dist.area,
            mw: a.dist.dp_gw * 1000.0,
            t_start: dist.t_start,
        },
        dispatch: event.mix_at_event.clone(),
        f0: anchor.params_o.base.f0,
        s_base,
    };
    let json_path = out.join(format!("{}.json", a.name));
    fio::write_json(&json_path, &sidecar)?;
    rec.output(&json_path)?;
    rec.finish(out)?;
    Ok(())
}
