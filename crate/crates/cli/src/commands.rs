use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use frisson_core::feedback::{build_keyframes, keyframes_to_json};
use frisson_core::server::{Hub, HubConfig, Server};
use frisson_core::signal::{aggregate, run_pipeline};
use frisson_core::simulator::{evaluate, simulate_cohort, CohortSpec};
use frisson_core::storage::{self, FrissonRecord, SessionRecord};
use frisson_core::{align_session, EdaTrace, Error, PipelineConfig, Result};
use tracing::{info, warn};

use crate::{AggregateArgs, Command, EvalArgs, KeyframesArgs, ProcessArgs, ServeArgs, SimulateArgs};

/// Name of the ground-truth file written into each simulated session directory.
pub const TRUTH_FILE: &str = "truth.txt";

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Process(args) => process(args),
        Command::Aggregate(args) => aggregate_cmd(args),
        Command::Simulate(args) => simulate(args),
        Command::Eval(args) => eval(args),
        Command::Keyframes(args) => keyframes(args),
        Command::Serve(args) => serve(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let cfg = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::format(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::format(format!("{}: {}", p.display(), e.message())))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn process(args: ProcessArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let record = storage::read_session(&args.session)?;
    let series = align_session(&record.eda, &record.events, cfg.sample_rate_hz)?;
    let out = run_pipeline(&series, &cfg)?;
    storage::write_frisson(
        &args.out,
        &FrissonRecord {
            participant_id: record.participant_id,
            video_id: record.video_id,
            series: out.frisson,
        },
    )?;
    if let Some(path) = args.peaks {
        let times: Vec<f64> = out
            .peaks
            .iter()
            .map(|p| p.index as f64 / cfg.sample_rate_hz)
            .collect();
        storage::write_times(&path, &times)?;
    }
    Ok(())
}

fn aggregate_cmd(args: AggregateArgs) -> Result<()> {
    let records = storage::read_frisson_dir(&args.inputs, &args.video)?;
    if records.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no frisson series for video {} in {}",
            args.video,
            args.inputs.display()
        )));
    }
    let series: Vec<_> = records.into_iter().map(|r| r.series).collect();
    let agg = aggregate(&args.video, &series)?;
    storage::write_aggregate(&args.out, &agg)?;
    if let Some(path) = args.dump_csv {
        let mut csv = String::from("t_s,a\n");
        for (k, a) in agg.values.iter().enumerate() {
            let _ = writeln!(csv, "{},{}", k as f64 / agg.grid_hz, a);
        }
        fs::write(path, csv)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = CohortSpec {
        participants: args.participants,
        duration_s: args.duration,
        events_per_participant: args.events,
        min_gap_s: args.min_gap,
        noise_frac: args.noise,
        drift_frac: args.drift,
        seed: args.seed,
        ..CohortSpec::default()
    };
    for p in simulate_cohort(&spec)? {
        let dir = args.out.join(&p.participant_id);
        storage::write_session(
            &dir,
            &SessionRecord {
                participant_id: p.participant_id,
                video_id: args.video.clone(),
                eda: EdaTrace::from(&p.series),
                events: p.events,
            },
        )?;
        storage::write_times(&dir.join(TRUTH_FILE), &p.truth)?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(Error::param("--tol must be >= 0"));
    }
    let mut detected = storage::read_times(&args.detected)?;
    let mut truth = storage::read_times(&args.truth)?;
    detected.sort_by(f64::total_cmp);
    truth.sort_by(f64::total_cmp);
    let r = evaluate(&detected, &truth, args.tol);
    println!("precision={:.3}", r.precision);
    println!("recall={:.3}", r.recall);
    Ok(())
}

fn keyframes(args: KeyframesArgs) -> Result<()> {
    let agg = storage::read_aggregate(&args.aggregate)?;
    let kf = build_keyframes(&agg, args.design);
    fs::write(&args.out, keyframes_to_json(args.design, &kf)?)?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let config = HubConfig {
        pipeline: load_config(args.config.as_deref())?,
        auto_feedback: args.feedback,
        ..HubConfig::new(args.data)
    };
    let hub = Hub::new(config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let server = Server::bind(args.listen, hub.clone()).await?;
        tokio::select! {
            r = server.run() => r?,
            _ = tokio::signal::ctrl_c() => {
                let n = hub.persist_sessions()?;
                info!(participants = n, "sessions persisted");
                for (session, result) in hub.finalize_all() {
                    match result {
                        Ok(r) => info!(
                            session,
                            video = %r.aggregate.video_id,
                            viewers = r.aggregate.n_viewers,
                            skipped = r.skipped.len(),
                            "session finalized"
                        ),
                        Err(e) => warn!(session, error = %e, "session not finalized"),
                    }
                }
            }
        }
        Ok(())
    })
}
