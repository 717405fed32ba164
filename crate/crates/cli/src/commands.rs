use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use hmt_core::learner::{
    evaluate, stats, train as train_runs, Checkpoint, EvalPoint, EvalPolicy, TrainConfig, TrainHooks, TransitionSource, Variant,
};
use hmt_core::orchestrator::{
    build_demo_store, default_bindings, load_records, policy_bindings, replay_episode, run_batch, DemoFilter,
    PolicyRegistry, RunStore,
};
use hmt_core::plot;
use hmt_service::protocol::Pacing;
use hmt_service::{AppState, ServiceConfig};
use serde_json::json;

use crate::io::{self, RunManifest, SeedSummary, RUN_FORMAT};
use crate::{
    CompareArgs, CurvesArgs, DemosBuildArgs, EvalArgs, ReplayArgs, ServeArgs, SourceArg, TrainArgs, TrajectoriesArgs,
    VariantArg,
};

pub fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Plain => Variant::Plain,
        VariantArg::Ph => Variant::Ph,
        VariantArg::Mh => Variant::Mh,
    }
}

/// Config file (or the variant defaults) with command-line overrides.
pub fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    // fields missing from the file keep the variant's defaults
    let mut cfg = TrainConfig::for_variant(variant(a.variant));
    if let Some(path) = &a.config {
        let mut merged = serde_json::to_value(&cfg)?;
        let serde_json::Value::Object(file) = io::read_json::<serde_json::Value>(path)? else {
            bail!("{}: training config must be a JSON object", path.display());
        };
        merged.as_object_mut().expect("struct serializes to an object").extend(file);
        cfg = serde_json::from_value(merged).with_context(|| format!("{}", path.display()))?;
        cfg.variant = variant(a.variant);
    }
    if let Some(seeds) = &a.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(n) = a.max_episodes {
        cfg.max_episodes = n;
    }
    if a.stop_at.is_some() {
        cfg.stop_at_success = a.stop_at;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Progress;

impl TrainHooks for Progress {
    fn on_eval(&self, seed: u64, point: EvalPoint, _: &Checkpoint) {
        tracing::info!(seed, episode = point.episode, success_rate = point.success_rate, "evaluation");
    }
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    let cfg = train_config(&a)?;
    let scenario = io::scenario(&a.scenario.scenario)?;
    let demos = a.demos.as_deref().map(io::demos).transpose()?;
    let runs = train_runs(&cfg, &scenario, demos.as_ref(), &Progress)?;

    let ckpt_dir = a.out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).with_context(|| format!("creating {}", ckpt_dir.display()))?;
    let mut seeds = Vec::new();
    let mut curves = String::from("seed,episode,success_rate\n");
    for run in &runs {
        let seed = run.report.seed;
        curves.push_str(&run.report.csv_rows());
        if a.all_checkpoints {
            for c in &run.checkpoints {
                c.save(&ckpt_dir.join(format!("seed-{seed}-ep{}.json", c.episode)))?;
            }
        }
        let best = run.best_checkpoint();
        let checkpoint = match best {
            Some(c) => {
                let rel = format!("checkpoints/seed-{seed}-best.json");
                c.save(&a.out.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        println!(
            "seed {seed}: best {} at episode {}, {} updates",
            best.map_or("n/a".into(), |c| format!("{:.3}", c.success_rate)),
            best.map_or("n/a".into(), |c| c.episode.to_string()),
            run.updates
        );
        seeds.push(SeedSummary {
            seed,
            best_episode: best.map(|c| c.episode),
            best_success_rate: best.map(|c| c.success_rate),
            updates: run.updates,
            transitions: run.transitions,
            checkpoint,
        });
    }
    let manifest = RunManifest {
        format: RUN_FORMAT.into(),
        software_version: hmt_core::SOFTWARE_VERSION.into(),
        train_config: cfg,
        scenario: (*scenario).clone(),
        seeds,
    };
    let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
    io::write(&a.out.join("run.json"), serde_json::to_string_pretty(&manifest)?)?;
    io::write(&a.out.join("reports.json"), serde_json::to_string_pretty(&reports)?)?;
    io::write(&a.out.join("curves.csv"), curves)?;
    Ok(ExitCode::SUCCESS)
}

fn policy_id(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let id: String = stem.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if id.is_empty() { "policy".into() } else { id }
}

pub fn eval(a: EvalArgs) -> Result<ExitCode> {
    let scenario = io::scenario(&a.scenario.scenario)?;
    let ckpt = match a.policy.as_str() {
        "heuristic" => None,
        path => Some(Checkpoint::load(Path::new(path))?),
    };
    if let Some(c) = &ckpt {
        if (c.layout.blue_count, c.layout.red_count) != (scenario.blue_count, scenario.red_count) {
            bail!(
                "checkpoint was trained on {}v{}, scenario is {}v{}",
                c.layout.blue_count,
                c.layout.red_count,
                scenario.blue_count,
                scenario.red_count
            );
        }
    }
    let rate = match &a.record {
        // the orchestrated episodes are the same ones `evaluate` plays
        Some(dir) => {
            let store = RunStore::open(dir)?;
            let mut registry = PolicyRegistry::new();
            let id = ckpt.as_ref().map(|c| {
                let id = policy_id(Path::new(&a.policy));
                registry.insert(id.clone(), Arc::new(c.net.clone()));
                id
            });
            let bindings = move |w: &hmt_core::sim::World| match &id {
                Some(id) => policy_bindings(w, id),
                None => default_bindings(w),
            };
            let batch = run_batch(scenario.clone(), &bindings, a.episodes, rayon_threads(), a.seed, &registry)?;
            for (i, r) in batch.records.iter().enumerate() {
                let record = r.as_ref().map_err(|e| anyhow::anyhow!("episode {i}: {e}"))?;
                store.save(&format!("seed{}-ep{i:05}", a.seed), record)?;
            }
            batch.success_rate()
        }
        None => {
            let policy = ckpt.as_ref().map_or(EvalPolicy::Heuristic, |c| EvalPolicy::Greedy(&c.net));
            evaluate(policy, &scenario, a.episodes, a.seed)?
        }
    };
    println!("{rate}");
    if let Some(path) = &a.csv {
        let fresh = !path.exists();
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "policy,scenario,episodes,seed,success_rate")?;
        }
        writeln!(f, "{},{},{},{},{rate}", a.policy, a.scenario.scenario, a.episodes, a.seed)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn serve(a: ServeArgs) -> Result<ExitCode> {
    let scenario = io::scenario(&a.scenario.scenario)?;
    let mut policies = PolicyRegistry::new();
    let default_policy = match &a.policy {
        Some(path) => {
            let c = Checkpoint::load(path)?;
            let id = policy_id(path);
            policies.insert(id.clone(), Arc::new(c.net));
            Some(id)
        }
        None => None,
    };
    let state = AppState::new(ServiceConfig {
        store: Some(RunStore::open(&a.store)?),
        policies,
        default_policy,
        default_config: (*scenario).clone(),
        pacing: Pacing { steps_per_second: a.steps_per_second, decimation: a.decimation },
        static_dir: a.static_dir,
    });
    let addr = format!("{}:{}", a.host, a.port).parse().context("listen address")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(hmt_service::serve(state, addr))?;
    Ok(ExitCode::SUCCESS)
}

pub fn parse_policies(specs: &[String]) -> Result<PolicyRegistry> {
    let mut registry = PolicyRegistry::new();
    for spec in specs {
        let Some((id, path)) = spec.split_once('=') else { bail!("expected ID=PATH, got {spec:?}") };
        registry.insert(id.to_owned(), Arc::new(Checkpoint::load(Path::new(path))?.net));
    }
    Ok(registry)
}

pub fn replay(a: ReplayArgs) -> Result<ExitCode> {
    let policies = parse_policies(&a.policies)?;
    let records = load_records(&a.path)?;
    if records.is_empty() {
        bail!("no episodes in {}", a.path.display());
    }
    let mut failed = 0;
    for (i, record) in records.iter().enumerate() {
        match replay_episode(record, &policies) {
            Ok(_) => println!("episode {i} (seed {}): ok, {} steps", record.header.seed, record.steps.len()),
            Err(e) => {
                failed += 1;
                println!("episode {i} (seed {}): MISMATCH: {e}", record.header.seed);
            }
        }
    }
    println!("{}/{} episodes replayed identically", records.len() - failed, records.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

pub fn demos_build(a: DemosBuildArgs) -> Result<ExitCode> {
    let records = load_records(&a.episodes)?;
    let filter = DemoFilter {
        winners_only: !a.all_outcomes,
        sources: a.only.map(|s| {
            vec![match s {
                SourceArg::Human => TransitionSource::DemoHuman,
                SourceArg::Agent => TransitionSource::DemoAgent,
            }]
        }),
    };
    let (store, summary) = build_demo_store(&records, &filter)?;
    io::write(&a.out, serde_json::to_string(&store)?)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(ExitCode::SUCCESS)
}

pub fn stats_compare(a: CompareArgs) -> Result<ExitCode> {
    let ett = |dir: &Path| -> Result<Vec<f64>> {
        let run = io::load_run(dir)?;
        let censor = run.manifest.train_config.max_episodes;
        Ok(run.reports.iter().map(|r| stats::episodes_to_threshold(&r.points, a.threshold, censor) as f64).collect())
    };
    let (ea, eb) = (ett(&a.run_a)?, ett(&a.run_b)?);
    let c = stats::compare_runs(&ea, &eb)?;
    let out = json!({
        "threshold": a.threshold,
        "a": { "run": a.run_a, "episodes_to_threshold": ea, "median": stats::median(&ea), "mean": c.mean_a },
        "b": { "run": a.run_b, "episodes_to_threshold": eb, "median": stats::median(&eb), "mean": c.mean_b },
        "welch_t": c.t,
        "df": c.df,
        "p": c.p,
        "cohens_d": c.cohens_d,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

pub fn plot_curves(a: CurvesArgs) -> Result<ExitCode> {
    let mut runs = Vec::new();
    for spec in &a.runs {
        let (label, dir) = match spec.split_once('=') {
            Some((l, d)) => (l.to_owned(), Path::new(d)),
            None => {
                let d = Path::new(spec);
                (d.file_name().map_or(spec.clone(), |n| n.to_string_lossy().into_owned()), d)
            }
        };
        runs.push((label, io::load_run(dir)?.reports));
    }
    io::write(&io::with_ext(&a.out, "csv"), plot::curves_csv(&runs))?;
    io::write(&io::with_ext(&a.out, "svg"), plot::curves_svg(&runs))?;
    Ok(ExitCode::SUCCESS)
}

pub fn plot_trajectories(a: TrajectoriesArgs) -> Result<ExitCode> {
    let records = load_records(&a.from)?;
    let mut trajs = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if trajs.len() == a.episodes {
            break;
        }
        if r.blue_won() {
            trajs.extend(plot::relative_trajectory(r, format!("episode {}", i + 1)));
        }
    }
    if trajs.is_empty() {
        bail!("no episode in {} ended with a neutralization", a.from.display());
    }
    if trajs.len() < a.episodes {
        eprintln!("warning: only {} of {} requested episodes ended with a neutralization", trajs.len(), a.episodes);
    }
    io::write(&io::with_ext(&a.out, "csv"), plot::trajectories_csv(&trajs))?;
    io::write(&io::with_ext(&a.out, "svg"), plot::trajectories_svg(&trajs))?;
    println!("{} episodes plotted", trajs.len());
    Ok(ExitCode::SUCCESS)
}
