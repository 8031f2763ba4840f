use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sagaze_core::dataset::{list_trials, load_dataset, load_trial, trial_stem};
use sagaze_core::metrics::{window_metrics, METRIC_NAMES};
use sagaze_core::synth::generate_dataset;
use sagaze_core::{evaluate, EventKind, GazeEvent, SaLabel, TrialRecording};
use sagaze_fixgraphpool::{predict_all, FixGraphPool};
use sagaze_harness::experiment::build_windows;
use sagaze_harness::report::config_hash;
use sagaze_harness::{predict_logreg, process_trial, run_experiment, FoldReport, FoldSummary, LogisticModel};

use crate::args::{Cli, Command, Common, DataArgs};
use crate::config::RunConfig;
use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";
pub const EVAL_FILE: &str = "eval.json";

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(common) => synth(&common),
        Command::Preprocess(args) => preprocess(&args),
        Command::Metrics { data, window } => metrics(&data, window),
        Command::Graphs(args) => graphs(&args),
        Command::Train { data, folds } => train(&data, folds),
        Command::Eval { data, model } => eval(&data, &model),
        Command::Defaults => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| CliError::Usage("an output directory is required (--out or out_dir)".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn data_dir(args: &DataArgs, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    args.data
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .ok_or_else(|| CliError::Usage("a dataset directory is required (--data or data_dir)".into()))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(pool.install(f))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn synth(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let out = out_dir(common, &cfg)?;
    let trials = generate_dataset(&cfg.synth, cfg.seed, &out).map_err(|e| match e {
        sagaze_core::synth::SynthError::Config(m) => CliError::Config(m),
        other => CliError::Data(other.to_string()),
    })?;
    let manifest = serde_json::json!({ "seed": cfg.seed, "synth": cfg.synth });
    write(
        &out.join("synth_manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    let good = trials.iter().filter(|t| t.sa_label == SaLabel::Good).count();
    println!(
        "wrote {} trials ({good} good, {} poor) to {} with seed {}",
        trials.len(),
        trials.len() - good,
        out.display(),
        cfg.seed
    );
    Ok(())
}

#[derive(Serialize)]
struct EventRow {
    kind: EventKind,
    t_start: f64,
    t_end: f64,
    duration: f64,
    first_sample: usize,
    last_sample: usize,
    eye_x: f64,
    eye_y: f64,
    eye_z: f64,
    azimuth_rad: Option<f64>,
    elevation_rad: Option<f64>,
    on_virtual: Option<bool>,
    amplitude_deg: Option<f64>,
    mean_velocity_deg_s: Option<f64>,
    peak_velocity_deg_s: Option<f64>,
    path_length_deg: Option<f64>,
}

impl From<&GazeEvent> for EventRow {
    fn from(e: &GazeEvent) -> Self {
        Self {
            kind: e.kind,
            t_start: e.t_start,
            t_end: e.t_end,
            duration: e.duration,
            first_sample: e.first_sample,
            last_sample: e.last_sample,
            eye_x: e.mean_eye_center.x,
            eye_y: e.mean_eye_center.y,
            eye_z: e.mean_eye_center.z,
            azimuth_rad: e.centroid_dir.map(|d| d.0),
            elevation_rad: e.centroid_dir.map(|d| d.1),
            on_virtual: e.on_virtual,
            amplitude_deg: e.amplitude,
            mean_velocity_deg_s: e.mean_velocity,
            peak_velocity_deg_s: e.peak_velocity,
            path_length_deg: e.path_length,
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    trial: String,
    status: &'static str,
    fixations: usize,
    saccades: usize,
    blinks: usize,
    error: String,
}

fn preprocess_one(cfg: &RunConfig, trial: &TrialRecording, out: &Path) -> Result<[usize; 3], CliError> {
    let processed = process_trial(trial, &cfg.classifier)?;
    let path = out.join(format!("{}.events.csv", trial_stem(trial)));
    let mut w = csv_writer(&path)?;
    for e in &processed.events {
        w.serialize(EventRow::from(e)).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let count = |k| processed.events.iter().filter(|e| e.kind == k).count();
    Ok([count(EventKind::Fixation), count(EventKind::Saccade), count(EventKind::Blink)])
}

fn preprocess(args: &DataArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let data = data_dir(args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let files = list_trials(&data)?;
    let results = with_jobs(args.common.jobs, || {
        use rayon::prelude::*;
        files
            .par_iter()
            .map(|f| {
                let trial = load_trial(f)?;
                preprocess_one(&cfg, &trial, &out)
            })
            .collect::<Vec<_>>()
    })?;
    let summary_path = out.join("preprocess_summary.csv");
    let mut w = csv_writer(&summary_path)?;
    let mut failed = 0;
    for (f, r) in files.iter().zip(&results) {
        let row = match r {
            Ok(c) => SummaryRow {
                trial: f.stem(),
                status: "ok",
                fixations: c[0],
                saccades: c[1],
                blinks: c[2],
                error: String::new(),
            },
            Err(e) => {
                failed += 1;
                log::error!("{}: {e}", f.stem());
                SummaryRow {
                    trial: f.stem(),
                    status: "failed",
                    fixations: 0,
                    saccades: 0,
                    blinks: 0,
                    error: e.to_string(),
                }
            }
        };
        w.serialize(row).map_err(csv_err(&summary_path))?;
    }
    w.flush().map_err(|e| CliError::io(&summary_path, e))?;
    println!("preprocessed {} of {} trials into {}", files.len() - failed, files.len(), out.display());
    if failed > 0 {
        return Err(CliError::Data(format!(
            "{failed} of {} trials failed; see {}",
            files.len(),
            summary_path.display()
        )));
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn metrics(args: &DataArgs, window: u32) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let data = data_dir(args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let trials = load_dataset(&data)?;
    let length = f64::from(window);

    let rows_path = out.join(format!("metrics_w{window}.csv"));
    let mut w = csv_writer(&rows_path)?;
    let mut header = vec!["participant_id", "incident", "sa_label", "window_start", "window_end"];
    header.extend(METRIC_NAMES);
    w.write_record(&header).map_err(csv_err(&rows_path))?;

    let mut sums: BTreeMap<SaLabel, (usize, [f64; 11], [usize; 11])> = BTreeMap::new();
    for trial in &trials {
        let p = process_trial(trial, &cfg.classifier)?;
        let t1 = p.incident_time;
        let t0 = (t1 - length).max(p.start_time);
        let m = window_metrics(&p.events, &p.pupil_z, t0, t1)
            .map_err(|e| CliError::Data(format!("{}/{}: {e}", trial.participant_id, trial.incident)))?;
        let values = m.values();
        let mut record = vec![
            trial.participant_id.clone(),
            trial.incident.to_string(),
            trial.sa_label.to_string(),
            t0.to_string(),
            t1.to_string(),
        ];
        record.extend(values.iter().map(|v| fmt_opt(*v)));
        w.write_record(&record).map_err(csv_err(&rows_path))?;
        let entry = sums.entry(trial.sa_label).or_insert((0, [0.0; 11], [0; 11]));
        entry.0 += 1;
        for (k, v) in values.iter().enumerate() {
            if let Some(v) = v {
                entry.1[k] += v;
                entry.2[k] += 1;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(&rows_path, e))?;

    let means_path = out.join(format!("metrics_w{window}_by_label.csv"));
    let mut w = csv_writer(&means_path)?;
    let mut header = vec!["sa_label", "trials"];
    header.extend(METRIC_NAMES);
    w.write_record(&header).map_err(csv_err(&means_path))?;
    println!("{:<6}{:>7}{}", "label", "trials", METRIC_NAMES.iter().map(|n| format!("{n:>9}")).collect::<String>());
    for (label, (n, total, count)) in &sums {
        let means: Vec<Option<f64>> = (0..11).map(|k| (count[k] > 0).then(|| total[k] / count[k] as f64)).collect();
        let mut record = vec![label.to_string(), n.to_string()];
        record.extend(means.iter().map(|v| fmt_opt(*v)));
        w.write_record(&record).map_err(csv_err(&means_path))?;
        let cells: String = means.iter().map(|v| v.map_or(format!("{:>9}", "-"), |x| format!("{x:>9.3}"))).collect();
        println!("{:<6}{n:>7}{cells}", label.to_string());
    }
    w.flush().map_err(|e| CliError::io(&means_path, e))?;
    println!("{window} s windows of {} trials written to {}", trials.len(), rows_path.display());
    Ok(())
}

fn graphs(args: &DataArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let data = data_dir(args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let trials = load_dataset(&data)?;
    let windows = with_jobs(args.common.jobs, || build_windows(&trials, &cfg.experiment()))??;

    let dir = out.join("graphs");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let index_path = out.join("graphs_index.csv");
    let mut w = csv_writer(&index_path)?;
    w.write_record(["file", "participant_id", "incident", "window_start", "window_end", "sa_label", "nodes", "edges"])
        .map_err(csv_err(&index_path))?;
    let mut counter: BTreeMap<(String, String), usize> = BTreeMap::new();
    for s in &windows {
        let k = counter.entry((s.participant_id.clone(), s.incident.to_string())).or_default();
        let name = format!("{}_{}_w{:02}.json", s.participant_id, s.incident, k);
        *k += 1;
        write(&dir.join(&name), &s.graph.to_json())?;
        w.write_record([
            format!("graphs/{name}"),
            s.participant_id.clone(),
            s.incident.to_string(),
            s.window[0].to_string(),
            s.window[1].to_string(),
            s.label.to_string(),
            s.graph.num_nodes().to_string(),
            s.graph.num_edges().to_string(),
        ])
        .map_err(csv_err(&index_path))?;
    }
    w.flush().map_err(|e| CliError::io(&index_path, e))?;
    println!("wrote {} window graphs to {}", windows.len(), dir.display());
    Ok(())
}

fn checkpoint_paths(dir: &Path, fold: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("fold{fold}.model.json")), dir.join(format!("fold{fold}.baseline.json")))
}

fn train(args: &DataArgs, folds: Option<usize>) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(k) = folds {
        cfg.harness.folds = k;
        cfg.validate()?;
    }
    let data = data_dir(args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let trials = load_dataset(&data)?;
    let result = run_experiment(&trials, &cfg.experiment(), cfg.seed, args.common.jobs)?;

    let stored = RunConfig { data_dir: None, out_dir: None, ..cfg.clone() };
    write(&out.join(CONFIG_FILE), &(serde_json::to_string_pretty(&stored).expect("config serializes") + "\n"))?;
    write(&out.join(REPORT_FILE), &(result.report.to_json() + "\n"))?;
    write(&out.join("report.txt"), &result.report.to_table())?;
    for f in &result.folds {
        let (model, baseline) = checkpoint_paths(&out, f.fold);
        write(&model, &f.model.to_checkpoint())?;
        write(&baseline, &(serde_json::to_string_pretty(&f.baseline).expect("baseline serializes") + "\n"))?;
    }
    print!("{}", result.report.to_table());
    println!("report written to {}", out.join(REPORT_FILE).display());
    Ok(())
}

fn eval(args: &DataArgs, model_dir: &Path) -> Result<(), CliError> {
    let read = |p: PathBuf| fs::read_to_string(&p).map_err(|e| CliError::io(&p, e));
    let mut cfg: RunConfig = serde_json::from_str(&read(model_dir.join(CONFIG_FILE))?)
        .map_err(|e| CliError::Data(format!("{}: {e}", model_dir.join(CONFIG_FILE).display())))?;
    if args.common.config.is_some() || args.common.seed.is_some() {
        log::warn!("eval uses the configuration stored with the model; --config and --seed are ignored");
    }
    cfg.out_dir = None;
    let trained = FoldReport::from_json(&read(model_dir.join(REPORT_FILE))?)
        .map_err(|e| CliError::Data(format!("{}: {e}", model_dir.join(REPORT_FILE).display())))?;
    let data = data_dir(args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let trials = load_dataset(&data)?;
    let exp = cfg.experiment();
    let windows = with_jobs(args.common.jobs, || build_windows(&trials, &exp))??;

    let mut summaries = Vec::with_capacity(trained.fold_details.len());
    for detail in &trained.fold_details {
        let (model_path, baseline_path) = checkpoint_paths(model_dir, detail.fold);
        let model = FixGraphPool::from_checkpoint(&read(model_path)?)?;
        let baseline: LogisticModel = serde_json::from_str(&read(baseline_path.clone())?)
            .map_err(|e| CliError::Data(format!("{}: {e}", baseline_path.display())))?;
        let test: Vec<usize> =
            (0..windows.len()).filter(|&i| detail.test_participants.contains(&windows[i].participant_id)).collect();
        if test.is_empty() {
            return Err(CliError::Data(format!(
                "fold {}: no windows of its test participants in {}",
                detail.fold,
                data.display()
            )));
        }
        let graphs: Vec<_> = test.iter().map(|&i| windows[i].graph.clone()).collect();
        let labels: Vec<SaLabel> = test.iter().map(|&i| windows[i].label).collect();
        let preds = predict_all(&model, &graphs)?;
        let lr_preds: Vec<SaLabel> = test.iter().map(|&i| predict_logreg(&baseline, &windows[i].features)).collect();
        let metric = |p: &[SaLabel]| evaluate(p, &labels).map_err(|e| CliError::Internal(e.to_string()));
        summaries.push(FoldSummary {
            fold: detail.fold,
            test_participants: detail.test_participants.clone(),
            train_windows: detail.train_windows,
            test_indices: test,
            metrics: metric(&preds)?,
            baseline_metrics: metric(&lr_preds)?,
            baseline_lambda: baseline.lambda,
        });
    }
    let report = FoldReport::from_summaries(config_hash(&exp), cfg.seed, &windows, &summaries);
    write(&out.join(EVAL_FILE), &(report.to_json() + "\n"))?;
    write(&out.join("eval.txt"), &report.to_table())?;
    print!("{}", report.to_table());
    println!("evaluation written to {}", out.join(EVAL_FILE).display());
    Ok(())
}
