//! Command line front-end.

mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ditchkit::dataset::{
    build_splits, normalization_constants, read_dlf, simulate_cases, sweep, write_dlf, CaseRecord, Dataset, DatasetOptions,
    SweepConfig, STEP_EVERY,
};
use ditchkit::dynamics::{simulate, SimOptions};
use ditchkit::eval::{
    aggregate_seeds, frame_norms, heatmap_svg, line_plot_svg, peak_map_grid, peak_time_map, rollout_rmse, RunGrid, Series,
    PEAK_THRESHOLD_PA,
};
use ditchkit::geometry::{GeometryConfig, Scenario};
use ditchkit::nn::Adam;
use ditchkit::rom::{column_frame, dmd_fit_frames, dmd_predict, pod_fit, snapshot_matrix, write_drom};
use ditchkit::surrogates::{
    count_params, rollout_case, sequence_samples, train, train_unfilter, unfilter_pairs, ArchDims, KaeWeights, ModelArch,
    ModelMeta, Surrogate, TrainConfig, TrainReport, Variant,
};
use ditchkit::{Error, Result};

pub const SEED_ENV: &str = "DITCHKIT_SEED";

#[derive(Parser)]
#[command(name = "ditchkit", version, about = "Ditching load simulation, datasets and surrogate models")]
struct Cli {
    /// Seed for every random stream (overrides $DITCHKIT_SEED and config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario: full-grid load DLF and motion CSV.
    Simulate(SimulateArgs),
    /// Simulate a train/val/test velocity sweep.
    Sweep(SweepArgs),
    /// Cut, blur and scale patch datasets from a sweep.
    Dataset(DatasetArgs),
    /// Train a surrogate (or count its parameters).
    Train(TrainArgs),
    /// Autoregressive prediction of test cases from a checkpoint.
    Rollout(RolloutArgs),
    /// POD reconstruction or DMD prediction of one case.
    Rom(RomArgs),
    /// RMSE series, total average errors and winner counts.
    Evaluate(EvaluateArgs),
    /// SVG heatmaps, peak-time maps and RMSE line plots.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory written by `sweep`.
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long, default_value_t = 128)]
    patch: usize,
    #[arg(long)]
    stop_threshold_pa: Option<f64>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    no_blur: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_variant)]
    arch: Variant,
    /// Training DLF (unblurred frames for the unfilter network).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation DLF, monitored only.
    #[arg(long)]
    val: Option<PathBuf>,
    /// JSON training configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Patch size for --count-params-only (128 gives the full-size models).
    #[arg(long)]
    patch: Option<usize>,
    /// Retrain a collapsed Koopman encoder up to this many times with new seeds.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long)]
    count_params_only: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Case index (default: every case).
    #[arg(long)]
    case: Option<usize>,
    /// Koopman models only: advance in the latent space without re-encoding.
    #[arg(long)]
    latent_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RomKind {
    Pod,
    Dmd,
}

#[derive(Args)]
struct RomArgs {
    #[arg(long, value_enum)]
    kind: RomKind,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    case: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Test DLF.
    #[arg(long)]
    data: PathBuf,
    /// Directory holding `<arch>_s<seed>.dkpt` checkpoints.
    #[arg(long)]
    ckpt_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "cjm,cjmdd,cjmnlb,kae")]
    archs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Also score Koopman latent-only rollouts as model `kae_latent`.
    #[arg(long)]
    kae_latent: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PlotKind {
    Frames,
    Peak,
    Rmse,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// DLF for frame and peak plots.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    case: usize,
    /// Frame indices for frame plots (default: first, middle, last).
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    #[arg(long, default_value_t = PEAK_THRESHOLD_PA)]
    threshold_pa: f32,
    /// rmse_series.csv for RMSE plots.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

/// Flag, then environment, then config value.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(config.unwrap_or(0)),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn split_dataset(cases: Vec<CaseRecord>) -> Dataset {
    let (x_min, x_max) = normalization_constants(&cases).unwrap_or((0.0, 1.0));
    Dataset { cases, x_min, x_max }
}

#[derive(Serialize, Deserialize)]
struct SimulateConfig {
    #[serde(default)]
    geometry: GeometryConfig,
    scenario: Scenario,
    #[serde(default = "default_step_every")]
    step_every: usize,
}

fn default_step_every() -> usize {
    STEP_EVERY
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = read_json(&a.config)?;
    let mesh = cfg.geometry.build()?;
    let history = simulate(&cfg.scenario, &mesh, SimOptions { record_every: cfg.step_every })?;
    let record = ditchkit::dataset::full_grid_record(&history, &cfg.scenario, cfg.step_every)?;
    write_dlf(&split_dataset(vec![record]), &a.out.join("loads.dlf"))?;
    write_text(&a.out.join("motion.csv"), &history.motion_csv())?;
    let summary = json!({
        "impact_time_s": history.impact_time(),
        "exit_times_s": history.exit_times,
        "end": history.end,
        "steps": history.samples.len(),
    });
    write_text(&a.out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    manifest::write(&a.out, "simulate", None, &serde_json::to_value(&cfg)?)
}

#[derive(Serialize, Deserialize)]
struct SweepFileConfig {
    #[serde(default)]
    geometry: GeometryConfig,
    /// Scenario template; speeds and pitch are replaced per case.
    #[serde(default = "default_base")]
    base: Scenario,
    sweep: SweepConfig,
    #[serde(default = "default_step_every")]
    step_every: usize,
}

fn default_base() -> Scenario {
    Scenario::d150(70.0, 1.5)
}

fn cmd_sweep(a: &SweepArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: SweepFileConfig = read_json(&a.config)?;
    cfg.sweep.seed = resolve_seed(seed, Some(cfg.sweep.seed))?;
    let mesh = cfg.geometry.build()?;
    let plan = sweep(&cfg.sweep, &cfg.base)?;
    for (name, scenarios) in [("train", &plan.train), ("val", &plan.val), ("test", &plan.test)] {
        log::info!("simulating {} {name} cases", scenarios.len());
        let cases = simulate_cases(scenarios, &mesh, cfg.step_every)?;
        write_dlf(&split_dataset(cases), &a.out.join(format!("{name}.dlf")))?;
    }
    let scen = json!({"train": plan.train, "val": plan.val, "test": plan.test});
    write_text(&a.out.join("scenarios.json"), &(serde_json::to_string_pretty(&scen)? + "\n"))?;
    manifest::write(&a.out, "sweep", Some(cfg.sweep.seed), &serde_json::to_value(&cfg)?)
}

fn cmd_dataset(a: &DatasetArgs) -> Result<()> {
    let mut opts = DatasetOptions::new(a.patch);
    if let Some(t) = a.stop_threshold_pa {
        opts.stop_threshold_pa = t;
    }
    opts.max_frames = a.max_frames;
    opts.blur = !a.no_blur;
    let load = |name: &str| read_dlf(&a.sweep.join(format!("{name}.dlf")));
    let (train_full, val_full, test_full) = (load("train")?, load("val")?, load("test")?);
    let s = build_splits(&train_full.cases, &val_full.cases, &test_full.cases, &opts)?;
    for (name, d) in [("train", &s.train), ("val", &s.val), ("test", &s.test), ("train_raw", &s.train_raw)] {
        write_dlf(d, &a.out.join(format!("{name}.dlf")))?;
    }
    let info = json!({"x_min": s.train.x_min, "x_max": s.train.x_max, "window": s.window});
    write_text(&a.out.join("normalization.json"), &(serde_json::to_string_pretty(&info)? + "\n"))?;
    let config = json!({"sweep": a.sweep, "options": opts});
    manifest::write(&a.out, "dataset", None, &config)
}

/// Optional overrides of a training run read from `--config`.
#[derive(Default, Serialize, Deserialize)]
struct TrainFileConfig {
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    ell: Option<usize>,
    kae: Option<KaeWeights>,
    dims: Option<ArchDims>,
}

fn desk_dims(patch: usize) -> ArchDims {
    if patch == ArchDims::full().patch {
        ArchDims::full()
    } else {
        ArchDims { patch, ..ArchDims::desk() }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let d = read_dlf(path)?;
    if d.frame_shape().is_none() {
        return Err(Error::config(format!("{} holds no frames", path.display())));
    }
    Ok(d)
}

fn cmd_train(a: &TrainArgs, seed: Option<u64>) -> Result<()> {
    let file: TrainFileConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainFileConfig::default(),
    };
    let ell = a.ell.or(file.ell).unwrap_or(3);
    if a.count_params_only {
        let patch = a.patch.unwrap_or(ArchDims::full().patch);
        let arch = ModelArch { variant: a.arch, ell, dims: file.dims.unwrap_or_else(|| desk_dims(patch)) };
        println!("{}", count_params(&arch)?);
        return Ok(());
    }
    let data_path = a.data.as_ref().ok_or_else(|| Error::config("--data is required for training"))?;
    let data = load_dataset(data_path)?;
    let (h, w) = data.frame_shape().expect("checked");
    if h != w {
        return Err(Error::config(format!("patches must be square, got {h}x{w}")));
    }
    let arch = ModelArch { variant: a.arch, ell, dims: file.dims.unwrap_or_else(|| desk_dims(h)) };
    let mut cfg = TrainConfig::for_variant(a.arch, resolve_seed(seed, file.seed)?);
    cfg.epochs = a.epochs.or(file.epochs).unwrap_or(cfg.epochs);
    cfg.batch = a.batch.or(file.batch).unwrap_or(cfg.batch);
    cfg.adam = Adam { lr: a.lr.or(file.lr).unwrap_or(cfg.adam.lr), ..cfg.adam };
    cfg.kae = file.kae.unwrap_or(cfg.kae);
    if let Some(wu) = a.warmup {
        cfg.kae.warmup_epochs = wu;
    }
    cfg.validate(a.arch)?;

    let (model, report, used_seed) = if a.arch == Variant::Unfilter {
        let (x, y) = unfilter_pairs(&data.cases, data.x_min, data.x_max)?;
        let mut m = Surrogate::<f32>::build(arch, cfg.seed)?;
        let r = train_unfilter(&mut m, &x, &y, &cfg)?;
        (m, r, cfg.seed)
    } else {
        let samples = sequence_samples(&data.cases, ell, data.x_min, data.x_max)?;
        let val = match &a.val {
            Some(p) => {
                let v = load_dataset(p)?;
                Some(sequence_samples(&v.cases, ell, data.x_min, data.x_max)?)
            }
            None => None,
        };
        let mut attempt = 0;
        loop {
            let s = cfg.seed.wrapping_add(attempt as u64 * 1_000_003);
            let mut m = Surrogate::<f32>::build(arch, s)?;
            let r = train(&mut m, &samples, val.as_ref(), &TrainConfig { seed: s, ..cfg })?;
            if r.collapse_epochs.is_empty() || attempt >= a.restarts {
                break (m, r, s);
            }
            attempt += 1;
            log::warn!("encoder collapse detected, restarting ({attempt}/{})", a.restarts);
        }
    };
    let stem = format!("{}_s{}", a.arch.name(), cfg.seed);
    let meta = ModelMeta { arch, seed: used_seed, x_min: data.x_min, x_max: data.x_max };
    model.save(&a.out.join(format!("{stem}.dkpt")), &meta)?;
    write_text(&a.out.join(format!("{stem}_log.csv")), &report.to_csv())?;
    report_summary(a.arch, &report, model.param_count());
    let config = json!({"arch": arch, "train": cfg, "data": data_path, "val": a.val, "restarts": a.restarts});
    manifest::write(&a.out, "train", Some(cfg.seed), &config)
}

fn report_summary(arch: Variant, r: &TrainReport, params: usize) {
    if let (Some(first), Some(last)) = (r.first_loss(), r.final_loss()) {
        log::info!("{}: {params} parameters, loss {first:.4e} -> {last:.4e} over {} epochs", arch.name(), r.epochs.len());
    }
    if !r.collapse_epochs.is_empty() {
        log::warn!("{}: latent collapse at epochs {:?}", arch.name(), r.collapse_epochs);
    }
}

fn pick_cases(d: &Dataset, case: Option<usize>) -> Result<Vec<usize>> {
    match case {
        Some(i) if i >= d.cases.len() => Err(Error::config(format!("case {i} out of range ({} cases)", d.cases.len()))),
        Some(i) => Ok(vec![i]),
        None => Ok((0..d.cases.len()).collect()),
    }
}

fn cmd_rollout(a: &RolloutArgs) -> Result<()> {
    let (model, meta) = Surrogate::load(&a.ckpt)?;
    let data = read_dlf(&a.data)?;
    let cases = pick_cases(&data, a.case)?;
    let preds = cases
        .par_iter()
        .map(|&i| rollout_case(&model, &data.cases[i], meta.x_min, meta.x_max, a.latent_only))
        .collect::<Result<Vec<_>>>()?;
    write_dlf(&Dataset { cases: preds, x_min: meta.x_min, x_max: meta.x_max }, &a.out.join("rollout.dlf"))?;
    let config = json!({"ckpt": a.ckpt, "data": a.data, "cases": cases, "latent_only": a.latent_only, "meta": meta});
    manifest::write(&a.out, "rollout", Some(meta.seed), &config)
}

fn cmd_rom(a: &RomArgs) -> Result<()> {
    let data = read_dlf(&a.data)?;
    let case = &data.cases[pick_cases(&data, Some(a.case))?[0]];
    let (h, w) = case.shape().ok_or_else(|| Error::config("case has no frames"))?;
    let frames = match a.kind {
        RomKind::Pod => {
            let x = snapshot_matrix(&case.frames)?;
            let pod = pod_fit(&x, a.rank)?;
            let rec = &pod.basis * (pod.basis.transpose() * &x);
            let sv: String = pod.singular_values.iter().enumerate().map(|(i, s)| format!("{i},{s:e}\n")).collect();
            write_text(&a.out.join("singular_values.csv"), &format!("index,sigma\n{sv}"))?;
            (0..rec.ncols()).map(|j| column_frame(rec.column(j).as_slice(), h, w)).collect::<Result<Vec<_>>>()?
        }
        RomKind::Dmd => {
            let model = dmd_fit_frames(&case.frames, a.rank)?;
            write_drom(&model, &a.out.join("dmd.drom"))?;
            let ev: String = model.eigenvalues.iter().map(|l| format!("{:e},{:e},{:e}\n", l.re, l.im, l.norm())).collect();
            write_text(&a.out.join("eigenvalues.csv"), &format!("re,im,abs\n{ev}"))?;
            dmd_predict(&model, 0, case.len())
                .iter()
                .map(|x| column_frame(x.as_slice(), h, w))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let rmse = ditchkit::eval::rmse_series(&frames, &case.frames, case.max_load() as f64)?;
    let csv: String = rmse.iter().enumerate().map(|(t, v)| format!("{t},{v:e}\n")).collect();
    write_text(&a.out.join("rom_rmse.csv"), &format!("step,rmse\n{csv}"))?;
    let name = match a.kind {
        RomKind::Pod => "pod_reconstruction.dlf",
        RomKind::Dmd => "dmd_prediction.dlf",
    };
    let out = CaseRecord { frames, ..case.clone() };
    write_dlf(&Dataset { cases: vec![out], x_min: data.x_min, x_max: data.x_max }, &a.out.join(name))?;
    let config = json!({"kind": a.kind, "rank": a.rank, "data": a.data, "case": a.case});
    manifest::write(&a.out, "rom", None, &config)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let data = read_dlf(&a.data)?;
    let mut models: Vec<(String, Variant, bool)> = Vec::new();
    for name in &a.archs {
        let v = Variant::parse(name)?;
        models.push((v.name().to_string(), v, false));
    }
    if a.kae_latent {
        models.push(("kae_latent".into(), Variant::Kae, true));
    }
    let names: Vec<&str> = models.iter().map(|m| m.0.as_str()).collect();
    let mut missing = Vec::new();
    let mut jobs = Vec::new();
    for (name, v, latent) in &models {
        for &seed in &a.seeds {
            let path = a.ckpt_dir.join(format!("{}_s{seed}.dkpt", v.name()));
            if path.exists() {
                jobs.push((name.clone(), *latent, seed, path));
            } else {
                missing.push(format!("{name} seed {seed} ({})", path.display()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(format!("missing checkpoints: {}", missing.join(", "))));
    }
    let loaded = jobs
        .into_iter()
        .map(|(name, latent, seed, path)| Ok((name, latent, seed, Surrogate::load(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    // Cases that end within the start window cannot be scored.
    let ell = loaded.iter().map(|(.., (_, meta))| meta.arch.ell).max().unwrap_or(0);
    let (case_ids, short): (Vec<usize>, Vec<usize>) = (0..data.cases.len()).partition(|&c| data.cases[c].len() > ell);
    if !short.is_empty() {
        log::warn!("skipping cases {short:?}: no more than {ell} frames");
    }
    if case_ids.is_empty() {
        return Err(Error::config(format!("no test case has more than {ell} frames")));
    }
    let mut grid = RunGrid::new(&names, &case_ids, &a.seeds);
    let results = loaded
        .par_iter()
        .map(|(name, latent, seed, (model, meta))| {
            case_ids
                .iter()
                .map(|&c| Ok((name.clone(), c, *seed, rollout_rmse(model, &data.cases[c], meta.x_min, meta.x_max, *latent)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for (name, c, seed, series) in results.into_iter().flatten() {
        grid.insert(&name, c, seed, series);
    }
    grid.check_complete()?;
    write_text(&a.out.join("rmse_series.csv"), &grid.rmse_csv())?;
    write_text(&a.out.join("totals.csv"), &grid.totals_csv()?)?;
    write_text(&a.out.join("winners.csv"), &grid.winners_csv()?)?;
    let mut agg = String::from("model,case,step,avg,best,worst,best_seed,worst_seed\n");
    for name in &names {
        for &c in &case_ids {
            let series = a.seeds.iter().map(|&s| grid.get(name, c, s).map(<[f64]>::to_vec)).collect::<Result<Vec<_>>>()?;
            let g = aggregate_seeds(&series)?;
            for t in 0..g.avg.len() {
                let (bs, ws) = (a.seeds[g.best_seed], a.seeds[g.worst_seed]);
                let _ = writeln!(agg, "{name},{c},{t},{:e},{:e},{:e},{bs},{ws}", g.avg[t], g.best[t], g.worst[t]);
            }
        }
    }
    write_text(&a.out.join("aggregates.csv"), &agg)?;
    let mut norms = String::from("case,step,truth_norm_pa\n");
    for &c in &case_ids {
        for (t, n) in frame_norms(&data.cases[c].frames).iter().enumerate() {
            let _ = writeln!(norms, "{c},{t},{n:e}");
        }
    }
    write_text(&a.out.join("truth_norm.csv"), &norms)?;
    let config = json!({"data": a.data, "ckpt_dir": a.ckpt_dir, "models": names, "seeds": a.seeds, "skipped_cases": short});
    manifest::write(&a.out, "evaluate", None, &config)
}

fn grid_csv(grid: &[f32], w: usize) -> String {
    grid.chunks(w).map(|row| row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",") + "\n").collect()
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    match a.kind {
        PlotKind::Frames | PlotKind::Peak => {
            let path = a.data.as_ref().ok_or_else(|| Error::config("--data is required for frame and peak plots"))?;
            let data = read_dlf(path)?;
            let case = &data.cases[pick_cases(&data, Some(a.case))?[0]];
            let (h, w) = case.shape().ok_or_else(|| Error::config("case has no frames"))?;
            if let PlotKind::Frames = a.kind {
                let n = case.len();
                let steps = if a.steps.is_empty() { vec![0, n / 2, n - 1] } else { a.steps.clone() };
                for t in steps {
                    let f = case.frames.get(t).ok_or_else(|| Error::config(format!("step {t} beyond {n} frames")))?;
                    let title = format!("case {} step {t} (Pa)", a.case);
                    write_text(&a.out.join(format!("frame_c{}_t{t:03}.svg", a.case)), &heatmap_svg(&f.data, h, w, &title))?;
                    write_text(&a.out.join(format!("frame_c{}_t{t:03}.csv", a.case)), &grid_csv(&f.data, w))?;
                }
            } else {
                let grid = peak_map_grid(&peak_time_map(&case.frames, a.threshold_pa)?);
                let title = format!("case {} peak time index", a.case);
                write_text(&a.out.join(format!("peak_c{}.svg", a.case)), &heatmap_svg(&grid, h, w, &title))?;
                write_text(&a.out.join(format!("peak_c{}.csv", a.case)), &grid_csv(&grid, w))?;
                let raw: Vec<u8> = grid.iter().flat_map(|v| v.to_le_bytes()).collect();
                let p = a.out.join(format!("peak_c{}.f32", a.case));
                std::fs::write(&p, raw).map_err(|e| Error::io(&p, e))?;
            }
        }
        PlotKind::Rmse => {
            let path = a.csv.as_ref().ok_or_else(|| Error::config("--csv is required for RMSE plots"))?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            // model -> seed -> series for the selected case
            let mut runs: std::collections::BTreeMap<String, std::collections::BTreeMap<String, Vec<f64>>> = Default::default();
            for (n, line) in text.lines().enumerate().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::config(format!("{}:{}: expected model,case,seed,step,rmse", path.display(), n + 1)));
                }
                if f[1].parse::<usize>().ok() != Some(a.case) {
                    continue;
                }
                let v: f64 = f[4].parse().map_err(|_| Error::config(format!("{}:{}: bad value", path.display(), n + 1)))?;
                runs.entry(f[0].to_string()).or_default().entry(f[2].to_string()).or_default().push(v);
            }
            let mut series = Vec::new();
            let mut csv = String::from("model,step,avg\n");
            for (model, seeds) in runs {
                let g = aggregate_seeds(&seeds.into_values().collect::<Vec<_>>())?;
                for (t, v) in g.avg.iter().enumerate() {
                    let _ = writeln!(csv, "{model},{t},{v:e}");
                }
                series.push(Series { label: model, values: g.avg });
            }
            let title = format!("case {}: seed-averaged normalized RMSE", a.case);
            write_text(&a.out.join(format!("rmse_c{}.svg", a.case)), &line_plot_svg(&series, &title, "step", "RMSE / max load"))?;
            write_text(&a.out.join(format!("rmse_c{}.csv", a.case)), &csv)?;
        }
    }
    let config = json!({"kind": a.kind, "data": a.data, "case": a.case, "steps": a.steps, "threshold_pa": a.threshold_pa, "csv": a.csv});
    manifest::write(&a.out, "plot", None, &config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Rollout(a) => cmd_rollout(a),
        Command::Rom(a) => cmd_rom(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(4), Some(9)).unwrap(), 4);
        if std::env::var(SEED_ENV).is_err() {
            assert_eq!(resolve_seed(None, Some(9)).unwrap(), 9);
            assert_eq!(resolve_seed(None, None).unwrap(), 0);
        }
    }
}
