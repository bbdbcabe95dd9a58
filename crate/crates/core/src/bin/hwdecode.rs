use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hwdecode::dataio::SessionLayout;
use hwdecode::decoder::{self, ModelWeights};
use hwdecode::eval::{self, EEGNetClassifier, ProbeInput};
use hwdecode::ica::IcaModel;
use hwdecode::pipeline::{self, PipelineConfig, RunManifest};
use hwdecode::reproduce::{self, Profile};
use hwdecode::synthgen::{self, ArtifactSpec, Paradigm};
use hwdecode::{EpochDataset, Error, EventStream, Recording, Result, Setting};

/// Offline EEG handwriting decoding.
///
/// Values given as flags override the config file, which overrides the
/// built-in defaults.
#[derive(Parser)]
#[command(name = "hwdecode", version)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent evaluation jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic session directory.
    Synth(SynthArgs),
    /// Realign events and the pen stream onto the amplifier clock.
    Sync(SessionArg),
    /// Notch, band-pass and resample the EEG; resample the pen stream.
    Preprocess(SessionArg),
    #[command(subcommand)]
    Ica(IcaCmd),
    /// Cut epochs for one setting.
    Epoch(EpochArgs),
    /// Train the decoder on an epoch bundle.
    Train(TrainArgs),
    /// Class probabilities for every epoch of a bundle.
    Predict(PredictArgs),
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the end-to-end reproduction checks.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SessionArg {
    #[arg(long)]
    session: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArtifactKind {
    None,
    Correlated,
    Uncorrelated,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Template-to-noise RMS ratio; `inf` for noiseless data.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, value_enum)]
    artifact: Option<ArtifactKind>,
    #[arg(long, default_value_t = 20.0)]
    artifact_amplitude: f64,
    #[arg(long)]
    imagery: bool,
}

#[derive(Subcommand)]
enum IcaCmd {
    /// Fit on `eeg_pre.rec`, write `ica.json`.
    Fit {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Remove components, write `eeg_clean.rec`.
    Apply {
        #[arg(long)]
        session: PathBuf,
        /// Comma-separated component indices.
        #[arg(long, value_delimiter = ',')]
        reject: Vec<usize>,
    },
    /// Rank components by correlation with a single-channel template.
    Rank {
        #[arg(long)]
        session: PathBuf,
        /// Template recording; defaults to the session's `artifact.rec`.
        #[arg(long)]
        template: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EpochArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    setting: Option<Setting>,
    /// Use `eeg_clean.rec` instead of `eeg_pre.rec`.
    #[arg(long)]
    cleaned: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    epochs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCommon {
    #[arg(long)]
    epochs: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Stratified k-fold cross-validation.
    Cv(EvalCommon),
    /// Sample-complexity sweep against the last trials.
    Sweep {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long)]
        test_size: Option<usize>,
    },
    /// Trial-averaged evaluation. With `--model`, scores the bundle as a
    /// test set; otherwise trains per fold.
    Avg {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Decode from one independent component.
    ProbeIc {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        component: usize,
        #[arg(long)]
        setting: Option<Setting>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode from a channel subset, other channels zeroed.
    ProbeChannels {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<String>>,
    },
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "reproduce")]
    out: PathBuf,
    #[arg(long, default_value = "full")]
    profile: Profile,
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn need(path: PathBuf, hint: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::InvalidArgument(format!("missing input {} (run `{hint}` first)", path.display())))
    }
}

fn dir_of(path: &Path) -> PathBuf {
    path.parent().filter(|d| !d.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn classifier(cfg: &PipelineConfig, ds: &EpochDataset) -> Result<EEGNetClassifier> {
    cfg.classifier_for(ds)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Synth(a) => {
            let s = &mut cfg.synth;
            if let Some(v) = a.trials {
                s.n_trials = v;
            }
            if let Some(v) = a.seed {
                s.seed = v;
            }
            if let Some(v) = a.snr {
                s.snr = v;
            }
            match a.artifact {
                Some(ArtifactKind::None) => s.artifact = None,
                Some(ArtifactKind::Correlated) => {
                    s.artifact = Some(ArtifactSpec { class_correlated: true, amplitude_uv: a.artifact_amplitude })
                }
                Some(ArtifactKind::Uncorrelated) => {
                    s.artifact = Some(ArtifactSpec { class_correlated: false, amplitude_uv: a.artifact_amplitude })
                }
                None => {}
            }
            if a.imagery {
                s.paradigm = Paradigm::Imagery;
            }
            let (m, clock) = RunManifest::start("synth", &cfg, vec![cfg.synth.seed]);
            synthgen::generate_session(&cfg.synth)?.write(&a.out)?;
            m.finish(clock, &a.out)?;
        }
        Cmd::Sync(a) => {
            let l = SessionLayout::new(&a.session);
            let (m, clock) = RunManifest::start("sync", &cfg, vec![]);
            let eeg = Recording::read(need(l.eeg(), "synth")?)?;
            let task = EventStream::read(l.task_events())?;
            let pen = if l.pen().exists() {
                Some((Recording::read(l.pen())?, EventStream::read(l.pen_events())?))
            } else {
                None
            };
            let s = pipeline::synchronize(&eeg, &task, pen.as_ref().map(|(r, e)| (r, e)), &cfg.sync)?;
            s.events.write(l.synced_events())?;
            write(&l.dir.join("sync_task.tsv"), &s.task_report.to_text())?;
            if let (Some(p), Some(r)) = (&s.pen, &s.pen_report) {
                p.write(l.synced_pen())?;
                write(&l.dir.join("sync_pen.tsv"), &r.to_text())?;
            }
            m.finish(clock, &l.dir)?;
        }
        Cmd::Preprocess(a) => {
            let l = SessionLayout::new(&a.session);
            let (m, clock) = RunManifest::start("preprocess", &cfg, vec![]);
            let eeg = Recording::read(need(l.eeg(), "synth")?)?;
            let pen = if l.synced_pen().exists() { Some(Recording::read(l.synced_pen())?) } else { None };
            let (eeg, pen) = pipeline::preprocess_streams(&eeg, pen.as_ref(), &cfg.preprocess)?;
            eeg.write(l.preprocessed_eeg())?;
            if let Some(p) = pen {
                p.write(l.preprocessed_pen())?;
            }
            m.finish(clock, &l.dir)?;
        }
        Cmd::Ica(c) => run_ica(c, &mut cfg)?,
        Cmd::Epoch(a) => {
            let l = SessionLayout::new(&a.session);
            if let Some(s) = a.setting {
                cfg.epoching.setting = s;
            }
            let (m, clock) = RunManifest::start("epoch", &cfg, vec![]);
            let src = if a.cleaned { need(l.cleaned_eeg(), "ica apply")? } else { need(l.preprocessed_eeg(), "preprocess")? };
            let eeg = Recording::read(src)?;
            let events = EventStream::read(need(l.synced_events(), "sync")?)?;
            let pen = if l.preprocessed_pen().exists() { Some(Recording::read(l.preprocessed_pen())?) } else { None };
            let id = l.dir.file_name().map_or("session".into(), |n| n.to_string_lossy().into_owned());
            let prepared = pipeline::Prepared { eeg, pen, events, session_id: id };
            let (ds, rep) = prepared.epochs(&cfg.epoching)?;
            let path = l.epochs(cfg.epoching.setting);
            fs::create_dir_all(dir_of(&path)).map_err(|e| Error::io(dir_of(&path), e))?;
            ds.write(&path)?;
            let mut drops = String::from("trial\tfixation_s\tlabel\treason\n");
            for d in &rep.dropped {
                drops += &format!("{}\t{:.6}\t{}\t{}\n", d.trial, d.fixation_s, d.label, d.reason);
            }
            write(&path.with_extension("drops.tsv"), &drops)?;
            m.finish(clock, &dir_of(&path))?;
        }
        Cmd::Train(a) => {
            if let Some(s) = a.seed {
                cfg.train.seed = s;
            }
            if let Some(e) = a.max_epochs {
                cfg.train.max_epochs = e;
            }
            let (m, clock) = RunManifest::start("train", &cfg, vec![cfg.train.seed]);
            let ds = EpochDataset::read(&a.epochs)?;
            let (w, hist) = decoder::train(&ds, &cfg.train, &cfg.net_for(&ds)?)?;
            w.write(&a.out)?;
            write(&a.out.with_extension("history.tsv"), &hist.to_tsv())?;
            m.finish(clock, &dir_of(&a.out))?;
        }
        Cmd::Predict(a) => {
            let w = ModelWeights::read(&a.model)?;
            let ds = EpochDataset::read(&a.epochs)?;
            let data: Vec<_> = ds.epochs().iter().map(|e| &e.data).collect();
            let probs = decoder::predict_proba(&w, &data)?;
            let mut s = String::from("index\tlabel\tpredicted\tp_L\tp_V\tp_O\tp_W\n");
            for (i, (e, p)) in ds.epochs().iter().zip(&probs).enumerate() {
                let pred = hwdecode::Letter::from_index(decoder::argmax(p)).expect("four classes");
                s += &format!("{i}\t{}\t{pred}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n", e.label, p[0], p[1], p[2], p[3]);
            }
            write(&a.out, &s)?;
        }
        Cmd::Eval(c) => run_eval(c, &mut cfg)?,
        Cmd::Reproduce(a) => {
            fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let (m, clock) = RunManifest::start("reproduce", &cfg, vec![a.seed]);
            let outcomes = reproduce::run_all_with(a.seed, a.profile, |o| eprintln!("{}", o.line()))?;
            write(&a.out.join("reproduce.tsv"), &reproduce::to_tsv(&outcomes))?;
            let table = reproduce::to_table(&outcomes);
            write(&a.out.join("reproduce.txt"), &table)?;
            print!("{table}");
            m.finish(clock, &a.out)?;
        }
    }
    Ok(())
}

fn run_ica(c: IcaCmd, cfg: &mut PipelineConfig) -> Result<()> {
    match c {
        IcaCmd::Fit { session, components, seed } => {
            let l = SessionLayout::new(&session);
            if components.is_some() {
                cfg.ica.components = components;
            }
            if let Some(s) = seed {
                cfg.ica.seed = s;
            }
            let (m, clock) = RunManifest::start("ica-fit", cfg, vec![cfg.ica.seed]);
            let eeg = Recording::read(need(l.preprocessed_eeg(), "preprocess")?)?;
            pipeline::fit_ica_stage(&eeg, &cfg.ica)?.write(l.ica())?;
            m.finish(clock, &l.dir)?;
        }
        IcaCmd::Apply { session, reject } => {
            let l = SessionLayout::new(&session);
            if !reject.is_empty() {
                cfg.ica.reject = reject;
            }
            let model = IcaModel::read(need(l.ica(), "ica fit")?)?;
            let eeg = Recording::read(need(l.preprocessed_eeg(), "preprocess")?)?;
            model.reject(&eeg, &cfg.ica.reject)?.write(l.cleaned_eeg())?;
        }
        IcaCmd::Rank { session, template } => {
            let l = SessionLayout::new(&session);
            let model = IcaModel::read(need(l.ica(), "ica fit")?)?;
            let eeg = Recording::read(need(l.preprocessed_eeg(), "preprocess")?)?;
            let tpl = Recording::read(template.unwrap_or_else(|| l.artifact()))?;
            let tpl = hwdecode::sigproc::resample(&tpl, eeg.sample_rate_hz())?;
            let mut course: Vec<f64> = tpl.samples().row(0).iter().map(|&v| f64::from(v)).collect();
            course.resize(eeg.n_samples(), 0.0);
            let mut s = String::from("rank\tcomponent\tabs_correlation\n");
            for (r, (i, score)) in model.template_scores(&eeg, &course)?.into_iter().enumerate() {
                s += &format!("{r}\t{i}\t{score:.6}\n");
            }
            write(&l.dir.join("ica_rank.tsv"), &s)?;
            print!("{s}");
        }
    }
    Ok(())
}

fn apply_common(cfg: &mut PipelineConfig, c: &EvalCommon) {
    if let Some(s) = c.seed {
        cfg.eval.seed = s;
    }
    if let Some(f) = c.folds {
        cfg.eval.folds = f;
    }
}

fn write_reports(out: &Path, stem: &str, reports: &[eval::EvalReport]) -> Result<()> {
    let text: String = reports.iter().map(|r| r.to_text() + "\n").collect();
    write(&out.join(format!("{stem}.txt")), &text)?;
    write(&out.join(format!("{stem}.tsv")), &eval::reports_to_tsv(reports))?;
    Ok(())
}

fn run_eval(c: EvalCmd, cfg: &mut PipelineConfig) -> Result<()> {
    match c {
        EvalCmd::Cv(a) => {
            apply_common(cfg, &a);
            let (m, clock) = RunManifest::start("eval-cv", cfg, vec![cfg.eval.seed]);
            let ds = EpochDataset::read(&a.epochs)?;
            let r = eval::kfold_cv(&ds, cfg.eval.folds, &classifier(cfg, &ds)?, cfg.eval.seed)?;
            let mut all = r.folds.clone();
            all.push(r.pooled.clone());
            write_reports(&a.out, "cv", &all)?;
            println!("pooled accuracy {:.4}", r.pooled.accuracy);
            m.finish(clock, &a.out)?;
        }
        EvalCmd::Sweep { common, test_size } => {
            apply_common(cfg, &common);
            if let Some(n) = test_size {
                cfg.eval.sweep.n_test = n;
            }
            let (m, clock) = RunManifest::start("eval-sweep", cfg, cfg.eval.sweep.seeds.clone());
            let ds = EpochDataset::read(&common.epochs)?;
            let r = eval::sample_complexity_sweep(&ds, &cfg.eval.sweep, &classifier(cfg, &ds)?)?;
            write(&common.out.join("sweep.tsv"), &r.curve.to_tsv())?;
            write(&common.out.join("sweep_runs.tsv"), &r.runs_to_tsv())?;
            let reports: Vec<_> = r.runs.iter().map(|x| x.3.clone()).collect();
            write_reports(&common.out, "sweep_reports", &reports)?;
            print!("{}", r.curve.to_tsv());
            m.finish(clock, &common.out)?;
        }
        EvalCmd::Avg { common, model, k } => {
            apply_common(cfg, &common);
            if let Some(k) = k {
                cfg.eval.k_values = k;
            }
            let (m, clock) = RunManifest::start("eval-avg", cfg, vec![cfg.eval.seed]);
            let ds = EpochDataset::read(&common.epochs)?;
            let clf = classifier(cfg, &ds)?;
            let r = match model {
                Some(p) => eval::snr_boosted_eval(&clf, &ModelWeights::read(p)?, &ds, &cfg.eval.k_values, cfg.eval.seed)?,
                None => eval::kfold_snr_boosted(&ds, cfg.eval.folds, &cfg.eval.k_values, &clf, cfg.eval.seed)?,
            };
            let reports: Vec<_> = r.iter().map(|a| a.report.clone()).collect();
            write_reports(&common.out, "avg", &reports)?;
            for a in &r {
                println!("k={}\taccuracy {:.4}\tdropped {}", a.k, a.report.accuracy, a.report.dropped);
            }
            m.finish(clock, &common.out)?;
        }
        EvalCmd::ProbeIc { session, component, setting, out, seed } => {
            if let Some(s) = setting {
                cfg.epoching.setting = s;
            }
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let (m, clock) = RunManifest::start("eval-probe-ic", cfg, vec![cfg.eval.seed]);
            let l = SessionLayout::new(&session);
            let eeg = Recording::read(need(l.preprocessed_eeg(), "preprocess")?)?;
            let events = EventStream::read(need(l.synced_events(), "sync")?)?;
            let pen = if l.preprocessed_pen().exists() { Some(Recording::read(l.preprocessed_pen())?) } else { None };
            let model = IcaModel::read(need(l.ica(), "ica fit")?)?;
            let input = ProbeInput {
                eeg: &eeg,
                pen: pen.as_ref(),
                events: &events,
                setting: cfg.epoching.setting,
                onset: cfg.epoching.onset,
                session_id: "probe",
            };
            // the architecture only depends on the shape, which reconstruction preserves
            let shape_ds = pipeline::Prepared { eeg: eeg.clone(), pen: pen.clone(), events: events.clone(), session_id: "probe".into() }
                .epochs(&cfg.epoching)?
                .0;
            let (r, _) = eval::confound_probe_single_ic(&input, &model, component, &classifier(cfg, &shape_ds)?, cfg.eval.folds, cfg.eval.seed)?;
            write_reports(&out, &format!("probe_ic{component}"), std::slice::from_ref(&r.pooled))?;
            println!("component {component} accuracy {:.4}", r.pooled.accuracy);
            m.finish(clock, &out)?;
        }
        EvalCmd::ProbeChannels { common, channels } => {
            apply_common(cfg, &common);
            if let Some(c) = channels {
                cfg.eval.probe_channels = c;
            }
            let (m, clock) = RunManifest::start("eval-probe-channels", cfg, vec![cfg.eval.seed]);
            let ds = EpochDataset::read(&common.epochs)?;
            let r = eval::confound_probe_channels(&ds, &cfg.eval.probe_channels, &classifier(cfg, &ds)?, cfg.eval.folds, cfg.eval.seed)?;
            write_reports(&common.out, "probe_channels", std::slice::from_ref(&r.pooled))?;
            println!("channels {} accuracy {:.4}", cfg.eval.probe_channels.join(","), r.pooled.accuracy);
            m.finish(clock, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
