//! Command implementations behind the `klom-bench` binary.

mod format;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use klom::data::GaussianMixture;
use klom::forget::ForgetSpec;
use klom::metrics::{
    klom_set, sensitivity_curve, KlomReport, SensitivityRow, Split, DEFAULT_N_GRID,
};
use klom::model::TrainConfig;
use klom::orchestrator::{
    experiment_dir, stored_margins, DatasetSource, EnsembleHandle, Experiment, ExperimentPlan,
    ForgetDef, RunReport, DEFAULT_N_MODELS,
};
use klom::store::{EnsembleKind, MarginStore};
use klom::unlearn::{MethodRegistry, UnlearnConfig};

use format::{sig6, table};

#[derive(Parser)]
#[command(
    name = "klom-bench",
    version,
    about = "Machine-unlearning benchmark scored with KLoM"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Pretrain, unlearn, and score one method against the oracles
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Score two stored margin sets without running any model
    EvalMargins {
        #[command(flatten)]
        common: Common,
        /// Reference ensemble: pretrain, oracle or unlearned-<method>
        #[arg(long, default_value = "oracle")]
        reference: EnsembleKind,
        /// Ensemble compared against the reference
        #[arg(long, default_value = "pretrain")]
        candidate: EnsembleKind,
        #[arg(long, default_value = "val")]
        split: Split,
    },
    /// KLoM distribution as a function of ensemble size (CSV and SVG)
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Ensemble sizes to evaluate
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_N_GRID)]
        grid: Vec<usize>,
        /// Score this method instead of the pretrain ensemble
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare every stored run for a forget set
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Print the registered unlearning methods and their defaults
    ListMethods,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Built-in forget set id (1-6) or path to a forget spec JSON file
    #[arg(long)]
    forget_set: String,
    #[arg(long, default_value_t = DEFAULT_N_MODELS, value_parser = parse_n_models)]
    n_models: usize,
    /// Base seed for model training and unlearning
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Artifact root
    #[arg(long, env = "KLOM_BENCH_ROOT", default_value = "klom-artifacts")]
    output_dir: PathBuf,
    /// Recompute instead of reusing cached artifacts
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Clone)]
pub struct DataArgs {
    #[arg(long, default_value_t = 2000)]
    n_train: usize,
    #[arg(long, default_value_t = 500)]
    n_val: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.1)]
    label_noise: f64,
    #[arg(long, default_value_t = 17)]
    data_seed: u64,
    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_values_t = [64])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    /// Training CSV (features then integer label, no header); replaces the synthetic data
    #[arg(long, requires = "val_csv")]
    train_csv: Option<PathBuf>,
    #[arg(long, requires = "train_csv")]
    val_csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct MethodArgs {
    /// Unlearning method name (see list-methods)
    #[arg(long)]
    method: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Overrides {
    fn config(&self, method: &str, seed: u64) -> UnlearnConfig {
        let mut c = UnlearnConfig::for_method(method);
        c.seed = seed;
        c.steps = self.steps.unwrap_or(c.steps);
        c.learning_rate = self.lr.unwrap_or(c.learning_rate);
        c.noise_scale = self.noise.unwrap_or(c.noise_scale);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c
    }
}

fn parse_n_models(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        Ok(n) => Err(format!("need at least 2 models, got {n}")),
        Err(e) => Err(e.to_string()),
    }
}

impl Common {
    /// Plan plus the forget id to evaluate.
    fn plan(&self) -> Result<(ExperimentPlan, String)> {
        let d = &self.data;
        let dataset = match (&d.train_csv, &d.val_csv) {
            (Some(train), Some(val)) => DatasetSource::Csv {
                train: train.clone(),
                val: val.clone(),
                n_classes: d.classes,
            },
            _ => DatasetSource::GaussianMixture(GaussianMixture {
                n_train: d.n_train,
                n_val: d.n_val,
                dim: d.dim,
                classes: d.classes,
                separation: d.separation,
                label_noise: d.label_noise,
                seed: d.data_seed,
            }),
        };
        let mut plan = ExperimentPlan {
            dataset,
            hidden: d.hidden.clone(),
            train: TrainConfig {
                epochs: d.epochs,
                ..TrainConfig::default()
            },
            seed: self.seed,
            n_models: self.n_models,
            ..ExperimentPlan::default()
        };
        let forget_id = if plan.forget_sets.iter().any(|f| f.id == self.forget_set) {
            self.forget_set.clone()
        } else if Path::new(&self.forget_set).is_file() {
            let spec = read_forget_spec(Path::new(&self.forget_set))?;
            if plan.forget_sets.iter().any(|f| f.id == spec.name) {
                bail!(
                    "forget spec name `{}` clashes with a built-in forget set id",
                    spec.name
                );
            }
            let id = spec.name.clone();
            plan.forget_sets.push(ForgetDef::from_spec(&spec));
            id
        } else {
            let ids: Vec<&str> = plan.forget_sets.iter().map(|f| f.id.as_str()).collect();
            bail!(
                "unknown forget set `{}`: expected one of {} or a path to a forget spec file",
                self.forget_set,
                ids.join(", ")
            );
        };
        Ok((plan, forget_id))
    }

    fn open(&self) -> Result<(Experiment, String)> {
        let (plan, forget_id) = self.plan()?;
        let exp = Experiment::open(plan, &self.output_dir, self.workers, self.force)
            .with_context(|| format!("opening experiment under {}", self.output_dir.display()))?;
        eprintln!("experiment {}", exp.store().root().display());
        Ok((exp, forget_id))
    }
}

fn read_forget_spec(path: &Path) -> Result<ForgetSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ForgetSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let normalized = ForgetSpec::new(spec.name.clone(), spec.strategy, spec.indices.clone());
    if normalized.size != spec.size {
        bail!(
            "{}: size {} does not match {} distinct indices",
            path.display(),
            spec.size,
            normalized.size
        );
    }
    Ok(normalized)
}

fn log_stage(handle: &EnsembleHandle, what: &str) {
    eprintln!(
        "{what}: {} models ({} trained, {} cached)",
        handle.n_models(),
        handle.computed,
        handle.n_models() - handle.computed
    );
}

fn cmd_run(common: &Common, method: &MethodArgs) -> Result<()> {
    let (exp, forget_id) = common.open()?;
    let config = method.overrides.config(&method.method, common.seed);
    let pretrain = exp.train_pretrain_ensemble().context("pretrain stage")?;
    log_stage(&pretrain, "pretrain");
    let oracle = exp
        .train_oracle_ensemble(&forget_id)
        .context("oracle stage")?;
    log_stage(&oracle, "oracle");
    let unlearned = exp
        .apply_unlearning(&pretrain, &config, &forget_id)
        .context("unlearning stage")?;
    log_stage(&unlearned, &config.method_name);
    let report = exp.run(&config, &forget_id).context("evaluation stage")?;
    let spec = exp.forget_spec(&forget_id)?;
    println!(
        "method {} | forget set {} ({}, {} points) | N = {}",
        config.method_name, forget_id, spec.strategy, spec.size, report.n_models
    );
    let rows: Vec<Vec<String>> = report
        .splits
        .iter()
        .map(|s| {
            vec![
                s.split.to_string(),
                sig6(s.method.mean),
                sig6(s.method.p95),
                sig6(s.baseline.mean),
                sig6(s.baseline.p95),
            ]
        })
        .collect();
    print!(
        "{}",
        table(
            &[
                "split",
                "klom_mean",
                "klom_p95",
                "baseline_mean",
                "baseline_p95"
            ],
            &rows
        )
    );
    Ok(())
}

fn print_klom(report: &KlomReport, label: &str) {
    println!(
        "{label} split {} N = {}: mean {} p95 {}",
        report.split,
        report.n_models_used,
        sig6(report.mean),
        sig6(report.p95)
    );
}

fn cmd_eval_margins(
    common: &Common,
    reference: &EnsembleKind,
    candidate: &EnsembleKind,
    split: Split,
) -> Result<()> {
    let (plan, forget_id) = common.plan()?;
    let dir = experiment_dir(&common.output_dir, &plan)?;
    let store = MarginStore::open_existing(&dir)
        .with_context(|| format!("no stored experiment at {}", dir.display()))?;
    let a = stored_margins(&store, reference, split, &forget_id)?;
    let b = stored_margins(&store, candidate, split, &forget_id)?;
    let report = klom_set(&a, &b, common.n_models)?;
    print_klom(&report, &format!("{reference} vs {candidate}:"));
    Ok(())
}

fn cmd_sensitivity(
    common: &Common,
    grid: &[usize],
    method: Option<&str>,
    overrides: &Overrides,
) -> Result<()> {
    let n_max = grid.iter().copied().max().unwrap_or(0);
    if n_max > common.n_models {
        bail!(
            "grid reaches N = {n_max} but only {} models are requested",
            common.n_models
        );
    }
    let (exp, forget_id) = common.open()?;
    let pretrain = exp.train_pretrain_ensemble().context("pretrain stage")?;
    log_stage(&pretrain, "pretrain");
    let oracle = exp
        .train_oracle_ensemble(&forget_id)
        .context("oracle stage")?;
    log_stage(&oracle, "oracle");
    let (candidate, label) = match method {
        Some(m) => {
            let h = exp
                .apply_unlearning(&pretrain, &overrides.config(m, common.seed), &forget_id)
                .context("unlearning stage")?;
            log_stage(&h, m);
            (h, m.to_string())
        }
        None => (pretrain, "pretrain".to_string()),
    };
    let mut panels: Vec<(Split, Vec<SensitivityRow>)> = Vec::new();
    for split in [Split::Val, Split::Forget, Split::Retain] {
        let rows = sensitivity_curve(
            &exp.extract_margins(&oracle, split, &forget_id)?,
            &exp.extract_margins(&candidate, split, &forget_id)?,
            grid,
        )?;
        panels.push((split, rows));
    }

    let out = exp.store().root().join("outputs");
    fs::create_dir_all(&out)?;
    let stem = format!("sensitivity-{forget_id}-{label}");
    let csv_path = out.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "split",
        "n_models",
        "min",
        "whisker_low",
        "q1",
        "median",
        "q3",
        "whisker_high",
        "max",
        "mean",
        "p95",
    ])?;
    let mut rows = Vec::new();
    for (split, curve) in &panels {
        for r in curve {
            let s = &r.summary;
            let mut record = vec![split.to_string(), r.n_models.to_string()];
            record.extend(
                [
                    s.min,
                    s.whisker_low,
                    s.q1,
                    s.median,
                    s.q3,
                    s.whisker_high,
                    s.max,
                    s.mean,
                    s.p95,
                ]
                .map(sig6),
            );
            w.write_record(&record)?;
            rows.push(vec![
                split.to_string(),
                r.n_models.to_string(),
                sig6(s.median),
                sig6(s.mean),
                sig6(s.p95),
            ]);
        }
    }
    w.flush()?;
    let svg_path = out.join(format!("{stem}.svg"));
    fs::write(
        &svg_path,
        plot::sensitivity_svg(
            &format!("KLoM vs N: oracle vs {label}, forget set {forget_id}"),
            &panels,
        ),
    )?;
    print!(
        "{}",
        table(&["split", "n_models", "median", "mean", "p95"], &rows)
    );
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn report_row(name: &str, scores: impl Fn(Split) -> Option<KlomReport>) -> Vec<String> {
    let mut row = vec![name.to_string()];
    for split in [Split::Forget, Split::Retain, Split::Val] {
        match scores(split) {
            Some(r) => row.extend([sig6(r.mean), sig6(r.p95)]),
            None => row.extend(["", ""].map(String::from)),
        }
    }
    row
}

fn cmd_report(common: &Common) -> Result<()> {
    let (plan, forget_id) = common.plan()?;
    let dir = experiment_dir(&common.output_dir, &plan)?;
    let store = MarginStore::open_existing(&dir)
        .with_context(|| format!("no stored experiment at {}", dir.display()))?;
    let mut reports: Vec<RunReport> = store
        .artifacts_under(&format!("reports/{forget_id}/"))
        .iter()
        .map(|rel| store.load_json(rel))
        .collect::<klom::Result<_>>()?;
    reports.retain(|r| r.n_models == common.n_models);
    if reports.is_empty() {
        bail!(
            "no completed runs for forget set {forget_id} with N = {}; use `run` first",
            common.n_models
        );
    }
    let forget_mean = |r: &RunReport| {
        r.split(Split::Forget)
            .map_or(f64::INFINITY, |s| s.method.mean)
    };
    reports.sort_by(|a, b| forget_mean(a).total_cmp(&forget_mean(b)));
    let mut rows: Vec<(f64, Vec<String>)> = reports
        .iter()
        .map(|r| {
            let row = report_row(&r.config.method_name, |s| {
                r.split(s).map(|x| x.method.clone())
            });
            (forget_mean(r), row)
        })
        .collect();
    let base = &reports[0];
    let base_mean = base
        .split(Split::Forget)
        .map_or(f64::INFINITY, |s| s.baseline.mean);
    rows.push((
        base_mean,
        report_row("(baseline: pretrain)", |s| {
            base.split(s).map(|x| x.baseline.clone())
        }),
    ));
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows: Vec<Vec<String>> = rows.into_iter().map(|(_, r)| r).collect();
    let header = [
        "method",
        "forget_mean",
        "forget_p95",
        "retain_mean",
        "retain_p95",
        "val_mean",
        "val_p95",
    ];
    println!("forget set {forget_id} | N = {}", common.n_models);
    print!("{}", table(&header, &rows));

    let out = dir.join("outputs");
    fs::create_dir_all(&out)?;
    let csv_path = out.join(format!("report-{forget_id}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(header)?;
    for row in &rows {
        w.write_record(row)?;
    }
    w.flush()?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_list_methods() {
    let rows: Vec<Vec<String>> = MethodRegistry::with_builtins()
        .names()
        .iter()
        .map(|name| {
            let c = UnlearnConfig::for_method(name);
            vec![
                name.clone(),
                c.steps.to_string(),
                sig6(c.learning_rate),
                sig6(c.noise_scale),
            ]
        })
        .collect();
    print!("{}", table(&["method", "steps", "lr", "noise"], &rows));
}

/// Runs one parsed invocation.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, method } => cmd_run(&common, &method),
        Command::EvalMargins {
            common,
            reference,
            candidate,
            split,
        } => cmd_eval_margins(&common, &reference, &candidate, split),
        Command::Sensitivity {
            common,
            grid,
            method,
            overrides,
        } => cmd_sensitivity(&common, &grid, method.as_deref(), &overrides),
        Command::Report { common } => cmd_report(&common),
        Command::ListMethods => {
            cmd_list_methods();
            Ok(())
        }
    }
}
