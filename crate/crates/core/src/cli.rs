//! Command-line entry point: one binary orchestrating simulation, dataset
//! generation, the three training pipelines, evaluation, reporting, and the
//! runtime verification suites.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or format error
//! (including usage errors, which clap reports itself).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::axon::{build_axon_field, AxonField};
use crate::checkpoint::Checkpoint;
use crate::config::{Config, Profile};
use crate::dataset::{generate_dataset, load_manifest, Dataset};
use crate::digest::{digest_bytes, digest_file};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalRecord, SimChoice, MODEL_INVERSE, MODEL_PSE};
use crate::mnist::{load_targets, SetKind, TargetSet};
use crate::models::ModelKind;
use crate::percept::PerceptFrame;
use crate::report::{render_grid, report_table, RunManifest};
use crate::simulate::Simulator;
use crate::stim::Stimulus;
use crate::subject::SubjectModel;
use crate::train::{report_path, train_approximator, train_encoder, train_inverse};
use crate::verify::{composite_gradcheck, run_checks};

#[derive(Parser)]
#[command(name = "pse", version, about = "Stimulus encoding toolkit for simulated prosthetic vision")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON configuration file (defaults are built in).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Subject preset id, or "all".
    #[arg(long, global = true, default_value = "all")]
    subject: String,
    /// Override the seed for generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run scale: desk (reduced) or full.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Directory holding IDX digit files (else $PSE_MNIST_DIR, ./data/mnist,
    /// or a synthetic fallback corpus).
    #[arg(long, global = true)]
    mnist_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a stimulus (single-line CSV of 60 amplitudes) to a PGM percept.
    Simulate {
        /// Stimulus CSV file.
        #[arg(long)]
        stim: PathBuf,
        /// Override the subject's normalization constant.
        #[arg(long)]
        normalization: Option<f64>,
        /// Use the scoreboard model instead of the axon map.
        #[arg(long)]
        scoreboard: bool,
    },
    /// Generate the synthetic stimulus→percept dataset.
    GenDataset {
        /// Sample count (defaults to the profile size).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the differentiable surrogate to the generated dataset.
    TrainApprox,
    /// Train the stimulus encoder through the frozen surrogate.
    TrainEncoder,
    /// Train the inverse baseline on reversed dataset pairs.
    TrainInverse,
    /// Score trained models on held-out digit targets.
    Eval {
        /// Scoring renderer: psi, psi-hat, or both.
        #[arg(long, default_value = "psi-hat")]
        simulator: String,
    },
    /// Regenerate the report table from saved evaluation records.
    Report,
    /// Tile target|percept pairs into a PGM grid.
    Render {
        /// Number of test targets to render.
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Renderer for the percept column: psi or psi-hat.
        #[arg(long, default_value = "psi")]
        simulator: String,
    },
    /// Run the runtime invariant and gradient suites.
    Verify,
}

struct Ctx {
    cfg: Config,
    profile: Profile,
    seed: Option<u64>,
    out: PathBuf,
    subject_sel: String,
    mnist_dir: Option<PathBuf>,
}

impl Ctx {
    fn subjects(&self) -> Result<Vec<&SubjectModel>> {
        if self.subject_sel == "all" {
            Ok(self.cfg.subjects.iter().collect())
        } else {
            Ok(vec![self.cfg.subject(&self.subject_sel)?])
        }
    }

    fn field(&self) -> Result<Arc<AxonField>> {
        Ok(Arc::new(build_axon_field(&self.cfg.grid, &self.cfg.axon)?))
    }

    fn gen_seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    fn train_cfg(&self, kind: ModelKind) -> crate::train::TrainConfig {
        let mut tc = self.profile.train_config(&self.cfg, kind);
        if let Some(seed) = self.seed {
            tc.seed = seed;
        }
        tc
    }

    fn dataset_path(&self, subject: &str) -> PathBuf {
        self.out.join(format!("dataset-{subject}.bin"))
    }

    fn ckpt_path(&self, kind: ModelKind, subject: &str) -> PathBuf {
        self.out.join(format!("{}-{subject}.ckpt", kind.name()))
    }

    fn load_dataset(&self, subject: &str) -> Result<(Dataset, crate::dataset::DatasetManifest)> {
        let path = self.dataset_path(subject);
        require_file(&path)?;
        require_file(&crate::dataset::manifest_path(&path))?;
        Ok((Dataset::load(&path)?, load_manifest(&path)?))
    }

    fn load_checkpoint(&self, kind: ModelKind, subject: &str) -> Result<Checkpoint> {
        let path = self.ckpt_path(kind, subject);
        require_file(&path)?;
        let ckpt = Checkpoint::load(&path)?;
        ckpt.expect_kind(kind)?;
        Ok(ckpt)
    }

    fn targets(&self, kind: SetKind, limit: usize) -> Result<TargetSet> {
        let loaded = load_targets(kind, self.mnist_dir.as_deref(), self.gen_seed())?;
        println!(
            "targets ({}): {} [{} samples, using {}]",
            match kind {
                SetKind::Train => "train",
                SetKind::Test => "test",
            },
            loaded.source,
            loaded.set.len(),
            limit.min(loaded.set.len())
        );
        Ok(loaded.set.truncated(limit))
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::NotFound(format!("missing file {}", path.display())))
    }
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = Ctx {
        cfg,
        profile: Profile::parse(&cli.profile)?,
        seed: cli.seed,
        out: cli.out.clone(),
        subject_sel: cli.subject.clone(),
        mnist_dir: cli.mnist_dir.clone(),
    };
    std::fs::create_dir_all(&ctx.out)?;
    match cli.cmd {
        Cmd::Simulate { stim, normalization, scoreboard } => cmd_simulate(&ctx, &stim, normalization, scoreboard),
        Cmd::GenDataset { n } => cmd_gen_dataset(&ctx, n),
        Cmd::TrainApprox => cmd_train_approx(&ctx),
        Cmd::TrainEncoder => cmd_train_encoder(&ctx),
        Cmd::TrainInverse => cmd_train_inverse(&ctx),
        Cmd::Eval { simulator } => cmd_eval(&ctx, &simulator),
        Cmd::Report => cmd_report(&ctx),
        Cmd::Render { count, simulator } => cmd_render(&ctx, count, &simulator),
        Cmd::Verify => cmd_verify(&ctx),
    }
}

fn cmd_simulate(ctx: &Ctx, stim_path: &Path, normalization: Option<f64>, scoreboard: bool) -> Result<()> {
    require_file(stim_path)?;
    let text = std::fs::read_to_string(stim_path)?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Format(format!("{} holds no stimulus line", stim_path.display())))?;
    let stim = Stimulus::from_csv_line(line)?;
    let field = ctx.field()?;
    for subject in ctx.subjects()? {
        let mut s = subject.clone();
        if let Some(norm) = normalization {
            s = s.with_normalization(norm)?;
        }
        let sim = Simulator::new(s, Arc::clone(&field))?;
        let frame = if scoreboard { sim.scoreboard(&stim)? } else { sim.simulate(&stim)? };
        let path = ctx.out.join(format!("percept-{}.pgm", subject.id));
        frame.write_pgm(&path)?;
        println!("wrote {} (max brightness {:.4})", path.display(), frame.max_value());
    }
    Ok(())
}

fn cmd_gen_dataset(ctx: &Ctx, n: Option<usize>) -> Result<()> {
    let n = n.unwrap_or_else(|| ctx.profile.dataset_samples());
    let field = ctx.field()?;
    for subject in ctx.subjects()? {
        let path = ctx.dataset_path(&subject.id);
        let manifest = generate_dataset(n, ctx.gen_seed(), subject, &field, &path)?;
        println!(
            "wrote {} ({} samples, train {} / test {}, normalization {:.6}, digest {})",
            path.display(),
            manifest.total,
            manifest.train,
            manifest.test,
            manifest.normalization,
            manifest.digest
        );
    }
    Ok(())
}

fn cmd_train_approx(ctx: &Ctx) -> Result<()> {
    for subject in ctx.subjects()? {
        let (ds, manifest) = ctx.load_dataset(&subject.id)?;
        let tc = ctx.train_cfg(ModelKind::Approximator);
        let (ckpt, report) = train_approximator(&ds, &manifest, &tc)?;
        let path = ctx.ckpt_path(ModelKind::Approximator, &subject.id);
        ckpt.save(&path)?;
        report.save(&report_path(&path))?;
        let energy = report.heldout_energy.unwrap_or(f64::NAN);
        println!(
            "{}: surrogate held-out MSE {:.6}, percept energy {:.6} (ratio {:.3}), {:.1}s → {}",
            subject.id,
            report.heldout_loss,
            energy,
            report.heldout_loss / energy,
            report.wall_secs,
            path.display()
        );
    }
    Ok(())
}

fn cmd_train_encoder(ctx: &Ctx) -> Result<()> {
    let train_set = ctx.targets(SetKind::Train, ctx.profile.train_targets())?;
    let heldout_set = ctx.targets(SetKind::Test, ctx.profile.heldout_targets())?;
    for subject in ctx.subjects()? {
        let approx = ctx.load_checkpoint(ModelKind::Approximator, &subject.id)?;
        let tc = ctx.train_cfg(ModelKind::Encoder);
        let (ckpt, report) = train_encoder(&subject.id, &train_set, &heldout_set, &ctx.cfg.grid, &approx, &tc)?;
        let path = ctx.ckpt_path(ModelKind::Encoder, &subject.id);
        ckpt.save(&path)?;
        report.save(&report_path(&path))?;
        let frozen_ok = report.frozen_digest_pre == report.frozen_digest_post;
        println!(
            "{}: encoder held-out loss {:.6}, frozen surrogate unchanged: {frozen_ok}, {:.1}s → {}",
            subject.id,
            report.heldout_loss,
            report.wall_secs,
            path.display()
        );
        if !frozen_ok {
            return Err(Error::InvalidArgument(format!(
                "surrogate parameters changed during encoder training for {}",
                subject.id
            )));
        }
    }
    Ok(())
}

fn cmd_train_inverse(ctx: &Ctx) -> Result<()> {
    for subject in ctx.subjects()? {
        let (ds, manifest) = ctx.load_dataset(&subject.id)?;
        let tc = ctx.train_cfg(ModelKind::Inverse);
        let (ckpt, report) = train_inverse(&ds, &manifest, &tc)?;
        let path = ctx.ckpt_path(ModelKind::Inverse, &subject.id);
        ckpt.save(&path)?;
        report.save(&report_path(&path))?;
        println!(
            "{}: inverse held-out stimulus MSE {:.6}, {:.1}s → {}",
            subject.id,
            report.heldout_loss,
            report.wall_secs,
            path.display()
        );
    }
    Ok(())
}

fn parse_sim_choice(s: &str) -> Result<(bool, bool)> {
    match s {
        "psi" => Ok((true, false)),
        "psi-hat" => Ok((false, true)),
        "both" => Ok((true, true)),
        other => Err(Error::InvalidArgument(format!(
            "unknown simulator {other:?} (expected psi, psi-hat, or both)"
        ))),
    }
}

fn cmd_eval(ctx: &Ctx, simulator: &str) -> Result<()> {
    let (use_psi, use_psi_hat) = parse_sim_choice(simulator)?;
    let targets = ctx.targets(SetKind::Test, ctx.profile.eval_targets())?;
    let field = if use_psi { Some(ctx.field()?) } else { None };

    let mut manifest = RunManifest::new(format!(
        "{:016x}",
        digest_bytes(serde_json::to_string(&ctx.cfg)?.as_bytes())
    ));
    let mut records: Vec<EvalRecord> = Vec::new();
    for subject in ctx.subjects()? {
        let (_, ds_manifest) = ctx.load_dataset(&subject.id)?;
        manifest.dataset_digests.insert(subject.id.clone(), ds_manifest.digest.clone());

        let approx_ckpt = ctx.load_checkpoint(ModelKind::Approximator, &subject.id)?;
        let (approx_store, approx_net) = approx_ckpt.build_approx::<f32>(false)?;
        let enc_ckpt = ctx.load_checkpoint(ModelKind::Encoder, &subject.id)?;
        let (enc_store, enc_net) = enc_ckpt.build_conv::<f32>(ModelKind::Encoder, false)?;
        let inv_ckpt = ctx.load_checkpoint(ModelKind::Inverse, &subject.id)?;
        let (inv_store, inv_net) = inv_ckpt.build_conv::<f32>(ModelKind::Inverse, false)?;
        for kind in [ModelKind::Approximator, ModelKind::Encoder, ModelKind::Inverse] {
            let path = ctx.ckpt_path(kind, &subject.id);
            manifest
                .checkpoint_digests
                .insert(format!("{}-{}", kind.name(), subject.id), format!("{:016x}", digest_file(&path)?));
        }

        let sim = match &field {
            Some(f) => Some(Simulator::new(
                subject.clone().with_normalization(ds_manifest.normalization)?,
                Arc::clone(f),
            )?),
            None => None,
        };
        let mut choices: Vec<SimChoice> = Vec::new();
        if let Some(sim) = &sim {
            choices.push(SimChoice::Psi(sim));
        }
        if use_psi_hat {
            choices.push(SimChoice::PsiHat(&approx_store, &approx_net));
        }
        for choice in &choices {
            for (name, net, store) in
                [(MODEL_PSE, &enc_net, &enc_store), (MODEL_INVERSE, &inv_net, &inv_store)]
            {
                let rec = evaluate(&subject.id, name, net, store, choice, &targets, &ctx.cfg.grid)?;
                println!("{} / {} / {}: {}", rec.subject, rec.model, rec.simulator, rec.formatted());
                records.push(rec);
            }
        }
    }

    let records_path = ctx.out.join("eval-records.json");
    std::fs::write(&records_path, serde_json::to_string_pretty(&records)? + "\n")?;
    let table = report_table(&records);
    std::fs::write(ctx.out.join("report.csv"), &table.csv)?;
    std::fs::write(ctx.out.join("report.txt"), &table.text)?;
    manifest.save(&ctx.out.join("run-manifest.json"))?;
    print!("{}", table.text);
    println!("wrote {} records → {}", records.len(), records_path.display());
    Ok(())
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let records_path = ctx.out.join("eval-records.json");
    require_file(&records_path)?;
    let records: Vec<EvalRecord> = serde_json::from_str(&std::fs::read_to_string(&records_path)?)?;
    for r in &records {
        r.validate()?;
    }
    let table = report_table(&records);
    std::fs::write(ctx.out.join("report.csv"), &table.csv)?;
    std::fs::write(ctx.out.join("report.txt"), &table.text)?;
    print!("{}", table.text);
    if !table.complete {
        return Err(Error::InvalidArgument("report is incomplete (absent cells above)".into()));
    }
    Ok(())
}

fn cmd_render(ctx: &Ctx, count: usize, simulator: &str) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument("render count must be at least 1".into()));
    }
    let (use_psi, use_psi_hat) = parse_sim_choice(simulator)?;
    if use_psi && use_psi_hat {
        return Err(Error::InvalidArgument("render takes a single simulator, not \"both\"".into()));
    }
    let targets = ctx.targets(SetKind::Test, count)?;
    let field = if use_psi { Some(ctx.field()?) } else { None };
    for subject in ctx.subjects()? {
        let enc_ckpt = ctx.load_checkpoint(ModelKind::Encoder, &subject.id)?;
        let (enc_store, enc_net) = enc_ckpt.build_conv::<f32>(ModelKind::Encoder, false)?;
        let mut target_frames = Vec::new();
        let mut percept_frames = Vec::new();
        let render_via_psi = match &field {
            Some(f) => {
                let (_, ds_manifest) = ctx.load_dataset(&subject.id)?;
                Some(Simulator::new(
                    subject.clone().with_normalization(ds_manifest.normalization)?,
                    Arc::clone(f),
                )?)
            }
            None => None,
        };
        let approx = if use_psi_hat {
            let ckpt = ctx.load_checkpoint(ModelKind::Approximator, &subject.id)?;
            Some(ckpt.build_approx::<f32>(false)?)
        } else {
            None
        };
        for i in 0..targets.len() {
            let frame = targets.prepare(i, &ctx.cfg.grid)?;
            let stim = enc_net.predict(&enc_store, frame.data())?;
            let percept = match (&render_via_psi, &approx) {
                (Some(sim), _) => {
                    let amps: Vec<f64> = stim.iter().map(|&v| v.max(0.0) as f64).collect();
                    sim.simulate(&Stimulus::new(amps)?)?
                }
                (None, Some((store, net))) => {
                    let p = net.predict(store, &stim)?;
                    PerceptFrame::new(ctx.cfg.grid.rows(), ctx.cfg.grid.cols(), p)?
                }
                (None, None) => unreachable!("one simulator is always selected"),
            };
            target_frames.push(frame);
            percept_frames.push(percept);
        }
        let path = ctx.out.join(format!("render-{}.pgm", subject.id));
        render_grid(&target_frames, &percept_frames, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<()> {
    let field = ctx.field()?;
    let mut failures = 0usize;
    let mut report = |name: &str, passed: bool, detail: &str| {
        println!("{} {name}: {detail}", if passed { "ok  " } else { "FAIL" });
        if !passed {
            failures += 1;
        }
    };
    for subject in ctx.subjects()? {
        for outcome in run_checks(subject, &field, ctx.gen_seed())? {
            report(&format!("{}/{}", subject.id, outcome.name), outcome.passed, &outcome.detail);
        }
    }
    let g = composite_gradcheck(ctx.gen_seed())?;
    report(&g.name, g.passed, &g.detail);
    if failures > 0 {
        return Err(Error::InvalidArgument(format!("{failures} verification checks failed")));
    }
    println!("all checks passed");
    Ok(())
}
