//! The `terrastride` command line.
//!
//! Each subcommand resolves its configuration from built-in defaults, an
//! optional JSON file (`--config`, one section per subcommand) and flags, in
//! that order of increasing priority. The resolved configuration, its SHA-256
//! and the seed go into a `manifest.json` next to the outputs, together with
//! the hash of every file written. Nothing time-dependent is recorded, so a
//! rerun with the same flags and seed reproduces every file byte for byte.
//!
//! Exit codes: 0 success, 1 failed acceptance check (`report`), 2 usage or
//! input error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::belief::{
    make_synthetic_teacher, train_student_from, ArchConfig, EpochMetrics, LossWeights, Profile, StudentPolicy,
    StudentTrainConfig,
};
use crate::dataset::{build_dataset, heldout_under, DatasetConfig};
use crate::error::{Error, Result};
use crate::extero::{apply_noise, sample_clean, EpisodeNoise, NoiseMode, NoiseProfile};
use crate::gait::gait_clocks;
use crate::nn::checkpoint;
use crate::report::{self, ModeMetrics, ModeSteps, RunKind, RunSummary, Status};
use crate::rewards::{self, total_reward, RewardBreakdown};
use crate::rng::derive_seed;
use crate::state::{self, ActionVector, Foot, RobotState, VelocityCommand};
use crate::synthwalker::{roll_trajectory, WalkSpec, MAX_STEPS};
use crate::terrain::{generate, CurriculumState, HeightField, TerrainKind, TerrainMode, TerrainSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "terrastride", version, about = "Terrain, gait-reward and belief-encoder toolkit")]
pub struct Cli {
    /// JSON file with per-subcommand sections (`terrain`, `trace`,
    /// `train_denoiser`, `distill`); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use seed 0 wherever no seed is given instead of drawing one.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a height field and write it as PGM and JSON.
    Terrain(TerrainArgs),
    /// Roll a synthetic walk over a height field and write per-step rewards and samples.
    Trace(TraceArgs),
    /// Train the belief encoder/decoder to reconstruct clean terrain samples.
    TrainDenoiser(TrainArgs),
    /// Train the student to imitate a synthetic teacher.
    Distill(TrainArgs),
    /// Plot training runs and check them against the acceptance thresholds.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TerrainArgs {
    /// flat, hills, edges, squares, quantized_hills or stairs.
    #[arg(long)]
    pub mode: Option<TerrainKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Terrain curriculum factor in [0, 1].
    #[arg(long = "ct")]
    pub c_t: Option<f64>,
    /// Side of the square field (m).
    #[arg(long)]
    pub size: Option<f64>,
    /// Cell size (m).
    #[arg(long)]
    pub res: Option<f64>,
    #[arg(long, default_value = "out/terrain")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Height field as `.json` or `.pgm`.
    #[arg(long)]
    pub terrain_file: Option<PathBuf>,
    /// `vx,vy,wz` in m/s and rad/s.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_command)]
    pub command: Option<[f64; 3]>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// nominal, offset or noisy.
    #[arg(long)]
    pub noise_mode: Option<NoiseMode>,
    /// Sampling pattern: desk or paper.
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "ct")]
    pub c_t: Option<f64>,
    /// Reward curriculum factor: 1 clock-based, 0 airtime-based.
    #[arg(long = "cr")]
    pub c_r: Option<f64>,
    #[arg(long, default_value = "out/trace")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// desk or paper.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Training episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Held-out episodes.
    #[arg(long)]
    pub heldout: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Build every training episode under this noise mode.
    #[arg(long)]
    pub noise_mode: Option<NoiseMode>,
    /// Start from the teacher's extero encoder and keep it fixed.
    #[arg(long)]
    pub freeze_encoder: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory (or its metrics.csv); repeat for several runs.
    #[arg(long, required = true)]
    pub metrics: Vec<PathBuf>,
    #[arg(long, default_value = "out/report")]
    pub out: PathBuf,
}

fn parse_command(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected `vx,vy,wz`, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(v)
}

/// What a successful run concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    AcceptanceFailed,
}

impl Outcome {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::AcceptanceFailed => ExitCode::from(1),
        }
    }
}

/// Parses the process arguments, runs, and maps the result to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
            let value: Value = serde_json::from_str(&text)?;
            if !value.is_object() {
                return Err(Error::format("config", "top level must be a JSON object"));
            }
            value
        }
        None => Value::Object(Default::default()),
    };
    let section = |name: &str| file.get(name).cloned();
    let det = cli.deterministic;
    match cli.command {
        Command::Terrain(a) => run_terrain(resolve_terrain(&a, section("terrain"), det)?, &a.out),
        Command::Trace(a) => run_trace(resolve_trace(&a, section("trace"), det)?, &a.out),
        Command::TrainDenoiser(a) => {
            let config = resolve_train(RunKind::Denoise, &a, section("train_denoiser"), det)?;
            run_train(RunKind::Denoise, config, a.out.as_deref().unwrap_or(Path::new("out/denoise")))
        }
        Command::Distill(a) => {
            let config = resolve_train(RunKind::Distill, &a, section("distill"), det)?;
            run_train(RunKind::Distill, config, a.out.as_deref().unwrap_or(Path::new("out/distill")))
        }
        Command::Report(a) => run_report(&a),
    }
}

// ---------------------------------------------------------------------------
// Configuration plumbing

/// Overlays `patch` on `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// `defaults` with the file section laid over it.
fn layered<T: Serialize + DeserializeOwned>(defaults: T, section: Option<Value>) -> Result<T> {
    let Some(patch) = section else {
        return Ok(defaults);
    };
    let mut v = serde_json::to_value(&defaults)?;
    merge(&mut v, patch);
    Ok(serde_json::from_value(v)?)
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>, deterministic: bool) -> u64 {
    flag.or(file).unwrap_or_else(|| {
        if deterministic {
            0
        } else {
            let seed = rand::random::<u64>();
            eprintln!("seed: {seed}");
            seed
        }
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: Value,
    /// SHA-256 of each input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::file(path, e))?))
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &str,
    seed: Option<u64>,
    config: &C,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> Result<RunManifest> {
    let config = serde_json::to_value(config)?;
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed,
        config_sha256: sha256_hex(&serde_json::to_vec(&config)?),
        config,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
    };
    for p in inputs {
        manifest.inputs.insert(p.display().to_string(), hash_file(p)?);
    }
    for p in outputs {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        manifest.outputs.insert(name, hash_file(p)?);
    }
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::file(&path, e))?;
    Ok(manifest)
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

// ---------------------------------------------------------------------------
// terrain

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainConfig {
    pub mode: TerrainKind,
    /// Explicit mode parameters; drawn from their ranges when absent.
    pub params: Option<TerrainMode>,
    pub seed: Option<u64>,
    pub c_t: f64,
    pub size: f64,
    pub resolution: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            mode: TerrainKind::Hills,
            params: None,
            seed: None,
            c_t: 1.0,
            size: crate::terrain::DEFAULT_EXTENT,
            resolution: crate::terrain::DEFAULT_RESOLUTION,
        }
    }
}

pub fn resolve_terrain(a: &TerrainArgs, section: Option<Value>, deterministic: bool) -> Result<TerrainConfig> {
    let mut c = layered(TerrainConfig::default(), section)?;
    if let Some(mode) = a.mode {
        if c.params.is_some_and(|p| TerrainSpec { seed: 0, mode: p }.kind() != mode) {
            c.params = None;
        }
        c.mode = mode;
    }
    c.c_t = a.c_t.unwrap_or(c.c_t);
    c.size = a.size.unwrap_or(c.size);
    c.resolution = a.res.unwrap_or(c.resolution);
    c.seed = Some(resolve_seed(a.seed, c.seed, deterministic));
    crate::error::check_range("ct", c.c_t, 0.0, 1.0)?;
    if !(c.resolution > 0.0 && c.size >= c.resolution && c.size.is_finite()) {
        return Err(Error::invalid("size", "need 0 < res <= size"));
    }
    Ok(c)
}

pub fn run_terrain(c: TerrainConfig, out: &Path) -> Result<Outcome> {
    let seed = c.seed.unwrap_or(0);
    let spec = match c.params {
        Some(mode) => TerrainSpec { seed, mode },
        None => TerrainSpec::random(c.mode, seed),
    };
    if spec.kind() != c.mode {
        return Err(Error::invalid("params", "mode parameters do not match `mode`"));
    }
    spec.validate()?;
    let cells = (c.size / c.resolution).round() as usize;
    let field = generate(&spec, (cells, cells), c.resolution, c.c_t)?;

    create_dir(out)?;
    let files = [out.join("terrain.pgm"), out.join("terrain.json"), out.join("spec.json")];
    field.write_pgm(&files[0])?;
    field.write_json(&files[1])?;
    write_json(&files[2], &spec)?;
    write_manifest(out, "terrain", Some(seed), &c, &[], &files)?;

    let (lo, hi) = field.min_max();
    let levels = field.distinct_levels(1e-9);
    println!("{} {}x{} cells at {} m, seed {seed}", c.mode.name(), cells, cells, c.resolution);
    println!("min {lo:.4} max {hi:.4} distinct levels {}", levels.len());
    if levels.len() <= 32 {
        let shown: Vec<String> = levels.iter().map(|l| format!("{l:.4}")).collect();
        println!("levels {}", shown.join(" "));
    }
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// trace

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub terrain_file: Option<PathBuf>,
    pub command: [f64; 3],
    pub steps: usize,
    pub noise_mode: NoiseMode,
    pub profile: Profile,
    pub seed: Option<u64>,
    pub c_t: f64,
    pub c_r: f64,
    /// Start position; the field centre when absent.
    pub start_xy: Option<[f64; 2]>,
    pub start_yaw: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            terrain_file: None,
            command: [0.5, 0.0, 0.0],
            steps: MAX_STEPS,
            noise_mode: NoiseMode::Nominal,
            profile: Profile::Desk,
            seed: None,
            c_t: 1.0,
            c_r: 1.0,
            start_xy: None,
            start_yaw: 0.0,
        }
    }
}

pub fn resolve_trace(a: &TraceArgs, section: Option<Value>, deterministic: bool) -> Result<TraceConfig> {
    let mut c = layered(TraceConfig::default(), section)?;
    if a.terrain_file.is_some() {
        c.terrain_file = a.terrain_file.clone();
    }
    c.command = a.command.unwrap_or(c.command);
    c.steps = a.steps.unwrap_or(c.steps);
    c.noise_mode = a.noise_mode.unwrap_or(c.noise_mode);
    c.profile = a.profile.unwrap_or(c.profile);
    c.c_t = a.c_t.unwrap_or(c.c_t);
    c.c_r = a.c_r.unwrap_or(c.c_r);
    c.seed = Some(resolve_seed(a.seed, c.seed, deterministic));
    if c.terrain_file.is_none() {
        return Err(Error::invalid("terrain_file", "required (--terrain-file)"));
    }
    crate::error::check_range("ct", c.c_t, 0.0, 1.0)?;
    crate::error::check_range("cr", c.c_r, 0.0, 1.0)?;
    for (i, v) in c.command.iter().enumerate() {
        crate::error::check_range(["vx", "vy", "wz"][i], *v, -1.0, 1.0)?;
    }
    Ok(c)
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    t: usize,
    phi: f64,
    command: VelocityCommand,
    in_stance: [bool; 2],
    feet: [[f64; 3]; 2],
    pelvis: [f64; 3],
    state: &'a RobotState,
    reward: &'a RewardBreakdown,
    clean: [&'a [f64]; 2],
    noisy: [&'a [f64]; 2],
}

pub fn run_trace(c: TraceConfig, out: &Path) -> Result<Outcome> {
    let seed = c.seed.unwrap_or(0);
    let terrain_file = c.terrain_file.clone().unwrap_or_default();
    let field = HeightField::load(&terrain_file)?;
    let [x0, y0, x1, y1] = field.extent();
    let walk = WalkSpec {
        command: VelocityCommand::new(c.command[0], c.command[1], c.command[2]),
        start_xy: c.start_xy.unwrap_or([0.5 * (x0 + x1), 0.5 * (y0 + y1)]),
        start_yaw: c.start_yaw,
        steps: c.steps,
        seed: derive_seed(&[seed, 0x7ACE]),
        ..Default::default()
    };
    let traj = roll_trajectory(&walk, &field)?;
    if traj.truncated {
        eprintln!(
            "warning: the walk left the terrain after {} of {} steps",
            traj.steps.len(),
            c.steps
        );
    }

    let pattern = c.profile.pattern();
    let profile = NoiseProfile::for_mode(c.noise_mode, derive_seed(&[seed, 0x401]));
    let noise = Foot::BOTH.map(|f| EpisodeNoise::draw(&profile, 0, f));
    let curriculum = CurriculumState::fixed(c.c_t, c.c_r);
    let zero = ActionVector::zeros();
    let mut rewards_rows = Vec::with_capacity(traj.steps.len());
    let mut samples = Vec::with_capacity(traj.steps.len());
    for (t, step) in traj.steps.iter().enumerate() {
        let clocks = gait_clocks(step.phi, &walk.clock)?;
        rewards_rows.push(total_reward(&step.state, &step.command, &clocks, &zero, &zero, &curriculum)?);
        let per_foot = Foot::BOTH.map(|foot| {
            let xy = step.state.foot_positions[foot.index()];
            let clean = sample_clean(&field, foot, xy, step.state.pelvis_yaw, &pattern);
            let noisy = apply_noise(&clean, &field, &profile, &noise[foot.index()], t as u64);
            (clean.heights, noisy.heights)
        });
        samples.push(per_foot);
    }

    create_dir(out)?;
    let files = [out.join("trace.csv"), out.join("trace.jsonl")];
    rewards::write_csv(create(&files[0])?, &rewards_rows)?;
    let records = traj.steps.iter().zip(&rewards_rows).zip(&samples).map(|((s, r), [l, rt])| TraceRecord {
        t: s.t,
        phi: s.phi,
        command: s.command,
        in_stance: s.in_stance,
        feet: s.feet,
        pelvis: s.pelvis,
        state: &s.state,
        reward: r,
        clean: [&l.0, &rt.0],
        noisy: [&l.1, &rt.1],
    });
    state::write_jsonl(create(&files[1])?, records)?;
    write_manifest(out, "trace", Some(seed), &c, &[terrain_file.as_path()], &files)?;

    let n = rewards_rows.len().max(1) as f64;
    let mean = |f: fn(&RewardBreakdown) -> f64| rewards_rows.iter().map(f).sum::<f64>() / n;
    println!(
        "{} steps, mean total {:.4}, mean r_v_xy {:.4}, mean r_frc {:.4}",
        rewards_rows.len(),
        mean(|r| r.total),
        mean(|r| r.r_v_xy),
        mean(|r| r.r_frc)
    );
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// train-denoiser / distill

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub profile: Profile,
    pub seed: Option<u64>,
    /// Architecture override; the profile's architecture when absent.
    pub arch: Option<ArchConfig>,
    /// Copy the teacher's extero encoder into the student before training.
    pub load_teacher_encoder: bool,
    pub data: DatasetConfig,
    pub student: StudentTrainConfig,
}

impl TrainConfig {
    /// Reconstruction-only training on offset-profile episodes.
    pub fn denoise() -> Self {
        Self {
            profile: Profile::Desk,
            seed: None,
            arch: None,
            load_teacher_encoder: false,
            data: DatasetConfig {
                episodes: 670,
                heldout_episodes: 16,
                noise_mix: vec![(NoiseMode::Offset, 1.0)],
                ..Default::default()
            },
            student: StudentTrainConfig {
                loss: LossWeights {
                    imitation: 0.0,
                    reconstruction: 1.0,
                    gate: 0.0,
                },
                ..Default::default()
            },
        }
    }

    /// Imitation plus reconstruction against a synthetic teacher.
    pub fn distill() -> Self {
        Self {
            data: DatasetConfig {
                episodes: 60,
                heldout_episodes: 8,
                noise_mix: vec![(NoiseMode::Nominal, 1.0)],
                ..Default::default()
            },
            student: StudentTrainConfig::default(),
            ..Self::denoise()
        }
    }

    pub fn needs_teacher(&self, kind: RunKind) -> bool {
        kind == RunKind::Distill || self.student.loss.imitation > 0.0 || self.load_teacher_encoder
    }
}

pub fn resolve_train(kind: RunKind, a: &TrainArgs, section: Option<Value>, deterministic: bool) -> Result<TrainConfig> {
    let defaults = match kind {
        RunKind::Denoise => TrainConfig::denoise(),
        RunKind::Distill => TrainConfig::distill(),
    };
    let mut c = layered(defaults, section)?;
    c.profile = a.profile.unwrap_or(c.profile);
    c.data.episodes = a.episodes.unwrap_or(c.data.episodes);
    c.data.heldout_episodes = a.heldout.unwrap_or(c.data.heldout_episodes);
    c.student.epochs = a.epochs.unwrap_or(c.student.epochs);
    if let Some(mode) = a.noise_mode {
        c.data.noise_mix = vec![(mode, 1.0)];
    }
    if a.freeze_encoder {
        c.load_teacher_encoder = true;
        c.student.freeze_encoder = true;
    }
    let seed = resolve_seed(a.seed, c.seed, deterministic);
    c.seed = Some(seed);
    c.data.seed = seed;
    c.data.profile = c.profile;
    c.student.seed = seed;
    c.student.arch = c.arch.clone().unwrap_or_else(|| c.profile.arch());
    if c.student.arch.pattern_points != c.profile.pattern().len() {
        return Err(Error::invalid(
            "arch.pattern_points",
            format!("profile samples {} points per foot", c.profile.pattern().len()),
        ));
    }
    c.data.validate()?;
    c.student.validate()?;
    Ok(c)
}

pub fn run_train(kind: RunKind, c: TrainConfig, out: &Path) -> Result<Outcome> {
    let seed = c.seed.unwrap_or(0);
    let arch = &c.student.arch;
    let teacher = if c.needs_teacher(kind) {
        Some(make_synthetic_teacher(arch, derive_seed(&[seed, 0x7EAC]))?)
    } else {
        None
    };
    let (dataset, infos) = build_dataset(&c.data, teacher.as_ref())?;
    let mut train_steps = ModeSteps::default();
    for (seq, info) in dataset.train.iter().zip(&infos) {
        let slot = match info.noise {
            NoiseMode::Nominal => &mut train_steps.nominal,
            NoiseMode::Offset => &mut train_steps.offset,
            NoiseMode::Noisy => &mut train_steps.noisy,
        };
        *slot += seq.len().min(c.student.max_episode_length);
    }
    let (train_total, heldout_steps) = dataset.steps();
    println!(
        "{} training episodes ({train_total} steps), {} held-out ({heldout_steps} steps)",
        dataset.train.len(),
        dataset.heldout.len()
    );

    let mut policy = StudentPolicy::seeded(arch, seed)?;
    if let (true, Some(t)) = (c.load_teacher_encoder, &teacher) {
        policy.load_teacher_encoder(t)?;
    }
    let outcome = train_student_from(policy, &dataset, &c.student, |m, _| {
        println!(
            "epoch {:>3}  train {:.4e}  held-out {:.4e}  imitation {:.4e}  reconstruction {:.4e}  gate {:.4}",
            m.epoch,
            m.train_loss,
            m.heldout.loss,
            m.heldout.imitation_mse,
            m.heldout.reconstruction_mse,
            m.heldout.mean_gate
        );
    })?;

    let eval_mode = |mode| -> Result<_> {
        let seqs = heldout_under(&c.data, mode, teacher.as_ref())?;
        let seqs: Vec<_> = seqs.iter().map(|s| s.truncated(c.student.max_episode_length)).collect();
        crate::belief::evaluate(&outcome.best, &seqs, &c.student.loss)
    };
    let summary = RunSummary {
        kind,
        seed,
        train_steps,
        heldout_steps,
        best_epoch: outcome.best_epoch,
        initial: outcome.initial,
        best: outcome
            .history
            .iter()
            .find(|m| m.epoch == outcome.best_epoch)
            .map(|m| m.heldout)
            .unwrap_or(outcome.initial),
        by_mode: ModeMetrics {
            nominal: eval_mode(NoiseMode::Nominal)?,
            offset: eval_mode(NoiseMode::Offset)?,
            noisy: eval_mode(NoiseMode::Noisy)?,
        },
    };

    create_dir(out)?;
    let config_sha = sha256_hex(&serde_json::to_vec(&serde_json::to_value(&c)?)?);
    let ckpt = out.join("student.ckpt");
    checkpoint::save(
        &ckpt,
        &outcome.best,
        serde_json::json!({ "seed": seed, "config_sha256": config_sha, "best_epoch": outcome.best_epoch }),
    )?;
    let metrics = out.join(report::METRICS_FILE);
    EpochMetrics::write_csv(create(&metrics)?, &outcome.history)?;
    let summary_path = out.join(report::SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    let files = [ckpt.clone(), checkpoint::manifest_path(&ckpt), metrics, summary_path];
    let name = match kind {
        RunKind::Denoise => "train-denoiser",
        RunKind::Distill => "distill",
    };
    write_manifest(out, name, Some(seed), &c, &[], &files)?;

    let m = summary.by_mode;
    println!("best epoch {} of {}", summary.best_epoch, outcome.history.len());
    for (mode, e) in [("nominal", m.nominal), ("offset", m.offset), ("noisy", m.noisy)] {
        println!(
            "{mode:>8}: reconstruction {:.4e}  raw {:.4e}  imitation {:.4e}  gate {:.4}",
            e.reconstruction_mse, e.noisy_mse, e.imitation_mse, e.mean_gate
        );
    }
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// report

pub fn run_report(a: &ReportArgs) -> Result<Outcome> {
    let runs = a
        .metrics
        .iter()
        .map(|p| report::load_run(p))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&a.out)?;
    let mut files = report::render_plots(&runs, &a.out)?;
    let acceptance = report::evaluate_runs(&runs);
    let summary_path = a.out.join(report::SUMMARY_FILE);
    write_json(&summary_path, &acceptance)?;
    files.push(summary_path);
    let inputs: Vec<PathBuf> = runs
        .iter()
        .flat_map(|r| [r.path.join(report::METRICS_FILE), r.path.join(report::SUMMARY_FILE)])
        .collect();
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&a.out, "report", None, &a.metrics, &input_refs, &files)?;

    for c in &acceptance.criteria {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotEvaluated => "----",
        };
        let measured = c.measured.map(|v| format!(" {v:.4}")).unwrap_or_default();
        println!("{status} {} {}{measured}: {}", c.id, c.name, c.detail);
    }
    Ok(if acceptance.passed() {
        Outcome::Success
    } else {
        Outcome::AcceptanceFailed
    })
}
