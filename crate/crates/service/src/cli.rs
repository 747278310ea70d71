//! `choreo` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use choreo_core::audio::{features_from_audio, wav, BeatGrid};
use choreo_core::choreography::{constraints_from_json, run_choreography, ChoreographyOptions, Generator};
use choreo_core::eval::{alignment_report, joint_speed, kinematic_beats_with_prominence, savgol, signature_report, SignatureReport};
use choreo_core::io::parse_bvh;
use choreo_core::synthesis::{Sidecar, StyleParams};
use choreo_core::synthetic::SyntheticCorpusConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::api::{serve, AppState};
use crate::config::{ProjectConfig, CONFIG_ENV};
use crate::error::{Result, ResultExt, ServiceError};
use crate::pipeline::{cluster, synthesize, train_net, Backend, Bundle, LoadedNet, StyleRequest, SynthRequest};
use crate::store::{ingest_manifest_file, write_synthetic_corpus, CorpusStore};

#[derive(Debug, Parser)]
#[command(name = "choreo", version, about = "Music-driven dance synthesis from a motion-capture corpus")]
pub struct Cli {
    /// Project config (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus (BVH, beat files, manifest).
    Demo(DemoArgs),
    /// Parse a manifest of BVH and beat files into the corpus store.
    Ingest {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Beat grid and audio features from a WAV file.
    Features {
        wav: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment, embed and cluster the corpus into a motif bundle.
    Cluster {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a dance; writes BVH plus a JSON sidecar.
    Synth(SynthArgs),
    /// Evaluation reports.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Train the LSTM generator on the corpus.
    Train {
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss curve CSV; defaults to the checkpoint path with `.csv`.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// LSTM weights; the config path is used when it exists.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print the effective config as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub dances: usize,
    #[arg(long, default_value_t = 8)]
    pub prototypes: usize,
    #[arg(long, default_value_t = 30)]
    pub min_beats: usize,
    #[arg(long, default_value_t = 50)]
    pub max_beats: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StyleArg {
    None,
    Spectral,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Beat grid JSON (as written by `features`).
    #[arg(long, conflicts_with_all = ["bpm", "duration"])]
    pub beats: Option<PathBuf>,
    #[arg(long, requires = "duration")]
    pub bpm: Option<f64>,
    /// Seconds.
    #[arg(long, requires = "bpm")]
    pub duration: Option<f64>,
    #[arg(long, value_enum, default_value = "graph")]
    pub backend: BackendArg,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// JSON array of `{"beat": b, "motif": m}` pins.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub style: Option<StyleArg>,
    /// JSON style parameters `{"d1": [..], "d2": [..], "beta": b}`.
    #[arg(long, conflicts_with = "style")]
    pub style_preset: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub genre: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Graph,
    Lstm,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Kinematic beats of a clip against its music beats.
    Beats {
        #[arg(long)]
        bvh: PathBuf,
        /// Beat grid JSON or a synthesis sidecar.
        #[arg(long)]
        beats: PathBuf,
        #[arg(long, default_value_t = 1)]
        tolerance: usize,
        #[arg(long, default_value_t = 9)]
        sg_window: usize,
        #[arg(long, default_value_t = 3)]
        sg_order: usize,
        #[arg(long, default_value_t = 0.0)]
        prominence: f64,
        /// Per-frame trace: frame, speed, smoothed, kinematic beat, music beat.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Signature distance to the template over time.
    Signature {
        /// Motif timeline from a synthesis sidecar; otherwise sampled runs.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 250)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        interval: usize,
        #[arg(long)]
        genre: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes).context(|| path.display().to_string())
}

fn json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).context(|| path.display().to_string())?;
    serde_json::from_str(&text).context(|| path.display().to_string())
}

/// Runs one command; human-readable results go to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ProjectConfig::discover(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let seed = cfg.seed;
    match cli.command {
        Command::Config => {
            write!(out, "{}", cfg.to_toml())?;
        }
        Command::Demo(a) => {
            let sc = SyntheticCorpusConfig {
                prototypes: a.prototypes,
                dances: a.dances,
                beats_per_dance: (a.min_beats, a.max_beats.max(a.min_beats)),
                ..Default::default()
            };
            let path = write_synthetic_corpus(&a.out, &sc, seed)?;
            writeln!(out, "wrote {} dances, manifest {}", a.dances, path.display())?;
        }
        Command::Ingest { manifest, out: dest } => {
            let store = ingest_manifest_file(&manifest, &cfg)?;
            let dest = dest.unwrap_or_else(|| cfg.corpus_path());
            store.save(&dest)?;
            for w in &store.warnings {
                eprintln!("warning: {w}");
            }
            writeln!(out, "ingested {} dances into {}", store.entries.len(), dest.display())?;
        }
        Command::Features { wav: path, out: dest } => {
            let audio = wav::read(&path).context(|| path.display().to_string())?;
            let grid = features_from_audio(&audio.samples, audio.sample_rate, cfg.motion.fps)?;
            let dest = dest.unwrap_or_else(|| path.with_extension("beats.json"));
            grid.save(&dest)?;
            writeln!(out, "{} beats over {} frames into {}", grid.beat_frames.len(), grid.frame_count(), dest.display())?;
        }
        Command::Cluster { k, dim, out: dest } => {
            if let Some(k) = k {
                cfg.motif.k = k;
            }
            if let Some(d) = dim {
                cfg.motif.dim = d;
            }
            cfg.validate()?;
            let store = CorpusStore::load(&cfg.corpus_path())?;
            let dest = dest.unwrap_or_else(|| cfg.bundle_dir());
            let lib = cluster(&store, &cfg, seed, &dest)?;
            writeln!(
                out,
                "{} words into K = {} motifs (d = {}), bundle {}",
                lib.words.len(),
                lib.table.k(),
                lib.table.dim(),
                dest.display()
            )?;
        }
        Command::Synth(a) => synth(a, &cfg, seed, out)?,
        Command::Eval(e) => eval(e, &cfg, seed, out)?,
        Command::Train { iterations, out: dest, curve } => {
            let bundle = Bundle::from_config(&cfg)?;
            let iterations = iterations.unwrap_or(cfg.training.iterations);
            let (net, report) = train_net(&bundle, &cfg, seed, iterations, |it, l| {
                if it % 100 == 0 {
                    eprintln!("iteration {it}: total {:.5} (coherence {:.5}, perceptual {:.5})", l.total, l.coherence, l.perceptual);
                }
            })?;
            let dest = dest.unwrap_or_else(|| cfg.checkpoint_path());
            write_file(&dest, choreo_neural::checkpoint::to_bytes(&net))?;
            let curve = curve.unwrap_or_else(|| dest.with_extension("csv"));
            write_file(&curve, report.to_csv())?;
            let last = report.curve.last().map(|p| p.loss.total).unwrap_or(f64::NAN);
            writeln!(out, "trained {} iterations, final loss {last:.6}, weights {}", report.iterations, dest.display())?;
        }
        Command::Serve { host, port, checkpoint } => {
            let bundle = Bundle::from_config(&cfg)?;
            let net = match checkpoint {
                Some(p) => Some(LoadedNet::load(&p)?),
                None if cfg.checkpoint_path().is_file() => Some(LoadedNet::load(&cfg.checkpoint_path())?),
                None => None,
            };
            let host = host.unwrap_or_else(|| cfg.server.host.clone());
            let port = port.unwrap_or(cfg.server.port);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(AppState::new(bundle, cfg, net), &host, port))?;
        }
    }
    Ok(())
}

fn synth(a: SynthArgs, cfg: &ProjectConfig, seed: u64, out: &mut dyn Write) -> Result<()> {
    let backend = match a.backend {
        BackendArg::Graph => Backend::Graph,
        BackendArg::Lstm => Backend::Lstm,
    };
    let net = match backend {
        Backend::Graph => None,
        Backend::Lstm => {
            let path = a.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
            if !path.is_file() {
                return Err(ServiceError::BadRequest(format!("checkpoint {} not found", path.display())));
            }
            Some(LoadedNet::load(&path)?)
        }
    };
    let constraints = match &a.constraints {
        Some(p) => {
            let text = std::fs::read_to_string(p).context(|| p.display().to_string())?;
            constraints_from_json(&text).context(|| p.display().to_string())?
        }
        None => Vec::new(),
    };
    let style = match (&a.style, &a.style_preset) {
        (_, Some(p)) => Some(StyleRequest::Preset(json_file::<StyleParams>(p)?)),
        (Some(StyleArg::None), _) => Some(StyleRequest::None),
        (Some(StyleArg::Spectral), _) => Some(StyleRequest::Spectral),
        (None, None) => None,
    };
    let request = SynthRequest {
        beats: None,
        bpm: a.bpm,
        duration: a.duration,
        backend,
        seed,
        constraints,
        style,
        beta: a.beta,
        genre: a.genre.clone(),
    };
    let bundle = Bundle::from_config(cfg)?;
    let grid = match &a.beats {
        Some(p) => BeatGrid::load(p).context(|| p.display().to_string())?,
        None => request.beat_grid(bundle.library.table.fps)?,
    };
    let record = synthesize(&bundle, cfg, &request, grid, net.as_ref())?;
    write_file(&a.out, record.bvh())?;
    let side = a.out.with_extension("json");
    write_file(&side, serde_json::to_string_pretty(&record.sidecar)?)?;
    writeln!(
        out,
        "clip {} ({} frames, {} beats) written to {} and {}",
        record.id,
        record.clip.len(),
        record.sidecar.motif_timeline.len(),
        a.out.display(),
        side.display()
    )?;
    Ok(())
}

/// Music beats from a beat grid file or a sidecar.
fn music_beats(path: &Path) -> Result<Vec<usize>> {
    let value: serde_json::Value = json_file(path)?;
    if value.get("motif_timeline").is_some() {
        let side: Sidecar = serde_json::from_value(value).context(|| path.display().to_string())?;
        Ok(side.beat_frames)
    } else {
        let grid: BeatGrid = serde_json::from_value(value).context(|| path.display().to_string())?;
        Ok(grid.beat_frames)
    }
}

fn eval(e: EvalCommand, cfg: &ProjectConfig, seed: u64, out: &mut dyn Write) -> Result<()> {
    match e {
        EvalCommand::Beats { bvh, beats, tolerance, sg_window, sg_order, prominence, csv } => {
            let text = std::fs::read_to_string(&bvh).context(|| bvh.display().to_string())?;
            let clip = parse_bvh::<f64>(&text).context(|| bvh.display().to_string())?;
            let music: Vec<usize> = music_beats(&beats)?.into_iter().filter(|&b| b < clip.len()).collect();
            let kin = kinematic_beats_with_prominence(&clip, sg_window, sg_order, prominence)?;
            let report = alignment_report(&kin, &music, tolerance)?;
            if let Some(p) = csv {
                let speed = joint_speed(&clip);
                let smooth = savgol(&speed, sg_window, sg_order)?;
                let mut s = String::from("frame,speed,smoothed,kinematic_beat,music_beat\n");
                for t in 0..speed.len() {
                    let k = kin.binary_search(&t).is_ok() as u8;
                    let m = music.binary_search(&t).is_ok() as u8;
                    s.push_str(&format!("{t},{},{},{k},{m}\n", speed[t], smooth[t]));
                }
                write_file(&p, s)?;
            }
            let summary = serde_json::json!({
                "report": report,
                "sg_window": sg_window,
                "sg_order": sg_order,
                "prominence": prominence,
                "seed": seed,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        EvalCommand::Signature { sidecar, runs, length, interval, genre, csv } => {
            let bundle = Bundle::from_config(cfg)?;
            let lib = &bundle.library;
            let target = lib.template(genre.as_deref())?;
            let summary = if let Some(p) = sidecar {
                let side: Sidecar = json_file(&p)?;
                let stream: Vec<usize> = side.motif_timeline.iter().map(|t| t.motif).collect();
                let report = signature_report(&stream, target, interval)?;
                if let Some(c) = &csv {
                    write_file(c, report.to_csv())?;
                }
                serde_json::json!({ "beats": stream.len(), "final_distance": report.final_distance, "genre": genre })
            } else {
                if runs == 0 || length == 0 {
                    return Err(ServiceError::BadRequest("runs and length must be positive".into()));
                }
                let mut guided = Vec::with_capacity(runs);
                let mut ablated = Vec::with_capacity(runs);
                for r in 0..runs as u64 {
                    for (generator, reports) in [(Generator::Guided, &mut guided), (Generator::TransitionOnly, &mut ablated)] {
                        let options = ChoreographyOptions { generator, ..Default::default() };
                        let run = run_choreography(&lib.table.transition, target, length, seed + r, &[], options)?;
                        reports.push(signature_report(&run.motifs, target, interval)?);
                    }
                }
                let better = guided
                    .iter()
                    .zip(&ablated)
                    .filter(|(g, a)| g.final_distance < a.final_distance)
                    .count();
                let mean = SignatureReport::mean(&guided)?;
                if let Some(c) = &csv {
                    write_file(c, mean.to_csv())?;
                }
                serde_json::json!({
                    "runs": runs,
                    "beats": length,
                    "genre": genre,
                    "seed": seed,
                    "guided_final": mean.final_distance,
                    "transition_only_final": SignatureReport::mean(&ablated)?.final_distance,
                    "guided_better_fraction": better as f64 / runs as f64,
                })
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
    }
    Ok(())
}
