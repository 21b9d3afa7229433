use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gsmap::codec::{CodecBackend, ExternalBackend};
use gsmap::maps::ChannelWeights;
use gsmap::metrics::{analyze, compare, AnalysisReport, CompareReport};
use gsmap::pca::PcaMode;
use gsmap::pipeline::{decode_container, encode_cloud, EncodeConfig, EncodeReport, QpMap};
use gsmap::plas::PlasSchedule;
use gsmap::ply::{load_cloud, save_cloud};
use gsmap::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "gsmap", version, about = "Gaussian splat clouds to and from codec-friendly 2D attribute maps")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print reports as JSON instead of text tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a 3DGS PLY file into a container.
    Encode(EncodeArgs),
    /// Decode a container back into a 3DGS PLY file.
    Decode(DecodeArgs),
    /// Per-attribute PSNR and max error between two PLY files.
    Compare { original: PathBuf, decoded: PathBuf },
    /// Smoothness and compressed size of alternative layouts, plus PCA evr curves.
    Analyze(AnalyzeArgs),
    /// Write a synthetic clustered cloud.
    Gen(GenArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// JSON file describing an external codec backend.
    #[arg(long)]
    backend_config: Option<PathBuf>,
    /// Use the external backend configured through GSMAP_* environment variables.
    #[arg(long)]
    external: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Retained PCA coefficients (multiple of 3, at most 45).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    pca_mode: Option<PcaMode>,
    /// Largest MiniPLAS block size.
    #[arg(long)]
    mbs: Option<usize>,
    /// MiniPLAS passes per block size.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip MiniPLAS and keep the plain Morton layout.
    #[arg(long)]
    no_miniplas: bool,
    /// qp for every attribute group (0 = lossless).
    #[arg(long)]
    qp: Option<u32>,
    #[arg(long)]
    qp_dc: Option<u32>,
    #[arg(long)]
    qp_ac: Option<u32>,
    #[arg(long)]
    qp_scale: Option<u32>,
    #[arg(long)]
    qp_opacity: Option<u32>,
    #[arg(long)]
    qp_rotation: Option<u32>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct EncodeArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct GenArgs {
    output: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f32,
}

/// Config file contents; every field is optional.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k: Option<usize>,
    pca_mode: Option<PcaMode>,
    mbs: Option<usize>,
    iterations: Option<usize>,
    seed: Option<u64>,
    miniplas: Option<bool>,
    qp: Option<QpMap>,
    weights: Option<ChannelWeights>,
    backend: Option<ExternalBackend>,
}

fn config_error(msg: String) -> gsmap::Error {
    gsmap::Error::Config(msg)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(gsmap::Error::Io).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?)
}

fn resolve_backend(args: &BackendArgs, from_file: Option<ExternalBackend>) -> anyhow::Result<CodecBackend> {
    if let Some(path) = &args.backend_config {
        let text = fs::read_to_string(path).map_err(gsmap::Error::Io).with_context(|| format!("reading {}", path.display()))?;
        return Ok(CodecBackend::External(ExternalBackend::from_json(&text)?));
    }
    if args.external {
        return match ExternalBackend::from_env() {
            Some(b) => Ok(CodecBackend::External(b?)),
            None => Err(config_error("--external needs GSMAP_ENCODE_CMD and GSMAP_DECODE_CMD".into()).into()),
        };
    }
    match from_file {
        Some(b) => {
            b.validate()?;
            Ok(CodecBackend::External(b))
        }
        None => Ok(CodecBackend::Internal),
    }
}

fn build_config(args: &ConfigArgs) -> anyhow::Result<EncodeConfig> {
    let file: ConfigFile = match &args.config {
        Some(path) => read_json(path)?,
        None => ConfigFile::default(),
    };
    let defaults = EncodeConfig::default();
    let mut qp = file.qp.unwrap_or_default();
    if let Some(q) = args.qp {
        qp = QpMap::uniform(q);
    }
    let overrides = [
        (args.qp_dc, &mut qp.sh_dc),
        (args.qp_ac, &mut qp.ac),
        (args.qp_scale, &mut qp.scale),
        (args.qp_opacity, &mut qp.opacity),
        (args.qp_rotation, &mut qp.rotation),
    ];
    for (flag, slot) in overrides {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let schedule = PlasSchedule {
        mbs: args.mbs.or(file.mbs).unwrap_or(defaults.schedule.mbs),
        iterations_per_size: args.iterations.or(file.iterations).unwrap_or(defaults.schedule.iterations_per_size),
        seed: args.seed.or(file.seed).unwrap_or(defaults.schedule.seed),
    };
    let miniplas = !args.no_miniplas && file.miniplas.unwrap_or(true);
    if miniplas {
        schedule.validate()?;
    }
    Ok(EncodeConfig {
        k: args.k.or(file.k).unwrap_or(defaults.k),
        pca_mode: args.pca_mode.or(file.pca_mode).unwrap_or(defaults.pca_mode),
        schedule,
        miniplas,
        qp,
        weights: file.weights.unwrap_or(defaults.weights),
        backend: resolve_backend(&args.backend, file.backend)?,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(gsmap::Error::Io)?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(gsmap::Error::Io)?;
    tmp.persist(path).map_err(|e| gsmap::Error::Io(e.error))?;
    Ok(())
}

fn print_encode(r: &EncodeReport) {
    println!("primitives {}  grid {}x{}  k {} ({}, cumulative evr {:.4})", r.n, r.side, r.side, r.k, r.pca_mode, r.cumulative_evr);
    println!();
    println!("{:<12}{:>12}{:>12}{:>12}{:>12}{:>12}", "seconds", "Morton 3D", "Morton 2D", "PCA", "MiniPLAS", "All");
    let t = &r.times;
    println!("{:<12}{:>12.3}{:>12.3}{:>12.3}{:>12.3}{:>12.3}", "", t.morton3d, t.morton2d, t.pca, t.miniplas, t.map_generation);
    println!("assemble {:.3}s  encode {:.3}s  pack {:.3}s", t.assemble, t.encode, t.pack);
    if !r.miniplas.passes.is_empty() {
        println!();
        println!("{:<6}{:>8}{:>16}{:>16}{:>14}", "pass", "block", "cost before", "cost after", "ops");
        for p in &r.miniplas.passes {
            println!("{:<6}{:>8}{:>16.6}{:>16.6}{:>14}", p.pass_index, p.block_size, p.cost_before, p.cost_after, p.op_count);
        }
    }
    println!();
    println!("{:<12}{:>12}", "image", "bytes");
    for (tag, bytes) in &r.bitrate.images {
        println!("{:<12}{:>12}", tag, bytes);
    }
    println!("total {} bytes, {:.3} bits per primitive", r.bitrate.total_bytes, r.bitrate.bpp);
}

fn psnr_text(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

fn print_compare(r: &CompareReport) {
    println!("{:<10}{:>12}{:>16}", "group", "PSNR (dB)", "max error");
    for g in &r.groups {
        println!("{:<10}{:>12}{:>16.6e}", g.group, psnr_text(g.psnr), g.max_error);
    }
    println!("attribute PSNR {} dB", psnr_text(r.attribute_psnr));
    if r.ambiguous > 0 || r.fallback_matched > 0 {
        println!("ambiguous positions {}, matched by Morton rank {}", r.ambiguous, r.fallback_matched);
    }
}

fn print_analysis(r: &AnalysisReport) {
    println!("primitives {}  grid {}x{}", r.n, r.side, r.side);
    println!();
    println!("{:<24}{:>16}{:>16}", "layout", "smoothness", "bytes");
    for l in &r.layouts {
        println!("{:<24}{:>16.6}{:>16}", l.layout, l.smoothness, l.compressed_bytes);
    }
    println!();
    print!("{:<6}", "k");
    for c in &r.evr {
        print!("{:>12}", c.mode.to_string());
    }
    println!();
    for k in (3..=45).step_by(3) {
        print!("{:<6}", k);
        for c in &r.evr {
            print!("{:>12.6}", c.cumulative[k - 1]);
        }
        println!();
    }
}

fn emit<T: serde::Serialize>(json: bool, value: &T, text: impl FnOnce(&T)) -> anyhow::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        text(value);
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(config_error("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Encode(args) => {
            let cfg = build_config(&args.config)?;
            let cloud = load_cloud(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
            let out = encode_cloud(&cloud, &cfg).context("encoding")?;
            write_atomic(&args.output, &out.container).with_context(|| format!("writing {}", args.output.display()))?;
            if let Some(path) = &args.report {
                write_atomic(path, serde_json::to_string_pretty(&out.report)?.as_bytes())?;
            }
            emit(cli.json, &out.report, print_encode)
        }
        Command::Decode(args) => {
            let backend = resolve_backend(&args.backend, None)?;
            let backend = match backend {
                CodecBackend::Internal => None,
                b => Some(b),
            };
            let bytes = fs::read(&args.input).map_err(gsmap::Error::Io).with_context(|| format!("reading {}", args.input.display()))?;
            let cloud = decode_container(&bytes, backend.as_ref()).context("decoding")?;
            save_cloud(&cloud, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
            if !cli.json {
                println!("decoded {} primitives to {}", cloud.len(), args.output.display());
            }
            Ok(())
        }
        Command::Compare { original, decoded } => {
            let a = load_cloud(&original).with_context(|| format!("loading {}", original.display()))?;
            let b = load_cloud(&decoded).with_context(|| format!("loading {}", decoded.display()))?;
            let report = compare(&a, &b)?;
            emit(cli.json, &report, print_compare)
        }
        Command::Analyze(args) => {
            let cfg = build_config(&args.config)?;
            let cloud = load_cloud(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
            let report = analyze(&cloud, &cfg).context("analysis")?;
            emit(cli.json, &report, print_analysis)
        }
        Command::Gen(args) => {
            let cfg = SynthConfig { n: args.n, clusters: args.clusters, seed: args.seed, noise: args.noise };
            let cloud = generate(&cfg);
            save_cloud(&cloud, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
            if !cli.json {
                println!("wrote {} primitives to {}", cloud.len(), args.output.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(gsmap::ErrorClass::Config.exit_code() as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<gsmap::Error>().map_or(1, |e| e.class().exit_code());
            ExitCode::from(code as u8)
        }
    }
}
