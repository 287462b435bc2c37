//! Command-line front end: key generation, embedding, detection, attacks,
//! sequential embedding, corpus export and the benchmark sweep.

pub mod bench;
pub mod pnm;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use stdmmw_core::corpus::standard_corpus;
use stdmmw_core::metrics::ber;
use stdmmw_core::pipeline::Payload;
use stdmmw_core::{
    detect_image, detect_image_with_ring, embed_image, AttackKind, AttackSpec, EmbedJob,
    GeneratorConfig, Method, PublicKeyRing, UserKeySet,
};

use crate::pnm::Bitmap;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{name}: {0}", name = .0.name())]
    Domain(stdmmw_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Domain(_) | CliError::Format(_) => EXIT_DOMAIN,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<stdmmw_core::Error> for CliError {
    fn from(e: stdmmw_core::Error) -> Self {
        CliError::Domain(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "stdmmw", version, about = "Multi-user STDM image watermarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a user key file.
    Keygen(KeygenArgs),
    /// Embed one watermark per key into an image.
    Embed(EmbedArgs),
    /// Recover one user's watermark.
    Detect(DetectArgs),
    /// Apply a channel distortion.
    Attack(AttackArgs),
    /// Add users to a watermarked image, orthogonal to a public key ring.
    SeqEmbed(SeqEmbedArgs),
    /// Run a benchmark sweep described by a TOML file.
    Bench(BenchArgs),
    /// Write the built-in synthetic test images as PGM files.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Derive the seeds from this value instead of system entropy.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Key file, once per user.
    #[arg(long = "key", required = true)]
    pub keys: Vec<PathBuf>,
    /// Watermark PBM, once per user and in the same order as the keys.
    #[arg(long = "wm", required = true)]
    pub watermarks: Vec<PathBuf>,
    #[arg(long, default_value = "poptim", value_parser = parse_method)]
    pub method: Method,
    /// Tune f_g to reach this PSNR in dB.
    #[arg(long, conflicts_with = "fg")]
    pub target_psnr: Option<f64>,
    /// Mean of the step distribution, used when no target is given.
    #[arg(long, default_value_t = 10.0)]
    pub fg: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the public ring of the embedded users.
    #[arg(long)]
    pub ring_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeqEmbedArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Public ring of the users already present.
    #[arg(long)]
    pub ring: PathBuf,
    #[arg(long = "key", required = true)]
    pub keys: Vec<PathBuf>,
    #[arg(long = "wm", required = true)]
    pub watermarks: Vec<PathBuf>,
    #[arg(long, default_value = "poptim", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, conflicts_with = "fg")]
    pub target_psnr: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub fg: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the input ring extended by the new users.
    #[arg(long)]
    pub ring_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    /// Watermark size as WxH.
    #[arg(long, value_parser = parse_size)]
    pub wm_size: (usize, usize),
    /// The f_g reported at embedding time.
    #[arg(long, default_value_t = 10.0)]
    pub fg: f64,
    /// Ring of earlier users, for users embedded orthogonally to them.
    #[arg(long)]
    pub ring: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Embedded watermark; prints the bit error rate.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long = "type", value_parser = parse_attack_kind)]
    pub kind: AttackKind,
    #[arg(long)]
    pub param: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    /// Overrides the output path from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
        .map_err(|_| format!("expected one of plain, no-optim, poptim, qoptim, uorth; got '{s}'"))
}

fn parse_attack_kind(s: &str) -> Result<AttackKind, String> {
    s.parse()
        .map_err(|_| format!("expected gaussian, saltpepper, jpeg or scale; got '{s}'"))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    match (w.parse(), h.parse()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(format!("expected WxH with positive integers, got '{s}'")),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, data: &[u8]) -> Result<(), CliError> {
    fs::write(path, data).map_err(|e| CliError::io(path, e))
}

fn read_keys(path: &Path) -> Result<UserKeySet, CliError> {
    UserKeySet::parse(&read_text(path)?)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn read_ring(path: &Path) -> Result<PublicKeyRing, CliError> {
    PublicKeyRing::parse(&read_text(path)?)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn load_payloads(
    keys: &[PathBuf],
    wms: &[PathBuf],
    vectors: usize,
) -> Result<Vec<Payload>, CliError> {
    if keys.len() != wms.len() {
        return Err(CliError::Usage(format!(
            "{} key files but {} watermarks",
            keys.len(),
            wms.len()
        )));
    }
    keys.iter()
        .zip(wms)
        .map(|(k, w)| {
            let bm = pnm::parse_pbm(&read(w)?)?;
            if bm.bits.len() != vectors {
                return Err(CliError::Domain(stdmmw_core::Error::InvalidParameter(
                    format!(
                        "{}: {}x{} watermark has {} bits, the image has {vectors} host vectors",
                        w.display(),
                        bm.width,
                        bm.height,
                        bm.bits.len()
                    ),
                )));
            }
            Ok(Payload::new(read_keys(k)?, bm.bits))
        })
        .collect()
}

fn host_vector_count(img: &stdmmw_core::GrayImage) -> usize {
    (img.width() / 8) * (img.height() / 8)
}

struct EmbedRequest<'a> {
    image: &'a Path,
    keys: &'a [PathBuf],
    watermarks: &'a [PathBuf],
    method: Method,
    target_psnr: Option<f64>,
    fg: f64,
    out: &'a Path,
    ring_out: Option<&'a Path>,
    ring: PublicKeyRing,
}

fn embed_common(req: EmbedRequest<'_>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let img = pnm::parse_pgm(&read(req.image)?)?;
    let users = load_payloads(req.keys, req.watermarks, host_vector_count(&img))?;
    let mut job = EmbedJob::new(img, users, req.method).with_f_g(req.fg);
    job.ring = req.ring;
    if let Some(t) = req.target_psnr {
        job = job.with_target_psnr(t);
    }
    let out = embed_image(&job)?;
    write(req.out, &pnm::write_pgm(&out.image))?;
    if let Some(r) = req.ring_out {
        write(r, out.ring.to_file_string().as_bytes())?;
    }
    let _ = writeln!(stdout, "PSNR: {:.2} dB", out.psnr);
    let _ = writeln!(stdout, "f_g: {}", out.f_g);
    if out.skipped > 0 {
        eprintln!(
            "warning: {} host vectors left unmodified (degenerate directions)",
            out.skipped
        );
    }
    Ok(())
}

fn cmd_keygen(a: &KeygenArgs) -> Result<(), CliError> {
    let keys = match a.seed {
        Some(s) => UserKeySet::from_seed(a.user.clone(), s),
        None => UserKeySet::new(
            a.user.clone(),
            rand::random(),
            rand::random(),
            rand::random(),
        ),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    write(&a.out, keys.to_file_string().as_bytes())
}

fn cmd_detect(a: &DetectArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let img = pnm::parse_pgm(&read(&a.image)?)?;
    let keys = read_keys(&a.key)?;
    let (w, h) = a.wm_size;
    let vectors = host_vector_count(&img);
    if w * h != vectors {
        return Err(CliError::Domain(stdmmw_core::Error::InvalidParameter(
            format!(
                "watermark size {w}x{h} needs {} host vectors, the image has {vectors}",
                w * h
            ),
        )));
    }
    let cfg = GeneratorConfig::default().with_f_g(a.fg);
    let report = match &a.ring {
        Some(r) => detect_image_with_ring(&img, &keys, &read_ring(r)?, w * h, &cfg)?,
        None => detect_image(&img, &keys, w * h, &cfg)?,
    };
    let bm = Bitmap {
        width: w,
        height: h,
        bits: report.bits.clone(),
    };
    write(&a.out, &pnm::write_pbm(&bm))?;
    if let Some(r) = &a.reference {
        let reference = pnm::parse_pbm(&read(r)?)?;
        let b = ber(&report.bits, &reference.bits)?;
        let _ = writeln!(stdout, "BER: {b:.3}");
    }
    Ok(())
}

fn cmd_attack(a: &AttackArgs) -> Result<(), CliError> {
    let spec =
        AttackSpec::new(a.kind, a.param, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let img = pnm::parse_pgm(&read(&a.image)?)?;
    write(&a.out, &pnm::write_pgm(&spec.apply(&img)?))
}

fn cmd_bench(a: &BenchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = bench::BenchConfig::parse(&read_text(&a.config)?)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let corpus = bench::load_corpus(&cfg, base)?;
    let rows = bench::run_bench(&cfg, &corpus)?;
    let summary = bench::summarize(&rows);
    let csv = bench::write_csv(&rows, &summary)?;
    match a
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| base.join(o)))
    {
        Some(path) => write(&path, &csv),
        None => stdout
            .write_all(&csv)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_corpus(a: &CorpusArgs) -> Result<(), CliError> {
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    for c in standard_corpus()? {
        write(
            &a.out.join(format!("{}.pgm", c.name)),
            &pnm::write_pgm(&c.image),
        )?;
    }
    Ok(())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Keygen(a) => cmd_keygen(a),
        Command::Embed(a) => embed_common(
            EmbedRequest {
                image: &a.image,
                keys: &a.keys,
                watermarks: &a.watermarks,
                method: a.method,
                target_psnr: a.target_psnr,
                fg: a.fg,
                out: &a.out,
                ring_out: a.ring_out.as_deref(),
                ring: PublicKeyRing::new(),
            },
            stdout,
        ),
        Command::SeqEmbed(a) => embed_common(
            EmbedRequest {
                image: &a.image,
                keys: &a.keys,
                watermarks: &a.watermarks,
                method: a.method,
                target_psnr: a.target_psnr,
                fg: a.fg,
                out: &a.out,
                ring_out: a.ring_out.as_deref(),
                ring: read_ring(&a.ring)?,
            },
            stdout,
        ),
        Command::Detect(a) => cmd_detect(a, stdout),
        Command::Attack(a) => cmd_attack(a),
        Command::Bench(a) => cmd_bench(a, stdout),
        Command::Corpus(a) => cmd_corpus(a),
    }
}

/// Sizes the global thread pool from `STDMMW_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("STDMMW_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "STDMMW_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = configure_threads().and_then(|_| execute(&cli, &mut std::io::stdout()));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
