//! Benchmark harness: embeds, attacks and detects over a sweep and writes CSV.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use stdmmw_core::corpus::{recipes, render, CORPUS_SIZE};
use stdmmw_core::metrics::ber;
use stdmmw_core::pipeline::{Payload, TuningConfig};
use stdmmw_core::prng::{mix64, CounterRng};
use stdmmw_core::{
    detect_image, detect_image_with_ring, embed_image, AttackKind, AttackSpec, EmbedJob,
    GeneratorConfig, GrayImage, Method, UserKeySet,
};

use crate::{pnm, CliError};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AttackGrid {
    pub kind: String,
    pub params: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Directory of PGM images, read in file-name order.
    pub corpus_dir: Option<PathBuf>,
    /// Number of built-in synthetic images to add.
    #[serde(default)]
    pub synthetic_images: usize,
    pub users: Vec<usize>,
    pub methods: Vec<String>,
    pub target_psnr: Option<f64>,
    #[serde(default = "default_f_g")]
    pub f_g: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also report detection on the unattacked image.
    #[serde(default = "default_true")]
    pub include_clean: bool,
    #[serde(default)]
    pub attacks: Vec<AttackGrid>,
    pub output: Option<PathBuf>,
}

fn default_f_g() -> f64 {
    10.0
}

fn default_trials() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => config_error(format!("line {l}: {}", e.message())),
                None => config_error(e.message().to_string()),
            }
        })
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        self.methods
            .iter()
            .map(|m| {
                m.parse()
                    .map_err(|_| config_error(format!("unknown method '{m}'")))
            })
            .collect()
    }

    /// Attack points in configuration order.
    pub fn attack_points(&self) -> Result<Vec<Option<AttackSpec>>, CliError> {
        let mut out = Vec::new();
        if self.include_clean {
            out.push(None);
        }
        for g in &self.attacks {
            let kind: AttackKind = g
                .kind
                .parse()
                .map_err(|_| config_error(format!("unknown attack '{}'", g.kind)))?;
            for &p in &g.params {
                let spec = AttackSpec::new(kind, p, g.seed)
                    .map_err(|e| config_error(format!("attack {}: {e}", g.kind)))?;
                out.push(Some(spec));
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.users.is_empty() || self.users.contains(&0) {
            return Err(config_error("users must list at least one positive count"));
        }
        if self.methods.is_empty() {
            return Err(config_error("methods must not be empty"));
        }
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        Ok(())
    }
}

/// Loads the corpus: PGMs from `corpus_dir` (paths relative to `base`), then synthetic images.
pub fn load_corpus(cfg: &BenchConfig, base: &Path) -> Result<Vec<(String, GrayImage)>, CliError> {
    let mut images = Vec::new();
    if let Some(dir) = &cfg.corpus_dir {
        let dir = base.join(dir);
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        paths.sort();
        for p in paths {
            let data = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            images.push((name, pnm::parse_pgm(&data)?));
        }
    }
    let all = recipes();
    if cfg.synthetic_images > all.len() {
        return Err(config_error(format!(
            "at most {} synthetic images are available",
            all.len()
        )));
    }
    for (name, r) in all.into_iter().take(cfg.synthetic_images) {
        images.push((
            name,
            render(&r, CORPUS_SIZE, CORPUS_SIZE).map_err(CliError::Domain)?,
        ));
    }
    if images.is_empty() {
        return Err(config_error("corpus is empty"));
    }
    Ok(images)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub method: Method,
    pub n_users: usize,
    /// `none` for the clean image.
    pub attack: String,
    pub param: f64,
    /// `None` on summary rows.
    pub trial: Option<usize>,
    pub psnr: f64,
    pub bers: Vec<f64>,
}

impl BenchRow {
    pub fn ber_mean(&self) -> f64 {
        self.bers.iter().sum::<f64>() / self.bers.len() as f64
    }
}

/// Deterministic users and watermark bits for one benchmark cell.
pub fn bench_payloads(seed: u64, trial: usize, n: usize, bits: usize) -> Vec<Payload> {
    (0..n)
        .map(|j| {
            let s = mix64(seed ^ mix64(trial as u64) ^ mix64(0x1000 + j as u64));
            let keys = UserKeySet::from_seed(format!("user{}", j + 1), s).expect("static user id");
            let rng = CounterRng::new(s, 0x6269_7473);
            Payload::new(
                keys,
                (0..bits).map(|i| rng.uniform(i as u64, 0) < 0.5).collect(),
            )
        })
        .collect()
}

fn run_cell(
    cfg: &BenchConfig,
    name: &str,
    img: &GrayImage,
    method: Method,
    n: usize,
    trial: usize,
    attacks: &[Option<AttackSpec>],
) -> Result<Vec<BenchRow>, CliError> {
    let vectors = (img.width() / 8) * (img.height() / 8);
    let users = bench_payloads(cfg.seed, trial, n, vectors);
    let mut job = EmbedJob::new(img.clone(), users.clone(), method).with_f_g(cfg.f_g);
    job.tuning = TuningConfig::default();
    if let Some(t) = cfg.target_psnr {
        job = job.with_target_psnr(t);
    }
    let out = embed_image(&job).map_err(CliError::Domain)?;
    let gen = GeneratorConfig::default().with_f_g(out.f_g);

    let mut rows = Vec::with_capacity(attacks.len());
    for a in attacks {
        let received = match a {
            Some(spec) => {
                let seeded = AttackSpec {
                    seed: spec.seed.wrapping_add(trial as u64),
                    ..*spec
                };
                seeded.apply(&out.image).map_err(CliError::Domain)?
            }
            None => out.image.clone(),
        };
        let bers = users
            .iter()
            .map(|u| {
                let rep = if method == Method::Uorth {
                    detect_image_with_ring(&received, &u.keys, &out.ring, vectors, &gen)
                } else {
                    detect_image(&received, &u.keys, vectors, &gen)
                }
                .map_err(CliError::Domain)?;
                ber(&rep.bits, &u.bits).map_err(CliError::Domain)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(BenchRow {
            image: name.to_string(),
            method,
            n_users: n,
            attack: a.map_or("none".to_string(), |s| s.kind.to_string()),
            param: a.map_or(0.0, |s| s.param),
            trial: Some(trial),
            psnr: out.psnr,
            bers,
        });
    }
    Ok(rows)
}

/// Runs the whole sweep. Rows come in a fixed order regardless of scheduling.
pub fn run_bench(
    cfg: &BenchConfig,
    corpus: &[(String, GrayImage)],
) -> Result<Vec<BenchRow>, CliError> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let attacks = cfg.attack_points()?;
    let mut cells = Vec::new();
    for (ii, _) in corpus.iter().enumerate() {
        for &m in &methods {
            for &n in &cfg.users {
                for t in 0..cfg.trials {
                    cells.push((ii, m, n, t));
                }
            }
        }
    }
    let results: Vec<Result<Vec<BenchRow>, CliError>> = cells
        .par_iter()
        .map(|&(ii, m, n, t)| run_cell(cfg, &corpus[ii].0, &corpus[ii].1, m, n, t, &attacks))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Means over images and trials for every (method, users, attack, param).
pub fn summarize(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut keys: Vec<(Method, usize, String, u64)> = Vec::new();
    for r in rows {
        let k = (r.method, r.n_users, r.attack.clone(), r.param.to_bits());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, n, attack, pbits)| {
            let group: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| {
                    r.method == method
                        && r.n_users == n
                        && r.attack == attack
                        && r.param.to_bits() == pbits
                })
                .collect();
            let count = group.len() as f64;
            let bers = (0..n)
                .map(|j| group.iter().map(|r| r.bers[j]).sum::<f64>() / count)
                .collect();
            BenchRow {
                image: "ALL".to_string(),
                method,
                n_users: n,
                attack,
                param: f64::from_bits(pbits),
                trial: None,
                psnr: group.iter().map(|r| r.psnr).sum::<f64>() / count,
                bers,
            }
        })
        .collect()
}

/// RFC 4180 CSV with a header; per-user columns up to the largest user count.
pub fn write_csv(rows: &[BenchRow], summary: &[BenchRow]) -> Result<Vec<u8>, CliError> {
    let max_users = rows
        .iter()
        .chain(summary)
        .map(|r| r.n_users)
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "image", "method", "n_users", "attack", "param", "trial", "psnr",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=max_users).map(|j| format!("ber_user_{j}")));
    header.push("ber_mean".to_string());
    let csv_err = |e: csv::Error| CliError::Format(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows.iter().chain(summary) {
        let mut rec = vec![
            r.image.clone(),
            r.method.to_string(),
            r.n_users.to_string(),
            r.attack.clone(),
            r.param.to_string(),
            r.trial.map_or("mean".to_string(), |t| t.to_string()),
            format!("{:.6}", r.psnr),
        ];
        for j in 0..max_users {
            rec.push(r.bers.get(j).map_or(String::new(), |b| format!("{b:.6}")));
        }
        rec.push(format!("{:.6}", r.ber_mean()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Format(e.to_string()))
}
