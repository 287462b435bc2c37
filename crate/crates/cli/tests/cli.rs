use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stdmmw_cli::pnm::{write_pbm, Bitmap};

fn stdmmw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stdmmw"))
        .args(args)
        .env("STDMMW_THREADS", "2")
        .output()
        .expect("spawn stdmmw")
}

fn ok(args: &[&str]) -> String {
    let out = stdmmw(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    stdmmw(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        ok(&["corpus", "--out", s(&ws.path("corpus"))]);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn image(&self) -> PathBuf {
        self.path("corpus").join("mid00.pgm")
    }

    fn key(&self, user: &str, seed: u64) -> PathBuf {
        let p = self.path(&format!("{user}.key"));
        ok(&[
            "keygen",
            "--user",
            user,
            "--seed",
            &seed.to_string(),
            "--out",
            s(&p),
        ]);
        p
    }

    fn watermark(&self, name: &str, seed: u64) -> PathBuf {
        let bits = (0..1024u64)
            .map(|i| (i.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed).count_ones() % 2 == 1)
            .collect();
        let p = self.path(name);
        fs::write(
            &p,
            write_pbm(&Bitmap {
                width: 32,
                height: 32,
                bits,
            }),
        )
        .unwrap();
        p
    }
}

fn field(stdout: &str, name: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name))
        .unwrap_or_else(|| panic!("no {name} in {stdout}"))
        .trim()
        .to_string()
}

#[test]
fn keygen_with_seed_is_reproducible() {
    let ws = tempfile::tempdir().unwrap();
    let a = ws.path().join("a.key");
    let b = ws.path().join("b.key");
    ok(&["keygen", "--user", "alice", "--seed", "5", "--out", s(&a)]);
    ok(&["keygen", "--user", "alice", "--seed", "5", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    ok(&["keygen", "--user", "alice", "--seed", "6", "--out", s(&b)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn keygen_into_missing_directory_is_an_io_error() {
    let ws = tempfile::tempdir().unwrap();
    let p = ws.path().join("no/such/dir/a.key");
    assert_eq!(code(&["keygen", "--user", "alice", "--out", s(&p)]), 4);
}

#[test]
fn embed_then_detect_recovers_every_user() {
    let ws = Workspace::new();
    let k1 = ws.key("alice", 1);
    let k2 = ws.key("bob", 2);
    let w1 = ws.watermark("w1.pbm", 1);
    let w2 = ws.watermark("w2.pbm", 2);
    let marked = ws.path("marked.pgm");
    let out = ok(&[
        "embed",
        "--image",
        s(&ws.image()),
        "--key",
        s(&k1),
        "--wm",
        s(&w1),
        "--key",
        s(&k2),
        "--wm",
        s(&w2),
        "--target-psnr",
        "42",
        "--out",
        s(&marked),
    ]);
    let psnr: f64 = field(&out, "PSNR:")
        .trim_end_matches(" dB")
        .parse()
        .unwrap();
    assert!((psnr - 42.0).abs() <= 0.1, "{out}");
    let fg = field(&out, "f_g:");
    for (k, w) in [(&k1, &w1), (&k2, &w2)] {
        let rec = ws.path("rec.pbm");
        let det = ok(&[
            "detect",
            "--image",
            s(&marked),
            "--key",
            s(k),
            "--wm-size",
            "32x32",
            "--fg",
            &fg,
            "--out",
            s(&rec),
            "--reference",
            s(w),
        ]);
        assert_eq!(field(&det, "BER:"), "0.000");
        assert_eq!(fs::read(&rec).unwrap(), fs::read(w).unwrap());
    }
}

#[test]
fn seq_embed_adds_a_user_behind_the_ring() {
    let ws = Workspace::new();
    let k1 = ws.key("alice", 3);
    let k2 = ws.key("bob", 4);
    let w1 = ws.watermark("w1.pbm", 3);
    let w2 = ws.watermark("w2.pbm", 4);
    let first = ws.path("first.pgm");
    let ring = ws.path("ring.txt");
    let out1 = ok(&[
        "embed",
        "--image",
        s(&ws.image()),
        "--key",
        s(&k1),
        "--wm",
        s(&w1),
        "--fg",
        "20",
        "--out",
        s(&first),
        "--ring-out",
        s(&ring),
    ]);
    let second = ws.path("second.pgm");
    let ring2 = ws.path("ring2.txt");
    let out2 = ok(&[
        "seq-embed",
        "--image",
        s(&first),
        "--ring",
        s(&ring),
        "--key",
        s(&k2),
        "--wm",
        s(&w2),
        "--method",
        "plain",
        "--fg",
        "20",
        "--out",
        s(&second),
        "--ring-out",
        s(&ring2),
    ]);
    assert_eq!(
        fs::read_to_string(&ring2)
            .unwrap()
            .lines()
            .filter(|l| l.contains(','))
            .count(),
        2
    );
    let rec = ws.path("rec.pbm");
    let det1 = ok(&[
        "detect",
        "--image",
        s(&second),
        "--key",
        s(&k1),
        "--wm-size",
        "32x32",
        "--fg",
        &field(&out1, "f_g:"),
        "--out",
        s(&rec),
        "--reference",
        s(&w1),
    ]);
    assert_eq!(field(&det1, "BER:"), "0.000");
    let det2 = ok(&[
        "detect",
        "--image",
        s(&second),
        "--key",
        s(&k2),
        "--wm-size",
        "32x32",
        "--fg",
        &field(&out2, "f_g:"),
        "--ring",
        s(&ring2),
        "--out",
        s(&rec),
        "--reference",
        s(&w2),
    ]);
    assert_eq!(field(&det2, "BER:"), "0.000");
}

#[test]
fn detect_rejects_a_mismatched_watermark_size() {
    let ws = Workspace::new();
    let k = ws.key("alice", 1);
    let rec = ws.path("rec.pbm");
    let c = code(&[
        "detect",
        "--image",
        s(&ws.image()),
        "--key",
        s(&k),
        "--wm-size",
        "64x64",
        "--out",
        s(&rec),
    ]);
    assert_eq!(c, 3);
    assert!(!rec.exists());
}

#[test]
fn unknown_method_is_a_usage_error() {
    let ws = Workspace::new();
    let k = ws.key("alice", 1);
    let w = ws.watermark("w.pbm", 1);
    let out = ws.path("o.pgm");
    let c = code(&[
        "embed",
        "--image",
        s(&ws.image()),
        "--key",
        s(&k),
        "--wm",
        s(&w),
        "--method",
        "zzz",
        "--out",
        s(&out),
    ]);
    assert_eq!(c, 2);
}

#[test]
fn malformed_key_file_is_a_format_error() {
    let ws = Workspace::new();
    let k = ws.path("bad.key");
    fs::write(&k, "not a key\n").unwrap();
    let w = ws.watermark("w.pbm", 1);
    let out = ws.path("o.pgm");
    assert_eq!(
        code(&[
            "embed",
            "--image",
            s(&ws.image()),
            "--key",
            s(&k),
            "--wm",
            s(&w),
            "--out",
            s(&out)
        ]),
        3
    );
}

#[test]
fn attacks_are_deterministic() {
    let ws = Workspace::new();
    let img = ws.image();
    let a = ws.path("a.pgm");
    let b = ws.path("b.pgm");
    ok(&[
        "attack",
        "--image",
        s(&img),
        "--type",
        "scale",
        "--param",
        "1.0",
        "--out",
        s(&a),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&img).unwrap());
    for kind in ["gaussian", "saltpepper"] {
        let p = if kind == "gaussian" { "4" } else { "0.05" };
        ok(&[
            "attack",
            "--image",
            s(&img),
            "--type",
            kind,
            "--param",
            p,
            "--seed",
            "9",
            "--out",
            s(&a),
        ]);
        ok(&[
            "attack",
            "--image",
            s(&img),
            "--type",
            kind,
            "--param",
            p,
            "--seed",
            "9",
            "--out",
            s(&b),
        ]);
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{kind}");
        assert_ne!(fs::read(&a).unwrap(), fs::read(&img).unwrap(), "{kind}");
    }
}

#[test]
fn jpeg_quality_out_of_range_is_a_usage_error() {
    let ws = Workspace::new();
    let out = ws.path("a.pgm");
    assert_eq!(
        code(&[
            "attack",
            "--image",
            s(&ws.image()),
            "--type",
            "jpeg",
            "--param",
            "0",
            "--out",
            s(&out)
        ]),
        2
    );
}

#[test]
fn bench_writes_one_row_per_cell() {
    let ws = tempfile::tempdir().unwrap();
    let cfg = ws.path().join("bench.toml");
    fs::write(
        &cfg,
        "synthetic_images = 1\nusers = [2]\nmethods = [\"plain\", \"poptim\"]\nf_g = 12.0\nseed = 3\n\
         output = \"out.csv\"\n\n[[attacks]]\nkind = \"jpeg\"\nparams = [70]\n",
    )
    .unwrap();
    ok(&["bench", s(&cfg)]);
    let mut rdr = csv::Reader::from_path(ws.path().join("out.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "image");
    assert_eq!(&headers[headers.len() - 1], "ber_mean");
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    let cells = rows.iter().filter(|r| &r[0] != "ALL").count();
    assert_eq!(cells, 2 * 2);
}

#[test]
fn bench_with_empty_corpus_fails() {
    let ws = tempfile::tempdir().unwrap();
    fs::create_dir(ws.path().join("imgs")).unwrap();
    let cfg = ws.path().join("bench.toml");
    fs::write(
        &cfg,
        "corpus_dir = \"imgs\"\nusers = [1]\nmethods = [\"plain\"]\n",
    )
    .unwrap();
    assert_eq!(code(&["bench", s(&cfg)]), 2);
}

#[test]
fn bench_reports_unknown_keys() {
    let ws = tempfile::tempdir().unwrap();
    let cfg = ws.path().join("bench.toml");
    fs::write(&cfg, "users = [1]\nmethods = [\"plain\"]\nbogus = 1\n").unwrap();
    let out = stdmmw(&["bench", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
