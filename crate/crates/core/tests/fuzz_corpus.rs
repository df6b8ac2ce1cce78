//! Replays the checked-in fuzz seeds on stable so a format change that
//! invalidates them fails here rather than silently shrinking the corpus.

use std::path::PathBuf;

use omnisal::config::RunConfig;
use omnisal::image_io::decode_image;
use omnisal::params::Manifest;
use omnisal::projection::SamplingGrid;
use omnisal::tensor::{decode_omt, encode_omt};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn omt_seeds_decode_canonically() {
    for (name, bytes) in seeds("decode_omt") {
        let t = decode_omt(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(encode_omt(&t), bytes, "{name}");
    }
}

#[test]
fn grid_seeds_decode() {
    for (name, bytes) in seeds("decode_grid") {
        let g = SamplingGrid::decode(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(g.encode(), bytes, "{name}");
    }
}

#[test]
fn config_seeds_parse() {
    for (name, bytes) in seeds("parse_config") {
        let cfg = RunConfig::from_json(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn manifest_seeds_parse() {
    for (name, bytes) in seeds("parse_manifest") {
        let m = Manifest::from_json(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!m.entries.is_empty(), "{name}");
    }
}

#[test]
fn image_seeds_decode() {
    for (name, bytes) in seeds("decode_image") {
        let t = decode_image(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(t.channels() == 1 || t.channels() == 3, "{name}");
    }
}
