//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_omnisal");
const QUICK_BUDGET: Duration = Duration::from_secs(60);
const FULL_BUDGET: Duration = Duration::from_secs(600);

/// Acceptance criteria and the selftest checks each one is made of.
const CRITERIA: [(&str, &[&str]); 11] = [
    ("geometry round trip (PSNR >= 30 dB, pinned floor, < 2 s)", &["geometry_round_trip"]),
    ("direction mapping oracle (1e-4 rad, ownership at 128 rows)", &["direction_mapping"]),
    ("seam continuity (all centers, all joints)", &["seam_continuity"]),
    ("GEF convexity (1000 trials, 1e-6)", &["gef_convexity"]),
    ("WAF normalization (1000 trials, symmetric case)", &["waf_normalization"]),
    ("order equivariance (24 permutations, 1e-6)", &["order_equivariance"]),
    ("FR compositional oracle (100 trials, 1e-6)", &["fr_oracle"]),
    ("loss gradient vs finite differences (50 fixtures, 1e-4)", &["loss_gradient"]),
    ("metric oracle equivalence (1000 pairs, 1e-9)", &["metric_oracle"]),
    ("pipeline determinism and shape law", &["pipeline_determinism"]),
    ("ablation non-degeneracy (> 1e-6)", &["ablation_non_degeneracy"]),
];

fn run(args: &[&str]) -> (Output, Duration) {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .output()
        .expect("the omnisal binary runs");
    (out, start.elapsed())
}

/// Parses selftest lines `PASS name secs detail`.
fn parse(stdout: &[u8]) -> BTreeMap<String, (bool, String)> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter_map(|l| {
            let (status, rest) = l.split_once(' ')?;
            let passed = match status {
                "PASS" => true,
                "FAIL" => false,
                _ => return None,
            };
            let rest = rest.trim_start();
            let (name, detail) = rest.split_once(' ').unwrap_or((rest, ""));
            Some((name.to_owned(), (passed, detail.trim().to_owned())))
        })
        .collect()
}

fn forward_bytes(dir: &Path, input: &str, threads: &str) -> Result<Vec<Vec<u8>>, String> {
    let sub = dir.join(format!("t{threads}"));
    let out = sub.join("map.png");
    let (o, _) = run(&["--threads", threads, "forward", input, out.to_str().unwrap()]);
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    ["map.png", "map_side4.png", "map_side3.png", "map_side2.png"]
        .iter()
        .map(|f| std::fs::read(sub.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn cli_thread_independence() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("fixture.png");
    let input = input.to_str().unwrap();
    let (o, _) = run(&["fixture", "generate", "forward", input]);
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let one = forward_bytes(dir.path(), input, "1")?;
    let four = forward_bytes(dir.path(), input, "4")?;
    if one == four {
        Ok("forward outputs byte-identical for --threads 1 and 4".into())
    } else {
        Err("forward outputs differ between --threads 1 and 4".into())
    }
}

fn main() {
    let mut failures = 0;
    let mut line = |passed: bool, name: &str, detail: &str| {
        if !passed {
            failures += 1;
        }
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    };

    let (full, full_time) = run(&["selftest", "--full"]);
    let results = parse(&full.stdout);
    for (criterion, checks) in CRITERIA {
        let mut ok = true;
        let mut details = Vec::new();
        for check in checks {
            match results.get(*check) {
                Some((p, d)) => {
                    ok &= *p;
                    details.push(d.clone());
                }
                None => {
                    ok = false;
                    details.push(format!("`{check}` did not report"));
                }
            }
        }
        if criterion.starts_with("pipeline determinism") {
            match cli_thread_independence() {
                Ok(d) => details.push(d),
                Err(d) => {
                    ok = false;
                    details.push(d);
                }
            }
        }
        line(ok, criterion, &details.join("; "));
    }

    let (quick, quick_time) = run(&["selftest", "--quick"]);
    let budget_ok = quick.status.success()
        && quick_time < QUICK_BUDGET
        && full.status.success()
        && full_time < FULL_BUDGET;
    line(
        budget_ok,
        "runtime budget (quick < 60 s, full < 10 min)",
        &format!(
            "quick {:.2}s (exit {:?}), full {:.2}s (exit {:?})",
            quick_time.as_secs_f64(),
            quick.status.code(),
            full_time.as_secs_f64(),
            full.status.code()
        ),
    );

    if let Some((p, d)) = results.get("yaw_consistency") {
        line(*p, "yaw consistency regression (pinned)", d);
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
