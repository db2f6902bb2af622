//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! MNIST is read from `FEATDIV_DATA_DIR` or `<workspace>/data/mnist`.
//! Run outputs are kept under the cargo target tmp dir for inspection.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use featdiv::bounds::{
    bound_thm1, bound_thm2_hinge, bound_thm3_logistic, bound_thm4_multivariate, bound_thm5_crossentropy, compute_j,
    rademacher_bound_f, ConstantsReport,
};
use featdiv::data::MNIST_FILES;
use featdiv::numkit::ActivationSpec;
use featdiv::oracle::{run_suite, SuiteConfig, VerificationReport};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn pass(detail: impl Into<String>) -> Self {
        Self { passed: true, detail: detail.into() }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self { passed: false, detail: detail.into() }
    }
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("FEATDIV_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist_present(dir: &Path) -> Result<(), String> {
    for (name, _) in MNIST_FILES {
        if !dir.join(name).is_file() {
            return Err(format!(
                "MNIST missing: {} (run `featdiv fetch-mnist` or set FEATDIV_DATA_DIR)",
                dir.join(name).display()
            ));
        }
    }
    Ok(())
}

fn out_root() -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn featdiv(args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_featdiv"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot start featdiv: {e}"))?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!(
            "featdiv {} exited with {:?}: {}{}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn experiment(kind: &str, data: &Path, out: &Path, extra: &[&str]) -> Result<(), String> {
    let mut args = vec![
        "experiment",
        kind,
        "--preset",
        "reduced",
        "--data-dir",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    featdiv(&args).map(|_| ())
}

/// Rows of a CSV file as maps from column name to field.
fn read_csv(path: &Path) -> Result<Vec<std::collections::HashMap<String, String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    Ok(lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect())
}

fn num(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn gap_correlation(data: &Path, root: &Path) -> Outcome {
    let out = root.join("gap");
    if let Err(e) = experiment("gap-correlation", data, &out, &[]) {
        return Outcome::fail(e);
    }
    let rows = match read_csv(&out.join("gap_correlations.csv")) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for w in ["128", "256", "512"] {
        let r = rows
            .iter()
            .find(|r| r["width"] == w && r["scope"] == "mean")
            .and_then(|r| num(&r["pearson"]));
        match r {
            Some(v) => {
                ok &= v >= 0.85;
                parts.push(format!("width {w} r={v:.4}"));
            }
            None => {
                ok = false;
                parts.push(format!("width {w} r=n/a"));
            }
        }
    }
    let detail = format!("{} (reduced preset, need >= 0.85)", parts.join(", "));
    if ok { Outcome::pass(detail) } else { Outcome::fail(detail) }
}

fn epoch_tracking(data: &Path, root: &Path) -> Outcome {
    let out = root.join("epoch");
    if let Err(e) = experiment("epoch-tracking", data, &out, &[]) {
        return Outcome::fail(e);
    }
    let rows = match read_csv(&out.join("epoch_spearman.csv")) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    let get = |scope: &str| rows.iter().find(|r| r["scope"] == scope).and_then(|r| num(&r["spearman"]));
    let per_seed: Vec<String> = rows
        .iter()
        .filter(|r| r["scope"].starts_with("seed:"))
        .map(|r| r["spearman"].clone())
        .collect();
    match (get("mean_curve"), get("mean_of_seeds")) {
        (Some(curve), Some(seeds)) => {
            let detail = format!(
                "Spearman of the seed-averaged curve {curve:.4}, mean per-seed {seeds:.4} [{}] (need > 0.8)",
                per_seed.join(", ")
            );
            if curve > 0.8 { Outcome::pass(detail) } else { Outcome::fail(detail) }
        }
        _ => Outcome::fail("Spearman undefined"),
    }
}

fn depth_sweep(data: &Path, root: &Path) -> Outcome {
    let out = root.join("depth");
    if let Err(e) = experiment("depth-sweep", data, &out, &[]) {
        return Outcome::fail(e);
    }
    let rows = match read_csv(&out.join("depth_summary.csv")) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    let mean = |w: &str, d: &str| {
        rows.iter()
            .find(|r| r["width"] == w && r["depth"] == d)
            .and_then(|r| num(&r["mean_diversity"]))
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for w in ["256", "512"] {
        match (mean(w, "1"), mean(w, "12")) {
            (Some(d1), Some(d12)) => {
                ok &= d12 > d1;
                parts.push(format!("width {w}: depth1 {d1:.5} vs depth12 {d12:.5}"));
            }
            _ => {
                ok = false;
                parts.push(format!("width {w}: missing rows"));
            }
        }
    }
    let detail = format!("{} (reduced preset, need depth 12 > depth 1)", parts.join("; "));
    if ok { Outcome::pass(detail) } else { Outcome::fail(detail) }
}

fn find<'a>(reports: &'a [VerificationReport], name: &str) -> Option<&'a VerificationReport> {
    reports.iter().find(|r| r.check_name == name)
}

fn summarize(reports: &[VerificationReport], names: &[&str], need_trials: &[(&str, usize)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        match find(reports, name) {
            Some(r) => {
                ok &= r.passed && r.violations == 0;
                parts.push(format!("{name}: {} trials, {} violations, worst {:.3e}", r.trials, r.violations, r.worst_margin));
            }
            None => {
                ok = false;
                parts.push(format!("{name}: not run"));
            }
        }
    }
    for (name, min) in need_trials {
        if find(reports, name).map_or(true, |r| r.trials < *min) {
            ok = false;
            parts.push(format!("{name}: fewer than {min} trials"));
        }
    }
    let detail = parts.join("; ");
    if ok { Outcome::pass(detail) } else { Outcome::fail(detail) }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs()
}

fn bound_fixtures(reports: &[VerificationReport]) -> Outcome {
    // relu, C1 = 2, C2 = 0.5, C3 = 1, C4 = 1, M = 3, N = 100: C5 = 2, C134 = 2,
    // J(d=1) = 3*4 + 6*3 = 30, A = 4 * (2*2) * 3 = 48, K = sqrt(30) + 0.5
    let c = ConstantsReport::single_layer(2.0, 0.5, 1.0, 1.0, ActivationSpec::relu(), 3, 100, 1);
    let rate = (2.0 * 40f64.ln() / 100.0).sqrt();
    let s = 30f64.sqrt();
    let k = s + 0.5;
    let mut failures = Vec::new();
    let mut check = |name: &str, got: Result<f64, featdiv::Error>, want: f64| match got {
        Ok(v) if close(v, want) => {}
        Ok(v) => failures.push(format!("{name}: {v} != {want}")),
        Err(e) => failures.push(format!("{name}: {e}")),
    };
    check("J(d=1)", compute_j(&c, 1.0), 30.0);
    check("J(d=0)", compute_j(&c, 0.0), 36.0);
    check("rademacher", rademacher_bound_f(&c, 100), 1.2);
    check("thm1", bound_thm1(&c, 1.0, 100, 0.05).map(|r| r.total), k * 4.8 + 0.5 * k * k * rate);
    check("thm2", bound_thm2_hinge(&c, 1.0, 100, 0.05).map(|r| r.total), 4.8 + (1.0 + s) * rate);
    check(
        "thm3",
        bound_thm3_logistic(&c, 1.0, 100, 0.05).map(|r| r.total),
        4.8 / (1.0 + (-s).exp()) + (1.0 + s.exp()).ln() * rate,
    );
    check("thm4(D=2)", bound_thm4_multivariate(&c, 1.0, 100, 0.05, 2).map(|r| r.total), k * 9.6 + k * k * rate);
    check(
        "thm5(D=3)",
        bound_thm5_crossentropy(&c, 1.0, 100, 0.05, 3).map(|r| r.total),
        28.8 / (2.0 + (-2.0 * s).exp()) + (1.0 + 2.0 * (2.0 * s).exp()).ln() * rate,
    );
    for d in [0.0, 1.0, 3.5] {
        let a = bound_thm4_multivariate(&c, d, 100, 0.05, 1).unwrap();
        let b = bound_thm1(&c, d, 100, 0.05).unwrap();
        if a.total.to_bits() != b.total.to_bits() {
            failures.push(format!("thm4(D=1) != thm1 at d={d}"));
        }
    }
    let mono: Vec<&VerificationReport> = reports.iter().filter(|r| r.check_name.starts_with("monotonicity/")).collect();
    for r in &mono {
        if !r.passed {
            failures.push(format!("{} failed", r.check_name));
        }
    }
    if mono.len() != 7 {
        failures.push(format!("{} monotonicity checks, expected 7", mono.len()));
    }
    if !find(reports, "bound_fixtures").is_some_and(|r| r.passed) {
        failures.push("suite bound_fixtures failed".into());
    }
    if failures.is_empty() {
        Outcome::pass("J, Rademacher, thm1..thm5 fixtures within 1e-12; thm4(D=1) bit-identical to thm1; 7 monotonicity grids pass")
    } else {
        Outcome::fail(failures.join("; "))
    }
}

/// Reruns the full epoch-tracking run and small runs of the other kinds from their manifests.
fn determinism(data: &Path, root: &Path) -> Outcome {
    let d = data.to_str().unwrap();
    let small = root.join("small");
    let mut manifests = vec![root.join("epoch/manifest.json")];
    let runs: [(&str, Vec<&str>); 3] = [
        ("gap-correlation", vec!["--widths", "32", "--train-sizes", "300,600", "--seeds", "0,1", "--epochs", "2"]),
        ("depth-sweep", vec!["--widths", "32", "--depths", "1,3", "--seeds", "0,1", "--epochs", "2"]),
        ("epoch-tracking", vec!["--widths", "32", "--seeds", "0,1", "--epochs", "3"]),
    ];
    for (kind, extra) in runs {
        let out = small.join(kind);
        if let Err(e) = experiment(kind, data, &out, &extra) {
            return Outcome::fail(e);
        }
        manifests.push(out.join("manifest.json"));
    }
    let train_out = small.join("train");
    if let Err(e) = featdiv(&[
        "train", "--data-dir", d, "--out", train_out.to_str().unwrap(), "--widths", "32", "--epochs", "2", "--quiet",
    ]) {
        return Outcome::fail(e);
    }
    manifests.push(train_out.join("manifest.json"));

    let mut parts = Vec::new();
    for (i, m) in manifests.iter().enumerate() {
        let again = root.join(format!("rerun{i}"));
        match featdiv(&["rerun", "--manifest", m.to_str().unwrap(), "--out", again.to_str().unwrap(), "--quiet"]) {
            Ok(stdout) => {
                let files = stdout.lines().filter(|l| l.starts_with("identical")).count();
                parts.push(format!("{}: {files} CSVs identical", m.parent().unwrap().file_name().unwrap().to_string_lossy()));
            }
            Err(e) => return Outcome::fail(e),
        }
    }
    Outcome::pass(parts.join("; "))
}

fn main() {
    let start = Instant::now();
    let data = mnist_dir();
    let root = out_root();
    println!("acceptance: MNIST from {}, outputs in {}", data.display(), root.display());
    let mnist = mnist_present(&data);

    let suite = run_suite(&SuiteConfig::default());
    let mut results: Vec<(u8, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {id} {:<22} {}  ({secs:.0}s) {}",
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    let needs_mnist = |f: &mut dyn FnMut() -> Outcome| match &mnist {
        Ok(()) => f(),
        Err(e) => Outcome::fail(e.clone()),
    };
    let suite_or = |f: &dyn Fn(&[VerificationReport]) -> Outcome| match &suite {
        Ok(r) => f(r),
        Err(e) => Outcome::fail(format!("verification suite errored: {e}")),
    };

    timed(4, "lemma soundness", &mut || {
        suite_or(&|r| {
            summarize(
                r,
                &["sup_f", "sup_loss", "mc_rademacher_below_bound"],
                &[("sup_f", 20 * 10_000), ("sup_loss", 20 * 10_000), ("mc_rademacher_below_bound", 10)],
            )
        })
    });
    timed(5, "oracle equivalences", &mut || {
        suite_or(&|r| {
            summarize(
                r,
                &["diversity_fast_vs_naive", "gradients_vs_finite_differences", "full_batch_epoch_vs_step"],
                &[("diversity_fast_vs_naive", 100)],
            )
        })
    });
    timed(6, "bound fixtures", &mut || suite_or(&|r| bound_fixtures(r)));
    timed(1, "gap correlation", &mut || needs_mnist(&mut || gap_correlation(&data, &root)));
    timed(2, "epoch tracking", &mut || needs_mnist(&mut || epoch_tracking(&data, &root)));
    timed(3, "depth sweep", &mut || needs_mnist(&mut || depth_sweep(&data, &root)));
    timed(7, "determinism", &mut || needs_mnist(&mut || determinism(&data, &root)));

    results.sort_by_key(|r| r.0);
    println!("\nacceptance summary ({:.0}s total)", start.elapsed().as_secs_f64());
    for (id, name, o, _) in &results {
        println!("  {id}. {name:<22} {}", if o.passed { "PASS" } else { "FAIL" });
    }
    if results.iter().any(|r| !r.2.passed) {
        std::process::exit(1);
    }
}
