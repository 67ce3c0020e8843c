//! Acceptance gate. Prints one line per criterion, then the individual
//! checks, and exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sigmalambda::validation::{validate, CheckResult, Status, ValidateOptions};

const CRITERIA: [(u8, &str); 10] = [
    (1, "quantum endpoint: free Gaussian width"),
    (2, "classical endpoint: frozen density"),
    (3, "interpolation equals linear dynamics at the effective hbar"),
    (4, "norm and energy conservation"),
    (5, "Madelung residual convergence"),
    (6, "KvN recurrence, refinement and phase superselection"),
    (7, "sheet projection marginal and mixture additivity"),
    (8, "coherent no-crossing vs mixture crossing; caustic time"),
    (9, "phase-space functional endpoints"),
    (10, "byte-identical reruns"),
];

fn csv_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            csv_files(root, &path, out);
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
}

/// Compares every CSV written by two validation runs; returns the file count
/// or the first differing file.
fn compare_runs(a: &Path, b: &Path) -> Result<usize, String> {
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    csv_files(a, a, &mut fa);
    csv_files(b, b, &mut fb);
    if fa != fb {
        return Err("the two runs wrote different file sets".into());
    }
    for f in &fa {
        if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
            return Err(format!("{} differs", f.display()));
        }
    }
    Ok(fa.len())
}

fn main() -> ExitCode {
    let start = std::time::Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut runs = Vec::new();
    for d in &dirs {
        match validate(&ValidateOptions { fast: false, out: Some(d.path().to_path_buf()) }) {
            Ok(r) => runs.push(r),
            Err(e) => {
                println!("acceptance aborted: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    let rerun = compare_runs(dirs[0].path(), dirs[1].path());
    let results = &runs[0];
    let mut by_criterion: BTreeMap<u8, Vec<&CheckResult>> = BTreeMap::new();
    for r in results {
        by_criterion.entry(r.criterion).or_default().push(r);
    }

    println!();
    let mut failed = 0;
    for (id, title) in CRITERIA {
        let checks = by_criterion.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let mut ok = !checks.is_empty() && checks.iter().all(|c| c.status == Status::Pass);
        if id == 10 {
            ok &= rerun.is_ok();
        }
        if !ok {
            failed += 1;
        }
        let n = checks.len();
        println!(
            "{} criterion {id:>2}: {title} ({n} check{})",
            if ok { "PASS" } else { "FAIL" },
            if n == 1 { "" } else { "s" }
        );
    }
    println!();
    for r in results {
        println!("    {}", r.line());
    }
    match &rerun {
        Ok(n) => println!("    [PASS] 10 two validate runs wrote byte-identical CSV files ({n} files)"),
        Err(e) => println!("    [FAIL] 10 two validate runs wrote byte-identical CSV files ({e})"),
    }
    println!(
        "\nacceptance: {} of {} criteria passed in {:.1?}\n",
        CRITERIA.len() - failed,
        CRITERIA.len(),
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
