//! Reporting helpers for the acceptance runs in `tests/acceptance.rs`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Result of one acceptance criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// What was measured, against what bound.
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {}: {} [{:.1}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Write one line straight to stderr, bypassing any output capture.
pub fn emit(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

/// `TFDM_DATA_DIR` if set, else `data/` at the workspace root.
pub fn data_root() -> PathBuf {
    std::env::var_os("TFDM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Criterion ids selected by command-line arguments; all of `1..=n`
/// when no numeric argument is given. Flags are ignored so that the
/// usual test-runner arguments pass through harmlessly.
pub fn selected<I: IntoIterator<Item = String>>(args: I, n: u8) -> Vec<u8> {
    let mut ids: Vec<u8> = args
        .into_iter()
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .filter(|i| (1..=n).contains(i))
        .collect();
    if ids.is_empty() {
        ids = (1..=n).collect();
    }
    ids.sort_unstable();
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(a: &[&str]) -> Vec<String> {
        a.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn selection() {
        assert_eq!(selected(args(&[]), 3), vec![1, 2, 3]);
        assert_eq!(selected(args(&["--nocapture", "3", "1", "3"]), 10), vec![1, 3]);
        assert_eq!(selected(args(&["0", "11", "x"]), 10), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn outcome_line() {
        let o = Outcome {
            id: 4,
            name: "weight fixation",
            passed: false,
            detail: "leak=1e-3 (< 1e-5)".into(),
            elapsed: Duration::from_millis(1500),
        };
        assert_eq!(o.to_string(), "FAIL criterion  4 weight fixation: leak=1e-3 (< 1e-5) [1.5s]");
    }
}
