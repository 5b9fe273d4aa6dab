use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    EncodeText,
    EncodeImage,
    Mask,
    Stylize,
    Composite,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Parse,
        Stage::EncodeText,
        Stage::EncodeImage,
        Stage::Mask,
        Stage::Stylize,
        Stage::Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::EncodeText => "encode_text",
            Stage::EncodeImage => "encode_image",
            Stage::Mask => "mask",
            Stage::Stylize => "stylize",
            Stage::Composite => "composite",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Wall-clock time of one stage in one run and how many backend (or
/// compositor) invocations it made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub duration_ms: f64,
    pub invocations: u64,
}

pub(crate) struct StageClock {
    started: Instant,
}

impl StageClock {
    pub(crate) fn start() -> Self {
        StageClock {
            started: Instant::now(),
        }
    }

    pub(crate) fn stop(self, stage: Stage, invocations: u64) -> StageTiming {
        StageTiming {
            stage,
            duration_ms: self.started.elapsed().as_secs_f64() * 1e3,
            invocations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub stage: Stage,
    pub median_ms: f64,
    pub mean_ms: f64,
    /// First iteration (cache cold).
    pub cold_ms: f64,
    pub cold_invocations: u64,
    /// Remaining iterations (cache warm); `None` with a single iteration.
    pub warm_median_ms: Option<f64>,
    pub warm_mean_ms: Option<f64>,
    pub warm_invocations: u64,
    pub total_invocations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub cache_enabled: bool,
    pub rows: Vec<BenchRow>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl BenchReport {
    /// `runs[i]` holds the timings of iteration i; the first is treated as cold.
    pub fn from_runs(runs: &[Vec<StageTiming>], cache_enabled: bool) -> Self {
        let rows = Stage::ALL
            .iter()
            .map(|&stage| {
                let per_run: Vec<(f64, u64)> = runs
                    .iter()
                    .map(|r| {
                        r.iter()
                            .filter(|t| t.stage == stage)
                            .fold((0.0, 0), |(d, c), t| (d + t.duration_ms, c + t.invocations))
                    })
                    .collect();
                let all: Vec<f64> = per_run.iter().map(|p| p.0).collect();
                let warm: Vec<f64> = all.iter().skip(1).copied().collect();
                BenchRow {
                    stage,
                    median_ms: median(&all),
                    mean_ms: mean(&all),
                    cold_ms: all[0],
                    cold_invocations: per_run[0].1,
                    warm_median_ms: (!warm.is_empty()).then(|| median(&warm)),
                    warm_mean_ms: (!warm.is_empty()).then(|| mean(&warm)),
                    warm_invocations: per_run.iter().skip(1).map(|p| p.1).sum(),
                    total_invocations: per_run.iter().map(|p| p.1).sum(),
                }
            })
            .collect();
        BenchReport {
            iterations: runs.len(),
            cache_enabled,
            rows,
        }
    }

    pub fn row(&self, stage: Stage) -> &BenchRow {
        self.rows
            .iter()
            .find(|r| r.stage == stage)
            .expect("every stage has a row")
    }

    pub fn render_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut out = format!(
            "{:<13} {:>10} {:>10} {:>10} {:>12} {:>12} {:>7} {:>7}\n",
            "stage",
            "median ms",
            "mean ms",
            "cold ms",
            "warm med ms",
            "warm mean ms",
            "calls",
            "warm"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<13} {:>10.3} {:>10.3} {:>10.3} {:>12} {:>12} {:>7} {:>7}\n",
                r.stage.as_str(),
                r.median_ms,
                r.mean_ms,
                r.cold_ms,
                opt(r.warm_median_ms),
                opt(r.warm_mean_ms),
                r.total_invocations,
                r.warm_invocations
            ));
        }
        out
    }
}
