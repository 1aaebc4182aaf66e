//! Aggregation of curve files across seeds.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Variant;
use crate::curve::{read_curve, CurveRow};
use crate::error::{HarnessError, Result};
use crate::runner::{DEEP_WINDOW, TABULAR_WINDOW};

/// Mean and sample standard deviation (`0` for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std, n }
    }
}

/// Trailing moving average; the first `window − 1` entries average what is available.
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub files: Vec<PathBuf>,
    pub window: usize,
    pub final_cumulative_reward: MeanStd,
    /// Per-file mean of `wall_time_ns`; `None` unless every row of every file has it.
    pub step_time_ns: Option<MeanStd>,
    /// Step-wise mean and std across seeds of the smoothed reward, truncated to the shortest file.
    pub smoothed_mean: Vec<f64>,
    pub smoothed_std: Vec<f64>,
}

/// Variant name from a `{variant}_seed{seed}.csv` file name, else the file stem.
pub fn variant_of(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    match stem.rfind("_seed") {
        Some(i) => stem[..i].to_string(),
        None => stem.to_string(),
    }
}

/// Window for a variant: 100 for deep variants, 1000 otherwise.
pub fn default_window(variant: &str) -> usize {
    match variant.parse::<Variant>() {
        Ok(v) if v.is_deep() => DEEP_WINDOW,
        _ => TABULAR_WINDOW,
    }
}

pub fn summarize_curves(
    curves: &[(PathBuf, Vec<CurveRow>)],
    window: Option<usize>,
) -> Result<Vec<VariantSummary>> {
    if curves.is_empty() {
        return Err(HarnessError::Config(
            "summarize needs at least one curve file".into(),
        ));
    }
    let mut groups: BTreeMap<String, Vec<&(PathBuf, Vec<CurveRow>)>> = BTreeMap::new();
    for c in curves {
        groups.entry(variant_of(&c.0)).or_default().push(c);
    }
    let mut out = Vec::new();
    for (variant, files) in groups {
        if let Some((p, _)) = files.iter().find(|(_, rows)| rows.is_empty()) {
            return Err(HarnessError::MalformedCurve {
                path: p.clone(),
                reason: "no rows".into(),
            });
        }
        let w = window.unwrap_or_else(|| default_window(&variant));
        let finals: Vec<f64> = files
            .iter()
            .map(|(_, r)| r[r.len() - 1].cumulative_reward)
            .collect();
        let times: Option<Vec<f64>> = files
            .iter()
            .map(|(_, rows)| {
                let ns: Option<Vec<u64>> = rows.iter().map(|r| r.wall_time_ns).collect();
                ns.map(|ns| ns.iter().sum::<u64>() as f64 / ns.len() as f64)
            })
            .collect();
        let smoothed: Vec<Vec<f64>> = files
            .iter()
            .map(|(_, rows)| smooth(&rows.iter().map(|r| r.reward).collect::<Vec<_>>(), w))
            .collect();
        let len = smoothed.iter().map(Vec::len).min().unwrap_or(0);
        let (mut smoothed_mean, mut smoothed_std) =
            (Vec::with_capacity(len), Vec::with_capacity(len));
        for t in 0..len {
            let col: Vec<f64> = smoothed.iter().map(|s| s[t]).collect();
            let ms = MeanStd::of(&col);
            smoothed_mean.push(ms.mean);
            smoothed_std.push(ms.std);
        }
        out.push(VariantSummary {
            variant,
            files: files.iter().map(|(p, _)| p.clone()).collect(),
            window: w,
            final_cumulative_reward: MeanStd::of(&finals),
            step_time_ns: times.map(|t| MeanStd::of(&t)),
            smoothed_mean,
            smoothed_std,
        });
    }
    Ok(out)
}

/// Reads `paths`, writes `summary.csv` and one `{variant}_smoothed.csv` per variant into `out`.
pub fn summarize(
    paths: &[PathBuf],
    window: Option<usize>,
    out: &Path,
) -> Result<Vec<VariantSummary>> {
    let curves = paths
        .iter()
        .map(|p| Ok((p.clone(), read_curve(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let summaries = summarize_curves(&curves, window)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;

    let table = out.join("summary.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&table)?;
    w.write_record([
        "variant",
        "seeds",
        "final_cumulative_reward_mean",
        "final_cumulative_reward_std",
        "step_time_ns_mean",
        "step_time_ns_std",
    ])?;
    for s in &summaries {
        let (tm, ts) = s.step_time_ns.map_or((String::new(), String::new()), |t| {
            (t.mean.to_string(), t.std.to_string())
        });
        w.write_record([
            s.variant.clone(),
            s.files.len().to_string(),
            s.final_cumulative_reward.mean.to_string(),
            s.final_cumulative_reward.std.to_string(),
            tm,
            ts,
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&table, e))?;

    for s in &summaries {
        let path = out.join(format!("{}_smoothed.csv", s.variant));
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut f = BufWriter::new(file);
        let io = |e| HarnessError::io(&path, e);
        writeln!(f, "step,smoothed_reward_mean,smoothed_reward_std").map_err(io)?;
        for (t, (m, sd)) in s.smoothed_mean.iter().zip(&s.smoothed_std).enumerate() {
            writeln!(f, "{t},{m},{sd}").map_err(io)?;
        }
        f.flush().map_err(io)?;
    }
    Ok(summaries)
}
