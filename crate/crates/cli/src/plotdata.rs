//! Shapes result files into the CSV layouts behind the three figure styles:
//! complexity vs α (fig2), complexity vs encoder/decoder depth (fig3), and
//! complexity per target speed (fig4-style).

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;
use taskred_core::complexity::ComplexityResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4Style,
}

impl std::str::FromStr for Figure {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4-style" => Ok(Figure::Fig4Style),
            other => bail!("unknown figure '{other}' (expected fig2, fig3, fig4-style)"),
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn complexity_lines(path: &Path) -> Result<Vec<ComplexityResult>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading results {}", path.display()))?;
    let mut out = Vec::new();
    for l in text.lines() {
        if let Ok(r) = serde_json::from_str::<ComplexityResult>(l) {
            out.push(r);
        }
    }
    Ok(out)
}

/// α on the x-axis: one row per (direction label, α) with mean and stddev of
/// the estimated complexity over seeds. Cells with no successful records are
/// emitted empty and reported in the warning list.
pub fn emit_fig2(files: &[(String, &Path)]) -> Result<(String, Vec<String>)> {
    let mut csv = String::from("alpha,mean_C,std_C,direction\n");
    let mut warnings = Vec::new();
    for (label, path) in files {
        let records = complexity_lines(path)?;
        if records.is_empty() {
            warnings.push(format!("{label}: no complexity records in {}", path.display()));
            continue;
        }
        let mut alphas: Vec<f64> = records.iter().filter_map(|r| r.alpha).collect();
        alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite alphas"));
        alphas.dedup();
        for alpha in alphas {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.alpha == Some(alpha))
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                warnings.push(format!("{label}: alpha {alpha} has no records"));
                csv.push_str(&format!("{alpha},,,{label}\n"));
                continue;
            }
            let (mean, std) = mean_std(&values);
            csv.push_str(&format!("{alpha},{mean},{std},{label}\n"));
        }
    }
    Ok((csv, warnings))
}

/// Encoder/decoder depth on the x-axis, from model-study cell records.
pub fn emit_fig3(files: &[(String, &Path)]) -> Result<(String, Vec<String>)> {
    let mut csv = String::from("space,depth,mean_C,std_C,label\n");
    let mut warnings = Vec::new();
    for (label, path) in files {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading results {}", path.display()))?;
        let mut any = false;
        for l in text.lines() {
            let v: Value = match serde_json::from_str(l) {
                Ok(v) => v,
                Err(_) => continue,
            };
            if v.get("kind").and_then(Value::as_str) != Some("study-cell") {
                continue;
            }
            any = true;
            let space = v.get("space").and_then(Value::as_str).unwrap_or("?");
            let arch = v.get("arch").and_then(Value::as_str).unwrap_or("?");
            let mean = v.get("mean").and_then(Value::as_f64).unwrap_or(f64::NAN);
            let std = v.get("std").and_then(Value::as_f64).unwrap_or(f64::NAN);
            csv.push_str(&format!("{space},{arch},{mean},{std},{label}\n"));
        }
        if !any {
            warnings.push(format!("{label}: no study-cell records in {}", path.display()));
        }
    }
    Ok((csv, warnings))
}

/// Target speed on the x-axis: each file is one speed pair's records,
/// labeled with its v.
pub fn emit_fig4_style(files: &[(String, &Path)]) -> Result<(String, Vec<String>)> {
    let mut csv = String::from("v,mean_C,std_C\n");
    let mut warnings = Vec::new();
    for (label, path) in files {
        let records = complexity_lines(path)?;
        let values: Vec<f64> = records.iter().map(|r| r.value).collect();
        if values.is_empty() {
            warnings.push(format!("{label}: no complexity records in {}", path.display()));
            csv.push_str(&format!("{label},,\n"));
            continue;
        }
        let (mean, std) = mean_std(&values);
        csv.push_str(&format!("{label},{mean},{std}\n"));
    }
    Ok((csv, warnings))
}

pub fn emit(figure: Figure, files: &[(String, &Path)]) -> Result<(String, Vec<String>)> {
    match figure {
        Figure::Fig2 => emit_fig2(files),
        Figure::Fig3 => emit_fig3(files),
        Figure::Fig4Style => emit_fig4_style(files),
    }
}
