use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{a_success, EvalError};
use crate::worldgen::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ASuccessReport {
    pub task: Task,
    pub n: usize,
    pub s: Vec<f64>,
    pub score: f64,
    pub suite_seed: u64,
    pub agent: String,
    pub finetune_steps: u64,
}

impl ASuccessReport {
    pub fn validate(&self) -> Result<(), EvalError> {
        let score = a_success(&self.s, self.n)?;
        if (score - self.score).abs() > 1e-9 {
            return Err(EvalError::Format(format!("score {} disagrees with s (expected {score})", self.score)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String, EvalError> {
        toml::to_string(self).map_err(|e| EvalError::Format(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self, EvalError> {
        let r: Self = toml::from_str(text).map_err(|e| EvalError::Format(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnCurve {
    pub task: Task,
    pub agent: String,
    /// Mean return at budgets `1..=N`.
    pub values: Vec<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub curves: Vec<PathBuf>,
}

/// Writes `results.csv` (agent x task, mean and std over seeds) and one
/// `curve_<task>.csv` per task with a column per agent.
pub fn emit_report(reports: &[ASuccessReport], curves: &[ReturnCurve], dir: &Path) -> Result<ReportFiles, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Invalid("no reports to emit".into()));
    }
    fs::create_dir_all(dir)?;
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in reports {
        cells.entry((&r.agent, r.task.name())).or_default().push(r.score);
    }
    let mut table = String::from("agent,task,seeds,mean,std\n");
    for ((agent, task), scores) in &cells {
        let (m, s) = mean_std(scores);
        writeln!(table, "{},{task},{},{m:.6},{s:.6}", csv_field(agent), scores.len()).expect("string write");
    }
    let table_path = dir.join("results.csv");
    fs::write(&table_path, table)?;

    let mut by_task: BTreeMap<&str, BTreeMap<&str, Vec<&ReturnCurve>>> = BTreeMap::new();
    for c in curves {
        by_task.entry(c.task.name()).or_default().entry(&c.agent).or_default().push(c);
    }
    let mut curve_paths = Vec::new();
    for (task, agents) in &by_task {
        let n = agents.values().flatten().map(|c| c.values.len()).max().unwrap_or(0);
        if agents.values().flatten().any(|c| c.values.len() != n) {
            return Err(EvalError::Invalid(format!("curves for {task} differ in length")));
        }
        let mut text = String::from("budget");
        for agent in agents.keys() {
            write!(text, ",{}", csv_field(agent)).expect("string write");
        }
        text.push('\n');
        for i in 0..n {
            write!(text, "{}", i + 1).expect("string write");
            for runs in agents.values() {
                let vals: Vec<f64> = runs.iter().map(|c| c.values[i]).collect();
                write!(text, ",{:.6}", mean_std(&vals).0).expect("string write");
            }
            text.push('\n');
        }
        let path = dir.join(format!("curve_{task}.csv"));
        fs::write(&path, text)?;
        curve_paths.push(path);
    }
    Ok(ReportFiles { table: table_path, curves: curve_paths })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
