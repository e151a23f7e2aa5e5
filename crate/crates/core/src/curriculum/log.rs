use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CurriculumError, CurriculumState, Decision};
use crate::worldgen::PuzzleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogAction {
    Continue,
    Switch,
    Terminate,
}

/// One line of the exploration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Start {
        pool_size: usize,
        threshold: f64,
        alpha: f64,
        budget: u64,
    },
    Decision {
        step: u64,
        env: usize,
        /// Losses recorded for `env` since the previous decision.
        losses: Vec<f64>,
        ema: Option<f64>,
        action: LogAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<usize>,
    },
}

impl LogRecord {
    pub fn decision(step: u64, env: usize, losses: Vec<f64>, ema: f64, decision: Decision) -> Self {
        let (action, next) = match decision {
            Decision::Continue => (LogAction::Continue, None),
            Decision::Switch { to, .. } => (LogAction::Switch, Some(to)),
            Decision::Terminate => (LogAction::Terminate, None),
        };
        Self::Decision { step, env, losses, ema: ema.is_finite().then_some(ema), action, next }
    }
}

pub fn write_log(mut out: impl Write, records: &[LogRecord]) -> Result<(), CurriculumError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CurriculumError::InvalidConfig(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn parse_log(input: impl BufRead) -> Result<Vec<LogRecord>, CurriculumError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| CurriculumError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayAudit {
    pub decisions: usize,
    pub switches: Vec<(u64, usize, usize)>,
    pub terminated_at: Option<u64>,
    /// Indices of records whose logged action differs from the recomputed one.
    pub mismatches: Vec<usize>,
}

impl ReplayAudit {
    pub fn is_consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes every decision from the logged losses alone.
pub fn replay(records: &[LogRecord]) -> Result<ReplayAudit, CurriculumError> {
    let parse = |line: usize, message: &str| CurriculumError::Parse { line, message: message.into() };
    let Some(LogRecord::Start { pool_size, threshold, alpha, budget }) = records.first() else {
        return Err(parse(1, "log must begin with a start record"));
    };
    let pool = vec![PuzzleConfig::sandbox(0, []); *pool_size];
    let mut state = CurriculumState::new(pool, *threshold, *budget)?.with_alpha(*alpha)?;
    let mut audit = ReplayAudit { decisions: 0, switches: Vec::new(), terminated_at: None, mismatches: Vec::new() };
    for (i, r) in records.iter().enumerate().skip(1) {
        let LogRecord::Decision { step, env, losses, action, next, .. } = r else {
            return Err(parse(i + 1, "unexpected start record"));
        };
        if audit.terminated_at.is_some() {
            return Err(parse(i + 1, "record after terminate"));
        }
        if *env != state.active {
            audit.mismatches.push(i);
        }
        for &l in losses {
            state.record_loss(state.active, l)?;
        }
        let d = state.decide()?;
        audit.decisions += 1;
        let expected = LogRecord::decision(*step, *env, Vec::new(), 0.0, d);
        let LogRecord::Decision { action: ea, next: en, .. } = expected else { unreachable!() };
        if (ea, en) != (*action, *next) {
            audit.mismatches.push(i);
        }
        match d {
            Decision::Switch { from, to } => audit.switches.push((*step, from, to)),
            Decision::Terminate => audit.terminated_at = Some(*step),
            Decision::Continue => {}
        }
    }
    audit.mismatches.dedup();
    Ok(audit)
}
