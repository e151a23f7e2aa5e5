use super::EvalError;

/// Weights `ln(i+1) - ln(i)` for budgets `1..=n`.
pub fn budget_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|i| ((i + 1) as f64).ln() - (i as f64).ln()).collect()
}

fn check(s: &[f64], n: usize) -> Result<(), EvalError> {
    if n == 0 {
        return Err(EvalError::Invalid("N must be positive".into()));
    }
    if s.len() != n {
        return Err(EvalError::Length { expected: n, got: s.len() });
    }
    match s.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(EvalError::OutOfRange { index: i + 1, value: s[i] }),
        None => Ok(()),
    }
}

/// Action-budget weighted mean return, normalized by `ln(N+1)`.
pub fn a_success(s: &[f64], n: usize) -> Result<f64, EvalError> {
    check(s, n)?;
    let num: f64 = s.iter().enumerate().map(|(i, v)| (((i + 2) as f64).ln() - ((i + 1) as f64).ln()) * v).sum();
    Ok((num / ((n + 1) as f64).ln()).clamp(0.0, 1.0))
}
