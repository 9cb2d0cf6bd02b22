#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CalcError {
    #[error("EmptyList: at least one number is required")]
    EmptyList,
    #[error("TooFewElements: sample standard deviation needs at least two numbers, got {0}")]
    TooFewElements(usize),
}

/// Left-to-right sum.
pub fn add_all(numbers: &[f64]) -> Result<f64, CalcError> {
    if numbers.is_empty() {
        return Err(CalcError::EmptyList);
    }
    Ok(numbers.iter().fold(0.0, |acc, x| acc + x))
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_stdev(numbers: &[f64]) -> Result<(f64, f64), CalcError> {
    let n = numbers.len();
    if n < 2 {
        return Err(CalcError::TooFewElements(n));
    }
    let mean = add_all(numbers)? / n as f64;
    let ss: f64 = numbers.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}
