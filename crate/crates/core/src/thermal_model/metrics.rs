use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("true output is constant; R² is undefined")]
    ConstantTruth,
    #[error("true output is identically zero; nMAE is undefined")]
    ZeroScale,
}

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<(), MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(MetricError::TooShort(y_true.len()));
    }
    Ok(())
}

/// Coefficient of determination `1 − SSE/SST`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(MetricError::ConstantTruth);
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Mean absolute error as a percentage of the largest true magnitude.
pub fn nmae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check(y_true, y_pred)?;
    let scale = y_true.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    if scale == 0.0 {
        return Err(MetricError::ZeroScale);
    }
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / y_true.len() as f64;
    Ok(100.0 * mae / scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Ok(1.0));
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), Ok(0.0));
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]), Ok(0.5));
        assert_eq!(nmae(&[0.0, 10.0], &[1.0, 9.0]), Ok(10.0));
        assert_eq!(nmae(&[3.0, -4.0], &[3.0, -4.0]), Ok(0.0));
    }

    #[test]
    fn errors() {
        assert_eq!(r_squared(&[2.0, 2.0], &[1.0, 2.0]), Err(MetricError::ConstantTruth));
        assert_eq!(nmae(&[0.0, 0.0], &[1.0, 2.0]), Err(MetricError::ZeroScale));
        assert_eq!(nmae(&[1.0], &[1.0]), Err(MetricError::TooShort(1)));
        assert_eq!(r_squared(&[1.0, 2.0], &[1.0]), Err(MetricError::LengthMismatch(2, 1)));
    }
}
