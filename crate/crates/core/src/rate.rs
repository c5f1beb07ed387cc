//! Exponential-rate fitting for decaying time series.

/// Relative floor below which samples are ignored.
pub const FLOOR: f64 = 1e-12;

/// Fraction of leading samples discarded as transient.
pub const TRANSIENT_FRACTION: f64 = 0.1;

/// Fits `values ≈ A e^{−rate·t}` by least squares on `ln values`.
///
/// Samples with `value ≤ FLOOR·values[0]` and the first 10% of samples are
/// dropped. Returns `None` with fewer than two usable samples.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    assert_eq!(times.len(), values.len(), "times and values must have equal length");
    let v0 = *values.first()?;
    if !(v0 > 0.0) {
        return None;
    }
    let skip = (TRANSIENT_FRACTION * times.len() as f64).floor() as usize;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .skip(skip)
        .filter(|(_, &v)| v > FLOOR * v0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_pure_exponential() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|&t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ignores_floor_samples() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let v: Vec<f64> = t.iter().map(|&t| if t < 50.0 { (-0.5 * t).exp() } else { 0.0 }).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(fit_decay_rate(&[0.0], &[1.0]), None);
        assert_eq!(fit_decay_rate(&[0.0, 1.0], &[0.0, 0.0]), None);
    }
}
