/// Below this population standard deviation a series counts as constant.
pub const CONSTANT_STD: f64 = 1e-8;

/// Linear interpolation at `len` evenly spaced positions spanning the
/// original index range; both endpoints are kept exactly.
pub fn resample_linear(values: &[f64], len: usize) -> Vec<f64> {
    assert!(!values.is_empty(), "cannot resample an empty series");
    assert!(len >= 2, "target length must be at least 2");
    let n = values.len();
    if n == len {
        return values.to_vec();
    }
    if n == 1 {
        return vec![values[0]; len];
    }
    let span = (n - 1) as f64;
    let steps = (len - 1) as f64;
    (0..len)
        .map(|k| {
            let pos = k as f64 * span / steps;
            let i = (pos.floor() as usize).min(n - 1);
            if i == n - 1 {
                return values[n - 1];
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                values[i]
            } else {
                values[i] + frac * (values[i + 1] - values[i])
            }
        })
        .collect()
}

/// Zero mean, unit population standard deviation. A constant series becomes
/// all zeros and the returned flag is set.
pub fn znormalize(values: &[f64]) -> (Vec<f64>, bool) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std >= CONSTANT_STD) {
        return (vec![0.0; values.len()], true);
    }
    let mut out: Vec<f64> = values.iter().map(|v| (v - mean) / std).collect();
    // One correction pass keeps |mean| well under 1e-9 for long series.
    let residual = out.iter().sum::<f64>() / n;
    if residual != 0.0 {
        out.iter_mut().for_each(|v| *v -= residual);
    }
    (out, false)
}
