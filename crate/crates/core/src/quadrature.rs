//! Uniform-grid helpers shared by the density and loss code.

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

/// Trapezoid rule for samples on a uniform grid with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Running trapezoid integral; element `i` is the integral from the first
/// grid point to the `i`-th.
pub fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dx * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Linear interpolation of `values` sampled on the uniform grid
/// `lo + i * (hi - lo) / (len - 1)`. Returns `None` outside `[lo, hi]`.
pub fn interp_uniform(values: &[f64], lo: f64, hi: f64, x: f64) -> Option<f64> {
    if !(x >= lo && x <= hi) || values.is_empty() {
        return None;
    }
    let n = values.len();
    if n == 1 {
        return Some(values[0]);
    }
    let pos = (x - lo) / (hi - lo) * (n - 1) as f64;
    let left = (pos.floor() as usize).min(n - 2);
    let frac = pos - left as f64;
    Some(values[left] + frac * (values[left + 1] - values[left]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_ends() {
        let g = linspace(-1.0, 3.0, 5);
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 2.0, 3.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn trapezoid_is_exact_for_linear_functions() {
        let g = linspace(0.0, 2.0, 11);
        let v: Vec<f64> = g.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&v, 0.2) - 8.0).abs() < 1e-12);
        let c = cumulative_trapezoid(&v, 0.2);
        assert!((c[10] - 8.0).abs() < 1e-12);
        assert_eq!(c[0], 0.0);
    }

    #[test]
    fn interpolation_outside_range_is_none() {
        let v = [0.0, 1.0, 2.0];
        assert_eq!(interp_uniform(&v, 0.0, 2.0, 1.5), Some(1.5));
        assert_eq!(interp_uniform(&v, 0.0, 2.0, 2.0), Some(2.0));
        assert_eq!(interp_uniform(&v, 0.0, 2.0, 2.1), None);
        assert_eq!(interp_uniform(&v, 0.0, 2.0, f64::NAN), None);
    }
}
