/// Denominator floor for [`relative_error`]. Gradient entries smaller than
/// this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares an analytic gradient against central differences on every
/// coordinate and returns the worst relative discrepancy.
///
/// `f` maps a point to `(value, analytic gradient)`; only the value is used at
/// the perturbed points.
///
/// # Panics
///
/// If `epsilon` is outside `[1e-7, 1e-3]` or the gradient length differs from
/// the input length.
pub fn grad_check<F>(mut f: F, x: &[f64], epsilon: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x);
    let coords: Vec<usize> = (0..x.len()).collect();
    grad_check_coords(|v| f(v).0, &analytic, x, &coords, epsilon)
}

/// Like [`grad_check`] but only probes `coords`, for parameter vectors too
/// large to sweep exhaustively.
pub fn grad_check_coords<F>(mut value: F, analytic: &[f64], x: &[f64], coords: &[usize], epsilon: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert!((1e-7..=1e-3).contains(&epsilon), "epsilon {epsilon} outside [1e-7, 1e-3]");
    assert_eq!(analytic.len(), x.len(), "gradient length does not match input length");
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let up = value(&probe);
        probe[i] = orig - epsilon;
        let down = value(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
