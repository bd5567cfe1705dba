//! Central finite differences for verifying analytic gradients.

/// Step used by the gradient checks.
pub const FD_STEP: f64 = 1e-6;

/// Magnitude below which gradients are compared absolutely. Central
/// differences at `h = 1e-6` carry roughly `1e-10` of rounding noise, so a
/// purely relative test is meaningless for near-zero entries.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Numerical gradient of `loss` with respect to `n` scalar coordinates of
/// `base`. `perturb(value, k, delta)` shifts coordinate `k` by `delta`.
pub fn numeric_grad<T: Clone>(
    base: &T,
    n: usize,
    perturb: impl Fn(&mut T, usize, f64),
    loss: impl Fn(&T) -> f64,
    h: f64,
) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let mut plus = base.clone();
            perturb(&mut plus, k, h);
            let mut minus = base.clone();
            perturb(&mut minus, k, -h);
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Largest elementwise `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR))
        .fold(0.0, f64::max)
}
