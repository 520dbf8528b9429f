use super::LinalgError;

/// One classical Runge-Kutta step of `ẋ = f(t, x)` with step size `dt`.
pub fn rk4_step<F>(f: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, LinalgError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = x.len();
    let add_scaled = |base: &[f64], dir: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(dir).map(|(b, d)| b + h * d).collect()
    };
    let k1 = f(t, x);
    let k2 = f(t + dt / 2.0, &add_scaled(x, &k1, dt / 2.0));
    let k3 = f(t + dt / 2.0, &add_scaled(x, &k2, dt / 2.0));
    let k4 = f(t + dt, &add_scaled(x, &k3, dt));
    debug_assert!(k1.len() == n && k2.len() == n && k3.len() == n && k4.len() == n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("rk4 step"));
    }
    Ok(out)
}
