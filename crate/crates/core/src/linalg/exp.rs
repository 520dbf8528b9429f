use super::{LinalgError, Matrix};

/// Matrix exponential via scaling-and-squaring with a diagonal (6,6) Padé
/// approximant. The argument is scaled until its infinity norm is at most
/// 1/2, which keeps the approximant error well below the crate's 1e-9
/// relative target before the squaring phase.
pub fn expm(a: &Matrix) -> Result<Matrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let norm = a.norm_inf();
    if !norm.is_finite() {
        return Err(LinalgError::NonFinite("expm input"));
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(squarings));

    const Q: usize = 6;
    let n = a.rows();
    let mut num = Matrix::identity(n);
    let mut den = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    let mut coeff = 1.0;
    for k in 0..Q {
        coeff *= (Q - k) as f64 / ((2 * Q - k) * (k + 1)) as f64;
        term = &term * &scaled;
        let scaled_term = term.scale(coeff);
        num = &num + &scaled_term;
        if (k + 1) % 2 == 0 {
            den = &den + &scaled_term;
        } else {
            den = &den - &scaled_term;
        }
    }
    let mut result = den.solve(&num)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if !result.is_finite() {
        return Err(LinalgError::NonFinite("expm"));
    }
    Ok(result)
}

/// Zero-order-hold discretisation of `ẋ = Ax + Bu` at sampling period `ts`:
/// returns `(Ad, Bd)` with `Ad = e^{A·ts}` and `Bd = ∫₀^ts e^{Aτ} dτ · B`,
/// obtained from one exponential of the augmented matrix `[[A, B], [0, 0]]`.
pub fn zoh_discretize(a: &Matrix, b: &Matrix, ts: f64) -> Result<(Matrix, Matrix), LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "zoh: A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(LinalgError::DimensionMismatch(format!("zoh: invalid sampling period {ts}")));
    }
    let n = a.rows();
    let m = b.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &a.scale(ts));
    aug.set_block(0, n, &b.scale(ts));
    let e = expm(&aug)?;
    Ok((e.block(0, 0, n, n), e.block(0, n, n, m)))
}
