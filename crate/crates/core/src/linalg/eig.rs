use super::{
    LinalgError, Matrix, JACOBI_OFF_TOL, POWER_ITER_CAP, POWER_ITER_TOL, SYMMETRY_TOL,
};

/// Extremal eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigExtremes {
    pub min: f64,
    pub max: f64,
}

/// Largest singular value, computed by power iteration on `MᵀM`.
pub fn max_singular_value(m: &Matrix) -> Result<f64, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let gram = &m.transpose() * m;
    let n = gram.rows();
    if gram.norm_inf() == 0.0 {
        return Ok(0.0);
    }
    // Deterministic start with unequal components so symmetric eigenspaces
    // do not trap the iteration.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 / (i + 1) as f64).collect();
    normalise(&mut v);
    let mut estimate = 0.0;
    for iter in 0..POWER_ITER_CAP {
        let mut w = gram.mat_vec(&v);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = super::matrix::norm2(&w);
        if norm == 0.0 {
            // v landed in the kernel; restart away from it.
            v = (0..n).map(|i| ((i as f64) + 0.5).sin()).collect();
            normalise(&mut v);
            continue;
        }
        for x in &mut w {
            *x /= norm;
        }
        let converged = iter > 0 && (rayleigh - estimate).abs() <= POWER_ITER_TOL * rayleigh.abs().max(1e-300);
        estimate = rayleigh;
        v = w;
        if converged {
            return Ok(estimate.max(0.0).sqrt());
        }
    }
    Err(LinalgError::PowerIterationStall { cap: POWER_ITER_CAP, estimate: estimate.max(0.0).sqrt() })
}

/// Smallest and largest eigenvalue of a symmetric matrix via cyclic Jacobi
/// rotations. Rejects visibly asymmetric input.
pub fn sym_eig_extremes(m: &Matrix) -> Result<EigExtremes, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "sym_eig_extremes needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * m.norm_inf().max(1.0) {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let mut a = m.symmetrize();
    if n == 1 {
        return Ok(EigExtremes { min: a[(0, 0)], max: a[(0, 0)] });
    }
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_OFF_TOL {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                lo = lo.min(a[(i, i)]);
                hi = hi.max(a[(i, i)]);
            }
            return Ok(EigExtremes { min: lo, max: hi });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= JACOBI_OFF_TOL / (n * n) as f64 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
            }
        }
    }
    Err(LinalgError::JacobiStall(MAX_SWEEPS))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Applies the two-sided Jacobi rotation J(p,q,θ)ᵀ A J(p,q,θ) in place.
fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}

fn normalise(v: &mut [f64]) {
    let n = super::matrix::norm2(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}
