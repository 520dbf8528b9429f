use super::{
    sym_eig_extremes, LinalgError, Matrix, CARE_RESIDUAL_TOL,
};

const SIGN_ITER_CAP: usize = 120;
const SIGN_ITER_TOL: f64 = 1e-13;

/// Matrix sign function by the Newton iteration `Z ← (Z + Z⁻¹)/2`.
///
/// Converges quadratically for matrices with no purely imaginary
/// eigenvalues; anything else surfaces as a singular iterate or a stall.
pub fn matrix_sign(m: &Matrix) -> Result<Matrix, LinalgError> {
    let mut z = m.clone();
    for _ in 0..SIGN_ITER_CAP {
        let inv = z.inverse()?;
        let next = (&z + &inv).scale(0.5);
        let delta = (&next - &z).norm_inf();
        let scale = next.norm_inf().max(1.0);
        z = next;
        if delta <= SIGN_ITER_TOL * scale {
            return Ok(z);
        }
    }
    Err(LinalgError::SignDiverged(SIGN_ITER_CAP))
}

/// Solves `AᵀP + PA − 2PBBᵀP + kI = 0` for the symmetric positive-definite
/// stabilising solution.
///
/// The stable invariant subspace of the Hamiltonian `[[A, −2BBᵀ], [−kI, −Aᵀ]]`
/// is extracted from its matrix sign via a least-squares solve, after which a
/// single Newton step on the Riccati residual polishes the result. The
/// returned `P` satisfies the residual tolerance, is positive definite, and
/// leaves `A − BBᵀP` Hurwitz; any failed check is an error.
pub fn solve_care(a: &Matrix, b: &Matrix, k: f64) -> Result<Matrix, LinalgError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(LinalgError::NonPositiveWeight(k));
    }
    if !a.is_square() || a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve_care: A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let m = a.rows();
    let bt = b.transpose();
    let g = (&(b * &bt)).scale(2.0);
    let hamiltonian =
        Matrix::block2x2(a, &(-&g), &Matrix::identity(m).scale(-k), &(-&a.transpose()));
    let sign = matrix_sign(&hamiltonian)?;

    // (sign(H) + I)[I; P] = 0, so P solves the stacked least-squares system
    // [M12; M22] P = −[M11; M21].
    let w = &sign + &Matrix::identity(2 * m);
    let m11 = w.block(0, 0, m, m);
    let m12 = w.block(0, m, m, m);
    let m21 = w.block(m, 0, m, m);
    let m22 = w.block(m, m, m, m);
    let mut lhs = Matrix::zeros(2 * m, m);
    lhs.set_block(0, 0, &m12);
    lhs.set_block(m, 0, &m22);
    let mut rhs = Matrix::zeros(2 * m, m);
    rhs.set_block(0, 0, &(-&m11));
    rhs.set_block(m, 0, &(-&m21));
    let lhs_t = lhs.transpose();
    let p = (&lhs_t * &lhs).solve(&(&lhs_t * &rhs))?;
    let mut p = p.symmetrize();

    // One Newton polish: solve the Lyapunov equation AᵀcΔ + ΔAc = −R(P)
    // with Ac = A − 2BBᵀP, via Kronecker vectorisation.
    let residual_of = |p: &Matrix| -> Matrix {
        let at_p = &a.transpose() * p;
        let p_g_p = &(p * &g) * p;
        &(&(&at_p + &at_p.transpose()) - &p_g_p) + &Matrix::identity(m).scale(k)
    };
    let ac = &a.clone() - &(&g * &p);
    let act = ac.transpose();
    let lyap = &Matrix::identity(m).kron(&act) + &act.kron(&Matrix::identity(m));
    let res = residual_of(&p);
    let delta_vec = lyap.solve(&vec_col_major(&(-&res)))?;
    p = (&p + &unvec_col_major(&delta_vec, m)).symmetrize();

    let final_residual = residual_of(&p).norm_inf();
    if !(final_residual <= CARE_RESIDUAL_TOL * (1.0 + p.norm_inf())) {
        return Err(LinalgError::RiccatiResidual(final_residual));
    }
    let extremes = sym_eig_extremes(&p)?;
    if extremes.min <= 0.0 {
        return Err(LinalgError::RiccatiNotPositive(extremes.min));
    }
    // Hurwitz check on the error dynamics A − BBᵀP, reusing the sign
    // iteration: every eigenvalue in the open left half-plane iff sign = −I.
    let closed = &a.clone() - &(&(b * &bt) * &p);
    let closed_sign = matrix_sign(&closed).map_err(|_| LinalgError::NotHurwitz)?;
    if (&closed_sign + &Matrix::identity(m)).norm_inf() > 1e-6 {
        return Err(LinalgError::NotHurwitz);
    }
    Ok(p)
}

/// Stacks columns of `m` into a single column (column-major vectorisation).
fn vec_col_major(m: &Matrix) -> Matrix {
    let mut v = Matrix::zeros(m.rows() * m.cols(), 1);
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            v[(j * m.rows() + i, 0)] = m[(i, j)];
        }
    }
    v
}

fn unvec_col_major(v: &Matrix, rows: usize) -> Matrix {
    let cols = v.rows() / rows;
    Matrix::from_fn(rows, cols, |i, j| v[(j * rows + i, 0)])
}
