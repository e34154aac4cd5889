//! LMMSE aggregation receiver and the two MSE evaluations.
//!
//! Shapes: precoder `A` is `mK x nK`, channel `H` is `r x mK`, data
//! covariance `K` is `nK x nK` (real), noise covariance `S` is `r x r` and the
//! summation matrix `Q` is `n x nK`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{complexify, hermitize, hpd_solve, real_trace, ComplexMatrix, ComplexVector, RealMatrix};

/// Linear estimator `s_hat = W y` of the node sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseReceiver {
    pub w: ComplexMatrix,
}

impl LmmseReceiver {
    pub fn target_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn estimate(&self, y: &ComplexVector) -> Result<ComplexVector> {
        estimate(self, y)
    }
}

fn mismatch(context: &'static str, expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        context,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}

fn check_shapes(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<()> {
    let (tx, src) = a.shape();
    let r = h.nrows();
    if h.ncols() != tx {
        return Err(mismatch("channel", (r, tx), h.shape()));
    }
    if data_cov.shape() != (src, src) {
        return Err(mismatch("data covariance", (src, src), data_cov.shape()));
    }
    if noise_cov.shape() != (r, r) {
        return Err(mismatch("noise covariance", (r, r), noise_cov.shape()));
    }
    if q.ncols() != src {
        return Err(mismatch("summation matrix", (q.nrows(), src), q.shape()));
    }
    Ok(())
}

/// `W = Q K A^H H^H (H A K A^H H^H + S)^{-1}`, via a Cholesky solve.
pub fn lmmse_matrix(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<LmmseReceiver> {
    check_shapes(a, h, data_cov, noise_cov, q)?;
    let g = h * a;
    let k = complexify(data_cov);
    let kg = &k * g.adjoint();
    let cross = complexify(q) * &kg;
    let received_cov = hermitize(&(&g * &kg + noise_cov));
    let w = hpd_solve(&received_cov, &cross.adjoint())
        .map_err(|e| e.named("received covariance H A K A^H H^H + S"))?
        .adjoint();
    Ok(LmmseReceiver { w })
}

pub fn estimate(receiver: &LmmseReceiver, y: &ComplexVector) -> Result<ComplexVector> {
    if y.len() != receiver.w.ncols() {
        return Err(Error::DimensionMismatch {
            context: "received signal",
            expected: receiver.w.ncols().to_string(),
            found: y.len().to_string(),
        });
    }
    Ok(&receiver.w * y)
}

/// `Tr[Q (K^{-1} + A^H H^H S^{-1} H A)^{-1} Q^T]` as a complex number; the
/// imaginary part is round-off.
pub fn mse_closed_form_complex(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<Complex64> {
    check_shapes(a, h, data_cov, noise_cov, q)?;
    let src = data_cov.nrows();
    let k_inv = hpd_solve(data_cov, &RealMatrix::identity(src, src)).map_err(|e| e.named("data covariance K"))?;
    let g = h * a;
    let whitened = hpd_solve(noise_cov, &g).map_err(|e| e.named("noise covariance S"))?;
    let info = hermitize(&(complexify(&k_inv) + g.adjoint() * whitened));
    let qc = complexify(q);
    let x = hpd_solve(&info, &qc.transpose()).map_err(|e| e.named("posterior information matrix"))?;
    Ok((qc * x).trace())
}

/// Closed-form LMMSE error; equals `mse_direct` by the matrix inversion lemma.
pub fn mse_closed_form(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<f64> {
    Ok(mse_closed_form_complex(a, h, data_cov, noise_cov, q)?.re)
}

/// `E|W y - Q x|^2 = Tr[(W H A - Q) K (W H A - Q)^H] + Tr[W S W^H]` for any `W`.
pub fn mse_with_receiver(
    w: &ComplexMatrix,
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<f64> {
    check_shapes(a, h, data_cov, noise_cov, q)?;
    if w.shape() != (q.nrows(), h.nrows()) {
        return Err(mismatch("receiver", (q.nrows(), h.nrows()), w.shape()));
    }
    let err = w * (h * a) - complexify(q);
    let signal = real_trace(&(&err * complexify(data_cov) * err.adjoint()));
    let noise = real_trace(&(w * noise_cov * w.adjoint()));
    Ok(signal + noise)
}

/// MSE of the LMMSE receiver evaluated from its definition.
pub fn mse_direct(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    data_cov: &RealMatrix,
    noise_cov: &ComplexMatrix,
    q: &RealMatrix,
) -> Result<f64> {
    let rx = lmmse_matrix(a, h, data_cov, noise_cov, q)?;
    mse_with_receiver(&rx.w, a, h, data_cov, noise_cov, q)
}
