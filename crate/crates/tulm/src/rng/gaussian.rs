//! Multivariate normal draws parameterized by precision.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// The distribution N(P⁻¹h, P⁻¹) described by its precision matrix P and
/// linear term h, the natural form of every Gaussian full conditional in the
/// samplers. The covariance is never formed.
#[derive(Clone, Debug)]
pub struct PrecisionGaussian {
    precision: DMatrix<f64>,
    linear: DVector<f64>,
}

impl PrecisionGaussian {
    pub fn new(precision: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        if !precision.is_square() || precision.nrows() != linear.len() {
            return Err(Error::Numerical(format!(
                "precision {}x{} incompatible with linear term of length {}",
                precision.nrows(),
                precision.ncols(),
                linear.len()
            )));
        }
        let scale = precision.amax();
        let asym = (&precision - precision.transpose()).amax();
        if asym > 1e-8 * scale.max(1.0) {
            return Err(Error::Numerical(format!(
                "precision matrix asymmetric: max |P - P'| = {asym:e}"
            )));
        }
        Ok(PrecisionGaussian { precision, linear })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    /// Conditional mean P⁻¹h.
    pub fn mean(&self) -> Result<DVector<f64>> {
        Ok(self.factorize()?.solve(&self.linear))
    }

    fn factorize(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.precision.clone()).ok_or_else(|| {
            let diag = self.precision.diagonal();
            Error::Numerical(format!(
                "precision matrix not positive definite ({}x{}, diagonal range [{:e}, {:e}])",
                self.precision.nrows(),
                self.precision.ncols(),
                diag.min(),
                diag.max()
            ))
        })
    }
}

/// Draw from N(P⁻¹h, P⁻¹): factor P = LLᵀ, solve for the mean, and add
/// (Lᵀ)⁻¹z with z standard normal, so the draw has covariance P⁻¹.
pub fn draw_mvn_precision(g: &PrecisionGaussian, rng: &mut RngStream) -> Result<DVector<f64>> {
    let chol = g.factorize()?;
    let mean = chol.solve(&g.linear);
    let z = DVector::from_fn(g.dim(), |_, _| rng.standard_normal());
    let lt = chol.l().transpose();
    let v = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor in mvn draw".into()))?;
    Ok(mean + v)
}
