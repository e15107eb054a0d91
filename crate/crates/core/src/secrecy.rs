//! Secrecy-rate objective and covariance feasibility.
//!
//! All routines are pure functions of their inputs. Rates are reported in
//! bits per channel use (base-2 logarithms throughout).

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance on negative eigenvalues and trace overflow for a covariance to
/// count as feasible.
pub const PSD_TOL: f64 = 1e-9;

/// Receiver channel `H` (n_r x n_t) and eavesdropper channel `G` (n_e x n_t).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    h: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl ChannelPair {
    pub fn new(h: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        if h.ncols() == 0 || h.nrows() == 0 || g.nrows() == 0 {
            return Err(Error::shape(format!(
                "channel matrices must be non-empty, got H {}x{} and G {}x{}",
                h.nrows(),
                h.ncols(),
                g.nrows(),
                g.ncols()
            )));
        }
        if h.ncols() != g.ncols() {
            return Err(Error::shape(format!(
                "H has {} transmit antennas but G has {}",
                h.ncols(),
                g.ncols()
            )));
        }
        if h.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::numeric("channel entries must be finite"));
        }
        Ok(Self { h, g })
    }

    /// Builds a pair from row-major entry slices.
    pub fn from_row_slices(n_t: usize, n_r: usize, n_e: usize, h: &[f64], g: &[f64]) -> Result<Self> {
        if h.len() != n_r * n_t || g.len() != n_e * n_t {
            return Err(Error::shape(format!(
                "expected {} receiver and {} eavesdropper entries, got {} and {}",
                n_r * n_t,
                n_e * n_t,
                h.len(),
                g.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(n_r, n_t, h),
            DMatrix::from_row_slice(n_e, n_t, g),
        )
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_e(&self) -> usize {
        self.g.nrows()
    }
}

/// Symmetric positive-semidefinite input covariance with a trace budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    q: DMatrix<f64>,
    power: f64,
}

impl Covariance {
    /// Validates symmetry (exact), positive semidefiniteness and the trace
    /// budget, both within [`PSD_TOL`].
    pub fn new(q: DMatrix<f64>, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::contract(format!("power budget must be positive, got {power}")));
        }
        if !q.is_square() || q.nrows() == 0 {
            return Err(Error::shape(format!(
                "covariance must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("covariance entries must be finite"));
        }
        if q != q.transpose() {
            return Err(Error::contract("covariance must be exactly symmetric"));
        }
        let trace = q.trace();
        if trace > power + PSD_TOL {
            return Err(Error::contract(format!(
                "trace {trace} exceeds power budget {power}"
            )));
        }
        let min_eig = min_eigenvalue(&q);
        if min_eig < -PSD_TOL {
            return Err(Error::contract(format!(
                "covariance is not positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        Ok(Self { q, power })
    }

    pub fn zeros(n_t: usize, power: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(n_t, n_t), power)
    }

    pub(crate) fn from_trusted(q: DMatrix<f64>, power: f64) -> Self {
        debug_assert!(q == q.transpose());
        Self { q, power }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.q
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn n_t(&self) -> usize {
        self.q.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.q.trace()
    }
}

/// Eigenvector matrix `V` and square-root power allocation so that
/// `Q = V diag(lambda_sqrt)^2 V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderFactors {
    pub v: DMatrix<f64>,
    /// Diagonal of the power allocation matrix, descending.
    pub lambda_sqrt: Vec<f64>,
}

impl PrecoderFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.lambda_sqrt.len();
        let mut scaled = self.v.clone();
        for (j, s) in self.lambda_sqrt.iter().enumerate() {
            let p = s * s;
            for i in 0..n {
                scaled[(i, j)] *= p;
            }
        }
        &scaled * self.v.transpose()
    }
}

fn check_dims(ch: &ChannelPair, cov: &Covariance) -> Result<()> {
    if ch.n_t() != cov.n_t() {
        return Err(Error::shape(format!(
            "channel has {} transmit antennas, covariance is {}x{}",
            ch.n_t(),
            cov.n_t(),
            cov.n_t()
        )));
    }
    Ok(())
}

/// `I + A Q A^T`
fn gram_plus_identity(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = a * q * a.transpose();
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0;
    }
    m
}

/// Natural log-determinant of a symmetric positive definite matrix.
fn ln_det_spd(m: DMatrix<f64>) -> Result<f64> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::numeric("matrix I + AQA^T is not positive definite"))?;
    let l = chol.l_dirty();
    let ln_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    if !ln_det.is_finite() {
        return Err(Error::numeric("non-finite log-determinant"));
    }
    Ok(ln_det)
}

/// `1/2 log2|I + H Q H^T| - 1/2 log2|I + G Q G^T|`.
///
/// This is the objective value for the given `Q`, so it can be negative for
/// a poor choice of covariance.
pub fn secrecy_rate(ch: &ChannelPair, cov: &Covariance) -> Result<f64> {
    check_dims(ch, cov)?;
    let q = cov.matrix();
    let legit = ln_det_spd(gram_plus_identity(ch.h(), q))?;
    let eve = ln_det_spd(gram_plus_identity(ch.g(), q))?;
    Ok((legit - eve) / (2.0 * LN_2))
}

/// Same objective evaluated on the n_t x n_t side, `|I + H^T H Q|` and
/// `|I + G^T G Q|`, through LU determinants.
pub fn secrecy_rate_via_sylvester(ch: &ChannelPair, cov: &Covariance) -> Result<f64> {
    check_dims(ch, cov)?;
    let q = cov.matrix();
    let n = ch.n_t();
    let ln_det = |a: &DMatrix<f64>| -> Result<f64> {
        let m = DMatrix::identity(n, n) + a.transpose() * a * q;
        let det = m.lu().determinant();
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::numeric(format!("determinant {det} is not positive")));
        }
        Ok(det.ln())
    };
    Ok((ln_det(ch.h())? - ln_det(ch.g())?) / (2.0 * LN_2))
}

/// `A^T (I + A Q A^T)^{-1} A`
fn weighted_gram(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = gram_plus_identity(a, q)
        .cholesky()
        .ok_or_else(|| Error::numeric("matrix I + AQA^T is not positive definite"))?;
    Ok(a.transpose() * chol.solve(a))
}

/// Gradient of [`secrecy_rate`] with respect to a symmetric `Q`.
pub fn rate_gradient(ch: &ChannelPair, cov: &Covariance) -> Result<DMatrix<f64>> {
    check_dims(ch, cov)?;
    let q = cov.matrix();
    let mut grad = weighted_gram(ch.h(), q)? - weighted_gram(ch.g(), q)?;
    grad /= 2.0 * LN_2;
    symmetrize(&mut grad);
    if grad.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite gradient"));
    }
    Ok(grad)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn min_eigenvalue(q: &DMatrix<f64>) -> f64 {
    q.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn check_symmetric(q: &DMatrix<f64>) -> Result<()> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::shape(format!(
            "expected a non-empty square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("matrix entries must be finite"));
    }
    let n = q.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (q[(i, j)] - q[(j, i)]).abs() > PSD_TOL {
                return Err(Error::contract(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    q[(i, j)],
                    q[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn is_feasible(q: &DMatrix<f64>, power: f64) -> bool {
    q == &q.transpose() && q.trace() <= power + PSD_TOL && min_eigenvalue(q) >= -PSD_TOL
}

/// `V diag(eigs) V^T`, written back exactly symmetric.
fn reassemble(vectors: &DMatrix<f64>, eigs: &[f64]) -> DMatrix<f64> {
    let n = eigs.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| vectors[(i, k)] * eigs[k] * vectors[(j, k)]).sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

fn sym_eigen(q: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut sym = q.clone();
    symmetrize(&mut sym);
    SymmetricEigen::new(sym)
}

fn validate_power(power: f64) -> Result<()> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::contract(format!("power budget must be positive, got {power}")));
    }
    Ok(())
}

/// Repairs a symmetric matrix into a feasible covariance: negative
/// eigenvalues are clipped to zero and, if the trace then exceeds `power`,
/// the clipped spectrum is scaled uniformly down to the budget.
///
/// Inputs that already satisfy the [`Covariance`] invariants are returned
/// unchanged.
pub fn project_feasible(q_raw: &DMatrix<f64>, power: f64) -> Result<Covariance> {
    validate_power(power)?;
    check_symmetric(q_raw)?;
    if is_feasible(q_raw, power) {
        return Ok(Covariance::from_trusted(q_raw.clone(), power));
    }
    let eig = sym_eigen(q_raw);
    let mut lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let trace: f64 = lambda.iter().sum();
    if trace > power {
        let scale = power / trace;
        lambda.iter_mut().for_each(|l| *l *= scale);
    }
    Ok(Covariance::from_trusted(reassemble(&eig.eigenvectors, &lambda), power))
}

/// Euclidean (Frobenius-nearest) projection onto `{Q >= 0, tr Q <= power}`.
///
/// The spectrum is projected onto the capped simplex, which shifts the
/// eigenvalues by a common water level instead of scaling them. Projected
/// gradient ascent needs this form: its fixed points are exactly the KKT
/// points of the rate maximisation.
pub fn project_euclidean(q_raw: &DMatrix<f64>, power: f64) -> Result<Covariance> {
    validate_power(power)?;
    check_symmetric(q_raw)?;
    let eig = sym_eigen(q_raw);
    let lambda = project_capped_simplex(eig.eigenvalues.as_slice(), power);
    Ok(Covariance::from_trusted(reassemble(&eig.eigenvectors, &lambda), power))
}

/// Nearest point to `values` in `{x >= 0, sum x <= budget}`.
fn project_capped_simplex(values: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|&l| l.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut level = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - budget) / (k + 1) as f64;
        if v - candidate > 0.0 {
            level = candidate;
        } else {
            break;
        }
    }
    values.iter().map(|&l| (l - level).max(0.0)).collect()
}

/// Eigen-factorization `Q = V Λ V^T` behind the precoder `x = V Λ^{1/2} s`.
///
/// Eigenvalues are sorted in descending order (ties keep their original
/// order) and each eigenvector is signed so its first non-negligible entry
/// is positive.
pub fn factorize_precoder(cov: &Covariance) -> PrecoderFactors {
    let eig = sym_eigen(cov.matrix());
    let n = cov.n_t();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut v = DMatrix::zeros(n, n);
    let mut lambda_sqrt = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        for i in 0..n {
            v[(i, dst)] = sign * col[i];
        }
        lambda_sqrt.push(eig.eigenvalues[src].max(0.0).sqrt());
    }
    PrecoderFactors { v, lambda_sqrt }
}
