//! Network input features and the covariance output codec.
//!
//! Features depend on the channels only through the Gram matrices `H^T H`
//! and `G^T G`. With `M = [H^T H, G^T G]` (n_t x 2n_t):
//!
//! - `v1 = vec(M)`, column-major,
//! - `v2 = vec(M^T M)`, column-major,
//! - `v3 = v1` cubed element-wise,
//!
//! and the feature vector is `[0.05 v1, 0.002 v2, 0.0001 v3]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::secrecy::{project_feasible, ChannelPair, Covariance};

/// Transmit antennas the codec is laid out for.
pub const NT: usize = 3;
pub const FEATURE_LEN: usize = feature_len(NT);
pub const COV_LEN: usize = cov_len(NT);

const V1_SCALE: f64 = 0.05;
const V2_SCALE: f64 = 0.002;
const V3_SCALE: f64 = 0.0001;

/// `2 n_t^2 + (2 n_t)^2 + 2 n_t^2`
pub const fn feature_len(n_t: usize) -> usize {
    2 * n_t * n_t + 4 * n_t * n_t + 2 * n_t * n_t
}

pub const fn cov_len(n_t: usize) -> usize {
    n_t * (n_t + 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

/// Upper triangle of `Q` ordered `(q11, q22, q33, q12, q23, q13)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovVector(pub [f64; COV_LEN]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl CovVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Column names of the covariance codec, in storage order.
pub const COV_NAMES: [&str; COV_LEN] = ["q11", "q22", "q33", "q12", "q23", "q13"];

/// `(row, col)` of each codec entry: the main diagonal, then each
/// superdiagonal in turn.
fn cov_positions(n_t: usize) -> Vec<(usize, usize)> {
    (0..n_t)
        .flat_map(|offset| (0..n_t - offset).map(move |i| (i, i + offset)))
        .collect()
}

fn features_for(ch: &ChannelPair) -> Vec<f64> {
    let n_t = ch.n_t();
    let mut m = DMatrix::zeros(n_t, 2 * n_t);
    m.columns_mut(0, n_t).copy_from(&(ch.h().transpose() * ch.h()));
    m.columns_mut(n_t, n_t).copy_from(&(ch.g().transpose() * ch.g()));
    let mtm = m.transpose() * &m;

    // nalgebra storage is column-major, which is the vec() order.
    let v1 = m.as_slice();
    let v2 = mtm.as_slice();
    let mut out = Vec::with_capacity(feature_len(n_t));
    out.extend(v1.iter().map(|x| V1_SCALE * x));
    out.extend(v2.iter().map(|x| V2_SCALE * x));
    out.extend(v1.iter().map(|x| V3_SCALE * x * x * x));
    out
}

pub fn encode_features(ch: &ChannelPair) -> Result<FeatureVector> {
    if ch.n_t() != NT {
        return Err(Error::shape(format!(
            "feature map expects {NT} transmit antennas, got {}",
            ch.n_t()
        )));
    }
    let v = features_for(ch);
    let mut out = [0.0; FEATURE_LEN];
    out.copy_from_slice(&v);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite feature"));
    }
    Ok(FeatureVector(out))
}

pub fn encode_cov(cov: &Covariance) -> Result<CovVector> {
    if cov.n_t() != NT {
        return Err(Error::shape(format!(
            "covariance codec expects {NT}x{NT}, got {0}x{0}",
            cov.n_t()
        )));
    }
    let q = cov.matrix();
    let mut out = [0.0; COV_LEN];
    for (slot, (i, j)) in out.iter_mut().zip(cov_positions(NT)) {
        *slot = q[(i, j)];
    }
    Ok(CovVector(out))
}

/// Symmetric matrix with the given upper triangle, not yet projected.
pub fn cov_matrix(qv: &CovVector) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(NT, NT);
    for (&x, (i, j)) in qv.0.iter().zip(cov_positions(NT)) {
        q[(i, j)] = x;
        q[(j, i)] = x;
    }
    q
}

/// Rebuilds `Q` from its upper triangle and repairs it with
/// [`project_feasible`]. Feasible inputs come back bit-for-bit.
pub fn decode_cov(qv: &CovVector, power: f64) -> Result<Covariance> {
    if qv.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite covariance entry"));
    }
    project_feasible(&cov_matrix(qv), power)
}
