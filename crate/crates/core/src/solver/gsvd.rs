//! GSVD precoding with secrecy water-filling.
//!
//! The channel pair is split into parallel subchannels through the
//! generalized singular value decomposition of `(H, G)`, computed from an
//! orthonormal factor of the stacked matrix `[H; G]` followed by a
//! cosine-sine split of its two blocks. Power is then water-filled over the
//! subchannels where the receiver out-gains the eavesdropper.

use nalgebra::{DMatrix, SymmetricEigen};

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::secrecy::{project_feasible, secrecy_rate, ChannelPair, Covariance};

/// Per-subchannel power gains seen by the receiver (`a`) and the
/// eavesdropper (`b`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelGains {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SubchannelGains {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::shape(format!(
                "gain vectors differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::contract("subchannel gains must be finite and non-negative"));
        }
        Ok(Self { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Secrecy rate of a power allocation over these subchannels (bits).
    pub fn rate(&self, power: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .zip(power)
            .map(|((a, b), p)| 0.5 * ((1.0 + a * p) / (1.0 + b * p)).log2())
            .sum()
    }
}

/// Generalized singular value decomposition of a channel pair.
///
/// Column `i` of `directions` is a unit-norm transmit direction `x_i`.
/// `H x_i` are mutually orthogonal with squared norms `gains.a`, and
/// likewise `G x_i` with `gains.b`, so transmitting power `p_i` along `x_i`
/// decouples into parallel scalar wiretap channels.
#[derive(Debug, Clone)]
pub struct Gsvd {
    pub directions: DMatrix<f64>,
    pub gains: SubchannelGains,
    /// Cosine/sine pairs of the cosine-sine split (`c_i^2 + s_i^2 = 1`).
    pub cosines: Vec<f64>,
    pub sines: Vec<f64>,
}

pub fn gsvd(ch: &ChannelPair) -> Gsvd {
    let (n_r, n_t) = (ch.n_r(), ch.n_t());
    let rows = n_r + ch.n_e();
    let mut stacked = DMatrix::zeros(rows, n_t);
    stacked.rows_mut(0, n_r).copy_from(ch.h());
    stacked.rows_mut(n_r, ch.n_e()).copy_from(ch.g());

    // Rank-revealing orthonormal factor: [H; G] = U_r (Sigma_r V_r^T).
    let svd = stacked.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = sigma_max * rows.max(n_t) as f64 * f64::EPSILON * 8.0;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| sigma_max > 0.0 && svd.singular_values[i] > cutoff)
        .collect();
    let rank = kept.len();
    if rank == 0 {
        return Gsvd {
            directions: DMatrix::zeros(n_t, 0),
            gains: SubchannelGains { a: vec![], b: vec![] },
            cosines: vec![],
            sines: vec![],
        };
    }

    let basis = DMatrix::from_fn(rows, rank, |i, j| u[(i, kept[j])]);
    let top = basis.rows(0, n_r);
    let bottom = basis.rows(n_r, ch.n_e());

    // Cosine-sine split: top^T top = W C^2 W^T and bottom^T bottom = W S^2 W^T.
    // Diagonalising the difference keeps precision at both ends of the spectrum.
    let diff = top.transpose() * top - bottom.transpose() * bottom;
    let eig = SymmetricEigen::new(0.5 * (&diff + diff.transpose()));
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

    let mut directions = DMatrix::zeros(n_t, rank);
    let (mut a, mut b) = (Vec::with_capacity(rank), Vec::with_capacity(rank));
    let (mut cosines, mut sines) = (Vec::with_capacity(rank), Vec::with_capacity(rank));
    for (dst, &src) in order.iter().enumerate() {
        let w = eig.eigenvectors.column(src);
        let c = (top * w).norm();
        let s = (bottom * w).norm();
        // x = V_r Sigma_r^{-1} w, so [H; G] x = basis w.
        let mut x = nalgebra::DVector::<f64>::zeros(n_t);
        for (k, &idx) in kept.iter().enumerate() {
            let coeff = w[k] / svd.singular_values[idx];
            for row in 0..n_t {
                x[row] += coeff * v_t[(idx, row)];
            }
        }
        let norm = x.norm();
        directions.column_mut(dst).copy_from(&(x / norm));
        a.push(c * c / (norm * norm));
        b.push(s * s / (norm * norm));
        cosines.push(c);
        sines.push(s);
    }

    Gsvd {
        directions,
        gains: SubchannelGains { a, b },
        cosines,
        sines,
    }
}

/// Subchannel gains of the GSVD of `(H, G)`; null directions of the stacked
/// channel are dropped.
pub fn gsvd_subchannels(ch: &ChannelPair) -> SubchannelGains {
    gsvd(ch).gains
}

const MU_FLOOR: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Stationary power on one subchannel for water level `mu`: the positive
/// root of `ab p^2 + (a+b) p + 1 - (a-b)/mu = 0`, or zero.
fn subchannel_power(a: f64, b: f64, mu: f64) -> f64 {
    if a <= b {
        return 0.0;
    }
    let neg_c = (a - b) / mu - 1.0;
    if neg_c <= 0.0 {
        return 0.0;
    }
    let sum = a + b;
    let disc = sum * sum + 4.0 * a * b * neg_c;
    // Rationalised root, stable as ab -> 0.
    2.0 * neg_c / (sum + disc.sqrt())
}

fn total_power(gains: &SubchannelGains, mu: f64) -> f64 {
    gains
        .a
        .iter()
        .zip(&gains.b)
        .map(|(&a, &b)| subchannel_power(a, b, mu))
        .sum()
}

/// Maximises `sum_i 1/2 log2((1 + a_i p_i) / (1 + b_i p_i))` subject to
/// `sum p_i <= power`, `p_i >= 0`.
///
/// Only subchannels with `a_i > b_i` receive power. The water level is found
/// by geometric bisection on `[1e-12, max(a_i - b_i)]` until the allocation
/// is within `tol_power` below the budget.
pub fn secrecy_waterfill(gains: &SubchannelGains, power: f64, tol_power: f64) -> Result<Vec<f64>> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::contract(format!("power budget must be positive, got {power}")));
    }
    if !(tol_power > 0.0) {
        return Err(Error::contract("water-filling tolerance must be positive"));
    }
    let n = gains.len();
    let max_gap = gains
        .a
        .iter()
        .zip(&gains.b)
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    if max_gap <= 0.0 {
        return Ok(vec![0.0; n]);
    }

    let allocate = |mu: f64| -> Vec<f64> {
        gains
            .a
            .iter()
            .zip(&gains.b)
            .map(|(&a, &b)| subchannel_power(a, b, mu))
            .collect()
    };

    let (mut lo, mut hi) = (MU_FLOOR.min(max_gap), max_gap);
    if total_power(gains, lo) <= power {
        // Every gainful subchannel saturates below the budget.
        return Ok(allocate(lo));
    }
    // Invariant: total(lo) > power >= total(hi).
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let used = total_power(gains, mid);
        if used > power {
            lo = mid;
        } else {
            hi = mid;
            if power - used <= tol_power {
                break;
            }
        }
    }
    Ok(allocate(hi))
}

/// GSVD precoding: water-filled powers along the GSVD directions, mapped
/// back into a covariance `Q = sum_i p_i x_i x_i^T`.
pub fn gsvd_precode(ch: &ChannelPair, power: f64, cfg: &SolverConfig) -> Result<(Covariance, f64)> {
    let dec = gsvd(ch);
    let p = secrecy_waterfill(&dec.gains, power, cfg.tol_power)?;
    let n_t = ch.n_t();
    let mut q = DMatrix::zeros(n_t, n_t);
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            let x = dec.directions.column(i);
            q += pi * x * x.transpose();
        }
    }
    let q = 0.5 * (&q + q.transpose());
    let cov = project_feasible(&q, power)?;
    let rate = secrecy_rate(ch, &cov)?;
    Ok((cov, rate))
}
