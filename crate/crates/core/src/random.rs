//! Seeded random instance generators for property tests and benchmarks.
//!
//! All generators draw from a [`ChaCha8Rng`], so a given seed reproduces the
//! same instances on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::interconnect::SecondOrderMech;
use crate::linalg::Mat;
use crate::linear::LinearIohd;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn skew<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let g = normal_matrix(rng, n, n);
    (&g - g.transpose()) * 0.5
}

/// Random PSD matrix `F F^T / n` (full rank with probability one).
pub fn psd<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let f = normal_matrix(rng, n, n);
    &f * f.transpose() / n as f64
}

/// PSD matrix of the given rank.
pub fn psd_with_rank<R: Rng>(rng: &mut R, n: usize, rank: usize) -> Mat {
    let f = normal_matrix(rng, n, rank);
    &f * f.transpose() / n.max(1) as f64
}

pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> Mat {
    normal_matrix(rng, n, n).qr().q()
}

/// Symmetric matrix `U diag(s) U^T` with `|s_i|` uniform in `[lo, hi]`;
/// eigenvalue signs are random unless `positive` is set.
pub fn symmetric_with_spectrum<R: Rng>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
    positive: bool,
) -> Mat {
    let u = orthogonal(rng, n);
    let s = nalgebra::DVector::from_fn(n, |_, _| {
        let mag = rng.random_range(lo..=hi);
        if positive || rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    });
    &u * Mat::from_diagonal(&s) * u.transpose()
}

/// Random valid linear IOHD model with zero feedthrough. `q_positive` selects
/// a positive definite Hamiltonian weight; otherwise `Q` is symmetric invertible
/// with random-sign spectrum.
pub fn linear_iohd<R: Rng>(rng: &mut R, n: usize, m: usize, q_positive: bool) -> LinearIohd {
    let j = skew(rng, n);
    let r = psd(rng, n);
    let q = symmetric_with_spectrum(rng, n, 0.5, 2.0, q_positive);
    let c = normal_matrix(rng, m, n);
    LinearIohd::new(j, r, q, c, Mat::zeros(m, m)).expect("generated dimensions are conformable")
}

/// Random positive-definite-Q IOHD model with a given output map scale.
pub fn linear_iohd_scaled<R: Rng>(rng: &mut R, n: usize, m: usize, c_scale: f64) -> LinearIohd {
    let j = skew(rng, n);
    let r = psd(rng, n);
    let q = symmetric_with_spectrum(rng, n, 0.5, 2.0, true);
    let c = normal_matrix(rng, m, n) * c_scale;
    LinearIohd::new(j, r, q, c, Mat::zeros(m, m)).expect("generated dimensions are conformable")
}

/// Random mechanical system with `M, K` positive definite, PSD damping
/// (zero when `damped` is false) and an `m x dof` port map.
pub fn second_order<R: Rng>(rng: &mut R, dof: usize, m: usize, damped: bool) -> SecondOrderMech {
    let mass = symmetric_with_spectrum(rng, dof, 0.5, 2.0, true);
    let stiffness = symmetric_with_spectrum(rng, dof, 0.5, 2.0, true);
    let damping = if damped {
        psd(rng, dof)
    } else {
        Mat::zeros(dof, dof)
    };
    let l = normal_matrix(rng, m, dof);
    SecondOrderMech::new(mass, damping, stiffness, l).expect("generated dimensions are conformable")
}
