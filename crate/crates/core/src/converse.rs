//! Recovering component certificates from an interconnection certificate.
//!
//! Given two plain linear systems `(A_i, B_i, C_i)` whose positive feedback
//! interconnection
//!
//! ```text
//! A~ = [[A1, B1 C2], [B2 C1, A2]],  B~ = diag(B1, B2),  C~ = diag(C1, C2)
//! ```
//!
//! admits a symmetric invertible `P` with `P A~^T + A~ P <= 0` and
//! `B~ = -A~ P C~^T`, the components are IOHD with
//!
//! ```text
//! P1 = P11 - P12 C2^T (C2 P22 C2^T)^{-1} C2 P12^T
//! P2 = P22 - P12^T C1^T (C1 P11 C1^T)^{-1} C1 P12
//! ```
//!
//! Both external inputs `e1, e2` must be present; with only one of them the
//! converse does not hold, so [`InterconnectionData`] always carries both
//! input blocks. Minimality of the interconnection is assumed, not checked.

use crate::error::{IohdError, Result};
use crate::interconnect::positive_feedback;
use crate::linalg::{
    self, block_diag, ensure_finite, inverse_checked, norm_inf, schur_complement, Mat, Tolerances,
};
use crate::linear::{find_certificate, Certificate, Component, LinearIohd, StateSpace};

/// Singular values below this fraction of the largest count as zero in the rank test.
pub const RANK_TOL: f64 = 1e-8;

/// Component blocks of a positive feedback interconnection.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub a1: Mat,
    pub b1: Mat,
    pub c1: Mat,
    pub a2: Mat,
    pub b2: Mat,
    pub c2: Mat,
}

impl Components {
    pub fn new(a1: Mat, b1: Mat, c1: Mat, a2: Mat, b2: Mat, c2: Mat) -> Result<Self> {
        let out = Self {
            a1,
            b1,
            c1,
            a2,
            b2,
            c2,
        };
        for (name, m) in out.named() {
            ensure_finite(m, name)?;
        }
        let (n1, n2, m) = (out.a1.nrows(), out.a2.nrows(), out.b1.ncols());
        let expect = [
            ("A1", &out.a1, (n1, n1)),
            ("B1", &out.b1, (n1, m)),
            ("C1", &out.c1, (m, n1)),
            ("A2", &out.a2, (n2, n2)),
            ("B2", &out.b2, (n2, m)),
            ("C2", &out.c2, (m, n2)),
        ];
        for (name, mat, shape) in expect {
            if mat.shape() != shape {
                return Err(IohdError::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    mat.nrows(),
                    mat.ncols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        if m == 0 {
            return Err(IohdError::Precondition(
                "both external input blocks must be present".into(),
            ));
        }
        Ok(out)
    }

    /// Splits an interconnected `(A~, B~, C~)` at state index `n1` and port index `m`,
    /// checking that the off-diagonal blocks of `A~` are `B1 C2` and `B2 C1`.
    pub fn from_interconnected(
        ss: &StateSpace,
        n1: usize,
        m: usize,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = ss.n();
        if n1 > n || ss.m() != 2 * m {
            return Err(IohdError::Dimension(format!(
                "block annotation n1 = {n1}, m = {m} does not fit an interconnection with {n} states and {} ports",
                ss.m()
            )));
        }
        let n2 = n - n1;
        let a = ss.a();
        let b = ss.b();
        let c = ss.c();
        let off_diag = [
            b.view((0, m), (n1, m)).amax(),
            b.view((n1, 0), (n2, m)).amax(),
            c.view((0, n1), (m, n2)).amax(),
            c.view((m, 0), (m, n1)).amax(),
        ];
        if off_diag.iter().any(|&v| v != 0.0) {
            return Err(IohdError::Precondition(
                "B and C of an interconnection must be block diagonal".into(),
            ));
        }
        let comps = Self::new(
            a.view((0, 0), (n1, n1)).into_owned(),
            b.view((0, 0), (n1, m)).into_owned(),
            c.view((0, 0), (m, n1)).into_owned(),
            a.view((n1, n1), (n2, n2)).into_owned(),
            b.view((n1, m), (n2, m)).into_owned(),
            c.view((m, n1), (m, n2)).into_owned(),
        )?;
        let residual = norm_inf(&(comps.interconnected().a() - a));
        if residual > tol.eq_threshold(norm_inf(a)) {
            return Err(IohdError::Precondition(format!(
                "off-diagonal blocks of A are not B1 C2 / B2 C1 (residual {residual:.3e})"
            )));
        }
        Ok(comps)
    }

    fn named(&self) -> [(&'static str, &Mat); 6] {
        [
            ("A1", &self.a1),
            ("B1", &self.b1),
            ("C1", &self.c1),
            ("A2", &self.a2),
            ("B2", &self.b2),
            ("C2", &self.c2),
        ]
    }

    pub fn n1(&self) -> usize {
        self.a1.nrows()
    }
    pub fn n2(&self) -> usize {
        self.a2.nrows()
    }
    pub fn m(&self) -> usize {
        self.b1.ncols()
    }

    /// Closed-loop `(A~, B~, C~, 0)` under `u1 = y2 + e1, u2 = y1 + e2`.
    pub fn interconnected(&self) -> StateSpace {
        let (n1, n2) = (self.n1(), self.n2());
        let mut a = block_diag(&[&self.a1, &self.a2]);
        a.view_mut((0, n1), (n1, n2))
            .copy_from(&(&self.b1 * &self.c2));
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&self.b2 * &self.c1));
        let b = block_diag(&[&self.b1, &self.b2]);
        let c = block_diag(&[&self.c1, &self.c2]);
        let p = 2 * self.m();
        StateSpace::new(a, b, c, Mat::zeros(p, p)).expect("blocks are conformable by construction")
    }
}

/// Interconnection blocks together with a certificate `P` for the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionData {
    parts: Components,
    p: Mat,
}

impl InterconnectionData {
    pub fn new(parts: Components, p: Mat, tol: &Tolerances) -> Result<Self> {
        for (name, c) in [("C1", &parts.c1), ("C2", &parts.c2)] {
            if linalg::rank(c, RANK_TOL) != c.nrows() {
                return Err(IohdError::Precondition(format!(
                    "{name} must have full row rank"
                )));
            }
        }
        let n = parts.n1() + parts.n2();
        if p.shape() != (n, n) {
            return Err(IohdError::Dimension(format!(
                "P is {}x{}, expected {n}x{n}",
                p.nrows(),
                p.ncols()
            )));
        }
        ensure_finite(&p, "P")?;
        linalg::ensure_symmetric(&p, "P", tol)?;
        let condition = linalg::condition_number(&p);
        if condition.is_nan() || condition > linalg::CONDITION_CAP {
            return Err(IohdError::Singular {
                what: "P".into(),
                condition,
            });
        }
        Ok(Self { parts, p })
    }

    pub fn parts(&self) -> &Components {
        &self.parts
    }
    pub fn p(&self) -> &Mat {
        &self.p
    }

    fn blocks(&self) -> (Mat, Mat, Mat) {
        let (n1, n2) = (self.parts.n1(), self.parts.n2());
        (
            self.p.view((0, 0), (n1, n1)).into_owned(),
            self.p.view((0, n1), (n1, n2)).into_owned(),
            self.p.view((n1, n1), (n2, n2)).into_owned(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateResidualReport {
    /// `lambda_max(P A~^T + A~ P)`.
    pub lyapunov_lambda_max: f64,
    /// `|B~ + A~ P C~^T|_inf`.
    pub equality_residual: f64,
    pub lyapunov_ok: bool,
    pub equality_ok: bool,
}

impl CertificateResidualReport {
    pub fn passes(&self) -> bool {
        self.lyapunov_ok && self.equality_ok
    }
}

pub fn check_interconnection_certificate(
    data: &InterconnectionData,
    tol: &Tolerances,
) -> Result<CertificateResidualReport> {
    let ss = data.parts.interconnected();
    let lyap = linalg::lyapunov_check(ss.a(), &data.p, tol)?;
    let equality_residual = norm_inf(&(ss.b() + ss.a() * &data.p * ss.c().transpose()));
    Ok(CertificateResidualReport {
        lyapunov_lambda_max: lyap.lambda_max,
        equality_residual,
        lyapunov_ok: lyap.holds,
        equality_ok: equality_residual <= tol.eq_threshold(norm_inf(ss.b())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    /// Certificate symmetric invertible.
    Iohd,
    /// Certificate positive definite.
    NegativeImaginary,
}

/// One recovered component `A_i P_i = J_i - R_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredComponent {
    pub p: Mat,
    pub j: Mat,
    pub r: Mat,
    pub r_min_eig: f64,
    pub p_min_eig: f64,
    /// `|B_i + A_i P_i C_i^T|_inf`.
    pub equality_residual: f64,
    /// `lambda_max(P_i A_i^T + A_i P_i)`.
    pub lyapunov_lambda_max: f64,
    pub grade: Grade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub first: RecoveredComponent,
    pub second: RecoveredComponent,
    /// Residual norms of the expanded certificate equations, in order:
    /// diagonal input blocks, off-diagonal blocks, the solved `B_i`, and the
    /// substituted `B_i = -A_i P_i C_i^T`.
    pub residuals: Vec<(String, f64)>,
}

/// Splits an interconnection certificate into component certificates.
pub fn decompose(data: &InterconnectionData, tol: &Tolerances) -> Result<DecompositionResult> {
    let check = check_interconnection_certificate(data, tol)?;
    if !check.passes() {
        return Err(IohdError::Inconsistent {
            residuals: vec![
                ("lyapunov lambda_max".into(), check.lyapunov_lambda_max),
                ("equality".into(), check.equality_residual),
            ],
        });
    }
    let c = &data.parts;
    let (p11, p12, p22) = data.blocks();
    let n1 = c.n1();

    let w2 = &c.c2 * &p22 * c.c2.transpose();
    let w1 = &c.c1 * &p11 * c.c1.transpose();
    let w2_inv = inverse_checked(&w2, "C2 P22 C2^T")?;
    let w1_inv = inverse_checked(&w1, "C1 P11 C1^T")?;

    let p1 = schur_complement(&data.p, n1, &c.c2, tol)?;
    let swapped = swap_blocks(&data.p, n1);
    let p2 = schur_complement(&swapped, c.n2(), &c.c1, tol)?;

    let residuals = vec![
        (
            "input block 1".to_string(),
            norm_inf(
                &(&c.b1
                    + &c.a1 * &p11 * c.c1.transpose()
                    + &c.b1 * &c.c2 * p12.transpose() * c.c1.transpose()),
            ),
        ),
        (
            "input block 2".to_string(),
            norm_inf(
                &(&c.b2
                    + &c.a2 * &p22 * c.c2.transpose()
                    + &c.b2 * &c.c1 * &p12 * c.c2.transpose()),
            ),
        ),
        (
            "off-diagonal block 1".to_string(),
            norm_inf(&(&c.a1 * &p12 * c.c2.transpose() + &c.b1 * &c.c2 * &p22 * c.c2.transpose())),
        ),
        (
            "off-diagonal block 2".to_string(),
            norm_inf(
                &(&c.a2 * p12.transpose() * c.c1.transpose()
                    + &c.b2 * &c.c1 * &p11 * c.c1.transpose()),
            ),
        ),
        (
            "solved B1".to_string(),
            norm_inf(&(&c.b1 + &c.a1 * &p12 * c.c2.transpose() * &w2_inv)),
        ),
        (
            "solved B2".to_string(),
            norm_inf(&(&c.b2 + &c.a2 * p12.transpose() * c.c1.transpose() * &w1_inv)),
        ),
        (
            "substituted B1".to_string(),
            norm_inf(&(&c.b1 + &c.a1 * &p1 * c.c1.transpose())),
        ),
        (
            "substituted B2".to_string(),
            norm_inf(&(&c.b2 + &c.a2 * &p2 * c.c2.transpose())),
        ),
    ];

    let p_pd = linalg::is_pd(&data.p, tol)?.holds;
    let first = recover(&c.a1, &c.b1, &c.c1, p1, p_pd, tol)?;
    let second = recover(&c.a2, &c.b2, &c.c2, p2, p_pd, tol)?;

    let scale = norm_inf(&c.b1).max(norm_inf(&c.b2));
    let eq_bad = residuals.iter().any(|(_, r)| *r > tol.eq_threshold(scale));
    let lyap_bad = [&first, &second].iter().any(|comp| {
        comp.lyapunov_lambda_max
            > tol.psd_threshold(norm_inf(&comp.p) * norm_inf(&c.a1).max(norm_inf(&c.a2)))
    });
    let pd_bad = p_pd
        && [&first, &second]
            .iter()
            .any(|comp| comp.p_min_eig <= tol.psd_threshold(norm_inf(&comp.p)));
    if eq_bad || lyap_bad || pd_bad {
        let mut all = residuals;
        all.push(("lyapunov lambda_max 1".into(), first.lyapunov_lambda_max));
        all.push(("lyapunov lambda_max 2".into(), second.lyapunov_lambda_max));
        all.push(("P1 lambda_min".into(), first.p_min_eig));
        all.push(("P2 lambda_min".into(), second.p_min_eig));
        return Err(IohdError::Inconsistent { residuals: all });
    }
    Ok(DecompositionResult {
        first,
        second,
        residuals,
    })
}

/// Reorders `[[P11, P12], [P21, P22]]` to `[[P22, P21], [P12, P11]]`.
fn swap_blocks(p: &Mat, n1: usize) -> Mat {
    let n = p.nrows();
    let n2 = n - n1;
    let mut out = Mat::zeros(n, n);
    out.view_mut((0, 0), (n2, n2))
        .copy_from(&p.view((n1, n1), (n2, n2)));
    out.view_mut((0, n2), (n2, n1))
        .copy_from(&p.view((n1, 0), (n2, n1)));
    out.view_mut((n2, 0), (n1, n2))
        .copy_from(&p.view((0, n1), (n1, n2)));
    out.view_mut((n2, n2), (n1, n1))
        .copy_from(&p.view((0, 0), (n1, n1)));
    out
}

fn recover(
    a: &Mat,
    b: &Mat,
    c: &Mat,
    p: Mat,
    p_pd: bool,
    tol: &Tolerances,
) -> Result<RecoveredComponent> {
    let ap = a * &p;
    let (sym, skew) = linalg::sym_skew_split(&ap)?;
    let r = -sym;
    let r_min_eig = linalg::min_eig_sym(&r, tol)?;
    let p_min_eig = linalg::min_eig_sym(&p, tol)?;
    let lyapunov_lambda_max = linalg::lyapunov_check(a, &p, tol)?.lambda_max;
    let equality_residual = norm_inf(&(b + &ap * c.transpose()));
    Ok(RecoveredComponent {
        p,
        j: skew,
        r,
        r_min_eig,
        p_min_eig,
        equality_residual,
        lyapunov_lambda_max,
        grade: if p_pd {
            Grade::NegativeImaginary
        } else {
            Grade::Iohd
        },
    })
}

/// Re-expresses the interconnection with block-diagonal `J = diag(J1, J2)`,
/// `R = diag(R1, R2)` and all coupling in `Q_int`, verifying the dynamics are unchanged.
pub fn rediagonalize(
    data: &InterconnectionData,
    result: &DecompositionResult,
    tol: &Tolerances,
) -> Result<LinearIohd> {
    let c = &data.parts;
    let zero = Mat::zeros(c.m(), c.m());
    let s1 = LinearIohd::new(
        result.first.j.clone(),
        result.first.r.clone(),
        inverse_checked(&result.first.p, "P1")?,
        c.c1.clone(),
        zero.clone(),
    )?
    .with_name("sys1");
    let s2 = LinearIohd::new(
        result.second.j.clone(),
        result.second.r.clone(),
        inverse_checked(&result.second.p, "P2")?,
        c.c2.clone(),
        zero,
    )?
    .with_name("sys2");
    let model = positive_feedback(&s1, &s2)?;

    let original = c.interconnected();
    let rebuilt = model.to_state_space();
    let a_res = norm_inf(&(rebuilt.a() - original.a()));
    let b_res = norm_inf(&(rebuilt.b() - original.b()));
    if a_res > tol.eq_threshold(norm_inf(original.a()))
        || b_res > tol.eq_threshold(norm_inf(original.b()))
    {
        return Err(IohdError::Internal(format!(
            "rediagonalized dynamics differ: |dA| = {a_res:.3e}, |dB| = {b_res:.3e}"
        )));
    }
    Ok(model.with_components(vec![
        Component {
            name: "sys1".into(),
            states: 0..c.n1(),
            ports: 0..c.m(),
        },
        Component {
            name: "sys2".into(),
            states: c.n1()..c.n1() + c.n2(),
            ports: c.m()..2 * c.m(),
        },
    ]))
}

/// Scans the affine certificate family of the interconnected system.
/// `Err(NoSymmetricSolution)` is definitive; `Ok(None)` is inconclusive.
pub fn find_interconnection_certificate(
    parts: &Components,
    tol: &Tolerances,
    budget: usize,
    seed: u64,
) -> Result<Option<Certificate>> {
    find_certificate(&parts.interconnected(), tol, budget, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// Components of the scalar pair (J=0, R=1, Q=1) with C1 = 1, C2 = 0.5.
    fn scalar_parts() -> Components {
        Components::new(
            dmatrix![-1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![-1.0],
            dmatrix![0.5],
            dmatrix![0.5],
        )
        .unwrap()
    }

    fn scalar_p() -> Mat {
        dmatrix![4.0 / 3.0, 2.0 / 3.0; 2.0 / 3.0, 4.0 / 3.0]
    }

    #[test]
    fn interconnected_matrices() {
        let ss = scalar_parts().interconnected();
        assert_eq!(ss.a(), &dmatrix![-1.0, 0.5; 0.5, -1.0]);
        assert_eq!(ss.b(), &dmatrix![1.0, 0.0; 0.0, 0.5]);
        assert_eq!(ss.c(), &dmatrix![1.0, 0.0; 0.0, 0.5]);
    }

    #[test]
    fn scalar_certificate_passes() {
        let data = InterconnectionData::new(scalar_parts(), scalar_p(), &tol()).unwrap();
        let report = check_interconnection_certificate(&data, &tol()).unwrap();
        assert!(report.passes());
        assert!(report.equality_residual < 1e-15);
    }

    #[test]
    fn identity_certificate_fails_generic_instance() {
        let mut rng = crate::random::rng(1);
        let parts = Components::new(
            crate::random::normal_matrix(&mut rng, 3, 3),
            crate::random::normal_matrix(&mut rng, 3, 1),
            crate::random::normal_matrix(&mut rng, 1, 3),
            crate::random::normal_matrix(&mut rng, 2, 2),
            crate::random::normal_matrix(&mut rng, 2, 1),
            crate::random::normal_matrix(&mut rng, 1, 2),
        )
        .unwrap();
        let data = InterconnectionData::new(parts, Mat::identity(5, 5), &tol()).unwrap();
        let report = check_interconnection_certificate(&data, &tol()).unwrap();
        assert!(!report.equality_ok);
        assert!(report.equality_residual > 1e-3);
    }

    #[test]
    fn decompose_scalar_example() {
        let data = InterconnectionData::new(scalar_parts(), scalar_p(), &tol()).unwrap();
        let out = decompose(&data, &tol()).unwrap();
        assert_relative_eq!(out.first.p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.second.p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.first.r[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.second.r[(0, 0)], 1.0, epsilon = 1e-12);
        assert_eq!(out.first.j, dmatrix![0.0]);
        assert_eq!(out.first.grade, Grade::NegativeImaginary);
        assert_eq!(out.second.grade, Grade::NegativeImaginary);
        assert!(out.first.p_min_eig > 0.0 && out.second.p_min_eig > 0.0);
        assert_eq!(out.residuals.len(), 8);
    }

    #[test]
    fn decompose_without_coupling_returns_diagonal_blocks() {
        // P12 = 0 forces B_i = 0 and A_i P_ii C_i^T = 0
        let parts = Components::new(
            dmatrix![-1.0, 0.0; 0.0, 0.0],
            dmatrix![0.0; 0.0],
            dmatrix![0.0, 1.0],
            dmatrix![0.0],
            dmatrix![0.0],
            dmatrix![1.0],
        )
        .unwrap();
        let p = Mat::from_diagonal(&nalgebra::dvector![1.0, 1.0, 3.0]);
        let out = decompose(&InterconnectionData::new(parts, p, &tol()).unwrap(), &tol()).unwrap();
        assert_eq!(out.first.p, Mat::identity(2, 2));
        assert_eq!(out.second.p, dmatrix![3.0]);
    }

    #[test]
    fn decompose_rejects_inconsistent_certificate() {
        let data =
            InterconnectionData::new(scalar_parts(), dmatrix![1.0, 0.0; 0.0, 1.0], &tol()).unwrap();
        match decompose(&data, &tol()) {
            Err(IohdError::Inconsistent { residuals }) => {
                assert!(residuals.iter().any(|(_, r)| *r > 0.1))
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn rank_deficient_output_rejected() {
        let parts = Components::new(
            Mat::identity(2, 2) * -1.0,
            Mat::identity(2, 2),
            dmatrix![1.0, 1.0; 1.0, 1.0],
            Mat::identity(2, 2) * -1.0,
            Mat::identity(2, 2),
            Mat::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(
            InterconnectionData::new(parts, Mat::identity(4, 4), &tol()),
            Err(IohdError::Precondition(_))
        ));
    }

    #[test]
    fn rediagonalize_scalar_example() {
        let data = InterconnectionData::new(scalar_parts(), scalar_p(), &tol()).unwrap();
        let result = decompose(&data, &tol()).unwrap();
        let model = rediagonalize(&data, &result, &tol()).unwrap();
        assert!(norm_inf(model.j()) < 1e-14);
        assert!(norm_inf(&(model.r() - Mat::identity(2, 2))) < 1e-12);
        assert!(norm_inf(&(model.q() - dmatrix![1.0, -0.5; -0.5, 1.0])) < 1e-12);
        assert!(norm_inf(&(model.to_state_space().a() - dmatrix![-1.0, 0.5; 0.5, -1.0])) < 1e-12);
    }

    #[test]
    fn rediagonalize_block_diagonal_round_trip() {
        let s1 = LinearIohd::new(
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![2.0],
            dmatrix![1.0],
            dmatrix![0.0],
        )
        .unwrap();
        let s2 = LinearIohd::new(
            dmatrix![0.0],
            dmatrix![0.5],
            dmatrix![4.0],
            dmatrix![1.0],
            dmatrix![0.0],
        )
        .unwrap();
        let stored =
            positive_feedback(&s1.clone().with_name("sys1"), &s2.clone().with_name("sys2"))
                .unwrap();
        let ss1 = s1.to_state_space();
        let ss2 = s2.to_state_space();
        let parts = Components::new(
            ss1.a().clone(),
            ss1.b().clone(),
            ss1.c().clone(),
            ss2.a().clone(),
            ss2.b().clone(),
            ss2.c().clone(),
        )
        .unwrap();
        let p = inverse_checked(stored.q(), "Q_int").unwrap();
        let data = InterconnectionData::new(parts, p, &tol()).unwrap();
        let model = rediagonalize(&data, &decompose(&data, &tol()).unwrap(), &tol()).unwrap();
        assert!(norm_inf(&(model.q() - stored.q())) < 1e-12);
        assert!(norm_inf(&(model.r() - stored.r())) < 1e-12);
        assert_eq!(model.components(), stored.components());
    }

    #[test]
    fn family_scan_scalar_example() {
        let cert = find_interconnection_certificate(&scalar_parts(), &tol(), 100, 0)
            .unwrap()
            .unwrap();
        assert_eq!(cert.trials, 1);
        let data = InterconnectionData::new(scalar_parts(), cert.p, &tol()).unwrap();
        let out = decompose(&data, &tol()).unwrap();
        assert_relative_eq!(out.first.p[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn family_scan_rejects_expanding_loop() {
        let parts = Components::new(
            dmatrix![1.0],
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
            dmatrix![1.0],
        )
        .unwrap();
        assert_eq!(parts.interconnected().a(), &Mat::identity(2, 2));
        assert!(find_interconnection_certificate(&parts, &tol(), 100, 0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn split_from_interconnected() {
        let ss = scalar_parts().interconnected();
        let parts = Components::from_interconnected(&ss, 1, 1, &tol()).unwrap();
        assert_eq!(parts, scalar_parts());
        let bad = StateSpace::new(
            dmatrix![-1.0, 0.7; 0.5, -1.0],
            ss.b().clone(),
            ss.c().clone(),
            Mat::zeros(2, 2),
        )
        .unwrap();
        assert!(Components::from_interconnected(&bad, 1, 1, &tol()).is_err());
    }
}
