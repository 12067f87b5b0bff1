//! Linear IOHD models `x' = (J - R)(Q x - C^T u), y = C x + D u`.
//!
//! Covers validation, conversion to and from plain state-space form,
//! certificate search for `B = -A P C^T, P A^T + A P <= 0`, the dc-gain
//! identity and a frequency-sampling negative-imaginary oracle.
//!
//! Certificate answers are conditional on minimality of the realization,
//! which is not verified here; [`minimality`] is offered as a diagnostic.

use std::fmt;
use std::ops::Range;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IohdError, Result};
use crate::linalg::{
    self, asymmetry, condition_number, ensure_finite, ensure_square, inverse_checked,
    lyapunov_check, norm_inf, sym_skew_split, Mat, Tolerances, CONDITION_CAP,
};

/// A named sub-block of an interconnected model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub states: Range<usize>,
    pub ports: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearIohd {
    j: Mat,
    r: Mat,
    q: Mat,
    c: Mat,
    d: Mat,
    components: Vec<Component>,
}

impl LinearIohd {
    /// Assembles a model after checking conformability and finiteness. The
    /// structural invariants are checked separately by [`LinearIohd::validate`].
    pub fn new(j: Mat, r: Mat, q: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = j.nrows();
        for (name, m) in [("J", &j), ("R", &r), ("Q", &q)] {
            if m.shape() != (n, n) {
                return Err(IohdError::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if c.ncols() != n {
            return Err(IohdError::Dimension(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        let m = c.nrows();
        if d.shape() != (m, m) {
            return Err(IohdError::Dimension(format!(
                "D is {}x{}, expected {m}x{m}",
                d.nrows(),
                d.ncols()
            )));
        }
        for (name, mat) in [("J", &j), ("R", &r), ("Q", &q), ("C", &c), ("D", &d)] {
            ensure_finite(mat, name)?;
        }
        Ok(Self {
            j,
            r,
            q,
            c,
            d,
            components: Vec::new(),
        })
    }

    pub fn with_components(mut self, components: Vec<Component>) -> Self {
        self.components = components;
        self
    }

    pub fn with_name(self, name: impl Into<String>) -> Self {
        let (n, m) = (self.n(), self.m());
        self.with_components(vec![Component {
            name: name.into(),
            states: 0..n,
            ports: 0..m,
        }])
    }

    pub fn j(&self) -> &Mat {
        &self.j
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn q(&self) -> &Mat {
        &self.q
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn components(&self) -> &[Component] {
        &self.components
    }
    pub fn n(&self) -> usize {
        self.j.nrows()
    }
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn has_zero_feedthrough(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    /// Checks `J = -J^T`, `R = R^T >= 0`, `Q = Q^T` and `D = D^T`, collecting
    /// every violation rather than stopping at the first.
    pub fn validate(&self, tol: &Tolerances) -> Result<ValidationReport> {
        let j_skew_residual = norm_inf(&(&self.j + self.j.transpose()));
        let r_sym_residual = asymmetry(&self.r);
        let q_sym_residual = asymmetry(&self.q);
        let d_sym_residual = asymmetry(&self.d);
        let r_min_eig = min_eig_or_zero(&self.r);
        let q_min_eig = min_eig_or_zero(&self.q);

        let mut violations = Vec::new();
        let mut flag =
            |invariant: &'static str, magnitude: f64, threshold: f64, message: String| {
                if magnitude > threshold {
                    violations.push(Violation {
                        invariant,
                        magnitude,
                        message,
                    });
                }
            };
        flag(
            "J skew",
            j_skew_residual,
            tol.sym_threshold(&self.j),
            format!("J not skew-symmetric, |J + J^T| = {j_skew_residual:.3e}"),
        );
        flag(
            "R symmetric",
            r_sym_residual,
            tol.sym_threshold(&self.r),
            format!("R not symmetric, |R - R^T| = {r_sym_residual:.3e}"),
        );
        flag(
            "R PSD",
            -r_min_eig,
            tol.psd_threshold(norm_inf(&self.r)),
            format!("R not PSD, lambda_min = {r_min_eig}"),
        );
        flag(
            "Q symmetric",
            q_sym_residual,
            tol.sym_threshold(&self.q),
            format!("Q not symmetric, |Q - Q^T| = {q_sym_residual:.3e}"),
        );
        flag(
            "D symmetric",
            d_sym_residual,
            tol.sym_threshold(&self.d),
            format!("D not symmetric, |D - D^T| = {d_sym_residual:.3e}"),
        );

        let report = ValidationReport {
            j_skew_residual,
            r_sym_residual,
            r_min_eig,
            q_sym_residual,
            d_sym_residual,
            q_min_eig,
            violations,
        };
        if report.is_valid() {
            Ok(report)
        } else {
            Err(IohdError::Validation(report))
        }
    }

    /// `A = (J - R) Q`, `B = -(J - R) C^T`.
    pub fn to_state_space(&self) -> StateSpace {
        let jr = &self.j - &self.r;
        StateSpace {
            a: &jr * &self.q,
            b: -(&jr * self.c.transpose()),
            c: self.c.clone(),
            d: self.d.clone(),
        }
    }

    /// Recovers `(J, R)` from a state-space model and a Hamiltonian weight `Q`
    /// through `A Q^{-1} = J - R`, with `R = -sym(A Q^{-1})`.
    pub fn from_state_space(ss: &StateSpace, q: &Mat, tol: &Tolerances) -> Result<Self> {
        linalg::ensure_symmetric(q, "Q", tol)?;
        linalg::ensure_symmetric(&ss.d, "D", tol)?;
        if q.nrows() != ss.n() {
            return Err(IohdError::Dimension(format!(
                "Q is {k}x{k} but the state dimension is {n}",
                k = q.nrows(),
                n = ss.n()
            )));
        }
        let p = inverse_checked(q, "Q")?;
        let ap = &ss.a * &p;
        let (sym, skew) = sym_skew_split(&ap)?;
        let r = -sym;
        let psd = linalg::is_psd(&r, tol)?;
        if !psd.holds {
            return Err(IohdError::NotIohd {
                r_min_eig: psd.min_eig,
            });
        }
        let residual = norm_inf(&(&ss.b + &ap * ss.c.transpose()));
        if residual > tol.eq_threshold(norm_inf(&ss.b)) {
            return Err(IohdError::IncompatibleInput { residual });
        }
        Self::new(skew, r, q.clone(), ss.c.clone(), ss.d.clone())
    }

    /// dc-gain `C Q^{-1} C^T`, cross-checked against `-C A^{-1} B`.
    pub fn dc_gain(&self, tol: &Tolerances) -> Result<Mat> {
        if !self.has_zero_feedthrough() {
            return Err(IohdError::Precondition("dc-gain requires D = 0".into()));
        }
        let ss = self.to_state_space();
        let a_inv = inverse_checked(&ss.a, "A = (J - R) Q")?;
        let q_inv = inverse_checked(&self.q, "Q")?;
        let hamiltonian_form = &self.c * q_inv * self.c.transpose();
        let transfer_form = -(&ss.c * a_inv * &ss.b);
        let residual = norm_inf(&(&hamiltonian_form - &transfer_form));
        if residual > tol.eq_threshold(norm_inf(&hamiltonian_form)) {
            return Err(IohdError::Internal(format!(
                "dc-gain formulas disagree by {residual:.3e}"
            )));
        }
        Ok(hamiltonian_form)
    }
}

fn min_eig_or_zero(m: &Mat) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        linalg::sym_eigenvalues(m)[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    pub magnitude: f64,
    pub message: String,
}

/// Residuals of every structural invariant, plus the violations found.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub j_skew_residual: f64,
    pub r_sym_residual: f64,
    pub r_min_eig: f64,
    pub q_sym_residual: f64,
    pub d_sym_residual: f64,
    /// Informational: `Q > 0` is not required for IOHD.
    pub q_min_eig: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all invariants hold");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        let m = b.ncols();
        if b.nrows() != n || c.shape() != (m, n) || d.shape() != (m, m) {
            return Err(IohdError::Dimension(format!(
                "non-conformable state space: A {n}x{n}, B {}x{}, C {}x{}, D {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            ensure_finite(mat, name)?;
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

/// Certificate `P` (a candidate for `Q^{-1}`) found by [`find_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub p: Mat,
    /// `-lambda_max(P A^T + A P)`.
    pub lyapunov_margin: f64,
    /// `|B + A P C^T|_inf`.
    pub equality_residual: f64,
    /// `P > 0`: negative-imaginary grade rather than IOHD grade.
    pub positive_definite: bool,
    /// Family members evaluated before this one was accepted (1 = particular solution).
    pub trials: usize,
}

/// Searches the affine family of symmetric `P` solving `B = -A P C^T` for a
/// member that is invertible and satisfies `P A^T + A P <= 0`.
///
/// The least-squares particular solution is tried first, then up to
/// `search_budget` seeded random members `P0 + sum_k a_k N_k` over the
/// nullspace basis `N_k`. `Ok(None)` means the budget was exhausted and is
/// inconclusive; an inconsistent equality is reported as
/// [`IohdError::NoSymmetricSolution`], which is a disproof.
pub fn find_certificate(
    ss: &StateSpace,
    tol: &Tolerances,
    search_budget: usize,
    seed: u64,
) -> Result<Option<Certificate>> {
    linalg::ensure_symmetric(&ss.d, "D", tol)?;
    let family = CertificateFamily::solve(ss, tol)?;
    let mut rng = crate::random::rng(seed);
    let base_scale = linalg::max_abs(&family.particular).max(1.0);

    let mut trials = 0;
    let mut candidate = family.particular.clone();
    loop {
        trials += 1;
        if let Some(cert) = accept(ss, &candidate, tol, trials)? {
            return Ok(Some(cert));
        }
        if trials > search_budget || family.nullspace.is_empty() {
            return Ok(None);
        }
        let scale = base_scale * 10f64.powf(rng.random_range(-2.0..=2.0));
        candidate = family.particular.clone();
        for basis in &family.nullspace {
            let coeff: f64 = rng.sample(StandardNormal);
            candidate += basis * (coeff * scale);
        }
    }
}

fn accept(
    ss: &StateSpace,
    p: &Mat,
    tol: &Tolerances,
    trials: usize,
) -> Result<Option<Certificate>> {
    let condition = condition_number(p);
    if condition.is_nan() || condition > CONDITION_CAP {
        return Ok(None);
    }
    let lyap = lyapunov_check(&ss.a, p, tol)?;
    if !lyap.holds {
        return Ok(None);
    }
    let equality_residual = norm_inf(&(&ss.b + &ss.a * p * ss.c.transpose()));
    let positive_definite = linalg::is_pd(p, tol)?.holds;
    Ok(Some(Certificate {
        p: p.clone(),
        lyapunov_margin: -lyap.lambda_max,
        equality_residual,
        positive_definite,
        trials,
    }))
}

/// Affine solution set `{P0 + span(N_k)}` of `A P C^T = -B` over symmetric `P`.
struct CertificateFamily {
    particular: Mat,
    nullspace: Vec<Mat>,
}

impl CertificateFamily {
    fn solve(ss: &StateSpace, tol: &Tolerances) -> Result<Self> {
        let n = ss.n();
        let m = ss.m();
        let basis = symmetric_basis(n);
        let unknowns = basis.len();
        let equations = n * m;

        // Zero rows pad the system so the SVD returns a full right basis.
        let rows = equations.max(unknowns);
        let mut lin = DMatrix::<f64>::zeros(rows, unknowns);
        for (k, e) in basis.iter().enumerate() {
            let image = &ss.a * e * ss.c.transpose();
            for (idx, v) in image.iter().enumerate() {
                lin[(idx, k)] = *v;
            }
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
        for (idx, v) in ss.b.iter().enumerate() {
            rhs[idx] = -v;
        }

        let svd = lin.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let cutoff = 1e-10 * sigma_max.max(f64::MIN_POSITIVE);
        let x = svd
            .solve(&rhs, cutoff)
            .map_err(|e| IohdError::Internal(format!("least-squares solve failed: {e}")))?;

        let particular = assemble(&basis, x.as_slice());
        let residual = norm_inf(&(&ss.b + &ss.a * &particular * ss.c.transpose()));
        let scale = norm_inf(&ss.b).max(norm_inf(&ss.a) * norm_inf(&particular) * norm_inf(&ss.c));
        if residual > tol.eq_threshold(scale) {
            return Err(IohdError::NoSymmetricSolution { residual });
        }

        let v_t = svd.v_t.expect("requested V^T");
        let nullspace = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= cutoff)
            .map(|(i, _)| {
                let coeffs: Vec<f64> = v_t.row(i).iter().copied().collect();
                assemble(&basis, &coeffs)
            })
            .collect();
        Ok(Self {
            particular,
            nullspace,
        })
    }
}

fn symmetric_basis(n: usize) -> Vec<Mat> {
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            basis.push(e);
        }
    }
    basis
}

fn assemble(basis: &[Mat], coeffs: &[f64]) -> Mat {
    let n = basis.first().map_or(0, |b| b.nrows());
    basis
        .iter()
        .zip(coeffs)
        .fold(Mat::zeros(n, n), |acc, (b, &c)| acc + b * c)
}

/// `n` log-spaced frequencies spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

/// 50 log-spaced points in `[1e-3, 1e3]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 50)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiFrequencyReport {
    pub passes: bool,
    /// Set when an eigenvalue of `A` lies strictly in the right half plane.
    pub unstable_eigenvalue: Option<Complex64>,
    /// Grid point with the smallest `lambda_min(H + H^*)`.
    pub worst_omega: Option<f64>,
    pub worst_lambda_min: Option<f64>,
}

/// Samples `H(jw) = jw C (jwI - A)^{-1} B` on the grid and checks that its
/// Hermitian part is PSD. Passing is evidence, not proof.
pub fn ni_frequency_check(
    ss: &StateSpace,
    omega_grid: &[f64],
    tol: &Tolerances,
) -> Result<NiFrequencyReport> {
    linalg::ensure_symmetric(&ss.d, "D", tol)?;
    if let Some(&bad) = omega_grid.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(IohdError::Precondition(format!(
            "frequency grid must hold positive finite values, got {bad}"
        )));
    }

    // Eigenvalue slack: defective eigenvalues on the imaginary axis are
    // perturbed by O(sqrt(eps)).
    let slack = tol.psd_tol.sqrt() * norm_inf(&ss.a).max(1.0);
    if ss.n() > 0 {
        let eigs = ss.a.complex_eigenvalues();
        if let Some(worst) = eigs.iter().copied().max_by(|x, y| x.re.total_cmp(&y.re)) {
            if worst.re > slack {
                return Ok(NiFrequencyReport {
                    passes: false,
                    unstable_eigenvalue: Some(Complex64::new(worst.re, worst.im)),
                    worst_omega: None,
                    worst_lambda_min: None,
                });
            }
        }
    }

    let n = ss.n();
    let a = ss.a.map(|v| Complex::new(v, 0.0));
    let b = ss.b.map(|v| Complex::new(v, 0.0));
    let c = ss.c.map(|v| Complex::new(v, 0.0));
    let mut passes = true;
    let mut worst: Option<(f64, f64)> = None;
    for &omega in omega_grid {
        let jw = Complex::new(0.0, omega);
        let resolvent = DMatrix::<Complex64>::identity(n, n) * jw - &a;
        let sv = resolvent.clone().svd(false, false).singular_values;
        let min_sv = if n == 0 { 1.0 } else { sv.min() };
        if n > 0 && !(min_sv > 0.0 && sv.max() / min_sv <= CONDITION_CAP) {
            return Err(IohdError::Grid { omega });
        }
        let x = resolvent.lu().solve(&b).ok_or(IohdError::Grid { omega })?;
        let h = (&c * x) * jw;
        let herm = &h + h.adjoint();
        let lambda_min = if herm.is_empty() {
            0.0
        } else {
            SymmetricEigen::new(herm).eigenvalues.min()
        };
        let h_norm = h
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        if lambda_min < -tol.psd_threshold(h_norm) {
            passes = false;
        }
        if worst.is_none_or(|(_, l)| lambda_min < l) {
            worst = Some((omega, lambda_min));
        }
    }
    Ok(NiFrequencyReport {
        passes,
        unstable_eigenvalue: None,
        worst_omega: worst.map(|w| w.0),
        worst_lambda_min: worst.map(|w| w.1),
    })
}

/// Kalman rank diagnostic; not a precondition of any analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Minimality {
    pub controllable: bool,
    pub observable: bool,
}

pub fn minimality(ss: &StateSpace) -> Minimality {
    let n = ss.n();
    let m = ss.m();
    let mut ctrb = Mat::zeros(n, n * m);
    let mut obsv = Mat::zeros(n * m, n);
    let mut ab = ss.b.clone();
    let mut ca = ss.c.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&ab);
        obsv.view_mut((k * m, 0), (m, n)).copy_from(&ca);
        ab = &ss.a * ab;
        ca *= &ss.a;
    }
    Minimality {
        controllable: linalg::rank(&ctrb, 1e-10) == n,
        observable: linalg::rank(&obsv, 1e-10) == n,
    }
}
