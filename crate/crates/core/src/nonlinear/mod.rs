//! Nonlinear IOHD systems
//!
//! ```text
//! x' = (J(x) - R(x)) (dH/dx(x) - dC^T/dx(x) u),   y = C(x)
//! ```
//!
//! with `J(x)` skew and `R(x)` symmetric PSD. Models are bundles of
//! user-supplied evaluators. Gradients are cross-checked against central
//! finite differences when a bundle is built, and the structure of `J` and `R`
//! is spot-checked at every evaluation point unless disabled.

pub mod catalog;
pub mod simulate;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IohdError, Result};
use crate::linalg::{self, block_diag, norm_inf, norm_one, Mat, Tolerances, Vector};

pub use simulate::{simulate, SimTrace};

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vector) -> Mat + Send + Sync>;

/// Number of seeded probe points used for finite-difference gradient checks.
pub const PROBE_POINTS: usize = 20;
/// Relative gate for the construction-time gradient checks.
pub const GRADIENT_GATE: f64 = 1e-4;
const PROBE_SEED: u64 = 0x10AD;

/// Evaluators making up a nonlinear IOHD model. All must be stateless.
#[derive(Clone)]
pub struct Evaluators {
    pub hamiltonian: ScalarFn,
    /// `dH/dx`, an `n`-vector.
    pub grad_h: VectorFn,
    /// Output map `C(x)`, an `m`-vector.
    pub output: VectorFn,
    /// `dC^T/dx`, an `n x m` matrix whose column `j` is the gradient of `C_j`.
    pub jac_ct: MatrixFn,
    pub j_mat: MatrixFn,
    pub r_mat: MatrixFn,
}

#[derive(Clone)]
pub struct NonlinearIohd {
    n: usize,
    m: usize,
    eval: Evaluators,
    tol: Tolerances,
    spot_checks: bool,
}

impl std::fmt::Debug for NonlinearIohd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearIohd")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("spot_checks", &self.spot_checks)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Worst relative mismatch between `grad_h` and finite differences of `H`.
    pub hamiltonian: f64,
    /// Worst relative mismatch between `jac_ct` and finite differences of `C`.
    pub output: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRate {
    /// `dH/dt = grad H^T x'`.
    pub rate: f64,
    /// `u^T z`.
    pub supply: f64,
    /// `v^T R v` with `v = grad H - dC^T/dx u`.
    pub dissipation: f64,
}

/// Port-Hamiltonian matrices of the differentiated-output system at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct PortHamSnapshot {
    pub g: Mat,
    pub p: Mat,
    pub s: Mat,
    pub m: Mat,
}

impl NonlinearIohd {
    /// Builds the bundle and cross-checks `grad_h` and `jac_ct` by central
    /// differences at [`PROBE_POINTS`] seeded states.
    pub fn new(n: usize, m: usize, eval: Evaluators, tol: Tolerances) -> Result<Self> {
        let sys = Self {
            n,
            m,
            eval,
            tol,
            spot_checks: true,
        };
        let probes = probe_points(n, PROBE_POINTS, PROBE_SEED);
        for x in &probes {
            sys.check_shapes(x)?;
        }
        let check = sys.check_gradients(&probes, 1e-5)?;
        if check.hamiltonian > GRADIENT_GATE || check.output > GRADIENT_GATE {
            return Err(IohdError::ModelIntegrity {
                x: Vec::new(),
                detail: format!(
                    "gradient evaluators disagree with finite differences (H: {:.3e}, C: {:.3e})",
                    check.hamiltonian, check.output
                ),
            });
        }
        Ok(sys)
    }

    /// Disables the per-evaluation `J`/`R` structure checks.
    pub fn without_spot_checks(mut self) -> Self {
        self.spot_checks = false;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }
    pub fn evaluators(&self) -> &Evaluators {
        &self.eval
    }

    pub fn hamiltonian(&self, x: &Vector) -> f64 {
        (self.eval.hamiltonian)(x)
    }
    pub fn grad_h(&self, x: &Vector) -> Vector {
        (self.eval.grad_h)(x)
    }
    pub fn output(&self, x: &Vector) -> Vector {
        (self.eval.output)(x)
    }
    pub fn jac_ct(&self, x: &Vector) -> Mat {
        (self.eval.jac_ct)(x)
    }
    pub fn j_mat(&self, x: &Vector) -> Mat {
        (self.eval.j_mat)(x)
    }
    pub fn r_mat(&self, x: &Vector) -> Mat {
        (self.eval.r_mat)(x)
    }

    fn check_shapes(&self, x: &Vector) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let bad = |what: &str| IohdError::ModelIntegrity {
            x: x.iter().copied().collect(),
            detail: format!("{what} has the wrong shape"),
        };
        if self.grad_h(x).len() != n {
            return Err(bad("dH/dx"));
        }
        if self.output(x).len() != m {
            return Err(bad("C(x)"));
        }
        if self.jac_ct(x).shape() != (n, m) {
            return Err(bad("dC^T/dx"));
        }
        if self.j_mat(x).shape() != (n, n) {
            return Err(bad("J(x)"));
        }
        if self.r_mat(x).shape() != (n, n) {
            return Err(bad("R(x)"));
        }
        Ok(())
    }

    /// Worst relative central-difference mismatch of `grad_h` and `jac_ct` at the given states.
    pub fn check_gradients(&self, points: &[Vector], h: f64) -> Result<GradientCheck> {
        let mut worst = GradientCheck {
            hamiltonian: 0.0,
            output: 0.0,
        };
        for x in points {
            if x.len() != self.n {
                return Err(IohdError::Dimension(format!(
                    "probe point has {} entries, expected {}",
                    x.len(),
                    self.n
                )));
            }
            let fd_h = central_gradient(|z| self.hamiltonian(z), x, h);
            worst.hamiltonian = worst.hamiltonian.max(relative_gap(&fd_h, &self.grad_h(x)));

            let jac = self.jac_ct(x);
            for j in 0..self.m {
                let fd_c = central_gradient(|z| self.output(z)[j], x, h);
                let col: Vector = jac.column(j).into_owned();
                worst.output = worst.output.max(relative_gap(&fd_c, &col));
            }
        }
        Ok(worst)
    }

    fn spot_check(&self, x: &Vector, j: &Mat, r: &Mat) -> Result<()> {
        if !self.spot_checks {
            return Ok(());
        }
        let fail = |detail: String| IohdError::ModelIntegrity {
            x: x.iter().copied().collect(),
            detail,
        };
        let skew = norm_inf(&(j + j.transpose()));
        if skew > self.tol.sym_threshold(j) {
            return Err(fail(format!(
                "J(x) not skew-symmetric, |J + J^T| = {skew:.3e}"
            )));
        }
        let psd = linalg::is_psd(r, &self.tol).map_err(|e| fail(e.to_string()))?;
        if !psd.holds {
            return Err(fail(format!("R(x) not PSD, lambda_min = {}", psd.min_eig)));
        }
        Ok(())
    }

    fn check_point(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.n || u.len() != self.m {
            return Err(IohdError::Dimension(format!(
                "state has {} entries and input {}, expected {} and {}",
                x.len(),
                u.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// `(J - R)(grad H - dC^T/dx u)` together with the effort vector.
    fn flow(&self, x: &Vector, u: &Vector) -> Result<(Vector, Vector, Mat)> {
        self.check_point(x, u)?;
        let j = self.j_mat(x);
        let r = self.r_mat(x);
        self.spot_check(x, &j, &r)?;
        let effort = self.grad_h(x) - self.jac_ct(x) * u;
        let xdot = (&j - &r) * &effort;
        Ok((xdot, effort, r))
    }

    pub fn eval_dynamics(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        Ok(self.flow(x, u)?.0)
    }

    /// Differentiated output `z = dC^T/dx^T x'`.
    pub fn diff_output(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        let xdot = self.eval_dynamics(x, u)?;
        Ok(self.jac_ct(x).transpose() * xdot)
    }

    /// Energy balance `dH/dt = u^T z - v^T R v`, asserted within tolerance.
    pub fn energy_rate(&self, x: &Vector, u: &Vector) -> Result<EnergyRate> {
        let (xdot, effort, r) = self.flow(x, u)?;
        let rate = self.grad_h(x).dot(&xdot);
        let z = self.jac_ct(x).transpose() * &xdot;
        let supply = u.dot(&z);
        let dissipation = effort.dot(&(&r * &effort));
        let scale = rate.abs().max(supply.abs()).max(dissipation.abs());
        let gap = (rate - (supply - dissipation)).abs();
        if gap > self.tol.eq_threshold(scale) {
            return Err(IohdError::ModelIntegrity {
                x: x.iter().copied().collect(),
                detail: format!("energy balance violated by {gap:.3e}"),
            });
        }
        if dissipation < -self.tol.psd_threshold(scale) {
            return Err(IohdError::ModelIntegrity {
                x: x.iter().copied().collect(),
                detail: format!("negative dissipation {dissipation:.3e}"),
            });
        }
        Ok(EnergyRate {
            rate,
            supply,
            dissipation,
        })
    }

    /// `G = -J dC^T/dx`, `P = -R dC^T/dx`, `S = dC/dx R dC^T/dx`, `M = -dC/dx J dC^T/dx`.
    pub fn to_port_hamiltonian(&self, x: &Vector) -> Result<PortHamSnapshot> {
        self.check_point(x, &Vector::zeros(self.m))?;
        let j = self.j_mat(x);
        let r = self.r_mat(x);
        self.spot_check(x, &j, &r)?;
        let jc = self.jac_ct(x);
        let snap = PortHamSnapshot {
            g: -(&j * &jc),
            p: -(&r * &jc),
            s: jc.transpose() * &r * &jc,
            m: -(jc.transpose() * &j * &jc),
        };
        let fail = |detail: String| IohdError::ModelIntegrity {
            x: x.iter().copied().collect(),
            detail,
        };
        let m_skew = norm_inf(&(&snap.m + snap.m.transpose()));
        if m_skew > self.tol.sym_threshold(&snap.m) {
            return Err(fail(format!("M not skew-symmetric, residual {m_skew:.3e}")));
        }
        let block = dissipation_block(&r, &snap.p, &snap.s);
        let psd = linalg::is_psd(&block, &self.tol).map_err(|e| fail(e.to_string()))?;
        if !psd.holds {
            return Err(fail(format!(
                "[[R, P], [P^T, S]] not PSD, lambda_min = {}",
                psd.min_eig
            )));
        }
        Ok(snap)
    }
}

fn dissipation_block(r: &Mat, p: &Mat, s: &Mat) -> Mat {
    let (n, m) = (r.nrows(), s.nrows());
    let mut block = Mat::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(r);
    block.view_mut((0, n), (n, m)).copy_from(p);
    block.view_mut((n, 0), (m, n)).copy_from(&p.transpose());
    block.view_mut((n, n), (m, m)).copy_from(s);
    block
}

fn probe_points(n: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = crate::random::rng(seed);
    (0..count)
        .map(|_| Vector::from_fn(n, |_, _| rng.sample(StandardNormal)))
        .collect()
}

fn central_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    let mut out = Vector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        out[i] = (fp - fm) / (2.0 * step);
    }
    out
}

fn relative_gap(approx: &Vector, exact: &Vector) -> f64 {
    let scale = exact.amax().max(1.0);
    (approx - exact).amax() / scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrabilityReport {
    pub holds: bool,
    /// `|g + J dC^T/dx|`, all residuals in the maximum-column-sum norm.
    pub input_residual: f64,
    /// `|R dC^T/dx|`.
    pub resistive_residual: f64,
    /// `|dC/dx J dC^T/dx|`.
    pub feedthrough_residual: f64,
}

/// Whether a basic port-Hamiltonian input matrix `g` is generated by an
/// output map with gradient `jac_ct`, i.e. `g = -J dC^T/dx`, `R dC^T/dx = 0`
/// and `dC/dx J dC^T/dx = 0` at the evaluated point.
pub fn check_integrability(
    j: &Mat,
    r: &Mat,
    g: &Mat,
    jac_ct: &Mat,
    tol: &Tolerances,
) -> Result<IntegrabilityReport> {
    let n = j.nrows();
    if j.shape() != (n, n) || r.shape() != (n, n) || g.nrows() != n || jac_ct.shape() != g.shape() {
        return Err(IohdError::Dimension(
            "non-conformable integrability data".into(),
        ));
    }
    let input_residual = norm_one(&(g + j * jac_ct));
    let resistive_residual = norm_one(&(r * jac_ct));
    let feedthrough_residual = norm_one(&(jac_ct.transpose() * j * jac_ct));
    let scale = norm_one(g).max(norm_one(j) * norm_one(jac_ct));
    let thr = tol.eq_threshold(scale);
    Ok(IntegrabilityReport {
        holds: input_residual <= thr && resistive_residual <= thr && feedthrough_residual <= thr,
        input_residual,
        resistive_residual,
        feedthrough_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternateOutputReport {
    pub holds: bool,
    /// `|(G^ - P^) - (G - P)|`.
    pub input_residual: f64,
    /// `lambda_min([[R, P^], [P^T, S^]])`.
    pub block_min_eig: f64,
}

/// Checks that `(G^, P^, S^, M^)` defines an alternate passive output for
/// the port-Hamiltonian system with data `(R, G, P)`.
#[allow(clippy::too_many_arguments)]
pub fn check_alternate_passive_output(
    r: &Mat,
    g: &Mat,
    p: &Mat,
    g_hat: &Mat,
    p_hat: &Mat,
    s_hat: &Mat,
    m_hat: &Mat,
    tol: &Tolerances,
) -> Result<AlternateOutputReport> {
    let (n, m) = g.shape();
    if r.shape() != (n, n)
        || p.shape() != (n, m)
        || g_hat.shape() != (n, m)
        || p_hat.shape() != (n, m)
        || s_hat.shape() != (m, m)
        || m_hat.shape() != (m, m)
    {
        return Err(IohdError::Dimension(
            "non-conformable alternate output data".into(),
        ));
    }
    let m_skew = norm_inf(&(m_hat + m_hat.transpose()));
    if m_skew > tol.sym_threshold(m_hat) {
        return Err(IohdError::Precondition(format!(
            "M^ must be skew-symmetric, |M^ + M^T| = {m_skew:.3e}"
        )));
    }
    let input_residual = norm_inf(&((g_hat - p_hat) - (g - p)));
    let block = dissipation_block(r, p_hat, s_hat);
    let psd = linalg::is_psd(&block, tol)?;
    Ok(AlternateOutputReport {
        holds: input_residual <= tol.eq_threshold(norm_inf(g).max(norm_inf(p))) && psd.holds,
        input_residual,
        block_min_eig: psd.min_eig,
    })
}

/// Positive feedback `u1 = y2 + e1`, `u2 = y1 + e2` of two nonlinear IOHD
/// systems, with interconnected Hamiltonian `H1(x1) + H2(x2) - C1(x1)^T C2(x2)`.
pub fn positive_feedback_nl(s1: &NonlinearIohd, s2: &NonlinearIohd) -> Result<NonlinearIohd> {
    if s1.m != s2.m {
        return Err(IohdError::Dimension(format!(
            "port dimensions differ: {} vs {}",
            s1.m, s2.m
        )));
    }
    let (n1, n2) = (s1.n, s2.n);
    let split = move |x: &Vector| -> (Vector, Vector) {
        (x.rows(0, n1).into_owned(), x.rows(n1, n2).into_owned())
    };

    let (a, b) = (s1.clone(), s2.clone());
    let hamiltonian: ScalarFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        a.hamiltonian(&x1) + b.hamiltonian(&x2) - a.output(&x1).dot(&b.output(&x2))
    });
    let (a, b) = (s1.clone(), s2.clone());
    let grad_h: VectorFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        let g1 = a.grad_h(&x1) - a.jac_ct(&x1) * b.output(&x2);
        let g2 = b.grad_h(&x2) - b.jac_ct(&x2) * a.output(&x1);
        stack(&g1, &g2)
    });
    let (a, b) = (s1.clone(), s2.clone());
    let output: VectorFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        stack(&a.output(&x1), &b.output(&x2))
    });
    let (a, b) = (s1.clone(), s2.clone());
    let jac_ct: MatrixFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        block_diag(&[&a.jac_ct(&x1), &b.jac_ct(&x2)])
    });
    let (a, b) = (s1.clone(), s2.clone());
    let j_mat: MatrixFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        block_diag(&[&a.j_mat(&x1), &b.j_mat(&x2)])
    });
    let (a, b) = (s1.clone(), s2.clone());
    let r_mat: MatrixFn = Arc::new(move |x| {
        let (x1, x2) = split(x);
        block_diag(&[&a.r_mat(&x1), &b.r_mat(&x2)])
    });
    let mut out = NonlinearIohd::new(
        n1 + n2,
        2 * s1.m,
        Evaluators {
            hamiltonian,
            grad_h,
            output,
            jac_ct,
            j_mat,
            r_mat,
        },
        s1.tol,
    )?;
    out.spot_checks = s1.spot_checks || s2.spot_checks;
    Ok(out)
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Static IOHD system `y = -dP/du(u)` given by a potential on the port space.
#[derive(Clone)]
pub struct Potential {
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

/// Closes the loop with a static IOHD system: same `J`, `R`, `C` and
/// Hamiltonian `H(x) + P(C(x))`.
pub fn static_feedback(sys: &NonlinearIohd, potential: &Potential) -> Result<NonlinearIohd> {
    let probes = probe_points(sys.m, PROBE_POINTS, PROBE_SEED ^ 0x5a5a);
    let mut worst: f64 = 0.0;
    for u in &probes {
        let fd = central_gradient(|z| (potential.value)(z), u, 1e-5);
        let exact = (potential.gradient)(u);
        if exact.len() != sys.m {
            return Err(IohdError::ModelIntegrity {
                x: u.iter().copied().collect(),
                detail: "potential gradient has the wrong length".into(),
            });
        }
        worst = worst.max(relative_gap(&fd, &exact));
    }
    if worst > GRADIENT_GATE {
        return Err(IohdError::ModelIntegrity {
            x: Vec::new(),
            detail: format!("potential gradient disagrees with finite differences ({worst:.3e})"),
        });
    }

    let (base, pot) = (sys.clone(), potential.clone());
    let hamiltonian: ScalarFn =
        Arc::new(move |x| base.hamiltonian(x) + (pot.value)(&base.output(x)));
    let (base, pot) = (sys.clone(), potential.clone());
    let grad_h: VectorFn =
        Arc::new(move |x| base.grad_h(x) + base.jac_ct(x) * (pot.gradient)(&base.output(x)));
    let mut out = NonlinearIohd::new(
        sys.n,
        sys.m,
        Evaluators {
            hamiltonian,
            grad_h,
            ..sys.eval.clone()
        },
        sys.tol,
    )?;
    out.spot_checks = sys.spot_checks;
    Ok(out)
}
