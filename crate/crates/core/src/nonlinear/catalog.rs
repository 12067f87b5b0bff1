//! Built-in models.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector};

use super::{Evaluators, NonlinearIohd};
use crate::error::{IohdError, Result};
use crate::interconnect::SecondOrderMech;
use crate::linalg::{Mat, Tolerances, Vector};
use crate::linear::LinearIohd;

/// Names accepted by [`catalog`].
pub const NAMES: [&str; 3] = ["mass_spring_2dof", "oscillator", "duffing"];

/// Alternating mass-spring-mass-spring system with dampers parallel to the
/// springs. State `(q12, q20, p1, p2)`; `u1` is the velocity imposed on the
/// free end of the second spring, `u2` the force on the first mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpring2Dof {
    pub m1: f64,
    pub m2: f64,
    pub k1: f64,
    pub k2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for MassSpring2Dof {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            k1: 1.0,
            k2: 1.0,
            d1: 0.0,
            d2: 0.0,
        }
    }
}

impl MassSpring2Dof {
    pub fn from_params(params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = Self::default();
        for (key, &value) in params {
            let slot = match key.as_str() {
                "m1" => &mut out.m1,
                "m2" => &mut out.m2,
                "k1" => &mut out.k1,
                "k2" => &mut out.k2,
                "d1" => &mut out.d1,
                "d2" => &mut out.d2,
                _ => return Err(unknown_param("mass_spring_2dof", key)),
            };
            *slot = value;
        }
        out.check()?;
        Ok(out)
    }

    pub fn check(&self) -> Result<()> {
        positive("m1", self.m1)?;
        positive("m2", self.m2)?;
        finite("k1", self.k1)?;
        finite("k2", self.k2)?;
        nonnegative("d1", self.d1)?;
        nonnegative("d2", self.d2)
    }

    /// Interconnection structure `J`, which is also `A` for unit parameters.
    pub fn poisson() -> Mat {
        dmatrix![
            0.0, 0.0, 1.0, -1.0;
            0.0, 0.0, 0.0, 1.0;
            -1.0, 0.0, 0.0, 0.0;
            1.0, -1.0, 0.0, 0.0
        ]
    }

    pub fn resistive(&self) -> Mat {
        let (d1, d2) = (self.d1, self.d2);
        dmatrix![
            0.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 0.0;
            0.0, 0.0, d1, -d1;
            0.0, 0.0, -d1, d1 + d2
        ]
    }

    pub fn hessian(&self) -> Mat {
        Mat::from_diagonal(&dvector![self.k1, self.k2, 1.0 / self.m1, 1.0 / self.m2])
    }

    /// Rows are the gradients of `C1 = p1 + p2 - d2 q20` and `C2 = q12 + q20`.
    pub fn output_matrix(&self) -> Mat {
        dmatrix![
            0.0, -self.d2, 1.0, 1.0;
            1.0, 1.0, 0.0, 0.0
        ]
    }

    pub fn linear(&self) -> Result<LinearIohd> {
        self.check()?;
        Ok(LinearIohd::new(
            Self::poisson(),
            self.resistive(),
            self.hessian(),
            self.output_matrix(),
            Mat::zeros(2, 2),
        )?
        .with_name("mass_spring_2dof"))
    }

    pub fn nonlinear(&self, tol: &Tolerances) -> Result<NonlinearIohd> {
        self.check()?;
        let p = *self;
        let c = self.output_matrix();
        let c_out = c.clone();
        let jac = c.transpose();
        let r = self.resistive();
        let eval = Evaluators {
            hamiltonian: Arc::new(move |x| {
                0.5 * p.k1 * x[0] * x[0]
                    + 0.5 * p.k2 * x[1] * x[1]
                    + x[2] * x[2] / (2.0 * p.m1)
                    + x[3] * x[3] / (2.0 * p.m2)
            }),
            grad_h: Arc::new(move |x| dvector![p.k1 * x[0], p.k2 * x[1], x[2] / p.m1, x[3] / p.m2]),
            output: Arc::new(move |x| &c_out * x),
            jac_ct: Arc::new(move |_| jac.clone()),
            j_mat: Arc::new(|_| Self::poisson()),
            r_mat: Arc::new(move |_| r.clone()),
        };
        NonlinearIohd::new(4, 2, eval, *tol)
    }
}

/// Duffing oscillator `H = p^2/2m + k q^2/2 + beta q^4/4`, damping `d` on the
/// momentum and output `y = q` (force input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Duffing {
    pub m: f64,
    pub k: f64,
    pub beta: f64,
    pub d: f64,
}

impl Default for Duffing {
    fn default() -> Self {
        Self {
            m: 1.0,
            k: 1.0,
            beta: 1.0,
            d: 0.0,
        }
    }
}

impl Duffing {
    pub fn from_params(params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = Self::default();
        for (key, &value) in params {
            let slot = match key.as_str() {
                "m" => &mut out.m,
                "k" => &mut out.k,
                "beta" => &mut out.beta,
                "d" => &mut out.d,
                _ => return Err(unknown_param("duffing", key)),
            };
            *slot = value;
        }
        Ok(out)
    }

    pub fn nonlinear(&self, tol: &Tolerances) -> Result<NonlinearIohd> {
        positive("m", self.m)?;
        finite("k", self.k)?;
        finite("beta", self.beta)?;
        nonnegative("d", self.d)?;
        let p = *self;
        let eval = Evaluators {
            hamiltonian: Arc::new(move |x| {
                let q2 = x[0] * x[0];
                x[1] * x[1] / (2.0 * p.m) + 0.5 * p.k * q2 + 0.25 * p.beta * q2 * q2
            }),
            grad_h: Arc::new(move |x| dvector![p.k * x[0] + p.beta * x[0].powi(3), x[1] / p.m]),
            output: Arc::new(|x| dvector![x[0]]),
            jac_ct: Arc::new(|_| dmatrix![1.0; 0.0]),
            j_mat: Arc::new(|_| dmatrix![0.0, 1.0; -1.0, 0.0]),
            r_mat: Arc::new(move |_| dmatrix![0.0, 0.0; 0.0, p.d]),
        };
        NonlinearIohd::new(2, 1, eval, *tol)
    }
}

/// Single mass `m` on a spring `k` with damper `d`, position output.
fn oscillator(params: &BTreeMap<String, f64>, tol: &Tolerances) -> Result<NonlinearIohd> {
    let (mut m, mut k, mut d) = (1.0, 1.0, 0.0);
    for (key, &value) in params {
        match key.as_str() {
            "m" => m = value,
            "k" => k = value,
            "d" => d = value,
            _ => return Err(unknown_param("oscillator", key)),
        }
    }
    positive("m", m)?;
    positive("k", k)?;
    nonnegative("d", d)?;
    let mech = SecondOrderMech::new(dmatrix![m], dmatrix![d], dmatrix![k], dmatrix![1.0])?;
    linear_wrap(&mech.to_iohd(tol)?, tol)
}

/// Builds a named model from the catalog.
pub fn catalog(
    name: &str,
    params: &BTreeMap<String, f64>,
    tol: &Tolerances,
) -> Result<NonlinearIohd> {
    match name {
        "mass_spring_2dof" => MassSpring2Dof::from_params(params)?.nonlinear(tol),
        "oscillator" => oscillator(params, tol),
        "duffing" => Duffing::from_params(params)?.nonlinear(tol),
        _ => Err(IohdError::UnknownCatalog(name.to_string())),
    }
}

/// Lifts a linear IOHD model with zero feedthrough: `H = x^T Q x / 2`, `C(x) = C x`.
pub fn linear_wrap(model: &LinearIohd, tol: &Tolerances) -> Result<NonlinearIohd> {
    if !model.has_zero_feedthrough() {
        return Err(IohdError::Precondition(
            "only models with D = 0 can be lifted to a nonlinear IOHD system".into(),
        ));
    }
    let (q, c, j, r) = (
        model.q().clone(),
        model.c().clone(),
        model.j().clone(),
        model.r().clone(),
    );
    let q_grad = q.clone();
    let jac = c.transpose();
    let eval = Evaluators {
        hamiltonian: Arc::new(move |x: &Vector| 0.5 * x.dot(&(&q * x))),
        grad_h: Arc::new(move |x| &q_grad * x),
        output: Arc::new(move |x| &c * x),
        jac_ct: Arc::new(move |_| jac.clone()),
        j_mat: Arc::new(move |_| j.clone()),
        r_mat: Arc::new(move |_| r.clone()),
    };
    NonlinearIohd::new(model.n(), model.m(), eval, *tol)
}

fn unknown_param(model: &str, key: &str) -> IohdError {
    IohdError::InvalidParameter(format!("{model} has no parameter `{key}`"))
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(IohdError::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(IohdError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(IohdError::InvalidParameter(format!(
            "{name} must be nonnegative, got {v}"
        )))
    }
}
