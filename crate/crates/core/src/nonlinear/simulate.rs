//! Fixed-step RK4 simulation and CSV trace export.

use std::io::{self, Write};

use super::NonlinearIohd;
use crate::error::{IohdError, Result};
use crate::linalg::Vector;

/// Recorded trajectory. All per-step vectors have the same length as `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub diff_outputs: Vec<Vector>,
    pub energies: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `dH/dt` evaluated at each recorded step.
    pub rates: Vec<f64>,
    /// `u^T z` at each recorded step.
    pub supplies: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|supply - rate - dissipation|` over the recorded steps.
    pub fn max_passivity_violation(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.supplies)
            .zip(&self.dissipation)
            .map(|((r, s), d)| (s - r - d).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest recorded dissipation; nonnegative for a PSD resistive structure.
    pub fn min_dissipation(&self) -> f64 {
        self.dissipation
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `|H(T) - H(0) - int (u^T z - dissipation) dt|` with trapezoidal quadrature.
    pub fn energy_balance_residual(&self) -> f64 {
        let mut integral = 0.0;
        for k in 1..self.len() {
            let dt = self.times[k] - self.times[k - 1];
            let f0 = self.supplies[k - 1] - self.dissipation[k - 1];
            let f1 = self.supplies[k] - self.dissipation[k];
            integral += 0.5 * dt * (f0 + f1);
        }
        match (self.energies.first(), self.energies.last()) {
            (Some(h0), Some(h1)) => (h1 - h0 - integral).abs(),
            _ => 0.0,
        }
    }

    /// `max_t |H(t) - H(0)| / |H(0)|`, or the absolute drift when `H(0) = 0`.
    pub fn max_relative_energy_drift(&self) -> f64 {
        let Some(&h0) = self.energies.first() else {
            return 0.0;
        };
        let scale = if h0 == 0.0 { 1.0 } else { h0.abs() };
        self.energies
            .iter()
            .map(|h| (h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Largest one-step increase of `H`.
    pub fn max_energy_increase(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn csv_header(&self) -> String {
        let (n, m) = match (self.states.first(), self.inputs.first()) {
            (Some(x), Some(u)) => (x.len(), u.len()),
            _ => (0, 0),
        };
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x_{i}")));
        for prefix in ["u", "y", "z"] {
            cols.extend((1..=m).map(|i| format!("{prefix}_{i}")));
        }
        cols.push("H".into());
        cols.push("dissipation".into());
        cols.join(",")
    }

    /// Writes the trace as CSV with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for k in 0..self.len() {
            let mut fields = vec![fmt(self.times[k])];
            for v in [
                &self.states[k],
                &self.inputs[k],
                &self.outputs[k],
                &self.diff_outputs[k],
            ] {
                fields.extend(v.iter().map(|&x| fmt(x)));
            }
            fields.push(fmt(self.energies[k]));
            fields.push(fmt(self.dissipation[k]));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Integrates the model with classical RK4 at fixed step `dt` up to `t_end`.
/// The input is sampled at `t`, `t + dt/2` and `t + dt` within each step.
pub fn simulate(
    sys: &NonlinearIohd,
    x0: &Vector,
    input: &dyn Fn(f64) -> Vector,
    dt: f64,
    t_end: f64,
) -> Result<SimTrace> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(IohdError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(IohdError::InvalidParameter(format!(
            "t_end must be at least dt, got {t_end}"
        )));
    }
    if x0.len() != sys.n() {
        return Err(IohdError::Dimension(format!(
            "initial state has {} entries, expected {}",
            x0.len(),
            sys.n()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IohdError::NonFinite {
            what: "initial state".into(),
        });
    }
    let steps = (t_end / dt).round() as usize;
    let mut trace = SimTrace {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        diff_outputs: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        dissipation: Vec::with_capacity(steps + 1),
        rates: Vec::with_capacity(steps + 1),
        supplies: Vec::with_capacity(steps + 1),
    };
    let sample = |t: f64| -> Result<Vector> {
        let u = input(t);
        if u.len() != sys.m() {
            return Err(IohdError::Dimension(format!(
                "input has {} entries, expected {}",
                u.len(),
                sys.m()
            )));
        }
        Ok(u)
    };

    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = sample(t)?;
        record(&mut trace, sys, t, &x, &u)?;
        if k == steps {
            break;
        }
        let u_mid = sample(t + 0.5 * dt)?;
        let u_end = sample(t + dt)?;
        let k1 = sys.eval_dynamics(&x, &u)?;
        let k2 = sys.eval_dynamics(&(&x + &k1 * (0.5 * dt)), &u_mid)?;
        let k3 = sys.eval_dynamics(&(&x + &k2 * (0.5 * dt)), &u_mid)?;
        let k4 = sys.eval_dynamics(&(&x + &k3 * dt), &u_end)?;
        let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(IohdError::Divergence { last_good_time: t });
        }
        x = next;
    }
    Ok(trace)
}

fn record(trace: &mut SimTrace, sys: &NonlinearIohd, t: f64, x: &Vector, u: &Vector) -> Result<()> {
    let energy = sys.energy_rate(x, u)?;
    trace.times.push(t);
    trace.states.push(x.clone());
    trace.inputs.push(u.clone());
    trace.outputs.push(sys.output(x));
    trace.diff_outputs.push(sys.diff_output(x, u)?);
    trace.energies.push(sys.hamiltonian(x));
    trace.dissipation.push(energy.dissipation);
    trace.rates.push(energy.rate);
    trace.supplies.push(energy.supply);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tolerances;
    use crate::nonlinear::catalog::{Duffing, MassSpring2Dof};
    use nalgebra::dvector;

    fn example(d1: f64, d2: f64) -> NonlinearIohd {
        MassSpring2Dof {
            d1,
            d2,
            ..Default::default()
        }
        .nonlinear(&Tolerances::default())
        .unwrap()
    }

    fn zero(_: f64) -> Vector {
        Vector::zeros(2)
    }

    #[test]
    fn equilibrium_stays_put() {
        let trace = simulate(&example(0.0, 0.0), &Vector::zeros(4), &zero, 0.01, 1.0).unwrap();
        assert_eq!(trace.len(), 101);
        assert!(trace.states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
        assert!(trace.energies.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn lossless_conserves_energy() {
        let trace = simulate(
            &example(0.0, 0.0),
            &dvector![1.0, -0.5, 0.3, 0.8],
            &zero,
            1e-3,
            10.0,
        )
        .unwrap();
        assert!(trace.max_relative_energy_drift() <= 1e-8);
    }

    #[test]
    fn damped_energy_decreases_and_balances() {
        let trace = simulate(
            &example(0.5, 0.5),
            &dvector![1.0, -0.5, 0.3, 0.8],
            &zero,
            1e-3,
            5.0,
        )
        .unwrap();
        assert!(trace.max_energy_increase() <= 0.0);
        assert!(trace.energy_balance_residual() < 1e-6);
        assert!(trace.max_passivity_violation() <= 1e-9);
    }

    #[test]
    fn times_are_exact_multiples() {
        let trace = simulate(&example(0.0, 0.0), &Vector::zeros(4), &zero, 0.1, 0.3).unwrap();
        assert_eq!(trace.times, vec![0.0, 0.1, 0.2, 0.30000000000000004]);
    }

    #[test]
    fn divergence_is_reported() {
        // negative stiffness with a hardening quartic of the wrong sign escapes in finite time
        let sys = Duffing {
            k: 0.0,
            beta: -4.0,
            ..Default::default()
        }
        .nonlinear(&Tolerances::default())
        .unwrap();
        let err = simulate(&sys, &dvector![3.0, 0.0], &|_| dvector![0.0], 0.01, 50.0).unwrap_err();
        match err {
            IohdError::Divergence { last_good_time } => {
                assert!(last_good_time > 0.0 && last_good_time < 50.0)
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_steps() {
        let sys = example(0.0, 0.0);
        assert!(simulate(&sys, &Vector::zeros(4), &zero, 0.0, 1.0).is_err());
        assert!(simulate(&sys, &Vector::zeros(4), &zero, 0.1, 0.01).is_err());
        assert!(matches!(
            simulate(&sys, &Vector::zeros(3), &zero, 0.1, 1.0),
            Err(IohdError::Dimension(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let trace = simulate(
            &example(0.0, 0.0),
            &dvector![1.0, 0.0, 0.0, 0.0],
            &zero,
            0.5,
            0.5,
        )
        .unwrap();
        let csv = trace.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x_1,x_2,x_3,x_4,u_1,u_2,y_1,y_2,z_1,z_2,H,dissipation"
        );
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 13);
        assert_eq!(first[1], 1.0);
        assert_eq!(first[11], 0.5);
        for line in lines {
            for field in line.split(',') {
                let v: f64 = field.parse().unwrap();
                assert_eq!(fmt(v), field);
            }
        }
    }
}
