use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde_json::{json, Value};

use super::model_file::{read_model, Kind, ModelFile, Network};
use super::report::{complex, mat, num, Report};
use super::{Cli, CliError, Command, GlobalArgs};
use crate::converse::{
    check_interconnection_certificate, decompose, find_interconnection_certificate, rediagonalize,
    Components, Grade, InterconnectionData, RecoveredComponent,
};
use crate::error::IohdError;
use crate::interconnect::{
    dc_loop_gain_test, network_adjacency, network_incidence, positive_feedback,
    stability_by_hamiltonian, LoopVerdict,
};
use crate::linalg::{self, norm_inf, Tolerances, Vector};
use crate::linear::{
    default_grid, find_certificate, minimality, ni_frequency_check, LinearIohd, StateSpace,
};
use crate::nonlinear::catalog::{catalog, linear_wrap};
use crate::nonlinear::simulate;

const MINIMALITY_NOTE: &str =
    "certificate existence and the negative-imaginary property coincide only for minimal realizations";

pub(super) fn execute(cli: &Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    let tol = g.tolerances()?;
    let (report, artifact) = match &cli.command {
        Command::Check { model, budget } => (check(model, *budget, g, &tol)?, None),
        Command::Interconnect { first, second } => interconnect(first, second, g, &tol)?,
        Command::Network { graph, models } => network(graph, models, g, &tol)?,
        Command::Converse {
            model,
            find_certificate,
            budget,
        } => converse(model, *find_certificate, *budget, g, &tol)?,
        Command::Simulate {
            target,
            params,
            x0,
            input,
            dt,
            tend,
            no_spot_checks,
        } => simulate_cmd(
            &SimulateArgs {
                target,
                params,
                x0: x0.as_deref(),
                input,
                dt: *dt,
                t_end: *tend,
                spot_checks: !no_spot_checks,
            },
            g,
            &tol,
        )?,
    };

    let json = report.to_json();
    if let Some(out) = &g.out {
        write(out, artifact.as_deref().unwrap_or(&json))?;
    }
    if let Some(path) = &g.report {
        write(path, &json)?;
    }
    if g.json {
        print!("{json}");
    } else {
        print!("{}", report.to_text());
    }
    Ok(report.exit_code())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check(path: &Path, budget: usize, g: &GlobalArgs, tol: &Tolerances) -> Result<Report, CliError> {
    let (file, record) = read_model(path)?;
    let mut report = Report::new("check", vec![record], g.seed, tol);
    report.detail("kind", json!(file.kind.as_str()));
    match file.kind {
        Kind::LinearIohd => validate_into(&mut report, &file.linear_iohd(tol)?, tol)?,
        Kind::SecondOrder => {
            let mech = file.second_order()?;
            let m_min = linalg::min_eig_sym(&linalg::sym_part(mech.mass()), tol)?;
            let d_min = linalg::min_eig_sym(&linalg::sym_part(mech.damping()), tol)?;
            let k_asym = linalg::asymmetry(mech.stiffness());
            report.verdict(
                "mass_positive_definite",
                m_min > tol.psd_threshold(norm_inf(mech.mass())),
                [("m_min_eig", num(m_min))],
            );
            report.verdict(
                "damping_psd",
                d_min >= -tol.psd_threshold(norm_inf(mech.damping())),
                [("d_min_eig", num(d_min))],
            );
            report.verdict(
                "stiffness_symmetric",
                k_asym <= tol.sym_threshold(mech.stiffness()),
                [("k_asymmetry", num(k_asym))],
            );
            if mech.check(tol).is_ok() {
                validate_into(&mut report, &mech.to_iohd(tol)?, tol)?;
            }
        }
        Kind::StateSpace | Kind::Interconnection => {
            let ss = file.state_space(tol)?;
            certificate_into(&mut report, &ss, budget, g.seed, tol)?;
        }
        Kind::Network => {
            return Err(CliError::Input(
                "graph files describe no dynamics; use the `network` command".into(),
            ))
        }
    }
    Ok(report)
}

fn validate_into(
    report: &mut Report,
    model: &LinearIohd,
    tol: &Tolerances,
) -> Result<(), CliError> {
    let validation = match model.validate(tol) {
        Ok(v) => v,
        Err(IohdError::Validation(v)) => v,
        Err(e) => return Err(e.into()),
    };
    report.verdict(
        "valid",
        validation.is_valid(),
        [
            ("j_skew_residual", num(validation.j_skew_residual)),
            ("r_sym_residual", num(validation.r_sym_residual)),
            ("r_min_eig", num(validation.r_min_eig)),
            ("q_sym_residual", num(validation.q_sym_residual)),
            ("d_sym_residual", num(validation.d_sym_residual)),
        ],
    );
    report.detail("n", json!(model.n()));
    report.detail("m", json!(model.m()));
    report.detail("q_min_eig", num(validation.q_min_eig));
    if !validation.violations.is_empty() {
        let list: Vec<Value> = validation
            .violations
            .iter()
            .map(|v| json!(v.message))
            .collect();
        report.detail("violations", Value::Array(list));
    }
    if validation.is_valid() && model.has_zero_feedthrough() {
        if let Ok(gain) = model.dc_gain(tol) {
            report.detail("dc_gain", mat(&gain));
        }
    }
    Ok(())
}

fn certificate_into(
    report: &mut Report,
    ss: &StateSpace,
    budget: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<(), CliError> {
    match find_certificate(ss, tol, budget, seed) {
        Ok(Some(cert)) => {
            report.verdict(
                "iohd_certificate",
                true,
                [
                    ("lyapunov_margin", num(cert.lyapunov_margin)),
                    ("equality_residual", num(cert.equality_residual)),
                    ("positive_definite", json!(cert.positive_definite)),
                    ("trials", json!(cert.trials)),
                ],
            );
            report.detail("P", mat(&cert.p));
        }
        Ok(None) => {
            report.verdict(
                "iohd_certificate",
                false,
                [("search_budget", json!(budget))],
            );
            report.note("no certificate found within the search budget; this is inconclusive");
        }
        Err(IohdError::NoSymmetricSolution { residual }) => {
            report.verdict(
                "iohd_certificate",
                false,
                [("least_squares_residual", num(residual))],
            );
        }
        Err(e) => return Err(e.into()),
    }

    let ni = ni_frequency_check(ss, &default_grid(), tol)?;
    report.verdict(
        "negative_imaginary",
        ni.passes,
        [
            (
                "unstable_eigenvalue",
                ni.unstable_eigenvalue.map_or(Value::Null, complex),
            ),
            ("worst_omega", ni.worst_omega.map_or(Value::Null, num)),
            (
                "worst_lambda_min",
                ni.worst_lambda_min.map_or(Value::Null, num),
            ),
        ],
    );
    let minimal = minimality(ss);
    report.detail("controllable", json!(minimal.controllable));
    report.detail("observable", json!(minimal.observable));
    report.note(MINIMALITY_NOTE);
    if !(minimal.controllable && minimal.observable) {
        report.note("the realization is not minimal");
    }
    Ok(())
}

fn load_linear(
    path: &Path,
    tol: &Tolerances,
) -> Result<(LinearIohd, super::model_file::InputRecord), CliError> {
    let (file, record) = read_model(path)?;
    let model = file.linear_iohd(tol)?;
    model.validate(tol)?;
    Ok((model, record))
}

type Outcome = (Report, Option<String>);

fn interconnect(
    first: &Path,
    second: &Path,
    g: &GlobalArgs,
    tol: &Tolerances,
) -> Result<Outcome, CliError> {
    let (s1, r1) = load_linear(first, tol)?;
    let (s2, r2) = load_linear(second, tol)?;
    if s1.m() != s2.m() {
        return Err(CliError::Input(format!(
            "port dimensions differ: {} has {}, {} has {}",
            first.display(),
            s1.m(),
            second.display(),
            s2.m()
        )));
    }
    let composed = positive_feedback(&s1, &s2)?;
    let mut report = Report::new("interconnect", vec![r1, r2], g.seed, tol);
    let stability = stability_into(&mut report, &composed, tol)?;

    match dc_loop_gain_test(&s1, &s2, tol) {
        Ok(test) => {
            report.verdict(
                "dc_loop_gain_below_one",
                test.passes,
                [("lambda_max", num(test.lambda_max))],
            );
            if test.verdict == LoopVerdict::Marginal {
                report.mark_boundary();
                report.note("dc loop gain is within tolerance of one; no stability verdict");
            } else if test.passes != stability {
                return Err(CliError::Analysis(format!(
                    "internal consistency check failed: loop gain {} disagrees with Q_int definiteness",
                    test.lambda_max
                )));
            }
        }
        Err(IohdError::Precondition(msg)) => {
            report.note(format!("dc loop gain test skipped: {msg}"))
        }
        Err(e) => return Err(e.into()),
    }
    Ok((report, Some(ModelFile::from_linear(&composed).to_json())))
}

fn stability_into(
    report: &mut Report,
    composed: &LinearIohd,
    tol: &Tolerances,
) -> Result<bool, CliError> {
    let stab = stability_by_hamiltonian(composed, tol)?;
    report.verdict(
        "stable_no_zero_eig",
        stab.stable_no_zero_eig,
        [("q_int_min_eig", num(stab.q_min_eig))],
    );
    report.detail("n", json!(composed.n()));
    Ok(stab.stable_no_zero_eig)
}

fn network(
    graph: &Path,
    paths: &[std::path::PathBuf],
    g: &GlobalArgs,
    tol: &Tolerances,
) -> Result<Outcome, CliError> {
    let (file, graph_record) = read_model(graph)?;
    let net = file.network(tol)?;
    let mut records = vec![graph_record];
    let mut models = Vec::with_capacity(paths.len());
    for path in paths {
        let (model, record) = load_linear(path, tol)?;
        models.push(model);
        records.push(record);
    }
    let composed = match &net {
        Network::Undirected(n) => {
            if models.len() != n.vertices() {
                return Err(CliError::Input(format!(
                    "undirected graph has {} vertices but {} models were given",
                    n.vertices(),
                    models.len()
                )));
            }
            network_adjacency(&models, n, tol)?
        }
        Network::Directed(n) => {
            if models.len() != n.vertices() + n.edges() {
                return Err(CliError::Input(format!(
                    "directed graph needs {} vertex and {} edge models, {} were given",
                    n.vertices(),
                    n.edges(),
                    models.len()
                )));
            }
            let edges = models.split_off(n.vertices());
            network_incidence(&models, &edges, n, tol)?
        }
    };
    let mut report = Report::new("network", records, g.seed, tol);
    stability_into(&mut report, &composed, tol)?;
    Ok((report, Some(ModelFile::from_linear(&composed).to_json())))
}

fn converse(
    path: &Path,
    search: bool,
    budget: usize,
    g: &GlobalArgs,
    tol: &Tolerances,
) -> Result<Outcome, CliError> {
    let (file, record) = read_model(path)?;
    if file.kind != Kind::Interconnection {
        return Err(CliError::Input(format!(
            "converse needs an interconnection model, got {}",
            file.kind.as_str()
        )));
    }
    let blocks = file.blocks()?;
    let ss = file.state_space(tol)?;
    if blocks.n1 + blocks.n2 != ss.n() || 2 * blocks.m != ss.m() {
        return Err(CliError::Input(format!(
            "blocks n1 = {}, n2 = {}, m = {} do not match {} states and {} ports",
            blocks.n1,
            blocks.n2,
            blocks.m,
            ss.n(),
            ss.m()
        )));
    }
    let parts = Components::from_interconnected(&ss, blocks.n1, blocks.m, tol)?;
    let mut report = Report::new("converse", vec![record], g.seed, tol);

    let p =
        match (file.certificate()?, search) {
            (Some(p), false) => p,
            (_, true) => match find_interconnection_certificate(&parts, tol, budget, g.seed) {
                Ok(Some(cert)) => {
                    report.verdict("certificate_found", true, [("trials", json!(cert.trials))]);
                    cert.p
                }
                Ok(None) => {
                    report.verdict(
                        "certificate_found",
                        false,
                        [("search_budget", json!(budget))],
                    );
                    return Ok((report, None));
                }
                Err(IohdError::NoSymmetricSolution { residual }) => {
                    report.verdict(
                        "certificate_found",
                        false,
                        [("least_squares_residual", num(residual))],
                    );
                    return Ok((report, None));
                }
                Err(e) => return Err(e.into()),
            },
            (None, false) => return Err(CliError::Input(
                "interconnection model has no certificate `P`; pass --find-certificate to search"
                    .into(),
            )),
        };

    let data = InterconnectionData::new(parts, p, tol)?;
    let cert = check_interconnection_certificate(&data, tol)?;
    report.verdict(
        "certificate_valid",
        cert.passes(),
        [
            ("lyapunov_lambda_max", num(cert.lyapunov_lambda_max)),
            ("equality_residual", num(cert.equality_residual)),
        ],
    );
    if !cert.passes() {
        return Ok((report, None));
    }

    let result = match decompose(&data, tol) {
        Ok(result) => result,
        Err(IohdError::Inconsistent { residuals }) => {
            let table: Vec<(&str, Value)> = residuals
                .iter()
                .map(|(k, v)| (k.as_str(), num(*v)))
                .collect();
            report.verdict("decomposition_consistent", false, table);
            return Ok((report, None));
        }
        Err(e) => return Err(e.into()),
    };
    let worst = result.residuals.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    report.verdict(
        "decomposition_consistent",
        true,
        [("max_residual", num(worst))],
    );
    report.detail(
        "residuals",
        Value::Object(
            result
                .residuals
                .iter()
                .map(|(k, v)| (k.clone(), num(*v)))
                .collect(),
        ),
    );
    component_into(&mut report, "sys1", &result.first, tol)?;
    component_into(&mut report, "sys2", &result.second, tol)?;

    let model = rediagonalize(&data, &result, tol)?;
    Ok((report, Some(ModelFile::from_linear(&model).to_json())))
}

fn component_into(
    report: &mut Report,
    name: &str,
    comp: &RecoveredComponent,
    tol: &Tolerances,
) -> Result<(), CliError> {
    let r_psd = linalg::is_psd(&comp.r, tol)?.holds;
    let grade = match comp.grade {
        Grade::Iohd => "iohd",
        Grade::NegativeImaginary => "negative_imaginary",
    };
    report.verdict(
        &format!("{name}_iohd"),
        r_psd,
        [
            ("r_min_eig", num(comp.r_min_eig)),
            ("p_min_eig", num(comp.p_min_eig)),
            ("equality_residual", num(comp.equality_residual)),
            ("lyapunov_lambda_max", num(comp.lyapunov_lambda_max)),
            ("grade", json!(grade)),
        ],
    );
    report.detail(&format!("P_{name}"), mat(&comp.p));
    Ok(())
}

struct SimulateArgs<'a> {
    target: &'a str,
    params: &'a str,
    x0: Option<&'a str>,
    input: &'a str,
    dt: f64,
    t_end: f64,
    spot_checks: bool,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("{what}: `{s}` is not a finite number")))
        })
        .collect()
}

fn parse_params(text: &str) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            CliError::Input(format!("--params: expected key=value, got `{item}`"))
        })?;
        let v = parse_list(value, "--params")?;
        if v.len() != 1 {
            return Err(CliError::Input(format!("--params: bad value for `{key}`")));
        }
        out.insert(key.trim().to_string(), v[0]);
    }
    Ok(out)
}

type InputFn = Box<dyn Fn(f64) -> Vector>;

fn parse_input(text: &str, m: usize) -> Result<InputFn, CliError> {
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    match kind.trim() {
        "zero" if args.is_empty() => Ok(Box::new(move |_| Vector::zeros(m))),
        "step" => {
            let v = parse_list(args, "--input step")?;
            if v.len() != m {
                return Err(CliError::Input(format!(
                    "--input step needs {m} values, got {}",
                    v.len()
                )));
            }
            let v = Vector::from_vec(v);
            Ok(Box::new(move |_| v.clone()))
        }
        "sine" => {
            let v = parse_list(args, "--input sine")?;
            if v.len() != 2 * m {
                return Err(CliError::Input(format!(
                    "--input sine needs amplitude and frequency for {m} channels, got {} values",
                    v.len()
                )));
            }
            Ok(Box::new(move |t| {
                Vector::from_fn(m, |i, _| v[2 * i] * (TAU * v[2 * i + 1] * t).sin())
            }))
        }
        _ => Err(CliError::Input(format!(
            "--input must be zero, step:<values> or sine:<amplitude,frequency,...>, got `{text}`"
        ))),
    }
}

fn simulate_cmd(
    args: &SimulateArgs,
    g: &GlobalArgs,
    tol: &Tolerances,
) -> Result<Outcome, CliError> {
    let params = parse_params(args.params)?;
    let path = Path::new(args.target);
    let (sys, inputs) = if path.is_file() {
        if !params.is_empty() {
            return Err(CliError::Input(
                "--params applies to catalog models only".into(),
            ));
        }
        let (model, record) = load_linear(path, tol)?;
        (linear_wrap(&model, tol)?, vec![record])
    } else {
        (catalog(args.target, &params, tol)?, Vec::new())
    };
    let sys = if args.spot_checks {
        sys
    } else {
        sys.without_spot_checks()
    };

    let x0 = match args.x0 {
        Some(text) => {
            let v = parse_list(text, "--x0")?;
            if v.len() != sys.n() {
                return Err(CliError::Input(format!(
                    "--x0 needs {} values, got {}",
                    sys.n(),
                    v.len()
                )));
            }
            Vector::from_vec(v)
        }
        None => Vector::zeros(sys.n()),
    };
    let input = parse_input(args.input, sys.m())?;
    if !(args.dt.is_finite() && args.dt > 0.0 && args.t_end.is_finite() && args.t_end >= args.dt) {
        return Err(CliError::Input(format!(
            "need dt > 0 and tend >= dt, got dt = {}, tend = {}",
            args.dt, args.t_end
        )));
    }

    let mut report = Report::new("simulate", inputs, g.seed, tol);
    report.detail("model", json!(args.target));
    report.detail("params", json!(params));
    report.detail("input", json!(args.input));
    report.detail("dt", num(args.dt));

    let trace = match simulate(&sys, &x0, &*input, args.dt, args.t_end) {
        Ok(trace) => trace,
        Err(IohdError::Divergence { last_good_time }) => {
            report.verdict(
                "completed",
                false,
                [("last_good_time", num(last_good_time))],
            );
            return Ok((report, None));
        }
        Err(e) => return Err(e.into()),
    };
    let t_last = trace.times.last().copied().unwrap_or(0.0);
    report.verdict(
        "completed",
        true,
        [("steps", json!(trace.len() - 1)), ("t_end", num(t_last))],
    );

    let scale = trace
        .rates
        .iter()
        .chain(&trace.supplies)
        .chain(&trace.dissipation)
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let violation = trace.max_passivity_violation();
    let min_diss = trace.min_dissipation();
    report.verdict(
        "passivity_identity",
        violation <= tol.eq_threshold(scale) && min_diss >= -tol.psd_threshold(scale),
        [
            ("max_violation", num(violation)),
            ("min_dissipation", num(min_diss)),
        ],
    );
    report.detail(
        "energy_balance_residual",
        num(trace.energy_balance_residual()),
    );
    report.detail(
        "max_relative_energy_drift",
        num(trace.max_relative_energy_drift()),
    );
    report.detail("h_initial", num(trace.energies[0]));
    report.detail(
        "h_final",
        num(*trace
            .energies
            .last()
            .expect("trace has at least two samples")),
    );
    Ok((report, Some(trace.to_csv_string())))
}
