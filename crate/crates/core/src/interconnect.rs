//! Positive feedback and network interconnection of linear IOHD systems.
//!
//! Interconnection keeps the Poisson and resistive structures block diagonal
//! and moves all coupling into the Hamiltonian weight: for two systems under
//! `u1 = y2 + e1, u2 = y1 + e2`
//!
//! ```text
//! Q_int = [[ Q1,       -C1^T C2 ],
//!          [ -C2^T C1,  Q2      ]]
//! ```
//!
//! Feedthrough must be zero in every interconnected component; with `D != 0`
//! positive feedback creates an algebraic loop.

use crate::error::{IohdError, Result};
use crate::linalg::{
    self, block_diag, ensure_finite, inverse_checked, norm_inf, sqrt_psd, Mat, Tolerances,
};
use crate::linear::{Component, LinearIohd};

/// `M q'' + D q' + K q = L^T u`, `y = L q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderMech {
    mass: Mat,
    damping: Mat,
    stiffness: Mat,
    l: Mat,
}

impl SecondOrderMech {
    pub fn new(mass: Mat, damping: Mat, stiffness: Mat, l: Mat) -> Result<Self> {
        let k = mass.nrows();
        for (name, m) in [("M", &mass), ("D", &damping), ("K", &stiffness)] {
            if m.shape() != (k, k) {
                return Err(IohdError::Dimension(format!(
                    "{name} is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            ensure_finite(m, name)?;
        }
        if l.ncols() != k {
            return Err(IohdError::Dimension(format!(
                "L has {} columns, expected {k}",
                l.ncols()
            )));
        }
        ensure_finite(&l, "L")?;
        Ok(Self {
            mass,
            damping,
            stiffness,
            l,
        })
    }

    pub fn mass(&self) -> &Mat {
        &self.mass
    }
    pub fn damping(&self) -> &Mat {
        &self.damping
    }
    pub fn stiffness(&self) -> &Mat {
        &self.stiffness
    }
    pub fn l(&self) -> &Mat {
        &self.l
    }
    pub fn dof(&self) -> usize {
        self.mass.nrows()
    }
    pub fn m(&self) -> usize {
        self.l.nrows()
    }

    /// `M = M^T > 0`, `D = D^T >= 0`, `K = K^T`.
    pub fn check(&self, tol: &Tolerances) -> Result<()> {
        let m = linalg::is_pd(&self.mass, tol)?;
        if !m.holds {
            return Err(IohdError::Precondition(format!(
                "mass matrix not positive definite, lambda_min = {}",
                m.min_eig
            )));
        }
        let d = linalg::is_psd(&self.damping, tol)?;
        if !d.holds {
            return Err(IohdError::Precondition(format!(
                "damping matrix not PSD, lambda_min = {}",
                d.min_eig
            )));
        }
        linalg::ensure_symmetric(&self.stiffness, "K", tol)
    }

    /// Collocated position-output / force-input form with state `(q, p)`:
    /// `J = [[0, I], [-I, 0]]`, `R = diag(0, D)`, `Q = diag(K, M^{-1})`, `C = [L, 0]`.
    pub fn to_iohd(&self, tol: &Tolerances) -> Result<LinearIohd> {
        self.check(tol)?;
        let k = self.dof();
        let n = 2 * k;
        let mut j = Mat::zeros(n, n);
        j.view_mut((0, k), (k, k)).fill_with_identity();
        j.view_mut((k, 0), (k, k)).copy_from(&-Mat::identity(k, k));
        let r = block_diag(&[&Mat::zeros(k, k), &self.damping]);
        let q = block_diag(&[&self.stiffness, &inverse_checked(&self.mass, "M")?]);
        let mut c = Mat::zeros(self.m(), n);
        c.view_mut((0, 0), (self.m(), k)).copy_from(&self.l);
        LinearIohd::new(j, r, q, c, Mat::zeros(self.m(), self.m()))
    }
}

fn require_interconnectable(sys: &LinearIohd, label: &str) -> Result<()> {
    if sys.has_zero_feedthrough() {
        Ok(())
    } else {
        Err(IohdError::Precondition(format!(
            "{label} has nonzero feedthrough D; interconnection requires D = 0"
        )))
    }
}

fn component_name(sys: &LinearIohd, fallback: String) -> String {
    match sys.components() {
        [single] => single.name.clone(),
        _ => fallback,
    }
}

/// Stacks systems block-diagonally and applies `coupling(i, j)` as the
/// weight on `-C_i^T C_j` for every ordered pair `i != j`.
fn assemble(systems: &[&LinearIohd], coupling: impl Fn(usize, usize) -> f64) -> Result<LinearIohd> {
    let js: Vec<&Mat> = systems.iter().map(|s| s.j()).collect();
    let rs: Vec<&Mat> = systems.iter().map(|s| s.r()).collect();
    let cs: Vec<&Mat> = systems.iter().map(|s| s.c()).collect();
    let j = block_diag(&js);
    let r = block_diag(&rs);
    let c = block_diag(&cs);
    let n = j.nrows();
    let p = c.nrows();

    let offsets: Vec<usize> = systems
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.n();
            Some(start)
        })
        .collect();
    let port_offsets: Vec<usize> = systems
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.m();
            Some(start)
        })
        .collect();

    let mut q = Mat::zeros(n, n);
    for (i, si) in systems.iter().enumerate() {
        q.view_mut((offsets[i], offsets[i]), (si.n(), si.n()))
            .copy_from(si.q());
        for (k, sk) in systems.iter().enumerate() {
            let w = if i == k { 0.0 } else { coupling(i, k) };
            if w != 0.0 {
                let block = -(si.c().transpose() * sk.c()) * w;
                q.view_mut((offsets[i], offsets[k]), (si.n(), sk.n()))
                    .copy_from(&block);
            }
        }
    }

    let components = systems
        .iter()
        .enumerate()
        .map(|(i, s)| Component {
            name: component_name(s, format!("sys{}", i + 1)),
            states: offsets[i]..offsets[i] + s.n(),
            ports: port_offsets[i]..port_offsets[i] + s.m(),
        })
        .collect();
    Ok(LinearIohd::new(j, r, q, c, Mat::zeros(p, p))?.with_components(components))
}

/// Positive feedback `u1 = y2 + e1`, `u2 = y1 + e2` of two IOHD systems with
/// equal port dimension. Inputs and outputs of the result are `(e1, e2)` and
/// `(y1, y2)`.
pub fn positive_feedback(s1: &LinearIohd, s2: &LinearIohd) -> Result<LinearIohd> {
    if s1.m() != s2.m() {
        return Err(IohdError::Dimension(format!(
            "port dimensions differ: {} vs {}",
            s1.m(),
            s2.m()
        )));
    }
    require_interconnectable(s1, "first system")?;
    require_interconnectable(s2, "second system")?;
    assemble(&[s1, s2], |_, _| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianStability {
    /// `Q > 0`: stable without eigenvalue at zero. Not a claim of asymptotic stability.
    pub stable_no_zero_eig: bool,
    pub q_min_eig: f64,
}

pub fn stability_by_hamiltonian(
    sys: &LinearIohd,
    tol: &Tolerances,
) -> Result<HamiltonianStability> {
    let pd = linalg::is_pd(sys.q(), tol)?;
    Ok(HamiltonianStability {
        stable_no_zero_eig: pd.holds,
        q_min_eig: pd.min_eig,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopVerdict {
    Stable,
    Unstable,
    /// `lambda_max` within tolerance of one: no verdict.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGainTest {
    pub passes: bool,
    pub lambda_max: f64,
    pub verdict: LoopVerdict,
}

fn loop_gain_verdict(lambda_max: f64, tol: &Tolerances) -> LoopGainTest {
    let band = tol.psd_tol;
    let verdict = if lambda_max < 1.0 - band {
        LoopVerdict::Stable
    } else if lambda_max > 1.0 + band {
        LoopVerdict::Unstable
    } else {
        LoopVerdict::Marginal
    };
    LoopGainTest {
        passes: verdict == LoopVerdict::Stable,
        lambda_max,
        verdict,
    }
}

/// `lambda_max(G1 G2)` for symmetric PSD `G1, G2`, evaluated as
/// `lambda_max(G2^{1/2} G1 G2^{1/2})`, which has the same spectrum.
fn product_lambda_max(g1: &Mat, g2: &Mat, tol: &Tolerances) -> Result<f64> {
    let root = sqrt_psd(g2);
    let sym = &root * g1 * &root;
    linalg::max_eig_sym(&linalg::sym_part(&sym), tol)
}

/// dc loop gain test `lambda_max(C1 Q1^{-1} C1^T C2 Q2^{-1} C2^T) < 1`,
/// valid under `Q1 > 0, Q2 > 0`.
pub fn dc_loop_gain_test(
    s1: &LinearIohd,
    s2: &LinearIohd,
    tol: &Tolerances,
) -> Result<LoopGainTest> {
    if s1.m() != s2.m() {
        return Err(IohdError::Dimension(format!(
            "port dimensions differ: {} vs {}",
            s1.m(),
            s2.m()
        )));
    }
    for (label, s) in [("Q1", s1), ("Q2", s2)] {
        let pd = linalg::is_pd(s.q(), tol)?;
        if !pd.holds {
            return Err(IohdError::Precondition(format!(
                "{label} must be positive definite, lambda_min = {}",
                pd.min_eig
            )));
        }
    }
    let g1 = s1.c() * inverse_checked(s1.q(), "Q1")? * s1.c().transpose();
    let g2 = s2.c() * inverse_checked(s2.q(), "Q2")? * s2.c().transpose();
    Ok(loop_gain_verdict(product_lambda_max(&g1, &g2, tol)?, tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpfResult {
    /// Closed loop with block-diagonal mass, damping and port map and the coupled stiffness.
    pub closed_loop: SecondOrderMech,
    pub passes: bool,
    pub lambda_max: f64,
    pub verdict: LoopVerdict,
    pub k_cl_min_eig: f64,
}

/// Positive position feedback of two mechanical systems with `M_i, K_i > 0`.
/// The verdict depends only on stiffness and port maps, never on damping.
pub fn positive_position_feedback(
    m1: &SecondOrderMech,
    m2: &SecondOrderMech,
    tol: &Tolerances,
) -> Result<PpfResult> {
    if m1.m() != m2.m() {
        return Err(IohdError::Dimension(format!(
            "port dimensions differ: {} vs {}",
            m1.m(),
            m2.m()
        )));
    }
    for (label, sys) in [("first", m1), ("second", m2)] {
        sys.check(tol)?;
        let k = linalg::is_pd(sys.stiffness(), tol)?;
        if !k.holds {
            return Err(IohdError::Precondition(format!(
                "{label} stiffness not positive definite, lambda_min = {}",
                k.min_eig
            )));
        }
    }
    let coupling = -(m1.l().transpose() * m2.l());
    let mut k_cl = block_diag(&[m1.stiffness(), m2.stiffness()]);
    let (k1, k2) = (m1.dof(), m2.dof());
    k_cl.view_mut((0, k1), (k1, k2)).copy_from(&coupling);
    k_cl.view_mut((k1, 0), (k2, k1))
        .copy_from(&coupling.transpose());
    let closed_loop = SecondOrderMech::new(
        block_diag(&[m1.mass(), m2.mass()]),
        block_diag(&[m1.damping(), m2.damping()]),
        k_cl,
        block_diag(&[m1.l(), m2.l()]),
    )?;

    let g1 = m1.l() * inverse_checked(m1.stiffness(), "K1")? * m1.l().transpose();
    let g2 = m2.l() * inverse_checked(m2.stiffness(), "K2")? * m2.l().transpose();
    let test = loop_gain_verdict(product_lambda_max(&g1, &g2, tol)?, tol);
    let k_cl_min_eig = linalg::min_eig_sym(closed_loop.stiffness(), tol)?;
    let k_cl_pd = k_cl_min_eig > tol.psd_threshold(norm_inf(closed_loop.stiffness()));
    if test.verdict != LoopVerdict::Marginal && test.passes != k_cl_pd {
        return Err(IohdError::Internal(format!(
            "loop gain verdict {} disagrees with K_cl definiteness (lambda_min = {k_cl_min_eig})",
            test.lambda_max
        )));
    }
    Ok(PpfResult {
        closed_loop,
        passes: test.passes,
        lambda_max: test.lambda_max,
        verdict: test.verdict,
        k_cl_min_eig,
    })
}

/// Undirected graph with symmetric weighted adjacency and no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedNetwork {
    adjacency: Mat,
    port_dim: usize,
}

impl UndirectedNetwork {
    pub fn new(adjacency: Mat, port_dim: usize, tol: &Tolerances) -> Result<Self> {
        linalg::ensure_symmetric(&adjacency, "adjacency", tol)
            .map_err(|e| IohdError::Graph(e.to_string()))?;
        ensure_finite(&adjacency, "adjacency")?;
        if let Some(i) = (0..adjacency.nrows()).find(|&i| adjacency[(i, i)] != 0.0) {
            return Err(IohdError::Graph(format!("self-loop at vertex {i}")));
        }
        if port_dim == 0 {
            return Err(IohdError::Graph("port dimension must be positive".into()));
        }
        Ok(Self {
            adjacency,
            port_dim,
        })
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }
    pub fn port_dim(&self) -> usize {
        self.port_dim
    }
    pub fn vertices(&self) -> usize {
        self.adjacency.nrows()
    }
}

/// Directed graph as an `N x M` incidence matrix: each column holds `+1` at
/// the head vertex, `-1` at the tail and zeros elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork {
    incidence: Mat,
    port_dim: usize,
}

impl DirectedNetwork {
    pub fn new(incidence: Mat, port_dim: usize) -> Result<Self> {
        for (k, col) in incidence.column_iter().enumerate() {
            let heads = col.iter().filter(|&&v| v == 1.0).count();
            let tails = col.iter().filter(|&&v| v == -1.0).count();
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if heads != 1 || tails != 1 || heads + tails + zeros != col.len() {
                return Err(IohdError::Graph(format!(
                    "incidence column {k} must hold exactly one +1 and one -1"
                )));
            }
        }
        if port_dim == 0 {
            return Err(IohdError::Graph("port dimension must be positive".into()));
        }
        Ok(Self {
            incidence,
            port_dim,
        })
    }

    /// Builds the incidence matrix from `(tail, head)` pairs.
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)], port_dim: usize) -> Result<Self> {
        let mut incidence = Mat::zeros(vertices, edges.len());
        for (k, &(tail, head)) in edges.iter().enumerate() {
            if tail >= vertices || head >= vertices {
                return Err(IohdError::Graph(format!(
                    "edge {k} ({tail} -> {head}) references a vertex outside 0..{vertices}"
                )));
            }
            incidence[(head, k)] += 1.0;
            incidence[(tail, k)] -= 1.0;
        }
        Self::new(incidence, port_dim)
    }

    pub fn incidence(&self) -> &Mat {
        &self.incidence
    }
    pub fn port_dim(&self) -> usize {
        self.port_dim
    }
    pub fn vertices(&self) -> usize {
        self.incidence.nrows()
    }
    pub fn edges(&self) -> usize {
        self.incidence.ncols()
    }
}

fn check_members(systems: &[&LinearIohd], port_dim: usize, tol: &Tolerances) -> Result<()> {
    for (i, s) in systems.iter().enumerate() {
        if s.m() != port_dim {
            return Err(IohdError::Dimension(format!(
                "system {i} has {} ports, network port dimension is {port_dim}",
                s.m()
            )));
        }
        require_interconnectable(s, &format!("system {i}"))?;
        s.validate(tol)?;
    }
    Ok(())
}

/// Network interconnection `u = (A (x) I_m) y + e` on an undirected graph.
/// Each unordered edge `{i, j}` contributes `-A_ij C_i^T C_j` to `Q_net`.
pub fn network_adjacency(
    systems: &[LinearIohd],
    net: &UndirectedNetwork,
    tol: &Tolerances,
) -> Result<LinearIohd> {
    if systems.len() != net.vertices() {
        return Err(IohdError::Dimension(format!(
            "{} systems for a graph with {} vertices",
            systems.len(),
            net.vertices()
        )));
    }
    let refs: Vec<&LinearIohd> = systems.iter().collect();
    check_members(&refs, net.port_dim(), tol)?;
    assemble(&refs, |i, j| net.adjacency()[(i, j)])
}

/// Vertex/edge interconnection on a directed graph,
/// `u^v = (D (x) I) y^e + e^v`, `u^e = (D^T (x) I) y^v + e^e`.
/// States are ordered vertices first, then edges.
pub fn network_incidence(
    vertex_systems: &[LinearIohd],
    edge_systems: &[LinearIohd],
    net: &DirectedNetwork,
    tol: &Tolerances,
) -> Result<LinearIohd> {
    if vertex_systems.len() != net.vertices() || edge_systems.len() != net.edges() {
        return Err(IohdError::Dimension(format!(
            "{} vertex and {} edge systems for a graph with {} vertices and {} edges",
            vertex_systems.len(),
            edge_systems.len(),
            net.vertices(),
            net.edges()
        )));
    }
    let refs: Vec<&LinearIohd> = vertex_systems.iter().chain(edge_systems).collect();
    check_members(&refs, net.port_dim(), tol)?;
    let nv = net.vertices();
    assemble(&refs, |a, b| match (a < nv, b < nv) {
        (true, false) => net.incidence()[(a, b - nv)],
        (false, true) => net.incidence()[(b, a - nv)],
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalar(q: f64, c: f64) -> LinearIohd {
        LinearIohd::new(
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![q],
            dmatrix![c],
            dmatrix![0.0],
        )
        .unwrap()
    }

    fn mech(m: f64, d: f64, k: f64, l: f64) -> SecondOrderMech {
        SecondOrderMech::new(dmatrix![m], dmatrix![d], dmatrix![k], dmatrix![l]).unwrap()
    }

    #[test]
    fn feedback_of_unit_scalars() {
        let sys = positive_feedback(&scalar(1.0, 1.0), &scalar(1.0, 1.0)).unwrap();
        assert_eq!(sys.q(), &dmatrix![1.0, -1.0; -1.0, 1.0]);
        assert_eq!(sys.j(), &Mat::zeros(2, 2));
        assert_eq!(sys.r(), &Mat::identity(2, 2));
        assert_eq!(sys.c(), &Mat::identity(2, 2));
        assert_eq!(sys.components().len(), 2);
        assert_eq!(sys.components()[1].states, 1..2);
    }

    #[test]
    fn feedback_with_zero_output_decouples() {
        let sys = positive_feedback(&scalar(2.0, 1.0), &scalar(3.0, 0.0)).unwrap();
        assert_eq!(sys.q(), &dmatrix![2.0, 0.0; 0.0, 3.0]);
    }

    #[test]
    fn feedback_scalar_pair_state_matrix() {
        let sys = positive_feedback(&scalar(1.0, 1.0), &scalar(1.0, 0.5)).unwrap();
        assert_eq!(sys.q(), &dmatrix![1.0, -0.5; -0.5, 1.0]);
        assert_eq!(sys.to_state_space().a(), &dmatrix![-1.0, 0.5; 0.5, -1.0]);
    }

    #[test]
    fn feedback_rejects_port_mismatch_and_feedthrough() {
        let two_port = LinearIohd::new(
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0; 1.0],
            Mat::zeros(2, 2),
        )
        .unwrap();
        assert!(matches!(
            positive_feedback(&scalar(1.0, 1.0), &two_port),
            Err(IohdError::Dimension(_))
        ));
        let with_d = LinearIohd::new(
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.1],
        )
        .unwrap();
        assert!(matches!(
            positive_feedback(&scalar(1.0, 1.0), &with_d),
            Err(IohdError::Precondition(_))
        ));
    }

    #[test]
    fn hamiltonian_stability_examples() {
        let s = stability_by_hamiltonian(
            &positive_feedback(&scalar(1.0, 1.0), &scalar(1.0, 0.5)).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!(s.stable_no_zero_eig);
        assert_relative_eq!(s.q_min_eig, 0.5, epsilon = 1e-14);

        let s = stability_by_hamiltonian(
            &positive_feedback(&scalar(1.0, 1.0), &scalar(1.0, 1.0)).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!(!s.stable_no_zero_eig);
        assert!(s.q_min_eig.abs() < 1e-15);

        let s = stability_by_hamiltonian(&scalar(1.0, 1.0), &tol()).unwrap();
        assert!(s.stable_no_zero_eig);
        assert_eq!(s.q_min_eig, 1.0);
    }

    #[test]
    fn loop_gain_examples() {
        let t = dc_loop_gain_test(&scalar(1.0, 1.0), &scalar(1.0, 1.0), &tol()).unwrap();
        assert!(!t.passes);
        assert_eq!(t.verdict, LoopVerdict::Marginal);
        assert_relative_eq!(t.lambda_max, 1.0, epsilon = 1e-14);

        let t = dc_loop_gain_test(&scalar(1.0, 1.0), &scalar(1.0, 0.5), &tol()).unwrap();
        assert!(t.passes);
        assert_relative_eq!(t.lambda_max, 0.25, epsilon = 1e-14);

        let t = dc_loop_gain_test(&scalar(1.0, 1.0), &scalar(1.0, 0.0), &tol()).unwrap();
        assert!(t.passes);
        assert_eq!(t.lambda_max, 0.0);

        let t = dc_loop_gain_test(&scalar(0.5, 1.0), &scalar(1.0, 1.0), &tol()).unwrap();
        assert_eq!(t.verdict, LoopVerdict::Unstable);
    }

    #[test]
    fn loop_gain_requires_positive_q() {
        assert!(matches!(
            dc_loop_gain_test(&scalar(-1.0, 1.0), &scalar(1.0, 1.0), &tol()),
            Err(IohdError::Precondition(_))
        ));
    }

    #[test]
    fn mech_scalar_oscillator() {
        let ss = mech(1.0, 0.0, 1.0, 1.0)
            .to_iohd(&tol())
            .unwrap()
            .to_state_space();
        assert_eq!(ss.a(), &dmatrix![0.0, 1.0; -1.0, 0.0]);
        assert_eq!(ss.b(), &dmatrix![0.0; 1.0]);
        assert_eq!(ss.c(), &dmatrix![1.0, 0.0]);
    }

    #[test]
    fn mech_without_port_is_autonomous() {
        let ss = mech(2.0, 0.5, 3.0, 0.0)
            .to_iohd(&tol())
            .unwrap()
            .to_state_space();
        assert_eq!(ss.b(), &Mat::zeros(2, 1));
        assert_eq!(ss.c(), &Mat::zeros(1, 2));
    }

    #[test]
    fn mech_inputs_act_on_momenta_only() {
        let mut rng = crate::random::rng(5);
        let sys = crate::random::second_order(&mut rng, 3, 2, true);
        let ss = sys.to_iohd(&tol()).unwrap().to_state_space();
        assert_eq!(ss.b().rows(0, 3).into_owned(), Mat::zeros(3, 2));
        // M q'' + D q' + K q = L^T u in first-order form
        let minv = inverse_checked(sys.mass(), "M").unwrap();
        assert!(norm_inf(&(ss.a().view((3, 0), (3, 3)) + sys.stiffness())) < 1e-14);
        assert!(norm_inf(&(ss.a().view((0, 3), (3, 3)) - &minv)) < 1e-14);
        assert!(norm_inf(&(ss.a().view((3, 3), (3, 3)) + sys.damping() * &minv)) < 1e-14);
    }

    #[test]
    fn mech_rejects_singular_mass() {
        assert!(mech(0.0, 0.0, 1.0, 1.0).to_iohd(&tol()).is_err());
    }

    #[test]
    fn ppf_examples() {
        let r = positive_position_feedback(
            &mech(1.0, 0.0, 1.0, 1.0),
            &mech(1.0, 0.0, 1.0, 1.0),
            &tol(),
        )
        .unwrap();
        assert!(!r.passes);
        assert_relative_eq!(r.lambda_max, 1.0, epsilon = 1e-14);
        assert_eq!(r.closed_loop.stiffness(), &dmatrix![1.0, -1.0; -1.0, 1.0]);

        // det 2 - 1 = 1 > 0, trace 3 > 0
        let r = positive_position_feedback(
            &mech(1.0, 0.0, 2.0, 1.0),
            &mech(1.0, 0.0, 1.0, 1.0),
            &tol(),
        )
        .unwrap();
        assert!(r.passes);
        assert_relative_eq!(r.lambda_max, 0.5, epsilon = 1e-14);
        assert!(r.k_cl_min_eig > 0.0);

        let r = positive_position_feedback(
            &mech(1.0, 0.0, 1.0, 1.0),
            &mech(1.0, 0.0, 1.0, 0.0),
            &tol(),
        )
        .unwrap();
        assert!(r.passes);
        assert_eq!(r.lambda_max, 0.0);
    }

    #[test]
    fn ppf_rejects_nonpositive_stiffness() {
        assert!(matches!(
            positive_position_feedback(
                &mech(1.0, 0.0, -1.0, 1.0),
                &mech(1.0, 0.0, 1.0, 1.0),
                &tol()
            ),
            Err(IohdError::Precondition(_))
        ));
    }

    #[test]
    fn adjacency_two_vertices_is_positive_feedback() {
        let (a, b) = (scalar(1.0, 1.0), scalar(2.0, 0.5));
        let net = UndirectedNetwork::new(dmatrix![0.0, 1.0; 1.0, 0.0], 1, &tol()).unwrap();
        let via_net = network_adjacency(&[a.clone(), b.clone()], &net, &tol()).unwrap();
        assert_eq!(via_net, positive_feedback(&a, &b).unwrap());
    }

    #[test]
    fn adjacency_without_edges_is_block_diagonal() {
        let net = UndirectedNetwork::new(Mat::zeros(2, 2), 1, &tol()).unwrap();
        let sys = network_adjacency(&[scalar(1.0, 1.0), scalar(3.0, 1.0)], &net, &tol()).unwrap();
        assert_eq!(sys.q(), &dmatrix![1.0, 0.0; 0.0, 3.0]);
    }

    #[test]
    fn adjacency_three_path() {
        let net = UndirectedNetwork::new(
            dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 1.0; 0.0, 1.0, 0.0],
            1,
            &tol(),
        )
        .unwrap();
        let systems = vec![scalar(1.0, 1.0); 3];
        let sys = network_adjacency(&systems, &net, &tol()).unwrap();
        assert_eq!(
            sys.q(),
            &dmatrix![1.0, -1.0, 0.0; -1.0, 1.0, -1.0; 0.0, -1.0, 1.0]
        );
        let s = stability_by_hamiltonian(&sys, &tol()).unwrap();
        assert!(!s.stable_no_zero_eig);
        assert_relative_eq!(s.q_min_eig, 1.0 - 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn adjacency_rejects_bad_graphs() {
        assert!(matches!(
            UndirectedNetwork::new(dmatrix![0.0, 1.0; 0.0, 0.0], 1, &tol()),
            Err(IohdError::Graph(_))
        ));
        assert!(matches!(
            UndirectedNetwork::new(dmatrix![1.0, 0.0; 0.0, 0.0], 1, &tol()),
            Err(IohdError::Graph(_))
        ));
        let net = UndirectedNetwork::new(Mat::zeros(3, 3), 1, &tol()).unwrap();
        assert!(matches!(
            network_adjacency(&[scalar(1.0, 1.0)], &net, &tol()),
            Err(IohdError::Dimension(_))
        ));
    }

    #[test]
    fn incidence_single_edge() {
        let net = DirectedNetwork::new(dmatrix![1.0; -1.0], 1).unwrap();
        let v = vec![scalar(1.0, 1.0); 2];
        let e = vec![scalar(1.0, 1.0)];
        let sys = network_incidence(&v, &e, &net, &tol()).unwrap();
        assert_eq!(
            sys.q(),
            &dmatrix![1.0, 0.0, -1.0; 0.0, 1.0, 1.0; -1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn incidence_without_edges_leaves_vertices() {
        let net = DirectedNetwork::new(Mat::zeros(2, 0), 1).unwrap();
        let v = vec![scalar(1.0, 1.0), scalar(2.0, 1.0)];
        let sys = network_incidence(&v, &[], &net, &tol()).unwrap();
        assert_eq!(sys.q(), &dmatrix![1.0, 0.0; 0.0, 2.0]);
    }

    #[test]
    fn incidence_rejects_malformed_columns() {
        assert!(matches!(
            DirectedNetwork::new(dmatrix![1.0], 1),
            Err(IohdError::Graph(_))
        ));
        assert!(matches!(
            DirectedNetwork::new(dmatrix![1.0; 0.5], 1),
            Err(IohdError::Graph(_))
        ));
        // self-loop edge cancels to a zero column
        assert!(DirectedNetwork::from_edges(2, &[(1, 1)], 1).is_err());
    }

    #[test]
    fn incidence_from_edges_orientation() {
        let net = DirectedNetwork::from_edges(3, &[(0, 1), (2, 1)], 1).unwrap();
        assert_eq!(net.incidence(), &dmatrix![-1.0, 0.0; 1.0, 1.0; 0.0, -1.0]);
    }
}
