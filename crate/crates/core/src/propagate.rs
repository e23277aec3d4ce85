//! Time evolution: exact references and first/second-order product formulas.
//!
//! Evolution acts on `2^N × 2^N` matrices in place. Local superoperators are
//! applied by gathering the `2^s × 2^s` sub-blocks that share the bits outside
//! their support, so the cost per local channel is `O(4^N · 4^s)`.
//!
//! The second-order step is
//! `S(τ) = e^{τL_m/2} ⋯ e^{τL_1/2} e^{τL_1/2} ⋯ e^{τL_m/2}`
//! read as an operator product, so `e^{τL_m/2}` acts on the state first and
//! the two middle factors merge into `e^{τL_1}`. The first-order step
//! `S₁(τ) = e^{τL_1} ⋯ e^{τL_m}` likewise applies `L_m` first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    expm, hermitian_eigenvalues, matvec, trace_norm, unvec_columns, vec_columns, ComplexMatrix,
    C64, ONE, ZERO,
};
use crate::model::{
    local_superop_matrix, model_liouvillian, model_superop, summand_superop, union_support,
    LindbladModel, PairFormSuperop, Summand,
};

/// Largest chain for the per-summand `4^N` superoperator backend.
pub const SUPEROP_BACKEND_CAP: usize = 5;
/// Largest chain for exact evolution through a dense Liouvillian exponential.
pub const DENSE_EXACT_CAP: usize = 5;
/// `Auto` exact evolution switches from the dense exponential to the
/// matrix-free series above this size.
pub const AUTO_DENSE_MAX: usize = 4;
/// Largest support of a single local channel in the local backend.
const LOCAL_CHANNEL_CAP: usize = 6;

/// Validated density matrix on `n_sites` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    n_sites: usize,
}

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const NEGATIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix, n_sites: usize) -> Result<Self> {
        let rho = Self::unvalidated(matrix, n_sites)?;
        rho.validate()?;
        Ok(rho)
    }

    fn unvalidated(matrix: ComplexMatrix, n_sites: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if matrix.shape() != (dim, dim) {
            return Err(Error::InvalidState(format!(
                "{n_sites} sites need a {dim}x{dim} matrix, got {:?}",
                matrix.shape()
            )));
        }
        Ok(Self { matrix, n_sites })
    }

    /// Hermiticity and trace only; skips the eigenvalue check.
    fn checked_cheap(matrix: ComplexMatrix, n_sites: usize) -> Result<Self> {
        let rho = Self::unvalidated(matrix, n_sites)?;
        rho.validate_cheap()?;
        Ok(rho)
    }

    fn validate_cheap(&self) -> Result<()> {
        let dev = self.matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:e})"
            )));
        }
        let tr = self.matrix.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {}{:+}i differs from 1",
                tr.re, tr.im
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_cheap()?;
        let min = self.min_eigenvalue()?;
        if min < -NEGATIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.matrix.hermitian_part())?[0])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `|b⟩⟨b|` for a computational basis index, site 0 most significant.
    pub fn basis_state(n_sites: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {index} out of range for {n_sites} sites"
            )));
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Ok(Self { matrix: m, n_sites })
    }

    pub fn pure(psi: &[C64], n_sites: usize) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let normalized: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&normalized, &normalized), n_sites)
    }
}

/// The four product/mixed initial states used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    AllZeros,
    AllOnes,
    AllPlus,
    MaximallyMixed,
}

impl InitialState {
    pub const ALL: [InitialState; 4] = [
        InitialState::AllZeros,
        InitialState::AllOnes,
        InitialState::AllPlus,
        InitialState::MaximallyMixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitialState::AllZeros => "all_zeros",
            InitialState::AllOnes => "all_ones",
            InitialState::AllPlus => "all_plus",
            InitialState::MaximallyMixed => "maximally_mixed",
        }
    }

    pub fn prepare(self, n_sites: usize) -> DensityMatrix {
        let dim = 1usize << n_sites;
        let matrix = match self {
            InitialState::AllZeros => {
                let mut m = ComplexMatrix::zeros(dim, dim);
                m[(0, 0)] = ONE;
                m
            }
            InitialState::AllOnes => {
                let mut m = ComplexMatrix::zeros(dim, dim);
                m[(dim - 1, dim - 1)] = ONE;
                m
            }
            InitialState::AllPlus => {
                let v = C64::new(1.0 / dim as f64, 0.0);
                ComplexMatrix::from_vec(dim, dim, vec![v; dim * dim]).unwrap()
            }
            InitialState::MaximallyMixed => {
                ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64)
            }
        };
        DensityMatrix { matrix, n_sites }
    }
}

/// `Σ_j Z_j`, diagonal in the computational basis.
pub fn total_magnetization(n_sites: usize) -> ComplexMatrix {
    let dim = 1usize << n_sites;
    let diag: Vec<C64> = (0..dim)
        .map(|b| C64::new(n_sites as f64 - 2.0 * b.count_ones() as f64, 0.0))
        .collect();
    ComplexMatrix::from_diag(&diag)
}

/// `tr(O ρ)`.
pub fn expectation(obs: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    let r = rho.matrix();
    if obs.shape() != r.shape() {
        return Err(Error::DimensionMismatch {
            op: "expectation",
            left: obs.shape(),
            right: r.shape(),
        });
    }
    let dev = obs.hermitian_deviation();
    if dev > 1e-10 * obs.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let d = r.rows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += obs[(i, k)] * r[(k, i)];
        }
    }
    if acc.im.abs() > 1e-8 {
        return Err(Error::Guard(format!(
            "expectation has imaginary part {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Bit offsets of a support inside an `n`-qubit index.
#[derive(Debug, Clone)]
struct Layout {
    /// Full-index offset of each local basis index.
    offsets: Vec<usize>,
    /// Full indices with all support bits cleared.
    rest: Vec<usize>,
}

impl Layout {
    fn new(support: &[usize], n: usize) -> Self {
        let s = support.len();
        let offsets = (0..1usize << s)
            .map(|i| {
                support
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (b, &site)| acc | (((i >> (s - 1 - b)) & 1) << (n - 1 - site)))
            })
            .collect();
        let mask = support.iter().fold(0usize, |m, &site| m | 1 << (n - 1 - site));
        let rest = (0..1usize << n).filter(|x| x & mask == 0).collect();
        Self { offsets, rest }
    }
}

/// `out += (A ⊗ I) x`.
fn left_apply_add(a: &ComplexMatrix, layout: &Layout, x: &ComplexMatrix, out: &mut ComplexMatrix) {
    let d = x.cols();
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for &rr in &layout.rest {
        for (i, &oi) in layout.offsets.iter().enumerate() {
            let out_row = (rr + oi) * d;
            for (j, &oj) in layout.offsets.iter().enumerate() {
                let aij = a[(i, j)];
                if aij == ZERO {
                    continue;
                }
                let in_row = (rr + oj) * d;
                for c in 0..d {
                    os[out_row + c] += aij * xs[in_row + c];
                }
            }
        }
    }
}

/// `(A ⊗ I) x`.
fn left_apply(a: &ComplexMatrix, layout: &Layout, x: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
    left_apply_add(a, layout, x, &mut out);
    out
}

/// `out += x (B ⊗ I)`.
fn right_apply_add(b: &ComplexMatrix, layout: &Layout, x: &ComplexMatrix, out: &mut ComplexMatrix) {
    let d = x.cols();
    let k = layout.offsets.len();
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    let mut gathered = vec![ZERO; k];
    for r in 0..x.rows() {
        let row = r * d;
        for &cr in &layout.rest {
            for (i, &oi) in layout.offsets.iter().enumerate() {
                gathered[i] = xs[row + cr + oi];
            }
            for (j, &oj) in layout.offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (i, g) in gathered.iter().enumerate() {
                    acc += g * b[(i, j)];
                }
                os[row + cr + oj] += acc;
            }
        }
    }
}

/// Applies a local channel matrix (column-stacked, `4^s × 4^s`) in place.
fn channel_apply(e: &ComplexMatrix, layout: &Layout, x: &mut ComplexMatrix) {
    let d = x.cols();
    let k = layout.offsets.len();
    let xs = x.as_mut_slice();
    let mut block = vec![ZERO; k * k];
    let mut image = vec![ZERO; k * k];
    for &rr in &layout.rest {
        for &cr in &layout.rest {
            for (j, &oj) in layout.offsets.iter().enumerate() {
                for (i, &oi) in layout.offsets.iter().enumerate() {
                    block[i + j * k] = xs[(rr + oi) * d + cr + oj];
                }
            }
            for (row, out) in image.iter_mut().enumerate() {
                let coeffs = e.row(row);
                *out = coeffs.iter().zip(&block).map(|(c, v)| c * v).sum();
            }
            for (j, &oj) in layout.offsets.iter().enumerate() {
                for (i, &oi) in layout.offsets.iter().enumerate() {
                    xs[(rr + oi) * d + cr + oj] = image[i + j * k];
                }
            }
        }
    }
}

/// Matrix-free action of a pair-form superoperator on `2^N` matrices.
#[derive(Debug, Clone)]
pub struct GeneratorAction {
    terms: Vec<(Option<ComplexMatrix>, Option<ComplexMatrix>, Layout)>,
    norm_bound: f64,
    n_sites: usize,
}

fn identity_free(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    (!m.approx_eq(&ComplexMatrix::identity(m.rows()), 0.0)).then(|| m.clone())
}

impl GeneratorAction {
    pub fn new(s: &PairFormSuperop, n_sites: usize) -> Self {
        let packed = s.compress();
        let terms = packed
            .terms
            .iter()
            .map(|t| {
                (
                    identity_free(&t.a),
                    identity_free(&t.b),
                    Layout::new(&t.support, n_sites),
                )
            })
            .collect();
        Self {
            terms,
            norm_bound: packed.norm_bound(),
            n_sites,
        }
    }

    pub fn for_model(model: &LindbladModel) -> Self {
        Self::new(&model_superop(model), model.n_sites())
    }

    /// Upper bound on the induced norm of the generator.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
        for (a, b, layout) in &self.terms {
            match (a, b) {
                (Some(a), None) => left_apply_add(a, layout, x, &mut out),
                (None, Some(b)) => right_apply_add(b, layout, x, &mut out),
                (Some(a), Some(b)) => {
                    let ax = left_apply(a, layout, x);
                    right_apply_add(b, layout, &ax, &mut out);
                }
                (None, None) => out += x,
            }
        }
        out
    }

    /// `e^{t L} x` by a Taylor series on sub-steps of norm at most one.
    pub fn exp_apply(&self, x: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let steps = (t * self.norm_bound).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut state = x.clone();
        for _ in 0..steps {
            let mut term = state.clone();
            let mut sum = state.clone();
            for k in 1..=60 {
                term = self.apply(&term).scale_real(h / k as f64);
                sum += &term;
                if term.max_abs() <= 1e-17 * sum.max_abs() {
                    break;
                }
            }
            state = sum;
        }
        state
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
}

/// How the exact reference `e^{tL}ρ₀` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactMethod {
    /// Dense exponential up to [`AUTO_DENSE_MAX`] sites, Taylor action beyond.
    Auto,
    /// Exponential of the dense `4^N` Liouvillian.
    DenseExpm,
    /// Matrix-free Taylor series on the density matrix.
    TaylorAction,
    /// Classical RK4, step count doubled until the result moves by less than
    /// `1e-10` in trace norm.
    Rk4,
    /// Forward Euler with a fixed number of steps.
    Euler { steps: usize },
}

fn check_time(t: f64, name: &'static str) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name,
            value: t,
            reason: "must be finite and non-negative",
        });
    }
    Ok(())
}

fn check_state(model: &LindbladModel, rho: &DensityMatrix) -> Result<()> {
    if rho.n_sites() != model.n_sites() {
        return Err(Error::DimensionMismatch {
            op: "evolution",
            left: (model.dim(), model.dim()),
            right: rho.matrix().shape(),
        });
    }
    Ok(())
}

pub fn exact_evolution(model: &LindbladModel, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    exact_evolution_with(model, rho0, t, ExactMethod::Auto)
}

pub fn exact_evolution_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    method: ExactMethod,
) -> Result<DensityMatrix> {
    check_time(t, "t")?;
    check_state(model, rho0)?;
    let n = model.n_sites();
    let method = match method {
        ExactMethod::Auto if n <= AUTO_DENSE_MAX => ExactMethod::DenseExpm,
        ExactMethod::Auto => ExactMethod::TaylorAction,
        other => other,
    };
    let out = match method {
        ExactMethod::DenseExpm => {
            if n > DENSE_EXACT_CAP {
                return Err(Error::TooLarge {
                    what: "dense Liouvillian exponential",
                    n,
                    cap: DENSE_EXACT_CAP,
                });
            }
            let l = model_liouvillian(model)?;
            let e = expm(&l, t)?;
            unvec_columns(&matvec(&e, &vec_columns(rho0.matrix()))?, model.dim())?
        }
        ExactMethod::TaylorAction => GeneratorAction::for_model(model).exp_apply(rho0.matrix(), t),
        ExactMethod::Rk4 => rk4_converged(&GeneratorAction::for_model(model), rho0.matrix(), t)?,
        ExactMethod::Euler { steps } => {
            if steps == 0 {
                return Err(Error::OutOfRange {
                    name: "euler steps",
                    value: 0.0,
                    reason: "must be positive",
                });
            }
            euler(&GeneratorAction::for_model(model), rho0.matrix(), t, steps)
        }
        ExactMethod::Auto => unreachable!("resolved above"),
    };
    DensityMatrix::checked_cheap(out, n)
}

fn rk4(gen: &GeneratorAction, x0: &ComplexMatrix, t: f64, steps: usize) -> ComplexMatrix {
    let h = t / steps as f64;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = gen.apply(&x);
        let mut y = x.clone();
        y.axpy(C64::new(h / 2.0, 0.0), &k1);
        let k2 = gen.apply(&y);
        let mut y = x.clone();
        y.axpy(C64::new(h / 2.0, 0.0), &k2);
        let k3 = gen.apply(&y);
        let mut y = x.clone();
        y.axpy(C64::new(h, 0.0), &k3);
        let k4 = gen.apply(&y);
        x.axpy(C64::new(h / 6.0, 0.0), &k1);
        x.axpy(C64::new(h / 3.0, 0.0), &k2);
        x.axpy(C64::new(h / 3.0, 0.0), &k3);
        x.axpy(C64::new(h / 6.0, 0.0), &k4);
    }
    x
}

const RK4_MAX_DOUBLINGS: usize = 8;

fn rk4_converged(gen: &GeneratorAction, x0: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let mut steps = (1e4 * t).ceil().max(1.0) as usize;
    let mut prev = rk4(gen, x0, t, steps);
    for _ in 0..RK4_MAX_DOUBLINGS {
        steps *= 2;
        let next = rk4(gen, x0, t, steps);
        let change = trace_norm(&(&next - &prev).hermitian_part())?;
        prev = next;
        if change < 1e-10 {
            return Ok(prev);
        }
    }
    Err(Error::NoConvergence {
        what: "RK4 step doubling",
        iterations: RK4_MAX_DOUBLINGS,
    })
}

fn euler(gen: &GeneratorAction, x0: &ComplexMatrix, t: f64, steps: usize) -> ComplexMatrix {
    let h = t / steps as f64;
    let mut x = x0.clone();
    for _ in 0..steps {
        let dx = gen.apply(&x);
        x.axpy(C64::new(h, 0.0), &dx);
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrotterOrder {
    First,
    Second,
}

impl TrotterOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(TrotterOrder::First),
            2 => Ok(TrotterOrder::Second),
            _ => Err(Error::OutOfRange {
                name: "order",
                value: order as f64,
                reason: "product formula order must be 1 or 2",
            }),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            TrotterOrder::First => 1,
            TrotterOrder::Second => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelBackend {
    /// Per-summand exponential of the `4^N` superoperator matrix.
    SuperopExp,
    /// Local channel matrices applied block by block.
    LocalApply,
}

/// `e^{τ L_j}` for one summand.
#[derive(Debug, Clone)]
enum Channel {
    /// Product of mutually commuting local channels.
    Local(Vec<(ComplexMatrix, Layout)>),
    /// `ρ ↦ U ρ U†` on the whole register.
    Unitary(ComplexMatrix),
    /// Dense superoperator acting on `vec(ρ)`.
    Superop(ComplexMatrix),
}

impl Channel {
    fn apply(&self, x: &mut ComplexMatrix) {
        match self {
            Channel::Local(parts) => {
                for (e, layout) in parts {
                    channel_apply(e, layout, x);
                }
            }
            Channel::Unitary(u) => {
                *x = &(u * &*x) * &u.adjoint();
            }
            Channel::Superop(s) => {
                let d = x.rows();
                let v = matvec(s, &vec_columns(x)).expect("superop matches state");
                *x = unvec_columns(&v, d).expect("square state");
            }
        }
    }
}

fn pieces_commute(pieces: &[crate::model::LocalOperator]) -> bool {
    for (i, p) in pieces.iter().enumerate() {
        for q in &pieces[i + 1..] {
            if !crate::model::supports_overlap(p.support(), q.support()) {
                continue;
            }
            let u = union_support(p.support(), q.support());
            let a = p.embed(&u);
            let b = q.embed(&u);
            let comm = &(&a * &b) - &(&b * &a);
            if comm.max_abs() > 1e-12 * (a.max_abs() * b.max_abs()).max(1e-300) {
                return false;
            }
        }
    }
    true
}

fn local_channel(model: &LindbladModel, index: usize, tau: f64) -> Result<Channel> {
    let n = model.n_sites();
    match model.summand(index)? {
        Summand::Coherent(term) => {
            if pieces_commute(&term.pieces) {
                let parts = term
                    .pieces
                    .iter()
                    .map(|p| {
                        let gen = crate::model::coherent_component(p);
                        let m = local_superop_matrix(&gen, p.support());
                        Ok((expm(&m, tau)?, Layout::new(p.support(), n)))
                    })
                    .collect::<Result<_>>()?;
                Ok(Channel::Local(parts))
            } else {
                let full: Vec<usize> = (0..n).collect();
                let dim = model.dim();
                let mut h = ComplexMatrix::zeros(dim, dim);
                for p in &term.pieces {
                    h += &p.embed(&full);
                }
                let u = crate::linalg::expm_complex(&h, C64::new(0.0, -tau))?;
                Ok(Channel::Unitary(u))
            }
        }
        Summand::Dissipator(jump) => {
            let support = jump.support();
            if support.len() > LOCAL_CHANNEL_CAP {
                return Err(Error::TooLarge {
                    what: "local dissipator channel",
                    n: support.len(),
                    cap: LOCAL_CHANNEL_CAP,
                });
            }
            let gen = summand_superop(model, index)?;
            let m = local_superop_matrix(&gen, &support);
            Ok(Channel::Local(vec![(expm(&m, tau)?, Layout::new(&support, n))]))
        }
    }
}

fn superop_channel(model: &LindbladModel, index: usize, tau: f64) -> Result<Channel> {
    let n = model.n_sites();
    if n > SUPEROP_BACKEND_CAP {
        return Err(Error::TooLarge {
            what: "superoperator channel backend",
            n,
            cap: SUPEROP_BACKEND_CAP,
        });
    }
    let gen = summand_superop(model, index)?;
    let full: Vec<usize> = (0..n).collect();
    let m = local_superop_matrix(&gen, &full);
    Ok(Channel::Superop(expm(&m, tau)?))
}

fn build_channel(model: &LindbladModel, index: usize, tau: f64, backend: ChannelBackend) -> Result<Channel> {
    match backend {
        ChannelBackend::LocalApply => local_channel(model, index, tau),
        ChannelBackend::SuperopExp => superop_channel(model, index, tau),
    }
}

/// One product-formula step at a fixed `τ`, with all channels precomputed.
#[derive(Debug, Clone)]
pub struct TrotterStepper {
    /// Channels in the order they act on the state.
    sequence: Vec<Channel>,
    n_sites: usize,
    tau: f64,
    order: TrotterOrder,
}

impl TrotterStepper {
    pub fn new(
        model: &LindbladModel,
        tau: f64,
        order: TrotterOrder,
        backend: ChannelBackend,
    ) -> Result<Self> {
        check_time(tau, "tau")?;
        let m = model.num_summands();
        let mut sequence = Vec::new();
        match order {
            TrotterOrder::First => {
                for j in (0..m).rev() {
                    sequence.push(build_channel(model, j, tau, backend)?);
                }
            }
            TrotterOrder::Second => {
                let halves: Vec<Channel> = (0..m)
                    .map(|j| build_channel(model, j, tau / 2.0, backend))
                    .collect::<Result<_>>()?;
                for j in (1..m).rev() {
                    sequence.push(halves[j].clone());
                }
                if m > 0 {
                    sequence.push(build_channel(model, 0, tau, backend)?);
                }
                sequence.extend(halves.into_iter().skip(1));
            }
        }
        Ok(Self {
            sequence,
            n_sites: model.n_sites(),
            tau,
            order,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn order(&self) -> TrotterOrder {
        self.order
    }

    /// Applies one step to any `2^N` matrix, not only states.
    pub fn apply_in_place(&self, x: &mut ComplexMatrix) {
        for c in &self.sequence {
            c.apply(x);
        }
    }

    pub fn step(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.evolve(rho, 1)
    }

    pub fn evolve(&self, rho: &DensityMatrix, steps: usize) -> Result<DensityMatrix> {
        if rho.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                op: "trotter step",
                left: (1 << self.n_sites, 1 << self.n_sites),
                right: rho.matrix().shape(),
            });
        }
        let mut x = rho.matrix().clone();
        for _ in 0..steps {
            self.apply_in_place(&mut x);
        }
        DensityMatrix::checked_cheap(x, self.n_sites)
    }

    /// Column-stacked `4^N` matrix of one step.
    pub fn superop_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.n_sites;
        if n > crate::model::LIOUVILLIAN_MATRIX_CAP {
            return Err(Error::TooLarge {
                what: "step superoperator matrix",
                n,
                cap: crate::model::LIOUVILLIAN_MATRIX_CAP,
            });
        }
        let d = 1usize << n;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                self.apply_in_place(&mut e);
                let col = i + j * d;
                for (row, v) in vec_columns(&e).into_iter().enumerate() {
                    out[(row, col)] = v;
                }
            }
        }
        Ok(out)
    }
}

pub fn trotter_step_second_order(
    model: &LindbladModel,
    rho: &DensityMatrix,
    tau: f64,
    backend: ChannelBackend,
) -> Result<DensityMatrix> {
    check_state(model, rho)?;
    TrotterStepper::new(model, tau, TrotterOrder::Second, backend)?.step(rho)
}

pub fn trotter_step_first_order(
    model: &LindbladModel,
    rho: &DensityMatrix,
    tau: f64,
    backend: ChannelBackend,
) -> Result<DensityMatrix> {
    check_state(model, rho)?;
    TrotterStepper::new(model, tau, TrotterOrder::First, backend)?.step(rho)
}

/// `r` steps of size `t / r`.
pub fn trotter_evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    r: usize,
    order: TrotterOrder,
    backend: ChannelBackend,
) -> Result<DensityMatrix> {
    if r == 0 {
        return Err(Error::OutOfRange {
            name: "r",
            value: 0.0,
            reason: "step count must be at least 1",
        });
    }
    check_time(t, "t")?;
    check_state(model, rho0)?;
    TrotterStepper::new(model, t / r as f64, order, backend)?.evolve(rho0, r)
}

/// `‖e^{tL}ρ₀ − S(t/r)^r ρ₀‖₁`.
pub fn trace_distance_error(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    r: usize,
    order: TrotterOrder,
    backend: ChannelBackend,
) -> Result<f64> {
    let exact = exact_evolution(model, rho0, t)?;
    let approx = trotter_evolve(model, rho0, t, r, order, backend)?;
    trace_distance(&exact, &approx)
}

pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    trace_norm(&(a.matrix() - b.matrix()).hermitian_part())
}

/// Choi matrix `Σ_{ij} |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a column-stacked superoperator
/// on `d`-dimensional matrices.
pub fn choi_matrix(superop: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    if superop.shape() != (d * d, d * d) {
        return Err(Error::DimensionMismatch {
            op: "choi_matrix",
            left: superop.shape(),
            right: (d * d, d * d),
        });
    }
    let mut c = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    c[(i * d + k, j * d + l)] = superop[(k + l * d, i + j * d)];
                }
            }
        }
    }
    Ok(c)
}

/// Norms of the `τ²` and `τ³` coefficients of `S(τ) − e^{τL}`.
///
/// The even part `(E(τ) + E(−τ))/2τ²` is extrapolated to `τ → 0` over four
/// halvings of `tau0`; the odd part `(E(τ) − E(−τ))/2τ³` at the smallest `τ`
/// estimates the cubic coefficient. Dense, so small chains only.
pub fn step_error_coefficients(model: &LindbladModel, tau0: f64) -> Result<(f64, f64)> {
    let l = model_liouvillian(model)?;
    let error_at = |tau: f64| -> Result<ComplexMatrix> {
        let s = signed_step_matrix(model, tau)?;
        Ok(&s - &expm(&l, tau)?)
    };
    let levels = 4;
    let mut even = Vec::with_capacity(levels);
    let mut odd_last = None;
    for lvl in 0..levels {
        let tau = tau0 / (1u32 << lvl) as f64;
        let plus = error_at(tau)?;
        let minus = error_at(-tau)?;
        even.push((&plus + &minus).scale_real(0.5 / (tau * tau)));
        odd_last = Some((&plus - &minus).scale_real(0.5 / (tau * tau * tau)));
    }
    // Even part is c₂ + c₄τ² + c₆τ⁴ + …; Neville elimination in τ² with ratio 4.
    let mut table = even;
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (&w[1].scale_real(factor) - &w[0]).scale_real(1.0 / (factor - 1.0)))
            .collect();
        factor *= 4.0;
    }
    let c2 = crate::linalg::spectral_norm(&table[0]);
    let c3 = crate::linalg::spectral_norm(&odd_last.expect("at least one level"));
    Ok((c2, c3))
}

/// Second-order step matrix for either sign of `τ` (negative `τ` gives the
/// formal inverse, not a channel).
pub(crate) fn signed_step_matrix(model: &LindbladModel, tau: f64) -> Result<ComplexMatrix> {
    let n = model.n_sites();
    let full: Vec<usize> = (0..n).collect();
    let m = model.num_summands();
    let gens: Vec<ComplexMatrix> = (0..m)
        .map(|j| Ok(local_superop_matrix(&summand_superop(model, j)?, &full)))
        .collect::<Result<_>>()?;
    let d2 = model.dim() * model.dim();
    let mut s = ComplexMatrix::identity(d2);
    // Build the operator product left to right.
    for g in gens.iter().rev() {
        s = &s * &expm(g, tau / 2.0)?;
    }
    for g in gens.iter() {
        s = &s * &expm(g, tau / 2.0)?;
    }
    Ok(s)
}
