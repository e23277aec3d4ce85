//! Lindbladian models on a chain of qubits and their superoperator forms.
//!
//! Sites are 0-indexed. In every full-system matrix, site 0 is the most
//! significant qubit, so an operator on sites `[0, 1]` of a 3-qubit chain
//! embeds as `op ⊗ I₂`.

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, C64, I, ONE, ZERO};

/// Largest chain for which [`liouvillian_matrix`] builds a dense `4^n` matrix.
pub const LIOUVILLIAN_MATRIX_CAP: usize = 7;

/// Operator acting on a few sites of the chain.
///
/// The support is strictly increasing and the matrix is laid out as the
/// Kronecker product over the support in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    support: Vec<usize>,
    matrix: ComplexMatrix,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>, matrix: ComplexMatrix) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidModel("local operator with empty support".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(format!(
                "support {support:?} must be strictly increasing"
            )));
        }
        let dim = 1usize << support.len();
        if matrix.shape() != (dim, dim) {
            return Err(Error::InvalidModel(format!(
                "support {:?} needs a {dim}x{dim} matrix, got {:?}",
                support,
                matrix.shape()
            )));
        }
        Ok(Self { support, matrix })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// The operator padded with identities onto `target`, which must contain
    /// the support.
    pub fn embed(&self, target: &[usize]) -> ComplexMatrix {
        embed_operator(&self.matrix, &self.support, target)
    }
}

/// Pads `op` (acting on `from`) with identities so it acts on `to`.
///
/// Both site lists are strictly increasing and `from ⊆ to`.
pub fn embed_operator(op: &ComplexMatrix, from: &[usize], to: &[usize]) -> ComplexMatrix {
    if from == to {
        return op.clone();
    }
    let nt = to.len();
    let positions: Vec<usize> = from
        .iter()
        .map(|s| {
            to.iter()
                .position(|t| t == s)
                .expect("embedding target must contain the support")
        })
        .collect();
    let nf = from.len();
    let mut sub_mask = 0usize;
    for &p in &positions {
        sub_mask |= 1 << (nt - 1 - p);
    }
    let sub_index = |i: usize| -> usize {
        positions
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &p)| acc | (((i >> (nt - 1 - p)) & 1) << (nf - 1 - b)))
    };
    let dim = 1usize << nt;
    let subs: Vec<usize> = (0..dim).map(sub_index).collect();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !sub_mask == j & !sub_mask {
                out[(i, j)] = op[(subs[i], subs[j])];
            }
        }
    }
    out
}

/// Sorted union of two site lists.
pub fn union_support(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

pub fn supports_overlap(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|s| b.contains(s))
}

/// One coherent Trotter summand `−i[H_μ, ·]`, stored as its local pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub label: String,
    pub pieces: Vec<LocalOperator>,
}

/// Jump operator `L_ν = Σ_γ d_{ν,γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub label: String,
    pub components: Vec<LocalOperator>,
}

impl JumpOperator {
    pub fn support(&self) -> Vec<usize> {
        self.components
            .iter()
            .fold(Vec::new(), |acc, c| union_support(&acc, c.support()))
    }

    /// `L_ν` as a matrix on [`JumpOperator::support`].
    pub fn local_matrix(&self) -> ComplexMatrix {
        let support = self.support();
        let dim = 1usize << support.len();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for c in &self.components {
            m += &c.embed(&support);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Summand<'a> {
    Coherent(&'a HamiltonianTerm),
    Dissipator(&'a JumpOperator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    n_sites: usize,
    hamiltonian_terms: Vec<HamiltonianTerm>,
    jump_operators: Vec<JumpOperator>,
    k: usize,
    gamma_cap: usize,
}

impl LindbladModel {
    /// Validates the terms and infers `k` (largest support) and `Γ`
    /// (largest jump component count).
    pub fn new(
        n_sites: usize,
        hamiltonian_terms: Vec<HamiltonianTerm>,
        jump_operators: Vec<JumpOperator>,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidModel("model needs at least one site".into()));
        }
        let mut k = 0;
        for term in &hamiltonian_terms {
            for piece in &term.pieces {
                check_sites(piece, n_sites)?;
                let dev = piece.matrix().hermitian_deviation();
                if dev > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "Hamiltonian piece of {} on {:?} is not Hermitian (deviation {dev:e})",
                        term.label,
                        piece.support()
                    )));
                }
                k = k.max(piece.support().len());
            }
        }
        let mut gamma_cap = 0;
        for jump in &jump_operators {
            if jump.components.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "jump operator {} has no components",
                    jump.label
                )));
            }
            for c in &jump.components {
                check_sites(c, n_sites)?;
                k = k.max(c.support().len());
            }
            gamma_cap = gamma_cap.max(jump.components.len());
        }
        Ok(Self {
            n_sites,
            hamiltonian_terms,
            jump_operators,
            k: k.max(1),
            gamma_cap,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn hamiltonian_terms(&self) -> &[HamiltonianTerm] {
        &self.hamiltonian_terms
    }

    pub fn jump_operators(&self) -> &[JumpOperator] {
        &self.jump_operators
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma_cap(&self) -> usize {
        self.gamma_cap
    }

    /// Trotter summand count `m`.
    pub fn num_summands(&self) -> usize {
        self.hamiltonian_terms.len() + self.jump_operators.len()
    }

    /// Summands in canonical order: Hamiltonian terms, then dissipators.
    pub fn summand(&self, index: usize) -> Result<Summand<'_>> {
        let nh = self.hamiltonian_terms.len();
        if index < nh {
            Ok(Summand::Coherent(&self.hamiltonian_terms[index]))
        } else if index < self.num_summands() {
            Ok(Summand::Dissipator(&self.jump_operators[index - nh]))
        } else {
            Err(Error::OutOfRange {
                name: "summand index",
                value: index as f64,
                reason: "must be below the summand count",
            })
        }
    }

    /// A copy keeping only the listed summands, in the given order.
    pub fn restricted(&self, indices: &[usize]) -> Result<Self> {
        let mut h = Vec::new();
        let mut d = Vec::new();
        for &i in indices {
            match self.summand(i)? {
                Summand::Coherent(t) => h.push(t.clone()),
                Summand::Dissipator(j) => d.push(j.clone()),
            }
        }
        Self::new(self.n_sites, h, d)
    }
}

fn check_sites(op: &LocalOperator, n: usize) -> Result<()> {
    if let Some(&s) = op.support().iter().find(|&&s| s >= n) {
        return Err(Error::InvalidModel(format!(
            "site {s} is outside a chain of {n} sites"
        )));
    }
    Ok(())
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap()
}

/// `|0⟩⟨1|`.
pub fn lowering() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ZERO, ZERO]).unwrap()
}

/// Dissipative transverse-field Ising chain.
///
/// `H_X = −J Σ X_j X_{j+1}` and `H_Z = −h Σ Z_j` are one summand each, and
/// every site carries the jump operator `√γ |0⟩⟨1|`, giving `m = 2 + n`.
pub fn build_tfim(n: usize, j_coupling: f64, h_field: f64, gamma: f64) -> Result<LindbladModel> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("TFIM needs n >= 2, got {n}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            reason: "must be finite and non-negative",
        });
    }
    if !j_coupling.is_finite() || !h_field.is_finite() {
        return Err(Error::InvalidModel("couplings must be finite".into()));
    }
    let xx = kron(&pauli_x(), &pauli_x()).scale_real(-j_coupling);
    let z = pauli_z().scale_real(-h_field);
    let damp = lowering().scale_real(gamma.sqrt());

    let hx = HamiltonianTerm {
        label: "H_X".into(),
        pieces: (0..n - 1)
            .map(|j| LocalOperator::new(vec![j, j + 1], xx.clone()))
            .collect::<Result<_>>()?,
    };
    let hz = HamiltonianTerm {
        label: "H_Z".into(),
        pieces: (0..n)
            .map(|j| LocalOperator::new(vec![j], z.clone()))
            .collect::<Result<_>>()?,
    };
    let jumps = (0..n)
        .map(|j| {
            Ok(JumpOperator {
                label: format!("L_{j}"),
                components: vec![LocalOperator::new(vec![j], damp.clone())?],
            })
        })
        .collect::<Result<_>>()?;
    LindbladModel::new(n, vec![hx, hz], jumps)
}

/// `ρ ↦ (A ⊗ I) ρ (B ⊗ I)` with `A`, `B` acting on `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub support: Vec<usize>,
}

impl PairTerm {
    pub fn new(a: ComplexMatrix, b: ComplexMatrix, support: Vec<usize>) -> Self {
        let dim = 1usize << support.len();
        assert_eq!(a.shape(), (dim, dim), "pair term A does not match its support");
        assert_eq!(b.shape(), (dim, dim), "pair term B does not match its support");
        Self { a, b, support }
    }

    pub fn norm_bound(&self) -> f64 {
        crate::linalg::spectral_norm(&self.a) * crate::linalg::spectral_norm(&self.b)
    }

    /// Same map on a larger support.
    pub fn embedded(&self, target: &[usize]) -> PairTerm {
        PairTerm {
            a: embed_operator(&self.a, &self.support, target),
            b: embed_operator(&self.b, &self.support, target),
            support: target.to_vec(),
        }
    }
}

/// Superoperator `ρ ↦ Σ_i A_i ρ B_i`.
///
/// Each term keeps its own (small) support rather than being padded to a
/// common one; [`PairFormSuperop::support`] is the union. The quantity
/// [`PairFormSuperop::norm_bound`] upper-bounds the diamond norm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairFormSuperop {
    pub terms: Vec<PairTerm>,
}

impl PairFormSuperop {
    pub fn new(terms: Vec<PairTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.terms
            .iter()
            .fold(Vec::new(), |acc, t| union_support(&acc, &t.support))
    }

    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(PairTerm::norm_bound).sum()
    }

    pub fn touches(&self, site: usize) -> bool {
        self.terms.iter().any(|t| t.support.contains(&site))
    }

    pub fn extend(&mut self, other: &PairFormSuperop) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a PairFormSuperop>) -> Self {
        let mut out = Self::zero();
        for p in parts {
            out.extend(p);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| PairTerm {
                    a: t.a.scale(s),
                    b: t.b.clone(),
                    support: t.support.clone(),
                })
                .collect(),
        }
    }

    /// An equivalent, usually shorter, term list.
    ///
    /// Scalar factors are moved into the non-identity side, terms on the same
    /// support whose `B` (or `A`) are proportional are merged, and terms whose
    /// bound falls below `1e-14` are dropped.
    pub fn compress(&self) -> Self {
        let mut terms: Vec<PairTerm> = self.terms.iter().filter_map(normalize_term).collect();
        terms.sort_by(|x, y| x.support.cmp(&y.support));

        let mut out = Vec::with_capacity(terms.len());
        let mut start = 0;
        while start < terms.len() {
            let mut end = start + 1;
            while end < terms.len() && terms[end].support == terms[start].support {
                end += 1;
            }
            let group = terms[start..end].to_vec();
            let group = merge_proportional(group, Side::B);
            let group = merge_proportional(group, Side::A);
            out.extend(group.iter().filter_map(normalize_term));
            start = end;
        }
        Self { terms: out }
    }
}

const NEGLIGIBLE: f64 = 1e-14;

/// `c·I` test returning `c`.
fn scalar_of(m: &ComplexMatrix) -> Option<C64> {
    let c = m[(0, 0)];
    let n = m.rows();
    let tol = 1e-14 * m.max_abs().max(1e-300);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { c } else { ZERO };
            if (m[(i, j)] - want).norm() > tol {
                return None;
            }
        }
    }
    Some(c)
}

fn normalize_term(t: &PairTerm) -> Option<PairTerm> {
    let amax = t.a.max_abs();
    let bmax = t.b.max_abs();
    if amax * bmax <= NEGLIGIBLE {
        return None;
    }
    let dim = t.a.rows();
    if let Some(c) = scalar_of(&t.b) {
        return Some(PairTerm {
            a: t.a.scale(c),
            b: ComplexMatrix::identity(dim),
            support: t.support.clone(),
        });
    }
    if let Some(c) = scalar_of(&t.a) {
        return Some(PairTerm {
            a: ComplexMatrix::identity(dim),
            b: t.b.scale(c),
            support: t.support.clone(),
        });
    }
    Some(t.clone())
}

#[derive(Clone, Copy)]
enum Side {
    A,
    B,
}

/// If `y = c·x`, returns `c`.
fn proportionality(x: &ComplexMatrix, y: &ComplexMatrix) -> Option<C64> {
    let data = x.as_slice();
    let (k, pivot) = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    if pivot.norm() == 0.0 {
        return None;
    }
    let c = y.as_slice()[k] / pivot;
    let tol = 1e-13 * y.max_abs().max(x.max_abs() * c.norm()).max(1e-300);
    data.iter()
        .zip(y.as_slice())
        .all(|(&xv, &yv)| (yv - c * xv).norm() <= tol)
        .then_some(c)
}

/// Merges terms whose `side` matrices are proportional by summing the other
/// side.
fn merge_proportional(group: Vec<PairTerm>, side: Side) -> Vec<PairTerm> {
    let mut out: Vec<PairTerm> = Vec::with_capacity(group.len());
    for t in group {
        let mut merged = false;
        for o in out.iter_mut() {
            let (key_o, key_t) = match side {
                Side::B => (&o.b, &t.b),
                Side::A => (&o.a, &t.a),
            };
            if let Some(c) = proportionality(key_o, key_t) {
                match side {
                    Side::B => o.a.axpy(c, &t.a),
                    Side::A => o.b.axpy(c, &t.b),
                }
                merged = true;
                break;
            }
        }
        if !merged {
            out.push(t);
        }
    }
    out
}

/// `−i[H, ·]` for one Hamiltonian piece.
pub fn coherent_component(piece: &LocalOperator) -> PairFormSuperop {
    let h = piece.matrix();
    let id = ComplexMatrix::identity(h.rows());
    PairFormSuperop::new(vec![
        PairTerm::new(h.scale(-I), id.clone(), piece.support().to_vec()),
        PairTerm::new(id, h.scale(I), piece.support().to_vec()),
    ])
}

/// `d₁(·)d₂† − ½{d₂†d₁, ·}` on the union of the two supports.
pub fn dissipator_component(d1: &LocalOperator, d2: &LocalOperator) -> PairFormSuperop {
    let support = union_support(d1.support(), d2.support());
    let a = d1.embed(&support);
    let b = d2.embed(&support);
    let b_dag = b.adjoint();
    let anti = (&b_dag * &a).scale_real(-0.5);
    let id = ComplexMatrix::identity(a.rows());
    PairFormSuperop::new(vec![
        PairTerm::new(a, b_dag, support.clone()),
        PairTerm::new(anti.clone(), id.clone(), support.clone()),
        PairTerm::new(id, anti, support),
    ])
}

/// Pair form of summand `index`.
pub fn summand_superop(model: &LindbladModel, index: usize) -> Result<PairFormSuperop> {
    Ok(match model.summand(index)? {
        Summand::Coherent(term) => PairFormSuperop::new(
            term.pieces
                .iter()
                .flat_map(|p| coherent_component(p).terms)
                .collect(),
        ),
        Summand::Dissipator(jump) => {
            let mut out = PairFormSuperop::zero();
            for d1 in &jump.components {
                for d2 in &jump.components {
                    out.extend(&dissipator_component(d1, d2));
                }
            }
            out
        }
    })
}

/// All summands of the model, in canonical order.
pub fn summand_superops(model: &LindbladModel) -> Vec<PairFormSuperop> {
    (0..model.num_summands())
        .map(|i| summand_superop(model, i).expect("index in range"))
        .collect()
}

/// The full generator `L = Σ_j L_j`.
pub fn model_superop(model: &LindbladModel) -> PairFormSuperop {
    PairFormSuperop::sum(summand_superops(model).iter())
}

/// Local components: one per Hamiltonian piece and one per
/// `(ν, γ₁, γ₂)` dissipator cross term.
pub fn local_components(model: &LindbladModel) -> Vec<PairFormSuperop> {
    let mut out = Vec::new();
    for term in model.hamiltonian_terms() {
        out.extend(term.pieces.iter().map(coherent_component));
    }
    for jump in model.jump_operators() {
        for d1 in &jump.components {
            for d2 in &jump.components {
                out.push(dissipator_component(d1, d2));
            }
        }
    }
    out
}

/// Largest per-site sum of local component bounds.
pub fn extensiveness_g(model: &LindbladModel) -> f64 {
    let components = local_components(model);
    let bounds: Vec<f64> = components.iter().map(PairFormSuperop::norm_bound).collect();
    (0..model.n_sites())
        .map(|site| {
            components
                .iter()
                .zip(&bounds)
                .filter(|(c, _)| c.touches(site))
                .map(|(_, b)| b)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Dense `4^n × 4^n` matrix of `s` under column-stacking vectorization,
/// `Σ_i (B_iᵀ ⊗ A_i)` with every term padded onto all `n` sites.
pub fn liouvillian_matrix(s: &PairFormSuperop, n: usize) -> Result<ComplexMatrix> {
    if n > LIOUVILLIAN_MATRIX_CAP {
        return Err(Error::TooLarge {
            what: "dense Liouvillian matrix",
            n,
            cap: LIOUVILLIAN_MATRIX_CAP,
        });
    }
    if let Some(&site) = s.support().iter().find(|&&x| x >= n) {
        return Err(Error::InvalidModel(format!(
            "superoperator touches site {site} outside {n} sites"
        )));
    }
    let full: Vec<usize> = (0..n).collect();
    Ok(local_superop_matrix(s, &full))
}

/// Column-stacked matrix of `s` restricted to `support`, which must contain
/// every term's support.
pub fn local_superop_matrix(s: &PairFormSuperop, support: &[usize]) -> ComplexMatrix {
    let dim = 1usize << support.len();
    let mut out = ComplexMatrix::zeros(dim * dim, dim * dim);
    for t in &s.terms {
        let a = embed_operator(&t.a, &t.support, support);
        let b = embed_operator(&t.b, &t.support, support);
        out += &kron(&b.transpose(), &a);
    }
    out
}

/// Dense Liouvillian of the whole model.
pub fn model_liouvillian(model: &LindbladModel) -> Result<ComplexMatrix> {
    liouvillian_matrix(&model_superop(model), model.n_sites())
}
