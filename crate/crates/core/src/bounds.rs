//! Nested-commutator quantities and the step-count planners built on them.
//!
//! All norms are pair-form bounds `Σ‖A‖‖B‖`, which dominate the diamond norm.
//! Commutators are formed term by term; pairs of terms with disjoint supports
//! are skipped since their contributions cancel exactly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    extensiveness_g, summand_superops, supports_overlap, union_support, LindbladModel,
    PairFormSuperop, PairTerm,
};
use crate::richardson::{coefficients, l1_norm, nodes, ExtrapolationPlan};

pub const MIN_GRADE: usize = 2;
pub const MAX_GRADE: usize = 5;
/// Largest total grade for doubly nested sums.
pub const MAX_DOUBLY_GRADE: usize = 6;
pub const DEFAULT_Q0: usize = 3;
/// The extrapolation planner gives up beyond this many steps for the finest node.
pub const MAX_PLANNED_STEPS: u64 = 1 << 32;

/// `[a, b] = a∘b − b∘a` in pair form, uncompressed.
///
/// For terms `(A₁, B₁)` of `a` and `(A₂, B₂)` of `b` on overlapping supports
/// this emits `(A₁A₂, B₂B₁)` and `(−A₂A₁, B₁B₂)` on the union support.
pub fn pairform_commutator(a: &PairFormSuperop, b: &PairFormSuperop) -> PairFormSuperop {
    commutator_impl(a, b, true)
}

/// Like [`pairform_commutator`] but also expands disjoint pairs, which
/// cancel only after [`PairFormSuperop::compress`].
pub fn pairform_commutator_unpruned(a: &PairFormSuperop, b: &PairFormSuperop) -> PairFormSuperop {
    commutator_impl(a, b, false)
}

fn commutator_impl(a: &PairFormSuperop, b: &PairFormSuperop, prune: bool) -> PairFormSuperop {
    let mut terms = Vec::new();
    for ta in &a.terms {
        for tb in &b.terms {
            if prune && !supports_overlap(&ta.support, &tb.support) {
                continue;
            }
            let u = union_support(&ta.support, &tb.support);
            let ea = ta.embedded(&u);
            let eb = tb.embedded(&u);
            terms.push(PairTerm::new(&ea.a * &eb.a, &eb.b * &ea.b, u.clone()));
            terms.push(PairTerm::new((&eb.a * &ea.a).scale_real(-1.0), &ea.b * &eb.b, u));
        }
    }
    PairFormSuperop::new(terms)
}

fn commute(a: &PairFormSuperop, b: &PairFormSuperop, prune: bool) -> PairFormSuperop {
    commutator_impl(a, b, prune).compress()
}

fn compressed_summands(model: &LindbladModel) -> Vec<PairFormSuperop> {
    summand_superops(model).iter().map(PairFormSuperop::compress).collect()
}

fn check_grade(q: usize) -> Result<()> {
    if !(MIN_GRADE..=MAX_GRADE).contains(&q) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q as f64,
            reason: "grade must lie in 2..=5",
        });
    }
    Ok(())
}

/// Visits every right-nested commutator `[S_{v₁}, …, S_{v_q}]` of the given
/// pieces, innermost index first. With pruning, branches that vanish are
/// not extended.
fn for_each_nested<F>(pieces: &[PairFormSuperop], q: usize, prune: bool, inner: &PairFormSuperop, visit: &mut F)
where
    F: FnMut(&PairFormSuperop),
{
    if q == 0 {
        visit(inner);
        return;
    }
    for p in pieces {
        let next = commute(p, inner, prune);
        if prune && next.is_empty() {
            continue;
        }
        for_each_nested(pieces, q - 1, prune, &next, visit);
    }
}

/// All grade-`q` right-nested commutators, paralleled over the innermost
/// index and returned in a fixed order.
fn nested_commutators(pieces: &[PairFormSuperop], q: usize, prune: bool) -> Vec<PairFormSuperop> {
    let per_start: Vec<Vec<PairFormSuperop>> = pieces
        .par_iter()
        .map(|start| {
            let mut out = Vec::new();
            for_each_nested(pieces, q - 1, prune, start, &mut |c| {
                if !c.is_empty() {
                    out.push(c.clone());
                }
            });
            out
        })
        .collect();
    per_start.into_iter().flatten().collect()
}

fn nested_norm_sum(pieces: &[PairFormSuperop], q: usize, prune: bool) -> f64 {
    let per_start: Vec<f64> = pieces
        .par_iter()
        .map(|start| {
            let mut acc = 0.0;
            for_each_nested(pieces, q - 1, prune, start, &mut |c| acc += c.norm_bound());
            acc
        })
        .collect();
    per_start.iter().sum()
}

/// `α_comm^(q) = Σ_{v₁…v_q} ‖[L_{v₁}, …, L_{v_q}]‖` over all `m^q` tuples.
pub fn alpha_comm_q(model: &LindbladModel, q: usize) -> Result<f64> {
    check_grade(q)?;
    Ok(nested_norm_sum(&compressed_summands(model), q, true))
}

/// [`alpha_comm_q`] without support pruning; exponentially slower, used to
/// check that pruning drops nothing.
pub fn alpha_comm_q_unpruned(model: &LindbladModel, q: usize) -> Result<f64> {
    check_grade(q)?;
    Ok(nested_norm_sum(&compressed_summands(model), q, false))
}

/// Right-nested commutator sums over the local components `K_v` instead of
/// the Trotter summands.
pub fn alpha_components_q(model: &LindbladModel, q: usize) -> Result<f64> {
    check_grade(q)?;
    let comps: Vec<PairFormSuperop> = crate::model::local_components(model)
        .iter()
        .map(PairFormSuperop::compress)
        .collect();
    Ok(nested_norm_sum(&comps, q, true))
}

/// Pair of sums bounding one second-order step:
/// `‖S(τ) − e^{τL}‖ ≤ (τ³/12)·c12 + (τ³/24)·c24`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha3Tight {
    pub c12: f64,
    pub c24: f64,
}

impl Alpha3Tight {
    /// One-step bound at step size `tau`.
    pub fn step_bound(&self, tau: f64) -> f64 {
        tau.powi(3) * (self.c12 / 12.0 + self.c24 / 24.0)
    }
}

/// `c12 = Σ_{j} ‖[T_j, [T_j, L_j]]‖` and `c24 = Σ_{j} ‖[L_j, [L_j, T_j]]‖`
/// with `T_j = Σ_{i>j} L_i`.
pub fn alpha3_tight(model: &LindbladModel) -> Alpha3Tight {
    let summands = compressed_summands(model);
    let m = summands.len();
    let parts: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let tail = PairFormSuperop::sum(summands[j + 1..].iter()).compress();
            if tail.is_empty() {
                return (0.0, 0.0);
            }
            let lj = &summands[j];
            let inner = commute(&tail, lj, true);
            let a = commute(&tail, &inner, true).norm_bound();
            let inner = commute(lj, &tail, true);
            let b = commute(lj, &inner, true).norm_bound();
            (a, b)
        })
        .collect();
    Alpha3Tight {
        c12: parts.iter().map(|p| p.0).sum(),
        c24: parts.iter().map(|p| p.1).sum(),
    }
}

/// Bound on one first-order step: `‖S₁(τ) − e^{τL}‖ ≤ (τ²/2)·Σ_j ‖[T_j, L_j]‖`.
pub fn alpha2_first_order(model: &LindbladModel) -> f64 {
    let summands = compressed_summands(model);
    (0..summands.len())
        .map(|j| {
            let tail = PairFormSuperop::sum(summands[j + 1..].iter()).compress();
            commute(&tail, &summands[j], true).norm_bound()
        })
        .sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Lattice bound `(1/(4kq))·q!·(4kg)^q·N` on the grade-`q` sum.
pub fn alpha_lattice_q(n: usize, k: usize, g: f64, q: usize) -> f64 {
    let kf = k as f64;
    factorial(q) * (4.0 * kf * g).powi(q as i32) * n as f64 / (4.0 * kf * q as f64)
}

/// Lattice bound on doubly nested sums,
/// `(1/(4k·q_d))·∏_r P_{r+1}·q_r!·(4kg)^{q_r}·N` with `P_r = Σ_{j≥r} q_j`
/// and `P_{d+1} = 1`.
pub fn alpha_doubly_lattice(n: usize, k: usize, g: f64, grades: &[usize]) -> f64 {
    let d = grades.len();
    if d == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let mut product = 1.0;
    for r in 0..d {
        let p_next = if r + 1 < d {
            grades[r + 1..].iter().sum::<usize>() as f64
        } else {
            1.0
        };
        product *= p_next * factorial(grades[r]) * (4.0 * kf * g).powi(grades[r] as i32);
    }
    product * n as f64 / (4.0 * kf * grades[d - 1] as f64)
}

/// `α_comm^(q₁,…,q_d)`: sum over all index assignments of
/// `‖[[L…]_{q₁}, …, [L…]_{q_d}]‖`, the layers themselves right-nested.
pub fn alpha_doubly_nested(model: &LindbladModel, grades: &[usize]) -> Result<f64> {
    let summands = compressed_summands(model);
    alpha_doubly_from(&summands, grades)
}

fn check_doubly(grades: &[usize]) -> Result<()> {
    let total: usize = grades.iter().sum();
    if grades.is_empty() || grades.contains(&0) {
        return Err(Error::OutOfRange {
            name: "grades",
            value: 0.0,
            reason: "need at least one layer, each of grade >= 1",
        });
    }
    if total > MAX_DOUBLY_GRADE {
        return Err(Error::OutOfRange {
            name: "grade sum",
            value: total as f64,
            reason: "doubly nested sums are capped at total grade 6",
        });
    }
    Ok(())
}

/// Layers of grade `q`: every nonzero right-nested commutator.
fn layer(summands: &[PairFormSuperop], q: usize) -> Vec<PairFormSuperop> {
    if q == 1 {
        summands.iter().filter(|s| !s.is_empty()).cloned().collect()
    } else {
        nested_commutators(summands, q, true)
    }
}

fn alpha_doubly_from(summands: &[PairFormSuperop], grades: &[usize]) -> Result<f64> {
    check_doubly(grades)?;
    let d = grades.len();
    if d == 1 {
        return Ok(if grades[0] == 1 {
            summands.iter().map(PairFormSuperop::norm_bound).sum()
        } else {
            nested_norm_sum(summands, grades[0], true)
        });
    }
    let layers: Vec<Vec<PairFormSuperop>> = grades.iter().map(|&q| layer(summands, q)).collect();

    fn descend(layers: &[Vec<PairFormSuperop>], r: usize, inner: &PairFormSuperop) -> f64 {
        let mut acc = 0.0;
        for x in &layers[r] {
            let next = commute(x, inner, true);
            if next.is_empty() {
                continue;
            }
            acc += if r == 0 {
                next.norm_bound()
            } else {
                descend(layers, r - 1, &next)
            };
        }
        acc
    }

    let per_start: Vec<f64> = layers[d - 1]
        .par_iter()
        .map(|w| descend(&layers, d - 2, w))
        .collect();
    Ok(per_start.iter().sum())
}

/// Compositions of `total` into parts in `1..=max_part`, in lexicographic order.
fn compositions(total: usize, max_part: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=max_part.min(total) {
        for mut rest in compositions(total - first, max_part) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Polynomial part of `α_comm,q₀(t)`: the coefficients of `t^q` for
/// `q = q₀+1` and `q₀+2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCommSeries {
    pub q0: usize,
    /// `(q, c_q)` with `c_q = Σ_d (1/d!) Σ_{|q⃗|=q, q_i≤q₀} α_comm^(q⃗)`.
    pub coefficients: Vec<(usize, f64)>,
    pub n_sites: usize,
    pub k: usize,
    pub g: f64,
}

/// Value of `α_comm,q₀(t)` split into its numeric and certified-tail parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaCommQ0 {
    pub numeric: f64,
    /// `None` when `8e²q₀kgt > 1`, where the tail bound does not apply.
    pub tail: Option<f64>,
}

impl AlphaCommQ0 {
    pub fn certified(&self) -> bool {
        self.tail.is_some()
    }

    /// Numeric part plus tail, or `None` when not certified.
    pub fn total(&self) -> Option<f64> {
        self.tail.map(|t| t + self.numeric)
    }
}

impl AlphaCommSeries {
    pub fn new(model: &LindbladModel, q0: usize) -> Result<Self> {
        if q0 == 0 {
            return Err(Error::OutOfRange {
                name: "q0",
                value: 0.0,
                reason: "truncation order must be at least 1",
            });
        }
        if q0 + 2 > MAX_DOUBLY_GRADE {
            return Err(Error::OutOfRange {
                name: "q0",
                value: q0 as f64,
                reason: "numeric truncation needs total grade q0 + 2 <= 6",
            });
        }
        let summands = compressed_summands(model);
        let mut coefficients = Vec::new();
        for q in q0 + 1..=q0 + 2 {
            let mut c = 0.0;
            for comp in compositions(q, q0) {
                c += alpha_doubly_from(&summands, &comp)? / factorial(comp.len());
            }
            coefficients.push((q, c));
        }
        Ok(Self {
            q0,
            coefficients,
            n_sites: model.n_sites(),
            k: model.k(),
            g: extensiveness_g(model),
        })
    }

    /// `8e²q₀kgt ≤ 1`.
    pub fn tail_applies(&self, t: f64) -> bool {
        8.0 * std::f64::consts::E.powi(2) * self.q0 as f64 * self.k as f64 * self.g * t <= 1.0
    }

    pub fn evaluate(&self, t: f64) -> AlphaCommQ0 {
        let numeric = self
            .coefficients
            .iter()
            .map(|&(q, c)| c * t.powi(q as i32))
            .sum();
        let e = std::f64::consts::E;
        let tail = self.tail_applies(t).then(|| {
            let x = 8.0 * e * self.q0 as f64 * self.k as f64 * self.g * t;
            e * x.powi(self.q0 as i32 + 1) * self.n_sites as f64
        });
        AlphaCommQ0 { numeric, tail }
    }
}

/// `α_comm,q₀(t_step)`, numeric part through total grade `q₀+2` plus the
/// analytic tail when it applies.
pub fn alpha_comm_q0(model: &LindbladModel, q0: usize, t_step: f64) -> Result<AlphaCommQ0> {
    Ok(AlphaCommSeries::new(model, q0)?.evaluate(t_step))
}

/// `μ_comm,q₀ = max_{q = 3, 5, …, q₀} (α_comm^(q))^{1/q}`; zero when `q₀ < 3`.
pub fn mu_comm_q0(model: &LindbladModel, q0: usize) -> Result<f64> {
    let mut mu = 0.0f64;
    let mut q = 3;
    while q <= q0 {
        mu = mu.max(alpha_comm_q(model, q)?.powf(1.0 / q as f64));
        q += 2;
    }
    Ok(mu)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            reason: "precision must lie in (0, 1)",
        });
    }
    Ok(())
}

/// Second-order step count `r = ⌈t^{3/2}·√((c12/12 + c24/24)/ε)⌉`, at least 1.
pub fn plan_trotter_steps(model: &LindbladModel, t: f64, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            reason: "must be positive and finite",
        });
    }
    Ok(steps_from_tight(&alpha3_tight(model), t, eps))
}

fn steps_from_tight(tight: &Alpha3Tight, t: f64, eps: f64) -> usize {
    let b = tight.c12 / 12.0 + tight.c24 / 24.0;
    let r = (t.powf(1.5) * (b / eps).sqrt()).ceil();
    (r as usize).max(1)
}

/// Smallest `p` with `e^{−2p} ≤ ε/(8‖b(p)‖₁)`.
pub fn choose_order(eps: f64) -> Result<usize> {
    check_eps(eps)?;
    for p in 1..=64 {
        let b = coefficients(&nodes(p)?)?;
        if (-2.0 * p as f64).exp() <= eps / (8.0 * l1_norm(&b)) {
            return Ok(p);
        }
    }
    Err(Error::Infeasible(format!("no order p <= 64 reaches eps = {eps}")))
}

/// Extrapolation parameters for estimating `tr[O e^{tL} ρ₀]` to `ε‖O‖`.
///
/// With `n = 1/s₀`, the finest step is `s_p = 1/(n·r_p)`; `n` is the smallest
/// integer with `s_p ≤ e^{−1}(2μt)^{−3/2}` and a certified
/// `α_comm,q₀(s_p t) ≤ s_p ε/(4e‖b‖₁)`.
pub fn plan_extrapolation(
    model: &LindbladModel,
    t: f64,
    eps: f64,
    q0: usize,
    seed: u64,
) -> Result<ExtrapolationPlan> {
    check_eps(eps)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            reason: "must be positive and finite",
        });
    }
    let p = choose_order(eps)?;
    let r_nodes = nodes(p)?;
    let b = coefficients(&r_nodes)?;
    let b_l1 = l1_norm(&b);
    let mu = mu_comm_q0(model, q0)?;
    let series = AlphaCommSeries::new(model, q0)?;
    let r_p = *r_nodes.last().expect("p >= 1") as u64;
    let e = std::f64::consts::E;

    let s_max_mu = if mu > 0.0 {
        (2.0 * mu * t).powf(-1.5) / e
    } else {
        f64::INFINITY
    };
    let feasible = |n: u64| -> bool {
        let s_p = 1.0 / (n as f64 * r_p as f64);
        if s_p > s_max_mu {
            return false;
        }
        match series.evaluate(s_p * t).total() {
            Some(total) => total <= s_p * eps / (4.0 * e * b_l1),
            None => false,
        }
    };

    // Both conditions are monotone in n, so bracket then bisect.
    let max_n = (MAX_PLANNED_STEPS / r_p).max(1);
    let mut hi = 1u64;
    while !feasible(hi) {
        if hi >= max_n {
            return Err(Error::Infeasible(format!(
                "no step size with at most {MAX_PLANNED_STEPS} steps satisfies the \
                 extrapolation conditions (p = {p}, mu = {mu:.4e})"
            )));
        }
        hi = (hi * 2).min(max_n);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n = hi;
    let shots = (4.0 * b_l1 * b_l1 * (3.0 * p as f64).ln() / (eps * eps)).ceil() as u64;
    ExtrapolationPlan::new(t, n, r_nodes, shots, seed)
}

/// Bound quantities for one model, serialized by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub alpha3_numeric: f64,
    pub alpha3_tight_c12: f64,
    pub alpha3_tight_c24: f64,
    pub alpha_q: BTreeMap<String, f64>,
    pub alpha_lattice_q: BTreeMap<String, f64>,
    /// Evaluated at one planned Trotter step, `t / r_planned`.
    pub alpha_comm_q0_numeric: f64,
    pub alpha_comm_q0_tail: Option<f64>,
    pub mu_comm_q0: f64,
    pub r_planned: usize,
    pub g: f64,
    pub k: usize,
    pub q0: usize,
    pub t: f64,
    pub eps: f64,
}

pub fn bound_report(
    model: &LindbladModel,
    t: f64,
    eps: f64,
    q_max: usize,
    q0: usize,
) -> Result<BoundReport> {
    check_grade(q_max)?;
    let tight = alpha3_tight(model);
    let r_planned = plan_trotter_steps(model, t, eps)?;
    let g = extensiveness_g(model);
    let k = model.k();
    let mut alpha_q = BTreeMap::new();
    let mut alpha_lattice = BTreeMap::new();
    for q in MIN_GRADE..=q_max.max(3) {
        alpha_q.insert(q.to_string(), alpha_comm_q(model, q)?);
        alpha_lattice.insert(q.to_string(), alpha_lattice_q(model.n_sites(), k, g, q));
    }
    let q0_value = alpha_comm_q0(model, q0, t / r_planned as f64)?;
    Ok(BoundReport {
        alpha3_numeric: alpha_q["3"],
        alpha3_tight_c12: tight.c12,
        alpha3_tight_c24: tight.c24,
        alpha_q,
        alpha_lattice_q: alpha_lattice,
        alpha_comm_q0_numeric: q0_value.numeric,
        alpha_comm_q0_tail: q0_value.tail,
        mu_comm_q0: mu_comm_q0(model, q0)?,
        r_planned,
        g,
        k,
        q0,
        t,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_norm, ComplexMatrix};
    use crate::model::{
        build_tfim, coherent_component, liouvillian_matrix, pauli_x, pauli_y, pauli_z,
        LocalOperator,
    };

    fn coherent(site: usize, m: ComplexMatrix) -> PairFormSuperop {
        coherent_component(&LocalOperator::new(vec![site], m).unwrap())
    }

    #[test]
    fn disjoint_commutator_is_empty() {
        let a = coherent(0, pauli_x());
        let b = coherent(1, pauli_z());
        let c = pairform_commutator(&a, &b);
        assert!(c.is_empty());
        assert_eq!(c.norm_bound(), 0.0);
    }

    #[test]
    fn self_commutator_vanishes_in_matrix_form() {
        let a = coherent(0, pauli_z());
        let c = pairform_commutator(&a, &a);
        assert_eq!(c.len(), 2 * a.len() * a.len());
        assert!(liouvillian_matrix(&c, 1).unwrap().is_zero(1e-12));
        assert!(c.compress().is_empty());
    }

    #[test]
    fn pauli_commutator_matches_matrix_commutator() {
        let x = coherent(0, pauli_x());
        let z = coherent(0, pauli_z());
        let c = liouvillian_matrix(&pairform_commutator(&x, &z), 1).unwrap();
        let mx = liouvillian_matrix(&x, 1).unwrap();
        let mz = liouvillian_matrix(&z, 1).unwrap();
        let direct = &(&mx * &mz) - &(&mz * &mx);
        assert!(c.approx_eq(&direct, 1e-13));
        // (−i)²[[X,Z],·] = 2i[Y,·]
        let y = liouvillian_matrix(&coherent(0, pauli_y()), 1).unwrap();
        assert!(c.approx_eq(&y.scale_real(-2.0), 1e-13));
    }

    #[test]
    fn lattice_formula_examples() {
        let v = alpha_lattice_q(4, 2, 5.2, 3);
        assert!((v - 41.6f64.powi(3)).abs() < 1e-8);
        assert_eq!(alpha_lattice_q(4, 2, 0.0, 3), 0.0);
        assert!((alpha_lattice_q(1, 1, 1.0, 2) - 4.0).abs() < 1e-15);
        // one layer reduces to the corollary
        assert!(
            (alpha_doubly_lattice(4, 2, 5.2, &[3]) - alpha_lattice_q(4, 2, 5.2, 3)).abs() < 1e-9
        );
    }

    #[test]
    fn grade_guards() {
        let m = build_tfim(2, 1.0, 0.5, 0.1).unwrap();
        assert!(alpha_comm_q(&m, 1).is_err());
        assert!(alpha_comm_q(&m, 6).is_err());
        assert!(alpha_doubly_nested(&m, &[4, 3]).is_err());
        assert!(alpha_doubly_nested(&m, &[]).is_err());
    }

    #[test]
    fn single_layer_matches_alpha() {
        let m = build_tfim(3, 1.0, 0.5, 0.2).unwrap();
        for q in 2..=3 {
            let a = alpha_comm_q(&m, q).unwrap();
            let d = alpha_doubly_nested(&m, &[q]).unwrap();
            assert!((a - d).abs() <= 1e-12 * a.max(1.0));
        }
        let a2 = alpha_comm_q(&m, 2).unwrap();
        let d11 = alpha_doubly_nested(&m, &[1, 1]).unwrap();
        assert!((a2 - d11).abs() <= 1e-12 * a2);
    }

    #[test]
    fn commuting_model_has_zero_alphas() {
        let m = build_tfim(3, 0.0, 0.7, 0.0).unwrap();
        for q in 2..=4 {
            assert_eq!(alpha_comm_q(&m, q).unwrap(), 0.0);
        }
        let tight = alpha3_tight(&m);
        assert_eq!((tight.c12, tight.c24), (0.0, 0.0));
        let v = alpha_comm_q0(&m, 3, 0.01).unwrap();
        assert_eq!(v.numeric, 0.0);
        assert_eq!(alpha_comm_q0(&m, 3, 0.0).unwrap().numeric, 0.0);
    }

    #[test]
    fn compositions_enumerate() {
        let c = compositions(4, 3);
        assert_eq!(c.len(), 7);
        assert!(c.iter().all(|v| v.iter().sum::<usize>() == 4 && v.iter().all(|&x| x <= 3)));
        assert_eq!(compositions(5, 3).len(), 13);
    }

    #[test]
    fn planner_scaling() {
        let m = build_tfim(3, 1.0, 0.5, 0.1).unwrap();
        let r1 = plan_trotter_steps(&m, 1.0, 1e-3).unwrap();
        let r2 = plan_trotter_steps(&m, 1.0, 1e-3 / 4.0).unwrap();
        assert!(r2 == 2 * r1 || r2 + 1 == 2 * r1 || r2 == 2 * r1 - 1);
        assert!(plan_trotter_steps(&m, 1.0, 0.0).is_err());
        assert!(plan_trotter_steps(&m, 1.0, 1.0).is_err());
    }

    #[test]
    fn norm_bound_dominates_matrix_norm() {
        let m = build_tfim(2, 1.0, 0.5, 0.3).unwrap();
        let s = summand_superops(&m);
        let c = pairform_commutator(&s[0], &s[1]);
        let mat = liouvillian_matrix(&c, 2).unwrap();
        assert!(spectral_norm(&mat) <= c.compress().norm_bound() + 1e-12);
    }
}
