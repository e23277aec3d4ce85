#![allow(dead_code)]

use lindblad_core::linalg::{kron, ComplexMatrix, C64};
use lindblad_core::model::{pauli_x, pauli_z};
use lindblad_core::propagate::DensityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect();
    ComplexMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize, scale: f64) -> ComplexMatrix {
    let a = random_matrix(rng, d, d, scale);
    (&a + &a.adjoint()).scale_real(0.5)
}

/// Ginibre state `GG†/tr(GG†)`, full rank with probability one.
pub fn random_density(rng: &mut impl Rng, n_sites: usize) -> DensityMatrix {
    let d = 1 << n_sites;
    let g = random_matrix(rng, d, d, 1.0);
    let p = &g * &g.adjoint();
    let tr = p.trace().re;
    DensityMatrix::new(p.scale_real(1.0 / tr).hermitian_part(), n_sites).unwrap()
}

pub fn kron_all(ops: &[ComplexMatrix]) -> ComplexMatrix {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, o| kron(&acc, o))
}

/// `op` on `site` of an `n`-site chain, site 0 most significant.
pub fn on_site(op: &ComplexMatrix, site: usize, n: usize) -> ComplexMatrix {
    let ops: Vec<ComplexMatrix> = (0..n)
        .map(|j| if j == site { op.clone() } else { ComplexMatrix::identity(2) })
        .collect();
    kron_all(&ops)
}

/// Dense TFIM Hamiltonian `−J Σ X_j X_{j+1} − h Σ Z_j`.
pub fn tfim_hamiltonian(n: usize, j: f64, h: f64) -> ComplexMatrix {
    let d = 1 << n;
    let mut out = ComplexMatrix::zeros(d, d);
    for s in 0..n - 1 {
        let xx = &on_site(&pauli_x(), s, n) * &on_site(&pauli_x(), s + 1, n);
        out = &out - &xx.scale_real(j);
    }
    for s in 0..n {
        out = &out - &on_site(&pauli_z(), s, n).scale_real(h);
    }
    out
}

/// Column-stacked `−i[H, ·]`.
pub fn coherent_superop(h: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(h.rows());
    let left = kron(&id, h);
    let right = kron(&h.transpose(), &id);
    (&left - &right).scale(C64::new(0.0, -1.0))
}

/// Column-stacked `LρL† − ½{L†L, ρ}`.
pub fn dissipator_superop(l: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(l.rows());
    let ldl = &l.adjoint() * l;
    let jump = kron(&l.conj(), l);
    let anti = &kron(&id, &ldl) + &kron(&ldl.transpose(), &id);
    &jump - &anti.scale_real(0.5)
}
