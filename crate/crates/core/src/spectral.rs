//! Lowest eigenpairs within a sector, the free-fermion reference spectrum,
//! and overlap measures.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin_model::{SparseHamiltonian, StateVector};

/// Sector dimension at which `lowest_two` switches from dense
/// diagonalization to Lanczos.
pub const DENSE_EIGEN_CROSSOVER: usize = 400;

/// Gaps below this multiple of the largest |J| are treated as degenerate.
pub const DEGENERATE_GAP_RATIO: f64 = 1e-10;

const LANCZOS_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralPair {
    pub e0: f64,
    pub e1: f64,
    /// Normalized ground state, largest-magnitude amplitude real positive.
    pub ground: StateVector,
}

impl SpectralPair {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense below `DENSE_EIGEN_CROSSOVER`, Lanczos at and above it.
    Auto,
    Dense,
    Lanczos,
}

/// Two lowest eigenvalues of `h` and the ground state.
pub fn lowest_two(h: &SparseHamiltonian) -> Result<SpectralPair> {
    lowest_two_with(h, EigenMethod::Auto)
}

pub fn lowest_two_with(h: &SparseHamiltonian, method: EigenMethod) -> Result<SpectralPair> {
    let dim = h.dim();
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "sector of dimension {dim} has no first excited state"
        )));
    }
    let dense = match method {
        EigenMethod::Auto => dim < DENSE_EIGEN_CROSSOVER,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    let (e0, e1, ground) = if dense {
        lowest_two_dense(h)
    } else {
        lowest_two_lanczos(h)?
    };

    let threshold = DEGENERATE_GAP_RATIO * h.couplings().max_abs();
    if e1 - e0 < threshold || e1 - e0 <= 0.0 {
        return Err(Error::DegenerateGap {
            gap: e1 - e0,
            threshold,
        });
    }

    let amps = ground.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let ground = fix_phase(StateVector::new(h.basis().clone(), amps)?);
    Ok(SpectralPair { e0, e1, ground })
}

fn lowest_two_dense(h: &SparseHamiltonian) -> (f64, f64, Vec<f64>) {
    let eig = h.dense_eigen();
    let (i0, i1) = two_smallest(eig.eigenvalues.as_slice());
    let ground = eig.eigenvectors.column(i0).iter().copied().collect();
    (eig.eigenvalues[i0], eig.eigenvalues[i1], ground)
}

fn two_smallest(values: &[f64]) -> (usize, usize) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    (order[0], order[1])
}

/// Deterministic, symmetry-free start vector.
fn start_vector(dim: usize) -> Vec<f64> {
    (0..dim as u64)
        .map(|i| {
            let mut z = i.wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t)
}

/// Lanczos with full reorthogonalization, run until the two lowest Ritz
/// pairs have residual below `LANCZOS_RESIDUAL_TOL · max|H|`.
fn lowest_two_lanczos(h: &SparseHamiltonian) -> Result<(f64, f64, Vec<f64>)> {
    let dim = h.dim();
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let tol = LANCZOS_RESIDUAL_TOL * scale;
    let max_iter = dim.min(600);

    let mut q = start_vector(dim);
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    for m in 1..=max_iter {
        let current = &basis[m - 1];
        h.apply_real_into(current, &mut w);
        let a = dot(current, &w);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against every Lanczos vector.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let exhausted = b <= 1e-14 * scale || m == dim;

        if m >= 2 && (m % 4 == 0 || exhausted || m == max_iter) {
            let eig = tridiagonal_eigen(&alpha, &beta);
            let (i0, i1) = two_smallest(eig.eigenvalues.as_slice());
            let r0 = b * eig.eigenvectors[(m - 1, i0)].abs();
            let r1 = b * eig.eigenvectors[(m - 1, i1)].abs();
            last_residual = r0.max(r1);
            if exhausted || last_residual < tol {
                let coeffs = eig.eigenvectors.column(i0);
                let mut ground = vec![0.0; dim];
                for (v, &c) in basis.iter().zip(coeffs.iter()) {
                    ground.iter_mut().zip(v).for_each(|(g, x)| *g += c * x);
                }
                let n = dot(&ground, &ground).sqrt();
                ground.iter_mut().for_each(|g| *g /= n);
                return Ok((eig.eigenvalues[i0], eig.eigenvalues[i1], ground));
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }

    Err(Error::EigenSolver {
        iterations: alpha.len(),
        residual: last_residual,
    })
}

/// Rotates the global phase so the largest-magnitude amplitude is real and
/// positive (lowest ordinal wins ties).
pub fn fix_phase(state: StateVector) -> StateVector {
    let mut best = Complex64::new(0.0, 0.0);
    for a in state.amps() {
        if a.norm() > best.norm() {
            best = *a;
        }
    }
    if best.norm() == 0.0 {
        return state;
    }
    state.scaled(best.conj() / best.norm())
}

/// Open-chain single-particle energies 2J·cos(kπ/(L+1)), k = 1..L.
pub fn free_fermion_energies(sites: usize, coupling: f64) -> Vec<f64> {
    (1..=sites)
        .map(|k| 2.0 * coupling * (k as f64 * std::f64::consts::PI / (sites as f64 + 1.0)).cos())
        .collect()
}

/// Ground energy of the `n_up` sector: the `n_up` lowest single-particle
/// levels filled.
pub fn sector_ground_energy_oracle(sites: usize, n_up: usize, coupling: f64) -> f64 {
    let mut levels = free_fermion_energies(sites, coupling);
    levels.sort_by(f64::total_cmp);
    levels.iter().take(n_up).sum()
}

const NORMALIZATION_TOL: f64 = 1e-10;

/// 1 − |⟨target|v⟩|² for two normalized states.
///
/// Evaluated as the squared norm of the component of `v` orthogonal to
/// `target`, which stays accurate far below 1e-16.
pub fn infidelity(v: &StateVector, target: &StateVector) -> Result<f64> {
    for s in [v, target] {
        if (s.norm() - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidArgument(format!(
                "infidelity needs normalized states (norm {})",
                s.norm()
            )));
        }
    }
    let overlap = target.inner(v)?;
    let target_sqr = target.norm_sqr();
    let perp: f64 = v
        .amps()
        .iter()
        .zip(target.amps())
        .map(|(a, t)| (a - t * overlap / target_sqr).norm_sqr())
        .sum();
    Ok((perp / v.norm_sqr()).clamp(0.0, 1.0))
}

/// |⟨eigvec|v⟩|; `v` may be unnormalized.
pub fn spectral_weight(v: &StateVector, eigvec: &StateVector) -> Result<f64> {
    Ok(eigvec.inner(v)?.norm())
}

/// ‖H g − E g‖ for a real eigenvalue estimate.
pub fn eigen_residual(h: &SparseHamiltonian, g: &StateVector, energy: f64) -> f64 {
    let mut hg = vec![Complex64::new(0.0, 0.0); h.dim()];
    h.apply_into(g.amps(), &mut hg);
    hg.iter()
        .zip(g.amps())
        .map(|(a, b)| (a - b * energy).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Dense real eigenvalues in ascending order (diagnostics and tests).
pub fn dense_spectrum(h: &SparseHamiltonian) -> DVector<f64> {
    let mut values: Vec<f64> = h.dense_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    DVector::from_vec(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_model::{build_hamiltonian, enumerate_sector, BondCouplings};
    use std::sync::Arc;

    fn chain(sites: usize, n_up: usize, j: f64) -> SparseHamiltonian {
        let basis = Arc::new(enumerate_sector(sites, n_up).unwrap());
        build_hamiltonian(basis, &BondCouplings::uniform(sites, j)).unwrap()
    }

    #[test]
    fn two_site_pair() {
        let pair = lowest_two(&chain(2, 1, 1.0)).unwrap();
        assert!((pair.e0 + 1.0).abs() < 1e-14);
        assert!((pair.e1 - 1.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        let amps = pair.ground.amps();
        assert!((amps[0].re.abs() - s).abs() < 1e-14);
        assert!((amps[0].re + amps[1].re).abs() < 1e-14);
    }

    #[test]
    fn four_site_half_filling() {
        let pair = lowest_two(&chain(4, 2, 1.0)).unwrap();
        assert!((pair.e0 + 5f64.sqrt()).abs() < 1e-12);
        assert!((pair.e1 + 1.0).abs() < 1e-12);
        assert!((pair.gap() - (5f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn free_fermion_levels() {
        let l1 = free_fermion_energies(1, 1.0);
        assert!(l1[0].abs() < 1e-15);
        let l2 = free_fermion_energies(2, 1.0);
        assert!((l2[0] - 1.0).abs() < 1e-15 && (l2[1] + 1.0).abs() < 1e-15);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let l4 = free_fermion_energies(4, 1.0);
        for (got, want) in l4.iter().zip([golden, golden - 1.0, 1.0 - golden, -golden]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_sums() {
        assert!((sector_ground_energy_oracle(4, 2, 1.0) + 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(sector_ground_energy_oracle(7, 0, 1.0), 0.0);
        let direct: f64 = (5..=8)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / 9.0).cos())
            .sum();
        assert!((sector_ground_energy_oracle(8, 4, 1.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn dense_and_lanczos_agree() {
        for (sites, n_up) in [(8, 4), (10, 5), (10, 3), (12, 4)] {
            let h = chain(sites, n_up, 1.0);
            let d = lowest_two_with(&h, EigenMethod::Dense).unwrap();
            let l = lowest_two_with(&h, EigenMethod::Lanczos).unwrap();
            assert!((d.e0 - l.e0).abs() < 1e-9, "L={sites} n={n_up}");
            assert!((d.e1 - l.e1).abs() < 1e-9, "L={sites} n={n_up}");
            assert!(infidelity(&d.ground, &l.ground).unwrap() < 1e-9);
        }
    }

    #[test]
    fn lanczos_residual_small() {
        let h = chain(14, 7, 1.0);
        let pair = lowest_two(&h).unwrap();
        let bound = 1e-9 * h.max_abs() * (h.dim() as f64).sqrt();
        assert!(eigen_residual(&h, &pair.ground, pair.e0) < bound);
        assert!((pair.e0 - sector_ground_energy_oracle(14, 7, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_gap_reported() {
        // Two decoupled identical dimers at one up spin: the spin can sit in
        // either dimer with the same energy.
        let basis = Arc::new(enumerate_sector(4, 1).unwrap());
        let h = build_hamiltonian(basis, &BondCouplings::split(4, 1.0).unwrap()).unwrap();
        assert!(matches!(lowest_two(&h), Err(Error::DegenerateGap { .. })));
    }

    #[test]
    fn single_state_sector_rejected() {
        assert!(lowest_two(&chain(4, 0, 1.0)).is_err());
    }

    #[test]
    fn overlap_measures() {
        let h = chain(4, 2, 1.0);
        let g = lowest_two(&h).unwrap().ground;
        assert!(infidelity(&g, &g).unwrap().abs() < 1e-15);
        let b = StateVector::basis_state(h.basis().clone(), 0b0011).unwrap();
        let weight = spectral_weight(&b, &g).unwrap();
        assert!((weight - g.amps()[0].norm()).abs() < 1e-15);
        assert_eq!(
            spectral_weight(&StateVector::zeros(h.basis().clone()), &g).unwrap(),
            0.0
        );
        let unnormalized = g.scaled(Complex64::new(2.0, 0.0));
        assert!(infidelity(&unnormalized, &g).is_err());
    }
}
