#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rodeo_fusion::spin_model::{
    build_hamiltonian, enumerate_sector, BondCouplings, SectorBasis, SparseHamiltonian, StateVector,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sector(sites: usize, n_up: usize) -> Arc<SectorBasis> {
    Arc::new(enumerate_sector(sites, n_up).unwrap())
}

pub fn uniform_chain(sites: usize, n_up: usize, coupling: f64) -> SparseHamiltonian {
    build_hamiltonian(
        sector(sites, n_up),
        &BondCouplings::uniform(sites, coupling),
    )
    .unwrap()
}

pub fn random_state(basis: Arc<SectorBasis>, rng: &mut impl Rng) -> StateVector {
    let amps = (0..basis.dim())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    StateVector::new(basis, amps).unwrap().normalized().unwrap()
}

pub fn random_couplings(sites: usize, rng: &mut impl Rng) -> BondCouplings {
    BondCouplings::new(
        (0..sites.saturating_sub(1))
            .map(|_| rng.gen_range(0.2..1.5))
            .collect(),
    )
    .unwrap()
}

/// Brute-force Hamiltonian over the sector: every configuration, every
/// bond, flip the pair when antiparallel.
pub fn brute_force_dense(basis: &SectorBasis, couplings: &[f64]) -> DMatrix<f64> {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for (col, &c) in basis.configs().iter().enumerate() {
        for (b, &j) in couplings.iter().enumerate() {
            let lo = (c >> b) & 1;
            let hi = (c >> (b + 1)) & 1;
            if lo != hi {
                let flipped = c ^ (0b11 << b);
                let row = basis.configs().iter().position(|&x| x == flipped).unwrap();
                m[(row, col)] += j;
            }
        }
    }
    m
}

/// exp(−iHt) by Taylor series with scaling and squaring, in complex
/// arithmetic throughout.
pub fn dense_propagator(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let a = h.map(|x| Complex64::new(0.0, -t * x));
    let norm: f64 = a
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let n = h.nrows();
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn apply_dense(u: &DMatrix<Complex64>, v: &StateVector) -> Vec<Complex64> {
    let x = nalgebra::DVector::from_column_slice(v.amps());
    (u * x).iter().copied().collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
