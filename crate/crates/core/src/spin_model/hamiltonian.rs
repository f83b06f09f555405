use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::basis::SectorBasis;
use super::state::StateVector;
use crate::error::{Error, Result};

/// Per-bond XX couplings of an open chain; entry `b` couples sites `b` and
/// `b + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondCouplings(Vec<f64>);

impl BondCouplings {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|j| !j.is_finite()) {
            return Err(Error::InvalidArgument("couplings must be finite".into()));
        }
        Ok(BondCouplings(values))
    }

    pub fn uniform(sites: usize, coupling: f64) -> Self {
        BondCouplings(vec![coupling; sites.saturating_sub(1)])
    }

    /// Uniform chain with the middle bond switched off: two decoupled halves.
    pub fn split(sites: usize, coupling: f64) -> Result<Self> {
        let bond = middle_bond(sites)?;
        Ok(Self::uniform(sites, coupling).with_bond(bond, 0.0))
    }

    pub fn with_bond(mut self, bond: usize, value: f64) -> Self {
        self.0[bond] = value;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, j| m.max(j.abs()))
    }
}

/// Index of the bond joining the two halves of an even-length chain.
pub fn middle_bond(sites: usize) -> Result<usize> {
    if sites < 2 || !sites.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "fusion requires an even chain length >= 2, got {sites}"
        )));
    }
    Ok(sites / 2 - 1)
}

/// Real symmetric XX Hamiltonian restricted to one sector, in CSR layout.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    basis: Arc<SectorBasis>,
    couplings: BondCouplings,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    dense_eigen: OnceLock<Arc<SymmetricEigen<f64, nalgebra::Dyn>>>,
}

/// Builds the sector Hamiltonian J_b (S+_b S-_{b+1} + S-_b S+_{b+1}) summed
/// over open-chain bonds. Each antiparallel pair on bond `b` hops with
/// amplitude `J[b]`; zero couplings emit no entries.
pub fn build_hamiltonian(
    basis: Arc<SectorBasis>,
    couplings: &BondCouplings,
) -> Result<SparseHamiltonian> {
    let sites = basis.sites();
    if couplings.len() != sites.saturating_sub(1) {
        return Err(Error::DimensionMismatch {
            expected: sites.saturating_sub(1),
            found: couplings.len(),
        });
    }

    let dim = basis.dim();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(sites);
    row_ptr.push(0);
    for &config in basis.configs() {
        row.clear();
        for (bond, &j) in couplings.values().iter().enumerate() {
            if j == 0.0 {
                continue;
            }
            let pair = 0b11u64 << bond;
            let bits = config & pair;
            if bits != 0 && bits != pair {
                let hopped = config ^ pair;
                let col = basis
                    .index_of(hopped)
                    .expect("exchange preserves the up-spin count");
                row.push((col, j));
            }
        }
        row.sort_by_key(|&(c, _)| c);
        for &(c, v) in &row {
            cols.push(c);
            values.push(v);
        }
        row_ptr.push(cols.len());
    }

    Ok(SparseHamiltonian {
        basis,
        couplings: couplings.clone(),
        row_ptr,
        cols,
        values,
        dense_eigen: OnceLock::new(),
    })
}

impl SparseHamiltonian {
    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn couplings(&self) -> &BondCouplings {
        &self.couplings
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, coefficient)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Largest absolute matrix entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// y = H x on raw slices.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.values[k];
            }
            *out = acc;
        }
    }

    pub fn apply_real_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.values[k];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Full eigendecomposition of the dense matrix, computed once.
    pub(crate) fn dense_eigen(&self) -> Arc<SymmetricEigen<f64, nalgebra::Dyn>> {
        self.dense_eigen
            .get_or_init(|| Arc::new(SymmetricEigen::new(self.to_dense())))
            .clone()
    }

    pub(crate) fn check_state(&self, v: &StateVector) -> Result<()> {
        self.basis.check_same(v.basis())
    }
}

/// Exact sparse product H·v.
pub fn apply_hamiltonian(h: &SparseHamiltonian, v: &StateVector) -> Result<StateVector> {
    if v.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: v.dim(),
        });
    }
    h.check_state(v)?;
    let mut out = vec![Complex64::new(0.0, 0.0); h.dim()];
    h.apply_into(v.amps(), &mut out);
    Ok(StateVector::from_parts(h.basis().clone(), out))
}
