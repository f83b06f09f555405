use std::sync::Arc;

use num_complex::Complex64;

use super::basis::SectorBasis;
use crate::error::{Error, Result};

/// Complex amplitudes over a sector basis.
///
/// The vector is allowed to be unnormalized; after a conditioned rodeo
/// cycle its squared norm is the success probability.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Arc<SectorBasis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "state amplitudes must be finite".into(),
            ));
        }
        Ok(StateVector { basis, amps })
    }

    pub(crate) fn from_parts(basis: Arc<SectorBasis>, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), basis.dim());
        StateVector { basis, amps }
    }

    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        StateVector::from_parts(basis, vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn from_real(basis: Arc<SectorBasis>, amps: &[f64]) -> Result<Self> {
        StateVector::new(
            basis,
            amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
    }

    /// Computational basis state for one configuration word.
    pub fn basis_state(basis: Arc<SectorBasis>, config: u64) -> Result<Self> {
        let ordinal = basis.index_of(config).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "configuration {config:#b} is not in the (L={}, n_up={}) sector",
                basis.sites(),
                basis.n_up()
            ))
        })?;
        let mut state = StateVector::zeros(basis);
        state.amps[ordinal] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.basis.check_same(&other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        StateVector::from_parts(
            self.basis.clone(),
            self.amps.iter().map(|a| a * factor).collect(),
        )
    }

    /// Unit-norm copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<StateVector> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        self.basis.check_same(&other.basis)?;
        Ok(StateVector::from_parts(
            self.basis.clone(),
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }
}
