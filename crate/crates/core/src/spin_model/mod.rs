//! Fixed-magnetization bases, the open XX chain Hamiltonian, and the
//! product embedding used to join two half chains.

mod basis;
mod hamiltonian;
mod state;

use std::sync::Arc;

use num_complex::Complex64;

pub use basis::{binomial, enumerate_sector, SectorBasis, MAX_SECTOR_DIM, MAX_SITES};
pub use hamiltonian::{
    apply_hamiltonian, build_hamiltonian, middle_bond, BondCouplings, SparseHamiltonian,
};
pub use state::StateVector;

use crate::error::{Error, Result};

/// Tensor product of two half-chain states, placed in the fused chain's
/// sector.
///
/// `left` occupies sites `0..L/2` (low bits) and `right` sites `L/2..L`.
/// Configurations of the fused sector whose halves carry a different split
/// of up spins get amplitude zero.
pub fn embed_product(left: &StateVector, right: &StateVector) -> Result<StateVector> {
    let half = left.basis().sites();
    if right.basis().sites() != half {
        return Err(Error::InvalidArgument(format!(
            "half-chain lengths differ: {} vs {}",
            half,
            right.basis().sites()
        )));
    }
    let fused = Arc::new(enumerate_sector(
        2 * half,
        left.basis().n_up() + right.basis().n_up(),
    )?);
    let mut amps = vec![Complex64::new(0.0, 0.0); fused.dim()];
    for (x, a) in left.basis().configs().iter().zip(left.amps()) {
        for (y, b) in right.basis().configs().iter().zip(right.amps()) {
            let ordinal = fused
                .index_of(x | (y << half))
                .expect("product configuration lies in the fused sector");
            amps[ordinal] = a * b;
        }
    }
    Ok(StateVector::from_parts(fused, amps))
}
