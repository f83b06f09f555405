//! Rodeo Algorithm purification.
//!
//! One cycle with evolution time t applies the conditioned operator
//! ½(1 + e^{−i(H−E_t)t}) and records its success probability. Cycles are
//! grouped into geometric superiterations {t₁, t₁/2, t₁/4, …} with
//! t₁ = π/(E₁ − E₀).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagate::{expmv, DEFAULT_EXPMV_TOL};
use crate::spin_model::{SparseHamiltonian, StateVector};

/// Total success probabilities below this count as annihilation.
pub const ANNIHILATION_THRESHOLD: f64 = 1e-30;

/// Default number of cycles per superiteration.
pub const DEFAULT_DEPTH: usize = 8;

/// Largest sector the explicit-ancilla circuit will simulate.
pub const CIRCUIT_MAX_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RodeoSchedule {
    pub t1: f64,
    pub ratio: f64,
    pub depth: usize,
    pub superiterations: usize,
    times: Vec<f64>,
}

impl RodeoSchedule {
    /// Geometric schedule with an explicit base time.
    pub fn geometric(t1: f64, ratio: f64, depth: usize, superiterations: usize) -> Result<Self> {
        if !(t1 > 0.0 && t1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "base time must be positive, got {t1}"
            )));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "common ratio must lie in (0, 1], got {ratio}"
            )));
        }
        if depth == 0 {
            return Err(Error::InvalidArgument(
                "superiteration depth must be >= 1".into(),
            ));
        }
        let block: Vec<f64> = (0..depth).map(|k| t1 * ratio.powi(k as i32)).collect();
        let times = block
            .iter()
            .copied()
            .cycle()
            .take(depth * superiterations)
            .collect();
        Ok(RodeoSchedule {
            t1,
            ratio,
            depth,
            superiterations,
            times,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Times of a single superiteration.
    pub fn block(&self) -> &[f64] {
        &self.times[..self.depth.min(self.times.len())]
    }

    /// Σⱼ tⱼ, the unitary evolution time the schedule consumes.
    pub fn total_time(&self) -> f64 {
        self.times.iter().sum()
    }

    pub fn with_superiterations(&self, superiterations: usize) -> RodeoSchedule {
        RodeoSchedule::geometric(self.t1, self.ratio, self.depth, superiterations)
            .expect("parameters already validated")
    }
}

/// Schedule with t₁ = π/gap, ratio ½, `depth` times per superiteration and
/// `superiterations` repetitions.
pub fn make_schedule(gap: f64, depth: usize, superiterations: usize) -> Result<RodeoSchedule> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gap must be positive, got {gap}"
        )));
    }
    RodeoSchedule::geometric(PI / gap, 0.5, depth, superiterations)
}

/// ½(v + e^{iE_t t}·e^{−iHt}v), left unnormalized.
pub fn rodeo_projector(
    v: &StateVector,
    h: &SparseHamiltonian,
    target_energy: f64,
    time: f64,
) -> Result<StateVector> {
    let evolved = expmv(h, time, v, DEFAULT_EXPMV_TOL)?;
    let kick = Complex64::from_polar(1.0, target_energy * time);
    v.add(&evolved.scaled(kick))
        .map(|w| w.scaled(Complex64::new(0.5, 0.0)))
}

/// One conditioned cycle. Returns the renormalized state and the cycle's
/// success probability ‖w‖²/‖v‖². A state annihilated below
/// `ANNIHILATION_THRESHOLD` is returned unnormalized.
pub fn rodeo_cycle(
    v: &StateVector,
    h: &SparseHamiltonian,
    target_energy: f64,
    time: f64,
) -> Result<(StateVector, f64)> {
    let input = v.norm_sqr();
    let w = rodeo_projector(v, h, target_energy, time)?;
    let probability = if input > 0.0 {
        w.norm_sqr() / input
    } else {
        0.0
    };
    if probability < ANNIHILATION_THRESHOLD {
        return Ok((w, probability));
    }
    Ok((w.normalized().expect("nonzero norm"), probability))
}

#[derive(Debug, Clone)]
pub struct RodeoOutcome {
    /// Normalized conditioned state (zero if annihilated).
    pub state: StateVector,
    /// Probability that every ancilla read |1⟩.
    pub p_total: f64,
    pub cycle_probs: Vec<f64>,
    /// Σⱼ tⱼ over the cycles applied.
    pub t_r: f64,
}

impl RodeoOutcome {
    /// Starting point before any cycle: the input itself, p = 1, t_R = 0.
    pub fn start(v0: &StateVector) -> Self {
        RodeoOutcome {
            state: v0.clone(),
            p_total: 1.0,
            cycle_probs: Vec::new(),
            t_r: 0.0,
        }
    }

    /// Applies one more conditioned cycle in place.
    pub fn apply_cycle(
        &mut self,
        h: &SparseHamiltonian,
        target_energy: f64,
        time: f64,
    ) -> Result<()> {
        self.t_r += time;
        if self.p_total == 0.0 {
            self.cycle_probs.push(0.0);
            return Ok(());
        }
        let (state, probability) = rodeo_cycle(&self.state, h, target_energy, time)?;
        self.cycle_probs.push(probability);
        if probability < ANNIHILATION_THRESHOLD {
            self.p_total = 0.0;
            self.state = StateVector::zeros(state.basis().clone());
        } else {
            self.p_total *= probability;
            self.state = state;
        }
        Ok(())
    }

    pub fn apply_all(
        &mut self,
        h: &SparseHamiltonian,
        target_energy: f64,
        times: &[f64],
    ) -> Result<()> {
        times
            .iter()
            .try_for_each(|&t| self.apply_cycle(h, target_energy, t))
    }
}

fn ensure_normalized(v: &StateVector) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "rodeo input must be normalized (norm {})",
            v.norm()
        )));
    }
    Ok(())
}

/// Runs every cycle of `schedule` in order on a normalized input.
pub fn run_rodeo(
    v0: &StateVector,
    h: &SparseHamiltonian,
    target_energy: f64,
    schedule: &RodeoSchedule,
) -> Result<RodeoOutcome> {
    ensure_normalized(v0)?;
    let mut outcome = RodeoOutcome::start(v0);
    outcome.apply_all(h, target_energy, schedule.times())?;
    if outcome.p_total < ANNIHILATION_THRESHOLD {
        return Err(Error::RodeoAnnihilation {
            probability: outcome.p_total,
        });
    }
    Ok(outcome)
}

/// Success probability of `schedule` at each target energy in `grid`.
///
/// Points run independently; annihilated points report probability 0
/// instead of failing the scan.
pub fn energy_scan(
    v0: &StateVector,
    h: &SparseHamiltonian,
    grid: &[f64],
    schedule: &RodeoSchedule,
) -> Result<Vec<(f64, f64)>> {
    ensure_normalized(v0)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("energy grid is empty".into()));
    }
    grid.par_iter()
        .map(|&energy| {
            let mut outcome = RodeoOutcome::start(v0);
            outcome.apply_all(h, energy, schedule.times())?;
            Ok((energy, outcome.p_total))
        })
        .collect()
}

/// Uniform grid of `points` energies spanning `[min, max]`.
pub fn energy_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(Error::InvalidArgument(
            "grid needs at least one point".into(),
        )),
        1 => Ok(vec![min]),
        _ => {
            if !(max > min) {
                return Err(Error::InvalidArgument(format!(
                    "grid bounds must satisfy min < max, got [{min}, {max}]"
                )));
            }
            let step = (max - min) / (points - 1) as f64;
            Ok((0..points).map(|k| min + step * k as f64).collect())
        }
    }
}

/// One rodeo cycle simulated gate by gate on an explicit ancilla qubit.
///
/// Register layout: amplitude index a·dim + i for ancilla bit a and sector
/// ordinal i. The ancilla starts in |1⟩, then H, controlled-e^{−iHt},
/// phase e^{iE_t t} on |1⟩, H, and a projective measurement onto |1⟩.
/// The controlled evolution uses a Taylor-series matrix exponential that
/// shares no code with `expmv`.
pub fn ancilla_circuit_cycle(
    v: &StateVector,
    h: &SparseHamiltonian,
    target_energy: f64,
    time: f64,
) -> Result<(StateVector, f64)> {
    let dim = h.dim();
    if dim > CIRCUIT_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "ancilla circuit limited to dimension {CIRCUIT_MAX_DIM}, got {dim}"
        )));
    }
    if v.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.dim(),
        });
    }
    h.basis().check_same(v.basis())?;

    let generator = h.to_dense().map(|x| Complex64::new(0.0, -time * x));
    let unitary = circuit::expm_taylor(&generator);

    let mut register = vec![Complex64::new(0.0, 0.0); 2 * dim];
    register[dim..].copy_from_slice(v.amps());

    circuit::hadamard_ancilla(&mut register, dim);
    circuit::controlled_unitary(&mut register, &unitary);
    circuit::phase_ancilla(
        &mut register,
        dim,
        Complex64::from_polar(1.0, target_energy * time),
    );
    circuit::hadamard_ancilla(&mut register, dim);

    let branch = register[dim..].to_vec();
    let probability: f64 = branch.iter().map(|a| a.norm_sqr()).sum::<f64>() / v.norm_sqr();
    let state = StateVector::new(v.basis().clone(), branch)?;
    if probability < ANNIHILATION_THRESHOLD {
        return Ok((state, probability));
    }
    Ok((state.normalized().expect("nonzero norm"), probability))
}

mod circuit {
    use super::*;

    pub(super) fn hadamard_ancilla(register: &mut [Complex64], dim: usize) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (zero, one) = register.split_at_mut(dim);
        for (a, b) in zero.iter_mut().zip(one.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = (x + y) * s;
            *b = (x - y) * s;
        }
    }

    pub(super) fn phase_ancilla(register: &mut [Complex64], dim: usize, phase: Complex64) {
        register[dim..].iter_mut().for_each(|a| *a *= phase);
    }

    pub(super) fn controlled_unitary(register: &mut [Complex64], unitary: &DMatrix<Complex64>) {
        let dim = unitary.nrows();
        let target = &register[dim..];
        let applied: Vec<Complex64> = (0..dim)
            .map(|r| (0..dim).map(|c| unitary[(r, c)] * target[c]).sum())
            .collect();
        register[dim..].copy_from_slice(&applied);
    }

    /// exp(A) by scaling and squaring around a truncated Taylor series.
    pub(super) fn expm_taylor(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = a.nrows();
        let norm1 = (0..n)
            .map(|c| a.column(c).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut squarings = 0u32;
        while norm1 / 2f64.powi(squarings as i32) > 0.25 {
            squarings += 1;
        }
        let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
        let mut result = DMatrix::<Complex64>::identity(n, n);
        let mut term = DMatrix::<Complex64>::identity(n, n);
        for k in 1..=30 {
            term = &term * &scaled / Complex64::new(k as f64, 0.0);
            result += &term;
            let size = term.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if size < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            result = &result * &result;
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{infidelity, lowest_two};
    use crate::spin_model::{build_hamiltonian, enumerate_sector, BondCouplings};
    use std::sync::Arc;

    fn chain(sites: usize, n_up: usize) -> SparseHamiltonian {
        let basis = Arc::new(enumerate_sector(sites, n_up).unwrap());
        build_hamiltonian(basis, &BondCouplings::uniform(sites, 1.0)).unwrap()
    }

    fn excited(h: &SparseHamiltonian) -> (StateVector, f64) {
        let eig = h.dense_eigen();
        let mut order: Vec<usize> = (0..h.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let k = order[1];
        let v = StateVector::from_real(h.basis().clone(), eig.eigenvectors.column(k).as_slice())
            .unwrap();
        (v, eig.eigenvalues[k])
    }

    #[test]
    fn schedule_shapes() {
        let s = make_schedule(PI, 3, 1).unwrap();
        assert_eq!(s.times(), &[1.0, 0.5, 0.25]);
        let s = make_schedule(PI, 1, 4).unwrap();
        assert_eq!(s.times(), &[1.0; 4]);
        let s = make_schedule(5f64.sqrt() - 1.0, 8, 3).unwrap();
        assert!((s.t1 - 2.541_601_7).abs() < 1e-6);
        assert_eq!(s.times().len(), 24);
        assert_eq!(s.total_time(), s.times().iter().sum::<f64>());
        assert!(make_schedule(0.0, 8, 1).is_err());
        assert!(make_schedule(-1.0, 8, 1).is_err());
        assert!(make_schedule(1.0, 0, 1).is_err());
    }

    #[test]
    fn eigenstate_at_target_is_fixed() {
        let h = chain(4, 2);
        let pair = lowest_two(&h).unwrap();
        let (out, p) = rodeo_cycle(&pair.ground, &h, pair.e0, 1.234).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(infidelity(&out, &pair.ground).unwrap() < 1e-12);
    }

    #[test]
    fn half_period_annihilates() {
        let h = chain(4, 2);
        let pair = lowest_two(&h).unwrap();
        let (e1_state, e1) = excited(&h);
        let (out, p) = rodeo_cycle(&e1_state, &h, pair.e0, PI / (e1 - pair.e0)).unwrap();
        assert!(p < 1e-20);
        assert!(out.norm() < 1e-10);
    }

    #[test]
    fn equal_superposition_keeps_target_branch() {
        let h = chain(4, 2);
        let pair = lowest_two(&h).unwrap();
        let (e1_state, _) = excited(&h);
        let mix = pair
            .ground
            .add(&e1_state)
            .unwrap()
            .scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let (out, p) = rodeo_cycle(&mix, &h, pair.e0, PI / pair.gap()).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(infidelity(&out, &pair.ground).unwrap() < 1e-12);
        let schedule = RodeoSchedule::geometric(PI / pair.gap(), 0.5, 1, 1).unwrap();
        let outcome = run_rodeo(&mix, &h, pair.e0, &schedule).unwrap();
        assert!((outcome.p_total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn run_rodeo_annihilation_error() {
        let h = chain(4, 2);
        let pair = lowest_two(&h).unwrap();
        let (e1_state, _) = excited(&h);
        let schedule = make_schedule(pair.gap(), 2, 1).unwrap();
        let err = run_rodeo(&e1_state, &h, pair.e0, &schedule).unwrap_err();
        assert!(matches!(err, Error::RodeoAnnihilation { .. }));
    }

    #[test]
    fn circuit_matches_projector_on_eigenstates() {
        let h = chain(4, 2);
        let pair = lowest_two(&h).unwrap();
        let (out, p) = ancilla_circuit_cycle(&pair.ground, &h, pair.e0, 0.77).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(infidelity(&out, &pair.ground).unwrap() < 1e-12);
        let (e1_state, e1) = excited(&h);
        let (_, p) = ancilla_circuit_cycle(&e1_state, &h, pair.e0, PI / (e1 - pair.e0)).unwrap();
        assert!(p < 1e-20);
    }

    #[test]
    fn circuit_refuses_large_sectors() {
        let h = chain(10, 5);
        let v = StateVector::basis_state(h.basis().clone(), 0b11111).unwrap();
        assert!(ancilla_circuit_cycle(&v, &h, 0.0, 1.0).is_err());
    }

    #[test]
    fn grid_construction() {
        let g = energy_grid(-2.0, 2.0, 81).unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(g[0], -2.0);
        assert!((g[80] - 2.0).abs() < 1e-15);
        assert_eq!(energy_grid(1.5, 1.5, 1).unwrap(), vec![1.5]);
        assert!(energy_grid(0.0, 1.0, 0).is_err());
        assert!(energy_grid(1.0, 0.0, 3).is_err());
    }
}
