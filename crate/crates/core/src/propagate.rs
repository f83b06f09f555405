//! Exact time evolution e^{−iHt}v within a sector, and the linear ramp of
//! the middle bond that adiabatically joins two half chains.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{infidelity, lowest_two, SpectralPair};
use crate::spin_model::{
    build_hamiltonian, embed_product, middle_bond, BondCouplings, SectorBasis, SparseHamiltonian,
    StateVector,
};

/// Sector dimension below which `expmv` uses the cached dense
/// eigendecomposition instead of Krylov iteration.
pub const DENSE_EXPM_CROSSOVER: usize = 400;

/// Default accuracy target for `expmv`, relative to ‖v‖.
pub const DEFAULT_EXPMV_TOL: f64 = 1e-12;

const KRYLOV_MAX_DIM: usize = 40;
const KRYLOV_MAX_SUBSTEPS: usize = 1_000_000;

/// A real symmetric operator that can be applied to complex vectors.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Entry magnitude used to make breakdown thresholds scale-free.
    fn scale(&self) -> f64;
}

impl SymmetricOperator for SparseHamiltonian {
    fn dim(&self) -> usize {
        SparseHamiltonian::dim(self)
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        SparseHamiltonian::apply_into(self, x, y)
    }

    fn scale(&self) -> f64 {
        self.max_abs()
    }
}

/// H(λ) = H_fixed + λ·H_bond, used to step through a bond ramp without
/// rebuilding the sparse matrix.
struct BondPencil<'a> {
    fixed: &'a SparseHamiltonian,
    bond: &'a SparseHamiltonian,
    lambda: f64,
}

impl SymmetricOperator for BondPencil<'_> {
    fn dim(&self) -> usize {
        self.fixed.dim()
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.fixed.apply_into(x, y);
        if self.lambda != 0.0 {
            for (r, yr) in y.iter_mut().enumerate() {
                for (c, v) in self.bond.row(r) {
                    *yr += x[c] * (v * self.lambda);
                }
            }
        }
    }

    fn scale(&self) -> f64 {
        self.fixed
            .max_abs()
            .max(self.lambda.abs() * self.bond.max_abs())
    }
}

fn check_propagation_args(h: &SparseHamiltonian, v: &StateVector, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if v.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: v.dim(),
        });
    }
    h.basis().check_same(v.basis())
}

/// e^{−iHt}·v. Dense for small sectors, adaptive Krylov otherwise.
pub fn expmv(h: &SparseHamiltonian, t: f64, v: &StateVector, tol: f64) -> Result<StateVector> {
    check_propagation_args(h, v, tol)?;
    if h.dim() < DENSE_EXPM_CROSSOVER {
        Ok(dense_expmv_unchecked(h, t, v))
    } else {
        krylov_expmv_unchecked(h, t, v, tol)
    }
}

/// Always takes the Krylov path, whatever the sector size.
pub fn expmv_krylov(
    h: &SparseHamiltonian,
    t: f64,
    v: &StateVector,
    tol: f64,
) -> Result<StateVector> {
    check_propagation_args(h, v, tol)?;
    krylov_expmv_unchecked(h, t, v, tol)
}

/// Always takes the dense eigendecomposition path.
pub fn expmv_dense(h: &SparseHamiltonian, t: f64, v: &StateVector) -> Result<StateVector> {
    check_propagation_args(h, v, 1.0)?;
    Ok(dense_expmv_unchecked(h, t, v))
}

fn dense_expmv_unchecked(h: &SparseHamiltonian, t: f64, v: &StateVector) -> StateVector {
    if t == 0.0 {
        return v.clone();
    }
    let eig = h.dense_eigen();
    let vecs = &eig.eigenvectors;
    let dim = h.dim();
    let amps = v.amps();
    // Spectral coefficients c_k = Σ_i V_ik v_i, then rotate by e^{−iλ_k t}.
    let coeffs: Vec<Complex64> = (0..dim)
        .map(|k| {
            let col = vecs.column(k);
            let c: Complex64 = col.iter().zip(amps).map(|(x, a)| a * *x).sum();
            c * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (k, c) in coeffs.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(vecs.column(k).iter()) {
            *o += c * *x;
        }
    }
    StateVector::from_parts(v.basis().clone(), out)
}

fn krylov_expmv_unchecked(
    h: &SparseHamiltonian,
    t: f64,
    v: &StateVector,
    tol: f64,
) -> Result<StateVector> {
    let amps = krylov_propagate(h, t, v.amps(), tol)?;
    Ok(StateVector::from_parts(v.basis().clone(), amps))
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Small tridiagonal projection T_m and its spectral data, used to evaluate
/// e^{−iT_m τ}e₁ for any substep τ.
struct KrylovProjection {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl KrylovProjection {
    fn new(alpha: &[f64], beta: &[f64]) -> Self {
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
        let eig = SymmetricEigen::new(t);
        KrylovProjection {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    fn exp_e1(&self, tau: f64) -> Vec<Complex64> {
        let m = self.values.len();
        let mut u = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let w = Complex64::from_polar(self.vectors[(0, k)], -self.values[k] * tau);
            for (r, ur) in u.iter_mut().enumerate() {
                *ur += w * self.vectors[(r, k)];
            }
        }
        u
    }
}

/// Adaptive Lanczos propagation. Each substep τ is accepted when the
/// a-posteriori estimate β₀·β_m·|[e^{−iT_m τ}e₁]_m| is below the share
/// tol·‖v‖·τ/|t| of the error budget.
fn krylov_propagate<O: SymmetricOperator>(
    op: &O,
    t: f64,
    v: &[Complex64],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let dim = op.dim();
    let norm_v = cnorm(v);
    if t == 0.0 || norm_v == 0.0 {
        return Ok(v.to_vec());
    }
    let budget = tol * norm_v;
    let direction = t.signum();
    let total = t.abs();
    let breakdown = 1e-13 * op.scale().max(f64::MIN_POSITIVE);
    let max_m = KRYLOV_MAX_DIM.min(dim);

    let mut w = v.to_vec();
    let mut remaining = total;
    let mut tau = total;
    let mut spent = 0.0;
    let mut substeps = 0usize;
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];

    while remaining > 0.0 {
        substeps += 1;
        if substeps > KRYLOV_MAX_SUBSTEPS {
            return Err(Error::Propagation { residual: spent });
        }
        tau = tau.min(remaining);
        let beta0 = cnorm(&w);
        if beta0 == 0.0 {
            return Ok(w);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![w.iter().map(|x| x / beta0).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut accepted: Option<(Vec<Complex64>, usize, f64)> = None;

        for m in 1..=max_m {
            op.apply_into(&basis[m - 1], &mut scratch);
            let a = cdot(&basis[m - 1], &scratch).re;
            alpha.push(a);
            for q in &basis {
                let c = cdot(q, &scratch);
                scratch.iter_mut().zip(q).for_each(|(s, x)| *s -= c * x);
            }
            let b = cnorm(&scratch);
            let happy = b <= breakdown || m == dim;
            let checkpoint = happy || m == max_m || (m >= 4 && m % 2 == 0);
            if checkpoint {
                let proj = KrylovProjection::new(&alpha, &beta);
                if happy {
                    accepted = Some((proj.exp_e1(direction * tau), m, 0.0));
                    break;
                }
                loop {
                    let u = proj.exp_e1(direction * tau);
                    let estimate = beta0 * b * u[m - 1].norm();
                    let allowed = budget * tau / total;
                    if estimate <= allowed {
                        accepted = Some((u, m, estimate));
                        break;
                    }
                    if m < max_m {
                        break;
                    }
                    tau *= 0.5;
                    if tau < total * 1e-12 {
                        return Err(Error::Propagation { residual: estimate });
                    }
                }
                if accepted.is_some() {
                    break;
                }
            }
            beta.push(b);
            basis.push(scratch.iter().map(|x| x / b).collect());
        }

        let (u, used, estimate) = accepted.expect("Krylov substep accepted at the cap");
        let mut next = vec![Complex64::new(0.0, 0.0); dim];
        for (q, c) in basis.iter().zip(&u).take(used) {
            let c = c * beta0;
            next.iter_mut().zip(q).for_each(|(n, x)| *n += c * x);
        }
        w = next;
        remaining -= tau;
        spent += estimate;
        if remaining < total * 1e-15 {
            remaining = 0.0;
        }
        if used < max_m {
            tau *= 2.0;
        }
    }
    Ok(w)
}

/// Linear ramp λ(s) = (s/T_A)·J_target of one bond over s ∈ [0, T_A].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub total_time: f64,
    pub steps: usize,
    pub bond: usize,
    pub target_coupling: f64,
}

impl RampSchedule {
    pub fn coupling_at(&self, s: f64) -> f64 {
        if self.total_time == 0.0 {
            self.target_coupling
        } else {
            s / self.total_time * self.target_coupling
        }
    }
}

fn ensure_normalized(v: &StateVector) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "ramp input must be normalized (norm {})",
            v.norm()
        )));
    }
    Ok(())
}

/// Integrates i∂ψ/∂s = H(s)ψ with the ramped bond at λ(s).
///
/// Uniform steps of width T_A/steps, each propagated exactly under the
/// midpoint Hamiltonian H(s + Δs/2). `base` must have the ramped bond at 0.
pub fn adiabatic_ramp(
    v0: &StateVector,
    base: &BondCouplings,
    schedule: &RampSchedule,
    tol: f64,
) -> Result<StateVector> {
    ensure_normalized(v0)?;
    let basis = v0.basis().clone();
    let sites = basis.sites();
    if schedule.bond != middle_bond(sites)? {
        return Err(Error::InvalidArgument(format!(
            "ramped bond {} is not the middle bond of an L={sites} chain",
            schedule.bond
        )));
    }
    if schedule.steps == 0 || !(schedule.total_time >= 0.0) {
        return Err(Error::InvalidArgument(
            "ramp needs steps >= 1 and T_A >= 0".into(),
        ));
    }
    if base.len() != sites - 1 || base.values()[schedule.bond] != 0.0 {
        return Err(Error::InvalidArgument(
            "base couplings must cover the chain with the ramped bond at 0".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if schedule.total_time == 0.0 {
        return Ok(v0.clone());
    }

    let fixed = build_hamiltonian(basis.clone(), base)?;
    let unit_bond = BondCouplings::uniform(sites, 0.0).with_bond(schedule.bond, 1.0);
    let bond = build_hamiltonian(basis.clone(), &unit_bond)?;
    let dt = schedule.total_time / schedule.steps as f64;

    let mut amps = v0.amps().to_vec();
    for k in 0..schedule.steps {
        let lambda = schedule.coupling_at((k as f64 + 0.5) * dt);
        let pencil = BondPencil {
            fixed: &fixed,
            bond: &bond,
            lambda,
        };
        amps = krylov_propagate(&pencil, dt, &amps, tol)?;
    }
    Ok(StateVector::from_parts(basis, amps))
}

/// The fusion subproblem: a product of two half-chain states on the split
/// chain, to be joined into the uniform chain of the same sector.
#[derive(Debug, Clone)]
pub struct FusedSystem {
    pub basis: Arc<SectorBasis>,
    pub coupling: f64,
    pub bond: usize,
    /// Couplings with the middle bond switched off.
    pub split: BondCouplings,
    pub hamiltonian: Arc<SparseHamiltonian>,
    /// Exact E0, E1 and ground state of the fused chain.
    pub spectrum: SpectralPair,
    /// Normalized product input |left⟩⊗|right⟩.
    pub product: StateVector,
}

impl FusedSystem {
    /// Fuses two copies of `half` (normalized, same sector) under uniform
    /// coupling `coupling`.
    pub fn from_half(half: &StateVector, coupling: f64) -> Result<Self> {
        let product = embed_product(half, half)?;
        Self::from_product(product, coupling)
    }

    pub fn from_product(product: StateVector, coupling: f64) -> Result<Self> {
        let product = product
            .normalized()
            .ok_or_else(|| Error::InvalidArgument("product state has zero norm".into()))?;
        let basis = product.basis().clone();
        let sites = basis.sites();
        let bond = middle_bond(sites)?;
        let split = BondCouplings::split(sites, coupling)?;
        let hamiltonian = Arc::new(build_hamiltonian(
            basis.clone(),
            &BondCouplings::uniform(sites, coupling),
        )?);
        let spectrum = lowest_two(&hamiltonian)?;
        Ok(FusedSystem {
            basis,
            coupling,
            bond,
            split,
            hamiltonian,
            spectrum,
            product,
        })
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }

    pub fn product_infidelity(&self) -> Result<f64> {
        infidelity(&self.product, &self.spectrum.ground)
    }

    pub fn schedule(&self, total_time: f64, steps: usize) -> RampSchedule {
        RampSchedule {
            total_time,
            steps,
            bond: self.bond,
            target_coupling: self.coupling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampOptions {
    /// Initial step count per unit time before refinement.
    pub steps_per_time: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    /// Accept when halving the step changes the infidelity by less than
    /// both `abs_change` and `rel_change`·infidelity.
    pub abs_change: f64,
    pub rel_change: f64,
    pub tol: f64,
}

impl Default for RampOptions {
    fn default() -> Self {
        RampOptions {
            steps_per_time: 2.0,
            min_steps: 4,
            max_steps: 1 << 22,
            abs_change: 1e-4,
            rel_change: 1e-2,
            tol: DEFAULT_EXPMV_TOL,
        }
    }
}

/// Converged ramp of a fused system.
#[derive(Debug, Clone)]
pub struct RampResult {
    pub total_time: f64,
    pub steps: usize,
    pub infidelity: f64,
    pub state: StateVector,
}

/// Runs the ramp and doubles the step count until the infidelity against
/// the exact fused ground state is stable under step halving.
pub fn converged_ramp(
    sys: &FusedSystem,
    total_time: f64,
    opts: &RampOptions,
) -> Result<RampResult> {
    let ground = &sys.spectrum.ground;
    if total_time == 0.0 {
        return Ok(RampResult {
            total_time,
            steps: 1,
            infidelity: infidelity(&sys.product, ground)?,
            state: sys.product.clone(),
        });
    }
    let mut steps = ((total_time * opts.steps_per_time).ceil() as usize).max(opts.min_steps);
    let run = |steps: usize| -> Result<(StateVector, f64)> {
        let state = adiabatic_ramp(
            &sys.product,
            &sys.split,
            &sys.schedule(total_time, steps),
            opts.tol,
        )?;
        let state = state
            .normalized()
            .expect("unitary evolution keeps the norm");
        let inf = infidelity(&state, ground)?;
        Ok((state, inf))
    };
    let (_, mut previous) = run(steps)?;
    loop {
        let refined = steps * 2;
        if refined > opts.max_steps {
            return Err(Error::StepRefinement {
                steps,
                change: f64::NAN,
            });
        }
        let (state, inf) = run(refined)?;
        let change = (inf - previous).abs();
        if change < opts.abs_change && change <= opts.rel_change * inf.max(1e-12) {
            return Ok(RampResult {
                total_time,
                steps: refined,
                infidelity: inf,
                state,
            });
        }
        if refined * 2 > opts.max_steps {
            return Err(Error::StepRefinement {
                steps: refined,
                change,
            });
        }
        previous = inf;
        steps = refined;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSearchOptions {
    /// First probe of the doubling search, units of 1/J.
    pub start: f64,
    /// Largest T_A the search may probe.
    pub cap: f64,
    /// Bisection refinements after the doubling bracket.
    pub bisections: usize,
}

impl Default for RampSearchOptions {
    fn default() -> Self {
        RampSearchOptions {
            start: 1.0,
            cap: 65536.0,
            bisections: 0,
        }
    }
}

/// Outcome of a ramp-time search, with every probe kept in order.
#[derive(Debug, Clone)]
pub struct RampSearch {
    pub ramp: RampResult,
    pub probes: Vec<(f64, f64)>,
}

/// Smallest probed T_A reaching `target` infidelity.
///
/// Doubles T_A from `start` until the target is met; if the first probe
/// already succeeds it is returned as is. Otherwise `bisections` halvings of
/// the final bracket (failed T_A/2, passing T_A) follow.
pub fn ramp_time_for_infidelity(
    target: f64,
    sys: &FusedSystem,
    search: &RampSearchOptions,
    opts: &RampOptions,
) -> Result<RampSearch> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target infidelity must lie in (0, 1), got {target}"
        )));
    }
    if !(search.start > 0.0) {
        return Err(Error::InvalidArgument(
            "ramp search must start at T_A > 0".into(),
        ));
    }
    let mut probes = Vec::new();
    let mut best = f64::INFINITY;
    let mut lower: Option<f64> = None;
    let mut total_time = search.start;
    let mut passing = loop {
        let ramp = converged_ramp(sys, total_time, opts)?;
        probes.push((total_time, ramp.infidelity));
        best = best.min(ramp.infidelity);
        if ramp.infidelity <= target {
            break ramp;
        }
        lower = Some(total_time);
        total_time *= 2.0;
        if total_time > search.cap {
            return Err(Error::RampSearchFailed {
                cap: search.cap,
                best_infidelity: best,
            });
        }
    };
    if let Some(mut lo) = lower {
        for _ in 0..search.bisections {
            let mid = 0.5 * (lo + passing.total_time);
            let ramp = converged_ramp(sys, mid, opts)?;
            probes.push((mid, ramp.infidelity));
            if ramp.infidelity <= target {
                passing = ramp;
            } else {
                lo = mid;
            }
        }
    }
    Ok(RampSearch {
        ramp: passing,
        probes,
    })
}
