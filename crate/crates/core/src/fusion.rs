//! Binary fusion: join two prepared half chains by an adiabatic bond ramp,
//! purify with the Rodeo Algorithm, and account the expected unitary
//! evolution time of each preparation method.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagate::{
    converged_ramp, ramp_time_for_infidelity, FusedSystem, RampOptions, RampSearchOptions,
};
use crate::rodeo::{make_schedule, RodeoOutcome, ANNIHILATION_THRESHOLD, DEFAULT_DEPTH};
use crate::spectral::{infidelity, lowest_two};
use crate::spin_model::{build_hamiltonian, enumerate_sector, BondCouplings, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Adiabatic,
    Rodeo,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Adiabatic, Method::Rodeo, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::Adiabatic => "adiabatic",
            Method::Rodeo => "rodeo",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adiabatic" => Ok(Method::Adiabatic),
            "rodeo" => Ok(Method::Rodeo),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Fraction of up spins, kept as a reduced rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Filling {
    num: usize,
    den: usize,
}

impl Filling {
    pub const HALF: Filling = Filling { num: 1, den: 2 };
    pub const QUARTER: Filling = Filling { num: 1, den: 4 };

    pub fn new(num: usize, den: usize) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidArgument(format!(
                "filling {num}/{den} must lie in [0, 1]"
            )));
        }
        let g = gcd(num, den);
        Ok(Filling {
            num: num / g,
            den: den / g,
        })
    }

    /// Up-spin count on `sites` sites, if integral.
    pub fn n_up(self, sites: usize) -> Option<usize> {
        let scaled = sites * self.num;
        scaled.is_multiple_of(self.den).then_some(scaled / self.den)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn n_up_for_fusion(self, sites: usize) -> Result<usize> {
        if sites < 2 || !sites.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "fused chain length must be even, got {sites}"
            )));
        }
        match (self.n_up(sites), self.n_up(sites / 2)) {
            (Some(n), Some(_)) => Ok(n),
            _ => Err(Error::InvalidArgument(format!(
                "filling {self} does not give an integer up-spin count on each half of L={sites}"
            ))),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Filling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Filling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "half" => return Ok(Filling::HALF),
            "quarter" => return Ok(Filling::QUARTER),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("cannot parse filling '{s}'"));
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        let num = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim().parse().map_err(|_| bad())?;
        Filling::new(num, den)
    }
}

/// κ_A = t_A, κ_R = t_R/p, κ_H = (t_A + t_R)/p.
pub fn expected_cost(method: Method, t_a: f64, t_r: f64, p: f64) -> Result<f64> {
    if !(t_a >= 0.0 && t_r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "evolution times must be non-negative (t_A = {t_a}, t_R = {t_r})"
        )));
    }
    match method {
        Method::Adiabatic => Ok(t_a),
        _ if !(p > 0.0 && p <= 1.0) => Err(Error::InvalidProbability(p)),
        Method::Rodeo => Ok(t_r / p),
        Method::Hybrid => Ok((t_a + t_r) / p),
    }
}

/// Knobs shared by every fusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub coupling: f64,
    /// Cycles per superiteration.
    pub depth: usize,
    pub max_superiterations: usize,
    /// Infidelity the hybrid ramp aims for before purification.
    pub precondition: f64,
    pub ramp: RampOptions,
    /// Search grid in units of 1/J.
    pub search: RampSearchOptions,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            coupling: 1.0,
            depth: DEFAULT_DEPTH,
            max_superiterations: 16,
            precondition: 1e-2,
            ramp: RampOptions::default(),
            search: RampSearchOptions {
                start: 1.0,
                cap: 65536.0,
                bisections: 3,
            },
        }
    }
}

impl FusionParams {
    fn search_in_time_units(&self) -> RampSearchOptions {
        let unit = 1.0 / self.coupling.abs();
        RampSearchOptions {
            start: self.search.start * unit,
            cap: self.search.cap * unit,
            bisections: self.search.bisections,
        }
    }
}

/// One fusion step's accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub sites: usize,
    pub method: Method,
    pub target_infidelity: f64,
    /// Infidelity of the raw product input.
    pub initial_infidelity: f64,
    pub achieved_infidelity: f64,
    pub t_a: f64,
    pub t_r: f64,
    pub p: f64,
    pub kappa: f64,
    pub superiterations: usize,
    /// Step count of the converged ramp (0 when no ramp ran).
    pub ramp_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    pub steps: Vec<StepRecord>,
}

impl CostLedger {
    pub fn cumulative_kappa(&self) -> f64 {
        self.steps.iter().map(|s| s.kappa).sum()
    }
}

/// RA purification tracked one superiteration at a time.
#[derive(Debug, Clone)]
pub struct Purification {
    pub outcome: RodeoOutcome,
    pub superiterations: usize,
    pub infidelity: f64,
}

/// Applies superiterations to `start` until its infidelity against the
/// fused ground state reaches `target`.
pub fn purify(
    sys: &FusedSystem,
    start: &StateVector,
    target: f64,
    params: &FusionParams,
) -> Result<Purification> {
    let mut best = f64::INFINITY;
    let mut result = None;
    sweep_superiterations(sys, start, params, params.max_superiterations, |p| {
        best = best.min(p.infidelity);
        if p.infidelity <= target {
            result = Some(p.clone());
            return false;
        }
        true
    })?;
    result.ok_or(Error::TargetNotReached {
        target,
        max_superiterations: params.max_superiterations,
        best,
    })
}

/// Calls `visit` after 0, 1, …, `max_m` superiterations, stopping early
/// when it returns false.
pub fn sweep_superiterations(
    sys: &FusedSystem,
    start: &StateVector,
    params: &FusionParams,
    max_m: usize,
    mut visit: impl FnMut(&Purification) -> bool,
) -> Result<()> {
    let schedule = make_schedule(sys.spectrum.gap(), params.depth, 1)?;
    let ground = &sys.spectrum.ground;
    let mut progress = Purification {
        outcome: RodeoOutcome::start(start),
        superiterations: 0,
        infidelity: infidelity(start, ground)?,
    };
    if !visit(&progress) {
        return Ok(());
    }
    for m in 1..=max_m {
        progress
            .outcome
            .apply_all(&sys.hamiltonian, sys.spectrum.e0, schedule.times())?;
        if progress.outcome.p_total < ANNIHILATION_THRESHOLD {
            return Err(Error::RodeoAnnihilation {
                probability: progress.outcome.p_total,
            });
        }
        progress.superiterations = m;
        progress.infidelity = infidelity(&progress.outcome.state, ground)?;
        if !visit(&progress) {
            break;
        }
    }
    Ok(())
}

/// Prepares the fused ground state of `sys` to `target` infidelity with
/// one method.
pub fn prepare(
    sys: &FusedSystem,
    method: Method,
    target: f64,
    params: &FusionParams,
) -> Result<(StateVector, StepRecord)> {
    let initial = sys.product_infidelity()?;
    let search = params.search_in_time_units();
    let (state, t_a, ramp_steps, t_r, p, m, achieved) = match method {
        Method::Adiabatic => {
            let found = ramp_time_for_infidelity(target, sys, &search, &params.ramp)?;
            let r = found.ramp;
            (r.state, r.total_time, r.steps, 0.0, 1.0, 0, r.infidelity)
        }
        Method::Rodeo => {
            let done = purify(sys, &sys.product, target, params)?;
            let o = done.outcome;
            (
                o.state,
                0.0,
                0,
                o.t_r,
                o.p_total,
                done.superiterations,
                done.infidelity,
            )
        }
        Method::Hybrid => {
            let found = ramp_time_for_infidelity(params.precondition, sys, &search, &params.ramp)?;
            let r = found.ramp;
            let done = purify(sys, &r.state, target, params)?;
            let o = done.outcome;
            (
                o.state,
                r.total_time,
                r.steps,
                o.t_r,
                o.p_total,
                done.superiterations,
                done.infidelity,
            )
        }
    };
    let kappa = expected_cost(method, t_a, t_r, p)?;
    let record = StepRecord {
        sites: sys.sites(),
        method,
        target_infidelity: target,
        initial_infidelity: initial,
        achieved_infidelity: achieved,
        t_a,
        t_r,
        p,
        kappa,
        superiterations: m,
        ramp_steps,
    };
    Ok((state, record))
}

/// Embeds two copies of `ground_half` and prepares the fused chain.
pub fn fuse_step(
    ground_half: &StateVector,
    method: Method,
    target: f64,
    params: &FusionParams,
) -> Result<(StateVector, StepRecord)> {
    let sys = FusedSystem::from_half(ground_half, params.coupling)?;
    prepare(&sys, method, target, params)
}

/// How the final target is distributed over fusion levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelTargets {
    /// Every level aims for the final target.
    Uniform,
    /// Every level aims for target / (number of levels).
    Tightened,
}

impl FromStr for LevelTargets {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(LevelTargets::Uniform),
            "tightened" => Ok(LevelTargets::Tightened),
            other => Err(Error::InvalidArgument(format!(
                "unknown level policy '{other}'"
            ))),
        }
    }
}

impl fmt::Display for LevelTargets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelTargets::Uniform => "uniform",
            LevelTargets::Tightened => "tightened",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionPlan {
    pub final_sites: usize,
    pub base_sites: usize,
    pub filling: Filling,
    pub method: Method,
    pub target_infidelity: f64,
    pub level_targets: LevelTargets,
    pub params: FusionParams,
}

impl FusionPlan {
    /// Chain lengths of every level, base first.
    pub fn levels(&self) -> Result<Vec<usize>> {
        let (base, last) = (self.base_sites, self.final_sites);
        if base == 0 || last < base || last % base != 0 || !(last / base).is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "L_final / L_base must be a power of two (L_final = {last}, L_base = {base})"
            )));
        }
        let mut levels = vec![base];
        while *levels.last().unwrap() < last {
            levels.push(levels.last().unwrap() * 2);
        }
        for &sites in &levels {
            if self.filling.n_up(sites).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "filling {} gives a fractional up-spin count at L = {sites}",
                    self.filling
                )));
            }
        }
        Ok(levels)
    }

    fn level_target(&self, fusions: usize) -> f64 {
        match self.level_targets {
            LevelTargets::Uniform => self.target_infidelity,
            LevelTargets::Tightened => self.target_infidelity / fusions.max(1) as f64,
        }
    }
}

/// Exact ground state of the base block.
pub fn base_ground(sites: usize, n_up: usize, coupling: f64) -> Result<StateVector> {
    let basis = Arc::new(enumerate_sector(sites, n_up)?);
    if basis.dim() == 1 {
        let config = basis.config(0);
        return StateVector::basis_state(basis, config);
    }
    let h = build_hamiltonian(basis, &BondCouplings::uniform(sites, coupling))?;
    Ok(lowest_two(&h)?.ground)
}

/// Fuses from `base_sites` up to `final_sites`, each level consuming the
/// previous level's prepared state.
pub fn run_fusion(plan: &FusionPlan) -> Result<(StateVector, CostLedger)> {
    let levels = plan.levels()?;
    let n_base = plan
        .filling
        .n_up(plan.base_sites)
        .expect("validated by levels()");
    let mut state = base_ground(plan.base_sites, n_base, plan.params.coupling)?;
    let mut ledger = CostLedger::default();
    let target = plan.level_target(levels.len() - 1);
    for _ in levels.iter().skip(1) {
        let (next, record) = fuse_step(&state, plan.method, target, &plan.params)?;
        ledger.steps.push(record);
        state = next;
    }
    Ok((state, ledger))
}

/// One cell of the method comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub sites: usize,
    pub filling: Filling,
    pub target_infidelity: f64,
    pub outcome: std::result::Result<StepRecord, Error>,
}

/// The fusion subproblem L/2 + L/2 → L with exact half-chain ground states.
pub fn fusion_subproblem(sites: usize, filling: Filling, coupling: f64) -> Result<FusedSystem> {
    let n_up = filling.n_up_for_fusion(sites)?;
    let half = base_ground(sites / 2, n_up / 2, coupling)?;
    FusedSystem::from_half(&half, coupling)
}

/// Cost of every method at every target for one subproblem. Cells run
/// concurrently; rows come back ordered by method, then target.
pub fn compare_methods(
    sites: usize,
    filling: Filling,
    targets: &[f64],
    params: &FusionParams,
) -> Result<Vec<CompareRow>> {
    let sys = fusion_subproblem(sites, filling, params.coupling)?;
    let cells: Vec<(Method, f64)> = Method::ALL
        .iter()
        .flat_map(|&m| targets.iter().map(move |&t| (m, t)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(method, target)| CompareRow {
            method,
            sites,
            filling,
            target_infidelity: target,
            outcome: prepare(&sys, method, target, params).map(|(_, record)| record),
        })
        .collect())
}

/// One point of a superiteration sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergeRow {
    pub superiterations: usize,
    pub infidelity: f64,
    pub p_total: f64,
    pub t_a: f64,
    pub t_r: f64,
    pub kappa: f64,
}

/// Infidelity, success probability and cost after each of 0..=`max_m`
/// superiterations, for the rodeo or hybrid method.
pub fn converge_sweep(
    sys: &FusedSystem,
    method: Method,
    max_m: usize,
    params: &FusionParams,
) -> Result<Vec<ConvergeRow>> {
    let (start, t_a) = match method {
        Method::Adiabatic => {
            return Err(Error::InvalidArgument(
                "superiteration sweeps need the rodeo or hybrid method".into(),
            ))
        }
        Method::Rodeo => (sys.product.clone(), 0.0),
        Method::Hybrid => {
            let search = params.search_in_time_units();
            let r = ramp_time_for_infidelity(params.precondition, sys, &search, &params.ramp)?.ramp;
            (r.state, r.total_time)
        }
    };
    let mut rows = Vec::new();
    let mut failure = None;
    sweep_superiterations(sys, &start, params, max_m, |p| {
        match expected_cost(method, t_a, p.outcome.t_r, p.outcome.p_total) {
            Ok(kappa) => rows.push(ConvergeRow {
                superiterations: p.superiterations,
                infidelity: p.infidelity,
                p_total: p.outcome.p_total,
                t_a,
                t_r: p.outcome.t_r,
                kappa,
            }),
            Err(e) => failure = Some(e),
        }
        failure.is_none()
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Converged ramp infidelity for each T_A in `times` (units of 1/J).
pub fn ramp_profile(
    sys: &FusedSystem,
    times: &[f64],
    opts: &RampOptions,
) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&t| converged_ramp(sys, t / sys.coupling.abs(), opts).map(|r| (t, r.infidelity)))
        .collect()
}
