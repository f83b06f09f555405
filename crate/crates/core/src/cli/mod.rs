//! Experiment runner: `gap`, `compare`, `scan`, `converge` and `fuse`.
//!
//! Every command writes CSV preceded by one `#` provenance line carrying
//! the tool version and the fully resolved configuration. Status messages
//! go to standard error. Exit codes: 0 success, 1 some computation failed,
//! 2 configuration error.

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Arg, ArgAction, ArgMatches, Command};
use thiserror::Error;

pub use config::{ExperimentConfig, RawConfig, ScanInput, KEYS};

use crate::error::Error;
use crate::fusion::{
    compare_methods, converge_sweep, fusion_subproblem, run_fusion, CompareRow, Filling,
    FusionPlan, Method,
};
use crate::rodeo::{energy_grid, energy_scan, make_schedule};
use crate::spectral::lowest_two;
use crate::spin_model::{
    build_hamiltonian, enumerate_sector, BondCouplings, SparseHamiltonian, StateVector,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COMPARE_HEADER: &str =
    "method,L,filling,target_infidelity,achieved_infidelity,t_A,t_R,p,J_kappa,status";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Gap,
    Compare,
    Scan,
    Converge,
    Fuse,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Gap,
        Subcommand::Compare,
        Subcommand::Scan,
        Subcommand::Converge,
        Subcommand::Fuse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Gap => "gap",
            Subcommand::Compare => "compare",
            Subcommand::Scan => "scan",
            Subcommand::Converge => "converge",
            Subcommand::Fuse => "fuse",
        }
    }

    fn about(self) -> &'static str {
        match self {
            Subcommand::Gap => "print E0, E1, the gap and t1 = pi/gap for each chain length",
            Subcommand::Compare => "cost of adiabatic, rodeo and hybrid preparation per target",
            Subcommand::Scan => "rodeo success probability over a grid of target energies",
            Subcommand::Converge => "infidelity and cost versus superiteration count",
            Subcommand::Fuse => "multi-level binary fusion from l_base up to L",
        }
    }
}

fn key_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .short('c')
        .value_name("FILE")
        .value_parser(clap::value_parser!(PathBuf))
        .help("key = value configuration file")];
    args.extend(KEYS.iter().map(|(key, default, help)| {
        let help = if default.is_empty() {
            help.to_string()
        } else {
            format!("{help} [default: {default}]")
        };
        Arg::new(*key)
            .long(*key)
            .value_name("VALUE")
            .action(ArgAction::Set)
            .allow_hyphen_values(true)
            .help(help)
    }));
    args
}

pub fn command() -> Command {
    let mut cmd = Command::new("rodeo-fusion")
        .version(VERSION)
        .about("Fusion-method eigenstate preparation experiments on XX chains")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in Subcommand::ALL {
        cmd = cmd.subcommand(Command::new(sub.name()).about(sub.about()).args(key_args()));
    }
    cmd
}

/// File values overlaid by flag values.
pub fn layered_config(matches: &ArgMatches) -> Result<ExperimentConfig, CliError> {
    let mut raw = match matches.get_one::<PathBuf>("config") {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for (key, _, _) in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            raw.set(key, value)?;
        }
    }
    ExperimentConfig::resolve(raw)
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn provenance_line(sub: Subcommand, cfg: &ExperimentConfig) -> String {
    format!(
        "# rodeo-fusion {VERSION} {} {}\n",
        sub.name(),
        cfg.provenance()
    )
}

/// Runs one command into `out`. `Ok(false)` means some cells failed.
pub fn execute(
    sub: Subcommand,
    cfg: &ExperimentConfig,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    out.write_all(provenance_line(sub, cfg).as_bytes())?;
    if matches!(
        sub,
        Subcommand::Compare | Subcommand::Converge | Subcommand::Fuse
    ) {
        writeln!(
            out,
            "# infidelities are measured against the exact sector ground state"
        )?;
    }
    match sub {
        Subcommand::Gap => cmd_gap(cfg, out),
        Subcommand::Compare => cmd_compare(cfg, out),
        Subcommand::Scan => cmd_scan(cfg, out),
        Subcommand::Converge => cmd_converge(cfg, out),
        Subcommand::Fuse => cmd_fuse(cfg, out),
    }
}

fn single_size(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    match cfg.sizes.as_slice() {
        [l] => Ok(*l),
        _ => Err(CliError::Config(
            "this command takes a single chain length L".into(),
        )),
    }
}

fn sector_up_count(cfg: &ExperimentConfig, sites: usize) -> Result<usize, CliError> {
    match cfg.n_up {
        Some(n) if n <= sites => Ok(n),
        Some(n) => Err(CliError::Config(format!("n_up = {n} exceeds L = {sites}"))),
        None => cfg.filling.n_up(sites).ok_or_else(|| {
            CliError::Config(format!(
                "filling {} gives a fractional up-spin count at L = {sites}",
                cfg.filling
            ))
        }),
    }
}

pub fn cmd_gap(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    writeln!(out, "L,n_up,E0,E1,gap,t1")?;
    for &sites in &cfg.sizes {
        let n_up = sector_up_count(cfg, sites)?;
        let basis = Arc::new(enumerate_sector(sites, n_up)?);
        let h = build_hamiltonian(basis, &BondCouplings::uniform(sites, cfg.params.coupling))?;
        let pair = lowest_two(&h)?;
        let gap = pair.gap();
        writeln!(
            out,
            "{sites},{n_up},{},{},{},{}",
            num(pair.e0),
            num(pair.e1),
            num(gap),
            num(std::f64::consts::PI / gap)
        )?;
    }
    Ok(true)
}

fn compare_line(row: &CompareRow, coupling: f64) -> String {
    let j = coupling.abs();
    let head = format!(
        "{},{},{},{}",
        row.method,
        row.sites,
        row.filling,
        num(row.target_infidelity)
    );
    match &row.outcome {
        Ok(r) => format!(
            "{head},{},{},{},{},{},OK",
            num(r.achieved_infidelity),
            num(r.t_a * j),
            num(r.t_r * j),
            num(r.p),
            num(r.kappa * j)
        ),
        Err(_) => format!("{head},,,,,,FAILED"),
    }
}

pub fn cmd_compare(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    for &sites in &cfg.sizes {
        cfg.filling
            .n_up_for_fusion(sites)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut rows: Vec<(usize, CompareRow)> = Vec::new();
    for (position, &sites) in cfg.sizes.iter().enumerate() {
        match compare_methods(sites, cfg.filling, &cfg.targets, &cfg.params) {
            Ok(cells) => rows.extend(cells.into_iter().map(|c| (position, c))),
            Err(e) => {
                for method in Method::ALL {
                    for &target in &cfg.targets {
                        rows.push((
                            position,
                            CompareRow {
                                method,
                                sites,
                                filling: cfg.filling,
                                target_infidelity: target,
                                outcome: Err(e.clone()),
                            },
                        ));
                    }
                }
            }
        }
    }
    rows.sort_by_key(|(position, row)| (row.method, *position));

    writeln!(out, "{COMPARE_HEADER}")?;
    let mut all_ok = true;
    for (_, row) in &rows {
        if let Err(e) = &row.outcome {
            all_ok = false;
            eprintln!(
                "compare: {} L={} target={:e} failed: {e}",
                row.method, row.sites, row.target_infidelity
            );
        }
        writeln!(out, "{}", compare_line(row, cfg.params.coupling))?;
    }
    Ok(all_ok)
}

fn scan_state(cfg: &ExperimentConfig, h: &SparseHamiltonian) -> Result<StateVector, CliError> {
    let basis = h.basis().clone();
    let state = match &cfg.scan_input {
        ScanInput::First => {
            let config = basis.config(0);
            StateVector::basis_state(basis, config)?
        }
        ScanInput::Ground => lowest_two(h)?.ground,
        ScanInput::Excited => {
            let eig = h.dense_eigen();
            let mut order: Vec<usize> = (0..h.dim()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let column = eig.eigenvectors.column(
                *order
                    .get(1)
                    .ok_or_else(|| CliError::Config("sector has no excited state".into()))?,
            );
            StateVector::from_real(basis, column.as_slice())?
        }
        ScanInput::Product => {
            let filling = Filling::new(basis.n_up(), basis.sites())?;
            fusion_subproblem(basis.sites(), filling, cfg.params.coupling)
                .map_err(|e| CliError::Config(format!("product scan input: {e}")))?
                .product
        }
        ScanInput::Config(text) => {
            let config = basis
                .parse_config(text)
                .map_err(|e| CliError::Config(e.to_string()))?;
            StateVector::basis_state(basis, config)?
        }
    };
    Ok(state)
}

pub fn cmd_scan(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let sites = single_size(cfg)?;
    let n_up = sector_up_count(cfg, sites)?;
    let basis = Arc::new(enumerate_sector(sites, n_up)?);
    let h = build_hamiltonian(basis, &BondCouplings::uniform(sites, cfg.params.coupling))?;
    let v0 = scan_state(cfg, &h)?;
    let gap = lowest_two(&h)?.gap();
    let schedule = make_schedule(gap, cfg.params.depth, cfg.scan_superiterations)?;
    let j = cfg.params.coupling.abs();
    let grid = energy_grid(cfg.scan_min * j, cfg.scan_max * j, cfg.scan_points)?;
    let values = energy_scan(&v0, &h, &grid, &schedule)?;
    writeln!(out, "E_t,p_total")?;
    for (energy, p) in values {
        writeln!(out, "{},{}", num(energy), num(p))?;
    }
    Ok(true)
}

pub fn cmd_converge(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let sites = single_size(cfg)?;
    if cfg.method == Method::Adiabatic {
        return Err(CliError::Config(
            "converge needs method rodeo or hybrid".into(),
        ));
    }
    cfg.filling
        .n_up_for_fusion(sites)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let sys = fusion_subproblem(sites, cfg.filling, cfg.params.coupling)?;
    let rows = converge_sweep(&sys, cfg.method, cfg.m_max(), &cfg.params)?;
    let j = cfg.params.coupling.abs();
    writeln!(out, "M,infidelity,p_total,J_kappa")?;
    for row in rows.iter().filter(|r| r.superiterations >= cfg.m_min) {
        writeln!(
            out,
            "{},{},{},{}",
            row.superiterations,
            num(row.infidelity),
            num(row.p_total),
            num(row.kappa * j)
        )?;
    }
    Ok(true)
}

pub fn cmd_fuse(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let plan = FusionPlan {
        final_sites: single_size(cfg)?,
        base_sites: cfg.base_sites,
        filling: cfg.filling,
        method: cfg.method,
        target_infidelity: cfg.target,
        level_targets: cfg.level_targets,
        params: cfg.params.clone(),
    };
    plan.levels().map_err(|e| CliError::Config(e.to_string()))?;
    let (_, ledger) = run_fusion(&plan)?;
    let j = cfg.params.coupling.abs();
    writeln!(
        out,
        "step,L,target_infidelity,initial_infidelity,achieved_infidelity,t_A,t_R,p,M,J_kappa,cumulative_J_kappa"
    )?;
    let mut cumulative = 0.0;
    for (i, s) in ledger.steps.iter().enumerate() {
        cumulative += s.kappa;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            s.sites,
            num(s.target_infidelity),
            num(s.initial_infidelity),
            num(s.achieved_infidelity),
            num(s.t_a * j),
            num(s.t_r * j),
            num(s.p),
            s.superiterations,
            num(s.kappa * j),
            num(cumulative * j)
        )?;
    }
    Ok(true)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand required");
    let sub = Subcommand::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .expect("registered subcommand");

    let result = layered_config(sub_matches).and_then(|cfg| {
        let mut sink: Box<dyn Write> = match &cfg.output {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let ok = execute(sub, &cfg, sink.as_mut())?;
        sink.flush()?;
        Ok(ok)
    });
    match result {
        Ok(true) => {
            eprintln!("{}: done", sub.name());
            0
        }
        Ok(false) => {
            eprintln!("{}: finished with failed cells", sub.name());
            1
        }
        Err(e) => {
            eprintln!("{}: {e}", sub.name());
            e.exit_code()
        }
    }
}
