use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use dhpe::estimation::EstimationReport;
use dhpe::experiments::{format_table, ReferenceScenario};
use dhpe::hydraulics::ResistanceFile;
use dhpe::nalgebra::DVector;
use dhpe::topology::NetworkFile;
use dhpe::{ExperimentConfig, LoadCondition, NetworkModel, NetworkTopology, ResistanceVector, TrialSettings};
use serde::{Deserialize, Serialize};

use crate::{conditions, read_json};

/// Loads, mirrors and validates a network file.
fn load_network(path: &Path) -> Result<NetworkTopology> {
    let file: NetworkFile = read_json(path)?;
    let net = dhpe::mirror_return(&NetworkTopology::from(&file));
    let report = dhpe::validate_topology(&net);
    if !report.is_valid() {
        bail!("{} is not a valid network:\n{report}", path.display());
    }
    Ok(net)
}

fn load_resistances(path: &Path, net: &NetworkTopology) -> Result<ResistanceVector> {
    let file: ResistanceFile = read_json(path)?;
    let s = file.to_resistances::<f64>().with_context(|| path.display().to_string())?;
    if s.supply.len() != net.n_pipes() || s.valves.len() != net.n_valves() {
        bail!(
            "{}: {} pipe and {} valve resistances for a network with {} pipes and {} valves",
            path.display(),
            s.supply.len(),
            s.valves.len(),
            net.n_pipes(),
            net.n_valves()
        );
    }
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn validate(path: &Path) -> Result<ExitCode> {
    let file: NetworkFile = read_json(path)?;
    let net = dhpe::mirror_return(&NetworkTopology::from(&file));
    let report = dhpe::validate_topology(&net);
    if report.is_valid() {
        println!(
            "valid: {} supply pipes, {} valves, {} parameters",
            net.n_pipes(),
            net.n_valves(),
            net.n_params()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        println!("invalid:\n{report}");
        Ok(ExitCode::from(1))
    }
}

#[derive(Serialize)]
struct SimulationOutput {
    p_alpha: f64,
    p_beta: f64,
    min_required_dp: f64,
    boundary_flows: Vec<f64>,
    valve_settings: Vec<f64>,
    supply_flows: Vec<f64>,
    supply_pressures: Vec<f64>,
    return_pressures: Vec<f64>,
}

pub fn simulate(
    network: &Path,
    resistances: &Path,
    flows: &[f64],
    dp: Option<f64>,
    p_alpha: f64,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let net = load_network(network)?;
    let s = load_resistances(resistances, &net)?;
    let model = NetworkModel::new(&net)?;
    if flows.len() != net.n_valves() {
        bail!("{} boundary flows given for {} valves", flows.len(), net.n_valves());
    }
    let boundary = DVector::from_column_slice(flows);
    let supply = model.solve_flows(&boundary)?;
    let min_dp = model.min_required_dp(&s, &supply)?;
    let lc = model.simulate(&s, &boundary, dp.unwrap_or(min_dp), p_alpha)?;
    let u = dhpe::ControlVector::new(lc.valve_settings.clone())?;
    let state = model.nodal_pressures(&s, &supply, &u, p_alpha)?;

    let result = SimulationOutput {
        p_alpha: lc.p_alpha,
        p_beta: lc.p_beta,
        min_required_dp: min_dp,
        boundary_flows: flows.to_vec(),
        valve_settings: lc.valve_settings.iter().copied().collect(),
        supply_flows: supply.supply.iter().copied().collect(),
        supply_pressures: state.supply_nodal.iter().copied().collect(),
        return_pressures: state.return_nodal.iter().copied().collect(),
    };

    println!("p_alpha {:.6}  p_beta {:.6}  (minimum feasible dp {:.6})", result.p_alpha, result.p_beta, min_dp);
    println!("{:<10} {:>14} {:>10}", "valve", "flow", "u");
    for (v, (q, u)) in result.boundary_flows.iter().zip(&result.valve_settings).enumerate() {
        println!("{:<10} {q:>14.6} {u:>10.6}", v + 1);
    }
    println!("{:<10} {:>14}", "pipe", "flow");
    for (i, q) in result.supply_flows.iter().enumerate() {
        println!("{:<10} {q:>14.6}", net.n_valves() + i + 1);
    }
    println!("{:<10} {:>14} {:>14}", "node", "supply p", "return p");
    for (i, (a, b)) in result.supply_pressures.iter().zip(&result.return_pressures).enumerate() {
        println!("{i:<10} {a:>14.6} {b:>14.6}");
    }
    if let Some(path) = out {
        write_text(path, &(serde_json::to_string_pretty(&result)? + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn generate(
    network: &Path,
    resistances: &Path,
    settings: &TrialSettings,
    count: usize,
    epsilon: f64,
    seed: u64,
    out: &Path,
) -> Result<ExitCode> {
    let net = load_network(network)?;
    let s = load_resistances(resistances, &net)?;
    let lcs: Vec<LoadCondition> = dhpe::noisy_conditions(&net, &s, settings, count, epsilon, seed)?;
    let file = fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    conditions::write(BufWriter::new(file), &lcs)?;
    Ok(ExitCode::SUCCESS)
}

fn load_system(network: &Path, conditions_path: &Path) -> Result<dhpe::RegressionSystem> {
    let net = load_network(network)?;
    let lcs = conditions::read_path(conditions_path)?;
    if lcs[0].n_valves() != net.n_valves() {
        bail!(
            "dimension mismatch: {} has {} valves, {} has {}",
            conditions_path.display(),
            lcs[0].n_valves(),
            network.display(),
            net.n_valves()
        );
    }
    Ok(dhpe::build_system(&net, &lcs)?)
}

/// Truth in regression column order, taking the supply value for pipes.
fn truth_vector(path: &Path, report: &EstimationReport) -> Result<Vec<f64>> {
    let file: ResistanceFile = read_json(path)?;
    let mut t = file.supply.clone();
    t.extend(&file.valves);
    if t.len() != report.s_hat.len() {
        bail!("{}: {} values for {} parameters", path.display(), t.len(), report.s_hat.len());
    }
    Ok(t)
}

fn print_report(report: &EstimationReport, truth: Option<&Path>) -> Result<()> {
    let truth = truth.map(|p| truth_vector(p, report)).transpose()?;
    print!("{}", format_table(report, truth.as_deref()));
    let cond = report
        .condition_number
        .map_or_else(|| "inf".to_string(), |c| format!("{c:.3e}"));
    println!(
        "rank {}/{}  condition {cond}  residual {:.3e}",
        report.rank,
        report.s_hat.len(),
        report.residual_norm
    );
    Ok(())
}

fn warn_unidentifiable(report: &EstimationReport) {
    if report.unidentifiable.is_empty() {
        return;
    }
    eprintln!(
        "warning: rank {} < {}; the data do not determine these parameter combinations:",
        report.rank,
        report.s_hat.len()
    );
    for c in &report.unidentifiable {
        eprintln!("  {c}");
    }
}

pub fn estimate(
    network: &Path,
    conditions_path: &Path,
    tol: f64,
    out: Option<&Path>,
    truth: Option<&Path>,
) -> Result<ExitCode> {
    let sys = load_system(network, conditions_path)?;
    let report = dhpe::estimate(&sys, tol)?.to_report();
    print_report(&report, truth)?;
    warn_unidentifiable(&report);
    if let Some(path) = out {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn identifiability(network: &Path, conditions_path: &Path, tol: f64) -> Result<ExitCode> {
    let sys = load_system(network, conditions_path)?;
    let rep = dhpe::identifiability(&sys, tol)?;
    println!("rank {}/{}", rep.rank, rep.n_params);
    if rep.condition_number.is_finite() {
        println!("condition number {:.6e}", rep.condition_number);
    } else {
        println!("condition number inf");
    }
    let sv: Vec<String> = rep.singular_values.iter().map(|s| format!("{s:.4e}")).collect();
    println!("singular values {}", sv.join(" "));
    if rep.is_identifiable() {
        println!("all parameters identifiable");
    } else {
        println!("unidentifiable combinations:");
        for c in &rep.unidentifiable {
            println!("  {c}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Experiment configuration plus an optional scenario; without one the
/// bundled reference scenario is used. Paths are relative to the config.
#[derive(Deserialize)]
struct MonteCarloFile {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    #[serde(default)]
    network: Option<PathBuf>,
    #[serde(default)]
    resistances: Option<PathBuf>,
}

pub fn montecarlo(config: &Path, out: &Path) -> Result<ExitCode> {
    let cfg: MonteCarloFile = read_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let scenario = match (&cfg.network, &cfg.resistances) {
        (None, None) => dhpe::reference_scenario::<f64>(),
        (Some(n), Some(r)) => {
            let net = load_network(&base.join(n))?;
            let s = load_resistances(&base.join(r), &net)?;
            ReferenceScenario::new(net, &s)?
        }
        _ => bail!("network and resistances must be given together"),
    };
    let exp = &cfg.experiment;
    let summary = dhpe::monte_carlo(&scenario, exp)?;

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_text(&out.join("summary.csv"), &summary.interval_csv())?;
    write_text(&out.join("boxplot.csv"), &summary.boxplot_csv())?;
    write_text(&out.join("boxplot.svg"), &dhpe::plot::boxplot_svg(&summary))?;
    for &edge in &exp.plot_edges {
        let Some(col) = summary.column_of_edge(edge) else {
            eprintln!("warning: edge {edge} is not a parameter of this network; no plot");
            continue;
        };
        write_text(
            &out.join(format!("interval_edge{edge}.svg")),
            &dhpe::plot::interval_svg(&summary, col),
        )?;
        print!("edge {edge} interval width:");
        for t in summary.condition_counts() {
            if let Some(row) = summary.interval(col, t) {
                print!("  T={t} {:.4e}", row.width());
            }
        }
        println!();
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn report(result: &Path, truth: Option<&Path>) -> Result<ExitCode> {
    let report: EstimationReport = read_json(result)?;
    if report.column_map.len() != report.s_hat.len() || report.edges.len() != report.s_hat.len() {
        bail!("{}: column map does not match the estimate", result.display());
    }
    print_report(&report, truth)?;
    warn_unidentifiable(&report);
    Ok(ExitCode::SUCCESS)
}
