//! Single-command dispatch. Every command writes `config.json` (the resolved
//! configuration) next to its outputs and returns a one-line summary.

use anyhow::{bail, Context, Result};
use freezegate::channel::{
    avg_fidelity_haar, evaluate_point, extract_channel, FidelityMethod, Regime,
};
use freezegate::dressed::{effective_model, off_ratio, solve_omega_d_on, solve_omega_d_on_auto};
use freezegate::floquet::{
    avoided_crossing_gap, dressed_product_basis, floquet_spectrum, BranchLabel, GM_E1_G2, GM_G1_E2,
};
use freezegate::optimize::{gate_time_sweep, optimize_joint, OptimizerSettings, OPTIMIZABLE};
use freezegate::pauli::QuantumState;
use freezegate::propagator::export_trajectory;
use freezegate::scan::{run_scan, ScanSpec, SCANNABLE};
use freezegate::{export, Param};
use serde::Serialize;

use crate::config::{Command, GridRange, RunConfig};
use crate::output::OutputDir;

/// Resolution and budget knobs shared by the commands.
#[derive(Debug, Clone, Copy)]
pub struct Effort {
    pub quick: bool,
}

impl Effort {
    pub fn points(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    pub fn settings(&self, run: &RunConfig) -> OptimizerSettings {
        OptimizerSettings {
            report: run.cfg,
            ..OptimizerSettings::default()
        }
    }
}

pub fn run(run: &RunConfig, effort: Effort) -> Result<String> {
    let out = OutputDir::create(&run.output_dir)?;
    out.write_text("config.json", &(run.to_json() + "\n"))?;
    match run.command {
        Command::EffectiveModel => effective(run, &out),
        Command::Floquet => floquet(run, &out, effort),
        Command::Trajectory => trajectory(run, &out, effort),
        Command::Fidelity => fidelity(run, &out),
        Command::Scan => scan(run, &out, effort),
        Command::Optimize => optimize(run, &out, effort),
        Command::GateTimeSweep => sweep(run, &out, effort),
        Command::ReproducePaper => unreachable!("dispatched separately"),
    }
}

#[derive(Serialize)]
struct RegimeSummary {
    omega_d: f64,
    delta_1: f64,
    delta_2: f64,
    omega_m_prime: f64,
    omega_1_prime: f64,
    omega_2_prime: f64,
    signed_detuning: f64,
    delta_12_prime: f64,
    delta_m1_prime: f64,
    overlap_factor: f64,
    j12_eff: f64,
    j12_exchange: f64,
    t_gate: f64,
    freezing_ratio: f64,
}

fn regime_summary(p: &freezegate::ProtocolParams, omega_d: f64) -> RegimeSummary {
    let m = effective_model(p, omega_d);
    RegimeSummary {
        omega_d,
        delta_1: m.delta_1,
        delta_2: m.delta_2,
        omega_m_prime: m.modulator.omega_m_prime,
        omega_1_prime: m.omega_1_prime,
        omega_2_prime: m.omega_2_prime,
        signed_detuning: m.signed_detuning,
        delta_12_prime: m.delta_12_prime,
        delta_m1_prime: m.delta_m1_prime,
        overlap_factor: m.overlap_factor,
        j12_eff: m.j12_eff,
        j12_exchange: m.j12_exchange,
        t_gate: m.t_gate,
        freezing_ratio: m.freezing_ratio(p),
    }
}

#[derive(Serialize)]
struct EffectiveReport {
    on: Option<RegimeSummary>,
    on_error: Option<String>,
    off: RegimeSummary,
    off_ratio: f64,
    warnings: Vec<String>,
}

fn solve_on(run: &RunConfig) -> freezegate::Result<f64> {
    match (run.params.omega_d_on, run.options.bracket) {
        (Some(w), _) => Ok(w),
        (None, Some(b)) => solve_omega_d_on(&run.params, b).map(|r| r.omega_d),
        (None, None) => solve_omega_d_on_auto(&run.params).map(|r| r.omega_d),
    }
}

fn effective(run: &RunConfig, out: &OutputDir) -> Result<String> {
    let p = &run.params;
    let (on, on_error) = match solve_on(run) {
        Ok(w) => (Some(regime_summary(p, w)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = EffectiveReport {
        on,
        on_error,
        off: regime_summary(p, p.omega_d_off),
        off_ratio: off_ratio(p),
        warnings: p.hierarchy_warnings(),
    };
    out.write_json("effective_model.json", &report)?;
    let on_part = match &report.on {
        Some(s) => format!(
            "omega_d_on={:.10} J12_eff_on={:.6e} T_gate={:.6e}",
            s.omega_d, s.j12_eff, s.t_gate
        ),
        None => format!("omega_d_on unresolved ({})", report.on_error.as_deref().unwrap_or("")),
    };
    Ok(format!(
        "effective-model: delta_12_prime_off={:.6e} {on_part} R_off={:.4}",
        report.off.delta_12_prime, report.off_ratio
    ))
}

fn regime_omega(run: &RunConfig, regime: Regime) -> Result<f64> {
    Ok(match regime {
        Regime::On => solve_on(run).context("solving omega_d_on")?,
        Regime::Off => run.params.omega_d_off,
    })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::On => "on",
        Regime::Off => "off",
    }
}

fn floquet(run: &RunConfig, out: &OutputDir, effort: Effort) -> Result<String> {
    let regime = run.options.regime.unwrap_or(Regime::On);
    let parameter = run.options.parameter.unwrap_or(Param::Omega2);
    let w = regime_omega(run, regime)?;
    let centre = run.params.get(parameter);
    let half = match parameter {
        Param::Omega2 | Param::Omega1 => 5e-4,
        _ => 0.5 * centre.abs().max(1e-6),
    };
    let grid = run.grid_or(GridRange {
        lo: centre - half,
        hi: centre + half,
        n: effort.points(101, 21),
        log: false,
    });
    let spec = floquet_spectrum(&run.params, w, parameter, &grid, run.cfg)?;
    out.write_with("floquet.csv", |b| Ok(export::spectrum_csv(b, &spec)?))?;
    let gap = avoided_crossing_gap(&spec, GM_G1_E2, GM_E1_G2)?;
    out.write_json("floquet_gap.json", &gap)?;
    Ok(format!(
        "floquet ({} regime, omega_d={w:.10}): {} points over {parameter}, min gap {} <-> {} = {:.6e} at {:.8}",
        regime_name(regime),
        grid.len(),
        GM_G1_E2.key(),
        GM_E1_G2.key(),
        gap.gap,
        gap.location
    ))
}

fn trajectory(run: &RunConfig, out: &OutputDir, effort: Effort) -> Result<String> {
    let regime = run.options.regime.unwrap_or(Regime::On);
    let w = regime_omega(run, regime)?;
    let label = match &run.options.initial {
        Some(s) => BranchLabel::parse(s)?,
        None => GM_E1_G2,
    };
    let basis = dressed_product_basis(&run.params, w);
    let psi = QuantumState::new(basis.column(label.index()).into_owned());
    let t_final = match run.options.t_final {
        Some(t) => t,
        None => {
            let w_on = solve_on(run).context("solving omega_d_on for the default duration")?;
            effective_model(&run.params, w_on).t_gate
        }
    };
    let samples = run.options.samples.unwrap_or(effort.points(401, 101));
    let rows = export_trajectory(&run.params, w, &psi, t_final, samples, run.cfg)?;
    out.write_with("trajectory.csv", |b| Ok(export::trajectory_csv(b, &rows)?))?;
    let last = rows.last().expect("samples >= 2");
    Ok(format!(
        "trajectory ({} regime, from {}): t_final={t_final:.6e}, final <sz> = [{:.6}, {:.6}, {:.6}], modulator fidelity {:.6}",
        regime_name(regime),
        label.key(),
        last.sz[0],
        last.sz[1],
        last.sz[2],
        last.modulator_fidelity
    ))
}

fn fidelity(run: &RunConfig, out: &OutputDir) -> Result<String> {
    let mut report = evaluate_point(&run.params, run.cfg)?;
    if run.options.method == Some(FidelityMethod::HaarMonteCarlo) {
        let n = run.options.samples.unwrap_or(1000);
        let est = avg_fidelity_haar(&run.params, n, run.seed, run.cfg)?;
        report.method = FidelityMethod::HaarMonteCarlo;
        report.avg_fidelity = est.mean;
        report.infidelity = 1.0 - est.mean;
        report.std_error = Some(est.std_error);
    }
    let on = extract_channel(&run.params, Regime::On, report.t_gate, run.cfg)?;
    out.write_with("choi_on.csv", |b| Ok(export::choi_csv(b, &on)?))?;
    out.write_json("fidelity.json", &report)?;
    let se = report.std_error.map(|s| format!(" +- {s:.2e}")).unwrap_or_default();
    Ok(format!(
        "fidelity: I_on={:.6e}{se} R_off={:.4} T_gate={:.6e} off_leakage={:.3e}",
        report.infidelity, report.off_ratio, report.t_gate, report.off_leakage
    ))
}

fn scan(run: &RunConfig, out: &OutputDir, effort: Effort) -> Result<String> {
    let varied = run.options.parameter.unwrap_or(Param::JM1);
    if !SCANNABLE.contains(&varied) {
        bail!("options.parameter: `{varied}` cannot be scanned");
    }
    let grid = match (&run.options.grid, run.options.range) {
        (Some(g), _) => g.clone(),
        (None, Some(r)) => r.values(),
        (None, None) => crate::reproduce::scan_grid(varied, effort.points(25, 15)),
    };
    let spec = ScanSpec {
        varied,
        grid,
        fixed: run.params,
        bracket: run.options.bracket,
    };
    let rows = run_scan(&spec, run.cfg)?;
    out.write_with("scan.csv", |b| Ok(export::scan_csv(b, &rows)?))?;
    let ok = rows.iter().filter(|r| r.is_ok()).count();
    let best = rows
        .iter()
        .filter(|r| r.is_ok())
        .min_by(|a, b| a.infidelity_on.total_cmp(&b.infidelity_on));
    Ok(match best {
        Some(b) => format!(
            "scan over {varied}: {ok}/{} points ok, min I_on={:.6e} at {} (R_off={:.4})",
            rows.len(),
            b.infidelity_on,
            b.value,
            b.off_ratio
        ),
        None => format!("scan over {varied}: 0/{} points ok", rows.len()),
    })
}

fn optimize(run: &RunConfig, out: &OutputDir, effort: Effort) -> Result<String> {
    let free = run.options.free.clone().unwrap_or(OPTIMIZABLE.to_vec());
    let budget = run.options.budget.unwrap_or(effort.points(1500, 150));
    let r = optimize_joint(&run.params, &free, budget, run.seed, &effort.settings(run))?;
    out.write_json("opt_result.json", &r)?;
    Ok(format!(
        "optimize: I_on={:.6e} R_off={:.4} T_gate={:.6e} after {} evaluations (converged: {})",
        r.best_infidelity, r.off_ratio, r.t_gate, r.evaluations, r.converged
    ))
}

fn sweep(run: &RunConfig, out: &OutputDir, effort: Effort) -> Result<String> {
    let grid = run.grid_or(GridRange {
        lo: 1.5e-5,
        hi: 1.5e-4,
        n: effort.points(7, 5),
        log: true,
    });
    let budget = run.options.budget.unwrap_or(effort.points(600, 150));
    let rows = gate_time_sweep(
        &run.params,
        &grid,
        run.params.omega_d_off,
        budget,
        run.seed,
        &effort.settings(run),
    )?;
    out.write_with("gate_time_sweep.csv", |b| Ok(export::sweep_csv(b, &rows)?))?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    Ok(format!("gate-time-sweep: {ok}/{} points ok", rows.len()))
}
