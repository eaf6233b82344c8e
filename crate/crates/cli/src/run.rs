use rayon::prelude::*;
use weakmeas::qubitsim::{
    branch_etas, branch_qfi, branch_qfi_closed_form, protocol_circuit, run_protocol,
};
use weakmeas::readout::{
    acceptance_probabilities, analytic_report, corrected_pointer_shift,
    error_rate_plateau_with_vote, error_rate_scaling, error_rate_with_vote, fisher_factor,
    loss_rate, monte_carlo_readout,
};
use weakmeas::weakvalue::{
    optimal_postselection_for_weak_value, optimal_weak_value_for_probability, weak_value,
};
use weakmeas::{MajorityVoteRule, QuantumState, ReadoutErrorModel, C64};

use crate::config::{ExperimentConfig, Mode, Sweep};
use crate::emit::{format_number, render, Table};
use crate::error::CliError;
use crate::figures::figure_table;
use crate::params::Params;

const DEFAULT_PHI: &str = "0.01";
const DEFAULT_Q: &str = "0.05";
const DEFAULT_TRIALS: &str = "100000";

/// Numeric grid axes of a mode, outermost first. The last axis varies
/// fastest.
fn axes(mode: Mode, cfg: &ExperimentConfig) -> Vec<&'static str> {
    let with_k = cfg.params.contains_key("k");
    let swept = |k: &str| cfg.sweep.as_ref().is_some_and(|s| s.name == k);
    let full: &[&str] = match mode {
        Mode::ErrorRate | Mode::Correction | Mode::Fisher | Mode::Majority => {
            &["n", "k", "q01", "q10", "phi", "aw_im", "aw_re"]
        }
        Mode::LossRate => &["n", "k", "q01", "q10"],
        Mode::Simulate => &["n", "phi", "aw_im", "aw_re"],
        Mode::Optimize if cfg.params.contains_key("p_s") || swept("p_s") => &["p_s"],
        Mode::Optimize => &["aw_im", "aw_re"],
        Mode::Figure => &[],
    };
    full.iter()
        .copied()
        .filter(|&a| a != "k" || with_k)
        .collect()
}

fn scalar_keys(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::ErrorRate | Mode::Correction | Mode::Fisher => &["q", "pointer"],
        Mode::Majority => &["q", "pointer", "trials", "seed"],
        Mode::LossRate => &["q"],
        Mode::Simulate => &["pointer"],
        Mode::Optimize => &["obs", "psi_i"],
        Mode::Figure => &["id", "q", "n", "phi", "aw_re", "aw_im", "pointer"],
    }
}

fn required(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::ErrorRate | Mode::Correction | Mode::Fisher | Mode::Majority | Mode::Simulate => {
            &["n", "aw_re"]
        }
        Mode::LossRate => &["n"],
        Mode::Optimize => &[],
        Mode::Figure => &["id"],
    }
}

/// Apply mode defaults and check that every parameter is known to the mode.
/// Idempotent.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let mut out = cfg.clone();
    let mode = cfg.mode;
    let p = &mut out.params;
    if !scalar_keys(mode).contains(&"seed") {
        p.remove("seed");
    }
    if axes(mode, cfg).contains(&"q01") {
        let q = p.remove("q").unwrap_or_else(|| DEFAULT_Q.into());
        p.entry("q01".into()).or_insert_with(|| q.clone());
        p.entry("q10".into()).or_insert(q);
    }
    let keys = axes(mode, &out);
    let p = &mut out.params;
    for key in p.keys() {
        if !keys.contains(&key.as_str()) && !scalar_keys(mode).contains(&key.as_str()) {
            return Err(CliError::config(
                key,
                format!("not used by mode {}", mode_name(mode)),
            ));
        }
    }
    let swept = |k: &str| out.sweep.as_ref().is_some_and(|s| s.name == k);
    for key in required(mode) {
        if !p.contains_key(*key) && !swept(key) {
            return Err(CliError::config(
                *key,
                format!("required by mode {}", mode_name(mode)),
            ));
        }
    }
    let defaults: &[(&str, &str)] = match mode {
        Mode::ErrorRate | Mode::Correction | Mode::Fisher | Mode::Simulate => {
            &[("phi", DEFAULT_PHI), ("aw_im", "0"), ("pointer", "zero")]
        }
        Mode::Majority => &[
            ("phi", DEFAULT_PHI),
            ("aw_im", "0"),
            ("pointer", "zero"),
            ("trials", DEFAULT_TRIALS),
            ("seed", "0"),
        ],
        Mode::Optimize => &[("aw_im", "0"), ("obs", "sz"), ("psi_i", "plus")],
        Mode::LossRate | Mode::Figure => &[],
    };
    for (k, v) in defaults {
        if keys.contains(k) || scalar_keys(mode).contains(k) {
            p.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
    }
    if mode == Mode::Optimize {
        let has = |k: &str| p.contains_key(k) || swept(k);
        match (has("aw_re"), has("p_s")) {
            (true, true) => {
                return Err(CliError::config(
                    "p_s",
                    "give either aw_re or p_s, not both",
                ))
            }
            (false, false) => return Err(CliError::config("aw_re", "optimize needs aw_re or p_s")),
            _ => {}
        }
        if has("p_s") {
            p.remove("aw_im");
        }
    }
    if let Some(s) = &out.sweep {
        if mode == Mode::Figure {
            if s.name != "aw_re" {
                return Err(CliError::config("sweep", "figures can only sweep aw_re"));
            }
        } else if !keys.contains(&s.name.as_str()) {
            return Err(CliError::config(
                "sweep",
                format!(
                    "`{}` is not a sweepable parameter of mode {}",
                    s.name,
                    mode_name(mode)
                ),
            ));
        }
        if s.name == "n" || s.name == "k" {
            return Err(CliError::config(
                "sweep",
                "integer parameters take lists, not sweeps",
            ));
        }
    }
    if out.dump_circuit && mode != Mode::Simulate {
        return Err(CliError::config(
            "dump_circuit",
            "only available in simulate mode",
        ));
    }
    Ok(out)
}

pub fn mode_name(mode: Mode) -> String {
    serde_json::to_value(mode)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// One grid point: values aligned with the axis names.
#[derive(Debug, Clone)]
pub struct Point<'a> {
    keys: &'a [&'static str],
    values: Vec<f64>,
}

impl Point<'_> {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.keys
            .iter()
            .position(|k| *k == key)
            .map(|i| self.values[i])
    }

    fn req(&self, key: &str) -> f64 {
        self.get(key)
            .unwrap_or_else(|| panic!("axis {key} missing"))
    }

    fn context(&self) -> String {
        self.keys
            .iter()
            .zip(&self.values)
            .map(|(k, v)| format!("{k}={}", format_number(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn axis_values(key: &str, params: Params, sweep: Option<&Sweep>) -> Result<Vec<f64>, CliError> {
    if let Some(s) = sweep.filter(|s| s.name == key) {
        return Ok(s.values());
    }
    let values = if key == "n" || key == "k" {
        params
            .list_usize(key)?
            .map(|v| v.into_iter().map(|x| x as f64).collect())
    } else {
        params.list_f64(key)?
    };
    values.ok_or_else(|| CliError::config(key, "missing value"))
}

/// Cartesian product of the axes, last axis fastest.
fn grid(keys: &[&'static str], cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>, CliError> {
    let params = Params(&cfg.params);
    let mut rows = vec![Vec::new()];
    for key in keys {
        let vals = axis_values(key, params, cfg.sweep.as_ref())?;
        rows = rows
            .into_iter()
            .flat_map(|r| {
                vals.iter().map(move |&v| {
                    let mut r = r.clone();
                    r.push(v);
                    r
                })
            })
            .collect();
    }
    Ok(rows)
}

#[derive(Debug)]
pub enum Output {
    Table(Table),
    Circuit(String),
}

/// Evaluate a config. Rows come out in grid order whatever the thread count.
pub fn run(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let cfg = resolve(cfg)?;
    if cfg.mode == Mode::Figure {
        return figure_table(&cfg).map(Output::Table);
    }
    let keys = axes(cfg.mode, &cfg);
    let points = grid(&keys, &cfg)?;
    let params = Params(&cfg.params);
    let scalars = Scalars::read(params)?;

    if cfg.dump_circuit {
        if points.len() != 1 {
            return Err(CliError::config(
                "dump_circuit",
                "needs a single parameter point",
            ));
        }
        let pt = Point {
            keys: &keys,
            values: points[0].clone(),
        };
        let circuit = protocol_circuit(pt.req("n") as usize, pt.req("phi"), aw(&pt))
            .map_err(|e| CliError::numeric(pt.context(), e))?;
        return Ok(Output::Circuit(circuit.to_string()));
    }

    let names = output_columns(cfg.mode);
    let rows: Vec<Vec<f64>> = points
        .into_par_iter()
        .map(|values| {
            let pt = Point {
                keys: &keys,
                values,
            };
            let out = evaluate(cfg.mode, &pt, &scalars)
                .map_err(|e| CliError::numeric(pt.context(), e))?;
            let mut row = pt.values;
            row.extend(out);
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    let mut table = Table::new(keys.iter().chain(names).map(|s| s.to_string()).collect());
    for r in rows {
        table.push(r);
    }
    Ok(Output::Table(table))
}

/// Run and render with the config echo header.
pub fn run_to_string(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let resolved = resolve(cfg)?;
    match run(&resolved)? {
        Output::Table(t) => render(&t, resolved.format, Some(&resolved)),
        Output::Circuit(text) => Ok(format!(
            "# weakmeas simulate\n# config {}\n{text}",
            resolved.echo()
        )),
    }
}

struct Scalars {
    pointer: Option<QuantumState>,
    trials: Option<u64>,
    seed: Option<u64>,
    obs: Option<weakmeas::HermitianObservable>,
    psi_i: Option<QuantumState>,
}

impl Scalars {
    fn read(p: Params) -> Result<Self, CliError> {
        Ok(Self {
            pointer: p.state("pointer")?,
            trials: p.u64("trials")?,
            seed: p.u64("seed")?,
            obs: p.observable("obs")?,
            psi_i: p.state("psi_i")?,
        })
    }

    fn pointer(&self) -> QuantumState {
        self.pointer.clone().unwrap_or_else(QuantumState::zero)
    }
}

fn output_columns(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::ErrorRate => &[
            "p0",
            "error_rate",
            "error_rate_weak",
            "superexp_approx",
            "plateau",
        ],
        Mode::LossRate => &["loss_rate", "accept_zeros", "accept_ones"],
        Mode::Correction => &[
            "error_rate",
            "loss_rate",
            "gamma",
            "fisher_factor",
            "plateau",
            "shift",
        ],
        Mode::Fisher => &[
            "fisher_factor",
            "loss_rate",
            "branch_qfi",
            "qfi_closed_form",
            "heisenberg_limit",
            "out_of_regime",
        ],
        Mode::Majority => &[
            "error_rate",
            "error_rate_mc",
            "error_rate_se",
            "loss_rate",
            "loss_rate_mc",
            "loss_rate_se",
            "gamma",
            "gamma_mc",
            "gamma_se",
        ],
        Mode::Optimize => &[
            "p_success",
            "aw_max",
            "weak_value_re",
            "weak_value_im",
            "psi_f_0_re",
            "psi_f_0_im",
            "psi_f_1_re",
            "psi_f_1_im",
        ],
        Mode::Simulate => &[
            "p0",
            "p1",
            "eta0",
            "eta1",
            "x_shift",
            "y_shift",
            "branch_qfi",
        ],
        Mode::Figure => &[],
    }
}

fn aw(pt: &Point) -> C64 {
    C64::new(pt.req("aw_re"), pt.get("aw_im").unwrap_or(0.0))
}

fn model(pt: &Point) -> weakmeas::Result<ReadoutErrorModel> {
    ReadoutErrorModel::new(pt.req("q01"), pt.req("q10"))
}

fn vote(pt: &Point) -> weakmeas::Result<Option<MajorityVoteRule>> {
    pt.get("k")
        .map(|k| MajorityVoteRule::new(pt.req("n") as usize, k as usize))
        .transpose()
}

/// `(⟨σx⟩, ⟨σy⟩)` of a qubit state.
pub fn bloch_xy(s: &QuantumState) -> (f64, f64) {
    let a = s.amplitudes();
    let c = a[0].conj() * a[1];
    (2.0 * c.re, 2.0 * c.im)
}

fn evaluate(mode: Mode, pt: &Point, sc: &Scalars) -> weakmeas::Result<Vec<f64>> {
    let n = pt.get("n").map(|v| v as usize).unwrap_or(0);
    match mode {
        Mode::ErrorRate => {
            let (aw, model, vote) = (aw(pt), model(pt)?, vote(pt)?);
            let phi = pt.req("phi");
            let (e0, e1) = branch_etas(n, phi, aw, bloch_xy(&sc.pointer()).0);
            let p0 = e0 / (e0 + e1);
            let scaling = error_rate_scaling(n, aw, &model)?;
            let n2 = (n * n) as f64;
            let p0w = n2 / (n2 + aw.norm_sqr());
            let superexp = if vote.is_none_or(|v| v.k == 0) {
                scaling.superexp_approx
            } else {
                f64::NAN
            };
            Ok(vec![
                p0,
                error_rate_with_vote(n, p0, 1.0 - p0, &model, vote.as_ref())?,
                error_rate_with_vote(n, p0w, 1.0 - p0w, &model, vote.as_ref())?,
                superexp,
                error_rate_plateau_with_vote(n, phi, &model, vote.as_ref()).unwrap_or(f64::NAN),
            ])
        }
        Mode::LossRate => {
            let (model, vote) = (model(pt)?, vote(pt)?);
            let (s0, s1) = acceptance_probabilities(n, &model, vote.as_ref())?;
            Ok(vec![loss_rate(n, &model, vote.as_ref())?, s0, s1])
        }
        Mode::Correction => {
            let (aw, model, vote) = (aw(pt), model(pt)?, vote(pt)?);
            let phi = pt.req("phi");
            let d = sc.pointer();
            let r = analytic_report(n, phi, aw, &d, &model, vote.as_ref())?;
            let shift = corrected_pointer_shift(n, phi, aw, &d, &model, vote.as_ref())?;
            Ok(vec![
                r.error_rate,
                r.loss_rate,
                r.gamma,
                r.fisher_factor,
                r.plateau,
                shift,
            ])
        }
        Mode::Fisher => {
            let (aw, model, vote) = (aw(pt), model(pt)?, vote(pt)?);
            let phi = pt.req("phi");
            let q = branch_qfi(n, phi, aw, &sc.pointer())?;
            Ok(vec![
                fisher_factor(n, aw, &model, vote.as_ref())?,
                loss_rate(n, &model, vote.as_ref())?,
                q.information,
                branch_qfi_closed_form(n, phi, aw),
                4.0 * (n * n) as f64,
                if q.out_of_regime { 1.0 } else { 0.0 },
            ])
        }
        Mode::Majority => {
            let (aw, model, vote) = (aw(pt), model(pt)?, vote(pt)?);
            let phi = pt.req("phi");
            let d = sc.pointer();
            let want = analytic_report(n, phi, aw, &d, &model, vote.as_ref())?;
            let trials = sc.trials.unwrap_or(100_000);
            let mc = monte_carlo_readout(
                n,
                phi,
                aw,
                &d,
                &model,
                vote.as_ref(),
                trials,
                sc.seed.unwrap_or(0),
            )?;
            let (se_e, se_l, se_g) = mc.standard_errors(want.error_rate, want.loss_rate);
            Ok(vec![
                want.error_rate,
                mc.report.error_rate,
                se_e,
                want.loss_rate,
                mc.report.loss_rate,
                se_l,
                want.gamma,
                mc.report.gamma,
                se_g,
            ])
        }
        Mode::Optimize => {
            let psi_i = sc.psi_i.clone().unwrap_or_else(QuantumState::plus);
            let a = sc
                .obs
                .clone()
                .unwrap_or_else(weakmeas::HermitianObservable::sigma_z);
            let (psi_f, p, aw_max) = match pt.get("p_s") {
                Some(p_s) => {
                    let r = optimal_weak_value_for_probability(&psi_i, &a, p_s)?;
                    let p = r.psi_f.fidelity(&psi_i)?;
                    (r.psi_f, p, r.aw_max)
                }
                None => {
                    let r = optimal_postselection_for_weak_value(&psi_i, &a, aw(pt))?;
                    (r.psi_f, r.p_max, f64::NAN)
                }
            };
            let wv = weak_value(&psi_i, &psi_f, &a)?;
            let f = psi_f.amplitudes();
            Ok(vec![
                p,
                aw_max,
                wv.re(),
                wv.im(),
                f[0].re,
                f[0].im,
                f[1].re,
                f[1].im,
            ])
        }
        Mode::Simulate => {
            let (aw, phi) = (aw(pt), pt.req("phi"));
            let d = sc.pointer();
            let (b0, b1) = run_protocol(n, phi, aw, &d)?;
            let (x0, y0) = bloch_xy(&d);
            let (x, y) = bloch_xy(&b0.pointer_state);
            let q = branch_qfi(n, phi, aw, &d)?;
            Ok(vec![
                b0.probability,
                b1.probability,
                b0.eta0,
                b0.eta1,
                x - x0,
                y - y0,
                q.information,
            ])
        }
        Mode::Figure => unreachable!("figures are handled separately"),
    }
}
