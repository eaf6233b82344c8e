//! Data grids behind the readout-error figures.
//!
//! | id | rows | columns |
//! |----|------|---------|
//! | 4  | q, A_w (log) | error rate for n = 2..6 |
//! | 5  | q, n = 1..10 | error rate for each A_w |
//! | 6  | q, n = 1..10 | loss rate, error rate for each A_w and A_w → ∞ |
//! | 7  | q, n = 1..10 | Fisher factor f(n) for each A_w |
//! | 8  | q, n = 4..10, k ≤ min(3, n/2) | f(n,k) at A_w = 30 |
//! | 9  | q, n = 4..10, k ≤ min(3, n/2) | γ(n,k) at A_w = 30 |
//! | 10 | q, n = 1..10 | γ(n) for each A_w |

use rayon::prelude::*;
use weakmeas::qubitsim::branch_etas;
use weakmeas::readout::{
    correction_factor, error_rate_plateau, error_rate_with_vote, fisher_factor, loss_rate,
};
use weakmeas::{MajorityVoteRule, ReadoutErrorModel, C64};

use crate::config::{ExperimentConfig, Sweep};
use crate::emit::{format_number, Table};
use crate::error::CliError;
use crate::params::Params;
use crate::run::bloch_xy;

pub const FIGURE_IDS: &[u32] = &[4, 5, 6, 7, 8, 9, 10];

const DEFAULT_Q: &[f64] = &[0.05, 0.01];
const DEFAULT_PHI: f64 = 0.01;
const DEFAULT_AW: &[f64] = &[20.0, 50.0, 100.0, 150.0];
const VOTE_AW: f64 = 30.0;

struct FigureParams {
    q: Vec<f64>,
    phi: f64,
    aw_im: f64,
    x_mean: f64,
    aw: Option<Vec<f64>>,
    n: Option<Vec<usize>>,
    sweep: Option<Sweep>,
}

impl FigureParams {
    fn aw_or(&self, default: &[f64]) -> Vec<f64> {
        self.aw.clone().unwrap_or_else(|| default.to_vec())
    }

    fn n_or(&self, default: std::ops::RangeInclusive<usize>) -> Vec<usize> {
        self.n.clone().unwrap_or_else(|| default.collect())
    }

    fn weak(&self, re: f64) -> C64 {
        C64::new(re, self.aw_im)
    }
}

fn aw_label(prefix: &str, aw: f64) -> String {
    format!("{prefix}_aw{}", format_number(aw))
}

fn ctx(id: u32, what: String) -> impl Fn(weakmeas::Error) -> CliError {
    move |e| CliError::numeric(format!("figure {id}: {what}"), e)
}

/// Error rate at coupling `phi` from the exact branch weights.
fn error_at(
    n: usize,
    aw: C64,
    fp: &FigureParams,
    model: &ReadoutErrorModel,
) -> weakmeas::Result<f64> {
    let (e0, e1) = branch_etas(n, fp.phi, aw, fp.x_mean);
    let p0 = e0 / (e0 + e1);
    error_rate_with_vote(n, p0, 1.0 - p0, model, None)
}

fn gamma_at(
    n: usize,
    aw: C64,
    fp: &FigureParams,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> weakmeas::Result<f64> {
    let (e0, e1) = branch_etas(n, fp.phi, aw, fp.x_mean);
    correction_factor(n, e0, e1, model, vote)
}

pub fn figure_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let p = Params(&cfg.params);
    let id = p
        .u64("id")?
        .ok_or_else(|| CliError::config("id", "required by mode figure"))? as u32;
    if !FIGURE_IDS.contains(&id) {
        return Err(CliError::config(
            "id",
            format!("unknown figure {id}; expected 4 to 10"),
        ));
    }
    let fp = FigureParams {
        q: p.list_f64("q")?.unwrap_or_else(|| DEFAULT_Q.to_vec()),
        phi: p.f64("phi")?.unwrap_or(DEFAULT_PHI),
        aw_im: p.f64("aw_im")?.unwrap_or(0.0),
        x_mean: p.state("pointer")?.map_or(0.0, |s| bloch_xy(&s).0),
        aw: p.list_f64("aw_re")?,
        n: p.list_usize("n")?,
        sweep: cfg.sweep.clone(),
    };
    if fp.sweep.is_some() && id != 4 {
        return Err(CliError::config(
            "sweep",
            "only figure 4 has a swept A_w axis",
        ));
    }
    let models =
        fp.q.iter()
            .map(|&q| {
                ReadoutErrorModel::symmetric(q).map_err(|e| CliError::numeric(format!("q={q}"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;

    // (q index, x value, optional k) rows evaluated in parallel.
    let (columns, rows): (Vec<String>, Vec<Vec<f64>>) = match id {
        4 => {
            let ns = fp.n_or(2..=6);
            let aws = match &fp.sweep {
                Some(s) => s.values(),
                None => fp.aw.clone().unwrap_or_else(|| {
                    Sweep::parse("aw_re:1:10000:49:log")
                        .expect("valid")
                        .values()
                }),
            };
            let mut cols = vec!["q".into(), "aw_re".into()];
            cols.extend(ns.iter().map(|n| format!("error_n{n}")));
            let pts: Vec<(usize, f64)> = (0..models.len())
                .flat_map(|i| aws.iter().map(move |&a| (i, a)))
                .collect();
            let rows = pts
                .par_iter()
                .map(|&(i, a)| {
                    let mut row = vec![fp.q[i], a];
                    for &n in &ns {
                        row.push(
                            error_at(n, fp.weak(a), &fp, &models[i])
                                .map_err(ctx(id, format!("n={n} aw={a}")))?,
                        );
                    }
                    Ok(row)
                })
                .collect::<Result<_, CliError>>()?;
            (cols, rows)
        }
        5 | 6 | 7 | 10 => {
            let ns = fp.n_or(1..=10);
            let aws = fp.aw_or(DEFAULT_AW);
            let prefix = match id {
                5 | 6 => "error",
                7 => "f",
                _ => "gamma",
            };
            let mut cols = vec!["q".into(), "n".into()];
            if id == 6 {
                cols.push("loss_rate".into());
            }
            cols.extend(aws.iter().map(|&a| aw_label(prefix, a)));
            if id == 6 {
                cols.push(format!("{prefix}_awinf"));
            }
            let pts: Vec<(usize, usize)> = (0..models.len())
                .flat_map(|i| ns.iter().map(move |&n| (i, n)))
                .collect();
            let rows = pts
                .par_iter()
                .map(|&(i, n)| {
                    let m = &models[i];
                    let err = ctx(id, format!("q={} n={n}", fp.q[i]));
                    let mut row = vec![fp.q[i], n as f64];
                    if id == 6 {
                        row.push(loss_rate(n, m, None).map_err(&err)?);
                    }
                    for &a in &aws {
                        let w = fp.weak(a);
                        let v = match id {
                            5 | 6 => error_at(n, w, &fp, m),
                            7 => fisher_factor(n, w, m, None),
                            _ => gamma_at(n, w, &fp, m, None),
                        };
                        row.push(v.map_err(&err)?);
                    }
                    if id == 6 {
                        row.push(error_rate_plateau(n, fp.phi, m).unwrap_or(f64::NAN));
                    }
                    Ok(row)
                })
                .collect::<Result<_, CliError>>()?;
            (cols, rows)
        }
        _ => {
            let ns = fp.n_or(4..=10);
            let aws = fp.aw_or(&[VOTE_AW]);
            let name = if id == 8 { "fisher_factor" } else { "gamma" };
            let cols = ["q", "aw_re", "n", "k", name].map(String::from).to_vec();
            let mut pts = Vec::new();
            for i in 0..models.len() {
                for &a in &aws {
                    for &n in &ns {
                        for k in 0..=(n / 2).min(3) {
                            pts.push((i, a, n, k));
                        }
                    }
                }
            }
            let rows = pts
                .par_iter()
                .map(|&(i, a, n, k)| {
                    let err = ctx(id, format!("q={} aw={a} n={n} k={k}", fp.q[i]));
                    let vote = MajorityVoteRule::new(n, k).map_err(&err)?;
                    let w = fp.weak(a);
                    let v = if id == 8 {
                        fisher_factor(n, w, &models[i], Some(&vote))
                    } else {
                        gamma_at(n, w, &fp, &models[i], Some(&vote))
                    };
                    Ok(vec![fp.q[i], a, n as f64, k as f64, v.map_err(&err)?])
                })
                .collect::<Result<_, CliError>>()?;
            (cols, rows)
        }
    };
    let mut table = Table::new(columns);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}
