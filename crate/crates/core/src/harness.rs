//! Reproduction runs: the proposal tables, the bias/MSE convergence table,
//! the MH vs annealing comparison and the data behind each figure, all as
//! CSV with `# key=value` metadata lines.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::criteria::{
    default_design, rank_proposals, ChainSampler, CriterionParams, CriterionRegime, CriterionReport, MhSampler,
    ProposalFamily,
};
use crate::error::{Error, Result};
use crate::limit::{LimitLaw1D, Regime};
use crate::model::{soft_threshold, Problem};
use crate::rng::{derive_seed, Stream};
use crate::sampler::{mh_chain, sa_chain, sa_iterations, AnnealConfig, MhConfig};
use crate::temperature::{
    consistent_temperature, interior_constraint, temp_from_mse_interior, uniform_grid, TemperatureTarget, CURVE_POINTS,
    REPRODUCTION_TOLERANCE,
};

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A CSV document: metadata comment lines, one header row, data rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn float_column(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .map(|c| match c {
                Cell::Float(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn float_list(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Settings of the proposal tables; `None` keeps the table default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableOverrides {
    pub t: Option<f64>,
    pub temperature: Option<f64>,
    pub chain_length: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub variances: Option<Vec<f64>>,
}

pub const TABLE_VARIANCES: [f64; 3] = [1.0, 9.0, 16.0];

pub fn table_regime(table_id: u8) -> Result<CriterionRegime> {
    match table_id {
        1 => Ok(CriterionRegime::Interior),
        2 => Ok(CriterionRegime::Boundary),
        3 => Ok(CriterionRegime::Exterior),
        other => Err(Error::invalid(format!("proposal tables are 1, 2 and 3, got {other}"))),
    }
}

pub fn criterion_csv(report: &CriterionReport) -> CsvTable {
    let p = &report.params;
    let mut csv = CsvTable::new(&["proposal", "sigma2", "f1", "f2", "f1_plus_f2"]);
    csv.meta("regime", report.regime.name())
        .meta("t", p.t)
        .meta("T", p.temperature)
        .meta("N", p.chain_length)
        .meta("M", p.replicates)
        .meta("seed", p.seed)
        .meta(
            "design",
            match default_design(report.regime, p.t) {
                Some(d) => format!("{d:?}"),
                None => format!("y = t = {}", p.t),
            },
        )
        .meta("pairing", "same design draws and chain seeds for every sigma2")
        .meta("best_sigma2", report.best_sigma2);
    for r in &report.rows {
        csv.push(vec![
            format!("N(0,{})", r.sigma2).into(),
            r.sigma2.into(),
            r.f1.into(),
            r.f2.into(),
            r.total().into(),
        ]);
    }
    csv
}

/// One of the proposal tables with the given overrides.
pub fn run_table(
    table_id: u8,
    overrides: &TableOverrides,
    sampler: &dyn ChainSampler,
) -> Result<(CriterionReport, CsvTable)> {
    let regime = table_regime(table_id)?;
    let mut params = CriterionParams::table_defaults(overrides.seed.unwrap_or(0));
    if let Some(t) = overrides.t {
        params.t = t;
    }
    if let Some(temp) = overrides.temperature {
        params.temperature = temp;
    }
    if let Some(n) = overrides.chain_length {
        params.chain_length = n;
    }
    if let Some(m) = overrides.replicates {
        params.replicates = m;
    }
    let family = ProposalFamily::new(overrides.variances.clone().unwrap_or(TABLE_VARIANCES.to_vec()))?;
    let report = rank_proposals(&family, regime, &params, sampler)?;
    let mut csv = criterion_csv(&report);
    csv.meta("table", table_id);
    Ok((report, csv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table4Params {
    pub y: f64,
    pub t: f64,
    pub bias: f64,
    pub mse: f64,
    pub chain_lengths: Vec<usize>,
    pub sigma2: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for Table4Params {
    fn default() -> Self {
        Self {
            y: 0.5,
            t: 1.0,
            bias: 0.01,
            mse: 3.5e-4,
            chain_lengths: vec![2000, 5000, 8000],
            // σ² = 1 is the winner at T = 0.1; interior widths scale like T.
            sigma2: (0.0075f64 / 0.1).powi(2),
            seed: 0,
            tolerance: REPRODUCTION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table4Row {
    pub n: usize,
    pub bias_n: f64,
    pub mse_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table4Report {
    pub temperature: f64,
    pub rows: Vec<Table4Row>,
}

/// Runs one chain at `T_{b,MSE}` and reports the running averages
/// `b_N = mean(θ)` and `MSE_N = mean(θ²)` at each requested `N`.
pub fn run_table4(params: &Table4Params, sampler: &dyn ChainSampler) -> Result<(Table4Report, CsvTable)> {
    let (law, _) = LimitLaw1D::for_data(params.y, params.t)?;
    let target = TemperatureTarget {
        bias: Some(params.bias),
        mse: params.mse,
        regime: law.regime(),
    };
    let temperature = consistent_temperature(&target, params.tolerance)?;
    let n_max = *params
        .chain_lengths
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("no chain lengths given"))?;
    if params.chain_lengths.contains(&0) {
        return Err(Error::invalid("chain lengths must be positive"));
    }
    let chain = sampler.chain(
        params.y,
        params.t,
        temperature,
        params.sigma2,
        n_max,
        derive_seed(params.seed, Stream::Chain, 0),
    )?;
    let x_star = soft_threshold(params.y, params.t)?;
    let rows: Vec<Table4Row> = params
        .chain_lengths
        .iter()
        .map(|&n| {
            let head = &chain[..n];
            Table4Row {
                n,
                bias_n: head.iter().map(|v| v - x_star).sum::<f64>() / n as f64,
                mse_n: head.iter().map(|v| (v - x_star).powi(2)).sum::<f64>() / n as f64,
            }
        })
        .collect();
    let mut csv = CsvTable::new(&["N", "b_N", "MSE_N"]);
    csv.meta("table", 4)
        .meta("y", params.y)
        .meta("t", params.t)
        .meta("b", params.bias)
        .meta("MSE", params.mse)
        .meta("T", format_float(temperature))
        .meta("sigma2", params.sigma2)
        .meta("seed", params.seed)
        .meta("initial_state", 0);
    for r in &rows {
        csv.push(vec![r.n.into(), r.bias_n.into(), r.mse_n.into()]);
    }
    Ok((Table4Report { temperature, rows }, csv))
}

/// Table 4 with the default Metropolis sampler.
pub fn run_table4_mh(params: &Table4Params) -> Result<(Table4Report, CsvTable)> {
    run_table4(params, &MhSampler::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonParams {
    pub y: f64,
    pub t: f64,
    /// `None` when only the MSE is targeted.
    pub bias: Option<f64>,
    pub mse: f64,
    pub q: f64,
    pub beta0: f64,
    pub sigma2: f64,
    pub replicates: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        Self {
            y: 0.5,
            t: 1.0,
            bias: Some(0.01),
            mse: 3.5e-4,
            q: 1.001,
            beta0: 1.0,
            sigma2: 1.0,
            replicates: 1,
            seed: 0,
            tolerance: REPRODUCTION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub mh_final: f64,
    pub sa_final: f64,
    pub mh_running_mean: f64,
    pub sa_running_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub temperature: f64,
    pub n_budget: usize,
    pub x_star: f64,
    pub replicates: Vec<ReplicateOutcome>,
    /// Means across replicates.
    pub theta_mh_final: f64,
    pub theta_sa_final: f64,
    pub theta_mh_running_mean: f64,
    pub theta_sa_running_mean: f64,
    /// `(θ_MH^n, θ_SA^n, T_n)` for `n = 1..=n_budget` of the first replicate.
    pub trajectory: Vec<(f64, f64, f64)>,
}

/// Temperature meeting a bias and/or mean-square target for the scalar
/// problem `(y, t)`. At `y = 0` a zero bias target is treated as absent.
pub fn target_temperature(y: f64, t: f64, bias: Option<f64>, mse: f64, tolerance: f64) -> Result<f64> {
    let (law, _) = LimitLaw1D::for_data(y, t)?;
    let bias = match law.regime() {
        Regime::Interior { u } if u == 0.0 => bias.filter(|b| *b != 0.0),
        _ => bias,
    };
    consistent_temperature(
        &TemperatureTarget {
            bias,
            mse,
            regime: law.regime(),
        },
        tolerance,
    )
}

/// MH at fixed `T_{b,MSE}` against annealing from `T0 = 1/β0` down to it, both
/// for the annealing budget `N_{b,MSE}(SA)` and both started at 0.
pub fn run_comparison(params: &ComparisonParams) -> Result<ComparisonReport> {
    if params.replicates == 0 {
        return Err(Error::invalid("at least one replicate is needed"));
    }
    let temperature = target_temperature(params.y, params.t, params.bias, params.mse, params.tolerance)?;
    let n_budget = sa_iterations(1.0 / params.beta0, temperature, params.q)?;
    if n_budget == 0 {
        return Err(Error::invalid(
            "target temperature equals the initial temperature; nothing to run",
        ));
    }
    let problem = Problem::scalar(params.y, params.t)?;
    let x_star = soft_threshold(params.y, params.t)?;
    let runs: Vec<(ReplicateOutcome, Option<Vec<(f64, f64, f64)>>)> = (0..params.replicates)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(params.seed, Stream::Chain, i as u64);
            let mh = mh_chain(
                &problem,
                &MhConfig::new(temperature, params.sigma2, n_budget, seed).with_burn_in(0),
            )?;
            let sa = sa_chain(
                &problem,
                &AnnealConfig::new(params.beta0, params.q, params.sigma2, n_budget, seed ^ 0x5A5A_5A5A),
            )?;
            let (mh_x, sa_x) = (mh.coordinate(0), sa.coordinate(0));
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let outcome = ReplicateOutcome {
                mh_final: *mh_x.last().expect("non-empty"),
                sa_final: *sa_x.last().expect("non-empty"),
                mh_running_mean: mean(&mh_x),
                sa_running_mean: mean(&sa_x),
            };
            let traj = (i == 0).then(|| {
                let temps = sa.temperatures().expect("annealing records temperatures");
                mh_x.iter()
                    .zip(&sa_x)
                    .zip(temps)
                    .map(|((a, b), c)| (*a, *b, *c))
                    .collect()
            });
            Ok((outcome, traj))
        })
        .collect::<Result<_>>()?;
    let mut trajectory = Vec::new();
    let mut replicates = Vec::with_capacity(runs.len());
    for (o, traj) in runs {
        if let Some(tr) = traj {
            trajectory = tr;
        }
        replicates.push(o);
    }
    let avg = |f: fn(&ReplicateOutcome) -> f64| replicates.iter().map(f).sum::<f64>() / replicates.len() as f64;
    Ok(ComparisonReport {
        temperature,
        n_budget,
        x_star,
        theta_mh_final: avg(|o| o.mh_final),
        theta_sa_final: avg(|o| o.sa_final),
        theta_mh_running_mean: avg(|o| o.mh_running_mean),
        theta_sa_running_mean: avg(|o| o.sa_running_mean),
        replicates,
        trajectory,
    })
}

pub fn comparison_csv(params: &ComparisonParams, report: &ComparisonReport) -> CsvTable {
    let mut csv = CsvTable::new(&[
        "replicate",
        "final_state_mh",
        "final_state_sa",
        "running_mean_mh",
        "running_mean_sa",
    ]);
    comparison_meta(&mut csv, params, report);
    csv.meta("final_state_mh_mean", format_float(report.theta_mh_final))
        .meta("final_state_sa_mean", format_float(report.theta_sa_final))
        .meta("running_mean_mh_mean", format_float(report.theta_mh_running_mean))
        .meta("running_mean_sa_mean", format_float(report.theta_sa_running_mean));
    for (i, o) in report.replicates.iter().enumerate() {
        csv.push(vec![
            i.into(),
            o.mh_final.into(),
            o.sa_final.into(),
            o.mh_running_mean.into(),
            o.sa_running_mean.into(),
        ]);
    }
    csv
}

fn comparison_meta(csv: &mut CsvTable, params: &ComparisonParams, report: &ComparisonReport) {
    csv.meta("y", params.y)
        .meta("t", params.t)
        .meta("b", params.bias.map_or("none".to_string(), |b| b.to_string()))
        .meta("MSE", params.mse)
        .meta("q", params.q)
        .meta("beta0", params.beta0)
        .meta("T0", 1.0 / params.beta0)
        .meta("T", format_float(report.temperature))
        .meta("n_budget", report.n_budget)
        .meta("sigma2", params.sigma2)
        .meta("replicates", params.replicates)
        .meta("seed", params.seed)
        .meta("initial_state", 0)
        .meta("soft_threshold", report.x_star);
}

/// `MSE ↦ N_{b,MSE}(SA)` for `MSE` on `points` uniform values in `(0, mse_max)`,
/// with the temperature chosen from the MSE alone.
pub fn budget_curve(y: f64, t: f64, q: f64, beta0: f64, mse_max: f64, points: usize) -> Result<Vec<(f64, usize, f64)>> {
    let t0 = 1.0 / beta0;
    (1..=points)
        .map(|k| {
            let mse = mse_max * k as f64 / (points + 1) as f64;
            let temp = target_temperature(y, t, None, mse, REPRODUCTION_TOLERANCE)?;
            Ok((mse, sa_iterations(t0, temp, q)?, (t0 / temp).ln() / q.ln()))
        })
        .collect()
}

/// Parameters of the figure runs. Fields not used by a figure are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureParams {
    /// Data values of the density and budget figures.
    pub ys: Vec<f64>,
    pub t: f64,
    pub bias: f64,
    pub mse: f64,
    pub u: f64,
    pub comparison: ComparisonParams,
    pub seed: u64,
}

impl FigureParams {
    pub fn defaults(figure_id: u8) -> Self {
        let (ys, bias, mse) = match figure_id {
            1 => (vec![0.0, 0.4, 0.9], 0.001, 0.01),
            4 => (vec![0.0, 0.5], 0.001, 0.01),
            _ => (vec![0.5], 0.001, 0.01),
        };
        Self {
            ys,
            t: 1.0,
            bias,
            mse,
            u: 0.5,
            comparison: ComparisonParams::default(),
            seed: 0,
        }
    }
}

/// Data behind one figure:
///
/// 1. `x, density_y=<y>...`: limit densities of `X(y,t)` on `[-10, 30]`;
/// 2. `u, T_bias, T_mse, constraint` on the 512-point grid of `(0.001, 0.999)`;
/// 3. `mse, T_mse, u, constraint`: `MSE ∈ (0,2) ↦ T(MSE,u)` next to `u ↦ m1²/m2`;
/// 4. `mse, N_SA_y=<y>...`: annealing budgets for `MSE ∈ (0, 0.1)`;
/// 5. `step, theta_mh, theta_sa, temperature_sa`: one comparison run.
pub fn emit_figure_data(figure_id: u8, params: &FigureParams) -> Result<CsvTable> {
    match figure_id {
        1 => {
            let laws = params
                .ys
                .iter()
                .map(|&y| LimitLaw1D::for_data(y, params.t))
                .collect::<Result<Vec<_>>>()?;
            let mut header = vec!["x".to_string()];
            header.extend(params.ys.iter().map(|y| format!("density_y={y}")));
            let mut csv = CsvTable {
                header,
                ..Default::default()
            };
            csv.meta("figure", 1).meta("t", params.t);
            for x in uniform_grid(-10.0, 30.0, 801) {
                let mut row: Vec<Cell> = vec![x.into()];
                row.extend(laws.iter().map(|(law, s)| Cell::Float(law.density(s * x))));
                csv.push(row);
            }
            Ok(csv)
        }
        2 => {
            let mut csv = CsvTable::new(&["u", "T_bias", "T_mse", "constraint"]);
            csv.meta("figure", 2).meta("b", params.bias).meta("MSE", params.mse);
            for c in crate::temperature::interior_curves(params.bias, params.mse)? {
                csv.push(vec![
                    c.u.into(),
                    c.temp_from_bias.into(),
                    c.temp_from_mse.into(),
                    c.constraint.into(),
                ]);
            }
            Ok(csv)
        }
        3 => {
            let mut csv = CsvTable::new(&["mse", "T_mse", "u", "constraint"]);
            csv.meta("figure", 3).meta("u_for_T_mse", params.u);
            let us = uniform_grid(0.001, 0.999, CURVE_POINTS);
            for (k, u) in us.into_iter().enumerate() {
                let mse = 2.0 * (k + 1) as f64 / (CURVE_POINTS + 1) as f64;
                csv.push(vec![
                    mse.into(),
                    temp_from_mse_interior(mse, params.u)?.into(),
                    u.into(),
                    interior_constraint(u)?.into(),
                ]);
            }
            Ok(csv)
        }
        4 => {
            let c = &params.comparison;
            let curves = params
                .ys
                .iter()
                .map(|&y| budget_curve(y, params.t, c.q, c.beta0, 0.1, 200))
                .collect::<Result<Vec<_>>>()?;
            let mut header = vec!["mse".to_string()];
            header.extend(params.ys.iter().map(|y| format!("N_SA_y={y}")));
            let mut csv = CsvTable {
                header,
                ..Default::default()
            };
            csv.meta("figure", 4)
                .meta("t", params.t)
                .meta("q", c.q)
                .meta("beta0", c.beta0)
                .meta("ys", float_list(&params.ys))
                .meta("temperature_rule", "T chosen from the MSE target alone");
            for i in 0..curves[0].len() {
                let mut row: Vec<Cell> = vec![curves[0][i].0.into()];
                row.extend(curves.iter().map(|cv| Cell::from(cv[i].1)));
                csv.push(row);
            }
            Ok(csv)
        }
        5 => {
            let c = &params.comparison;
            let report = run_comparison(c)?;
            let mut csv = CsvTable::new(&["step", "theta_mh", "theta_sa", "temperature_sa"]);
            csv.meta("figure", 5);
            comparison_meta(&mut csv, c, &report);
            for (n, (mh, sa, temp)) in report.trajectory.iter().enumerate() {
                csv.push(vec![(n + 1).into(), (*mh).into(), (*sa).into(), (*temp).into()]);
            }
            Ok(csv)
        }
        other => Err(Error::invalid(format!("figures are 1 to 5, got {other}"))),
    }
}
