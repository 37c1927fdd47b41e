use std::path::{Path, PathBuf};
use std::str::FromStr;

use bpdn_core::criteria::{rank_proposals, CriterionParams, CriterionRegime, MhSampler, ProposalFamily};
use bpdn_core::harness::{
    comparison_csv, criterion_csv, emit_figure_data, format_float, run_comparison, run_table, run_table4,
    target_temperature, ComparisonParams, CsvTable, FigureParams, Table4Params, TableOverrides, TABLE_VARIANCES,
};
use bpdn_core::rng::{derive_seed, Stream};
use bpdn_core::scaling::{
    boundary_sign_sweep, limit_chi_square, limit_density_nd, verify_scaling_1d, ChiSquareOptions, ThinningOptions,
};
use bpdn_core::temperature::{interior_curves, REPRODUCTION_TOLERANCE, STRICT_TOLERANCE};
use bpdn_core::{
    mh_chain, sa_chain, sa_iterations, solve, AnnealConfig, ChainResult, MhConfig, Problem, Proposal, ProposalKind,
    SolverOptions,
};

use crate::config::{Config, List};
use crate::{Cli, CliError, Command, CompareArgs, ProblemArgs, TargetArgs, VerifyKind};

/// Relative tolerance of a bias/MSE consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance(pub f64);

impl FromStr for Tolerance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(Tolerance(STRICT_TOLERANCE)),
            "reproduction" => Ok(Tolerance(REPRODUCTION_TOLERANCE)),
            other => match other.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(Tolerance(v)),
                _ => Err(format!(
                    "expected strict, reproduction or a non-negative number, got {other:?}"
                )),
            },
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

struct Ctx {
    cfg: Config,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn emit(&self, csv: &CsvTable) -> Result<(), CliError> {
        match &self.out {
            Some(path) => csv.write(path)?,
            None => print!("{}", csv.render()),
        }
        Ok(())
    }

    fn tolerance(&self, flag: Option<Tolerance>) -> Result<f64, CliError> {
        Ok(self
            .cfg
            .pick_or(flag, "tolerance", Tolerance(REPRODUCTION_TOLERANCE))?
            .0)
    }

    fn problem(&self, args: &ProblemArgs) -> Result<Problem, CliError> {
        if args.problem.is_some() && (args.y.is_some() || args.t.is_some()) {
            return usage("give either --problem or --y/--t, not both");
        }
        if let Some(path) = &args.problem {
            return Ok(Problem::load(path)?);
        }
        if args.y.is_none() && args.t.is_none() {
            if let Some(path) = self.cfg.pick(None::<PathBuf>, "problem")? {
                return Ok(Problem::load(path)?);
            }
        }
        let (y, t) = self.scalar(args.y, args.t)?;
        Ok(Problem::scalar(y, t)?)
    }

    fn scalar(&self, y: Option<f64>, t: Option<f64>) -> Result<(f64, f64), CliError> {
        match (self.cfg.pick(y, "y")?, self.cfg.pick(t, "t")?) {
            (Some(y), Some(t)) => Ok((y, t)),
            _ => usage("a problem is needed: --problem FILE, or --y and --t"),
        }
    }

    /// Exactly one of `--temperature` or `--mse` (with optional `--bias`).
    fn temperature(&self, target: &TargetArgs, scalar: Option<(f64, f64)>) -> Result<f64, CliError> {
        let temp = self.cfg.pick(target.temperature, "temperature")?;
        let bias = self.cfg.pick(target.bias, "bias")?;
        let mse = self.cfg.pick(target.mse, "mse")?;
        match (temp, bias, mse) {
            (Some(temp), None, None) => Ok(temp),
            (Some(_), _, _) => usage("give either --temperature or --bias/--mse, not both"),
            (None, _, Some(mse)) => {
                let Some((y, t)) = scalar else {
                    return usage("--bias/--mse targets need the scalar problem --y/--t");
                };
                Ok(target_temperature(y, t, bias, mse, self.tolerance(target.tolerance)?)?)
            }
            (None, Some(_), None) => usage("--bias needs --mse"),
            (None, None, None) => usage("a temperature is needed: --temperature, or --mse (and --bias)"),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cfg.pick_or(cli.seed, "seed", 0u64)?;
    let out: Option<PathBuf> = cfg.pick(cli.out.clone(), "out")?;
    if let Some(path) = &out {
        check_writable(path)?;
    }
    if let Some(threads) = cfg.pick(cli.threads, "threads")? {
        if threads == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let ctx = Ctx { cfg, seed, out };
    match cli.command {
        Command::Solve { problem } => cmd_solve(&ctx, &problem),
        Command::Sample {
            problem,
            target,
            sigma2,
            n,
            burn_in,
            thinning,
            proposal,
        } => cmd_sample(&ctx, &problem, &target, sigma2, n, burn_in, thinning, proposal),
        Command::Anneal {
            problem,
            beta0,
            q,
            sigma2,
            n,
            temperature,
        } => cmd_anneal(&ctx, &problem, beta0, q, sigma2, n, temperature),
        Command::Criteria {
            regime,
            t,
            temperature,
            n,
            m,
            sigma2,
            burn_in,
            proposal,
        } => {
            let regime: CriterionRegime = ctx
                .cfg
                .pick(regime, "regime")?
                .ok_or_else(|| CliError::Usage("--regime is required".into()))?;
            let defaults = CriterionParams::table_defaults(ctx.seed);
            let params = CriterionParams {
                t: ctx.cfg.pick_or(t, "t", defaults.t)?,
                temperature: ctx.cfg.pick_or(temperature, "temperature", defaults.temperature)?,
                chain_length: ctx.cfg.pick_or(n, "n", defaults.chain_length)?,
                replicates: ctx.cfg.pick_or(m, "m", defaults.replicates)?,
                seed: ctx.seed,
            };
            let variances = ctx.cfg.pick_or(sigma2, "sigma2", List(TABLE_VARIANCES.to_vec()))?.0;
            let sampler = MhSampler {
                burn_in: ctx.cfg.pick_or(burn_in, "burn_in", 0)?,
                kind: ctx.cfg.pick_or(proposal, "proposal", ProposalKind::RandomWalk)?,
            };
            let report = rank_proposals(&ProposalFamily::new(variances)?, regime, &params, &sampler)?;
            eprintln!("best proposal variance: {}", report.best_sigma2);
            ctx.emit(&criterion_csv(&report))
        }
        Command::Temperature {
            y,
            t,
            bias,
            mse,
            tolerance,
            emit_curves,
        } => cmd_temperature(&ctx, y, t, bias, mse, tolerance, emit_curves),
        Command::Verify {
            kind,
            problem,
            temperatures,
            temperature,
            n,
            bins,
        } => cmd_verify(&ctx, kind, &problem, temperatures, temperature, n, bins),
        Command::Table {
            id,
            y,
            t,
            temperature,
            bias,
            mse,
            n,
            m,
            sigma2,
            lengths,
            tolerance,
            proposal,
        } => {
            let sampler = MhSampler {
                burn_in: 0,
                kind: ctx.cfg.pick_or(proposal, "proposal", ProposalKind::RandomWalk)?,
            };
            let sigma2 = ctx.cfg.pick(sigma2, "sigma2")?.map(|l| l.0);
            if id == 4 {
                let defaults = Table4Params::default();
                let sigma2 = match sigma2.as_deref() {
                    None => defaults.sigma2,
                    Some([s]) => *s,
                    Some(_) => return usage("table 4 takes a single --sigma2"),
                };
                let params = Table4Params {
                    y: ctx.cfg.pick_or(y, "y", defaults.y)?,
                    t: ctx.cfg.pick_or(t, "t", defaults.t)?,
                    bias: ctx.cfg.pick_or(bias, "bias", defaults.bias)?,
                    mse: ctx.cfg.pick_or(mse, "mse", defaults.mse)?,
                    chain_lengths: ctx.cfg.pick_or(lengths, "lengths", List(defaults.chain_lengths))?.0,
                    sigma2,
                    seed: ctx.seed,
                    tolerance: ctx.tolerance(tolerance)?,
                };
                let (report, csv) = run_table4(&params, &sampler)?;
                eprintln!("temperature: {}", format_float(report.temperature));
                return ctx.emit(&csv);
            }
            let overrides = TableOverrides {
                t: ctx.cfg.pick(t, "t")?,
                temperature: ctx.cfg.pick(temperature, "temperature")?,
                chain_length: ctx.cfg.pick(n, "n")?,
                replicates: ctx.cfg.pick(m, "m")?,
                seed: Some(ctx.seed),
                variances: sigma2,
            };
            let (report, csv) = run_table(id, &overrides, &sampler)?;
            eprintln!("best proposal variance: {}", report.best_sigma2);
            ctx.emit(&csv)
        }
        Command::Compare { compare } => {
            let params = comparison_params(&ctx, &compare)?;
            let report = run_comparison(&params)?;
            eprintln!(
                "budget N = {}, mean final state: MH {}, SA {}",
                report.n_budget,
                format_float(report.theta_mh_final),
                format_float(report.theta_sa_final)
            );
            ctx.emit(&comparison_csv(&params, &report))
        }
        Command::Figure { id, ys, u, compare } => {
            let defaults = FigureParams::defaults(id);
            let comparison = comparison_params(&ctx, &compare)?;
            let params = FigureParams {
                ys: ctx.cfg.pick_or(ys, "ys", List(defaults.ys))?.0,
                t: comparison.t,
                bias: ctx.cfg.pick_or(compare.bias, "bias", defaults.bias)?,
                mse: ctx.cfg.pick_or(compare.mse, "mse", defaults.mse)?,
                u: ctx.cfg.pick_or(u, "u", defaults.u)?,
                comparison,
                seed: ctx.seed,
            };
            ctx.emit(&emit_figure_data(id, &params)?)
        }
        Command::LimitDensity { problem, fast, slow } => {
            let problem = ctx.problem(&problem)?;
            let solution = solve(&problem, &SolverOptions::default())?;
            let fast = ctx.cfg.pick(fast, "fast")?.map(|l| l.0).unwrap_or_default();
            let slow = ctx.cfg.pick(slow, "slow")?.map(|l| l.0).unwrap_or_default();
            let density = limit_density_nd(&problem, &solution, &fast, &slow)?;
            let mut csv = CsvTable::new(&["density"]);
            csv.meta("fast", list_text(&fast)).meta("slow", list_text(&slow));
            csv.push(vec![density.into()]);
            ctx.emit(&csv)
        }
    }
}

fn check_writable(path: &Path) -> Result<(), CliError> {
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(|_| ())
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn list_text(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn scalar_of(problem: &Problem) -> Option<(f64, f64)> {
    (problem.n() == 1 && problem.p() == 1 && problem.matrix_a()[(0, 0)] == 1.0)
        .then(|| (problem.data_y()[0], problem.smoothing_t()))
}

fn chain_csv(chain: &ChainResult, with_temperature: bool) -> CsvTable {
    let mut header = vec!["step".to_string()];
    if with_temperature {
        header.push("temperature".into());
    }
    header.extend((0..chain.dim()).map(|i| format!("x_{i}")));
    let mut csv = CsvTable {
        header,
        ..Default::default()
    };
    let temps = chain.temperatures();
    for (k, state) in chain.states().enumerate() {
        let mut row = vec![(k + 1).into()];
        if let Some(ts) = temps.filter(|_| with_temperature) {
            row.push(ts[k].into());
        }
        row.extend(state.iter().map(|&v| v.into()));
        csv.push(row);
    }
    csv
}

fn cmd_solve(ctx: &Ctx, args: &ProblemArgs) -> Result<(), CliError> {
    let problem = ctx.problem(args)?;
    let sol = solve(&problem, &SolverOptions::default())?;
    let mut csv = CsvTable::new(&["index", "x_star", "xi", "class"]);
    csv.meta("m", format_float(sol.m))
        .meta("certified_unique", if sol.unique { "yes" } else { "no" })
        .meta("iterations", sol.iterations);
    for i in 0..sol.p() {
        let class = if sol.support_s().contains(&i) {
            "S"
        } else if sol.boundary_set().contains(&i) {
            "dI0"
        } else {
            "I0"
        };
        csv.push(vec![i.into(), sol.x_star[i].into(), sol.xi[i].into(), class.into()]);
    }
    eprintln!("m = {}", format_float(sol.m));
    eprintln!("certified unique: {}", if sol.unique { "yes" } else { "no" });
    ctx.emit(&csv)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    ctx: &Ctx,
    args: &ProblemArgs,
    target: &TargetArgs,
    sigma2: Option<f64>,
    n: Option<usize>,
    burn_in: Option<usize>,
    thinning: Option<usize>,
    proposal: Option<ProposalKind>,
) -> Result<(), CliError> {
    let problem = ctx.problem(args)?;
    let temperature = ctx.temperature(target, scalar_of(&problem))?;
    let sigma2 = ctx.cfg.pick_or(sigma2, "sigma2", 1.0)?;
    let n = ctx.cfg.pick_or(n, "n", 5000)?;
    let thinning = ctx.cfg.pick_or(thinning, "thinning", 1)?;
    let burn_in = ctx.cfg.pick_or(burn_in, "burn_in", n * thinning / 10)?;
    let kind = ctx.cfg.pick_or(proposal, "proposal", ProposalKind::RandomWalk)?;
    let cfg = MhConfig::new(
        temperature,
        sigma2,
        burn_in + n * thinning,
        derive_seed(ctx.seed, Stream::Chain, 0),
    )
    .with_burn_in(burn_in)
    .with_thinning(thinning)
    .with_proposal(Proposal {
        kind,
        sigma2,
        coordinate_scales: None,
    });
    let chain = mh_chain(&problem, &cfg)?;
    let mut csv = chain_csv(&chain, false);
    csv.meta("temperature", format_float(temperature))
        .meta("sigma2", sigma2)
        .meta("burn_in", burn_in)
        .meta("thinning", thinning)
        .meta("seed", ctx.seed)
        .meta("acceptance_rate", format_float(chain.acceptance_rate()));
    ctx.emit(&csv)
}

fn cmd_anneal(
    ctx: &Ctx,
    args: &ProblemArgs,
    beta0: Option<f64>,
    q: Option<f64>,
    sigma2: Option<f64>,
    n: Option<usize>,
    temperature: Option<f64>,
) -> Result<(), CliError> {
    let problem = ctx.problem(args)?;
    let beta0 = ctx.cfg.pick_or(beta0, "beta0", 1.0)?;
    let q = ctx.cfg.pick_or(q, "q", 1.001)?;
    let sigma2 = ctx.cfg.pick_or(sigma2, "sigma2", 1.0)?;
    let n = match (ctx.cfg.pick(n, "n")?, ctx.cfg.pick(temperature, "temperature")?) {
        (Some(_), Some(_)) => return usage("give either --n or --temperature, not both"),
        (Some(n), None) => n,
        (None, Some(target)) => sa_iterations(1.0 / beta0, target, q)?,
        (None, None) => return usage("anneal needs --n or a target --temperature"),
    };
    if n == 0 {
        return usage("nothing to run: zero annealing steps");
    }
    let cfg = AnnealConfig::new(beta0, q, sigma2, n, derive_seed(ctx.seed, Stream::Chain, 0));
    let chain = sa_chain(&problem, &cfg)?;
    let mut csv = chain_csv(&chain, true);
    csv.meta("beta0", beta0)
        .meta("q", q)
        .meta("sigma2", sigma2)
        .meta("steps", n)
        .meta("seed", ctx.seed)
        .meta("acceptance_rate", format_float(chain.acceptance_rate()));
    ctx.emit(&csv)
}

fn cmd_temperature(
    ctx: &Ctx,
    y: Option<f64>,
    t: Option<f64>,
    bias: Option<f64>,
    mse: Option<f64>,
    tolerance: Option<Tolerance>,
    emit_curves: bool,
) -> Result<(), CliError> {
    let bias = ctx.cfg.pick(bias, "bias")?;
    let mse = ctx
        .cfg
        .pick(mse, "mse")?
        .ok_or_else(|| CliError::Usage("--mse is required".into()))?;
    if emit_curves {
        let b = bias.ok_or_else(|| CliError::Usage("--emit-curves needs --bias".into()))?;
        let mut csv = CsvTable::new(&["u", "T_bias", "T_mse", "constraint"]);
        csv.meta("b", b).meta("MSE", mse);
        for p in interior_curves(b, mse)? {
            csv.push(vec![
                p.u.into(),
                p.temp_from_bias.into(),
                p.temp_from_mse.into(),
                p.constraint.into(),
            ]);
        }
        return ctx.emit(&csv);
    }
    let (y, t) = ctx.scalar(y, t)?;
    let temperature = target_temperature(y, t, bias, mse, ctx.tolerance(tolerance)?)?;
    let regime = bpdn_core::limit::LimitLaw1D::for_data(y, t)?.0.regime();
    let mut csv = CsvTable::new(&["y", "t", "bias", "mse", "regime", "temperature"]);
    let bias_cell = bias.map_or_else(|| "".into(), Into::into);
    csv.push(vec![
        y.into(),
        t.into(),
        bias_cell,
        mse.into(),
        regime.name().into(),
        temperature.into(),
    ]);
    ctx.emit(&csv)
}

fn cmd_verify(
    ctx: &Ctx,
    kind: VerifyKind,
    args: &ProblemArgs,
    temperatures: Option<List<f64>>,
    temperature: Option<f64>,
    n: Option<usize>,
    bins: Option<usize>,
) -> Result<(), CliError> {
    let thinning = ThinningOptions::default();
    match kind {
        VerifyKind::Ks => {
            let (y, t) = ctx.scalar(args.y, args.t)?;
            let temps = ctx
                .cfg
                .pick_or(temperatures, "temperatures", List(vec![1.0, 0.1, 0.01, 1e-3]))?
                .0;
            let n = ctx.cfg.pick_or(n, "n", 10_000)?;
            let rows = verify_scaling_1d(y, t, &temps, n, ctx.seed, &thinning)?;
            let mut csv = CsvTable::new(&[
                "temperature",
                "regime",
                "ks",
                "negative_fraction",
                "samples",
                "thinning",
                "lag1_autocorrelation",
                "acceptance_rate",
            ]);
            csv.meta("y", y).meta("t", t).meta("seed", ctx.seed);
            for r in rows {
                csv.push(vec![
                    r.temperature.into(),
                    r.regime.name().into(),
                    r.ks.into(),
                    r.negative_fraction.into(),
                    r.samples.into(),
                    r.thinning.into(),
                    r.lag1_autocorrelation.into(),
                    r.acceptance_rate.into(),
                ]);
            }
            ctx.emit(&csv)
        }
        VerifyKind::Sign => {
            let t = ctx.cfg.pick_or(args.t, "t", 1.0)?;
            let temps = ctx
                .cfg
                .pick_or(temperatures, "temperatures", List(vec![1.0, 0.1, 0.01]))?
                .0;
            let n = ctx.cfg.pick_or(n, "n", 100_000)?;
            let rows = boundary_sign_sweep(t, &temps, n, ctx.seed)?;
            let mut csv = CsvTable::new(&["temperature", "frequency", "standard_error", "exact"]);
            csv.meta("t", t).meta("chain_length", n).meta("seed", ctx.seed);
            for r in rows {
                csv.push(vec![
                    r.temperature.into(),
                    r.frequency.into(),
                    r.standard_error.into(),
                    r.exact.into(),
                ]);
            }
            ctx.emit(&csv)
        }
        VerifyKind::Chi2 => {
            let problem = ctx.problem(args)?;
            let defaults = ChiSquareOptions::default();
            let opts = ChiSquareOptions {
                bins_per_axis: ctx.cfg.pick_or(bins, "bins", defaults.bins_per_axis)?,
                n_samples: ctx.cfg.pick_or(n, "n", defaults.n_samples)?,
                seed: ctx.seed,
                ..defaults
            };
            let temperature = ctx.cfg.pick_or(temperature, "temperature", 1e-3)?;
            let r = limit_chi_square(&problem, temperature, &opts, &thinning)?;
            let mut csv = CsvTable::new(&[
                "temperature",
                "statistic",
                "degrees_of_freedom",
                "critical_value",
                "passed",
                "samples",
                "thinning",
            ]);
            csv.meta("level", opts.level).meta("seed", ctx.seed);
            csv.push(vec![
                temperature.into(),
                r.statistic.into(),
                r.degrees_of_freedom.into(),
                r.critical_value.into(),
                if r.passed { "yes" } else { "no" }.into(),
                r.samples.into(),
                r.thinning.into(),
            ]);
            ctx.emit(&csv)
        }
    }
}

fn comparison_params(ctx: &Ctx, args: &CompareArgs) -> Result<ComparisonParams, CliError> {
    let d = ComparisonParams::default();
    Ok(ComparisonParams {
        y: ctx.cfg.pick_or(args.y, "y", d.y)?,
        t: ctx.cfg.pick_or(args.t, "t", d.t)?,
        bias: ctx.cfg.pick(args.bias, "bias")?.or(d.bias),
        mse: ctx.cfg.pick_or(args.mse, "mse", d.mse)?,
        q: ctx.cfg.pick_or(args.q, "q", d.q)?,
        beta0: ctx.cfg.pick_or(args.beta0, "beta0", d.beta0)?,
        sigma2: ctx.cfg.pick_or(args.sigma2, "sigma2", d.sigma2)?,
        replicates: ctx.cfg.pick_or(args.replicates, "replicates", d.replicates)?,
        seed: ctx.seed,
        tolerance: ctx.tolerance(args.tolerance)?,
    })
}
