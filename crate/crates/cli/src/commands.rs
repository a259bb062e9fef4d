use std::fmt;
use std::io::BufReader;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use ibgas::ba::{slope_search, BaConfig, BaError, SearchConfig};
use ibgas::gas::{solve, GasConfig, SolverReport, Status};
use ibgas::oracles::{bernoulli_r, constant_slope_r, gaussian_r};
use ibgas::problems::{
    bernoulli_joint, constant_slope_joint, empirical_joint, gaussian_discretized, load_labeled_csv,
    GaussianGridSpec,
};
use ibgas::sweep::{ba_sweep, gas_curve, linspace, map_points};
use ibgas::{IbProblem, JointDistribution};

use crate::output::{
    curve_csv, emit, render, sort_rows, unit_factor, CurveRow, ProblemSpec, RunManifest,
};
use crate::{
    BenchArgs, Cli, Command, CurveArgs, OracleArgs, OracleModel, PointArgs, ProblemArgs, ProblemKind,
    ReplayArgs, SolverArgs, SolverKind, Units,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values.
    Usage(String),
    /// Unreadable or malformed input file.
    Input(String),
    /// Every point of a sweep failed numerically.
    AllFailed,
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::AllFailed => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Input(m) => write!(f, "input: {m}"),
            CliError::AllFailed => write!(f, "every point failed"),
            CliError::Output(m) => write!(f, "output: {m}"),
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn run(command: Command, args: &[String]) -> Result<(), CliError> {
    match command {
        Command::Curve(a) => curve(&a, args),
        Command::Point(a) => point(&a),
        Command::Oracle(a) => oracle(&a, args),
        Command::Bench(a) => bench(&a, args),
        Command::Replay(a) => replay(&a),
    }
}

fn build_problem(p: &ProblemArgs) -> Result<(JointDistribution, ProblemSpec), CliError> {
    match p.problem {
        ProblemKind::Bernoulli => Ok((bernoulli_joint(p.e).map_err(usage)?, ProblemSpec::Bernoulli { e: p.e })),
        ProblemKind::Gaussian => {
            let spec = GaussianGridSpec {
                snr: p.snr,
                half_width: p.half_width,
                step: p.step,
            };
            Ok((
                gaussian_discretized(&spec).map_err(usage)?,
                ProblemSpec::Gaussian {
                    snr: p.snr,
                    half_width: p.half_width,
                    step: p.step,
                },
            ))
        }
        ProblemKind::ConstantSlope => Ok((constant_slope_joint(), ProblemSpec::ConstantSlope)),
        ProblemKind::Empirical => {
            let path = p
                .data
                .as_ref()
                .ok_or_else(|| usage("--problem empirical needs --data <path>"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let label_col = match p.label_col {
                Some(k) => k,
                None => {
                    let first = text
                        .lines()
                        .map(str::trim)
                        .find(|l| !l.is_empty())
                        .ok_or_else(|| CliError::Input(format!("{}: no data rows", path.display())))?;
                    first.split(',').count().saturating_sub(1)
                }
            };
            let samples = load_labeled_csv(BufReader::new(text.as_bytes()), label_col, p.header)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let joint = empirical_joint(&samples).map_err(|e| CliError::Input(e.to_string()))?;
            Ok((
                joint,
                ProblemSpec::Empirical {
                    data: path.clone(),
                    label_col,
                    header: p.header,
                },
            ))
        }
    }
}

fn gas_config(s: &SolverArgs) -> GasConfig {
    let base = GasConfig::default();
    GasConfig {
        bottleneck_size: s.bottleneck,
        max_iter: s.max_iter.unwrap_or(base.max_iter),
        rng_seed: s.seed,
        stabilized: !s.unstabilized,
        ..base
    }
}

fn ba_config(s: &SolverArgs) -> BaConfig {
    let base = BaConfig::default();
    BaConfig {
        bottleneck_size: s.bottleneck,
        max_iter: s.max_iter.unwrap_or(base.max_iter),
        rng_seed: s.seed,
        ..base
    }
}

fn solver_config(s: &SolverArgs) -> serde_json::Value {
    match s.solver {
        SolverKind::Gas => serde_json::to_value(gas_config(s)),
        SolverKind::Ba => serde_json::to_value(SearchConfig {
            ba: ba_config(s),
            ..SearchConfig::default()
        }),
    }
    .expect("configs serialize")
}

fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Gas => "gas",
        SolverKind::Ba => "ba",
    }
}

fn check_thresholds(ts: &[f64]) -> Result<(), CliError> {
    if ts.is_empty() {
        return Err(usage("no thresholds given"));
    }
    match ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        Some(t) => Err(usage(format!("threshold {t} must be finite and non-negative"))),
        None => Ok(()),
    }
}

fn thresholds(a: &CurveArgs) -> Result<Vec<f64>, CliError> {
    let ts = match (&a.i_list, a.i_min, a.i_max, a.i_steps) {
        (Some(list), ..) => list.clone(),
        (None, Some(lo), Some(hi), Some(n)) => {
            if n == 0 || hi < lo {
                return Err(usage("--i-steps must be positive and --i-max at least --i-min"));
            }
            linspace(lo, hi, n)
        }
        _ => return Err(usage("give --i-list or --i-min/--i-max/--i-steps")),
    };
    check_thresholds(&ts)?;
    Ok(ts)
}

fn parse_beta_sweep(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("--beta-sweep expects lo:hi:n, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn report_row(rep: &SolverReport) -> CurveRow {
    CurveRow {
        threshold: rep.threshold,
        rate: rep.rate,
        relevance: rep.relevance,
        zeta: rep.zeta,
        iterations: rep.iterations,
        status: rep.status.to_string(),
        marginal_residual: rep.residuals.marginal,
    }
}

fn search_row(target: f64, result: Result<ibgas::ba::SlopeSearch, BaError>) -> Result<CurveRow, CliError> {
    match result {
        Ok(found) => Ok(CurveRow {
            threshold: target,
            ..report_row(&found.report)
        }),
        Err(BaError::SearchFailed { closest, trials, .. }) => Ok(CurveRow {
            threshold: target,
            rate: f64::NAN,
            relevance: closest,
            zeta: f64::NAN,
            iterations: trials,
            status: "SearchFailed".into(),
            marginal_residual: f64::NAN,
        }),
        Err(BaError::Target { .. }) => Ok(CurveRow {
            threshold: target,
            rate: f64::NAN,
            relevance: f64::NAN,
            zeta: f64::NAN,
            iterations: 0,
            status: Status::Infeasible.to_string(),
            marginal_residual: f64::NAN,
        }),
        Err(e @ BaError::InvalidConfig(_)) => Err(usage(e)),
    }
}

fn curve(a: &CurveArgs, args: &[String]) -> Result<(), CliError> {
    let (joint, spec) = build_problem(&a.problem)?;
    let mut rows = match (a.solver.solver, &a.beta_sweep) {
        (SolverKind::Gas, Some(_)) => return Err(usage("--beta-sweep needs --solver ba")),
        (SolverKind::Ba, Some(sweep)) => {
            let betas = parse_beta_sweep(sweep)?;
            ba_sweep(&joint, &betas, &ba_config(&a.solver))
                .into_iter()
                .map(|r| {
                    r.map(|rep| CurveRow {
                        threshold: rep.relevance,
                        ..report_row(&rep)
                    })
                    .map_err(usage)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        (SolverKind::Gas, None) => {
            let ts = thresholds(a)?;
            gas_curve(&joint, &ts, &gas_config(&a.solver))
                .into_iter()
                .map(|r| r.map(|rep| report_row(&rep)).map_err(usage))
                .collect::<Result<Vec<_>, _>>()?
        }
        (SolverKind::Ba, None) => {
            let ts = thresholds(a)?;
            let problem = IbProblem::new(&joint, 0.0).map_err(usage)?;
            let cfg = SearchConfig {
                ba: ba_config(&a.solver),
                ..SearchConfig::default()
            };
            map_points(&ts, |&t| search_row(t, slope_search(&problem, t, &cfg)))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    sort_rows(&mut rows);
    let all_failed = rows.iter().all(|r| r.status == Status::NumericalFailure.to_string());
    let rows: Vec<CurveRow> = rows.into_iter().map(|r| r.in_units(a.output.units)).collect();
    let body = render(a.output.format, &rows, curve_csv)?;
    let manifest = RunManifest::new(
        "curve",
        args,
        spec,
        solver_name(a.solver.solver),
        solver_config(&a.solver),
        a.solver.seed,
    );
    emit(&a.output, &body, &manifest)?;
    if all_failed {
        return Err(CliError::AllFailed);
    }
    Ok(())
}

fn report_in_units(mut rep: SolverReport, units: Units) -> SolverReport {
    let f = unit_factor(units);
    rep.threshold *= f;
    rep.rate *= f;
    rep.relevance *= f;
    rep.objective *= f;
    rep
}

#[derive(Serialize)]
struct SearchFailure {
    threshold: f64,
    status: &'static str,
    closest_relevance: f64,
    trials: usize,
}

fn point(a: &PointArgs) -> Result<(), CliError> {
    let (joint, _) = build_problem(&a.problem)?;
    check_thresholds(&[a.i])?;
    let json = match a.solver.solver {
        SolverKind::Gas => {
            let problem = IbProblem::new(&joint, a.i).map_err(usage)?;
            let rep = solve(&problem, &gas_config(&a.solver)).map_err(usage)?;
            serde_json::to_string_pretty(&report_in_units(rep, a.units))
        }
        SolverKind::Ba => {
            let problem = IbProblem::new(&joint, 0.0).map_err(usage)?;
            let cfg = SearchConfig {
                ba: ba_config(&a.solver),
                ..SearchConfig::default()
            };
            match slope_search(&problem, a.i, &cfg) {
                Ok(found) => {
                    let rep = SolverReport {
                        threshold: a.i,
                        ..found.report
                    };
                    serde_json::to_string_pretty(&report_in_units(rep, a.units))
                }
                Err(BaError::SearchFailed { closest, trials, .. }) => {
                    let f = unit_factor(a.units);
                    serde_json::to_string_pretty(&SearchFailure {
                        threshold: a.i * f,
                        status: "SearchFailed",
                        closest_relevance: closest * f,
                        trials,
                    })
                }
                Err(BaError::Target { .. }) => {
                    let rep = solve(
                        &IbProblem::new(&joint, a.i).map_err(usage)?,
                        &gas_config(&a.solver),
                    )
                    .map_err(usage)?;
                    debug_assert_eq!(rep.status, Status::Infeasible);
                    serde_json::to_string_pretty(&report_in_units(rep, a.units))
                }
                Err(e) => return Err(usage(e)),
            }
        }
    }
    .map_err(|e| CliError::Output(e.to_string()))?;
    println!("{json}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleRow {
    #[serde(rename = "threshold_I")]
    threshold: f64,
    #[serde(rename = "rate_R")]
    rate: f64,
}

fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut s = String::from("threshold_I,rate_R\n");
    for r in rows {
        s.push_str(&format!("{},{}\n", r.threshold, r.rate));
    }
    s
}

fn oracle(a: &OracleArgs, args: &[String]) -> Result<(), CliError> {
    let f = unit_factor(a.output.units);
    let (name, parameter) = match a.model {
        OracleModel::Bernoulli => ("bernoulli", a.e),
        OracleModel::Gaussian => ("gaussian", a.snr),
        OracleModel::ConstantSlope => ("constant-slope", 0.0),
    };
    let mut rows = Vec::with_capacity(a.i_list.len());
    for &i in &a.i_list {
        let r = match a.model {
            OracleModel::Bernoulli => bernoulli_r(i, a.e),
            OracleModel::Gaussian => gaussian_r(i, a.snr),
            OracleModel::ConstantSlope => constant_slope_r(i),
        }
        .map_err(usage)?;
        rows.push(OracleRow {
            threshold: i * f,
            rate: r * f,
        });
    }
    rows.sort_by(|x, y| x.threshold.total_cmp(&y.threshold));
    let body = render(a.output.format, &rows, oracle_csv)?;
    let manifest = RunManifest::new(
        "oracle",
        args,
        ProblemSpec::Oracle {
            model: name.into(),
            parameter,
        },
        "oracle",
        serde_json::Value::Null,
        0,
    );
    emit(&a.output, &body, &manifest)
}

#[derive(Debug, Serialize)]
struct BenchRow {
    #[serde(rename = "target_I")]
    target: f64,
    gas_mean_s: f64,
    gas_std_s: f64,
    gas_status: String,
    ba_mean_s: f64,
    ba_std_s: f64,
    ba_trials: usize,
    ba_status: String,
    speedup: f64,
}

fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s =
        String::from("target_I,gas_mean_s,gas_std_s,gas_status,ba_mean_s,ba_std_s,ba_trials,ba_status,speedup\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.target, r.gas_mean_s, r.gas_std_s, r.gas_status, r.ba_mean_s, r.ba_std_s, r.ba_trials, r.ba_status, r.speedup
        ));
    }
    s
}

/// Mean and sample standard deviation; a single sample has zero spread.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn bench(a: &BenchArgs, args: &[String]) -> Result<(), CliError> {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    check_thresholds(&a.target_i_list)?;
    let (joint, spec) = build_problem(&a.problem)?;
    let solver = SolverArgs {
        solver: SolverKind::Gas,
        max_iter: a.max_iter,
        seed: a.seed,
        bottleneck: None,
        unstabilized: false,
    };
    let gas_cfg = gas_config(&solver);
    let search_cfg = SearchConfig {
        ba: ba_config(&SolverArgs {
            max_iter: None,
            ..solver.clone()
        }),
        ..SearchConfig::default()
    };
    let base = IbProblem::new(&joint, 0.0).map_err(usage)?;
    let mut rows = Vec::new();
    // timed sequentially so runs do not compete for cores
    for &target in &a.target_i_list {
        let problem = IbProblem::new(&joint, target).map_err(usage)?;
        let mut gas_times = Vec::with_capacity(a.repeats);
        let mut gas_status = String::new();
        for _ in 0..a.repeats {
            let t = Instant::now();
            let rep = solve(&problem, &gas_cfg).map_err(usage)?;
            gas_times.push(t.elapsed().as_secs_f64());
            gas_status = rep.status.to_string();
        }
        let mut ba_times = Vec::with_capacity(a.repeats);
        let mut ba_status = String::new();
        let mut ba_trials = 0;
        for _ in 0..a.repeats {
            let t = Instant::now();
            let outcome = slope_search(&base, target, &search_cfg);
            ba_times.push(t.elapsed().as_secs_f64());
            (ba_status, ba_trials) = match outcome {
                Ok(found) => ("Converged".to_string(), found.trials),
                Err(BaError::SearchFailed { trials, .. }) => ("SearchFailed".to_string(), trials),
                Err(BaError::Target { .. }) => (Status::Infeasible.to_string(), 0),
                Err(e) => return Err(usage(e)),
            };
        }
        let (gm, gs) = mean_std(&gas_times);
        let (bm, bs) = mean_std(&ba_times);
        let speedup = if ba_status == "Converged" { bm / gm } else { f64::NAN };
        rows.push(BenchRow {
            target: target * unit_factor(a.output.units),
            gas_mean_s: gm,
            gas_std_s: gs,
            gas_status,
            ba_mean_s: bm,
            ba_std_s: bs,
            ba_trials,
            ba_status,
            speedup,
        });
    }
    let body = render(a.output.format, &rows, bench_csv)?;
    let manifest = RunManifest::new(
        "bench",
        args,
        spec,
        "gas+ba",
        serde_json::json!({ "gas": gas_cfg, "ba_search": search_cfg }),
        a.seed,
    );
    emit(&a.output, &body, &manifest)
}

fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.manifest.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.manifest.display())))?;
    let mut argv = vec!["ibgas".to_string()];
    argv.extend(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Input(format!("manifest arguments: {e}")))?;
    let command = match cli.command {
        Command::Curve(mut c) => {
            c.output.out = a.out.clone();
            Command::Curve(c)
        }
        Command::Oracle(mut c) => {
            c.output.out = a.out.clone();
            Command::Oracle(c)
        }
        Command::Bench(mut c) => {
            c.output.out = a.out.clone();
            Command::Bench(c)
        }
        Command::Point(_) | Command::Replay(_) => {
            return Err(CliError::Input("manifest does not record a replayable command".into()))
        }
    };
    run(command, &manifest.args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_sweep_parsing() {
        assert_eq!(parse_beta_sweep("0.5:5:10").unwrap().len(), 10);
        assert_eq!(parse_beta_sweep("1:1:1").unwrap(), vec![1.0]);
        for bad in ["1:2", "a:2:3", "2:1:3", "1:2:0", "-1:2:3"] {
            assert!(matches!(parse_beta_sweep(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn spread_of_one_sample_is_zero() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
