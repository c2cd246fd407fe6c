use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};
use permtest::diagnostics::{conditional_sq_error, estimate_moments, tail_probabilities, trimmed_rms_error};
use permtest::protocol::{serve as serve_stream, serve_tcp};
use permtest::tester::{budget as query_count, FailureReason};
use permtest::{
    compute_parameters, make_oracle, run_ptest, EnsembleSampler, OracleFamily, OracleSpec, RunOptions, TestReport,
    TesterParams, Verdict,
};

use crate::output::{sink, Format, Table};
use crate::{BudgetArgs, DiagnoseArgs, MomentsArgs, ReplayArgs, ServeArgs, TailsArgs, TestArgs, VERSION};

/// Anything that ends the process with exit code 2.
#[derive(Debug)]
pub struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! impl_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError(e.to_string())
            }
        }
    )*};
}
impl_from!(
    io::Error,
    serde_json::Error,
    permtest::ParamError,
    permtest::OracleError,
    rayon::ThreadPoolBuildError
);

type CmdResult = Result<ExitCode, CliError>;

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()?
            .install(f)),
        None => Ok(f()),
    }
}

fn build_oracle(spec: OracleSpec, t: f64, timeout_ms: Option<u64>, seed: u64) -> Result<OracleFamily, CliError> {
    let spec = match spec.with_default_threshold(t) {
        OracleSpec::Remote {
            endpoint,
            timeout_ms: None,
        } => OracleSpec::Remote { endpoint, timeout_ms },
        other => other,
    };
    Ok(make_oracle(&spec, EnsembleSampler::new(seed))?)
}

fn stage_table(report: &TestReport) -> Table {
    let mut table = Table::new(&[
        "seed", "n", "delta", "c", "T", "d", "verdict", "k", "test", "count", "failures", "mean", "min", "max",
    ]);
    let verdict = match report.verdict {
        Verdict::Accept => "accept",
        Verdict::Reject => "reject",
    };
    let stages = report
        .linearity_residuals
        .iter()
        .map(|s| ("linearity", s))
        .chain(report.tail_magnitudes.iter().map(|s| ("tail", s)));
    let mut rows: Vec<_> = stages.collect();
    rows.sort_by_key(|(test, s)| (s.k, *test != "linearity"));
    let p = &report.params;
    for (test, s) in rows {
        table.push(vec![
            report.seed.into(),
            p.n.into(),
            p.delta.into(),
            p.c.into(),
            p.t.into(),
            p.d.into(),
            verdict.into(),
            s.k.into(),
            test.into(),
            s.summary.count.into(),
            s.summary.failures.into(),
            s.summary.mean.into(),
            s.summary.min.into(),
            s.summary.max.into(),
        ]);
    }
    table
}

fn write_report(report: &TestReport, format: Format, out: &mut dyn Write) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        Format::Csv => stage_table(report).write_csv(out),
    }
}

pub fn test(args: TestArgs) -> CmdResult {
    let params = TesterParams::with_overrides(args.n, args.delta, args.c, args.d, args.t)?;
    let oracles = build_oracle(args.oracle, params.t, args.timeout_ms, args.common.seed)?;
    if !params.theorem_parameters() {
        eprintln!("theorem-parameters: false (d or T overridden)");
    }
    eprintln!(
        "T = {}, d = {}, query budget {}",
        params.t,
        params.d,
        permtest::query_budget(&params)
    );
    let options = RunOptions {
        mode: args.mode.into(),
        workers: args.common.workers,
        record_residuals: args.record_residuals,
    };
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let mut report = run_ptest(&oracles, &params, &EnsembleSampler::new(args.common.seed), &options)?;
    report.version = VERSION.to_string();
    report.timing.started_at = Some(started_at);
    for w in &report.warnings {
        if !w.starts_with("theorem-parameters") {
            eprintln!("warning: {w}");
        }
    }

    let mut out = sink(args.common.output.as_deref())?;
    write_report(&report, args.format, &mut out)?;
    out.flush()?;

    match &report.reject_cause {
        None => {
            eprintln!("accept ({} queries)", report.total_queries);
            Ok(ExitCode::SUCCESS)
        }
        Some(cause) => {
            eprintln!(
                "reject: {:?} test at k = {}, iteration {} ({:?})",
                cause.test, cause.k, cause.iteration, cause.reason
            );
            if let FailureReason::OracleError(msg) = &cause.reason {
                return Err(CliError(format!("oracle failed: {msg}")));
            }
            Ok(ExitCode::from(1))
        }
    }
}

pub fn serve(args: ServeArgs) -> CmdResult {
    if args.oracle.is_remote() {
        return Err(CliError("serve needs a locally realizable oracle".into()));
    }
    let spec = match args.t {
        Some(t) => args.oracle.with_default_threshold(t),
        None => args.oracle,
    };
    let mut oracle = make_oracle(&spec, EnsembleSampler::new(args.seed))?;
    if let Some(max_dim) = args.max_dim {
        oracle = oracle.with_max_dim(max_dim);
    }
    match args.port {
        Some(port) => {
            let listener = TcpListener::bind((args.host.as_str(), port))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(listener, Arc::new(oracle))?;
        }
        None => {
            let stdin = io::stdin().lock();
            let stdout = io::stdout().lock();
            let summary = serve_stream(stdin, stdout, &oracle)?;
            if summary.errors > 0 {
                eprintln!("served {} frames, {} errors", summary.frames, summary.errors);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn moments(args: MomentsArgs) -> CmdResult {
    let root = EnsembleSampler::new(args.common.seed);
    let estimates = with_workers(args.common.workers, || {
        args.k
            .iter()
            .map(|&k| estimate_moments(k, args.samples, &root.derive_substream(k as u64)))
            .collect::<Result<Vec<_>, _>>()
    })??;

    let mut table = Table::new(&[
        "k",
        "samples",
        "mean_re",
        "mean_im",
        "second_moment",
        "second_normalized",
        "second_std_error",
        "fourth_moment",
        "fourth_normalized",
        "fourth_std_error",
        "consistent",
    ]);
    let mut all_ok = true;
    for m in &estimates {
        let second = m.normalized_second();
        let fourth = m.normalized_fourth();
        let ok =
            (second.mean - 1.0).abs() <= 5.0 * second.std_error && (fourth.mean - 1.0).abs() <= 5.0 * fourth.std_error;
        all_ok &= ok;
        table.push(vec![
            m.k.into(),
            m.samples.into(),
            m.mean.re.into(),
            m.mean.im.into(),
            m.second_moment.into(),
            second.mean.into(),
            second.std_error.into(),
            m.fourth_moment.into(),
            fourth.mean.into(),
            fourth.std_error.into(),
            ok.into(),
        ]);
    }
    let mut out = sink(args.common.output.as_deref())?;
    table.write(args.format, &mut out)?;
    out.flush()?;
    Ok(exit(all_ok))
}

pub fn tails(args: TailsArgs) -> CmdResult {
    let root = EnsembleSampler::new(args.common.seed);
    let grids = with_workers(args.common.workers, || {
        args.k
            .iter()
            .map(|&k| tail_probabilities(k, &args.t, args.samples, &root.derive_substream(k as u64)))
            .collect::<Result<Vec<_>, _>>()
    })??;

    let mut table = Table::new(&["k", "T", "samples", "probability", "std_error", "bound", "within_bound"]);
    let mut all_ok = true;
    for est in grids.iter().flatten() {
        let ok = !est.violates_bound(3.0);
        all_ok &= ok;
        table.push(vec![
            est.k.into(),
            est.t.into(),
            est.samples.into(),
            est.probability.into(),
            est.std_error.into(),
            est.bound.into(),
            ok.into(),
        ]);
    }
    let mut out = sink(args.common.output.as_deref())?;
    table.write(args.format, &mut out)?;
    out.flush()?;
    Ok(exit(all_ok))
}

pub fn diagnose(args: DiagnoseArgs) -> CmdResult {
    let params = TesterParams::with_overrides(args.n, args.delta, args.c, None, args.t)?;
    let oracles = build_oracle(args.oracle, params.t, None, args.common.seed)?;
    let ks: Vec<usize> = if args.k.is_empty() {
        (1..=args.n.min(permtest::diagnostics::DIAGNOSTIC_MAX_DIM)).collect()
    } else {
        args.k.clone()
    };
    let root = EnsembleSampler::new(args.common.seed);
    let rows = with_workers(args.common.workers, || {
        ks.iter()
            .map(|&k| {
                let sampler = root.derive_substream(k as u64);
                let cond = conditional_sq_error(&oracles, k, args.samples, &params, &sampler)?;
                let rms = trimmed_rms_error(&oracles, k, args.eta, args.samples, &sampler)?;
                Ok((cond, rms))
            })
            .collect::<Result<Vec<_>, permtest::ParamError>>()
    })??;

    let mut table = Table::new(&[
        "k",
        "samples",
        "indicator_mean",
        "indicator_std_error",
        "indicator_floor",
        "lin_rate",
        "tail_rate",
        "perm_rate",
        "conditional_sq_error",
        "std_error",
        "ceiling",
        "eta",
        "trimmed_rms",
        "within_ceiling",
        "above_floor",
    ]);
    let mut all_ok = true;
    for (cond, rms) in &rows {
        let (within, above) = (cond.within_ceiling(3.0), cond.above_floor(3.0));
        all_ok &= within && above;
        table.push(vec![
            cond.k.into(),
            cond.samples.into(),
            cond.indicator_mean.into(),
            cond.indicator_std_error.into(),
            cond.indicator_floor.into(),
            cond.flag_rates[0].into(),
            cond.flag_rates[1].into(),
            cond.flag_rates[2].into(),
            cond.estimate.into(),
            cond.std_error.into(),
            cond.ceiling.into(),
            args.eta.into(),
            (*rms).into(),
            within.into(),
            above.into(),
        ]);
    }
    let mut out = sink(args.common.output.as_deref())?;
    table.write(args.format, &mut out)?;
    out.flush()?;
    Ok(exit(all_ok))
}

pub fn budget(args: BudgetArgs) -> CmdResult {
    let d = match (args.d, args.delta, args.c) {
        (Some(d), _, _) => d,
        (None, Some(delta), Some(c)) => compute_parameters(args.n, delta, c)?.1,
        _ => return Err(CliError("budget needs --d, or both --delta and --c".into())),
    };
    if args.n == 0 {
        return Err(CliError("n must be at least 1".into()));
    }
    let queries = query_count(args.n, d);
    match args.format {
        None => println!("{queries}"),
        Some(format) => {
            let mut table = Table::new(&["n", "d", "queries"]);
            table.push(vec![args.n.into(), d.into(), queries.into()]);
            table.write(format, io::stdout().lock())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn replay(args: ReplayArgs) -> CmdResult {
    let text = fs::read_to_string(&args.report)?;
    let original: TestReport = serde_json::from_str(&text)?;
    let spec = original
        .oracle
        .clone()
        .ok_or_else(|| CliError("report does not name its oracle".into()))?;
    let p = &original.params;
    let params = TesterParams::with_overrides(p.n, p.delta, p.c, p.override_d, p.override_t)?;
    let oracles = make_oracle(&spec, EnsembleSampler::new(original.seed))?;
    let options = RunOptions {
        mode: original.mode,
        workers: args.workers,
        record_residuals: original.residuals.is_some(),
    };
    let mut rerun = run_ptest(&oracles, &params, &EnsembleSampler::new(original.seed), &options)?;
    rerun.version = original.version.clone();

    let a = serde_json::to_value(original.without_timing())?;
    let b = serde_json::to_value(rerun.without_timing())?;
    let differing: Vec<&String> = a
        .as_object()
        .into_iter()
        .flatten()
        .filter(|(key, value)| b.get(key.as_str()) != Some(value))
        .map(|(key, _)| key)
        .collect();
    if differing.is_empty() {
        println!("identical");
        Ok(ExitCode::SUCCESS)
    } else {
        let names: Vec<&str> = differing.iter().map(|s| s.as_str()).collect();
        println!("differs: {}", names.join(", "));
        Ok(ExitCode::from(1))
    }
}
