use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use rendezkit::confopt::{
    cheb_n, dual_cheb_n, modified_cheb_n, nth_diameter, Method, SearchOptions, TupleWitness,
};
use rendezkit::energyopt::{energy_chain_check, w_energy};
use rendezkit::game::{duality_gap, q_lower, q_value, u_value, v_value};
use rendezkit::rendezvous::{
    average_interval, rendezvous_interval, rendezvous_report, singleton_tol,
};
use rendezkit::space::{build_circle_grid, build_interval_grid, discrete_two_point};
use rendezkit::verify::{run_suite, SuiteConfig};
use rendezkit::{
    CircleMetric, DiscreteSpace, Error, ExtInterval, ExtendedValue, Kernel, SubsetRef,
    SCHEMA_VERSION,
};

/// Energies, Chebyshev constants and rendezvous intervals on finite kernel spaces.
#[derive(Parser)]
#[command(name = "rendezkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one quantity on one space.
    Compute(ComputeArgs),
    /// Compute one quantity over a list of grid sizes; writes CSV.
    Sweep(SweepArgs),
    /// Run the randomized property suite; writes JSON lines.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    #[value(name = "q")]
    Q,
    #[value(name = "qlower")]
    QLower,
    #[value(name = "u")]
    U,
    #[value(name = "v")]
    V,
    #[value(name = "w")]
    W,
    #[value(name = "Dn")]
    Dn,
    #[value(name = "Mn")]
    Mn,
    #[value(name = "Mbarn")]
    Mbarn,
    #[value(name = "Cn")]
    Cn,
    #[value(name = "R")]
    R,
    #[value(name = "Rn")]
    Rn,
    #[value(name = "A")]
    A,
    #[value(name = "chain")]
    Chain,
    #[value(name = "duality")]
    Duality,
}

impl Quantity {
    fn name(self) -> String {
        self.to_possible_value()
            .map_or_else(String::new, |v| v.get_name().to_owned())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Builder {
    Discrete2,
    Interval,
    Circle,
    MatrixFile,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Local,
}

#[derive(Args, Clone)]
struct SpaceArgs {
    #[arg(long, value_enum)]
    builder: Builder,
    /// Kernel for the interval builder: euclid, discrete, neglog or riesz:s.
    #[arg(long, default_value = "euclid")]
    kernel: Kernel,
    /// Grid size for interval and circle builders.
    #[arg(long = "N")]
    n_points: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    b: f64,
    /// Circle metric: chordal or geodesic.
    #[arg(long, default_value = "chordal")]
    metric: CircleMetric,
    /// Space file (.json, or .csv matrix without header) for the matrix-file builder.
    #[arg(long)]
    matrix_file: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct QueryArgs {
    #[arg(long, value_enum)]
    quantity: Quantity,
    /// Source set: "all", "0,2,5", "i..j" or "i..=j".
    #[arg(long = "H", default_value = "all")]
    h: String,
    /// Target set, same syntax as --H.
    #[arg(long = "L", default_value = "all")]
    l: String,
    /// Number of points for Dn, Mn, Mbarn, Cn and Rn.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local-search restarts.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Cap on multisets visited by exact enumeration.
    #[arg(long, default_value_t = rendezkit::confopt::DEFAULT_BUDGET)]
    budget: u128,
    /// Support bound for v (required when |H| > 20).
    #[arg(long)]
    max_support: Option<usize>,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// Comma-separated grid sizes.
    #[arg(long = "Ns", value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON suite configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    infinite_trials: Option<usize>,
    /// Instance sizes as "a..b" or "a..=b".
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    exhaustive_n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure kinds with their process exit codes.
enum Failure {
    Property(String),
    Usage(String),
    Data(String),
    Budget(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Property(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Budget(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Property(m) | Failure::Usage(m) | Failure::Data(m) | Failure::Budget(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) => Failure::Usage(e.to_string()),
            Error::Budget { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads().and_then(|_| run(cli)) {
        eprintln!("error: {}", f.message());
        return ExitCode::from(f.code());
    }
    ExitCode::SUCCESS
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("RENDEZKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "RENDEZKIT_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Compute(args) => compute(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify(args) => verify(args),
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_space(args: &SpaceArgs, n_override: Option<usize>) -> CliResult<DiscreteSpace> {
    let n = n_override.or(args.n_points);
    let need_n = || n.ok_or_else(|| Failure::Usage("--N is required for this builder".into()));
    Ok(match args.builder {
        Builder::Discrete2 => discrete_two_point(),
        Builder::Interval => build_interval_grid(args.a, args.b, need_n()?, args.kernel)?,
        Builder::Circle => build_circle_grid(need_n()?, args.metric)?,
        Builder::MatrixFile => {
            let path = args.matrix_file.as_ref().ok_or_else(|| {
                Failure::Usage("--matrix-file is required for the matrix-file builder".into())
            })?;
            let is_csv = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            if is_csv {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                DiscreteSpace::from_csv_reader(label, File::open(path)?)?
            } else {
                DiscreteSpace::from_json(&std::fs::read_to_string(path)?)?
            }
        }
    })
}

fn search_options(q: &QueryArgs) -> SearchOptions {
    SearchOptions {
        method: match q.method {
            MethodArg::Exact => Method::Exact,
            MethodArg::Local => Method::LocalSearch,
        },
        restarts: q.restarts,
        seed: q.seed,
        budget: q.budget,
    }
}

fn need_n(q: &QueryArgs) -> CliResult<usize> {
    q.n.ok_or_else(|| Failure::Usage(format!("--n is required for {}", q.quantity.name())))
}

/// Result of one computation: JSON body, a one-line summary, and optional CSV.
struct Computed {
    body: Value,
    summary: String,
    scalar: Option<ExtendedValue>,
    interval: Option<ExtInterval>,
    csv: Option<Vec<u8>>,
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v)?)
}

fn scalar(body: Value, name: &str, v: ExtendedValue) -> Computed {
    Computed {
        body,
        summary: format!("{name} = {v}"),
        scalar: Some(v),
        interval: None,
        csv: None,
    }
}

fn interval(name: &str, iv: ExtInterval) -> CliResult<Computed> {
    let mut body = to_value(&iv)?;
    let unique = iv.is_singleton_tol(singleton_tol(&iv)).then(|| iv.hi());
    body["unique_number"] = to_value(&unique)?;
    Ok(Computed {
        body,
        summary: format!("{name} = {iv}"),
        scalar: None,
        interval: Some(iv),
        csv: None,
    })
}

fn tuple(name: &str, w: TupleWitness) -> CliResult<Computed> {
    Ok(scalar(to_value(&w)?, name, w.value))
}

fn evaluate(space: &DiscreteSpace, q: &QueryArgs) -> CliResult<Computed> {
    let n_pts = space.n_points();
    let h = SubsetRef::parse(&q.h, n_pts)?;
    let l = SubsetRef::parse(&q.l, n_pts)?;
    let opts = search_options(q);
    Ok(match q.quantity {
        Quantity::Q => {
            let s = q_value(space, &h, &l)?;
            scalar(to_value(&s)?, "q(H,L)", s.value)
        }
        Quantity::QLower => {
            let s = q_lower(space, &h, &l)?;
            scalar(to_value(&s)?, "qlower(H,L)", s.value)
        }
        Quantity::U => {
            let s = u_value(space, &h)?;
            scalar(to_value(&s)?, "u(H)", s.value)
        }
        Quantity::V => {
            let s = v_value(space, &h, q.max_support)?;
            scalar(to_value(&s)?, "v(H)", s.value)
        }
        Quantity::W => {
            let r = w_energy(space, &h)?;
            scalar(to_value(&r)?, "w(H)", r.value)
        }
        Quantity::Dn => {
            let n = need_n(q)?;
            tuple(&format!("D_{n}(H)"), nth_diameter(space, &h, n, &opts)?)?
        }
        Quantity::Mn => {
            let n = need_n(q)?;
            tuple(&format!("M_{n}(H,L)"), cheb_n(space, &h, &l, n, &opts)?)?
        }
        Quantity::Mbarn => {
            let n = need_n(q)?;
            tuple(
                &format!("Mbar_{n}(H,L)"),
                dual_cheb_n(space, &h, &l, n, &opts)?,
            )?
        }
        Quantity::Cn => {
            let n = need_n(q)?;
            tuple(&format!("C_{n}(H)"), modified_cheb_n(space, &h, n, &opts)?)?
        }
        Quantity::R => interval("R(H,L)", rendezvous_interval(space, &h, &l)?)?,
        Quantity::A => interval("A(H,L)", average_interval(space, &h, &l)?)?,
        Quantity::Rn => {
            let n = need_n(q)?;
            let report = rendezvous_report(space, &h, &l, n, &opts)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            let last = report.R_n.last().map(|e| e.interval);
            Computed {
                body: to_value(&report)?,
                summary: format!(
                    "R_{n}(H,L) = {}, R = {}, A = {}",
                    last.map_or("-".into(), |iv| iv.to_string()),
                    report.R,
                    report.A
                ),
                scalar: None,
                interval: last,
                csv: Some(csv),
            }
        }
        Quantity::Chain => {
            let rep = energy_chain_check(space, &h)?;
            let verdict = if rep.passed() { "holds" } else { "VIOLATED" };
            Computed {
                summary: format!(
                    "w = {}, v = {}, q = {}, u = {}: chain {verdict}",
                    rep.w,
                    rep.v.map_or("-".into(), |v| v.to_string()),
                    rep.q,
                    rep.u
                ),
                body: to_value(&rep)?,
                scalar: None,
                interval: None,
                csv: None,
            }
        }
        Quantity::Duality => {
            let gap = duality_gap(space, &h, &l)?;
            let v = ExtendedValue::finite(gap)?;
            let mut c = scalar(json!({ "gap": gap }), "|q(H,L) - qlower(L,H)|", v);
            c.summary = format!("|q(H,L) - qlower(L,H)| = {gap:e}");
            c
        }
    })
}

fn compute(args: ComputeArgs) -> CliResult<()> {
    let space = build_space(&args.space, None)?;
    let res = evaluate(&space, &args.query)?;
    eprintln!("{}: {}", space.label(), res.summary);
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("schema".into(), json!(SCHEMA_VERSION));
            doc.insert("quantity".into(), json!(args.query.quantity.name()));
            doc.insert("space".into(), json!(space.label()));
            doc.insert("H".into(), json!(args.query.h));
            doc.insert("L".into(), json!(args.query.l));
            match res.body {
                Value::Object(fields) => doc.extend(fields),
                other => {
                    doc.insert("result".into(), other);
                }
            }
            serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            if let Some(csv) = res.csv {
                out.write_all(&csv)?;
            } else if let Some(v) = res.scalar {
                writeln!(out, "value\n{v}")?;
            } else if let Some(iv) = res.interval {
                writeln!(
                    out,
                    "lo,hi,empty\n{},{},{}",
                    iv.lo(),
                    iv.hi(),
                    iv.is_empty()
                )?;
            } else {
                return Err(Failure::Usage(format!(
                    "--format csv is not available for {}",
                    args.query.quantity.name()
                )));
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult<()> {
    if matches!(args.space.builder, Builder::Discrete2 | Builder::MatrixFile) {
        return Err(Failure::Usage(
            "sweep needs the interval or circle builder".into(),
        ));
    }
    if matches!(args.query.quantity, Quantity::Chain | Quantity::Rn) {
        return Err(Failure::Usage(format!(
            "{} cannot be swept",
            args.query.quantity.name()
        )));
    }
    let rows: Vec<(usize, Computed)> = args
        .sizes
        .par_iter()
        .map(|&n| {
            let space = build_space(&args.space, Some(n))?;
            Ok((n, evaluate(&space, &args.query)?))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut out = output(args.out.as_deref())?;
    let is_interval = rows.first().is_some_and(|(_, c)| c.interval.is_some());
    if is_interval {
        writeln!(out, "N,lo,hi")?;
    } else {
        writeln!(out, "N,value")?;
    }
    for (n, c) in &rows {
        match (c.scalar, c.interval) {
            (Some(v), _) => writeln!(out, "{n},{v}")?,
            (None, Some(iv)) => writeln!(out, "{n},{},{}", iv.lo(), iv.hi())?,
            _ => unreachable!("sweepable quantities are scalars or intervals"),
        }
    }
    out.flush()?;

    for (n, c) in &rows {
        eprintln!("N = {n}: {}", c.summary);
    }
    let series: Vec<f64> = rows
        .iter()
        .map(|(_, c)| {
            c.scalar
                .or(c.interval.map(|iv| iv.hi()))
                .map_or(f64::NAN, |v| v.to_f64())
        })
        .collect();
    eprintln!("trend: {}", trend(&series));
    if args.query.quantity == Quantity::Dn && args.space.kernel == Kernel::NegLog {
        if let Some(last) = series.last() {
            let log4 = 4f64.ln();
            eprintln!(
                "bracket: D_n = {last:.6} <= log 4 = {log4:.6} (gap {:.3e})",
                log4 - last
            );
        }
    }
    Ok(())
}

fn trend(series: &[f64]) -> &'static str {
    let up = series.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let down = series.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    match (up, down) {
        (true, true) => "constant",
        (true, false) => "non-decreasing",
        (false, true) => "non-increasing",
        _ => "not monotone",
    }
}

fn parse_sizes(spec: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Usage(format!("sizes must look like a..b or a..=b, got {spec:?}"));
    let (lo, hi, inclusive) = if let Some((a, b)) = spec.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = spec.split_once("..") {
        (a, b, false)
    } else {
        return Err(bad());
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    let hi = if inclusive {
        hi
    } else {
        hi.checked_sub(1).ok_or_else(bad)?
    };
    Ok((lo, hi))
}

fn verify(args: VerifyArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => SuiteConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => SuiteConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.infinite_trials {
        cfg.infinite_trials = t;
    }
    if let Some(s) = &args.sizes {
        cfg.sizes = parse_sizes(s)?;
    }
    if let Some(n) = args.exhaustive_n {
        cfg.exhaustive_n = n;
    }
    let outcome = run_suite(&cfg)?;
    let mut out = output(args.out.as_deref())?;
    outcome.write_jsonl(&mut out)?;
    out.flush()?;
    for r in &outcome.reports {
        let tag = if r.passed() { "ok" } else { "FAIL" };
        eprintln!(
            "{tag:>4} {:<14} trials {:>4}  failures {:>3}  worst slack {:.2e}",
            r.property_id,
            r.trials,
            r.failures.len(),
            r.worst_slack
        );
    }
    if outcome.exit_code() != 0 {
        let first = outcome.reports.iter().flat_map(|r| &r.failures).next();
        return Err(Failure::Property(format!(
            "{} property failures; first: {}",
            outcome.failures(),
            first.map_or(String::new(), |f| serde_json::to_string(f)
                .unwrap_or_default())
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_ranges() {
        assert_eq!(parse_sizes("2..8").ok(), Some((2, 7)));
        assert_eq!(parse_sizes("2..=8").ok(), Some((2, 8)));
        assert!(parse_sizes("2-8").is_err());
        assert!(parse_sizes("0..0").is_err());
    }

    #[test]
    fn trend_labels() {
        assert_eq!(trend(&[1.0, 2.0, 2.0]), "non-decreasing");
        assert_eq!(trend(&[3.0, 2.0]), "non-increasing");
        assert_eq!(trend(&[1.0, 1.0]), "constant");
        assert_eq!(trend(&[1.0, 2.0, 1.0]), "not monotone");
    }
}
