use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use fermat_quad::acceptance::{self, ELIMINATED_17_3, ELIMINATED_5_3};
use fermat_quad::curves::TraceRecord;
use fermat_quad::obstructions::{
    builtin_curves, cross_check, ingest_curves, obstructive_triples, saturation, CurveRecord,
    Window,
};
use fermat_quad::parallel::Executor;
use fermat_quad::quadfield::{QInt, QuadField, RealEmbedding};
use fermat_quad::report::{canonical_json, residues_csv, RunManifest};
use fermat_quad::sieve::{eliminated_classes, theorem_report, SieveConfig, SieveReport};
use fermat_quad::symbols::{
    genrec_check, hilbert_at, hilbert_odd_q, hilbert_q2, hilbert_real_q, jacobi,
    reciprocity_product, reciprocity_product_q, HilbertConstraintInstance, Place,
};

#[derive(Parser, Debug)]
#[command(
    name = "fermat-quad",
    version,
    about = "Residue sieves and reciprocity checks over Q(sqrt 5) and Q(sqrt 17)"
)]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "FLT_SIEVE_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eliminated exponent classes for one (field, zeta) configuration.
    Sieve {
        #[arg(long)]
        field: i64,
        #[arg(long)]
        zeta: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Use the other root of x^2 - x - m as the image of w.
        #[arg(long)]
        conjugate_omega: bool,
        /// Compare with the published classes and exit 2 on mismatch.
        #[arg(long)]
        check: bool,
    },
    /// Exponent bound from the trace and vanishing branches.
    Bound {
        #[arg(long)]
        field: i64,
        #[arg(long)]
        zeta: u32,
        #[arg(long)]
        check: bool,
    },
    /// Combined congruence statement from both sieves for one field.
    Theorem {
        #[arg(long)]
        field: i64,
    },
    /// Obstructive triples from curve data, with the sieve cross-check.
    Obstruct {
        #[arg(long)]
        field: i64,
        /// JSON-lines curve file; the bundled data is used when omitted.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Bound on the unit and 2-part exponents of u.
        #[arg(long, default_value_t = 12)]
        window: i64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 2 when the cross-check reports a violation.
        #[arg(long)]
        check: bool,
    },
    /// Evaluate a single symbol.
    Symbol {
        #[arg(long, value_enum)]
        eval: SymbolKind,
        /// Required for symbols over K.
        #[arg(long)]
        field: Option<i64>,
        /// First argument: a rational `n` or `n/d` over Q, `x,y` in the w-basis over K.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// Second argument (modulus for jacobi, lambda for genrec).
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        /// `real`, `2` or an odd prime over Q; `real1`, `real2` or a rational prime over K.
        #[arg(long)]
        place: Option<String>,
    },
    /// Trace of Frobenius of a bundled or ingested curve at the primes above p.
    Trace {
        #[arg(long)]
        field: i64,
        #[arg(long)]
        curve: String,
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SymbolKind {
    HilbertQ,
    ReciprocityQ,
    Hilbert,
    Reciprocity,
    Jacobi,
    Genrec,
    Constraint,
}

/// Output of a command: the report text, its config echo, and whether a requested check failed.
struct Outcome {
    report: String,
    config: Value,
    mismatch: bool,
}

fn published_classes(d: i64, r: u32) -> Option<Vec<u64>> {
    match (d, r) {
        (5, 1) | (17, 1) => Some(vec![5, 7]),
        (5, 3) => Some(ELIMINATED_5_3.to_vec()),
        (17, 3) => Some(ELIMINATED_17_3.to_vec()),
        _ => None,
    }
}

fn published_bound(d: i64, r: u32) -> Option<Vec<u64>> {
    match (d, r) {
        (5, 1) | (17, 1) => Some(vec![2, 3]),
        (5, 3) => Some(vec![2, 3, 5]),
        (17, 3) => Some(vec![2, 3, 5, 7]),
        _ => None,
    }
}

fn run_sieve(d: i64, r: u32, conj: bool, exec: &Executor) -> Result<SieveReport> {
    let cfg = SieveConfig::new(d, r)?.with_conjugate_omega(conj);
    Ok(eliminated_classes(&cfg, exec)?)
}

fn load_curves(path: &Option<PathBuf>) -> Result<Vec<CurveRecord>> {
    Ok(match path {
        Some(p) => ingest_curves(p)?,
        None => builtin_curves()?,
    })
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n = BigInt::from_str(n.trim()).with_context(|| format!("bad rational {s:?}"))?;
    let d = BigInt::from_str(d.trim()).with_context(|| format!("bad rational {s:?}"))?;
    if d == BigInt::from(0) || n == BigInt::from(0) {
        bail!("rational arguments must be nonzero: {s:?}");
    }
    Ok(BigRational::new(n, d))
}

fn parse_elem(k: &QuadField, s: &str) -> Result<QInt> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected x,y for an element of K, got {s:?}"))?;
    let x = BigInt::from_str(x.trim()).with_context(|| format!("bad coordinate in {s:?}"))?;
    let y = BigInt::from_str(y.trim()).with_context(|| format!("bad coordinate in {s:?}"))?;
    Ok(QInt::new(x, y, k.d()))
}

fn symbol(
    kind: SymbolKind,
    field: Option<i64>,
    a: &str,
    b: &str,
    place: Option<&str>,
) -> Result<Value> {
    let need_field = || -> Result<QuadField> {
        let d = field.ok_or_else(|| anyhow!("--field is required for {kind:?}"))?;
        Ok(QuadField::new(d)?)
    };
    Ok(match kind {
        SymbolKind::HilbertQ => {
            let (a, b) = (parse_rational(a)?, parse_rational(b)?);
            let place = place.ok_or_else(|| anyhow!("--place is required"))?;
            let v = match place {
                "real" => hilbert_real_q(&a, &b),
                "2" => hilbert_q2(&a, &b),
                p => {
                    let p: u64 = p.parse().with_context(|| format!("bad place {p:?}"))?;
                    if p < 3
                        || !fermat_quad::quadfield::factor_u64(p)
                            .iter()
                            .all(|&(q, e)| q == p && e == 1)
                    {
                        bail!("place must be real, 2 or an odd prime, got {p}");
                    }
                    hilbert_odd_q(&a, &b, p)
                }
            };
            json!({"symbol": "hilbert-q", "place": place, "value": v})
        }
        SymbolKind::ReciprocityQ => {
            let v = reciprocity_product_q(&parse_rational(a)?, &parse_rational(b)?)?;
            json!({"symbol": "reciprocity-q", "value": v})
        }
        SymbolKind::Hilbert => {
            let k = need_field()?;
            let (x, y) = (parse_elem(&k, a)?, parse_elem(&k, b)?);
            if x.is_zero() || y.is_zero() {
                bail!("arguments must be nonzero");
            }
            let place = place.ok_or_else(|| anyhow!("--place is required"))?;
            let places: Vec<Place> = match place {
                "real1" => vec![Place::Real(RealEmbedding::FIRST)],
                "real2" => vec![Place::Real(RealEmbedding::SECOND)],
                p => {
                    let p: u64 = p.parse().with_context(|| format!("bad place {p:?}"))?;
                    k.split_prime(p)?.into_iter().map(Place::finite).collect()
                }
            };
            let values = places
                .iter()
                .map(|pl| Ok(json!({"place": place_name(pl), "value": hilbert_at(&x, &y, pl)?})))
                .collect::<Result<Vec<Value>>>()?;
            json!({"symbol": "hilbert", "d": k.d(), "values": values})
        }
        SymbolKind::Reciprocity => {
            let k = need_field()?;
            let v = reciprocity_product(&k, &parse_elem(&k, a)?, &parse_elem(&k, b)?)?;
            json!({"symbol": "reciprocity", "d": k.d(), "value": v})
        }
        SymbolKind::Jacobi => {
            let k = need_field()?;
            let v = jacobi(&k, &parse_elem(&k, a)?, &parse_elem(&k, b)?)?;
            json!({"symbol": "jacobi", "d": k.d(), "value": v})
        }
        SymbolKind::Genrec => {
            let k = need_field()?;
            let out = genrec_check(&k, &parse_elem(&k, a)?, &parse_elem(&k, b)?)?;
            json!({"symbol": "genrec", "d": k.d(), "outcome": out})
        }
        SymbolKind::Constraint => {
            let k = need_field()?;
            let (x, y) = (parse_elem(&k, a)?, parse_elem(&k, b)?);
            let c = -&(&x + &y);
            let inst = HilbertConstraintInstance::from_triple(&x, &y, &c)?;
            let out = inst.check(&k)?;
            json!({"symbol": "constraint", "d": k.d(), "outcome": out, "product": out.product()})
        }
    })
}

fn place_name(p: &Place) -> String {
    match p {
        Place::Real(e) => format!("real{}", e.index() + 1),
        Place::Odd(q) | Place::Even(q) => q.to_string(),
    }
}

fn execute(cmd: &Command, exec: &Executor) -> Result<Outcome> {
    Ok(match cmd {
        Command::Sieve {
            field,
            zeta,
            format,
            conjugate_omega,
            check,
            ..
        } => {
            let rep = run_sieve(*field, *zeta, *conjugate_omega, exec)?;
            let mismatch = *check
                && published_classes(*field, *zeta).as_deref() != Some(&rep.eliminated_r_star[..]);
            let report = match format {
                Format::Json => canonical_json(&rep)?,
                Format::Csv => residues_csv("r_star", &rep.eliminated_r_star),
            };
            Outcome {
                report,
                config: json!({"field": field, "zeta": zeta, "conjugate_omega": conjugate_omega}),
                mismatch,
            }
        }
        Command::Bound { field, zeta, check } => {
            let rep = run_sieve(*field, *zeta, false, exec)?;
            let mismatch =
                *check && published_bound(*field, *zeta).as_deref() != Some(&rep.bound_primes[..]);
            Outcome {
                report: canonical_json(
                    &json!({"d": field, "r": zeta, "bound_primes": rep.bound_primes}),
                )?,
                config: json!({"field": field, "zeta": zeta}),
                mismatch,
            }
        }
        Command::Theorem { field } => Outcome {
            report: canonical_json(&theorem_report(*field, exec)?)?,
            config: json!({"field": field}),
            mismatch: false,
        },
        Command::Obstruct {
            field,
            curves,
            window,
            check,
            ..
        } => {
            QuadField::new(*field)?;
            if *window < 0 {
                bail!("--window must be nonnegative");
            }
            let recs = load_curves(curves)?;
            if !recs.iter().any(|r| r.d == *field) {
                bail!("no curves over Q(sqrt {field}) in the input");
            }
            let w = Window::new(*window);
            let triples = obstructive_triples(&recs, *field, w, exec)?;
            let sat = saturation(&recs, *field, w, exec)?;
            let reports = vec![
                run_sieve(*field, 1, false, exec)?,
                run_sieve(*field, 3, false, exec)?,
            ];
            let cc = cross_check(&triples, &reports)?;
            let mismatch = *check && !cc.consistent;
            Outcome {
                report: canonical_json(&json!({
                    "d": field,
                    "sources": recs.iter().filter(|r| r.d == *field).map(|r| &r.label).collect::<Vec<_>>(),
                    "triples": triples,
                    "saturation": sat,
                    "cross_check": cc,
                }))?,
                config: json!({"field": field, "window": window, "curves": curves}),
                mismatch,
            }
        }
        Command::Symbol {
            eval,
            field,
            a,
            b,
            place,
        } => Outcome {
            report: canonical_json(&symbol(*eval, *field, a, b, place.as_deref())?)?,
            config: json!({"eval": eval.to_possible_value().map(|v| v.get_name().to_string()), "field": field, "a": a, "b": b, "place": place}),
            mismatch: false,
        },
        Command::Trace {
            field,
            curve,
            prime,
            curves,
        } => {
            let k = QuadField::new(*field)?;
            let recs = load_curves(curves)?;
            let rec = recs
                .iter()
                .find(|r| &r.label == curve && r.d == *field)
                .ok_or_else(|| anyhow!("no curve {curve:?} over Q(sqrt {field})"))?;
            let traces = k
                .split_prime(*prime)?
                .iter()
                .map(|p| Ok(TraceRecord::new(p, rec.curve.trace_at(p)?)))
                .collect::<Result<Vec<_>>>()?;
            Outcome {
                report: canonical_json(&json!({"label": curve, "d": field, "traces": traces}))?,
                config: json!({"field": field, "curve": curve, "prime": prime}),
                mismatch: false,
            }
        }
        Command::Selftest => {
            let results = acceptance::run_all(exec);
            for r in &results {
                eprintln!("{}", r.line());
            }
            Outcome {
                report: canonical_json(&results)?,
                config: json!({}),
                mismatch: results.iter().any(|r| !r.passed),
            }
        }
    })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sieve { .. } => "sieve",
        Command::Bound { .. } => "bound",
        Command::Theorem { .. } => "theorem",
        Command::Obstruct { .. } => "obstruct",
        Command::Symbol { .. } => "symbol",
        Command::Trace { .. } => "trace",
        Command::Selftest => "selftest",
    }
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Sieve { out, .. } | Command::Obstruct { out, .. } => out.as_ref(),
        _ => None,
    }
}

fn run(cli: Cli) -> Result<bool> {
    let exec = Executor::new(cli.jobs)?;
    let start = Instant::now();
    let outcome = execute(&cli.command, &exec)?;
    let elapsed = start.elapsed().as_millis();
    match out_path(&cli.command) {
        Some(p) => std::fs::write(p, format!("{}\n", outcome.report))
            .with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{}", outcome.report).and_then(|_| out.flush()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    let manifest = RunManifest::new(
        command_name(&cli.command),
        outcome.config,
        exec.jobs(),
        elapsed,
        &outcome.report,
    );
    eprintln!("{}", canonical_json(&manifest)?);
    Ok(!outcome.mismatch)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
