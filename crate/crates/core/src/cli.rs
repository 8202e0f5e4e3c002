//! Command-line front end. Every subcommand reads JSON artifacts, calls one
//! library operation and writes JSON with sorted keys.
//!
//! Exit status: 0 pass, 1 invariant violation, 2 degraded or budget
//! exhausted, 64 and up for usage and IO errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::codec::{self, PartialFn, RhoIndex};
use crate::diag::{self, PipelineConfig, Verdict};
use crate::extender::{self, AtomShuffle, DemandSpec, ExtendError, Permutation, SearchParams};
use crate::finset::{self, Family, Universe};
use crate::generic::{self, Demand, Eta, GenericError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_DEGRADED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "omegalab", version, about = "Finite experiments on independent families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the bit family A_j = {n : bit j of n is 1} over [0,N).
    GenFamily {
        #[arg(long)]
        k: usize,
        #[arg(long = "N", alias = "n")]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every combination up to depth d has at least t elements.
    CheckIndep {
        #[arg(long)]
        family: PathBuf,
        #[arg(long = "t")]
        t: usize,
        #[arg(long = "d")]
        d: usize,
    },
    /// Check that every pair of disjoint sets of size at most s is separated.
    CheckSaturation {
        #[arg(long)]
        family: PathBuf,
        #[arg(long = "s")]
        s: usize,
    },
    /// Print the m-th finite partial function.
    Rho { m: u64 },
    /// Print the index of a partial function given as JSON (file or literal).
    RhoIndex {
        #[arg(long = "fn", value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(conflicts_with = "input")]
        json: Option<String>,
    },
    /// Extend a demand (f, g) to a permutation; with --t, search for a
    /// shuffle whose orbit closure stays independent.
    ExtendPerm {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        demand: PathBuf,
        #[arg(long = "t", requires = "d")]
        t: Option<usize>,
        #[arg(long = "d")]
        d: Option<usize>,
        #[arg(long = "L", default_value_t = 1)]
        l: usize,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Close a family under pi^l for |l| <= L.
    CloseOrbit {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        perm: PathBuf,
        #[arg(long = "L")]
        l: usize,
    },
    /// Build one new set meeting a demand schedule.
    BuildGeneric {
        #[arg(long)]
        families: PathBuf,
        #[arg(long)]
        eta: PathBuf,
        /// `auto:q=Q` or a path to a JSON list of demands.
        #[arg(long)]
        demands: String,
        /// Depth cap for the auto schedule (default: all prior sets).
        #[arg(long = "d")]
        d: Option<usize>,
        #[arg(long)]
        search_bound: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every combination is dense among the partial functions.
    VerifyStar {
        #[arg(long)]
        families: PathBuf,
        #[arg(long)]
        probe_bound: u64,
        #[arg(long)]
        search_bound: u64,
        #[arg(long = "d")]
        d: Option<usize>,
    },
    /// Check the matching property of one set against an eta.
    VerifyStarstar {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        eta: PathBuf,
    },
    /// Run the full build-and-sample experiment.
    DiagExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type CliResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_PASS
                }
                _ => EXIT_USAGE,
            };
        }
    };
    configure_threads();
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn configure_threads() {
    let threads = std::env::var("OMEGALAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

/// A single family, or a list of families over the same universe.
fn read_families(path: &Path) -> Result<Family, Failure> {
    let value: serde_json::Value = read_json(path)?;
    let data = |e: String| Failure::new(EXIT_DATA, format!("{}: {e}", path.display()));
    if value.is_array() {
        let parts: Vec<Family> = serde_json::from_value(value).map_err(|e| data(e.to_string()))?;
        let universe = parts
            .first()
            .map(Family::universe)
            .ok_or_else(|| data("empty list of families".into()))?;
        Family::concat(universe, &parts).map_err(|e| data(e.to_string()))
    } else {
        serde_json::from_value(value).map_err(|e| data(e.to_string()))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("plain data");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", p.display()))),
        None => writeln!(out, "{text}").map_err(|e| Failure::new(EXIT_IO, e.to_string())),
    }
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_DATA, e.to_string())
}

fn pass_or(ok: bool, code: i32) -> i32 {
    if ok {
        EXIT_PASS
    } else {
        code
    }
}

fn extend_code(e: &ExtendError) -> i32 {
    match e {
        ExtendError::BudgetExhausted { .. } | ExtendError::CardinalityMismatch { .. } => {
            EXIT_DEGRADED
        }
        ExtendError::IncompatiblePair { .. } | ExtendError::InducedMapNotPermutation { .. } => {
            EXIT_VIOLATION
        }
        _ => EXIT_DATA,
    }
}

fn generic_code(e: &GenericError) -> i32 {
    match e {
        GenericError::SearchExhausted { .. } | GenericError::GridOverflow { .. } => EXIT_DEGRADED,
        _ => EXIT_DATA,
    }
}

/// `{"entries": [[a,b,i,v],...]}` on one line.
pub fn format_partial_fn(f: &PartialFn) -> String {
    let entries: Vec<String> = f
        .iter()
        .map(|(p, v)| format!("[{},{},{},{}]", p.a, p.b, u8::from(p.i), v))
        .collect();
    format!("{{\"entries\": [{}]}}", entries.join(","))
}

fn parse_schedule(spec: &str, prior_len: usize, depth: Option<usize>) -> Result<Vec<Demand>, Failure> {
    if let Some(rest) = spec.strip_prefix("auto:") {
        let q = rest
            .strip_prefix("q=")
            .and_then(|q| q.parse::<u64>().ok())
            .ok_or_else(|| Failure::new(EXIT_USAGE, format!("bad schedule `{spec}`, expected auto:q=Q")))?;
        return Ok(generic::auto_schedule(prior_len, depth.unwrap_or(prior_len), q));
    }
    read_json(Path::new(spec))
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match command {
        Command::GenFamily { k, n, out: path } => {
            let universe = Universe::new(n).map_err(data_err)?;
            let family = finset::bit_family(k, universe).map_err(data_err)?;
            emit(out, path.as_deref(), &to_json(&family))?;
            Ok(EXIT_PASS)
        }
        Command::CheckIndep { family, t, d } => {
            let family = read_families(&family)?;
            let report = finset::is_independent(&family, t, d).map_err(data_err)?;
            emit(out, None, &to_json(&report))?;
            if let Some(spec) = &report.failing {
                let _ = writeln!(err, "failing combination: {spec}");
            }
            Ok(pass_or(report.ok, EXIT_VIOLATION))
        }
        Command::CheckSaturation { family, s } => {
            let family = read_families(&family)?;
            let report = finset::is_saturated(&family, s);
            emit(out, None, &to_json(&report))?;
            Ok(pass_or(report.ok, EXIT_VIOLATION))
        }
        Command::Rho { m } => {
            emit(out, None, &format_partial_fn(&codec::rho(RhoIndex(m))))?;
            Ok(EXIT_PASS)
        }
        Command::RhoIndex { input, json } => {
            let f: PartialFn = match (input, json) {
                (Some(path), _) => read_json(&path)?,
                (None, Some(text)) => serde_json::from_str(&text).map_err(data_err)?,
                (None, None) => {
                    return Err(Failure::new(EXIT_USAGE, "give a PartialFn as --fn PATH or inline JSON"))
                }
            };
            let index = codec::rho_index(&f).map_err(|e| Failure::new(EXIT_DEGRADED, e.to_string()))?;
            emit(out, None, &index.0.to_string())?;
            Ok(EXIT_PASS)
        }
        Command::ExtendPerm {
            family,
            demand,
            t,
            d,
            l,
            budget,
            seed,
        } => {
            let family = read_families(&family)?;
            let demand: DemandSpec = read_json(&demand)?;
            let (f, g) = demand.resolve(&family).map_err(data_err)?;
            let fail = |e: ExtendError| Failure::new(extend_code(&e), e.to_string());
            match (t, d) {
                (Some(threshold), Some(depth)) => {
                    let params = SearchParams {
                        threshold,
                        depth,
                        radius: l,
                        budget,
                        seed,
                    };
                    let good = extender::find_good_c(&f, &g, &family, &params).map_err(fail)?;
                    emit(out, None, &to_json(&good))?;
                }
                _ => {
                    let (_, sizes) = extender::shuffle_sizes(&f, &g, &family).map_err(fail)?;
                    let pi = extender::build_pi(&f, &g, &family, &AtomShuffle::identity(&sizes))
                        .map_err(fail)?;
                    emit(out, None, &to_json(&pi))?;
                }
            }
            Ok(EXIT_PASS)
        }
        Command::CloseOrbit { family, perm, l } => {
            let family = read_families(&family)?;
            let pi: Permutation = read_json(&perm)?;
            if pi.len() != family.universe().size() {
                return Err(data_err(format!(
                    "permutation has {} points, family universe is {}",
                    pi.len(),
                    family.universe().size()
                )));
            }
            emit(out, None, &to_json(&extender::orbit_closure(&family, &pi, l)))?;
            Ok(EXIT_PASS)
        }
        Command::BuildGeneric {
            families,
            eta,
            demands,
            d,
            search_bound,
            out: path,
        } => {
            let prior = read_families(&families)?;
            let eta: Eta = read_json(&eta)?;
            let schedule = parse_schedule(&demands, prior.len(), d)?;
            for demand in &schedule {
                demand.combo.validate(prior.len()).map_err(data_err)?;
            }
            match generic::build_generic(&prior, &eta, &schedule, search_bound) {
                Ok(run) => {
                    emit(out, path.as_deref(), &to_json(&run))?;
                    Ok(EXIT_PASS)
                }
                Err(failure) => {
                    emit(out, path.as_deref(), &to_json(&failure.partial))?;
                    let _ = writeln!(err, "degraded: {failure}");
                    Ok(generic_code(&failure.error))
                }
            }
        }
        Command::VerifyStar {
            families,
            probe_bound,
            search_bound,
            d,
        } => {
            let family = read_families(&families)?;
            let depth = d.unwrap_or(family.len());
            let report = generic::check_star(&family, probe_bound, search_bound, depth).map_err(data_err)?;
            emit(out, None, &to_json(&report))?;
            Ok(pass_or(report.ok, EXIT_VIOLATION))
        }
        Command::VerifyStarstar { family, index, eta } => {
            let family = read_families(&family)?;
            let eta: Eta = read_json(&eta)?;
            let set = family
                .get(index)
                .ok_or_else(|| data_err(format!("family has no set {index}")))?;
            let report = generic::check_star_star(set, &eta)
                .map_err(|e| Failure::new(generic_code(&e), e.to_string()))?;
            emit(out, None, &to_json(&report))?;
            Ok(pass_or(report.ok, EXIT_VIOLATION))
        }
        Command::DiagExperiment { config, out: path } => {
            let config: PipelineConfig = read_json(&config)?;
            config.validate().map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            let report = diag::run_pipeline(&config).map_err(data_err)?;
            let json = report.to_json();
            if let Some(p) = &path {
                emit(out, Some(p), &json)?;
            }
            let s = &report.summary;
            let verdict = report.verdict();
            let shadow = if s.violations == 0 { "PASS" } else { "FAIL" };
            let mut summary = format!(
                "theorem-shadow: {shadow} (π samples: {}, violations: {})\n",
                s.samples, s.violations
            );
            summary += &format!("pairs checked: {}\n", s.pairs_checked);
            for a in &report.alphas {
                summary += &format!(
                    "A{}: {} elements, {}/{} demands met{}\n",
                    a.index,
                    a.elements.len(),
                    a.demands_met,
                    a.schedule_len,
                    a.error.as_ref().map(|e| format!(" (degraded: {e})")).unwrap_or_default()
                );
            }
            if let Some(r) = &report.independence {
                summary += &format!("independence: {}", if r.ok { "PASS" } else { "FAIL" });
                if let Some(spec) = &r.failing {
                    summary += &format!(" (failing combination {spec}, size {})", r.size_found);
                }
                summary.push('\n');
            }
            if let Some(r) = &report.star {
                summary += &format!("density: {}\n", if r.ok { "PASS" } else { "FAIL" });
            }
            summary += &format!("verdict: {verdict:?}");
            emit(out, None, &summary)?;
            Ok(match verdict {
                Verdict::Pass => EXIT_PASS,
                Verdict::Violation | Verdict::CheckFailed => EXIT_VIOLATION,
                Verdict::Degraded => EXIT_DEGRADED,
            })
        }
    }
}
