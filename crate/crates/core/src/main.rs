use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::BoolishValueParser;
use clap::{Parser, Subcommand, ValueEnum};

use collatz_sieve::checkpoint::{Checkpoint, CsvSink, PersistingObserver};
use collatz_sieve::coverage::{
    brute_force_density, format_fraction, format_percent, BRUTE_FORCE_CAP,
};
use collatz_sieve::oracle::{self, VisitedSet, DEFAULT_STEP_CAP, DEFAULT_VISITED_LIMIT};
use collatz_sieve::report::{self, TableFormat, PERCENT_PLACES};
use collatz_sieve::search::{self, CheckOptions};
use collatz_sieve::{
    analyze_moduli, delta_report, CoverageLedger, Error, PatternClass, ResidueClass, Result,
    Search, SearchConfig, SuccessRecord,
};
use num_traits::ToPrimitive;

#[derive(Parser)]
#[command(
    name = "collatz-sieve",
    version,
    about = "Congruence-class search for the 3n+1 problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => TableFormat::Text,
            Format::Csv => TableFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Certify classes modulus by modulus and track coverage.
    Search {
        #[arg(long)]
        max_modulus: u64,
        /// Only search moduli of the form 2^t*3^s.
        #[arg(long = "filter-3smooth", value_parser = BoolishValueParser::new(),
              default_value = "off", num_args = 0..=1, default_missing_value = "on")]
        filter_3smooth: bool,
        /// Neither check nor register classes that are already covered.
        #[arg(long)]
        skip_covered: bool,
        /// Only join into classes whose modulus is 2^t*3^s.
        #[arg(long)]
        join_smooth_only: bool,
        #[arg(long)]
        step_cap: Option<usize>,
        /// Verify every record for k = 1..=N (0 = off).
        #[arg(long, default_value_t = 0)]
        k_verify: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from --checkpoint if it exists.
        #[arg(long, requires = "checkpoint")]
        resume: bool,
        /// Results CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Print the completion-change tables and the results table.
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check the moduli laws on the records of a checkpoint.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Modified stopping times of given numbers and the record over a range.
    Stoptimes {
        #[arg(long = "n")]
        n: Vec<u64>,
        /// Report the longest modified stopping time below this bound.
        #[arg(long)]
        range: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: u64,
        #[arg(long, default_value_t = DEFAULT_VISITED_LIMIT)]
        max_visited: usize,
    },
    /// Check the certificate of class b*k - c on its first K members.
    Verify {
        b: u64,
        c: u64,
        #[arg(long = "k", default_value_t = 1000)]
        k: u64,
        /// Take the certificate from this checkpoint when it is there.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Exact density of a set of classes.
    Coverage {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Residue class as modulus:residue.
        #[arg(long)]
        residue: Vec<String>,
        /// Pattern b*k - c as b:c.
        #[arg(long)]
        pattern: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Search {
            max_modulus,
            filter_3smooth,
            skip_covered,
            join_smooth_only,
            step_cap,
            k_verify,
            checkpoint,
            resume,
            out,
            threads,
        } => {
            let config = SearchConfig {
                max_modulus,
                filter_3smooth,
                skip_covered,
                join_smooth_only,
                step_cap,
                k_verify,
                threads,
            };
            cmd_search(config, checkpoint.as_deref(), resume, out.as_deref())
        }
        Command::Report { checkpoint, format } => cmd_report(&checkpoint, format.into()),
        Command::Analyze { checkpoint } => cmd_analyze(&checkpoint),
        Command::Stoptimes {
            n,
            range,
            step_cap,
            max_visited,
        } => cmd_stoptimes(n, range, step_cap, max_visited),
        Command::Verify {
            b,
            c,
            k,
            checkpoint,
        } => cmd_verify(b, c, k, checkpoint.as_deref()),
        Command::Coverage {
            checkpoint,
            residue,
            pattern,
        } => cmd_coverage(checkpoint.as_deref(), &residue, &pattern),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_search(
    config: SearchConfig,
    checkpoint: Option<&Path>,
    resume: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let mut search = match checkpoint.filter(|p| resume && p.exists()) {
        Some(path) => {
            let saved = Checkpoint::load(path)?;
            if !saved.config.compatible_with(&config) {
                return Err(Error::Config(
                    "checkpoint was written with different search settings".into(),
                ));
            }
            eprintln!("resuming after modulus {}", saved.frontier_modulus);
            Search::resume(config, saved.resume_state()?)?
        }
        None => Search::new(config)?,
    };

    let csv = match out {
        Some(path) => {
            let mut sink = CsvSink::new(BufWriter::new(File::create(path)?))?;
            for record in search.records() {
                sink.write(record)?;
            }
            sink.flush()?;
            Some(sink)
        }
        None => None,
    };
    let mut observer = PersistingObserver {
        csv,
        checkpoint_path: checkpoint.map(Path::to_path_buf),
    };
    let summary = search.run(&mut observer)?;
    if let Some(path) = checkpoint {
        Checkpoint::capture(&search).save(path)?;
    }

    let ledger = search.ledger();
    println!("records: {}", summary.records);
    println!(
        "density: {}% ({})",
        format_percent(&summary.final_density, PERCENT_PLACES),
        format_fraction(&summary.final_density)
    );
    println!(
        "lcm: {} (contributing moduli: {})",
        ledger.lcm_of_moduli(),
        ledger.contributing_lcm()
    );
    println!(
        "classes checked: {}, redundant: {}, skipped as covered: {}",
        summary.counts.classes_checked, summary.counts.redundant, summary.counts.skipped_covered
    );
    if search.config().skip_covered {
        println!(
            "note: --skip-covered was on; covered classes were not registered as join targets"
        );
    }
    eprintln!(
        "processed {} moduli in {:.3?}{}",
        summary.moduli_processed,
        summary.elapsed,
        summary
            .slowest_modulus
            .map(|(b, d)| format!(", slowest modulus {b} ({d:.3?})"))
            .unwrap_or_default()
    );
    Ok(0)
}

fn cmd_report(path: &Path, format: TableFormat) -> Result<u8> {
    let cp = Checkpoint::load(path)?;
    let deltas = delta_report(&cp.density_checkpoints);
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", report::render_delta_tables(&deltas, format))?;
    writeln!(stdout)?;
    write!(
        stdout,
        "{}",
        report::render_results_table(&cp.records()?, format)
    )?;
    Ok(0)
}

fn cmd_analyze(path: &Path) -> Result<u8> {
    let cp = Checkpoint::load(path)?;
    let report = analyze_moduli(&cp.records()?);
    print!("{}", report::render_moduli_report(&report));
    Ok(0)
}

fn cmd_stoptimes(
    mut ns: Vec<u64>,
    range: Option<u64>,
    step_cap: u64,
    max_visited: usize,
) -> Result<u8> {
    ns.sort_unstable();
    ns.dedup();
    let mut visited = VisitedSet::new(max_visited, step_cap);
    let mut worst = 0u8;
    if !ns.is_empty() {
        println!(
            "{:>10} {:>8} {:>12} {:>10} {:>9} {:>9} {:>9}",
            "n", "index", "join_value", "joins", "halvings", "odd", "stop"
        );
    }
    for n in ns {
        if n < 2 {
            return Err(Error::Config("stoptimes needs n ≥ 2".into()));
        }
        let outcome = visited
            .absorb_until(n)
            .and_then(|_| visited.query(n))
            .and_then(|r| Ok((r, oracle::stopping_time(n, step_cap)?)));
        match outcome {
            Ok((r, stop)) => println!(
                "{:>10} {:>8} {:>12} {:>10} {:>9} {:>9} {:>9}   (2^{} = {})",
                r.n,
                r.modified_stop_index,
                r.join_value,
                r.joined_start,
                r.divisions_by_2,
                r.odd_steps(),
                stop,
                r.divisions_by_2,
                num_bigint::BigUint::from(1u32) << r.divisions_by_2
            ),
            Err(e @ (Error::CapBreach { .. } | Error::Overflow(_) | Error::MemoryGuard(_))) => {
                println!("{n:>10} {e}");
                worst = worst.max(e.exit_code() as u8);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(range) = range {
        let r = oracle::longest_modified_stop(range, max_visited, step_cap)?;
        println!(
            "longest below {range}: n = {} at element {} (joins {} at {})",
            r.n, r.modified_stop_index, r.joined_start, r.join_value
        );
    }
    Ok(worst)
}

fn cmd_verify(b: u64, c: u64, k: u64, checkpoint: Option<&Path>) -> Result<u8> {
    let class = PatternClass::new(b, c)?;
    let mut record: Option<SuccessRecord> = None;
    if let Some(path) = checkpoint {
        record = Checkpoint::load(path)?
            .records()?
            .into_iter()
            .find(|r| r.class == class);
    }
    if record.is_none() {
        let options = CheckOptions::default();
        let registry = search::registry_below(b, &options)?;
        record = search::check_class(class, &registry, &options)?.record;
    }
    let Some(record) = record else {
        println!("{class}: no certificate exists at modulus {b}");
        return Ok(1);
    };
    let report = oracle::verify_success_record(&record, k)?;
    match report.first_violation {
        None => {
            println!("{record}: verified for k = 1..={k}");
            Ok(0)
        }
        Some(bad) => {
            println!("{record}: FAILS at k = {bad}");
            Ok(1)
        }
    }
}

fn parse_pattern(s: &str) -> Result<PatternClass> {
    let bad = || Error::Config(format!("expected b:c, got {s:?}"));
    let (b, c) = s.split_once(':').ok_or_else(bad)?;
    PatternClass::new(
        b.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    )
}

fn cmd_coverage(checkpoint: Option<&Path>, residues: &[String], patterns: &[String]) -> Result<u8> {
    let mut classes: Vec<ResidueClass> = Vec::new();
    if let Some(path) = checkpoint {
        classes.extend(Checkpoint::load(path)?.ledger_classes()?);
    }
    for r in residues {
        classes.push(r.parse()?);
    }
    for p in patterns {
        classes.push(ResidueClass::from_pattern(&parse_pattern(p)?));
    }
    let mut ledger = CoverageLedger::new();
    for class in &classes {
        ledger.add_class(class);
    }
    let density = ledger.density();
    println!(
        "density: {}% ({})",
        format_percent(density, PERCENT_PLACES),
        format_fraction(density)
    );
    println!("stored classes: {}", ledger.classes().len());
    let lcm = classes
        .iter()
        .fold(num_bigint::BigUint::from(1u32), |acc, c| {
            num_integer::Integer::lcm(&acc, c.modulus())
        });
    println!("lcm: {lcm}");
    match lcm.to_u64().filter(|&l| l <= BRUTE_FORCE_CAP) {
        Some(l) => {
            let brute = brute_force_density(&classes, l)?;
            let agree = &brute == density;
            println!(
                "brute force over {l} residues: {} ({})",
                format_fraction(&brute),
                if agree { "agrees" } else { "DISAGREES" }
            );
            Ok(if agree { 0 } else { 1 })
        }
        None => {
            println!("brute force skipped: lcm above {BRUTE_FORCE_CAP}");
            Ok(0)
        }
    }
}
