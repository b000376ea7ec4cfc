//! Command-line front end.
//!
//! Subcommands bind TOML configs to the solve pipelines and the simulation
//! harness. Exit codes: 0 on success, 1 on configuration errors, 2 on
//! infeasibility or search non-termination. All randomness derives from
//! `--seed`, so outputs are byte-identical across runs and worker counts;
//! `ROBUST_CROWDSENSE_THREADS` caps the worker pool (0 or unset = auto).

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_crowdsense::config::{parse_experiment, parse_scenario, ExperimentMode, ExperimentSetup};
use robust_crowdsense::error::Error;
use robust_crowdsense::hard::{certify_gap, solve_pa2, verify_pa1};
use robust_crowdsense::model::{total_payment, RobustnessSpec, Scenario};
use robust_crowdsense::sim::{
    format_metric, run_gap_hard, run_gap_soft, run_table1, write_gap_csv, write_table1_csv,
    GapSweep, Table1, SETTING1_ALPHA, SETTING2_ALPHA,
};
use robust_crowdsense::soft::{
    algorithm1, closed_form_policy, theorem5_certificate, theorem6_certificate, verify_pb1,
    SoftSearchParams,
};

use output::{print_kv, print_policy, write_json, HardSolution, SoftSolution, SpecialCaseSolution};

#[derive(Parser)]
#[command(
    name = "robust-crowdsense",
    version,
    about = "Minimum-payment bidding policies under probabilistic robustness constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file (required by the solve commands; the
    /// experiment commands default to the standard week-long setup)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for solution and CSV files
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed (scenario generation and Monte Carlo substreams)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the Monte Carlo sample budget of the soft-case search
    #[arg(long, global = true)]
    mc_samples: Option<u64>,

    /// Override the replication count of the experiment commands
    #[arg(long, global = true)]
    replications: Option<usize>,

    /// Print policy matrices along with the summaries
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the joint-probability (hard) problem and certify the gap
    SolveHard,
    /// Run the per-location binary search for the soft problem
    SolveSoft,
    /// Closed-form constant policy for time-independent soft instances
    SpecialCase,
    /// Reproduce the full simulation study (success table + gap sweeps)
    Simulate,
    /// Success-probability table over the hard tolerance grid
    Table1,
    /// Payment-gap sweep for the configured mode
    Sweep,
}

fn main() -> ExitCode {
    // die quietly when stdout is a closed pipe (e.g. `... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    init_thread_pool();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(feature = "parallel")]
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("ROBUST_CROWDSENSE_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => eprintln!("warning: ignoring unparseable ROBUST_CROWDSENSE_THREADS={raw:?}"),
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn init_thread_pool() {}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) | Error::NonTermination { .. } => 2,
        _ => 1,
    }
}

fn read_config(cli: &Cli) -> Result<String, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand requires --config <file>".into()))?;
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(cli: &Cli) -> Result<(Scenario, SoftSearchParams), Error> {
    let text = read_config(cli)?;
    let (scenario, mut search) = parse_scenario(&text, cli.seed.unwrap_or(0))?;
    if let Some(n) = cli.mc_samples {
        search.mc_samples = n;
    }
    Ok((scenario, search))
}

fn load_experiment(cli: &Cli, default_mode: ExperimentMode) -> Result<ExperimentSetup, Error> {
    let mut setup = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_experiment(&text)?
        }
        None => {
            let mode_line = match default_mode {
                ExperimentMode::Hard => "mode = \"hard\"",
                ExperimentMode::Soft => "mode = \"soft\"",
            };
            parse_experiment(mode_line)?
        }
    };
    if let Some(seed) = cli.seed {
        setup.config.master_seed = seed;
    }
    if let Some(reps) = cli.replications {
        setup.config.replications = reps;
    }
    if let Some(n) = cli.mc_samples {
        setup.config.search.mc_samples = n;
    }
    setup.config.validate()?;
    Ok(setup)
}

fn write_csv_file<F>(dir: &Path, name: &str, write: F) -> Result<PathBuf, Error>
where
    F: FnOnce(&mut fs::File) -> std::io::Result<()>,
{
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut file = fs::File::create(&path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    write(&mut file).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match cli.command {
        Command::SolveHard => solve_hard_cmd(cli),
        Command::SolveSoft => solve_soft_cmd(cli),
        Command::SpecialCase => special_case_cmd(cli),
        Command::Table1 => {
            let setup = load_experiment(cli, ExperimentMode::Hard)?;
            if setup.mode != ExperimentMode::Hard {
                return Err(Error::Config(
                    "table1 needs mode = \"hard\" (joint success probabilities)".into(),
                ));
            }
            let table = run_table1(&setup.config)?;
            let path = write_csv_file(&cli.out, "table1.csv", |f| write_table1_csv(&table, f))?;
            print_table1(&table);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep => {
            let setup = load_experiment(cli, ExperimentMode::Hard)?;
            match setup.mode {
                ExperimentMode::Hard => {
                    let sweep = run_gap_hard(&setup.config)?;
                    let path =
                        write_csv_file(&cli.out, "gap_hard.csv", |f| write_gap_csv(&sweep, f))?;
                    print_sweep("hard-case time-average payment gap", &sweep);
                    println!("wrote {}", path.display());
                }
                ExperimentMode::Soft => {
                    let sweep = run_gap_soft(&setup.config, setup.alpha_interval)?;
                    let name = format!("gap_soft_{}.csv", setup.label);
                    let path = write_csv_file(&cli.out, &name, |f| write_gap_csv(&sweep, f))?;
                    print_sweep("soft-case time-average payment gap", &sweep);
                    println!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Simulate => {
            let setup = load_experiment(cli, ExperimentMode::Hard)?;
            let cfg = &setup.config;

            let table = run_table1(cfg)?;
            let p1 = write_csv_file(&cli.out, "table1.csv", |f| write_table1_csv(&table, f))?;
            print_table1(&table);

            let hard = run_gap_hard(cfg)?;
            let p2 = write_csv_file(&cli.out, "gap_hard.csv", |f| write_gap_csv(&hard, f))?;

            let soft1 = run_gap_soft(cfg, SETTING1_ALPHA)?;
            let p3 =
                write_csv_file(&cli.out, "gap_soft_setting1.csv", |f| write_gap_csv(&soft1, f))?;

            let soft2 = run_gap_soft(cfg, SETTING2_ALPHA)?;
            let p4 =
                write_csv_file(&cli.out, "gap_soft_setting2.csv", |f| write_gap_csv(&soft2, f))?;

            for p in [p1, p2, p3, p4] {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn solve_hard_cmd(cli: &Cli) -> Result<(), Error> {
    let (scenario, _) = load_scenario(cli)?;
    let epsilon = scenario
        .hard_epsilon()
        .ok_or_else(|| Error::Config("solve-hard needs spec.kind = \"hard\"".into()))?;
    let outcome = solve_pa2(&scenario)?;
    let certificate = certify_gap(&outcome, &scenario)?;
    let pa1 = verify_pa1(&outcome.policy, epsilon);
    let record = HardSolution {
        problem: "hard",
        t: scenario.t(),
        l: scenario.l(),
        epsilon,
        objective: outcome.objective,
        lambda: outcome.dual(),
        policy: outcome.policy.rows(),
        bids: outcome.policy.bid_rows(&scenario)?,
        certificate,
        pa1,
        solver: outcome.stats.clone(),
    };
    write_json(&cli.out, &record)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", cli.out.display())))?;

    print_kv(&[
        ("problem", format!("hard (T={}, L={})", scenario.t(), scenario.l())),
        ("epsilon", format_metric(epsilon)),
        ("objective F", format_metric(record.objective)),
        ("lambda", format_metric(record.lambda)),
        (
            "gap certificate",
            format!("{} (theorem3-min)", format_metric(certificate.bound)),
        ),
        (
            "joint feasibility",
            format!("{} (slack {})", pa1.feasible, format_metric(pa1.slack)),
        ),
    ]);
    if cli.verbose {
        print_policy("policy (rows = time slots):", &record.policy);
        print_policy("bids:", &record.bids);
    }
    println!("wrote {}", cli.out.join("solution.json").display());
    Ok(())
}

fn solve_soft_cmd(cli: &Cli) -> Result<(), Error> {
    let (scenario, search) = load_scenario(cli)?;
    let (alpha, beta) = match scenario.spec() {
        RobustnessSpec::Soft { alpha, beta } => (alpha.clone(), *beta),
        RobustnessSpec::Hard { .. } => {
            return Err(Error::Config("solve-soft needs spec.kind = \"soft\"".into()))
        }
    };
    let outcome = algorithm1(&scenario, &search)?;
    let certificate = theorem5_certificate(&scenario)?;
    let pb1 = verify_pb1(&outcome.policy, &scenario)?;
    let record = SoftSolution {
        problem: "soft",
        t: scenario.t(),
        l: scenario.l(),
        beta,
        alpha,
        objective: outcome.objective,
        policy: outcome.policy.rows(),
        bids: outcome.policy.bid_rows(&scenario)?,
        locations: outcome.per_location.clone(),
        certificate,
        pb1: pb1.clone(),
    };
    write_json(&cli.out, &record)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", cli.out.display())))?;

    print_kv(&[
        ("problem", format!("soft (T={}, L={})", scenario.t(), scenario.l())),
        ("beta", format_metric(beta)),
        ("objective F", format_metric(record.objective)),
        (
            "gap certificate",
            format!("{} (theorem5)", format_metric(record.certificate.bound)),
        ),
    ]);
    println!("location  gamma       q_est     exact_tail  slack      iters  escalations");
    for (rec, chk) in record.locations.iter().zip(&pb1) {
        println!(
            "{:<8}  {:<10.5}  {:<8.5}  {:<10.6}  {:<9}  {:<5}  {}",
            rec.location,
            rec.gamma_final,
            rec.q_estimate,
            rec.exact_tail_check,
            format_metric(chk.slack),
            rec.bisect_iters,
            rec.escalations
        );
    }
    if cli.verbose {
        print_policy("policy (rows = time slots):", &record.policy);
        print_policy("bids:", &record.bids);
    }
    println!("wrote {}", cli.out.join("solution.json").display());
    Ok(())
}

fn special_case_cmd(cli: &Cli) -> Result<(), Error> {
    let (scenario, _) = load_scenario(cli)?;
    let (alpha, beta) = match scenario.spec() {
        RobustnessSpec::Soft { alpha, beta } => (alpha.clone(), *beta),
        RobustnessSpec::Hard { .. } => {
            return Err(Error::Config("special-case needs spec.kind = \"soft\"".into()))
        }
    };
    let (policy, rho) = closed_form_policy(&scenario)?;
    let certificate = theorem6_certificate(&scenario)?;
    let pb1 = verify_pb1(&policy, &scenario)?;
    let objective = total_payment(&policy, &scenario)?;
    let record = SpecialCaseSolution {
        problem: "special-case",
        t: scenario.t(),
        l: scenario.l(),
        beta,
        alpha,
        rho: rho.clone(),
        clamped: certificate.clamped.clone(),
        objective,
        policy: policy.rows(),
        bids: policy.bid_rows(&scenario)?,
        certificate,
        pb1: pb1.clone(),
    };
    write_json(&cli.out, &record)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", cli.out.display())))?;

    print_kv(&[
        ("problem", format!("special-case (T={}, L={})", scenario.t(), scenario.l())),
        ("beta", format_metric(beta)),
        ("objective F", format_metric(objective)),
        (
            "gap certificate",
            format!("{} (theorem6)", format_metric(record.certificate.bound)),
        ),
    ]);
    println!("location  rho        clamped  exact_tail  slack");
    for (l, chk) in pb1.iter().enumerate() {
        println!(
            "{:<8}  {:<9.6}  {:<7}  {:<10.6}  {}",
            l,
            rho[l],
            record.clamped[l],
            chk.exact_tail,
            format_metric(chk.slack)
        );
    }
    if cli.verbose {
        print_policy("policy (rows = time slots):", &record.policy);
        print_policy("bids:", &record.bids);
    }
    println!("wrote {}", cli.out.join("solution.json").display());
    Ok(())
}

fn print_table1(table: &Table1) {
    println!("success probability vs. requirement (replication means)");
    println!(
        "{:<18} {:<12} {:<12} {:<12} {:<12}",
        "1-epsilon", "our", "lower_bound", "uniform", "random"
    );
    for row in &table.rows {
        println!(
            "{:<18} {:<12} {:<12} {:<12} {:<12}",
            format_metric(row.one_minus_epsilon),
            format_metric(row.our),
            format_metric(row.lower_bound),
            format_metric(row.uniform),
            format_metric(row.random)
        );
    }
}

fn print_sweep(title: &str, sweep: &GapSweep) {
    println!("{title}");
    println!("{:<12} {:<12} {:<14} {:<12}", "requirement", "policy", "mean_gap", "stderr");
    for row in &sweep.rows {
        println!(
            "{:<12} {:<12} {:<14} {:<12}",
            format_metric(row.requirement),
            row.policy.as_str(),
            format_metric(row.mean_gap),
            format_metric(row.stderr)
        );
    }
}
