use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ris_fingerprint::model::Profile;
use ris_fingerprint::pipeline::{self, RunConfig, Variant};

/// Worker-thread count for the rayon pool.
const THREADS_VAR: &str = "RISFP_THREADS";

#[derive(Parser)]
#[command(name = "risfp", about = "RIS-assisted Wi-Fi fingerprinting for multi-person localisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON). Defaults to the desk reproduction preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Use a single all-off RIS state instead of the codebook.
    #[arg(long, global = true)]
    without_ris: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scene and beam codebook and print a gain-sweep summary.
    Codebook,
    /// Simulate CSI for every placement case and split the repetitions.
    Simulate,
    /// Normalise and concatenate the per-beam captures.
    Preprocess,
    /// Train the transformer on the training split.
    Train,
    /// Score the trained model on the test split.
    Evaluate,
    /// Run every stage with and without the RIS and compare.
    Reproduce,
}

fn resolve_config(cli: &Cli) -> ris_fingerprint::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::desk(cli.seed.unwrap_or(0)),
    };
    if let (Some(seed), Some(_)) = (cli.seed, &cli.config) {
        cfg.reseed(seed);
    }
    if let Some(p) = cli.profile {
        cfg.model.profile = p;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> ris_fingerprint::Result<()> {
    let cfg = resolve_config(&cli)?;
    let out = &cli.out;
    let variant = Variant::from_flag(cli.without_ris);
    match cli.command {
        Command::Codebook => {
            for beam in pipeline::codebook_stage(&cfg, out)? {
                println!(
                    "theta_r {:>5.1} deg  gain {:.6}  peaks {:?}  hpbw {}",
                    beam.theta_r_deg,
                    beam.gain_at_target,
                    beam.peak_deg,
                    beam.hpbw_deg.map_or("-".into(), |h| format!("{h:.1} deg")),
                );
            }
            cfg.save(&out.join("config.json"))?;
        }
        Command::Simulate => {
            let db = pipeline::simulate_stage(&cfg, out, variant)?;
            println!(
                "{} cases, {} records, {} beams",
                db.cases.len(),
                db.records.len(),
                db.beam_count()
            );
        }
        Command::Preprocess => {
            let features = pipeline::preprocess_stage(out, variant)?;
            let len = features.first().map_or(0, |f| f.features.len());
            println!("{} feature sequences of length {len}", features.len());
        }
        Command::Train => {
            let (_, log) = pipeline::train_stage(&cfg, out, variant, |row| {
                eprintln!(
                    "step {:>6}  train {:.5}  val {:.5}  val count acc {:.4}",
                    row.step, row.train_loss, row.val_loss, row.val_count_acc
                );
            })?;
            println!("kept parameters from step {}", log.best_step);
        }
        Command::Evaluate => {
            let report = pipeline::evaluate_stage(&cfg, out, variant)?;
            print_report(&report);
        }
        Command::Reproduce => {
            let r = pipeline::reproduce(&cfg, out, |v, row| {
                eprintln!("{v:?} step {:>6}  val count acc {:.4}", row.step, row.val_count_acc);
            })?;
            cfg.save(&out.join("config.json"))?;
            println!("with RIS:");
            print_report(&r.with_ris);
            println!("without RIS:");
            print_report(&r.without_ris);
            println!("accuracy gain {:+.2} pp", 100.0 * r.comparison.accuracy_gain);
        }
    }
    Ok(())
}

fn print_report(report: &ris_fingerprint::eval::EvalReport) {
    println!("  counting accuracy {:.4}", report.counting_accuracy.overall);
    for (count, acc) in &report.counting_accuracy.per_count {
        println!("    {count} people: {acc:.4}");
    }
    println!("  exact-set accuracy {:.4}", report.exact_set_accuracy);
    match report.median_error {
        Some(m) => println!("  median localisation error {m:.3} m"),
        None => println!("  median localisation error: no correctly counted samples"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
