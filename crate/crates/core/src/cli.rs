//! The `qcbn` command line.
//!
//! Exit status: 0 on success, 1 for domain and usage errors (invalid
//! network, bad constraint, bad flag), 2 for I/O and parse errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::constraints::InequalitySystem;
use crate::datagen::{forward_sample, SamplingSpec};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::eval::evaluate;
use crate::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use crate::io::{
    network_to_string, read_constraints, read_network, read_network_report, read_structure, write_network, write_text,
};
use crate::learning::{learn, random_init, Algorithm, HybridScaling, LearnConfig, RunTrace};

#[derive(Debug, Parser)]
#[command(
    name = "qcbn",
    version,
    about = "Learn Bayesian network CPTs from incomplete data under qualitative influence constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network file and list every defect.
    Validate { network: PathBuf },

    /// Draw cases from a network by forward sampling.
    Sample {
        network: PathBuf,
        #[arg(long)]
        count: usize,
        /// Variables left out of the output (comma-separated or repeated).
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Learn the CPTs of a structure from data.
    ///
    /// The curve file has the columns
    /// iteration,train_nll_per_case,test_nll_per_case,violation.
    Learn {
        /// Network or structure file; CPTs are ignored unless --keep-init.
        structure: PathBuf,
        data: PathBuf,
        #[arg(long, default_value = "em")]
        algorithm: String,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Penalty weight w.
        #[arg(long, default_value_t = 2.0)]
        weight: f64,
        /// Gradient step size α.
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
        /// Seed of the random initial CPTs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        test_data: Option<PathBuf>,
        #[arg(long)]
        curve_out: Option<PathBuf>,
        /// Output network file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Floor ε on every CPT entry.
        #[arg(long, default_value_t = 1e-6)]
        min_prob: f64,
        /// Start from the CPTs in the input file instead of random ones.
        #[arg(long)]
        keep_init: bool,
        /// Do not multiply the hybrid correction step by the weight.
        #[arg(long)]
        unweighted_hybrid: bool,
    },

    /// Average negative log-likelihood (and quadratic loss) on test data.
    Eval {
        network: PathBuf,
        data: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },

    /// Report the violation index of a network under a constraint set.
    Violations { network: PathBuf, constraints: PathBuf },

    /// Run a replicated learning experiment described by a JSON config.
    ///
    /// Writes train.csv, test.csv, summary.csv, curves/ and networks/ to the
    /// config's output_dir. summary.csv columns:
    /// algorithm,replication,init_seed,train_nll_per_case,test_nll_per_case,violation,quadratic_loss.
    Experiment { config: PathBuf },
}

/// Failure of a command: a library error or a usage problem.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{0}")]
    Usage(String),
    /// Already reported; only the exit status is left.
    #[error("")]
    Reported(i32),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(e) if e.is_input_error() => 2,
            Failure::Lib(_) | Failure::Usage(_) => 1,
            Failure::Reported(code) => *code,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(f) => {
            if !matches!(f, Failure::Reported(_)) {
                let _ = writeln!(err, "error: {f}");
            }
            f.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> std::result::Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| {
        Failure::Lib(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })
    })
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Validate { network } => {
            let (net, defects) = read_network_report(&network)?;
            if defects.is_empty() {
                emit(out, &format!("valid: {} variables\n", net.len()))?;
                Ok(())
            } else {
                let mut text = String::new();
                for d in &defects {
                    text.push_str(&format!("defect: {d}\n"));
                }
                emit(out, &text)?;
                let _ = writeln!(err, "error: {} defect(s) in {}", defects.len(), network.display());
                Err(Failure::Reported(1))
            }
        }

        Command::Sample {
            network,
            count,
            hidden,
            seed,
            out: path,
        } => {
            if count == 0 {
                return Err(Failure::Usage("--count must be at least 1".into()));
            }
            let net = read_network(&network)?;
            let spec = SamplingSpec { count, hidden, seed };
            let data = forward_sample(&net, &spec)?;
            let text = data.to_csv(net.structure());
            match path {
                Some(p) => write_text(&p, &text)?,
                None => emit(out, &text)?,
            }
            Ok(())
        }

        Command::Learn {
            structure,
            data,
            algorithm,
            iterations,
            weight,
            step_size,
            seed,
            constraints,
            test_data,
            curve_out,
            out: path,
            record_every,
            min_prob,
            keep_init,
            unweighted_hybrid,
        } => {
            let algorithm: Algorithm = algorithm.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            if algorithm.is_constrained() && constraints.is_none() {
                return Err(Failure::Usage(format!(
                    "--algorithm {algorithm} requires --constraints"
                )));
            }
            let init = if keep_init {
                read_network(&structure)?
            } else {
                random_init(read_structure(&structure)?, seed)
            };
            let s = init.structure();
            let train = Dataset::read(&data, s)?;
            let test = test_data.map(|p| Dataset::read(p, s)).transpose()?;
            let cs = constraints.map(|p| read_constraints(p, s)).transpose()?;
            let cfg = LearnConfig {
                algorithm,
                iterations,
                penalty_weight: weight,
                step_size,
                min_prob,
                seed,
                record_every,
                record_params: false,
                hybrid_scaling: if unweighted_hybrid {
                    HybridScaling::Unweighted
                } else {
                    HybridScaling::Weighted
                },
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let result = learn(&init, &train, cs.as_ref(), &cfg, test.as_ref());
            let (net, trace) = match result {
                Ok(r) => r,
                Err(e) => {
                    if let Some(p) = &curve_out {
                        write_text(p, &e.trace.to_csv())?;
                    }
                    return Err(e.error.into());
                }
            };
            if let Some(p) = &curve_out {
                write_text(p, &trace.to_csv())?;
            }
            match path {
                Some(p) => {
                    write_network(&p, &net)?;
                    emit(out, &final_line(&trace))?;
                }
                None => emit(out, &network_to_string(&net))?,
            }
            Ok(())
        }

        Command::Eval { network, data, target } => {
            let net = read_network(&network)?;
            let test = Dataset::read(&data, net.structure())?;
            let r = evaluate(&net, &test, target.as_deref())?;
            let mut text = format!(
                "cases {}\navg_neg_log_likelihood {}\n",
                r.case_count, r.avg_neg_log_likelihood
            );
            if let (Some(t), Some(q)) = (&r.target, r.avg_quadratic_loss) {
                text.push_str(&format!("avg_quadratic_loss {q} target={t}\n"));
            }
            emit(out, &text)
        }

        Command::Violations { network, constraints } => {
            let net = read_network(&network)?;
            let cs = read_constraints(&constraints, net.structure())?;
            let report = InequalitySystem::new(net.structure(), &cs)?.audit(&net);
            let mut text = format!(
                "total {}\ninequalities {}\nmax_bound {}\nviolated {}\n",
                report.total,
                report.inequality_count,
                report.inequality_count,
                report.violated.len()
            );
            for r in &report.violated {
                let context: Vec<String> = r.context.iter().map(|(v, s)| format!("{v}={s}")).collect();
                text.push_str(&format!(
                    "  child={} parent={} sign={} m={} i={} j={} context=[{}] slack={} partial={}\n",
                    r.child,
                    r.parent,
                    r.sign,
                    r.m,
                    r.i,
                    r.j,
                    context.join(";"),
                    r.slack,
                    r.partial
                ));
            }
            emit(out, &text)
        }

        Command::Experiment { config } => {
            let cfg = ExperimentConfig::read(&config)?;
            let outcome: ExperimentOutcome = run_experiment(&cfg)?;
            emit(out, &outcome.summary_csv())
        }
    }
}

fn final_line(trace: &RunTrace) -> String {
    let last = trace.last().expect("trace always has a row");
    let mut line = format!(
        "iteration {} train_nll_per_case {}",
        last.iteration, last.train_nll_per_case
    );
    if let Some(t) = last.test_nll_per_case {
        line.push_str(&format!(" test_nll_per_case {t}"));
    }
    if let Some(v) = last.violation {
        line.push_str(&format!(" violation {v}"));
    }
    line.push('\n');
    line
}
