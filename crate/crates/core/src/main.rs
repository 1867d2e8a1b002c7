use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rcrjoint::harness::{run_study, summarize_processes, FitMode};
use rcrjoint::io::config::{parse_generator, read_config};
use rcrjoint::io::result::{settings, sha256_hex};
use rcrjoint::io::{
    format_dataset, parse_dataset, write_baselines_csv, write_correlations_csv, write_estimates_csv, write_summary_csv,
    BaselineTable, Dataset, ResultFile,
};
use rcrjoint::model::rho::family_by_name;
use rcrjoint::model::EffectiveAgePolicy;
use rcrjoint::parametric::fit_special_case;
use rcrjoint::semiparam::{fit_semiparametric, FitOptions};
use rcrjoint::simulate::simulate_cohort_with;
use rcrjoint::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rcrjoint",
    version,
    about = "Simulate and fit joint recurrent-event, marker and health-status models"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a cohort from a scenario config and write it as a dataset file.
    Simulate {
        config: PathBuf,
        /// Units; defaults to `n` from the config.
        #[arg(long)]
        n: Option<usize>,
        /// grid | exact
        #[arg(long)]
        generator: Option<String>,
    },
    /// Fit a dataset and write a result file.
    Fit {
        data: PathBuf,
        #[arg(long, default_value = "semiparametric")]
        mode: String,
        #[arg(long, default_value = "own-type")]
        age_policy: String,
        /// Comma-separated ages for Lambda_0q standard errors.
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.6,0.9,1.2")]
        lambda_times: Vec<f64>,
        #[arg(long, default_value = "log-count-power")]
        rho_family: String,
        /// Use only data observed up to this time.
        #[arg(long)]
        s_star: Option<f64>,
        /// Use only recurrent events at effective ages up to this value.
        #[arg(long)]
        t_star: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a Monte-Carlo study from a config and write the summary table.
    Replicate {
        config: PathBuf,
        #[arg(long)]
        mreps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Also write the correlation curves as CSV here.
        #[arg(long)]
        correlations: Option<PathBuf>,
    },
    /// Process statistics of a dataset.
    Summarize { data: PathBuf },
    /// Baseline survivor tables of a result file.
    Survivor {
        result: PathBuf,
        /// Evaluate at these times instead of at every jump.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {t} threads: {e}")))?;
    }
    match cli.cmd {
        Cmd::Simulate { config, n, generator } => {
            let rc = read_config(&config)?;
            let seed = g.seed.unwrap_or(rc.scenario.seed);
            let sc = rc.scenario.clone().with_seed(seed);
            let gen = generator.as_deref().map(parse_generator).transpose()?.unwrap_or(rc.generator);
            let mut cohort = simulate_cohort_with(&sc, n.unwrap_or(rc.n), seed, gen)?;
            cohort.fingerprint = sc.fingerprint();
            emit(&g.out, format_dataset(&Dataset::new(sc.spaces().clone(), cohort)).as_bytes())
        }
        Cmd::Fit { data, mode, age_policy, lambda_times, rho_family, s_star, t_star, format } => {
            let text = read_text(&data)?;
            let d = parse_dataset(&text)?;
            let mode: FitMode = mode.parse()?;
            let age: EffectiveAgePolicy = age_policy.parse()?;
            let mut st = settings(mode, age, &rho_family, &lambda_times);
            st.s_star = s_star;
            st.t_star = t_star;
            let n = d.cohort.len();
            let result = match mode {
                FitMode::Parametric => {
                    let f = fit_special_case(&d.cohort, &d.spaces)?;
                    ResultFile::from_parametric(&f, st, sha256_hex(&text), d.cohort.fingerprint.clone(), n)
                }
                FitMode::Semiparametric => {
                    let opts = FitOptions {
                        rho: family_by_name(&rho_family)?,
                        s_star,
                        t_star,
                        lambda_times: lambda_times.clone(),
                        newton: st.newton,
                    };
                    let f = fit_semiparametric(&d.cohort, &d.spaces, age, &opts)?;
                    ResultFile::from_semiparametric(&f, st, sha256_hex(&text), d.cohort.fingerprint.clone(), n)
                }
            };
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            match format {
                Format::Json => emit(&g.out, result.to_json()?.as_bytes()),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_estimates_csv(&mut buf, &result)?;
                    emit(&g.out, &buf)
                }
            }
        }
        Cmd::Replicate { config, mreps, n, mode, format, correlations } => {
            let rc = read_config(&config)?;
            let mut cfg = rc.study();
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(m) = mreps {
                cfg.mreps = m;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(m) = mode {
                cfg.mode = m.parse()?;
            }
            if correlations.is_none() && format == Format::Csv {
                cfg.mesh.clear();
            }
            let s = run_study(&cfg)?;
            eprintln!("{} of {} replications used", cfg.mreps - s.failures, cfg.mreps);
            for m in s.messages.iter().take(10) {
                eprintln!("note: {m}");
            }
            if let (Some(p), Some(cc)) = (&correlations, &s.correlations) {
                write_correlations_csv(std::fs::File::create(p)?, cc)?;
            }
            match format {
                Format::Json => emit(&g.out, serde_json::to_string_pretty(&s)?.as_bytes()),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_summary_csv(&mut buf, &s)?;
                    emit(&g.out, &buf)
                }
            }
        }
        Cmd::Summarize { data } => {
            let d = parse_dataset(&read_text(&data)?)?;
            let s = summarize_processes(std::slice::from_ref(&d.cohort), &d.spaces);
            emit(&g.out, serde_json::to_string_pretty(&s)?.as_bytes())
        }
        Cmd::Survivor { result, times } => {
            let r = ResultFile::from_json(&read_text(&result)?)?;
            let tables: Vec<BaselineTable> = r
                .baselines
                .iter()
                .map(|b| {
                    if times.is_empty() {
                        return Ok(b.clone());
                    }
                    if r.settings.mode == FitMode::Parametric {
                        let rate = r.estimate(&format!("lambda_{}", b.risk)).map_or(0.0, |e| e.value);
                        return Ok(BaselineTable {
                            risk: b.risk,
                            cumulative: times.iter().map(|&t| (t, rate * t)).collect(),
                            survivor: times.iter().map(|&t| (t, (-rate * t).exp())).collect(),
                        });
                    }
                    let f = b.step()?;
                    let (s, _) = BaselineTable::from_step(b.risk, &f);
                    let surv = |t: f64| s.survivor.iter().take_while(|p| p.0 <= t).last().map_or(1.0, |p| p.1);
                    Ok(BaselineTable {
                        risk: b.risk,
                        cumulative: times.iter().map(|&t| (t, f.eval(t))).collect(),
                        survivor: times.iter().map(|&t| (t, surv(t))).collect(),
                    })
                })
                .collect::<Result<_>>()?;
            let mut buf = Vec::new();
            write_baselines_csv(&mut buf, &tables)?;
            emit(&g.out, &buf)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Dataset(v) = &e {
                for x in v.iter().skip(1).take(20) {
                    eprintln!("  {x}");
                }
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
