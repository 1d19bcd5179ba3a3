use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use emp_core::ranking::{check_theorems, snr_rule_3node, snr_rule_4node, Snr4, ThreeNodeChoice};
use emp_core::sampling::{ModuleFamily, VarianceMode};
use emp_core::scenario::{Perturbation, ScenarioConfig};
use emp_core::{enumerate_minimal, rank_emps, CriterionKind, Pattern};
use emp_rank::manifest::MANIFEST_FILE;
use emp_rank::report::{
    render_checks, AnalysisReport, CheckRow, EnumerationReport, MonteCarloReport, RankingReport, ValidationReport,
};
use emp_rank::{dataset, parallel, Format, NetworkFile, NumericalFailure, RunManifest};
use serde_json::json;

/// Rank excitation and measurement patterns of cascade networks by the
/// asymptotic covariance of their parameter estimates.
#[derive(Parser)]
#[command(name = "emp-rank", version)]
struct Cli {
    /// Worker threads for montecarlo and validate (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write results and a manifest into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Seed {
    /// Master seed.
    #[arg(long, env = "EMP_RANK_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// List the minimal EMPs of an n-node cascade.
    Enumerate {
        #[arg(short = 'n', value_parser = clap::value_parser!(u64).range(2..=26))]
        n: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Information and covariance of one EMP.
    Analyze {
        #[arg(long)]
        network: PathBuf,
        /// EMP literal such as `B=1,2;C=3,4;sigma2=1;lambda=0.01`.
        #[arg(long)]
        emp: String,
        #[arg(long, default_value_t = CriterionKind::Trace)]
        criterion: CriterionKind,
        #[command(flatten)]
        output: Output,
    },
    /// Rank every minimal EMP of a network.
    Rank {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = CriterionKind::Trace)]
        criterion: CriterionKind,
        /// Append the structural theorem checks.
        #[arg(long)]
        check_theorems: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Structural theorem checks and SNR rules for a network.
    Check {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Randomized EMP-selection experiment.
    Montecarlo(MonteCarloArgs),
    /// Compare the theoretical covariance with repeated prediction-error fits.
    Validate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        emp: String,
        /// Samples per record.
        #[arg(short = 'N', long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[command(flatten)]
        seed: Seed,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate one dataset and write it as CSV.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        emp: String,
        #[arg(short = 'N', long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        seed: Seed,
        /// Output CSV file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Scenario config file (JSON). Flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Four-node FIR-Butterworth scenario S1..S5.
    #[arg(long, conflicts_with_all = ["n", "family", "identical"])]
    scenario: Option<String>,
    #[arg(short = 'n')]
    n: Option<usize>,
    #[arg(long)]
    family: Option<ModuleFamily>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    variance_mode: Option<VarianceMode>,
    /// Repeat one drawn module along the chain.
    #[arg(long)]
    identical: bool,
    #[arg(long)]
    criterion: Option<CriterionKind>,
    #[command(flatten)]
    seed: Seed,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(emp_rank::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Enumerate { n, output } => {
            let n = n as usize;
            let patterns = enumerate_minimal(n)?;
            let report = EnumerationReport::new(RunManifest::new("enumerate", json!({ "n": n }), None), &patterns);
            emit(&output, "enumerate", report.manifest.clone(), |f| report.render(f))
        }
        Command::Analyze {
            network,
            emp,
            criterion,
            output,
        } => {
            let file = NetworkFile::read(&network)?;
            let net = file.network()?;
            let emp = file.emp(&emp)?;
            let info = emp_core::information_matrix(&net, &emp)?;
            let manifest = RunManifest::new(
                "analyze",
                json!({ "network": file, "emp": emp.to_string(), "criterion": criterion }),
                None,
            );
            let report = AnalysisReport::new(manifest.clone(), &emp, &info, criterion);
            emit(&output, "analyze", manifest, |f| report.render(f))?;
            if !report.informative {
                return Err(emp_core::Error::NonInformative { rcond: info.rcond }.into());
            }
            Ok(())
        }
        Command::Rank {
            network,
            criterion,
            check_theorems: checks,
            output,
        } => {
            let file = NetworkFile::read(&network)?;
            let net = file.network()?;
            let profile = file.variance_profile()?;
            let ranking = rank_emps(&net, &profile, criterion)?;
            let manifest = RunManifest::new(
                "rank",
                json!({ "network": file, "criterion": criterion, "check_theorems": checks }),
                None,
            );
            let mut report = RankingReport::new(manifest.clone(), &ranking);
            if checks {
                report.checks = check_theorems(&net, &profile)?.iter().map(CheckRow::from).collect();
            }
            emit(&output, "rank", manifest, |f| report.render(f))?;
            fail_on_checks(&report.checks)
        }
        Command::Check { network, output } => {
            let file = NetworkFile::read(&network)?;
            let net = file.network()?;
            let profile = file.variance_profile()?;
            let mut rows: Vec<CheckRow> = check_theorems(&net, &profile)?.iter().map(CheckRow::from).collect();
            rows.extend(snr_checks(&net, &profile)?);
            let manifest = RunManifest::new("check", json!({ "network": file }), None);
            let json = json!({ "manifest": manifest, "checks": rows });
            emit(&output, "check", manifest.clone(), |f| match f {
                Format::Json => Ok(serde_json::to_string_pretty(&json)? + "\n"),
                f => render_checks(f, &rows),
            })?;
            fail_on_checks(&rows)
        }
        Command::Montecarlo(args) => montecarlo(args, threads),
        Command::Validate {
            network,
            emp,
            samples,
            replications,
            seed,
            output,
        } => {
            if replications < emp_core::pem::MIN_REPLICATIONS {
                bail!(
                    "--replications {replications} is below the minimum of {}",
                    emp_core::pem::MIN_REPLICATIONS
                );
            }
            let file = NetworkFile::read(&network)?;
            let net = file.network()?;
            let emp = file.emp(&emp)?;
            let seed = seed.seed.unwrap_or(0);
            let cmp = parallel::with_threads(threads, || {
                parallel::empirical_covariance(&net, &emp, samples, replications, seed)
            })??;
            let manifest = RunManifest::new(
                "validate",
                json!({ "network": file, "emp": emp.to_string(), "samples": samples, "replications": replications }),
                Some(seed),
            );
            let report = ValidationReport::new(manifest.clone(), &emp, &cmp);
            emit(&output, "validate", manifest, |f| report.render(f))?;
            if cmp.unreliable {
                return Err(NumericalFailure(format!(
                    "{} of {} fits did not converge; comparison is unreliable",
                    cmp.failed, cmp.replications
                ))
                .into());
            }
            Ok(())
        }
        Command::Simulate {
            network,
            emp,
            samples,
            seed,
            out,
        } => {
            let file = NetworkFile::read(&network)?;
            let net = file.network()?;
            let emp = file.emp(&emp)?;
            let data = emp_core::pem::simulate(&net, &emp, samples, seed.seed.unwrap_or(0))?;
            match out {
                Some(path) => {
                    let f =
                        std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
                    dataset::write_dataset(&data, std::io::BufWriter::new(f))
                }
                None => dataset::write_dataset(&data, std::io::stdout().lock()),
            }
        }
    }
}

fn montecarlo(args: MonteCarloArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<ScenarioConfig>(&text)
                .with_context(|| format!("cannot parse scenario config {}", path.display()))?
        }
        (None, _) => ScenarioConfig::new(4, ModuleFamily::FirstOrder, 1000),
    };
    if let Some(s) = &args.scenario {
        let k: u8 = s
            .trim_start_matches(['S', 's'])
            .parse()
            .with_context(|| format!("unknown scenario `{s}` (expected S1..S5)"))?;
        let table = ScenarioConfig::fir_table(k, cfg.runs, cfg.master_seed)?;
        cfg.n = table.n;
        cfg.family = table.family;
        cfg.identical = table.identical;
        cfg.perturbation = table.perturbation;
    }
    if let Some(n) = args.n {
        cfg.n = n;
        if cfg.perturbation.is_some_and(|p: Perturbation| p.module >= n) {
            cfg.perturbation = None;
        }
    }
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(v) = args.variance_mode {
        cfg.variance_mode = v;
    }
    if args.identical {
        cfg.identical = true;
    }
    if let Some(c) = args.criterion {
        cfg.criterion = c;
    }
    if let Some(s) = args.seed.seed {
        cfg.master_seed = s;
    }
    cfg.validate().context("invalid scenario config")?;
    log::info!(
        "{} runs, n = {}, family {}, variances {}",
        cfg.runs,
        cfg.n,
        cfg.family,
        cfg.variance_mode
    );
    let report = parallel::with_threads(threads, || parallel::run_scenario(&cfg))??;
    let manifest = RunManifest::new("montecarlo", serde_json::to_value(&cfg)?, Some(cfg.master_seed));
    let mc = MonteCarloReport::new(manifest.clone(), report);
    match &args.output.out {
        Some(dir) => {
            let outputs = [
                ("report.csv", Format::Csv),
                ("report.json", Format::Json),
                ("report.txt", Format::Table),
            ];
            write_outputs(dir, manifest, &outputs, |f, m| {
                let mut mc = mc.clone();
                mc.manifest = m.clone();
                mc.render(f)
            })
        }
        None => print(&mc.render(args.output.format)?),
    }
}

/// Writes to stdout, or to `<dir>/<stem>.<ext>` plus the manifest.
fn emit(
    output: &Output,
    stem: &str,
    manifest: RunManifest,
    render: impl Fn(Format) -> anyhow::Result<String>,
) -> anyhow::Result<()> {
    match &output.out {
        Some(dir) => {
            let name = format!("{stem}.{}", output.format.extension());
            write_outputs(dir, manifest, &[(name.as_str(), output.format)], |f, _| render(f))
        }
        None => print(&render(output.format)?),
    }
}

fn write_outputs(
    dir: &Path,
    mut manifest: RunManifest,
    files: &[(&str, Format)],
    render: impl Fn(Format, &RunManifest) -> anyhow::Result<String>,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    manifest.outputs = files.iter().map(|(name, _)| name.to_string()).collect();
    manifest.outputs.push(MANIFEST_FILE.to_string());
    for (name, format) in files {
        let path = dir.join(name);
        std::fs::write(&path, render(*format, &manifest)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    manifest.write(dir)
}

fn print(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn fail_on_checks(rows: &[CheckRow]) -> anyhow::Result<()> {
    let failed: Vec<&str> = rows.iter().filter(|c| c.failed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(NumericalFailure(format!("failed checks: {}", failed.join(", "))).into())
    }
}

/// SNR decision rules for identical three- and four-node cascades, compared
/// with the computed ranking.
fn snr_checks(net: &emp_core::CascadeNetwork, profile: &emp_core::VarianceProfile) -> anyhow::Result<Vec<CheckRow>> {
    let n = net.n();
    if !net.has_identical_modules() || !(n == 3 || n == 4) {
        return Ok(Vec::new());
    }
    let ranking = rank_emps(net, profile, CriterionKind::Trace)?;
    let trace = |b: &[usize], c: &[usize]| -> anyhow::Result<f64> {
        let p = Pattern::new(n, b, c)?;
        ranking
            .get(&p)
            .map(|e| e.trace)
            .ok_or_else(|| anyhow::anyhow!("EMP {p} is non-informative"))
    };
    let snr = |i: usize, j: usize| profile.sigma2(i) / profile.lambda(j);
    let mut rows = Vec::new();
    if n == 3 {
        let (t1, t2) = (trace(&[1], &[2, 3])?, trace(&[1, 2], &[3])?);
        let choice = snr_rule_3node(snr(1, 2), snr(2, 3));
        let passed = match choice {
            ThreeNodeChoice::EmpI => t1 < t2,
            ThreeNodeChoice::EmpII => t2 < t1,
            ThreeNodeChoice::Tie => ((t1 - t2) / t1).abs() < emp_core::ranking::EQUALITY_TOL,
        };
        rows.push(CheckRow {
            name: "three-node-snr-rule".to_string(),
            applicable: true,
            passed,
            detail: format!("rule picks {choice:?}; tr I = {t1:.6e}, tr II = {t2:.6e}"),
        });
    } else {
        let traces = [
            ("I", trace(&[1], &[2, 3, 4])?),
            ("II", trace(&[1, 2, 3], &[4])?),
            ("III", trace(&[1, 2], &[3, 4])?),
        ];
        let tr = |label: &str| traces.iter().find(|(l, _)| *l == label).map_or(f64::NAN, |t| t.1);
        for p in snr_rule_4node(&Snr4::from_profile(profile)?) {
            let asserted = p.condition == emp_core::ranking::Condition::Holds;
            let (better, worse) = (tr(p.better), tr(p.worse));
            rows.push(CheckRow {
                name: format!("four-node-snr-rule {}<{}", p.better, p.worse),
                applicable: asserted,
                passed: !asserted || better < worse,
                detail: format!(
                    "{}; tr {} = {better:.6e}, tr {} = {worse:.6e}",
                    p.condition, p.better, p.worse
                ),
            });
        }
    }
    Ok(rows)
}
