use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lbps_ctmc::aa::{nnpaao_ordering, DistanceTable, ALPHABET};
use lbps_ctmc::diagnostics::{
    ard, ess_batch_means, ess_report, geweke_eit, quantile, EitConfig, EitKernel, EssReport, Summary, WALLTIME_SHARE,
};
use lbps_ctmc::factorgraph::{build_posterior_graph, Scheme, SparsityProfile};
use lbps_ctmc::hmc::HmcConfig;
use lbps_ctmc::inference::{run_chain, ChainOutput, Kernel, RunConfig};
use lbps_ctmc::io::{read_samples, read_series, write_atomic, write_json, write_samples, write_series};
use lbps_ctmc::paths::{observe, simulate_path, ObservedSeries, SuffStats};
use lbps_ctmc::ratematrix::{build_rate_matrix, exchangeable_params, stationary_dist};
use lbps_ctmc::{Error, FeatureKind, FeatureSet, PairOrdering, StateSpace, WeightVector};

#[derive(Parser, Debug)]
#[command(name = "lbps-ctmc", version, about = "Bayesian inference of reversible CTMC rate matrices")]
#[command(args_override_self = true)]
struct Cli {
    /// File of `key=value` lines used as default flags for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate observed series under random true weights.
    Simulate(SimulateArgs),
    /// Run posterior sampling on a series file.
    Fit(FitArgs),
    /// Run the exact invariance test for a kernel.
    Eit(EitArgs),
    /// Turn an aligned pair of protein sequences into a series file.
    IngestPair(IngestArgs),
    /// ESS, ARD and sparsity reports.
    Diagnose(DiagnoseArgs),
    /// Write the nearest-neighbour amino-acid pair ranking.
    OrderAa(OrderArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// `dna`, `aa`, or a number of states.
    #[arg(long, default_value = "dna")]
    alphabet: String,
    /// `chain` or `gtr`.
    #[arg(long, default_value = "chain")]
    features: String,
    /// `lex` or `nnpaao` (amino acids only). Defaults to `nnpaao` for `aa`.
    #[arg(long)]
    ordering: Option<String>,
}

impl ModelArgs {
    fn states(&self) -> Result<StateSpace, Error> {
        match self.alphabet.to_ascii_lowercase().as_str() {
            "dna" => Ok(StateSpace::dna()),
            "aa" | "protein" | "amino" => Ok(StateSpace::amino_acids()),
            n => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("unknown alphabet '{n}'")))?;
                StateSpace::numbered(n)
            }
        }
    }

    fn build(&self) -> Result<(StateSpace, FeatureSet), Error> {
        let states = self.states()?;
        let is_aa = states == StateSpace::amino_acids();
        let ordering = match self.ordering.as_deref() {
            None if is_aa => nnpaao(),
            None | Some("lex") => PairOrdering::lexicographic(states.len()),
            Some("nnpaao") if is_aa => nnpaao(),
            Some("nnpaao") => {
                return Err(Error::InvalidArgument("nnpaao ordering needs the amino-acid alphabet".into()))
            }
            Some(o) => return Err(Error::InvalidArgument(format!("unknown ordering '{o}'"))),
        };
        let kind: FeatureKind = self.features.parse()?;
        Ok((states, FeatureSet::build(kind, ordering)?))
    }
}

fn nnpaao() -> PairOrdering {
    lbps_ctmc::aa::default_amino_ordering()
}

#[derive(Args, Debug, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    trajectory_length: f64,
    #[arg(long, default_value_t = 1.0)]
    refresh_rate: f64,
    #[arg(long, default_value_t = 40)]
    hmc_steps: usize,
    #[arg(long, default_value_t = 0.001)]
    step_size: f64,
    /// Prior precision of every weight.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.3)]
    burn_in: f64,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SamplerArgs {
    fn run_config(&self, kernel: Kernel) -> RunConfig {
        RunConfig {
            kernel,
            iterations: self.iterations,
            trajectory_length: self.trajectory_length,
            refresh_rate: self.refresh_rate,
            hmc: HmcConfig { steps: self.hmc_steps, step_size: self.step_size },
            kappa: self.kappa,
            burn_in: self.burn_in,
            seed: self.seed,
            thin: self.thin,
            gradient_scale: 1.0,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 500)]
    series: usize,
    /// Length of each observation window.
    #[arg(long, default_value_t = 3.0)]
    length: f64,
    /// Spacing of observation times.
    #[arg(long, default_value_t = 0.5)]
    mesh: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
    /// Ground-truth JSON; defaults to `<output>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// `lbps_hmc` or `hmc`.
    #[arg(long, default_value = "lbps_hmc")]
    kernel: String,
    #[arg(long, short)]
    input: PathBuf,
    /// Samples CSV; with several chains a `.chainK` suffix is added.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    summary: PathBuf,
    /// Independent chains run in parallel with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    chains: usize,
}

#[derive(Args, Debug)]
struct EitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    trajectory_length: f64,
    #[arg(long, default_value_t = 1.0)]
    refresh_rate: f64,
    #[arg(long, default_value_t = 20)]
    hmc_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    step_size: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `lbps_hmc`, `hmc`, or `prior` (exact redraw from the prior).
    #[arg(long, default_value = "lbps_hmc")]
    kernel: String,
    /// Multiplier on every gradient; anything but 1 breaks the kernel.
    #[arg(long, default_value_t = 1.0)]
    gradient_scale: f64,
    #[arg(long, default_value_t = 10)]
    series: usize,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    #[arg(long, default_value_t = 0.5)]
    mesh: f64,
    /// Draws in each of the two streams.
    #[arg(long, default_value_t = 300)]
    draws: usize,
    /// Kernel steps between successive-stream draws.
    #[arg(long, default_value_t = 20)]
    eit_thin: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// FASTA-like file with exactly two aligned records.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Samples CSV written by `fit`.
    #[arg(long)]
    samples: PathBuf,
    /// Second samples CSV; enables the ARD report.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    burn_in: f64,
    /// Wall-clock seconds of the run; 70% is charged to the kept samples.
    #[arg(long)]
    seconds: Option<f64>,
    /// Also report the sparsity profile of a fully connected model of this size.
    #[arg(long)]
    sparsity_states: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OrderArgs {
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv = match with_config_file(std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect()) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eit(a) => cmd_eit(a),
        Command::IngestPair(a) => cmd_ingest_pair(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::OrderAa(a) => cmd_order_aa(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::Internal(_) => 4,
        Error::Augmentation { source, .. } => exit_code(source),
        _ => 3,
    }
}

/// Splices `--key value` pairs from a `--config` file in right after the
/// subcommand, so flags given on the command line win.
fn with_config_file(argv: Vec<String>) -> Result<Vec<String>, Error> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path)?;
    let mut extra = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value in {path}"),
        })?;
        extra.push(format!("--{}", k.trim().replace('_', "-")));
        extra.push(v.trim().to_string());
    }
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

fn read_file(path: &Path) -> Result<std::fs::File, Error> {
    std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Truth {
    labels: Vec<String>,
    features: String,
    pair_order: Vec<(String, String)>,
    wu: Vec<f64>,
    wb: Vec<f64>,
    pi: Vec<f64>,
    theta: Vec<f64>,
    seed: u64,
    series: usize,
    length: f64,
    mesh: f64,
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let (states, features) = a.model.build()?;
    if a.series == 0 {
        return Err(Error::InvalidArgument("series count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut uniform = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    let w = WeightVector::new(uniform(features.p1()), uniform(features.p2()), 1.0)?;
    let rate = build_rate_matrix(&w, &features)?;
    let pi = rate.pi().to_vec();
    let series = (0..a.series)
        .map(|_| observe(&simulate_path(&rate, &pi, a.length, &mut rng)?, a.mesh))
        .collect::<Result<Vec<ObservedSeries>, Error>>()?;
    let mut buf = Vec::new();
    write_series(&mut buf, &series, &states)?;
    write_atomic(&a.output, &buf)?;
    let truth = Truth {
        labels: states.labels().to_vec(),
        features: a.model.features.clone(),
        pair_order: features
            .ordering()
            .pairs()
            .iter()
            .map(|&(x, y)| (states.label(x).to_string(), states.label(y).to_string()))
            .collect(),
        theta: exchangeable_params(&w.wb, &features)?,
        pi,
        wu: w.wu,
        wb: w.wb,
        seed: a.seed,
        series: a.series,
        length: a.length,
        mesh: a.mesh,
    };
    let truth_path = a.truth.unwrap_or_else(|| suffixed(&a.output, ".truth.json"));
    write_json(&truth_path, &truth)
}

fn suffixed(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct ChainSummary {
    seed: u64,
    kernel: String,
    iterations: usize,
    retained: usize,
    burn_in_index: usize,
    hmc_acceptance: f64,
    times: lbps_ctmc::inference::PhaseTimes,
    counters: lbps_ctmc::bps::EventCounters,
    recomputations_per_collision: f64,
    theta_means: Vec<f64>,
    pi_means: Vec<f64>,
    ess: Option<EssReport>,
}

fn summarize(chain: &ChainOutput, cfg: &RunConfig, features: &FeatureSet) -> Result<ChainSummary, Error> {
    let start = chain.burn_in_index();
    let pi = chain.pi_samples(features)?;
    let kept = &pi[start..];
    let pi_means = (0..features.n_states())
        .map(|k| kept.iter().map(|r| r[k]).sum::<f64>() / kept.len().max(1) as f64)
        .collect();
    let theta = chain.theta_samples(features)?;
    let ess = if theta.len() - start >= 16 && chain.times.total > 0.0 {
        Some(ess_report(&theta[start..], WALLTIME_SHARE * chain.times.total)?)
    } else {
        None
    };
    Ok(ChainSummary {
        seed: cfg.seed,
        kernel: cfg.kernel.to_string(),
        iterations: cfg.iterations,
        retained: chain.len(),
        burn_in_index: start,
        hmc_acceptance: chain.hmc_accepted as f64 / cfg.iterations as f64,
        times: chain.times,
        counters: chain.counters,
        recomputations_per_collision: chain.counters.recomputations_per_collision(),
        theta_means: chain.theta_means(features)?,
        pi_means,
        ess,
    })
}

fn cmd_fit(a: FitArgs) -> Result<(), Error> {
    let (states, features) = a.model.build()?;
    let data = read_series(read_file(&a.input)?, &states)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no series", a.input.display())));
    }
    let kernel: Kernel = a.kernel.parse()?;
    if a.chains == 0 {
        return Err(Error::InvalidArgument("chains must be at least 1".into()));
    }
    let base = a.sampler.run_config(kernel);
    base.validate()?;
    let configs: Vec<RunConfig> = (0..a.chains)
        .map(|i| RunConfig { seed: base.seed.wrapping_add(i as u64), ..base.clone() })
        .collect();
    let outputs: Vec<Result<ChainOutput, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(|| run_chain(&data, &features, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("chain worker panicked".into()))))
            .collect()
    });
    let mut summaries = Vec::with_capacity(a.chains);
    for (i, (out, cfg)) in outputs.into_iter().zip(&configs).enumerate() {
        let chain = out?;
        let path = if a.chains == 1 { a.samples.clone() } else { suffixed(&a.samples, &format!(".chain{i}")) };
        let mut buf = Vec::new();
        write_samples(&mut buf, &chain, &features)?;
        write_atomic(&path, &buf)?;
        summaries.push(summarize(&chain, cfg, &features)?);
    }
    write_json(&a.summary, &serde_json::json!({ "series": data.len(), "chains": summaries }))
}

fn cmd_eit(a: EitArgs) -> Result<(), Error> {
    let (_, features) = a.model.build()?;
    let kernel: EitKernel = a.kernel.parse()?;
    let mut cfg = EitConfig::new(features, kernel);
    cfg.run = RunConfig {
        trajectory_length: a.trajectory_length,
        refresh_rate: a.refresh_rate,
        hmc: HmcConfig { steps: a.hmc_steps, step_size: a.step_size },
        kappa: a.kappa,
        gradient_scale: a.gradient_scale,
        ..RunConfig::default()
    };
    cfg.n_series = a.series;
    cfg.series_length = a.length;
    cfg.mesh = a.mesh;
    cfg.n_marginal = a.draws;
    cfg.n_successive = a.draws;
    cfg.thinning = a.eit_thin;
    cfg.seed = a.seed;
    let res = geweke_eit(&cfg)?;
    emit(a.output.as_deref(), &res.to_table())?;
    eprintln!(
        "{}: {} of {} tests below their threshold",
        if res.passed { "passed" } else { "failed" },
        res.failures(),
        res.rows.len()
    );
    Ok(())
}

/// Records of a FASTA-like file: `>` header lines followed by sequence lines.
fn parse_fasta(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('>') {
            out.push((name.trim().to_string(), String::new()));
        } else {
            let rec = out.last_mut().ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "sequence data before the first '>' header".into(),
            })?;
            rec.1.extend(line.chars().filter(|c| !c.is_whitespace()));
        }
    }
    Ok(out)
}

fn cmd_ingest_pair(a: IngestArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&a.input)?;
    let recs = parse_fasta(&text)?;
    if recs.len() != 2 {
        return Err(Error::InvalidArgument(format!("expected two sequences, found {}", recs.len())));
    }
    let (x, y): (Vec<char>, Vec<char>) = (recs[0].1.chars().collect(), recs[1].1.chars().collect());
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "aligned sequences differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut series = Vec::new();
    let mut skipped = 0usize;
    for (&p, &q) in x.iter().zip(&y) {
        let idx = |c: char| lbps_ctmc::aa::aa_index(c.to_ascii_uppercase());
        match (idx(p), idx(q)) {
            (Some(i), Some(j)) => series.push(ObservedSeries::new(vec![0.0, 1.0], vec![i, j])?),
            _ => skipped += 1,
        }
    }
    let mut buf = Vec::new();
    write_series(&mut buf, &series, &StateSpace::amino_acids())?;
    write_atomic(&a.output, &buf)?;
    eprintln!("{} sites written, {skipped} skipped (gap or unknown residue)", series.len());
    if series.is_empty() {
        eprintln!("warning: no usable sites");
    }
    Ok(())
}

#[derive(Serialize)]
struct ColumnEss {
    column: String,
    ess: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct ArdRow {
    column: String,
    mean_a: f64,
    mean_b: f64,
    ard: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    samples: usize,
    kept: usize,
    ess: Vec<ColumnEss>,
    ess_summary: Summary,
    seconds: Option<f64>,
    ess_per_second_summary: Option<Summary>,
    ard: Option<Vec<ArdRow>>,
    ard_summary: Option<Summary>,
    ard_q10: Option<f64>,
    ard_q90: Option<f64>,
    sparsity: Option<SparsityProfile>,
}

fn theta_table(path: &Path, burn_in: f64) -> Result<(Vec<String>, Vec<Vec<f64>>, usize), Error> {
    let (cols, rows) = read_samples(read_file(path)?)?;
    let keep: Vec<usize> = (0..cols.len()).filter(|&k| cols[k].starts_with("theta_")).collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no theta columns", path.display())));
    }
    let n = rows.len();
    let start = ((n as f64) * burn_in).floor() as usize;
    let kept = rows[start..].iter().map(|(_, v)| keep.iter().map(|&k| v[k]).collect()).collect();
    Ok((keep.iter().map(|&k| cols[k].clone()).collect(), kept, n))
}

fn col_means(rows: &[Vec<f64>], d: usize) -> Vec<f64> {
    (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64).collect()
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<(), Error> {
    if !(0.0..1.0).contains(&a.burn_in) {
        return Err(Error::InvalidArgument("burn-in fraction must be in [0, 1)".into()));
    }
    let (cols, rows, total) = theta_table(&a.samples, a.burn_in)?;
    let d = cols.len();
    let ess: Vec<ColumnEss> = (0..d)
        .map(|k| {
            let x: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            ess_batch_means(&x).map(|e| ColumnEss { column: cols[k].clone(), ess: e.ess, degenerate: e.degenerate })
        })
        .collect::<Result<_, _>>()?;
    let values: Vec<f64> = ess.iter().map(|e| e.ess).collect();
    let eps_summary = match a.seconds {
        Some(s) => Some(ess_report(&rows, WALLTIME_SHARE * s)?.ess_per_second_summary),
        None => None,
    };
    let mut report = DiagnoseReport {
        samples: total,
        kept: rows.len(),
        ess_summary: Summary::of(&values)?,
        ess,
        seconds: a.seconds,
        ess_per_second_summary: eps_summary,
        ard: None,
        ard_summary: None,
        ard_q10: None,
        ard_q90: None,
        sparsity: None,
    };
    if let Some(other) = &a.compare {
        let (cols_b, rows_b, _) = theta_table(other, a.burn_in)?;
        if cols_b != cols {
            return Err(Error::InvalidArgument("sample files have different columns".into()));
        }
        if rows.is_empty() || rows_b.is_empty() {
            return Err(Error::InvalidArgument("no samples left after burn-in".into()));
        }
        let (ma, mb) = (col_means(&rows, d), col_means(&rows_b, d));
        let ards = (0..d)
            .map(|k| {
                Ok(ArdRow { column: cols[k].clone(), mean_a: ma[k], mean_b: mb[k], ard: ard(ma[k], mb[k])? })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let v: Vec<f64> = ards.iter().map(|r| r.ard).collect();
        report.ard_summary = Some(Summary::of(&v)?);
        report.ard_q10 = Some(quantile(&v, 0.1)?);
        report.ard_q90 = Some(quantile(&v, 0.9)?);
        report.ard = Some(ards);
    }
    if let Some(s) = a.sparsity_states {
        report.sparsity = Some(full_sparsity(s)?);
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
    emit(a.output.as_deref(), &format!("{text}\n"))
}

/// Sparsity profile of the chain-GTR graph when every sojourn and transition is observed.
fn full_sparsity(s: usize) -> Result<SparsityProfile, Error> {
    let features = FeatureSet::chain(PairOrdering::lexicographic(s));
    let z = SuffStats::from_parts(vec![1; s], vec![1.0; s], (0..s * s).map(|k| u64::from(k / s != k % s)).collect())?;
    let pi = stationary_dist(&vec![0.0; s], &features)?;
    Ok(build_posterior_graph(&z, &features, &pi, 1.0, Scheme::Combined)?.sparsity_profile())
}

fn cmd_order_aa(a: OrderArgs) -> Result<(), Error> {
    let table = DistanceTable::grantham();
    let ranks = nnpaao_ordering(&table);
    let mut out = String::from("rank,eta,first,second,distance,restart\n");
    for (r, &(i, j)) in ranks.ranked.iter().enumerate() {
        out.push_str(&format!(
            "{r},{},{},{},{},{}\n",
            r + 1,
            ALPHABET[i],
            ALPHABET[j],
            table.get(i, j),
            ranks.restarts.contains(&r)
        ));
    }
    emit(a.output.as_deref(), &out)
}
