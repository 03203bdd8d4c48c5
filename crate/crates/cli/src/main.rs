//! Configuration-driven pipelines over the cascade-lab library: integrate a
//! run, ensemble-average its fluxes into cascade verdicts, audit the exact
//! properties the analysis leans on, and render report files. Every command
//! writes a manifest (config hash, seed, versions) so a run can be
//! reproduced byte for byte; nothing here emits timestamps.
//!
//! Exit semantics split by command: `verify` exits nonzero when any exact
//! property fails, because those are assertable mathematics; `analyze`
//! exits zero as long as the pipeline runs, because verdicts are scientific
//! reports whose failures belong in the log, not the exit code.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cascade_lab::cover::{build_cover, verify_cover, CoverStrategy};
use cascade_lab::cutoff::{domain_cutoff, verify_cutoff};
use cascade_lab::diagnostics::{scale_diagnostics, StructuralConstants};
use cascade_lab::ensemble::{
    cascade_verdict, element_cutoffs, locality_from_verdict, CascadeStatement, CascadeVerdict,
    CoverAverager, CutoffParams, VerdictConfig,
};
use cascade_lab::flux::{flux_component, flux_forms, flux_total_energy, FluxKind};
use cascade_lab::gen::{gen_field, FieldSpec};
use cascade_lab::grid::TWO_PI;
use cascade_lab::params::PhysParams;
use cascade_lab::report::{append_jsonl, verdicts_csv};
use cascade_lab::series::{FieldSeries, Snapshot};
use cascade_lab::solver::{
    pressure_from_fields, transport_coefficients, Form, ForcingSpec, PressureConvention,
    SolverConfig,
};
use cascade_lab::{Grid, ScalarField};

#[derive(Parser)]
#[command(name = "cascade-lab", version, about = "Scale-by-scale flux analysis of MHD runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run and store its snapshot series.
    Simulate(RunArgs),
    /// Ensemble-average fluxes over covers and log cascade verdicts and
    /// locality reports.
    Analyze(RunArgs),
    /// Run the exact-property suites (cover bounds, cutoff audits, average
    /// brackets, flux identities); nonzero exit on any violation.
    Verify(VerifyArgs),
    /// Render CSV, summary, and plot-data files from an analysis log.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Cover-jitter seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config and CASCADE_LAB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Pipeline config naming a stored series; omit to audit the built-in
    /// analytic-field fixture.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the verify report; omit to print only.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Cover-jitter seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config and CASCADE_LAB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Pipeline config whose output directory holds verdicts.jsonl.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding verdicts.jsonl; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CommandKind {
    Simulate,
    Analyze,
    Verify,
    Report,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Analyze => "analyze",
            CommandKind::Verify => "verify",
            CommandKind::Report => "report",
        };
        f.write_str(s)
    }
}

/// One pipeline run, start to finish. The `command` field pins what the
/// file is for, so a config cannot be fed to the wrong subcommand silently.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    command: CommandKind,
    output: PathBuf,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    threads: Option<usize>,
    /// Run description for `simulate`; also supplies the forcing default
    /// for `analyze` on the same config.
    #[serde(default)]
    solver: Option<SolverConfig>,
    /// Steps between stored snapshots.
    #[serde(default = "default_stride")]
    snapshot_stride: usize,
    /// Snapshot directory written by `simulate`, consumed by `analyze` and
    /// `verify`.
    #[serde(default)]
    series: Option<PathBuf>,
    #[serde(default)]
    analysis: AnalysisSection,
}

fn default_seed() -> u64 {
    1
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AnalysisSection {
    /// Scales to test; empty selects the half-dyadic ladder clipped to the
    /// claimed range.
    scales: Vec<f64>,
    covers_per_scale: usize,
    k1: usize,
    k2: usize,
    strategy: CoverStrategy,
    rho: f64,
    delta: f64,
    c_total: f64,
    c_split: f64,
    statements: Vec<CascadeStatement>,
    form: Form,
    /// Forcing of the run that produced the series; defaults to the
    /// config's solver forcing.
    forcing: Option<ForcingSpec>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let cutoff = CutoffParams::default();
        Self {
            scales: Vec::new(),
            covers_per_scale: 3,
            k1: 8,
            k2: 8,
            strategy: CoverStrategy::JitteredLattice,
            rho: cutoff.rho,
            delta: cutoff.delta,
            c_total: 1.0,
            c_split: 1.0,
            statements: CascadeStatement::ALL.to_vec(),
            form: Form::Dimensional,
            forcing: None,
        }
    }
}

impl AnalysisSection {
    fn cutoff(&self) -> CutoffParams {
        CutoffParams { rho: self.rho, delta: self.delta }
    }

    fn constants(&self) -> StructuralConstants {
        StructuralConstants {
            c_total: self.c_total,
            c_split: self.c_split,
            k1: self.k1 as f64,
            k2: self.k2 as f64,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = resolve_config(&args, CommandKind::Simulate)?;
            let out = prepare_output(&cfg)?;
            write_manifest(&out, &cfg)?;
            run_simulate(&cfg, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => {
            let cfg = resolve_config(&args, CommandKind::Analyze)?;
            let out = prepare_output(&cfg)?;
            write_manifest(&out, &cfg)?;
            run_analyze(&cfg, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let cfg = match &args.config {
                Some(path) => {
                    let mut cfg = load_config(path)?;
                    expect_command(&cfg, path, CommandKind::Verify)?;
                    if let Some(seed) = args.seed {
                        cfg.seed = seed;
                    }
                    if let Some(out) = &args.output {
                        cfg.output = out.clone();
                    }
                    cfg.threads = args.threads.or(cfg.threads);
                    Some(cfg)
                }
                None => None,
            };
            init_threads(args.threads.or(cfg.as_ref().and_then(|c| c.threads)))?;
            let out = args
                .output
                .clone()
                .or_else(|| cfg.as_ref().map(|c| c.output.clone()));
            if let Some(dir) = &out {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                if let Some(cfg) = &cfg {
                    write_manifest(dir, cfg)?;
                }
            }
            let seed = args.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(1);
            let ok = run_verify(cfg.as_ref(), seed, out.as_deref())?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Report(args) => {
            let out = match (&args.output, &args.config) {
                (Some(dir), _) => dir.clone(),
                (None, Some(path)) => {
                    let cfg = load_config(path)?;
                    cfg.output
                }
                (None, None) => bail!("report needs --output or --config"),
            };
            run_report(&out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn resolve_config(args: &RunArgs, kind: CommandKind) -> anyhow::Result<PipelineConfig> {
    let mut cfg = load_config(&args.config)?;
    expect_command(&cfg, &args.config, kind)?;
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.threads = args.threads.or(cfg.threads);
    init_threads(cfg.threads)?;
    Ok(cfg)
}

fn load_config(path: &Path) -> anyhow::Result<PipelineConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        anyhow!("config {}: key {}: {}", path.display(), e.path(), e.inner())
    })
}

fn expect_command(
    cfg: &PipelineConfig,
    path: &Path,
    kind: CommandKind,
) -> anyhow::Result<()> {
    if cfg.command != kind {
        bail!(
            "config {} declares command {} but was invoked as {}",
            path.display(),
            cfg.command,
            kind
        );
    }
    Ok(())
}

fn init_threads(n: Option<usize>) -> anyhow::Result<()> {
    let n = match n {
        Some(n) => Some(n),
        None => match std::env::var("CASCADE_LAB_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .with_context(|| format!("CASCADE_LAB_THREADS = {v:?} is not a count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    Ok(())
}

fn prepare_output(cfg: &PipelineConfig) -> anyhow::Result<PathBuf> {
    let out = cfg.output.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: CommandKind,
    package: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    threads: Option<usize>,
    /// Fully resolved config (flag overrides applied); rerunning this
    /// command on this block reproduces the outputs byte for byte.
    config: &'a PipelineConfig,
}

fn write_manifest(dir: &Path, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let canonical = serde_json::to_string(cfg).context("serializing the config")?;
    let digest = Sha256::digest(canonical.as_bytes());
    let manifest = Manifest {
        command: cfg.command,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        seed: cfg.seed,
        threads: cfg.threads,
        config: cfg,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).context("serializing the manifest")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_simulate(cfg: &PipelineConfig, out: &Path) -> anyhow::Result<()> {
    let solver = cfg
        .solver
        .as_ref()
        .ok_or_else(|| anyhow!("simulate needs a solver section in the config"))?;
    let series_dir = out.join("series");
    let (series, stats) = cascade_lab::solver::run(solver, cfg.snapshot_stride, Some(&series_dir))?;
    let stats_path = out.join("stats.json");
    let text = serde_json::to_string_pretty(&stats).context("serializing run stats")?;
    fs::write(&stats_path, text + "\n")
        .with_context(|| format!("writing {}", stats_path.display()))?;
    println!(
        "integrated {} steps, stored {} snapshots in {}",
        stats.steps,
        series.len(),
        series_dir.display()
    );
    Ok(())
}

fn open_series(cfg: &PipelineConfig) -> anyhow::Result<FieldSeries> {
    let dir = cfg
        .series
        .as_ref()
        .ok_or_else(|| anyhow!("{} needs a series path in the config", cfg.command))?;
    FieldSeries::open_dir(dir).with_context(|| format!("opening series {}", dir.display()))
}

fn run_analyze(cfg: &PipelineConfig, out: &Path) -> anyhow::Result<()> {
    let series = open_series(cfg)?;
    let a = &cfg.analysis;
    let params = *series.params();
    let constants = a.constants();
    constants.validate()?;

    let domain = domain_cutoff(
        params.r0,
        a.rho,
        a.delta,
        series.grid(),
        series.times(),
        params.t_horizon,
    )?;
    let diag = scale_diagnostics(&series, &domain, a.delta, constants, a.form)?;
    let vcfg = VerdictConfig {
        scales: a.scales.clone(),
        covers_per_scale: a.covers_per_scale,
        k1: a.k1,
        k2: a.k2,
        seed: cfg.seed,
        strategy: a.strategy,
        cutoff: a.cutoff(),
        form: a.form,
        forcing: a.forcing.or_else(|| cfg.solver.as_ref().and_then(|s| s.forcing)),
    };

    let verdict_log = out.join("verdicts.jsonl");
    let locality_log = out.join("locality.jsonl");
    let mut verdicts = Vec::new();
    for &statement in &a.statements {
        let v = cascade_verdict(&series, &diag, statement, &vcfg)?;
        if v.range_empty {
            println!(
                "{statement}: inertial range empty (floor {:.4e} > r0 {:.4e})",
                v.inertial_floor, v.r0
            );
        } else {
            let passed = v.scales.iter().filter(|r| r.pass).count();
            println!(
                "{statement}: {passed}/{} scales inside [{:.4e}, {:.4e}], {} skipped",
                v.scales.len(),
                v.lower,
                v.upper,
                v.skipped_scales.len()
            );
        }
        append_jsonl(&verdict_log, &v)?;
        if let Some(loc) = locality_from_verdict(&v)? {
            append_jsonl(&locality_log, &loc)?;
        }
        verdicts.push(v);
    }
    let csv_path = out.join("verdicts.csv");
    fs::write(&csv_path, verdicts_csv(&verdicts))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    println!("logs in {}", out.display());
    Ok(())
}

/// Result of one exact-property check; `detail` carries the measured
/// numbers so a failure line is actionable on its own.
#[derive(Serialize)]
struct CheckLine {
    name: String,
    pass: bool,
    detail: String,
}

fn check(lines: &mut Vec<CheckLine>, name: &str, pass: bool, detail: String) {
    lines.push(CheckLine { name: name.to_string(), pass, detail });
}

/// Static analytic fields on a coarse grid: curl eigenfunctions for u and
/// b with their exact pressure, sampled at three times.
fn fixture_series() -> anyhow::Result<FieldSeries> {
    let grid = Grid::new(32, TWO_PI)?;
    let u = gen_field(grid, &FieldSpec::Abc { a: 1.0, b: 1.0, c: 1.0 })?;
    let b = gen_field(grid, &FieldSpec::Abc { a: 0.9, b: 0.4, c: 0.7 })?;
    let p = pressure_from_fields(&u, &b, 1.0, PressureConvention::Fluid)?;
    let params = PhysParams::from_transport(0.05, 0.05, TWO_PI / 4.0, 1.0)?;
    let snaps = [0.0, 0.5, 1.0]
        .into_iter()
        .map(|time| Snapshot { time, u: u.clone(), b: b.clone(), p: p.clone() })
        .collect();
    Ok(FieldSeries::in_memory(grid, params, snaps)?)
}

fn run_verify(
    cfg: Option<&PipelineConfig>,
    seed: u64,
    out: Option<&Path>,
) -> anyhow::Result<bool> {
    let analysis = cfg.map(|c| c.analysis.clone()).unwrap_or_default();
    let series = match cfg {
        Some(c) => open_series(c)?,
        None => fixture_series()?,
    };
    let grid = series.grid();
    let params = *series.params();
    let r0 = params.r0;
    let r = r0 / 2.0;
    let form = analysis.form;
    let (_, _, s) = transport_coefficients(&params, form);
    let mut lines = Vec::new();

    let lattice = build_cover(r0, r, analysis.k1, analysis.k2, CoverStrategy::Lattice, 0)?;
    let lat_check = verify_cover(&lattice, grid);
    check(
        &mut lines,
        "cover-lattice",
        lat_check.pass,
        format!(
            "n = {} in [{:.2}, {:.2}], multiplicity {}..={}",
            lat_check.n,
            lat_check.n_lower,
            lat_check.n_upper,
            lat_check.min_multiplicity,
            lat_check.max_multiplicity
        ),
    );
    let jittered =
        build_cover(r0, r, analysis.k1, analysis.k2, CoverStrategy::JitteredLattice, seed)?;
    let jit_check = verify_cover(&jittered, grid);
    check(
        &mut lines,
        "cover-jittered",
        jit_check.pass,
        format!(
            "seed {seed}, n = {}, multiplicity {}..={}",
            jit_check.n, jit_check.min_multiplicity, jit_check.max_multiplicity
        ),
    );

    let domain = domain_cutoff(
        r0,
        analysis.rho,
        analysis.delta,
        grid,
        series.times(),
        params.t_horizon,
    )?;
    let domain_audit = verify_cutoff(&domain);
    check(
        &mut lines,
        "cutoff-domain",
        domain_audit.pass,
        format!(
            "measured C0 = {:.3}, violation {:?}",
            domain_audit.measured_c0, domain_audit.violation
        ),
    );
    match element_cutoffs(&lattice, &domain) {
        Ok(cutoffs) => check(
            &mut lines,
            "cutoff-elements",
            true,
            format!("{} element weights audited", cutoffs.len()),
        ),
        Err(e) => check(&mut lines, "cutoff-elements", false, e.to_string()),
    }

    let averager = CoverAverager::new(&lattice, &domain)?;
    let snap0 = series.get(0)?;
    let energy_data: Vec<f64> = (0..grid.len())
        .map(|i| {
            let uu: f64 = (0..3).map(|c| snap0.u.comp(c)[i].powi(2)).sum();
            let bb: f64 = (0..3).map(|c| snap0.b.comp(c)[i].powi(2)).sum();
            0.5 * (uu + s * bb)
        })
        .collect();
    let noise = gen_field(
        grid,
        &FieldSpec::RandomSolenoidal {
            spectrum_exponent: 2.0,
            k_min: 1,
            k_max: 4,
            seed,
        },
    )?;
    let noise_sq: Vec<f64> = (0..grid.len())
        .map(|i| (0..3).map(|c| noise.comp(c)[i].powi(2)).sum())
        .collect();
    let densities = [
        ("sandwich-constant", ScalarField::from_fn(grid, |_, _, _| 1.0)),
        ("sandwich-energy", ScalarField::from_data(grid, energy_data)?),
        ("sandwich-random", ScalarField::from_data(grid, noise_sq)?),
    ];
    for (name, density) in &densities {
        let report = averager.check(density)?;
        check(
            &mut lines,
            name,
            report.pass,
            format!(
                "mean {:.6e} in [{:.6e}, {:.6e}], margin {:.3}",
                report.mean, report.lower, report.upper, report.rel_margin
            ),
        );
    }

    // Spectral quadrature closes the identity gap with resolution: the
    // domain weight sits at 1e-9 gaps by N = 64 but only a few 1e-4 on the
    // coarse fixture grid.
    let ibp_tol = if grid.n() >= 64 { 1e-8 } else { 5e-3 };
    for kind in [FluxKind::U, FluxKind::B, FluxKind::P, FluxKind::Ub] {
        let forms = flux_forms(&series, &domain, kind)?;
        let gap = forms.relative_gap();
        check(
            &mut lines,
            &format!("identity-{kind}"),
            gap <= ibp_tol,
            format!("relative gap {gap:.3e} (tolerance {ibp_tol:.0e})"),
        );
    }

    let total = flux_total_energy(&series, &domain, form, PressureConvention::Fluid)?.value;
    let parts: Vec<f64> = [FluxKind::U, FluxKind::B, FluxKind::P, FluxKind::Ub]
        .into_iter()
        .map(|kind| flux_component(&series, &domain, kind, form).map(|s| s.value))
        .collect::<cascade_lab::Result<_>>()?;
    let composite = parts[0] + 2.0 * s * parts[1] + parts[2] + s * parts[3];
    let scale = parts.iter().fold(total.abs(), |m, p| m.max(p.abs()));
    let gap = if scale == 0.0 { 0.0 } else { (total - composite).abs() / scale };
    check(
        &mut lines,
        "identity-composite",
        gap <= 1e-12,
        format!("total {total:.6e} vs parts {composite:.6e}, gap {gap:.3e}"),
    );

    let all_pass = lines.iter().all(|l| l.pass);
    for line in &lines {
        let tag = if line.pass { "ok  " } else { "FAIL" };
        println!("{tag} {}: {}", line.name, line.detail);
    }
    println!("{} checks, {} failed", lines.len(), lines.iter().filter(|l| !l.pass).count());
    if let Some(dir) = out {
        let path = dir.join("verify.json");
        let text = serde_json::to_string_pretty(&lines).context("serializing verify report")?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(all_pass)
}

#[derive(Serialize)]
struct StatementSummary {
    statement: CascadeStatement,
    label: String,
    range_empty: bool,
    scales_tested: usize,
    scales_passed: usize,
    scales_skipped: usize,
    empirical_constant: Option<f64>,
    time_scale_ok: bool,
    unit_kinetic_energy_ok: bool,
    defect_ok: bool,
}

fn run_report(out: &Path) -> anyhow::Result<()> {
    let log = out.join("verdicts.jsonl");
    let text = fs::read_to_string(&log)
        .with_context(|| format!("reading analysis log {}", log.display()))?;
    let verdicts: Vec<CascadeVerdict> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| anyhow!("parsing {}: {e}", log.display())))
        .collect::<anyhow::Result<_>>()?;
    if verdicts.is_empty() {
        bail!("analysis log {} holds no verdicts", log.display());
    }

    let csv_path = out.join("verdicts.csv");
    fs::write(&csv_path, verdicts_csv(&verdicts))
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let summaries: Vec<StatementSummary> = verdicts
        .iter()
        .map(|v| StatementSummary {
            statement: v.statement,
            label: cascade_lab::flux::kind_label(&v.kinds),
            range_empty: v.range_empty,
            scales_tested: v.scales.len(),
            scales_passed: v.scales.iter().filter(|r| r.pass).count(),
            scales_skipped: v.skipped_scales.len(),
            empirical_constant: v.empirical_constant,
            time_scale_ok: v.flags.time_scale_ok,
            unit_kinetic_energy_ok: v.flags.unit_kinetic_energy_ok,
            defect_ok: v.flags.defect_ok,
        })
        .collect();
    let summary_path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summaries).context("serializing the summary")?;
    fs::write(&summary_path, text + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;

    let plots = out.join("plots");
    fs::create_dir_all(&plots).with_context(|| format!("creating {}", plots.display()))?;
    for (i, v) in verdicts.iter().enumerate() {
        let mut data = String::from("scale,mean,lower_bound,upper_bound,in_range,pass\n");
        for row in &v.scales {
            data.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.scale, row.mean, row.lower, row.upper, row.in_range, row.pass
            ));
        }
        let path = plots.join(format!("{i:03}_{}.csv", v.statement));
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "rendered {} verdicts into {} and {}",
        verdicts.len(),
        csv_path.display(),
        plots.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                load_config(&path).unwrap_or_else(|e| panic!("{e:#}"));
                seen += 1;
            }
        }
        assert!(seen >= 4, "expected the bundled configs, found {seen}");
    }

    #[test]
    fn analysis_defaults_cover_all_statements() {
        let a = AnalysisSection::default();
        assert_eq!(a.statements.len(), CascadeStatement::ALL.len());
        assert_eq!((a.k1, a.k2), (8, 8));
        a.constants().validate().unwrap();
    }
}
