//! Command-line pipeline over the scattering/NLS toolkit: computes
//! scattering data, builds the eigenfunction basis, evolves the cubic NLS,
//! extracts modified-scattering diagnostics, and runs the verification
//! suite. Every command writes a reproducible run manifest.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nlspot_core::asymptotics::{
    correct_minus, correct_plus, extract_profiles, physical_asymptotics,
};
use nlspot_core::distorted::{build_basis_with, commensurate_dk, BasisOptions, DistortedBasis};
use nlspot_core::dynamics::{evolve, gaussian_data, Scheme};
use nlspot_core::formats::{
    content_hash, modified_profile_csv, scattering_bytes, scattering_csv, write_basis,
    write_field_state, write_jost_field, PipelineConfig,
};
use nlspot_core::grid::{KGrid, XGrid};
use nlspot_core::jost::{solve_m, JostField, Side, SolveOptions};
use nlspot_core::potential::{hypothesis_report, sample_potential, PotentialSpec};
use nlspot_core::scattering::{compute_tr, genericity_report, ScatteringData};
use nlspot_core::verify::{run_all, VerifyOverrides};

#[derive(Parser)]
#[command(name = "nlspot", version, about = "1D Schrodinger scattering apparatus and cubic NLS simulation")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Criterion filter for `verify` (substring of the slug).
    #[arg(long, global = true)]
    filter: Option<String>,
    /// Fail `scatter` on hypothesis-report violations.
    #[arg(long, global = true)]
    strict: bool,
    /// Seed for the randomized test batteries.
    #[arg(long, global = true, default_value_t = 20260811)]
    seed: u64,
    /// Worker threads (defaults to the logical core count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute T/R coefficients and the genericity report.
    Scatter,
    /// Build and persist the distorted eigenfunction basis.
    Basis,
    /// Evolve the cubic NLS and write snapshots.
    Evolve,
    /// Extract profiles and modified-scattering diagnostics.
    Asymptotics,
    /// Run the acceptance criteria.
    Verify,
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool_version: String,
    command: String,
    config_hash: Option<String>,
    seed: u64,
    input_paths: Vec<String>,
    output_paths: Vec<OutputRecord>,
    timing_s: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification_summary: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    notes: Option<serde_json::Value>,
}

impl Manifest {
    fn new(command: &str, cfg: Option<&PipelineConfig>, config_path: Option<&Path>, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: cfg.map(|c| c.hash()),
            seed,
            input_paths: config_path.iter().map(|p| p.display().to_string()).collect(),
            output_paths: Vec::new(),
            timing_s: BTreeMap::new(),
            verification_summary: None,
            notes: None,
        }
    }

    fn record(&mut self, path: &Path) -> anyhow::Result<()> {
        self.output_paths.push(OutputRecord {
            path: path.display().to_string(),
            sha256: nlspot_core::formats::file_hash(path)?,
        });
        Ok(())
    }

    fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<(PipelineConfig, PathBuf)> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| anyhow::anyhow!("this command requires --config PATH"))?;
    let cfg = PipelineConfig::from_path(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok((cfg, path))
}

/// Potential respecified on a stage grid (catalog families resample
/// analytically; custom samples must already match).
fn spec_on_grid(base: &PotentialSpec, x_min: f64, x_max: f64, n_x: usize) -> anyhow::Result<PotentialSpec> {
    let grid = XGrid::new(x_min, x_max, n_x)?;
    if base.samples.is_some() && grid != base.grid {
        bail!("custom_samples potentials require the stage grid to match the sample grid");
    }
    Ok(PotentialSpec { grid, ..base.clone() })
}

struct ScatterOutput {
    spec: PotentialSpec,
    jost: JostField,
    sd: ScatteringData,
}

fn run_scatter_stage(cfg: &PipelineConfig) -> anyhow::Result<ScatterOutput> {
    let base = cfg.potential_spec()?;
    let s = &cfg.scattering;
    let spec = spec_on_grid(&base, s.x_min, s.x_max, s.n_x)?;
    let kg = KGrid::staggered(s.dk, s.n_k)?;
    let jost = solve_m(
        &spec,
        &kg,
        &spec.grid,
        Side::Both,
        SolveOptions { derivative_order: 1, oversample: s.oversample },
    )?;
    let sd = compute_tr(&jost, &spec, s.tol_cross)?;
    Ok(ScatterOutput { spec, jost, sd })
}

fn build_stage_basis(cfg: &PipelineConfig) -> anyhow::Result<(DistortedBasis, ScatteringData, PotentialSpec)> {
    let base = cfg.potential_spec()?;
    let b = &cfg.basis;
    let spec = spec_on_grid(&base, b.x_min, b.x_max, b.n_x)?;
    let dk = commensurate_dk(&spec.grid);
    let n_half = (b.k_max / dk).floor() as usize;
    let kg = KGrid::staggered(dk, n_half)?;
    let jost = solve_m(
        &spec,
        &kg,
        &spec.grid,
        Side::Both,
        SolveOptions { derivative_order: 0, oversample: b.oversample },
    )?;
    let sd = compute_tr(&jost, &spec, cfg.scattering.tol_cross)?;
    let provenance = content_hash(&scattering_bytes(&sd));
    let basis = build_basis_with(
        &sd,
        &jost,
        BasisOptions { with_parts: b.with_parts, without_dual: false, provenance: Some(provenance) },
    )?;
    Ok((basis, sd, spec))
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Scatter => cmd_scatter(cli),
        Command::Basis => cmd_basis(cli),
        Command::Evolve => cmd_evolve(cli),
        Command::Asymptotics => cmd_asymptotics(cli),
        Command::Verify => cmd_verify(cli),
    }
}

fn cmd_scatter(cli: &Cli) -> anyhow::Result<ExitCode> {
    let (cfg, path) = load_config(cli)?;
    let mut manifest = Manifest::new("scatter", Some(&cfg), Some(&path), cli.seed);
    let t0 = Instant::now();
    let out = run_scatter_stage(&cfg)?;
    manifest.timing_s.insert("scatter".into(), t0.elapsed().as_secs_f64());

    let v = sample_potential(&out.spec)?;
    let hyp = hypothesis_report(&out.spec, &v)?;
    let generic = genericity_report(&out.jost, &out.sd, &out.spec)?;

    let csv_path = cli.out.join("scattering.csv");
    std::fs::write(&csv_path, scattering_csv(&out.sd))?;
    manifest.record(&csv_path)?;

    let jost_path = cli.out.join("jost_field.bin");
    write_jost_field(&jost_path, &out.jost)?;
    manifest.record(&jost_path)?;

    let report_path = cli.out.join("scatter_report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "hypothesis": hyp,
            "genericity": generic,
            "max_unitarity_defect": out.sd.max_unitarity_defect(),
        }))?,
    )?;
    manifest.record(&report_path)?;
    manifest.write(&cli.out)?;

    let hypothesis_ok = hyp.positivity_flag && hyp.w21_finite && hyp.gamma_exceeds_6;
    if cli.strict && !hypothesis_ok {
        eprintln!(
            "hypothesis report violations: positivity={}, w21_finite={}, gamma>6={}",
            hyp.positivity_flag, hyp.w21_finite, hyp.gamma_exceeds_6
        );
        return Ok(ExitCode::from(2));
    }
    println!(
        "scattering data on {} frequencies; max unitarity defect {:.3e}; generic = {}",
        out.sd.k.len(),
        out.sd.max_unitarity_defect(),
        generic.is_generic
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_basis(cli: &Cli) -> anyhow::Result<ExitCode> {
    let (cfg, path) = load_config(cli)?;
    let mut manifest = Manifest::new("basis", Some(&cfg), Some(&path), cli.seed);
    let t0 = Instant::now();
    let (basis, sd, _) = build_stage_basis(&cfg)?;
    manifest.timing_s.insert("basis".into(), t0.elapsed().as_secs_f64());

    let csv_path = cli.out.join("scattering.csv");
    std::fs::write(&csv_path, scattering_csv(&sd))?;
    manifest.record(&csv_path)?;

    let basis_path = cli.out.join("basis.bin");
    write_basis(&basis_path, &basis)?;
    manifest.record(&basis_path)?;
    manifest.write(&cli.out)?;
    println!(
        "basis: {} frequencies x {} points, dk = {:.6e}",
        basis.n_k(),
        basis.x_grid.n,
        basis.dk
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_evolve(cli: &Cli) -> anyhow::Result<ExitCode> {
    let (cfg, path) = load_config(cli)?;
    let mut manifest = Manifest::new("evolve", Some(&cfg), Some(&path), cli.seed);
    let run_cfg = cfg.run_config();
    let b = &cfg.basis;
    let base = cfg.potential_spec()?;
    let spec = spec_on_grid(&base, b.x_min, b.x_max, b.n_x)?;
    let v = sample_potential(&spec)?;
    let grid = spec.grid;

    let basis = if matches!(run_cfg.scheme, Scheme::DistortedExactLinear) {
        let t0 = Instant::now();
        let (basis, _, _) = build_stage_basis(&cfg)?;
        manifest.timing_s.insert("basis".into(), t0.elapsed().as_secs_f64());
        Some(basis)
    } else {
        None
    };

    let u0 = gaussian_data(
        &grid,
        run_cfg.epsilon0,
        cfg.run.data.sigma,
        cfg.run.data.center,
        cfg.run.data.velocity,
    );
    let t0 = Instant::now();
    let result = evolve(&u0, &run_cfg, basis.as_ref(), &v, &grid)?;
    manifest.timing_s.insert("evolve".into(), t0.elapsed().as_secs_f64());
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let traj_dir = cli.out.join("traj");
    std::fs::create_dir_all(&traj_dir)?;
    for (i, state) in result.snapshots.iter().enumerate() {
        let p = traj_dir.join(format!("snapshot_{i:04}.bin"));
        write_field_state(&p, state, &grid)?;
        manifest.record(&p)?;
    }
    manifest.notes = Some(serde_json::json!({
        "scheme": run_cfg.scheme,
        "conserved": result.conserved.iter().map(|(t, m, h)| {
            serde_json::json!({"t": t, "mass": m, "hamiltonian": h})
        }).collect::<Vec<_>>(),
        "warnings": result.warnings,
    }));
    manifest.write(&cli.out)?;
    let (t_end, m_end, h_end) = *result.conserved.last().unwrap();
    println!(
        "evolved to t = {t_end}: {} snapshots, mass {m_end:.12e}, H {h_end:.12e}",
        result.snapshots.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_asymptotics(cli: &Cli) -> anyhow::Result<ExitCode> {
    let (cfg, path) = load_config(cli)?;
    let mut manifest = Manifest::new("asymptotics", Some(&cfg), Some(&path), cli.seed);

    let t0 = Instant::now();
    let (basis, sd, spec) = build_stage_basis(&cfg)?;
    manifest.timing_s.insert("basis".into(), t0.elapsed().as_secs_f64());
    let v = sample_potential(&spec)?;
    let grid = spec.grid;
    let run_cfg = cfg.run_config();
    let u0 = gaussian_data(
        &grid,
        run_cfg.epsilon0,
        cfg.run.data.sigma,
        cfg.run.data.center,
        cfg.run.data.velocity,
    );
    let t0 = Instant::now();
    let result = evolve(&u0, &run_cfg, Some(&basis), &v, &grid)?;
    manifest.timing_s.insert("evolve".into(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let profiles = extract_profiles(&result.snapshots, &basis)?;
    let plus = correct_plus(&profiles)?;
    // Negative times via conjugation apply verbatim only to real data.
    let minus = if cfg.run.data.velocity == 0.0 {
        Some(correct_minus(&profiles, &sd, cfg.asymptotics.rho)?)
    } else {
        None
    };
    manifest.timing_s.insert("asymptotics".into(), t0.elapsed().as_secs_f64());

    let csv_path = cli.out.join("modified_profile.csv");
    std::fs::write(&csv_path, modified_profile_csv(&plus))?;
    manifest.record(&csv_path)?;

    // Cauchy differences over dyadic snapshot pairs.
    let mut cauchy = Vec::new();
    for (i, &t) in plus.times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        if let Some(j) = plus.index_of_time(2.0 * t) {
            cauchy.push(serde_json::json!({
                "t": t, "t2": 2.0 * t, "sup_diff": plus.cauchy_difference(i, j)
            }));
        }
    }
    // Log-phase slope at the spectral peak.
    let last = plus.times.len() - 1;
    let j_star = (0..plus.k_pos.len())
        .max_by(|&a, &b| {
            let pa = plus.z[last][a].0.norm().max(plus.z[last][a].1.norm());
            let pb = plus.z[last][b].0.norm().max(plus.z[last][b].1.norm());
            pa.partial_cmp(&pb).unwrap()
        })
        .unwrap_or(0);
    let phase_slope = if plus.times.len() >= 3 {
        let (i1, i2) = (plus.times.len() / 2, last);
        let p1 = plus.accumulated_phase[i1][j_star].a.re;
        let p2 = plus.accumulated_phase[i2][j_star].a.re;
        (p2 - p1) / ((1.0 + plus.times[i2]) / (1.0 + plus.times[i1])).ln()
    } else {
        0.0
    };
    // Stationary-phase residual table.
    let mut residuals = Vec::new();
    for (i, &t) in profiles.times.iter().enumerate() {
        if t < 20.0 {
            continue;
        }
        let pred = physical_asymptotics(&profiles, i, &sd, &grid);
        let mut worst = 0.0f64;
        for (xi, p) in pred.iter().enumerate() {
            if let Some(p) = p {
                worst = worst.max((result.snapshots[i].u[xi] - p).norm());
            }
        }
        residuals.push(serde_json::json!({"t": t, "sup_residual": worst}));
    }
    let summary_path = cli.out.join("asymptotics_summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "cauchy_differences": cauchy,
            "log_phase_slope_at_peak": phase_slope,
            "peak_k": plus.k_pos[j_star],
            "physical_residuals": residuals,
            "modulus_defect_plus": plus.modulus_defect(),
            "modulus_defect_minus": minus.as_ref().map(|m| m.modulus_defect()),
            "threshold_rule": "k <= |t|^-rho evaluated at each interval midpoint",
            "alpha": cfg.asymptotics.alpha,
            "rho": cfg.asymptotics.rho,
        }))?,
    )?;
    manifest.record(&summary_path)?;
    manifest.write(&cli.out)?;
    println!(
        "asymptotics: {} snapshots, log-phase slope {phase_slope:.4e} at k = {:.3}",
        profiles.times.len(),
        plus.k_pos[j_star]
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli) -> anyhow::Result<ExitCode> {
    let mut overrides = VerifyOverrides::default();
    let mut cfg_loaded = None;
    if let Some(path) = &cli.config {
        let cfg = PipelineConfig::from_path(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        // A config makes the conservation criterion follow its dt; the rest
        // of the suite is self-contained by design.
        if (cfg.run.dt - 1e-3).abs() > 1e-12 {
            overrides.conservation_dt = Some(cfg.run.dt);
        }
        cfg_loaded = Some(cfg);
    }
    let mut manifest = Manifest::new(
        "verify",
        cfg_loaded.as_ref(),
        cli.config.as_deref(),
        cli.seed,
    );
    let t0 = Instant::now();
    let report = run_all(cli.filter.as_deref(), cli.seed, &overrides);
    manifest.timing_s.insert("verify".into(), t0.elapsed().as_secs_f64());
    for r in &report.results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {:2} ({}): {}", r.id, r.slug, r.details);
    }
    let report_path = cli.out.join("verify_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    manifest.record(&report_path)?;
    manifest.verification_summary = Some(serde_json::json!({
        "passed": report.results.iter().filter(|r| r.passed).count(),
        "failed": report.failed_slugs(),
    }));
    manifest.write(&cli.out)?;
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed criteria: {}", report.failed_slugs().join(", "));
        Ok(ExitCode::from(3))
    }
}
