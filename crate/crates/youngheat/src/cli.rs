//! Command-line front end. Exit codes: 0 success, 1 usage or invalid
//! configuration, 2 I/O, 3 numerical failure (including failed checks).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use youngheat_core::asymptotics::{off_diagonal_pipeline, on_diagonal_pipeline, PipelineConfig};
use youngheat_core::cameron_martin::{minimize_energy, multi_start, MinimizerOptions};
use youngheat_core::expansion::{build_lattice, chaos_coefficients, phi_hierarchy, LatticeKind};
use youngheat_core::fbm::{sample_paths, FbmSampler, SamplerKind};
use youngheat_core::malliavin::{estimate_density, nondegeneracy_profile};
use youngheat_core::young::solve_ode;
use youngheat_core::{GridPath, HurstParam, VectorFieldSystem};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
use crate::exec::RayonExecutor;
use crate::formats::{self, OutputDir, PathContainer};
use crate::registry::{self, Model};
use crate::verify::{self, VerifySettings};

#[derive(Parser, Debug)]
#[command(name = "youngheat", version, about = "Short-time density experiments for fBm-driven Young SDEs")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample an fBm ensemble (CSV and binary container).
    Sample(ConfigArgs),
    /// Solve the SDE along sampled drivers, with Jacobians.
    Solve(ConfigArgs),
    /// Expansion hierarchy along sampled noise, and chaos coefficients at the start point.
    Expand(ConfigArgs),
    /// Print exponent lattices as `kind,p,q,value`.
    Lattice {
        /// One of L1, L2, L2', L3, L3', L4; all when omitted.
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Kernel density estimate of the transition density.
    Density {
        /// Also write the non-degeneracy profile over eps in {1, 1/2, 1/4, 1/8}.
        #[arg(long)]
        profile: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Energy minimizer between `a` and `a_prime`.
    Minimize {
        /// Additional random starts whose energies are compared.
        #[arg(long, default_value_t = 0)]
        starts: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a verification suite: fbm, young, expansion, malliavin, cm, on-diag, off-diag, properties.
    Verify {
        suite: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Asymptotic fit report: on-diag or off-diag.
    Report {
        kind: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Configuration file plus per-key overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Key-value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long = "H")]
    pub hurst: Option<String>,
    #[arg(long = "N")]
    pub steps: Option<String>,
    #[arg(long = "M")]
    pub samples: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub dims: Option<String>,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Target point, comma separated.
    #[arg(long = "a-prime", allow_hyphen_values = true)]
    pub a_prime: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    /// Evaluation points `x,y;x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// `geometric:lo:hi:count` or a comma list.
    #[arg(long = "t-grid")]
    pub t_grid: Option<String>,
    #[arg(long)]
    pub cutoff: Option<String>,
    #[arg(long = "kappa-max")]
    pub kappa_max: Option<String>,
    /// `silverman`, `scale:<f>` or `fixed:<h>`.
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub nodes: Option<String>,
    /// Output directory (overrides the config and the environment).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> AppResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("model", &self.model),
            ("b", &self.b),
            ("H", &self.hurst),
            ("N", &self.steps),
            ("M", &self.samples),
            ("seed", &self.seed),
            ("dims", &self.dims),
            ("a", &self.a),
            ("a_prime", &self.a_prime),
            ("t", &self.t),
            ("points", &self.points),
            ("t_grid", &self.t_grid),
            ("cutoff", &self.cutoff),
            ("kappa_max", &self.kappa_max),
            ("bandwidth", &self.bandwidth),
            ("nodes", &self.nodes),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.output_dir = match &self.out {
            Some(o) => o.clone(),
            None => cfg.resolved_output_dir(),
        };
        Ok(cfg)
    }
}

/// `M` for sample, solve, expand and density when unset.
pub const DEFAULT_SAMPLES: usize = 1000;

/// What a command did, for the one-line summary on stdout.
pub struct Outcome {
    pub summary: String,
    pub code: i32,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_model(cfg: &mut ExperimentConfig) -> AppResult<Model> {
    let m = registry::resolve(&cfg.model, cfg.b)?;
    if let (Some(want), Some(got)) = (&cfg.model_digest, m.digest()) {
        if *want != got {
            return Err(AppError::Config(format!("coefficient table changed: sha256 {got}, config expects {want}")));
        }
    }
    cfg.model_digest = m.digest();
    Ok(m)
}

fn point_or(v: &Option<Vec<f64>>, n: usize, fill: f64, key: &str) -> AppResult<Vec<f64>> {
    match v {
        Some(p) if p.len() == n => Ok(p.clone()),
        Some(p) => Err(AppError::Config(format!("{key} has {} entries, the model has dimension {n}", p.len()))),
        None => Ok(vec![fill; n]),
    }
}

fn require_elliptic<V: VectorFieldSystem + ?Sized>(vf: &V, points: &[&[f64]]) -> AppResult<()> {
    for p in points {
        let e = youngheat_core::young::ellipticity(vf, p);
        if !(e > 1e-10) {
            return Err(youngheat_core::Error::DegenerateDiffusion { min_eigenvalue: e }.into());
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> AppResult<Outcome> {
    let exec = RayonExecutor::new(cli.threads);
    match &cli.command {
        Command::Sample(args) => cmd_sample(args.resolve()?, &exec),
        Command::Solve(args) => cmd_solve(args.resolve()?, &exec),
        Command::Expand(args) => cmd_expand(args.resolve()?, &exec),
        Command::Lattice { kind, cfg } => cmd_lattice(cfg.resolve()?, kind.as_deref()),
        Command::Density { profile, cfg } => cmd_density(cfg.resolve()?, *profile, &exec),
        Command::Minimize { starts, cfg } => cmd_minimize(cfg.resolve()?, *starts),
        Command::Verify { suite, cfg } => cmd_verify(cfg.resolve()?, suite, &exec),
        Command::Report { kind, cfg } => cmd_report(cfg.resolve()?, kind, &exec),
    }
}

fn write_container(out: &mut OutputDir, stem: &str, c: &PathContainer, tagged: bool) -> AppResult<()> {
    out.write_with(&format!("{stem}.csv"), |buf| Ok(c.write_csv(buf, tagged)?))?;
    out.write_with(&format!("{stem}.bin"), |buf| Ok(c.write_binary(buf)?))
}

pub fn cmd_sample(cfg: ExperimentConfig, exec: &RayonExecutor) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let m = cfg.samples_or(DEFAULT_SAMPLES);
    let ens = sample_paths(h, cfg.dims, cfg.steps, m, cfg.seed, exec)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let c = PathContainer { hurst: h.value(), seed: cfg.seed, series: "fbm".into(), paths: ens.paths };
    write_container(&mut out, "ensemble", &c, false)?;
    let details = json!({ "H": h.value(), "d": cfg.dims, "N": cfg.steps, "M": m, "seed": cfg.seed });
    out.finish("sample", &[], &cfg, details)?;
    Ok(Outcome { summary: format!("sampled {m} paths into {}", cfg.output_dir.display()), code: EXIT_OK })
}

pub fn cmd_solve(mut cfg: ExperimentConfig, exec: &RayonExecutor) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let vf = load_model(&mut cfg)?;
    let a = point_or(&cfg.a, vf.state_dim(), 0.0, "a")?;
    let sampler = FbmSampler::new(h, cfg.steps, SamplerKind::Auto)?;
    let d = vf.driver_dim();
    let sols = youngheat_core::Executor::map_indexed(exec, cfg.samples_or(DEFAULT_SAMPLES), |m| {
        solve_ode(&vf, &sampler.sample_path(d, cfg.seed, m as u64), 1.0, &a)
    });
    let sols = sols.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mk = |series: &str, f: fn(&youngheat_core::young::YoungSolution) -> &GridPath| PathContainer {
        hurst: h.value(),
        seed: cfg.seed,
        series: series.into(),
        paths: sols.iter().map(|s| f(s).clone()).collect(),
    };
    let series = [mk("state", |s| &s.y), mk("jacobian", |s| &s.jac), mk("jacobian_inv", |s| &s.jac_inv)];
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_with("solution.csv", |buf| Ok(formats::write_tagged_csv(buf, &series)?))?;
    for c in &series {
        out.write_with(&format!("{}.bin", c.series), |buf| Ok(c.write_binary(buf)?))?;
    }
    let worst = sols.iter().map(|s| s.identity_residual()).fold(0.0, f64::max);
    out.finish("solve", &[], &cfg, json!({ "max_identity_residual": worst }))?;
    Ok(Outcome { summary: format!("solved {} paths; max |J Jinv - Id| = {worst:.3e}", sols.len()), code: EXIT_OK })
}

pub fn cmd_expand(mut cfg: ExperimentConfig, exec: &RayonExecutor) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let vf = load_model(&mut cfg)?;
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    let a = point_or(&cfg.a, n, 0.0, "a")?;
    let gamma = match &cfg.a_prime {
        Some(_) => {
            let ap = point_or(&cfg.a_prime, n, 0.0, "a_prime")?;
            let opts = MinimizerOptions { nodes: cfg.nodes, steps: cfg.steps, ..Default::default() };
            minimize_energy(&vf, &a, &ap, h, &opts)?.gamma_bar
        }
        None => GridPath::zeros(d, cfg.steps),
    };
    let sampler = FbmSampler::new(h, cfg.steps, SamplerKind::Auto)?;
    let hiers = youngheat_core::Executor::map_indexed(exec, cfg.samples_or(DEFAULT_SAMPLES), |m| {
        phi_hierarchy(&gamma, &sampler.sample_path(d, cfg.seed, m as u64), &vf, &a, h, cfg.kappa_max)
    });
    let hiers = hiers.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut containers = Vec::new();
    for (i, e) in hiers[0].kappas.iter().enumerate() {
        containers.push(PathContainer {
            hurst: h.value(),
            seed: cfg.seed,
            series: format!("phi({},{})", e.p, e.q),
            paths: hiers.iter().map(|hh| hh.phi[i].clone()).collect(),
        });
    }
    out.write_with("hierarchy.csv", |buf| Ok(formats::write_tagged_csv(buf, &containers)?))?;
    for c in &containers {
        let name = c.series.replace(['(', ')'], "").replace(',', "_");
        out.write_with(&format!("{name}.bin"), |buf| Ok(c.write_binary(buf)?))?;
    }
    let cutoff = cfg.cutoff.unwrap_or(cfg.kappa_max);
    let chaos = chaos_coefficients(&vf, &a, h, cutoff)?;
    out.write_with("chaos.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["index".to_string(), "p".into(), "q".into(), "weight".into()];
        header.extend((0..n).map(|k| format!("coeff{k}")));
        w.write_record(&header)?;
        for t in &chaos {
            let idx = t.index.iter().map(|j| j.to_string()).collect::<Vec<_>>().join("-");
            let mut row = vec![idx, t.weight.p.to_string(), t.weight.q.to_string(), t.weight.value.to_string()];
            row.extend(t.coeff.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let kappas: Vec<f64> = hiers[0].kappas.iter().map(|k| k.value).collect();
    out.finish("expand", &[], &cfg, json!({ "kappas": kappas, "chaos_terms": chaos.len() }))?;
    Ok(Outcome { summary: format!("{} hierarchy terms, {} chaos terms", kappas.len(), chaos.len()), code: EXIT_OK })
}

pub fn cmd_lattice(cfg: ExperimentConfig, kind: Option<&str>) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let cutoff = cfg.cutoff.unwrap_or(3.0);
    let kinds: Vec<LatticeKind> = match kind {
        Some(k) => vec![LatticeKind::parse(k).ok_or_else(|| AppError::Usage(format!("unknown lattice kind `{k}`")))?],
        None => LatticeKind::ALL.to_vec(),
    };
    let lats = kinds.iter().map(|&k| build_lattice(k, h, cutoff)).collect::<Result<Vec<_>, _>>()?;
    let mut table = Vec::new();
    formats::write_lattice_table(&mut table, &lats).map_err(|e| AppError::format("lattice.csv", e))?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_bytes("lattice.csv", &table)?;
    let args: Vec<String> = kind.map(|k| vec![format!("--kind={k}")]).unwrap_or_default();
    out.finish("lattice", &args, &cfg, json!({ "cutoff": cutoff }))?;
    Ok(Outcome { summary: String::from_utf8_lossy(&table).trim_end().to_string(), code: EXIT_OK })
}

pub fn cmd_density(mut cfg: ExperimentConfig, profile: bool, exec: &RayonExecutor) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let vf = load_model(&mut cfg)?;
    let n = vf.state_dim();
    let a = point_or(&cfg.a, n, 0.0, "a")?;
    let points = match (&cfg.points, &cfg.a_prime) {
        (Some(p), _) => p.clone(),
        (None, Some(ap)) => vec![ap.clone()],
        (None, None) => vec![a.clone()],
    };
    if points.iter().any(|p| p.len() != n) {
        return Err(AppError::Config(format!("evaluation points must have dimension {n}")));
    }
    let est = estimate_density(
        &vf,
        &a,
        h,
        cfg.t,
        &points,
        cfg.steps,
        cfg.samples_or(DEFAULT_SAMPLES),
        cfg.seed,
        cfg.bandwidth,
        exec,
    )?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_with("density.csv", |buf| Ok(formats::write_density_csv(buf, &est)?))?;
    let mut args = Vec::new();
    if profile {
        let p = nondegeneracy_profile(
            &vf,
            &a,
            h,
            &[1.0, 0.5, 0.25, 0.125],
            &[1.0, 2.0],
            cfg.steps,
            cfg.samples_or(DEFAULT_SAMPLES),
            cfg.seed,
            exec,
        )?;
        out.write_with("profile.csv", |buf| Ok(formats::write_profile_csv(buf, &p)?))?;
        args.push("--profile".to_string());
    }
    let details = json!({
        "bandwidth": est.bandwidth,
        "half_bandwidth": est.bandwidth.iter().map(|b| b / 2.0).collect::<Vec<_>>(),
        "box_mass": est.box_mass,
        "samples": est.sample_count,
    });
    out.finish("density", &args, &cfg, details)?;
    Ok(Outcome { summary: format!("density at {} point(s): {:?}", points.len(), est.values), code: EXIT_OK })
}

pub fn cmd_minimize(mut cfg: ExperimentConfig, starts: usize) -> AppResult<Outcome> {
    let h = cfg.validate()?;
    let vf = load_model(&mut cfg)?;
    let n = vf.state_dim();
    let a = point_or(&cfg.a, n, 0.0, "a")?;
    let ap = point_or(&cfg.a_prime, n, 1.0, "a_prime")?;
    require_elliptic(&vf, &[&a, &ap])?;
    let opts = MinimizerOptions { nodes: cfg.nodes, steps: cfg.steps, ..Default::default() };
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let sol = minimize_energy(&vf, &a, &ap, h, &opts)?;
    out.write_json("minimizer.json", &sol)?;
    let mut args = Vec::new();
    if starts > 0 {
        let rep = multi_start(&vf, &a, &ap, h, &opts, starts, cfg.seed)?;
        out.write_json(
            "multi_start.json",
            &json!({ "energies": rep.energies, "failures": rep.failures, "spread": rep.spread }),
        )?;
        args.push(format!("--starts={starts}"));
    }
    let details = json!({ "energy": sol.energy, "iterations": sol.iterations });
    out.finish("minimize", &args, &cfg, details)?;
    Ok(Outcome {
        summary: format!(
            "energy {:.12} after {} iterations (endpoint residual {:.2e})",
            sol.energy, sol.iterations, sol.endpoint_residual
        ),
        code: EXIT_OK,
    })
}

pub fn verify_settings(cfg: &ExperimentConfig) -> VerifySettings {
    VerifySettings { seed: cfg.seed, hurst: cfg.hurst, model: cfg.model.clone(), b: cfg.b, samples: cfg.samples }
}

pub fn cmd_verify(cfg: ExperimentConfig, suite: &str, exec: &RayonExecutor) -> AppResult<Outcome> {
    cfg.validate()?;
    let settings = verify_settings(&cfg);
    let report = verify::run_suite(suite, &settings, exec)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(&format!("verify-{suite}.json"), &report)?;
    out.finish("verify", &[suite.to_string()], &cfg, json!({ "pass": report.pass }))?;
    let mut lines = Vec::new();
    for c in &report.checks {
        lines.push(format!(
            "{} {}: value {:.6e}, target {:.6e} ({} {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.kind,
            c.tolerance
        ));
    }
    lines.push(format!("suite {suite}: {}", if report.pass { "PASS" } else { "FAIL" }));
    Ok(Outcome { summary: lines.join("\n"), code: if report.pass { EXIT_OK } else { EXIT_NUMERIC } })
}

pub fn cmd_report(mut cfg: ExperimentConfig, kind: &str, exec: &RayonExecutor) -> AppResult<Outcome> {
    let h: HurstParam = cfg.validate()?;
    let vf = load_model(&mut cfg)?;
    let n = vf.state_dim();
    let a = point_or(&cfg.a, n, 0.0, "a")?;
    let mut p = PipelineConfig::new(h);
    p.steps = cfg.steps;
    p.samples = cfg.samples_or(p.samples);
    p.seed = cfg.seed;
    p.t_grid = cfg.t_grid.points();
    p.bandwidth = cfg.bandwidth;
    if let Some(c) = cfg.cutoff {
        p.cutoff = c;
    }
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let summary = match kind {
        "on-diag" => {
            let rep = on_diagonal_pipeline(&vf, &a, &p, exec)?;
            out.write_json("report.json", &rep)?;
            out.write_with("report.csv", |buf| Ok(formats::write_report_csv(buf, &rep.points, &rep.fit)?))?;
            format!(
                "c0 = {:.6} +- {:.6} (Gaussian prediction {:.6})",
                rep.fit.coefficients[0], rep.fit.std_errors[0], rep.leading_constant
            )
        }
        "off-diag" => {
            let ap = point_or(&cfg.a_prime, n, 1.0, "a_prime")?;
            let opts = MinimizerOptions { nodes: cfg.nodes, ..Default::default() };
            let rep = off_diagonal_pipeline(&vf, &a, &ap, &p, &opts, exec)?;
            out.write_json("report.json", &rep)?;
            out.write_with("report.csv", |buf| Ok(formats::write_report_csv(buf, &rep.points, &rep.fit)?))?;
            format!(
                "energy {:.8}, beta {:.6}, alpha_0 = {:.6} +- {:.6}",
                rep.energy, rep.beta, rep.leading_coeff, rep.leading_std_error
            )
        }
        _ => return Err(AppError::Usage(format!("unknown report `{kind}`; use on-diag or off-diag"))),
    };
    out.finish("report", &[kind.to_string()], &cfg, serde_json::Value::Null)?;
    Ok(Outcome { summary, code: EXIT_OK })
}
