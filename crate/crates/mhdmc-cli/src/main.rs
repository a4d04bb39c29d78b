//! Command line driver: single runs, deterministic convergence tables,
//! Monte Carlo error studies and reference ensemble construction.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mhdmc::diag::DiagnosticsRecord;
use mhdmc::io;
use mhdmc::mc::{self, Reference};
use mhdmc::scheme::NumParams;
use mhdmc::stochastic::{make_experiment, ExperimentSpec, SampleId};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mhdmc",
    version,
    about = "Finite volume solver for 2D viscous compressible MHD with random data",
    allow_negative_numbers = true
)]
struct Cli {
    /// TOML config file; command line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Experiment preset: sine, kh or ot
    #[arg(long, global = true)]
    experiment: Option<String>,
    /// Output directory (default: $MHDMC_OUT or ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flux regularization exponent, h^eps; must be > -1
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Time step as a multiple of h
    #[arg(long, global = true)]
    dt_factor: Option<f64>,
    /// Final time override
    #[arg(long = "T", global = true)]
    t_final: Option<f64>,
    /// Master seed for random data
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the unperturbed (zero random shift) data
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single forward run with diagnostics CSV and field snapshots
    Run(RunArgs),
    /// Deterministic mesh refinement error table against a fine reference run
    Convergence(ConvArgs),
    /// Monte Carlo statistical or total error study
    Mc(McArgs),
    /// Build and persist the reference ensemble used by mc
    Reference(RefArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Cells across the periodic direction
    #[arg(long)]
    nx: Option<usize>,
    /// Snapshot times, comma separated
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

#[derive(Args)]
struct ConvArgs {
    /// Coarse grids (cells across the periodic direction), comma separated
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// Reference mesh width h
    #[arg(long)]
    href: Option<f64>,
}

#[derive(Args)]
struct McArgs {
    /// Study grid (cells across the periodic direction)
    #[arg(long)]
    nx: Option<usize>,
    /// Sample counts N, comma separated
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Number of repetitions the error estimates are averaged over
    #[arg(long = "L")]
    l: Option<usize>,
    /// Reference ensemble size
    #[arg(long = "Mref")]
    m_ref: Option<usize>,
    /// Reference mesh width h
    #[arg(long)]
    href: Option<f64>,
    /// Grid list paired with N-list for a combined refinement schedule
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
}

#[derive(Args)]
struct RefArgs {
    /// Reference ensemble size
    #[arg(long = "Mref")]
    m_ref: Option<usize>,
    /// Reference mesh width h
    #[arg(long)]
    href: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    numerics: NumericsSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    study: StudySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    name: Option<String>,
    t_final: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsSection {
    eps_flux: Option<f64>,
    dt_factor: Option<f64>,
    picard_tol: Option<f64>,
    picard_max: Option<usize>,
    lin_tol: Option<f64>,
    lin_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    nx: Option<usize>,
    seed: Option<u64>,
    deterministic: Option<bool>,
    snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    grids: Option<Vec<usize>>,
    href: Option<f64>,
    n_list: Option<Vec<usize>>,
    l: Option<usize>,
    m_ref: Option<usize>,
}

/// Fully resolved settings shared by all commands.
struct Resolved {
    spec: ExperimentSpec,
    num: NumParams,
    out: PathBuf,
    seed: u64,
    deterministic: bool,
    jobs: usize,
    file: FileConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    experiment: &'a str,
    t_final: f64,
    master_seed: u64,
    deterministic: bool,
    jobs: usize,
    eps_flux: f64,
    dt_factor: f64,
    picard_tol: f64,
    lin_tol: f64,
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let file: FileConfig = match &cli.config {
        Some(path) => toml::from_str(
            &fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?,
        )
        .with_context(|| format!("invalid config {}", path.display()))?,
        None => FileConfig::default(),
    };

    let name = cli
        .experiment
        .clone()
        .or_else(|| file.experiment.name.clone())
        .ok_or_else(|| anyhow!("no experiment selected; pass --experiment or set [experiment] name"))?;
    let mut spec = make_experiment(&name)?;
    if let Some(t) = cli.t_final.or(file.experiment.t_final) {
        if t <= 0.0 {
            bail!("T = {} must be positive", t);
        }
        spec.t_final = t;
    }

    let mut num = NumParams::default();
    let n = &file.numerics;
    if let Some(v) = n.eps_flux {
        num.eps_flux = v;
    }
    if let Some(v) = n.dt_factor {
        num.dt_factor = v;
    }
    if let Some(v) = n.picard_tol {
        num.picard_tol = v;
    }
    if let Some(v) = n.picard_max {
        num.picard_max = v;
    }
    if let Some(v) = n.lin_tol {
        num.lin_tol = v;
    }
    if let Some(v) = n.lin_max {
        num.lin_max = v;
    }
    if let Some(v) = cli.eps {
        num.eps_flux = v;
    }
    if let Some(v) = cli.dt_factor {
        num.dt_factor = v;
    }
    num.validate().map_err(|e| anyhow!("invalid numerics: {}", e))?;

    let out = cli
        .out
        .clone()
        .or_else(|| file.output.dir.clone())
        .or_else(|| std::env::var_os("MHDMC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(file.run.seed).unwrap_or(1234);
    let deterministic = cli.deterministic || file.run.deterministic.unwrap_or(false);
    let jobs = cli.jobs.or(file.output.jobs).unwrap_or(0);

    Ok(Resolved {
        spec,
        num,
        out,
        seed,
        deterministic,
        jobs,
        file,
    })
}

fn write_manifest(dir: &Path, command: &str, r: &Resolved) -> Result<()> {
    let m = Manifest {
        command,
        experiment: &r.spec.name,
        t_final: r.spec.t_final,
        master_seed: r.seed,
        deterministic: r.deterministic,
        jobs: r.jobs,
        eps_flux: r.num.eps_flux,
        dt_factor: r.num.dt_factor,
        picard_tol: r.num.picard_tol,
        lin_tol: r.num.lin_tol,
    };
    let f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &m)?;
    Ok(())
}

fn draw_for_run(r: &Resolved) -> ((f64, f64), String) {
    if r.deterministic {
        (r.spec.zero_draw(), "deterministic".to_string())
    } else {
        let id = SampleId {
            master_seed: r.seed,
            rep: 0,
            index: 0,
        };
        (r.spec.draw(id), format!("seed {} rep 0 index 0", r.seed))
    }
}

fn nx_from_href(spec: &ExperimentSpec, href: f64) -> Result<usize> {
    if href <= 0.0 {
        bail!("href = {} must be positive", href);
    }
    let width = spec.bounds.1 - spec.bounds.0;
    let nx = (width / href).round() as usize;
    if nx == 0 || (width / nx as f64 - href).abs() > 1e-9 * href {
        bail!("href = {} does not divide the domain width {}", href, width);
    }
    Ok(nx)
}

fn cmd_run(r: &Resolved, a: &RunArgs) -> Result<()> {
    let nx = a.nx.or(r.file.run.nx).unwrap_or(32);
    let mut snapshots = a
        .snapshots
        .clone()
        .or_else(|| r.file.run.snapshots.clone())
        .unwrap_or_default();
    snapshots.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mesh = r.spec.mesh(nx)?;
    let (y, label) = draw_for_run(r);
    let phys = r.spec.phys(y);
    let initial = r
        .spec
        .realize_initial_state(y, &mesh)
        .with_context(|| format!("initial data ({})", label))?;

    let dir = r.out.join(format!("run-{}-nx{}", r.spec.name, nx));
    fs::create_dir_all(&dir)?;
    let mut records = vec![DiagnosticsRecord::new(&mesh, 0.0, &initial, &phys)];
    let mut next_snap = 0usize;
    let mut snap_err: Option<io::IoError> = None;
    let (terminal, reports) = mhdmc::scheme::run(
        &mesh,
        &initial,
        &phys,
        &r.num,
        r.spec.t_final,
        |_, t, state, _| {
            records.push(DiagnosticsRecord::new(&mesh, t, state, &phys));
            while next_snap < snapshots.len() && t >= snapshots[next_snap] - 1e-12 {
                let path = dir.join(format!("snap-{:04}.vtk", next_snap));
                if let Err(e) =
                    io::write_vtk(&path, &mesh, state, &phys, &format!("{} t={}", r.spec.name, t))
                {
                    snap_err.get_or_insert(e);
                }
                next_snap += 1;
            }
        },
    )
    .with_context(|| format!("run failed ({}, {})", r.spec.name, label))?;
    if let Some(e) = snap_err {
        return Err(e.into());
    }

    io::write_step_reports_csv(&dir.join("steps.csv"), &reports)?;
    io::write_diagnostics_csv(&dir.join("diagnostics.csv"), &records)?;
    io::write_vtk(
        &dir.join("terminal.vtk"),
        &mesh,
        &terminal,
        &phys,
        &format!("{} t={}", r.spec.name, r.spec.t_final),
    )?;
    io::write_state_bin(&dir.join("terminal.bin"), &mesh, &terminal)?;
    write_manifest(&dir, "run", r)?;

    let mass0 = records[0].mass;
    for (k, rec) in records.iter().enumerate() {
        if rec.min_rho <= 0.0 {
            bail!("positivity monitor failed at step {} (min rho = {})", k, rec.min_rho);
        }
        if (rec.mass - mass0).abs() > 1e-10 * mass0.abs().max(1.0) {
            bail!("mass monitor failed at step {} (drift {})", k, rec.mass - mass0);
        }
        if rec.div_b_max > 1e-11 * rec.b_l2.max(1.0) {
            bail!("div B monitor failed at step {} ({})", k, rec.div_b_max);
        }
    }
    println!(
        "run complete: {} steps to T={}, artifacts in {}",
        reports.len(),
        r.spec.t_final,
        dir.display()
    );
    Ok(())
}

fn cmd_convergence(r: &Resolved, a: &ConvArgs) -> Result<()> {
    let grids = a
        .grids
        .clone()
        .or_else(|| r.file.study.grids.clone())
        .unwrap_or_else(|| vec![16, 32]);
    let href = a.href.or(r.file.study.href);
    let fine_nx = match href {
        Some(h) => nx_from_href(&r.spec, h)?,
        None => 2 * grids.iter().copied().max().unwrap_or(32),
    };
    let coarse: Vec<_> = grids
        .iter()
        .map(|&nx| r.spec.mesh(nx))
        .collect::<Result<_, _>>()?;
    let fine = r.spec.mesh(fine_nx)?;

    let (y, label) = draw_for_run(r);
    let phys = r.spec.phys(y);
    let rows = mhdmc::diag::deterministic_error_table(
        &coarse,
        &fine,
        |m| r.spec.realize_initial_state(y, m).expect("initial data"),
        &phys,
        &r.num,
        r.spec.t_final,
    )
    .with_context(|| format!("convergence study failed ({}, {})", r.spec.name, label))?;

    let dir = r.out.join(format!("convergence-{}", r.spec.name));
    fs::create_dir_all(&dir)?;
    io::write_error_table_csv(&dir.join("error_table.csv"), &rows)?;
    write_manifest(&dir, "convergence", r)?;
    println!(
        "convergence table for grids {:?} vs nx={} written to {}",
        grids,
        fine_nx,
        dir.display()
    );
    Ok(())
}

fn reference_dir(out: &Path, spec: &ExperimentSpec, nx: usize, m_ref: usize, seed: u64) -> PathBuf {
    out.join(format!("reference-{}-nx{}-M{}-seed{}", spec.name, nx, m_ref, seed))
}

fn get_reference(
    r: &Resolved,
    nx_ref: usize,
    m_ref: usize,
) -> Result<(Reference, PathBuf, bool)> {
    let dir = reference_dir(&r.out, &r.spec, nx_ref, m_ref, r.seed);
    if dir.join("reference.json").exists() {
        let cached = io::load_reference(&dir, &r.spec)?;
        if cached.nx == nx_ref && cached.m_ref == m_ref && cached.master_seed == r.seed {
            return Ok((cached, dir, true));
        }
    }
    let reference = mc::build_reference(&r.spec, nx_ref, m_ref, r.seed, &r.num)
        .with_context(|| format!("reference ensemble failed ({})", r.spec.name))?;
    io::save_reference(&dir, &r.spec, &reference)?;
    Ok((reference, dir, false))
}

fn cmd_reference(r: &Resolved, a: &RefArgs) -> Result<()> {
    let m_ref = a.m_ref.or(r.file.study.m_ref).unwrap_or(50);
    let href = a.href.or(r.file.study.href);
    let nx_ref = match href {
        Some(h) => nx_from_href(&r.spec, h)?,
        None => 64,
    };
    let (_, dir, cached) = get_reference(r, nx_ref, m_ref)?;
    write_manifest(&dir, "reference", r)?;
    println!(
        "reference ensemble (nx={}, M={}) {} at {}",
        nx_ref,
        m_ref,
        if cached { "reused" } else { "built" },
        dir.display()
    );
    Ok(())
}

fn cmd_mc(r: &Resolved, a: &McArgs) -> Result<()> {
    let n_list = a
        .n_list
        .clone()
        .or_else(|| r.file.study.n_list.clone())
        .unwrap_or_else(|| vec![10, 20, 40]);
    if n_list.is_empty() {
        bail!("N-list must not be empty");
    }
    let l = a.l.or(r.file.study.l).unwrap_or(4);
    let m_ref = a.m_ref.or(r.file.study.m_ref).unwrap_or(50);
    let href = a.href.or(r.file.study.href);
    let grids = a.grids.clone().or_else(|| r.file.study.grids.clone());
    let nx = a.nx.or(r.file.run.nx).unwrap_or(32);

    let nx_ref = match href {
        Some(h) => nx_from_href(&r.spec, h)?,
        None => 2 * grids.as_ref().map_or(nx, |g| g.iter().copied().max().unwrap_or(nx)),
    };
    let (reference, _, _) = get_reference(r, nx_ref, m_ref)?;

    let dir = r.out.join(format!("mc-{}-seed{}", r.spec.name, r.seed));
    fs::create_dir_all(&dir)?;
    write_manifest(&dir, "mc", r)?;

    if let Some(grids) = grids {
        if grids.len() != n_list.len() {
            bail!(
                "--grids has {} entries but the N-list has {}; a schedule pairs them one to one",
                grids.len(),
                n_list.len()
            );
        }
        let schedule: Vec<(usize, usize)> = grids.into_iter().zip(n_list).collect();
        let rows = mc::total_error_study(&r.spec, &schedule, l, &reference, &r.num)?;
        io::write_total_error_csv(&dir.join("total_error.csv"), &rows)?;
        println!("total error schedule written to {}", dir.display());
    } else {
        let rows = mc::statistical_error_study(&r.spec, nx, &n_list, l, &reference, &r.num)?;
        io::write_stat_error_csv(&dir.join("stat_error.csv"), &rows)?;
        let report = mc::rate_report(&rows);
        let f = fs::File::create(dir.join("rates.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &report)?;
        println!(
            "statistical errors at nx={} written to {}; E1 slopes {:?}",
            nx,
            dir.display(),
            report.e1_slopes
        );
    }
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let r = resolve(&cli)?;
    if r.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(r.jobs)
            .build_global()
            .context("thread pool setup")?;
    }
    fs::create_dir_all(&r.out)?;
    match &cli.cmd {
        Cmd::Run(a) => cmd_run(&r, a),
        Cmd::Convergence(a) => cmd_convergence(&r, a),
        Cmd::Mc(a) => cmd_mc(&r, a),
        Cmd::Reference(a) => cmd_reference(&r, a),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
