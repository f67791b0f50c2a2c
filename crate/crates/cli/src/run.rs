//! Subcommand dispatch. Every run echoes the normalized scenario into its
//! output directory and executes inside a pool of the requested size; all
//! outputs are independent of that size.

use std::path::{Path, PathBuf};

use cgo_core::cgo::{exceptional_scan, solve_cgo};
use cgo_core::faddeev::{norm_decay_probe, ComplexMomentum};
use cgo_core::grid::{cross, norm, scale, Frame, Grid, Vec3};
use cgo_core::io::save_field;
use cgo_core::potential::{working_gamma, Potential};
use cgo_core::recon::{
    lowfreq_complete, recover_fourier, rho_param, shell_scan, Completion, FourierRecovery, ReconFrame, ShellPoint,
    ShellRecovery, UniquenessConfig, UniquenessReport,
};
use cgo_core::scattering::{scattering_matrix, write_smatrix, ScatteringMatrixData};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::plot::{self, Table};
use crate::scenario::Scenario;
use crate::{verify, CliError, OUT_ROOT_VAR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Forward,
    Cgo,
    ScanExceptional,
    Recover,
    Uniqueness,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Cgo => "cgo",
            Command::ScanExceptional => "scan-exceptional",
            Command::Recover => "recover",
            Command::Uniqueness => "uniqueness",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub scenario: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// `--out`, else the scenario's `output`, else `$CGO_OUT_ROOT/<name>`, else
/// `out/<name>`.
pub fn output_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(o) = &scenario.output {
        return o.clone();
    }
    let root = std::env::var_os(OUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    root.join(&scenario.name)
}

pub fn execute(cmd: Command, opts: &Options) -> Result<Outcome, CliError> {
    let mut sc = Scenario::load(&opts.scenario)?;
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    sc.validate(cmd.name())?;
    let dir = output_dir(&sc, opts.out.as_deref());
    let workers = opts.workers.unwrap_or_else(num_cpus::get_physical);
    run_scenario(cmd, &sc, &dir, workers)
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let p = self.path(name);
        t.save(&p)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let p = self.path(name);
        plot::save_json(&p, v)
    }

    fn bytes(&mut self, name: &str, b: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        plot::write_bytes(&p, b)
    }
}

/// Run a validated scenario into `dir` with `workers` threads.
pub fn run_scenario(cmd: Command, sc: &Scenario, dir: &Path, workers: usize) -> Result<Outcome, CliError> {
    if workers == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let mut sink = Sink {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    sink.bytes("scenario.toml", sc.normalized().as_bytes())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let summary = pool.install(|| match cmd {
        Command::Forward => forward(sc, &mut sink),
        Command::Cgo => cgo(sc, &mut sink),
        Command::ScanExceptional => scan(sc, &mut sink),
        Command::Recover => recover(sc, &mut sink),
        Command::Uniqueness => uniqueness(sc, &mut sink),
        Command::Verify => verify_cmd(sc, &mut sink),
    })?;
    Ok(Outcome {
        out_dir: dir.to_path_buf(),
        files: sink.files,
        summary,
    })
}

#[derive(Serialize, Deserialize)]
struct ForwardReport {
    name: String,
    lambda: f64,
    k_max: usize,
    kappa: f64,
    unitarity_defect: f64,
    prime_unitarity_defect: Option<f64>,
    max_abs_diff: Option<f64>,
}

fn save_smatrix(sink: &mut Sink, stem: &str, s: &ScatteringMatrixData) -> Result<(), CliError> {
    let bytes = write_smatrix(s).map_err(CliError::numerical("forward: encoding"))?;
    sink.bytes(&format!("{stem}.cgos"), &bytes)?;
    sink.table(&format!("{stem}.csv"), &plot::smatrix_table(s))
}

fn forward(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let grid = sc.base_grid()?;
    let k_max = sc.scattering.expect("validated").k_max;
    let cfg = sc.scattering_config();
    let v = sc.potential_on(&grid)?;
    let s = scattering_matrix(&v, sc.lambda, k_max, &cfg).map_err(CliError::numerical("forward: potential"))?;
    save_smatrix(sink, "smatrix", &s)?;
    let prime = match &sc.potential_prime {
        Some(_) => {
            let vp = sc.potential_prime_on(&grid)?;
            let sp = scattering_matrix(&vp, sc.lambda, k_max, &cfg).map_err(CliError::numerical("forward: potential_prime"))?;
            save_smatrix(sink, "smatrix_prime", &sp)?;
            Some(sp)
        }
        None => None,
    };
    let report = ForwardReport {
        name: sc.name.clone(),
        lambda: sc.lambda,
        k_max,
        kappa: s.kappa,
        unitarity_defect: s.unitarity_defect,
        prime_unitarity_defect: prime.as_ref().map(|p| p.unitarity_defect),
        max_abs_diff: prime.as_ref().map(|p| s.max_abs_diff(p)),
    };
    sink.json("forward.json", &report)?;
    Ok(format!(
        "scattering matrix of side {} written, unitarity defect {:.3e}",
        s.side(),
        s.unitarity_defect
    ))
}

/// Unit vector orthogonal to `nu`, along `rho_perp` when it is nonzero.
fn second_axis(nu: Vec3, rho_perp: Vec3) -> Vec3 {
    if norm(rho_perp) > 0.0 {
        return scale(rho_perp, 1.0 / norm(rho_perp));
    }
    let axis = (0..3).min_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs())).unwrap();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let m = cross(nu, e);
    scale(m, 1.0 / norm(m))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CgoRow {
    index: usize,
    z: Complex64,
    nu: Vec3,
    rho_perp: Vec3,
    t: Option<f64>,
    residual: f64,
    krylov_residual: f64,
    iterations: usize,
    weighted_norm: f64,
}

fn cgo(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let spec = sc.cgo.as_ref().expect("validated");
    let l = sc.grid.half_width;
    let n = sc.grid.points_per_axis;
    let grid_err = |e: cgo_core::Error| CliError::Config(format!("cgo: {e}"));
    let mut jobs: Vec<(Grid, ComplexMomentum, Option<f64>)> = Vec::new();
    for m in &spec.momenta {
        let frame = Frame::from_nu_mu(m.nu, second_axis(m.nu, m.rho_perp)).map_err(grid_err)?;
        let rho = ComplexMomentum::new(m.nu, Complex64::new(m.z[0], m.z[1]), m.rho_perp).map_err(grid_err)?;
        jobs.push((Grid::new(l, n, frame).map_err(grid_err)?, rho, None));
    }
    if let Some(f) = &spec.family {
        let frame = ReconFrame::canonical(f.zeta, sc.lambda).map_err(grid_err)?;
        let grid = Grid::new(l, n, frame.grid_frame().map_err(grid_err)?).map_err(grid_err)?;
        for &t in &f.t {
            let (rho, _) = rho_param(&frame, t).map_err(grid_err)?;
            jobs.push((grid.clone(), rho, Some(t)));
        }
    }
    let gamma = working_gamma(sc.gamma0);
    let gmres = sc.gmres();
    let solved = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (grid, rho, t))| {
            let v = sc.potential_on(grid)?;
            let sol = solve_cgo(&v, rho, &gmres).map_err(CliError::numerical(format!("cgo: momentum {i}")))?;
            let row = CgoRow {
                index: i,
                z: rho.z(),
                nu: rho.nu(),
                rho_perp: rho.rho_perp(),
                t: *t,
                residual: sol.residual,
                krylov_residual: sol.krylov_residual,
                iterations: sol.iterations,
                weighted_norm: sol.weighted_correction_norm(gamma),
            };
            Ok((row, sol.v))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(&[
        "index",
        "re_z",
        "im_z",
        "nu1",
        "nu2",
        "nu3",
        "rho_perp_1",
        "rho_perp_2",
        "rho_perp_3",
        "t",
        "residual",
        "krylov_residual",
        "iterations",
        "weighted_norm",
    ]);
    for (r, field) in &solved {
        table.push(vec![
            r.index.to_string(),
            r.z.re.to_string(),
            r.z.im.to_string(),
            r.nu[0].to_string(),
            r.nu[1].to_string(),
            r.nu[2].to_string(),
            r.rho_perp[0].to_string(),
            r.rho_perp[1].to_string(),
            r.rho_perp[2].to_string(),
            r.t.map(|t| t.to_string()).unwrap_or_default(),
            r.residual.to_string(),
            r.krylov_residual.to_string(),
            r.iterations.to_string(),
            r.weighted_norm.to_string(),
        ]);
        if spec.save_fields {
            let p = sink.path(&format!("cgo_{:03}.cgof", r.index));
            let meta = serde_json::json!({ "scenario": sc.name, "row": r });
            save_field(&p, field, &meta).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?;
            sink.files.push(cgo_core::io::sidecar_path(&p));
        }
    }
    sink.table("cgo.csv", &table)?;
    let rows: Vec<&CgoRow> = solved.iter().map(|(r, _)| r).collect();
    sink.json("cgo.json", &rows)?;
    Ok(format!("{} CGO solutions", rows.len()))
}

fn scan(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let spec = sc.scan.as_ref().expect("validated");
    let grid = sc.base_grid()?;
    let v = sc.potential_on(&grid)?;
    let zs: Vec<Complex64> = spec.z.iter().map(|z| Complex64::new(z[0], z[1])).collect();
    let rps: Vec<Vec3> = spec.rho_perp.iter().map(|r| [0.0, r[0], r[1]]).collect();
    let result = exceptional_scan(&v, &zs, &rps, spec.threshold, spec.probes, sc.seed)
        .map_err(CliError::numerical("scan-exceptional"))?;
    sink.table("scan.csv", &plot::scan_table(&result, grid.frame()))?;
    sink.json("scan.json", &result)?;
    let mut summary = format!("{} points, {} flagged", result.points.len(), result.flagged().count());
    if let Some(d) = &spec.decay {
        let sweep = d
            .im_z
            .iter()
            .map(|&im| ComplexMomentum::new([1.0, 0.0, 0.0], Complex64::new(d.re_z, im), [0.0, d.rho_perp[0], d.rho_perp[1]]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("scan.decay: {e}")))?;
        let gamma = d.gamma.unwrap_or_else(|| working_gamma(sc.gamma0));
        let samples =
            norm_decay_probe(&grid, &sweep, gamma, d.iterations, sc.seed).map_err(CliError::numerical("scan-exceptional: decay"))?;
        sink.table("decay.csv", &plot::decay_table(&samples, grid.frame()))?;
        sink.json("decay.json", &samples)?;
        summary.push_str(&format!(", {} decay samples", samples.len()));
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub name: String,
    pub seed: u64,
    pub shell: ShellRecovery,
    pub recoveries: Vec<FourierRecovery>,
    pub completion: Option<Completion>,
}

fn potentials(sc: &Scenario) -> Result<(Potential, Potential), CliError> {
    let grid = sc.base_grid()?;
    let v = sc.potential_on(&grid)?;
    let vp = match sc.potential_prime {
        Some(_) => sc.potential_prime_on(&grid)?,
        None => Potential::zero(&grid, sc.gamma0).map_err(|e| CliError::Config(e.to_string()))?,
    };
    Ok((v, vp))
}

fn recover(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let spec = sc.recover.as_ref().expect("validated");
    let (v, vp) = potentials(sc)?;
    let cfg = sc.recover_config();
    let recoveries = spec
        .zeta
        .par_iter()
        .map(|&z| {
            recover_fourier(&v, &vp, sc.lambda, z, &spec.schedule, &cfg)
                .map_err(CliError::numerical(format!("recover: zeta {z:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let t_max = *spec.schedule.last().expect("validated");
    let mut points: Vec<ShellPoint> = recoveries
        .iter()
        .map(|r| ShellPoint {
            zeta: r.zeta,
            abs_zeta: norm(r.zeta),
            t: t_max,
            estimate: Some(r.estimate),
            quadrature_error: r.table.last().map(|x| x.quadrature_error),
            error: None,
        })
        .collect();
    let (lower, upper) = cgo_core::recon::shell_bounds(sc.lambda, sc.gamma0);
    let mut conjugate_defect = None;
    if let Some(s) = &spec.shell {
        let shell = shell_scan(&v, &vp, sc.lambda, &s.spec(), &spec.schedule, &cfg).map_err(CliError::numerical("recover: shell"))?;
        for p in shell.failures() {
            eprintln!("warning: shell point {:?} failed: {}", p.zeta, p.error.as_deref().unwrap_or(""));
        }
        conjugate_defect = shell.conjugate_defect;
        points.extend(shell.points);
    }
    let shell = ShellRecovery {
        lambda: sc.lambda,
        gamma0: sc.gamma0,
        lower,
        upper,
        points,
        conjugate_defect,
    };
    sink.table("shell.csv", &plot::shell_table(&shell))?;
    sink.table("convergence.csv", &plot::convergence_table(&recoveries))?;
    let completion = match &spec.completion {
        Some(c) => {
            let done = lowfreq_complete(&shell, c.ball_radius, &c.config()).map_err(CliError::numerical("recover: completion"))?;
            sink.table("completion.csv", &plot::completion_table(&done))?;
            Some(done)
        }
        None => None,
    };
    let failures = shell.failures().count();
    let n = shell.points.len();
    let report = RecoverReport {
        name: sc.name.clone(),
        seed: sc.seed,
        shell,
        recoveries,
        completion,
    };
    sink.json("recover.json", &report)?;
    Ok(format!("{n} shell points, {failures} failed"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessFile {
    pub name: String,
    pub seed: u64,
    pub at_baseline: bool,
    pub report: UniquenessReport,
}

fn uniqueness(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let spec = sc.uniqueness.as_ref().expect("validated");
    let (v, vp) = potentials(sc)?;
    let cfg = UniquenessConfig {
        k_max: sc.scattering.expect("validated").k_max,
        scattering: sc.scattering_config(),
        shell: spec.shell.spec(),
        schedule: spec.schedule.clone(),
        recover: sc.recover_config(),
    };
    let report = cgo_core::recon::uniqueness_experiment(&v, &vp, sc.lambda, &cfg).map_err(CliError::numerical("uniqueness"))?;
    sink.table("uniqueness.csv", &plot::uniqueness_table(&report))?;
    sink.table("shell.csv", &plot::shell_table(&report.shell))?;
    let file = UniquenessFile {
        name: sc.name.clone(),
        seed: sc.seed,
        at_baseline: report.at_baseline(),
        report,
    };
    sink.json("uniqueness.json", &file)?;
    let r = &file.report;
    Ok(format!(
        "S discrepancy {:.3e}, pairing discrepancy {:.3e}, shell discrepancy {:.3e}{}",
        r.smatrix_discrepancy,
        r.pairing_discrepancy,
        r.shell_discrepancy,
        if file.at_baseline { " (all at baseline)" } else { "" }
    ))
}

fn verify_cmd(sc: &Scenario, sink: &mut Sink) -> Result<String, CliError> {
    let only = sc.verify.as_ref().map(|v| v.only.clone()).unwrap_or_default();
    let results = verify::run(&only, |c| println!("{}", c.line()));
    let mut table = Table::new(&["criterion", "name", "pass", "detail"]);
    for c in &results {
        table.push(vec![c.id.to_string(), c.name.to_string(), c.pass.to_string(), c.detail.clone()]);
    }
    sink.table("verify.csv", &table)?;
    sink.json("verify.json", &results)?;
    let failed: Vec<String> = results.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
    if failed.is_empty() {
        Ok(format!("{} criteria passed", results.len()))
    } else {
        Err(CliError::Verification(format!("criteria {} failed", failed.join(", "))))
    }
}
