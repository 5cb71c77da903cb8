use std::io::Write;
use std::path::{Path, PathBuf};

use optoweak_core::dynamics::{phase_aligned_distance, HamiltonianSpectrum};
use optoweak_core::hilbert::{annihilate, create, interior_levels, number};
use optoweak_core::{
    amplification_scan, branch_unitary, condition, kerr_contrast, kraus_operator, limit_table, make_pointer,
    unconditioned_trajectory, CouplingParams, Dim, PathState, PointerSpec, PostSelection, ScanOptions, ScanRecord,
};

use crate::config::{ConfigError, RunConfig};
use crate::report::{num, render_pairs, render_records, write_atomic};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] optoweak_core::Error),
    #[error("{0} self-check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// 1 for configuration and usage problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::ChecksFailed(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Sink for command output: an optional CSV file plus the console.
pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Console<'_> {
    /// CSV goes to `path` when given, else to standard output.
    fn emit(&mut self, path: Option<&Path>, csv: &str) -> CliResult<()> {
        match path {
            Some(p) => write_atomic(p, csv).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
            None => self
                .out
                .write_all(csv.as_bytes())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
        }
    }

    /// Summary lines share standard output only when the CSV went to a file.
    fn summary(&mut self, to_file: bool, line: &str) {
        let sink: &mut dyn Write = if to_file { &mut *self.out } else { &mut *self.err };
        let _ = writeln!(sink, "{line}");
    }
}

fn dim_of(config: &RunConfig) -> CliResult<Option<Dim>> {
    Ok(config.dim.map(Dim::new).transpose()?)
}

fn scan_options(config: &RunConfig) -> CliResult<ScanOptions> {
    Ok(ScanOptions { dim: dim_of(config)?, refine_rounds: 3, threads: Some(config.resolved_threads()) })
}

fn resolve_dim(config: &RunConfig) -> CliResult<Dim> {
    match dim_of(config)? {
        Some(d) => Ok(d),
        None => Ok(optoweak_core::pointer::auto_dim(&config.pointer, config.kappa)?),
    }
}

pub fn trajectory(config: &RunConfig, io: &mut Console) -> CliResult<()> {
    let p = CouplingParams::new(config.kappa, config.kerr, 0.0)?;
    let rows = unconditioned_trajectory(&config.pointer, &p, &config.tau_values(), dim_of(config)?)?;
    let csv = render_pairs("tau,mean_x", rows.into_iter().map(|(t, x)| (num(t), x)));
    io.emit(config.output.as_deref(), &csv)
}

pub fn condition_point(config: &RunConfig, io: &mut Console) -> CliResult<()> {
    let dim = resolve_dim(config)?;
    let state = make_pointer(&config.pointer, dim)?;
    let sel = PostSelection::new(config.theta, config.phi)?;
    let p = CouplingParams::new(config.kappa, config.kerr, config.tau)?;
    let res = condition(&state, &PathState::balanced(), &sel, &p)?;
    let pops = &res.fock_populations;
    let record = ScanRecord {
        tau: config.tau,
        theta: sel.theta,
        phi: sel.phi,
        probability: res.probability,
        mean_x: res.mean_x,
        mean_p: res.mean_p,
        pop0: pops[0],
        pop1: pops[1],
    };
    let mut csv = render_records(&[record]);
    csv.push('\n');
    csv.push_str(&render_pairs("n,population", pops.iter().enumerate().map(|(n, q)| (n.to_string(), *q))));
    io.emit(config.output.as_deref(), &csv)
}

pub fn scan(config: &RunConfig, io: &mut Console) -> CliResult<()> {
    let report =
        amplification_scan(&config.pointer, config.kappa, config.kerr, &config.grid(), &scan_options(config)?)?;
    io.emit(config.output.as_deref(), &render_records(&report.records))?;
    let (t, th, ph) = report.argmax;
    io.summary(
        config.output.is_some(),
        &format!(
            "max_abs_x={:.6}  cap={:.6}  probability_at_max={:.3e}  argmax=(tau={t:.6}, theta={th:.6}, phi={ph:.6})",
            report.max_abs_x, report.cap, report.probability_at_max
        ),
    );
    Ok(())
}

/// `out.csv` becomes `out_with_kerr.csv` and `out_without_kerr.csv`.
pub fn kerr_paths(output: &Path) -> (PathBuf, PathBuf) {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "kerr".into());
    let ext = output.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    (
        output.with_file_name(format!("{stem}_with_kerr.{ext}")),
        output.with_file_name(format!("{stem}_without_kerr.{ext}")),
    )
}

pub fn kerr(config: &RunConfig, io: &mut Console) -> CliResult<()> {
    let output = config
        .output
        .as_deref()
        .ok_or_else(|| CliError::Usage("kerr needs `output` (two CSV files are written)".into()))?;
    let contrast = kerr_contrast(&config.pointer, config.kappa, &config.tau_values(), &scan_options(config)?)?;
    let (with_path, without_path) = kerr_paths(output);
    let with_csv = render_records(&contrast.with_kerr.records);
    let without_csv = render_records(&contrast.without_kerr.records);
    io.emit(Some(&with_path), &with_csv)?;
    io.emit(Some(&without_path), &without_csv)?;
    io.summary(
        true,
        &format!(
            "with_kerr max_abs_x={:.6}  without_kerr max_abs_x={:.6}  cap={:.6}",
            contrast.with_kerr.max_abs_x, contrast.without_kerr.max_abs_x, contrast.with_kerr.cap
        ),
    );
    Ok(())
}

pub fn limits(config: &RunConfig, io: &mut Console) -> CliResult<()> {
    let rows = limit_table(std::slice::from_ref(&config.pointer));
    let csv = render_pairs("pointer,cap", rows.into_iter().map(|(s, cap)| (s.kind().to_string(), cap)));
    io.emit(config.output.as_deref(), &csv)
}

/// Self-tests of the operator algebra and of the closed-form dynamics against
/// exponentiation of the full Hamiltonian.
pub fn check_results() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for d in [8, 64, 256] {
        let dim = Dim::new(d).expect("static dimension");
        let c = annihilate(dim);
        let a = create(dim);
        let comm = c.commutator(&a).expect("same dimension");
        let mut err: f64 = 0.0;
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                let want = if i == j { 1.0 } else { 0.0 };
                err = err.max((comm.matrix()[(i, j)].re - want).abs().max(comm.matrix()[(i, j)].im.abs()));
            }
        }
        out.push((format!("commutator [c, c+] = 1 below the cut, d={d} (err {err:.1e})"), err < 1e-12));
        let n_err = (&(&a * &c) - &number(dim)).matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        out.push((format!("number operator equals c+ c, d={d} (err {n_err:.1e})"), n_err < 1e-12));
    }
    let dim = Dim::new(64).expect("static dimension");
    for kappa in [0.02, 0.1, 0.2] {
        let worst = HamiltonianSpectrum::new(kappa, dim).and_then(|spec| {
            let mut worst: f64 = 0.0;
            for i in 0..10 {
                let tau = 4.0 * std::f64::consts::PI * i as f64 / 9.0;
                let p = CouplingParams::new(kappa, true, tau)?;
                let closed = branch_unitary(1, &p, dim)?;
                let oracle = spec.block_propagator(1, tau)?;
                let levels = interior_levels(dim, 2.0 * kappa);
                worst = worst.max(phase_aligned_distance(&closed, &oracle, levels)?);
            }
            Ok(worst)
        });
        let (msg, ok) = match worst {
            Ok(w) => (format!("{w:.1e}"), w < 1e-8),
            Err(e) => (e.to_string(), false),
        };
        out.push((format!("branch unitary matches Hamiltonian oracle, kappa={kappa} ({msg})"), ok));
    }
    let completeness = (|| -> optoweak_core::Result<f64> {
        let dim = Dim::new(40)?;
        let p = CouplingParams::new(0.1, true, 2.0)?;
        let sel = PostSelection::new(0.7, 3.0)?;
        let input = PathState::balanced();
        let m = kraus_operator(&input, &sel, &p, dim)?;
        let o = kraus_operator(&input, &sel.orthogonal(), &p, dim)?;
        let sum = m.matrix().adjoint() * m.matrix() + o.matrix().adjoint() * o.matrix();
        let n = interior_levels(dim, 0.2);
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                err = err.max((sum[(i, j)] - optoweak_core::C64::from(want)).norm());
            }
        }
        Ok(err)
    })();
    out.push(match completeness {
        Ok(e) => (format!("detector outcomes are complete (err {e:.1e})"), e < 1e-10),
        Err(e) => (format!("detector outcomes are complete ({e})"), false),
    });
    let peak = CouplingParams::new(0.1, true, 0.0)
        .and_then(|p| unconditioned_trajectory(&PointerSpec::Ground, &p, &[std::f64::consts::PI], None));
    out.push(match peak {
        Ok(t) => {
            let rel = (t[0].1 - 0.4).abs() / 0.4;
            (format!("unconditioned peak displacement is 4 kappa (rel err {rel:.1e})"), rel < 1e-9)
        }
        Err(e) => (format!("unconditioned peak displacement is 4 kappa ({e})"), false),
    });
    out
}

pub fn check(io: &mut Console) -> CliResult<()> {
    let results = check_results();
    let failed = results.iter().filter(|(_, ok)| !ok).count();
    for (name, ok) in &results {
        let _ = writeln!(io.out, "{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
