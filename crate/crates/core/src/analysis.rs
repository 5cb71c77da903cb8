//! Grid scans over interaction time and post-selection.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rayon::prelude::*;

use crate::dynamics::{branch_unitary, CouplingParams};
use crate::error::{Error, Result};
use crate::hilbert::{expectation, position_quadrature, Dim};
use crate::pointer::{auto_dim, make_pointer, pointer_spread, PointerSpec};
use crate::protocol::{ConditioningKernel, PathState, PostSelection};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_axis(name: &str, values: &[f64], lo: f64, hi: f64, hi_open: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name} axis is empty")));
    }
    for v in values {
        let above = if hi_open { *v >= hi } else { *v > hi };
        if !v.is_finite() || *v < lo || above {
            return Err(Error::invalid(format!("{name} value {v} out of range")));
        }
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(format!("{name} axis is not sorted")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    tau: Vec<f64>,
    theta: Vec<f64>,
    phi: Vec<f64>,
}

impl ScanGrid {
    pub fn new(tau: Vec<f64>, theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        check_axis("tau", &tau, 0.0, f64::INFINITY, false)?;
        check_axis("theta", &theta, 0.0, FRAC_PI_2, false)?;
        check_axis("phi", &phi, 0.0, TAU, true)?;
        Ok(ScanGrid { tau, theta, phi })
    }

    /// τ up to `max(4π, 3/κ)`, θ and φ in a window around the dark port.
    pub fn default_for(kappa: f64) -> Self {
        Self::with_points(kappa, default_tau_max(kappa), 600, 41, 81)
    }

    pub fn with_points(_kappa: f64, tau_max: f64, tau_points: usize, theta_points: usize, phi_points: usize) -> Self {
        ScanGrid {
            tau: linspace(0.0, tau_max, tau_points),
            theta: linspace(FRAC_PI_4 - 0.3, FRAC_PI_4 + 0.3, theta_points),
            phi: linspace(PI - 0.6, PI + 0.6, phi_points),
        }
    }

    /// Fixed post-selection, τ swept.
    pub fn tau_only(tau: Vec<f64>, sel: PostSelection) -> Result<Self> {
        Self::new(tau, vec![sel.theta], vec![sel.phi])
    }

    pub fn tau_values(&self) -> &[f64] {
        &self.tau
    }

    pub fn theta_values(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.tau.len() * self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn default_tau_max(kappa: f64) -> f64 {
    if kappa > 0.0 {
        (4.0 * PI).max(3.0 / kappa)
    } else {
        4.0 * PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    pub tau: f64,
    pub theta: f64,
    pub phi: f64,
    pub probability: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub pop0: f64,
    pub pop1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub max_abs_x: f64,
    /// `(τ, θ, φ)` of the first record attaining `max_abs_x`.
    pub argmax: (f64, f64, f64),
    pub probability_at_max: f64,
    pub cap: f64,
    /// Base grid in τ-major order, followed by any refinement rounds.
    pub records: Vec<ScanRecord>,
}

impl ScanReport {
    fn from_records(records: Vec<ScanRecord>, cap: f64) -> Result<Self> {
        let best = best_index(&records).ok_or(Error::EmptyScan)?;
        let r = records[best];
        Ok(ScanReport {
            max_abs_x: r.mean_x.abs(),
            argmax: (r.tau, r.theta, r.phi),
            probability_at_max: r.probability,
            cap,
            records,
        })
    }

    /// Records whose `|mean_x|` exceeds `cap·(1 + rel_tol)`.
    pub fn cap_violations(&self, rel_tol: f64) -> usize {
        let limit = self.cap * (1.0 + rel_tol);
        self.records.iter().filter(|r| r.mean_x.abs() > limit).count()
    }
}

fn best_index(records: &[ScanRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        if best.is_none_or(|b| r.mean_x.abs() > records[b].mean_x.abs()) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    /// Hilbert-space size; sized from the pointer and κ when absent.
    pub dim: Option<Dim>,
    /// Rounds of local refinement around the incumbent maximum.
    pub refine_rounds: usize,
    /// Worker threads; the ambient rayon pool when absent.
    pub threads: Option<usize>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { dim: None, refine_rounds: 3, threads: None }
    }
}

impl ScanOptions {
    pub fn without_refinement(mut self) -> Self {
        self.refine_rounds = 0;
        self
    }
}

fn resolve_dim(pointer: &PointerSpec, kappa: f64, dim: Option<Dim>) -> Result<Dim> {
    match dim {
        Some(d) => Ok(d),
        None => auto_dim(pointer, kappa),
    }
}

fn run_in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Mean position of the pointer after the one-photon branch, no post-selection.
pub fn unconditioned_trajectory(
    pointer: &PointerSpec,
    p: &CouplingParams,
    taus: &[f64],
    dim: Option<Dim>,
) -> Result<Vec<(f64, f64)>> {
    let dim = resolve_dim(pointer, p.kappa, dim)?;
    let state = make_pointer(pointer, dim)?;
    let x = position_quadrature(dim);
    taus.iter()
        .map(|&tau| {
            let u = branch_unitary(1, &p.at(tau)?, dim)?;
            let moved = state.transform(&u)?;
            moved.check_tail()?;
            Ok((tau, expectation(&x, &moved)?.re))
        })
        .collect()
}

fn scan_points(
    state: &crate::hilbert::State,
    kappa: f64,
    kerr: bool,
    taus: &[f64],
    thetas: &[f64],
    phis: &[f64],
) -> Result<Vec<ScanRecord>> {
    let input = PathState::balanced();
    let selections = thetas
        .iter()
        .flat_map(|&theta| phis.iter().map(move |&phi| PostSelection::new(theta, phi)))
        .collect::<Result<Vec<_>>>()?;
    let blocks = taus
        .par_iter()
        .map(|&tau| {
            let kernel = ConditioningKernel::new(state, &CouplingParams::new(kappa, kerr, tau)?)?;
            let mut out = Vec::with_capacity(selections.len());
            for sel in &selections {
                match kernel.evaluate(&input, sel) {
                    Ok(m) => out.push(ScanRecord {
                        tau,
                        theta: sel.theta,
                        phi: sel.phi,
                        probability: m.probability,
                        mean_x: m.mean_x,
                        mean_p: m.mean_p,
                        pop0: m.pop0,
                        pop1: m.pop1,
                    }),
                    Err(Error::DarkPortVanished { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        0.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

/// Nine points spanning `center ± half`, passed through `fix`, duplicates dropped.
fn local_axis(center: f64, half: f64, fix: impl Fn(f64) -> f64) -> Vec<f64> {
    if half == 0.0 {
        return vec![center];
    }
    let mut v: Vec<f64> = (-4..=4).map(|k| fix(center + half * k as f64 / 4.0)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Balanced input, scan over the grid, then refine around the best point.
///
/// Each refinement round lays a 9-point stencil on every non-degenerate axis,
/// centered on the current maximum, with half-width equal to the base spacing
/// divided by `4^round`. Refinement only appends records, so the reported
/// maximum never decreases.
pub fn amplification_scan(
    pointer: &PointerSpec,
    kappa: f64,
    kerr: bool,
    grid: &ScanGrid,
    opts: &ScanOptions,
) -> Result<ScanReport> {
    pointer.validate()?;
    let dim = resolve_dim(pointer, kappa, opts.dim)?;
    let state = make_pointer(pointer, dim)?;
    let cap = pointer_spread(pointer);
    let (dt, dth, dph) = (spacing(&grid.tau), spacing(&grid.theta), spacing(&grid.phi));
    run_in_pool(opts.threads, || {
        let mut records = scan_points(&state, kappa, kerr, &grid.tau, &grid.theta, &grid.phi)?;
        let mut shrink = 1.0;
        for _ in 0..opts.refine_rounds {
            let Some(best) = best_index(&records) else { break };
            let c = records[best];
            let taus = local_axis(c.tau, dt / shrink, |t| t.max(0.0));
            let thetas = local_axis(c.theta, dth / shrink, |t| t.clamp(0.0, FRAC_PI_2));
            let phis = local_axis(c.phi, dph / shrink, |p| {
                let w = p.rem_euclid(TAU);
                if w >= TAU {
                    0.0
                } else {
                    w
                }
            });
            records.extend(scan_points(&state, kappa, kerr, &taus, &thetas, &phis)?);
            shrink *= 4.0;
        }
        ScanReport::from_records(records, cap)
    })?
}

#[derive(Debug, Clone, PartialEq)]
pub struct KerrContrast {
    pub with_kerr: ScanReport,
    pub without_kerr: ScanReport,
}

/// τ-only scans at the exact dark port, with and without the Kerr phase.
pub fn kerr_contrast(pointer: &PointerSpec, kappa: f64, taus: &[f64], opts: &ScanOptions) -> Result<KerrContrast> {
    let grid = ScanGrid::tau_only(taus.to_vec(), PostSelection::dark_port())?;
    let opts = ScanOptions { refine_rounds: 0, ..opts.clone() };
    Ok(KerrContrast {
        with_kerr: amplification_scan(pointer, kappa, true, &grid, &opts)?,
        without_kerr: amplification_scan(pointer, kappa, false, &grid, &opts)?,
    })
}

/// Analytic amplification caps; no dynamics.
pub fn limit_table(specs: &[PointerSpec]) -> Vec<(PointerSpec, f64)> {
    specs.iter().map(|s| (s.clone(), pointer_spread(s))).collect()
}
