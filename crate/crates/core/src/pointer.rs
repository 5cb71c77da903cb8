//! Initial mirror ("pointer") states and their amplification caps.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_tail, displacement_elements, min_dim_where, squeezed_tail, squeezed_vacuum_amplitudes, DensOp, Dim, Ket,
    State, AUTO_DIM_LIMIT, C64, STATE_TOL, TAIL_TOL,
};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Declarative description of the initial mirror state.
///
/// Squeezing follows `S(r, φ) = exp(½(ξ* c² − ξ c†²))` with `ξ = r e^{iφ}`:
/// `φ = 0` squeezes `x̂`, `φ = π` stretches it to variance `e^{2r}`.
#[derive(Debug, Clone, PartialEq)]
pub enum PointerSpec {
    Ground,
    Coherent {
        alpha: C64,
    },
    Squeezed {
        r: f64,
        phi: f64,
    },
    CoherentSqueezed {
        alpha: C64,
        r: f64,
        phi: f64,
    },
    /// Boltzmann factor `z = e^{−ħω_m/k_BT}` in `[0, 1)`.
    Thermal {
        z: f64,
    },
    /// Incoherent mixture with weight `weights[n]` on `|n⟩`.
    FockMixture {
        weights: Vec<f64>,
    },
}

impl PointerSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite")))
            }
        };
        match self {
            PointerSpec::Ground => Ok(()),
            PointerSpec::Coherent { alpha } => {
                finite(alpha.re, "alpha")?;
                finite(alpha.im, "alpha")
            }
            PointerSpec::Squeezed { r, phi } => {
                finite(*r, "r")?;
                finite(*phi, "phi")
            }
            PointerSpec::CoherentSqueezed { alpha, r, phi } => {
                finite(alpha.re, "alpha")?;
                finite(alpha.im, "alpha")?;
                finite(*r, "r")?;
                finite(*phi, "phi")
            }
            PointerSpec::Thermal { z } => {
                if !(0.0..1.0).contains(z) {
                    return Err(Error::invalid(format!("thermal z must lie in [0, 1), got {z}")));
                }
                Ok(())
            }
            PointerSpec::FockMixture { weights } => {
                if weights.is_empty() {
                    return Err(Error::invalid("Fock mixture needs at least one weight"));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(Error::invalid(format!("Fock weight {w} is not a nonnegative number")));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > STATE_TOL {
                    return Err(Error::invalid(format!("Fock weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Whether [`make_pointer`] yields a pure state.
    pub fn is_pure(&self) -> bool {
        !matches!(self, PointerSpec::Thermal { .. } | PointerSpec::FockMixture { .. })
    }

    /// Short lowercase name used in reports and config files.
    pub fn kind(&self) -> &'static str {
        match self {
            PointerSpec::Ground => "ground",
            PointerSpec::Coherent { .. } => "coherent",
            PointerSpec::Squeezed { .. } => "squeezed",
            PointerSpec::CoherentSqueezed { .. } => "coherent_squeezed",
            PointerSpec::Thermal { .. } => "thermal",
            PointerSpec::FockMixture { .. } => "fock_mixture",
        }
    }

    /// First and second moments of the mode operator, from closed forms.
    pub fn moments(&self) -> Moments {
        let sq = |r: f64, phi: f64| (r.sinh().powi(2), -C64::from_polar(r.sinh() * r.cosh(), phi));
        match self {
            PointerSpec::Ground => Moments::default(),
            PointerSpec::Coherent { alpha } => {
                Moments { mean_c: *alpha, mean_n: alpha.norm_sqr(), mean_cc: alpha * alpha }
            }
            PointerSpec::Squeezed { r, phi } => {
                let (n, cc) = sq(*r, *phi);
                Moments { mean_c: C64::default(), mean_n: n, mean_cc: cc }
            }
            PointerSpec::CoherentSqueezed { alpha, r, phi } => {
                let (n, cc) = sq(*r, *phi);
                Moments { mean_c: *alpha, mean_n: n + alpha.norm_sqr(), mean_cc: cc + alpha * alpha }
            }
            PointerSpec::Thermal { z } => {
                Moments { mean_c: C64::default(), mean_n: z / (1.0 - z), mean_cc: C64::default() }
            }
            PointerSpec::FockMixture { weights } => Moments {
                mean_c: C64::default(),
                mean_n: weights.iter().enumerate().map(|(n, w)| n as f64 * w).sum(),
                mean_cc: C64::default(),
            },
        }
    }
}

/// `⟨c⟩`, `⟨c†c⟩` and `⟨c²⟩` of a pointer state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mean_c: C64,
    pub mean_n: f64,
    pub mean_cc: C64,
}

impl Moments {
    /// Moments after the free rotation `exp(−iτ c†c)`.
    pub fn rotated(&self, tau: f64) -> Moments {
        Moments {
            mean_c: self.mean_c * C64::from_polar(1.0, -tau),
            mean_n: self.mean_n,
            mean_cc: self.mean_cc * C64::from_polar(1.0, -2.0 * tau),
        }
    }

    pub fn mean_x(&self) -> f64 {
        2.0 * self.mean_c.re
    }

    pub fn mean_p(&self) -> f64 {
        2.0 * self.mean_c.im
    }

    pub fn var_x(&self) -> f64 {
        2.0 * self.mean_cc.re + 2.0 * self.mean_n + 1.0 - self.mean_x().powi(2)
    }

    pub fn var_p(&self) -> f64 {
        -2.0 * self.mean_cc.re + 2.0 * self.mean_n + 1.0 - self.mean_p().powi(2)
    }

    /// Symmetrized covariance `½⟨{x̂, p̂}⟩ − ⟨x̂⟩⟨p̂⟩`.
    pub fn cov_xp(&self) -> f64 {
        2.0 * self.mean_cc.im - self.mean_x() * self.mean_p()
    }
}

fn thermal_tail(z: f64, d: usize) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let band = d.div_ceil(10);
    let zd = z.powf(d as f64);
    let top = (z.powf((d - band) as f64) - zd) / (1.0 - zd);
    top.max(zd / (1.0 - z))
}

/// Smallest dimension that holds a thermal state of Boltzmann factor `z`.
pub fn thermal_required_dim(z: f64) -> usize {
    if z == 0.0 {
        return 2;
    }
    let m = (TAIL_TOL.ln() / z.ln()).floor().max(2.0) as usize;
    let mut d = m;
    while thermal_tail(z, d) > TAIL_TOL {
        d += 1;
    }
    d
}

fn fock_tail(weights: &[f64], d: usize) -> f64 {
    let keep = d - d.div_ceil(10);
    weights.iter().skip(keep).sum()
}

fn coherent_squeezed_ket(alpha: C64, r: f64, phi: f64, d: usize) -> (DVector<C64>, f64) {
    // Build in a padded space so mass pushed past the cut is visible.
    let work = 2 * d + 16;
    let vac = squeezed_vacuum_amplitudes(r, phi, work);
    let full = displacement_elements(alpha, work) * vac;
    let keep = d - d.div_ceil(10);
    let kept: f64 = full.rows(0, keep).norm_squared();
    let tail = (1.0 - kept).max(0.0);
    (full.rows(0, d).into_owned(), tail)
}

fn pure_tail(spec: &PointerSpec, d: usize) -> f64 {
    match spec {
        PointerSpec::Ground => 0.0,
        PointerSpec::Coherent { alpha } => coherent_tail(*alpha, d),
        PointerSpec::Squeezed { r, .. } => squeezed_tail(*r, d),
        PointerSpec::CoherentSqueezed { alpha, r, phi } => coherent_squeezed_ket(*alpha, *r, *phi, d).1,
        _ => unreachable!("mixed pointer"),
    }
}

fn tail_for(spec: &PointerSpec, d: usize) -> f64 {
    match spec {
        PointerSpec::Thermal { z } => thermal_tail(*z, d),
        PointerSpec::FockMixture { weights } => fock_tail(weights, d),
        pure => pure_tail(pure, d),
    }
}

/// Smallest dimension at which [`make_pointer`] accepts `spec`.
pub fn required_dim(spec: &PointerSpec) -> Result<Dim> {
    spec.validate()?;
    let d = match spec {
        PointerSpec::Thermal { z } => thermal_required_dim(*z),
        PointerSpec::FockMixture { weights } => {
            let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            min_dim_where(last + 2, usize::MAX, |d| fock_tail(weights, d)).expect("finite support")
        }
        _ => min_dim_where(2, AUTO_DIM_LIMIT, |d| tail_for(spec, d)).ok_or(Error::Truncation {
            dim: AUTO_DIM_LIMIT,
            tail_mass: tail_for(spec, AUTO_DIM_LIMIT),
            required: None,
        })?,
    };
    Dim::new(d.max(2))
}

/// Dimension for a run at coupling `kappa`: the pointer's own requirement plus
/// `⌈10 + 20κ²⌉` levels of headroom for the photon-induced displacement.
pub fn auto_dim(spec: &PointerSpec, kappa: f64) -> Result<Dim> {
    let base = required_dim(spec)?.get();
    let total = base + (10.0 + 20.0 * kappa * kappa).ceil() as usize;
    if total > AUTO_DIM_LIMIT {
        return Err(Error::Truncation {
            dim: AUTO_DIM_LIMIT,
            tail_mass: tail_for(spec, AUTO_DIM_LIMIT.min(base)),
            required: Some(total),
        });
    }
    Dim::new(total)
}

/// Builds the initial mirror state. Pure families return [`State::Pure`],
/// thermal and Fock mixtures [`State::Mixed`].
pub fn make_pointer(spec: &PointerSpec, dim: Dim) -> Result<State> {
    spec.validate()?;
    let d = dim.get();
    let tail = tail_for(spec, d);
    if tail > TAIL_TOL {
        let required = match spec {
            PointerSpec::Thermal { z } => Some(thermal_required_dim(*z)),
            _ => required_dim(spec).ok().map(Dim::get),
        };
        return Err(Error::Truncation { dim: d, tail_mass: tail, required });
    }
    let state = match spec {
        PointerSpec::Ground => State::Pure(Ket::basis(0, dim)?),
        PointerSpec::Coherent { alpha } => {
            let mut col = DVector::zeros(d);
            let mut amp = C64::from((-alpha.norm_sqr() / 2.0).exp());
            for n in 0..d {
                col[n] = amp;
                amp *= alpha / ((n + 1) as f64).sqrt();
            }
            State::Pure(Ket::from_vector_unchecked(col).normalized())
        }
        PointerSpec::Squeezed { r, phi } => {
            State::Pure(Ket::from_vector_unchecked(squeezed_vacuum_amplitudes(*r, *phi, d)).normalized())
        }
        PointerSpec::CoherentSqueezed { alpha, r, phi } => {
            let (v, _) = coherent_squeezed_ket(*alpha, *r, *phi, d);
            State::Pure(Ket::from_vector_unchecked(v).normalized())
        }
        PointerSpec::Thermal { z } => {
            let mut pops: Vec<f64> = (0..d).map(|n| (1.0 - z) * z.powi(n as i32)).collect();
            let total: f64 = pops.iter().sum();
            pops.iter_mut().for_each(|p| *p /= total);
            State::Mixed(DensOp::from_populations(&pops)?)
        }
        PointerSpec::FockMixture { weights } => {
            let mut pops = vec![0.0; d];
            for (n, &w) in weights.iter().enumerate().take(d) {
                pops[n] = w;
            }
            let total: f64 = pops.iter().sum();
            pops.iter_mut().for_each(|p| *p /= total);
            State::Mixed(DensOp::from_populations(&pops)?)
        }
    };
    Ok(state)
}

/// Amplification cap of a pointer family in σ units: the spread of the
/// widest position-like quadrature.
///
/// Ground/coherent → 1, squeezed → `e^r`, thermal → `√((1+z)/(1−z))`,
/// Fock mixture → `√(Σ w_n (2n+1))`.
pub fn pointer_spread(spec: &PointerSpec) -> f64 {
    match spec {
        PointerSpec::Ground | PointerSpec::Coherent { .. } => 1.0,
        PointerSpec::Squeezed { r, .. } | PointerSpec::CoherentSqueezed { r, .. } => r.abs().exp(),
        PointerSpec::Thermal { z } => ((1.0 + z) / (1.0 - z)).sqrt(),
        PointerSpec::FockMixture { weights } => {
            weights.iter().enumerate().map(|(n, w)| w * (2 * n + 1) as f64).sum::<f64>().sqrt()
        }
    }
}

/// Laboratory parameters of the optomechanical cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Mechanical angular frequency, rad/s.
    pub omega_m: f64,
    /// Mirror mass, kg.
    pub mass: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Optical angular frequency, rad/s.
    pub omega_0: f64,
    /// Cavity length, m.
    pub cavity_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensionless {
    pub kappa: f64,
    pub z: f64,
}

impl PhysicalParams {
    /// Zero-point fluctuation `σ = √(ħ/2mω_m)`, in metres.
    pub fn zero_point_fluctuation(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }

    /// Single-photon coupling `g = (ω_0/L) σ`, rad/s.
    pub fn coupling_rate(&self) -> f64 {
        self.omega_0 / self.cavity_length * self.zero_point_fluctuation()
    }
}

/// `κ = g/ω_m` and `z = e^{−ħω_m/k_BT}`.
///
/// `κ` is normalized to the mechanical frequency; with that choice the
/// single-photon displacement peaks at `4κσ`.
pub fn dimensionless_from_physical(p: &PhysicalParams) -> Result<Dimensionless> {
    let fields = [p.omega_m, p.mass, p.temperature, p.omega_0, p.cavity_length];
    if fields.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("physical parameters must be finite and strictly positive"));
    }
    Ok(Dimensionless { kappa: p.coupling_rate() / p.omega_m, z: (-HBAR * p.omega_m / (K_B * p.temperature)).exp() })
}
