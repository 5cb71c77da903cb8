//! Mach–Zehnder post-selection: the photon enters a balanced superposition of
//! arms A (optomechanical cavity) and B (fixed cavity), the mirror evolves
//! conditionally, and detection projects the path onto a chosen state.
//!
//! The whole "evolve, then detect" map is a single mirror operator
//!
//! ```text
//! M = ⟨sel|A⟩⟨A|in⟩ U_1(τ) + ⟨sel|B⟩⟨B|in⟩ U_0(τ)
//! ```
//!
//! so a pure pointer conditions to `M|ψ⟩` and a mixed one to `MρM†`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::DVector;

use crate::dynamics::{branch_unitary, CouplingParams};
use crate::error::{Error, Result};
use crate::hilbert::{
    displacement, expectation, momentum_quadrature, position_quadrature, Dim, LinOp, State, C64, I, STATE_TOL,
};
use crate::pointer::PointerSpec;

/// Probabilities below this are treated as an exactly dark port.
pub const P_FLOOR: f64 = 1e-16;

const ORTHOGONAL_TOL: f64 = 1e-14;

/// Photon path amplitudes after the first beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub c_a: C64,
    pub c_b: C64,
}

impl PathState {
    pub fn new(c_a: C64, c_b: C64) -> Result<Self> {
        let n = c_a.norm_sqr() + c_b.norm_sqr();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::invalid(format!("path state has squared norm {n}, not 1")));
        }
        Ok(PathState { c_a, c_b })
    }

    /// `(|A⟩ + |B⟩)/√2`, the output of a balanced beam splitter.
    pub fn balanced() -> Self {
        PathState { c_a: C64::from(FRAC_1_SQRT_2), c_b: C64::from(FRAC_1_SQRT_2) }
    }
}

/// Post-selected path state `cos θ |A⟩ + e^{iφ} sin θ |B⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostSelection {
    pub theta: f64,
    pub phi: f64,
}

impl PostSelection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::invalid(format!("theta {theta} outside [0, pi/2]")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::invalid(format!("phi {phi} outside [0, 2pi)")));
        }
        Ok(PostSelection { theta, phi })
    }

    /// The port that stays dark for the balanced input when the mirror does nothing.
    pub fn dark_port() -> Self {
        PostSelection { theta: FRAC_PI_4, phi: PI }
    }

    pub fn amplitudes(&self) -> (C64, C64) {
        (C64::from(self.theta.cos()), C64::from_polar(self.theta.sin(), self.phi))
    }

    /// The complementary detector outcome.
    pub fn orthogonal(&self) -> Self {
        PostSelection { theta: FRAC_PI_2 - self.theta, phi: (self.phi + PI).rem_euclid(TAU) }
    }

    /// Branch weights `(⟨sel|A⟩⟨A|in⟩, ⟨sel|B⟩⟨B|in⟩)`.
    fn branch_weights(&self, input: &PathState) -> (C64, C64) {
        let (sa, sb) = self.amplitudes();
        (sa.conj() * input.c_a, sb.conj() * input.c_b)
    }
}

/// Outcome of conditioning the mirror on one detector click.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedResult {
    pub probability: f64,
    /// Normalized conditioned mirror state.
    pub state: State,
    pub mean_x: f64,
    pub mean_p: f64,
    pub fock_populations: Vec<f64>,
}

/// Mirror operator for "evolve for `p.tau`, then detect `sel`".
pub fn kraus_operator(input: &PathState, sel: &PostSelection, p: &CouplingParams, dim: Dim) -> Result<LinOp> {
    let (wa, wb) = sel.branch_weights(input);
    let u1 = branch_unitary(1, p, dim)?;
    let u0 = branch_unitary(0, p, dim)?;
    Ok(&u1.scale(wa) + &u0.scale(wb))
}

pub fn condition(
    pointer: &State,
    input: &PathState,
    sel: &PostSelection,
    p: &CouplingParams,
) -> Result<ConditionedResult> {
    let m = kraus_operator(input, sel, p, pointer.dim())?;
    let out = pointer.transform(&m)?;
    let probability = out.weight();
    if probability.is_nan() || probability < P_FLOOR {
        return Err(Error::DarkPortVanished { probability });
    }
    let state = out.normalized();
    let dim = state.dim();
    let mean_x = expectation(&position_quadrature(dim), &state)?.re;
    let mean_p = expectation(&momentum_quadrature(dim), &state)?.re;
    let fock_populations = state.fock_populations();
    Ok(ConditionedResult { probability, state, mean_x, mean_p, fock_populations })
}

/// `A_w = ⟨sel|n̂_A|in⟩ / ⟨sel|in⟩`.
pub fn weak_value(input: &PathState, sel: &PostSelection) -> Result<C64> {
    let (wa, wb) = sel.branch_weights(input);
    let overlap = wa + wb;
    if overlap.norm() < ORTHOGONAL_TOL {
        return Err(Error::OrthogonalSelection { overlap: overlap.norm() });
    }
    Ok(wa / overlap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPrediction {
    pub pred_x: f64,
    pub pred_p: f64,
}

/// Leading-order conditioned pointer means from the weak value.
///
/// The photon in arm A kicks the freely rotated pointer by `D(β)`,
/// `β = κ(1 − e^{−iτ})`, i.e. `exp(iG)` with `G = Im β x̂ − Re β p̂`. To first
/// order in `G`, `Re A_w` shifts the means by the kick itself and `Im A_w`
/// couples through the pointer covariance:
///
/// ```text
/// x = ⟨x̂⟩' + 2 Re A_w Re β − 2 Im A_w (Im β Var'x − Re β Cov'xp)
/// p = ⟨p̂⟩' + 2 Re A_w Im β − 2 Im A_w (Im β Cov'xp − Re β Var'p)
/// ```
///
/// Primed moments are those of `exp(−iτc†c)` applied to the pointer. The Kerr
/// phase enters only at second order.
pub fn first_order_prediction(a_w: C64, p: &CouplingParams, pointer: &PointerSpec) -> WeakPrediction {
    let beta = p.displacement_amplitude(1);
    let m = pointer.moments().rotated(p.tau);
    let (vx, vp, cov) = (m.var_x(), m.var_p(), m.cov_xp());
    WeakPrediction {
        pred_x: m.mean_x() + 2.0 * a_w.re * beta.re - 2.0 * a_w.im * (beta.im * vx - beta.re * cov),
        pred_p: m.mean_p() + 2.0 * a_w.re * beta.im - 2.0 * a_w.im * (beta.im * cov - beta.re * vp),
    }
}

/// Summary statistics of a conditioned state, without the state itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedMoments {
    pub probability: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub pop0: f64,
    pub pop1: f64,
}

type Form = [[C64; 2]; 2];

/// Conditioning at fixed `τ` for many post-selections.
///
/// With `u = e^{−iτc†c}ψ` and `δ = (D(β) − 1)u`, every conditioned vector is
/// `s·u + t·δ` where `t = w_A e^{iΦ}` and `s = t + w_B`. The kernel stores the
/// 2×2 Gram-type forms of the observables in that basis (summed over the
/// pointer's mixture components), so each post-selection costs O(1). Using
/// `δ` rather than `D(β)u` keeps near-dark probabilities accurate.
#[derive(Debug, Clone)]
pub struct ConditioningKernel {
    kerr_factor: C64,
    gram: Form,
    x: Form,
    p: Form,
    pop0: Form,
    pop1: Form,
}

fn apply_x(v: &DVector<C64>) -> DVector<C64> {
    let d = v.len();
    DVector::from_fn(d, |m, _| {
        let mut acc = C64::default();
        if m > 0 {
            acc += v[m - 1] * (m as f64).sqrt();
        }
        if m + 1 < d {
            acc += v[m + 1] * ((m + 1) as f64).sqrt();
        }
        acc
    })
}

fn apply_p(v: &DVector<C64>) -> DVector<C64> {
    let d = v.len();
    DVector::from_fn(d, |m, _| {
        let mut acc = C64::default();
        if m > 0 {
            acc += v[m - 1] * (m as f64).sqrt();
        }
        if m + 1 < d {
            acc -= v[m + 1] * ((m + 1) as f64).sqrt();
        }
        acc * I
    })
}

impl ConditioningKernel {
    pub fn new(pointer: &State, p: &CouplingParams) -> Result<Self> {
        let dim = pointer.dim();
        let d = dim.get();
        let disp = displacement(p.displacement_amplitude(1), dim)?;
        let components: Vec<(f64, DVector<C64>)> = match pointer {
            State::Pure(k) => vec![(1.0, k.amplitudes().clone())],
            State::Mixed(rho) => rho.components()?,
        };
        let zero: Form = Default::default();
        let mut kernel = ConditioningKernel {
            kerr_factor: C64::from_polar(1.0, p.kerr_phase(1)),
            gram: zero,
            x: zero,
            p: zero,
            pop0: zero,
            pop1: zero,
        };
        for (weight, psi) in components {
            let u = DVector::from_fn(d, |n, _| psi[n] * C64::from_polar(1.0, -p.tau * n as f64));
            let delta = disp.matrix() * &u - &u;
            let basis = [u, delta];
            let xs = [apply_x(&basis[0]), apply_x(&basis[1])];
            let ps = [apply_p(&basis[0]), apply_p(&basis[1])];
            for i in 0..2 {
                for j in 0..2 {
                    let w = C64::from(weight);
                    kernel.gram[i][j] += w * basis[i].dotc(&basis[j]);
                    kernel.x[i][j] += w * basis[i].dotc(&xs[j]);
                    kernel.p[i][j] += w * basis[i].dotc(&ps[j]);
                    kernel.pop0[i][j] += w * basis[i][0].conj() * basis[j][0];
                    kernel.pop1[i][j] += w * basis[i][1].conj() * basis[j][1];
                }
            }
        }
        Ok(kernel)
    }

    pub fn evaluate(&self, input: &PathState, sel: &PostSelection) -> Result<ConditionedMoments> {
        let (wa, wb) = sel.branch_weights(input);
        let t = wa * self.kerr_factor;
        let coeffs = [t + wb, t];
        let form = |f: &Form| {
            let mut acc = C64::default();
            for i in 0..2 {
                for j in 0..2 {
                    acc += coeffs[i].conj() * coeffs[j] * f[i][j];
                }
            }
            acc.re
        };
        let probability = form(&self.gram);
        if probability.is_nan() || probability < P_FLOOR {
            return Err(Error::DarkPortVanished { probability });
        }
        Ok(ConditionedMoments {
            probability,
            mean_x: form(&self.x) / probability,
            mean_p: form(&self.p) / probability,
            pop0: form(&self.pop0) / probability,
            pop1: form(&self.pop1) / probability,
        })
    }
}
