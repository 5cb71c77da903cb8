//! Evolution under the single-photon optomechanical Hamiltonian.
//!
//! In units of `ħω_m`, with `n̂_A` the photon occupation of the optomechanical
//! arm, `H = c†c − κ n̂_A (c + c†)`. The optical term `ω_0 a†a` multiplies
//! both interferometer arms by the same `e^{−iω_0 t}` and is dropped: it
//! cancels in every post-selected quantity, so lab phases differ from the
//! ones reported here by that common factor.
//!
//! For a fixed photon number the mirror evolves in closed form,
//!
//! ```text
//! U_n(τ) = exp(i n²κ²(τ − sin τ)) · D(nκ(1 − e^{−iτ})) · exp(−iτ c†c)
//! ```
//!
//! and [`HamiltonianSpectrum`] provides the brute-force reference by
//! diagonalizing the truncated joint Hamiltonian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    displacement, free_rotation, hermitian_eigen, position_quadrature, spectral_apply, Dim, Ket, LinOp, C64, TAIL_TOL,
};

/// Coupling `κ = g/ω_m`, Kerr switch and phase time `τ = ω_m t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub kappa: f64,
    pub kerr: bool,
    pub tau: f64,
}

impl CouplingParams {
    pub fn new(kappa: f64, kerr: bool, tau: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa must be finite and nonnegative, got {kappa}")));
        }
        if !tau.is_finite() {
            return Err(Error::invalid("tau must be finite"));
        }
        Ok(CouplingParams { kappa, kerr, tau })
    }

    pub fn at(&self, tau: f64) -> Result<Self> {
        Self::new(self.kappa, self.kerr, tau)
    }

    /// Displacement `nκ(1 − e^{−iτ})` accumulated by the mirror.
    pub fn displacement_amplitude(&self, n_photon: u8) -> C64 {
        let one_minus = C64::new(1.0 - self.tau.cos(), self.tau.sin());
        one_minus * (n_photon as f64 * self.kappa)
    }

    /// Kerr phase `n²κ²(τ − sin τ)`, or zero with the Kerr term switched off.
    pub fn kerr_phase(&self, n_photon: u8) -> f64 {
        if !self.kerr {
            return 0.0;
        }
        let n = n_photon as f64;
        n * n * self.kappa * self.kappa * (self.tau - self.tau.sin())
    }
}

fn check_photon(n_photon: u8) -> Result<()> {
    if n_photon > 1 {
        return Err(Error::invalid(format!("photon number must be 0 or 1, got {n_photon}")));
    }
    Ok(())
}

/// Closed-form mirror propagator conditional on `n_photon` photons in arm A.
pub fn branch_unitary(n_photon: u8, p: &CouplingParams, dim: Dim) -> Result<LinOp> {
    check_photon(n_photon)?;
    let rotation = free_rotation(p.tau, dim);
    if n_photon == 0 {
        return Ok(rotation);
    }
    let disp = displacement(p.displacement_amplitude(n_photon), dim)?;
    let phase = C64::from_polar(1.0, p.kerr_phase(n_photon));
    let mut m = disp.into_matrix();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let f = phase * rotation.matrix()[(j, j)];
        col.iter_mut().for_each(|z| *z *= f);
    }
    LinOp::from_matrix(m)
}

/// `H/ħω_m` on (photon-in-A occupation 0/1) ⊗ (mirror). Index `n_A·d + m`.
pub fn full_hamiltonian(p: &CouplingParams, dim: Dim) -> LinOp {
    let d = dim.get();
    let x = position_quadrature(dim);
    let mut h = DMatrix::<C64>::zeros(2 * d, 2 * d);
    for m in 0..d {
        h[(m, m)] = C64::from(m as f64);
        h[(d + m, d + m)] = C64::from(m as f64);
    }
    for i in 0..d {
        for j in 0..d {
            h[(d + i, d + j)] -= x.matrix()[(i, j)] * p.kappa;
        }
    }
    LinOp::from_matrix(h).expect("2d x 2d is square")
}

/// Photon-path register ⊗ mirror amplitudes, block 0 = photon in arm B.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    mirror: Dim,
    amps: DVector<C64>,
}

impl JointState {
    pub fn new(amps: DVector<C64>, mirror: Dim) -> Result<Self> {
        if amps.len() != 2 * mirror.get() {
            return Err(Error::DimensionMismatch { expected: 2 * mirror.get(), found: amps.len() });
        }
        Ok(JointState { mirror, amps })
    }

    /// `c_b|0⟩_A ⊗ |ψ⟩ + c_a|1⟩_A ⊗ |ψ⟩`.
    pub fn product(c_a: C64, c_b: C64, mirror: &Ket) -> Self {
        let d = mirror.dim().get();
        let mut amps = DVector::zeros(2 * d);
        for m in 0..d {
            amps[m] = c_b * mirror.amplitudes()[m];
            amps[d + m] = c_a * mirror.amplitudes()[m];
        }
        JointState { mirror: mirror.dim(), amps }
    }

    pub fn mirror_dim(&self) -> Dim {
        self.mirror
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// Unnormalized mirror amplitudes in the block with `n_photon` photons in arm A.
    pub fn block(&self, n_photon: u8) -> DVector<C64> {
        let d = self.mirror.get();
        self.amps.rows(n_photon as usize * d, d).into_owned()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.norm_squared()
    }

    fn tail_mass(&self) -> f64 {
        let d = self.mirror.get();
        let band = self.mirror.top_band();
        let total = self.norm_squared();
        if total == 0.0 {
            return 0.0;
        }
        let top: f64 = [0, d].iter().map(|&off| self.amps.rows(off + d - band, band).norm_squared()).sum();
        top / total
    }
}

/// Eigendecomposition of the joint Hamiltonian, reusable across times.
#[derive(Debug, Clone)]
pub struct HamiltonianSpectrum {
    dim: Dim,
    energies: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl HamiltonianSpectrum {
    pub fn new(kappa: f64, dim: Dim) -> Result<Self> {
        let p = CouplingParams::new(kappa, true, 0.0)?;
        let h = full_hamiltonian(&p, dim);
        let (energies, vectors) = hermitian_eigen(h.matrix())?;
        Ok(HamiltonianSpectrum { dim, energies, vectors })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `exp(−iHτ)` on the joint space.
    pub fn propagator(&self, tau: f64) -> LinOp {
        let phases: Vec<C64> = self.energies.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
        LinOp::from_matrix(spectral_apply(&self.vectors, &phases)).expect("square")
    }

    /// Mirror propagator for the block with `n_photon` photons in arm A.
    pub fn block_propagator(&self, n_photon: u8, tau: f64) -> Result<LinOp> {
        check_photon(n_photon)?;
        let d = self.dim.get();
        let off = n_photon as usize * d;
        let full = self.propagator(tau);
        LinOp::from_matrix(full.matrix().view((off, off), (d, d)).into_owned())
    }

    pub fn evolve(&self, tau: f64, state: &JointState) -> Result<JointState> {
        if state.mirror != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim.get(), found: state.mirror.get() });
        }
        let out = JointState { mirror: self.dim, amps: self.propagator(tau).matrix() * &state.amps };
        let drift = (out.norm_squared() - state.norm_squared()).abs();
        if drift > 1e-10 {
            return Err(Error::Convergence { what: "oracle evolution norm", estimate: drift });
        }
        let tail = out.tail_mass();
        if tail > TAIL_TOL {
            return Err(Error::Truncation { dim: self.dim.get(), tail_mass: tail, required: None });
        }
        Ok(out)
    }
}

/// Applies `exp(−iHτ)` to a joint state by diagonalizing `H` on the full
/// truncated space. The Kerr flag is ignored: the Hamiltonian always carries it.
pub fn oracle_evolve(p: &CouplingParams, state: &JointState) -> Result<JointState> {
    HamiltonianSpectrum::new(p.kappa, state.mirror)?.evolve(p.tau, state)
}

/// Spectral-norm distance between two operators on their first `levels`
/// columns, after removing the global phase fixed at element (0, 0).
pub fn phase_aligned_distance(a: &LinOp, b: &LinOp, levels: usize) -> Result<f64> {
    let (ma, mb) = (a.matrix(), b.matrix());
    let phase = {
        let z = ma[(0, 0)] * mb[(0, 0)].conj();
        if z.norm() == 0.0 {
            C64::from(1.0)
        } else {
            z / z.norm()
        }
    };
    let levels = levels.min(ma.ncols());
    let diff = ma.columns(0, levels) - mb.columns(0, levels) * phase;
    crate::hilbert::spectral_norm(&diff.into_owned())
}
