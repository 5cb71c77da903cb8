//! Truncated Fock-space primitives for the mirror mode.
//!
//! Every state and operator lives on the span of `|0⟩ … |d−1⟩`. Positions and
//! momenta are dimensionless, `x̂ = c + c†` and `p̂ = i(c† − c)`, so a vacuum
//! has unit variance in both and "one zero-point fluctuation" means
//! `|⟨x̂⟩| = 1`.
//!
//! Truncation is policed dynamically: a constructed state whose population in
//! the top `⌈d/10⌉` levels (plus anything lost past the cut) exceeds
//! [`TAIL_TOL`] is rejected with [`Error::Truncation`].

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Population allowed in the top decile of a truncated basis.
pub const TAIL_TOL: f64 = 1e-10;

/// Tolerance on Hermiticity, positivity and norms of validated states.
pub const STATE_TOL: f64 = 1e-12;

const EXPM_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Number of retained Fock levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dim(usize);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        Ok(Dim(d))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Width of the top band watched by the truncation check, `⌈d/10⌉`.
    pub fn top_band(self) -> usize {
        self.0.div_ceil(10)
    }

    fn ensure(self, other: usize) -> Result<()> {
        if self.0 != other {
            return Err(Error::DimensionMismatch { expected: self.0, found: other });
        }
        Ok(())
    }
}

impl std::fmt::Display for Dim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense complex square matrix on a truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp(DMatrix<C64>);

impl LinOp {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        Dim::new(m.nrows())?;
        Ok(LinOp(m))
    }

    pub fn identity(dim: Dim) -> Self {
        LinOp(DMatrix::identity(dim.0, dim.0))
    }

    pub fn zeros(dim: Dim) -> Self {
        LinOp(DMatrix::zeros(dim.0, dim.0))
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> Dim {
        Dim(self.0.nrows())
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> LinOp {
        LinOp(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> LinOp {
        LinOp(&self.0 * s)
    }

    pub fn commutator(&self, other: &LinOp) -> Result<LinOp> {
        self.dim().ensure(other.dim().0)?;
        Ok(LinOp(&self.0 * &other.0 - &other.0 * &self.0))
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        self.dim().ensure(ket.dim().0)?;
        Ok(Ket(&self.0 * &ket.0))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        spectral_norm(&self.0)
    }

    /// `‖U†U − I‖` restricted to the first `levels` columns.
    pub fn unitarity_error_on(&self, levels: usize) -> f64 {
        let levels = levels.min(self.0.ncols());
        let cols = self.0.columns(0, levels);
        let gram = cols.adjoint() * cols;
        max_abs(&(gram - DMatrix::<C64>::identity(levels, levels)))
    }
}

impl Mul for &LinOp {
    type Output = LinOp;
    fn mul(self, rhs: &LinOp) -> LinOp {
        LinOp(&self.0 * &rhs.0)
    }
}

impl Add for &LinOp {
    type Output = LinOp;
    fn add(self, rhs: &LinOp) -> LinOp {
        LinOp(&self.0 + &rhs.0)
    }
}

impl Sub for &LinOp {
    type Output = LinOp;
    fn sub(self, rhs: &LinOp) -> LinOp {
        LinOp(&self.0 - &rhs.0)
    }
}

/// Pure state vector (not necessarily normalized, but never above unit norm).
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(DVector<C64>);

impl Ket {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        Dim::new(amplitudes.len())?;
        let n = amplitudes.norm_squared();
        if !n.is_finite() || n > 1.0 + STATE_TOL {
            return Err(Error::invalid(format!("ket squared norm {n} outside [0, 1]")));
        }
        Ok(Ket(amplitudes))
    }

    pub(crate) fn from_vector_unchecked(amplitudes: DVector<C64>) -> Self {
        Ket(amplitudes)
    }

    pub fn basis(n: usize, dim: Dim) -> Result<Self> {
        if n >= dim.0 {
            return Err(Error::invalid(format!("Fock level {n} outside dimension {dim}")));
        }
        let mut v = DVector::zeros(dim.0);
        v[n] = ONE;
        Ok(Ket(v))
    }

    pub fn dim(&self) -> Dim {
        Dim(self.0.len())
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn normalized(&self) -> Ket {
        let n = self.0.norm();
        if n == 0.0 {
            return self.clone();
        }
        Ket(&self.0 / C64::from(n))
    }

    pub fn inner(&self, other: &Ket) -> Result<C64> {
        self.dim().ensure(other.dim().0)?;
        Ok(self.0.dotc(&other.0))
    }

    /// `|⟨self|other⟩|²` for normalized inputs.
    pub fn fidelity(&self, other: &Ket) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn to_density(&self) -> DensOp {
        DensOp(&self.0 * self.0.adjoint())
    }
}

/// Hermitian positive-semidefinite mixed state with trace at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensOp(DMatrix<C64>);

impl DensOp {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("density matrix must be square"));
        }
        Dim::new(matrix.nrows())?;
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > STATE_TOL {
            return Err(Error::invalid(format!("density matrix not Hermitian (error {herm:.3e})")));
        }
        let tr = matrix.trace().re;
        if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&tr) {
            return Err(Error::invalid(format!("density matrix trace {tr} outside [0, 1]")));
        }
        let sym = (&matrix + matrix.adjoint()) * C64::from(0.5);
        let (vals, _) = hermitian_eigen(&sym)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::invalid(format!("density matrix has negative eigenvalue {min:.3e}")));
        }
        Ok(DensOp(sym))
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Self {
        let sym = (&matrix + matrix.adjoint()) * C64::from(0.5);
        DensOp(sym)
    }

    /// Diagonal (Fock-incoherent) state from nonnegative populations.
    pub fn from_populations(pops: &[f64]) -> Result<Self> {
        if let Some(w) = pops.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("population {w} is not a nonnegative number")));
        }
        let diag: Vec<C64> = pops.iter().map(|&w| C64::from(w)).collect();
        let m = DMatrix::from_diagonal(&DVector::from_vec(diag));
        Dim::new(m.nrows())?;
        let tr = m.trace().re;
        if tr > 1.0 + STATE_TOL {
            return Err(Error::invalid(format!("populations sum to {tr} > 1")));
        }
        Ok(DensOp(m))
    }

    pub fn dim(&self) -> Dim {
        Dim(self.0.nrows())
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn normalized(&self) -> DensOp {
        let t = self.trace();
        if t == 0.0 {
            return self.clone();
        }
        DensOp(&self.0 / C64::from(t))
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.0.nrows();
        (0..d).all(|j| (0..d).all(|i| i == j || self.0[(i, j)] == ZERO))
    }

    /// Weighted pure components `(λ_k, |k⟩)` with `λ_k > 0`.
    pub fn components(&self) -> Result<Vec<(f64, DVector<C64>)>> {
        let d = self.0.nrows();
        if self.is_diagonal() {
            return Ok((0..d)
                .filter(|&n| self.0[(n, n)].re > 0.0)
                .map(|n| {
                    let mut v = DVector::zeros(d);
                    v[n] = ONE;
                    (self.0[(n, n)].re, v)
                })
                .collect());
        }
        let (vals, vecs) = hermitian_eigen(&self.0)?;
        Ok(vals.iter().enumerate().filter(|(_, &l)| l > 0.0).map(|(k, &l)| (l, vecs.column(k).into_owned())).collect())
    }
}

/// A mirror state: pure or mixed.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(Ket),
    Mixed(DensOp),
}

impl State {
    pub fn dim(&self) -> Dim {
        match self {
            State::Pure(k) => k.dim(),
            State::Mixed(r) => r.dim(),
        }
    }

    /// `⟨ψ|ψ⟩` or `Tr ρ`.
    pub fn weight(&self) -> f64 {
        match self {
            State::Pure(k) => k.norm_squared(),
            State::Mixed(r) => r.trace(),
        }
    }

    pub fn normalized(&self) -> State {
        match self {
            State::Pure(k) => State::Pure(k.normalized()),
            State::Mixed(r) => State::Mixed(r.normalized()),
        }
    }

    pub fn to_density(&self) -> DensOp {
        match self {
            State::Pure(k) => k.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }

    /// Diagonal of the state in the Fock basis, divided by the weight.
    pub fn fock_populations(&self) -> Vec<f64> {
        let w = self.weight();
        let raw: Vec<f64> = match self {
            State::Pure(k) => k.0.iter().map(|a| a.norm_sqr()).collect(),
            State::Mixed(r) => (0..r.0.nrows()).map(|n| r.0[(n, n)].re).collect(),
        };
        if w == 0.0 {
            return raw;
        }
        raw.into_iter().map(|p| p / w).collect()
    }

    /// Fraction of the population sitting in the top `⌈d/10⌉` levels.
    pub fn tail_mass(&self) -> f64 {
        let pops = self.fock_populations();
        let band = self.dim().top_band();
        pops[pops.len() - band..].iter().sum()
    }

    /// Applies `op` as `op|ψ⟩` or `op ρ op†`.
    pub fn transform(&self, op: &LinOp) -> Result<State> {
        op.dim().ensure(self.dim().0)?;
        Ok(match self {
            State::Pure(k) => State::Pure(Ket(&op.0 * &k.0)),
            State::Mixed(r) => State::Mixed(DensOp::from_matrix_unchecked(&op.0 * &r.0 * op.0.adjoint())),
        })
    }

    pub(crate) fn check_tail(&self) -> Result<()> {
        let tail = self.tail_mass();
        if tail > TAIL_TOL {
            return Err(Error::Truncation { dim: self.dim().0, tail_mass: tail, required: None });
        }
        Ok(())
    }
}

impl From<Ket> for State {
    fn from(k: Ket) -> Self {
        State::Pure(k)
    }
}

impl From<DensOp> for State {
    fn from(r: DensOp) -> Self {
        State::Mixed(r)
    }
}

/// Anything an observable can be averaged over.
pub trait Expectable {
    fn dim(&self) -> Dim;
    fn expect_unchecked(&self, obs: &DMatrix<C64>) -> C64;
}

impl Expectable for Ket {
    fn dim(&self) -> Dim {
        Ket::dim(self)
    }
    fn expect_unchecked(&self, obs: &DMatrix<C64>) -> C64 {
        self.0.dotc(&(obs * &self.0))
    }
}

impl Expectable for DensOp {
    fn dim(&self) -> Dim {
        DensOp::dim(self)
    }
    fn expect_unchecked(&self, obs: &DMatrix<C64>) -> C64 {
        // Tr(Oρ) without forming the product.
        obs.transpose().component_mul(&self.0).sum()
    }
}

impl Expectable for State {
    fn dim(&self) -> Dim {
        State::dim(self)
    }
    fn expect_unchecked(&self, obs: &DMatrix<C64>) -> C64 {
        match self {
            State::Pure(k) => k.expect_unchecked(obs),
            State::Mixed(r) => r.expect_unchecked(obs),
        }
    }
}

/// `⟨ψ|O|ψ⟩` or `Tr(Oρ)`.
pub fn expectation<S: Expectable + ?Sized>(obs: &LinOp, state: &S) -> Result<C64> {
    obs.dim().ensure(state.dim().0)?;
    Ok(state.expect_unchecked(&obs.0))
}

pub fn annihilate(dim: Dim) -> LinOp {
    let d = dim.0;
    LinOp(DMatrix::from_fn(d, d, |i, j| if j == i + 1 { C64::from((j as f64).sqrt()) } else { ZERO }))
}

pub fn create(dim: Dim) -> LinOp {
    annihilate(dim).adjoint()
}

pub fn number(dim: Dim) -> LinOp {
    LinOp(DMatrix::from_diagonal(&DVector::from_fn(dim.0, |n, _| C64::from(n as f64))))
}

/// `x̂ = c + c†`, in units of the zero-point fluctuation.
pub fn position_quadrature(dim: Dim) -> LinOp {
    let c = annihilate(dim);
    LinOp(&c.0 + c.0.adjoint())
}

/// `p̂ = i(c† − c)`.
pub fn momentum_quadrature(dim: Dim) -> LinOp {
    let c = annihilate(dim);
    LinOp((c.0.adjoint() - &c.0) * I)
}

/// `exp(−iτ c†c)`.
pub fn free_rotation(tau: f64, dim: Dim) -> LinOp {
    LinOp(DMatrix::from_diagonal(&DVector::from_fn(dim.0, |n, _| C64::from_polar(1.0, -tau * n as f64))))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for k in 1..=n {
        out.push(out[k - 1] + (k as f64).ln());
    }
    out
}

/// Matrix elements `⟨m|D(α)|n⟩` of the infinite-space displacement, cut to
/// `d` levels. Uses the associated-Laguerre closed form with the prefactor in
/// log space; no truncation check.
pub(crate) fn displacement_elements(alpha: C64, d: usize) -> DMatrix<C64> {
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return DMatrix::identity(d, d);
    }
    let ln_abs = 0.5 * x.ln();
    let phase = alpha / alpha.norm();
    let down_phase = -phase.conj();
    let lf = ln_factorials(d);
    let mut m = DMatrix::zeros(d, d);
    let mut lag = vec![0.0; d];
    for k in 0..d {
        // L_j^{(k)}(x) for j = 0..d-k by forward recurrence in j.
        let len = d - k;
        let kf = k as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + kf - x;
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            lag[j + 1] = ((2.0 * jf + 1.0 + kf - x) * lag[j] - (jf + kf) * lag[j - 1]) / (jf + 1.0);
        }
        let up = phase.powu(k as u32);
        let down = down_phase.powu(k as u32);
        for (j, &l) in lag.iter().enumerate().take(len) {
            let log_pref = 0.5 * (lf[j] - lf[j + k]) + kf * ln_abs - 0.5 * x;
            let mag = log_pref.exp() * l;
            m[(j + k, j)] = up * mag;
            if k > 0 {
                m[(j, j + k)] = down * mag;
            }
        }
    }
    m
}

pub(crate) fn coherent_tail(alpha: C64, d: usize) -> f64 {
    // Poisson mass at levels >= d - ⌈d/10⌉.
    let x = alpha.norm_sqr();
    let keep = d - d.div_ceil(10);
    let mut p = (-x).exp();
    let mut kept = 0.0;
    for n in 0..keep {
        kept += p;
        p *= x / (n + 1) as f64;
    }
    (1.0 - kept).max(0.0)
}

/// Smallest dimension whose top-band-plus-beyond mass, as reported by
/// `tail(d)`, is under [`TAIL_TOL`]. `tail` must be nonincreasing in `d`
/// apart from the band-width steps.
pub(crate) fn min_dim_where(start: usize, limit: usize, tail: impl Fn(usize) -> f64) -> Option<usize> {
    let mut d = start.max(2);
    while d <= limit {
        if tail(d) <= TAIL_TOL {
            return Some(d);
        }
        d += 1 + d / 64;
    }
    None
}

/// Largest dimension the automatic sizing rules will search.
pub const AUTO_DIM_LIMIT: usize = 4096;

/// `D(α) = exp(α c† − α* c)`.
pub fn displacement(alpha: C64, dim: Dim) -> Result<LinOp> {
    let d = dim.0;
    let tail = coherent_tail(alpha, d);
    if tail > TAIL_TOL {
        let required = min_dim_where(d + 1, AUTO_DIM_LIMIT, |dd| coherent_tail(alpha, dd));
        return Err(Error::Truncation { dim: d, tail_mass: tail, required });
    }
    Ok(LinOp(displacement_elements(alpha, d)))
}

/// Generator `½(ξ* c² − ξ c†²)` with `ξ = r e^{iφ}`.
pub(crate) fn squeeze_generator(r: f64, phi: f64, dim: Dim) -> LinOp {
    let xi = C64::from_polar(r, phi);
    let c = annihilate(dim).0;
    let c2 = &c * &c;
    let cd2 = c2.adjoint();
    LinOp((c2 * xi.conj() - cd2 * xi) * C64::from(0.5))
}

/// Fock amplitudes of the squeezed vacuum `S(r, φ)|0⟩` (closed form; no cut check).
pub(crate) fn squeezed_vacuum_amplitudes(r: f64, phi: f64, d: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    let ratio = -C64::from_polar(r.tanh(), phi);
    let mut amp = C64::from(1.0 / r.cosh().sqrt());
    let mut m = 0usize;
    while 2 * m < d {
        v[2 * m] = amp;
        // √((2m+2)!)/(2^{m+1}(m+1)!) over √((2m)!)/(2^m m!) = √((2m+1)(2m+2))/(2(m+1))
        let step = ((2 * m + 1) as f64 * (2 * m + 2) as f64).sqrt() / (2.0 * (m + 1) as f64);
        amp *= ratio * step;
        m += 1;
    }
    v
}

pub(crate) fn squeezed_tail(r: f64, d: usize) -> f64 {
    let keep = d - d.div_ceil(10);
    let amps = squeezed_vacuum_amplitudes(r, 0.0, keep.max(1));
    (1.0 - amps.norm_squared()).max(0.0)
}

/// `S(r, φ) = exp(½(ξ* c² − ξ c†²))`, computed by exponentiating the truncated generator.
pub fn squeeze(r: f64, phi: f64, dim: Dim) -> Result<LinOp> {
    if !(r.is_finite() && phi.is_finite()) {
        return Err(Error::invalid("squeeze parameters must be finite"));
    }
    let tail = squeezed_tail(r, dim.0);
    if tail > TAIL_TOL {
        let required = min_dim_where(dim.0 + 1, AUTO_DIM_LIMIT, |dd| squeezed_tail(r, dd));
        return Err(Error::Truncation { dim: dim.0, tail_mass: tail, required });
    }
    expm_oracle(&squeeze_generator(r, phi, dim))
}

/// Number of leading Fock columns `n` for which `D(amplitude)|n⟩` keeps its
/// top-band population below [`TAIL_TOL`]. Operators built from displacements
/// of at most this amplitude are trustworthy on those columns.
pub fn interior_levels(dim: Dim, amplitude: f64) -> usize {
    let d = dim.0;
    let m = displacement_elements(C64::from(amplitude.abs()), d);
    let band = dim.top_band();
    (0..d)
        .take_while(|&n| {
            let col = m.column(n);
            let kept: f64 = col.rows(0, d - band).norm_squared();
            1.0 - kept <= TAIL_TOL
        })
        .count()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let d = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * d.max(10))
        .ok_or(Error::Convergence { what: "Hermitian eigensolver", estimate: f64::INFINITY })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// Matrix exponential used as the brute-force reference for every closed form.
///
/// Hermitian and anti-Hermitian inputs go through a Hermitian
/// eigendecomposition; anything else through scaling-and-squaring. Either
/// path checks an a-posteriori accuracy estimate against 1e-10.
pub fn expm_oracle(op: &LinOp) -> Result<LinOp> {
    let a = &op.0;
    let scale = max_abs(a).max(1.0);
    let herm = max_abs(&(a - a.adjoint()));
    let anti = max_abs(&(a + a.adjoint()));
    if herm <= 1e-14 * scale {
        let (vals, vecs) = hermitian_eigen(a)?;
        check_reconstruction(a, &vals, &vecs)?;
        let phases: Vec<C64> = vals.iter().map(|&w| C64::from(w.exp())).collect();
        return Ok(LinOp(spectral_apply(&vecs, &phases)));
    }
    if anti <= 1e-14 * scale {
        // A = -iH with H = iA Hermitian.
        let h = a * I;
        let h = (&h + h.adjoint()) * C64::from(0.5);
        let (vals, vecs) = hermitian_eigen(&h)?;
        check_reconstruction(&h, &vals, &vecs)?;
        let phases: Vec<C64> = vals.iter().map(|&w| C64::from_polar(1.0, -w)).collect();
        return Ok(LinOp(spectral_apply(&vecs, &phases)));
    }
    let e = a.exp();
    let back = (-a).exp();
    let d = a.nrows();
    let resid = max_abs(&(&e * &back - DMatrix::<C64>::identity(d, d)));
    let est = resid / (max_abs(&e) * max_abs(&back)).max(1.0);
    if !est.is_finite() || est > EXPM_TOL {
        return Err(Error::Convergence { what: "matrix exponential", estimate: est });
    }
    Ok(LinOp(e))
}

fn check_reconstruction(h: &DMatrix<C64>, vals: &[f64], vecs: &DMatrix<C64>) -> Result<()> {
    let lam: Vec<C64> = vals.iter().map(|&w| C64::from(w)).collect();
    let rebuilt = spectral_apply(vecs, &lam);
    let est = max_abs(&(h - rebuilt)) / max_abs(h).max(1.0);
    if !est.is_finite() || est > EXPM_TOL {
        return Err(Error::Convergence { what: "Hermitian eigensolver", estimate: est });
    }
    Ok(())
}

/// `V diag(f) V†`.
pub(crate) fn spectral_apply(vecs: &DMatrix<C64>, f: &[C64]) -> DMatrix<C64> {
    let mut scaled = vecs.clone();
    for (j, &fj) in f.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
    }
    scaled * vecs.adjoint()
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn spectral_norm(m: &DMatrix<C64>) -> Result<f64> {
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::Convergence { what: "singular value decomposition", estimate: f64::INFINITY })?;
    Ok(svd.singular_values.iter().cloned().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dim(d: usize) -> Dim {
        Dim::new(d).unwrap()
    }

    #[test]
    fn dim_rejects_tiny() {
        assert!(Dim::new(1).is_err());
        assert_eq!(dim(11).top_band(), 2);
        assert_eq!(dim(10).top_band(), 1);
    }

    #[test]
    fn annihilator_entries() {
        let c = annihilate(dim(2));
        assert_eq!(c.matrix()[(0, 1)], ONE);
        assert_eq!(c.matrix()[(1, 0)], ZERO);
        let c3 = annihilate(dim(3));
        assert_relative_eq!(c3.matrix()[(1, 2)].re, std::f64::consts::SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn number_is_cdag_c() {
        let d = dim(12);
        let c = annihilate(d);
        let n = &create(d) * &c;
        assert!(max_abs(&(n.matrix() - number(d).matrix())) < 1e-14);
    }

    #[test]
    fn commutator_is_identity_on_interior() {
        for d in [2, 8, 64] {
            let c = annihilate(dim(d));
            let comm = c.commutator(&create(dim(d))).unwrap();
            for i in 0..d - 1 {
                for j in 0..d - 1 {
                    let want = if i == j { ONE } else { ZERO };
                    assert!((comm.matrix()[(i, j)] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quadrature_moments() {
        let d = dim(6);
        let x = position_quadrature(d);
        let x2 = &x * &x;
        let vac = Ket::basis(0, d).unwrap();
        let one = Ket::basis(1, d).unwrap();
        assert_eq!(expectation(&x, &vac).unwrap(), ZERO);
        assert_relative_eq!(expectation(&x2, &vac).unwrap().re, 1.0);
        assert_relative_eq!(expectation(&x2, &one).unwrap().re, 3.0);
        let p = momentum_quadrature(d);
        assert!(p.is_hermitian(0.0));
        assert_relative_eq!(expectation(&(&p * &p), &vac).unwrap().re, 1.0);
    }

    #[test]
    fn displacement_identity_and_vacuum_overlap() {
        let d = dim(30);
        assert_eq!(displacement(ZERO, d).unwrap(), LinOp::identity(d));
        let dm = displacement(C64::from(0.2), d).unwrap();
        assert_relative_eq!(dm.matrix()[(0, 0)].norm(), 0.980199, epsilon = 1e-6);
        assert_relative_eq!(dm.matrix()[(0, 0)].norm(), (-0.02f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn displacement_column_zero_is_coherent_state() {
        let d = dim(40);
        let alpha = C64::new(0.7, -1.1);
        let dm = displacement(alpha, d).unwrap();
        let mut amp = C64::from((-alpha.norm_sqr() / 2.0).exp());
        for n in 0..40 {
            assert!((dm.matrix()[(n, 0)] - amp).norm() < 1e-14, "level {n}");
            amp *= alpha / ((n + 1) as f64).sqrt();
        }
    }

    #[test]
    fn displacement_group_inverse() {
        let d = dim(40);
        let alpha = C64::new(0.3, 0.4);
        let prod = &displacement(alpha, d).unwrap() * &displacement(-alpha, d).unwrap();
        let interior = interior_levels(d, alpha.norm());
        assert!(interior > 20);
        for i in 0..interior {
            for j in 0..interior {
                let want = if i == j { ONE } else { ZERO };
                assert!((prod.matrix()[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_matches_expm_oracle() {
        // The exponential of a truncated generator is itself wrong near the
        // cut, so the oracle is built in a larger space and cropped.
        let d = dim(48);
        let big = dim(160);
        let alpha = C64::new(0.9, 0.5);
        let gen = &create(big).scale(alpha) - &annihilate(big).scale(alpha.conj());
        let oracle = expm_oracle(&gen).unwrap();
        let closed = displacement(alpha, d).unwrap();
        let interior = interior_levels(d, alpha.norm());
        for n in 0..interior {
            for m in 0..48 {
                assert!((oracle.matrix()[(m, n)] - closed.matrix()[(m, n)]).norm() < 1e-10);
            }
        }
        assert!(closed.unitarity_error_on(interior) < 1e-10);
    }

    #[test]
    fn displacement_truncation_names_required_dim() {
        let err = displacement(C64::from(3.0), dim(12)).unwrap_err();
        match err {
            Error::Truncation { dim: 12, required: Some(r), .. } => {
                assert!(r > 12);
                assert!(displacement(C64::from(3.0), dim(r)).is_ok());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn squeeze_variances() {
        let d = dim(60);
        assert_eq!(squeeze(0.0, 0.3, d).unwrap().matrix(), LinOp::identity(d).matrix());
        let s = squeeze(0.5, 0.0, d).unwrap();
        let ket = s.apply(&Ket::basis(0, d).unwrap()).unwrap();
        let x = position_quadrature(d);
        let p = momentum_quadrature(d);
        let vx = expectation(&(&x * &x), &ket).unwrap().re;
        let vp = expectation(&(&p * &p), &ket).unwrap().re;
        assert_relative_eq!(vx, (-1.0f64).exp(), epsilon = 1e-10);
        assert_relative_eq!(vp, 1.0f64.exp(), epsilon = 1e-10);
        assert!(s.unitarity_error_on(60) < 1e-10);
    }

    #[test]
    fn squeeze_column_matches_closed_form() {
        let d = dim(80);
        let (r, phi) = (0.8, 1.3);
        let s = squeeze(r, phi, dim(200)).unwrap();
        let closed = squeezed_vacuum_amplitudes(r, phi, d.get());
        for n in 0..d.get() {
            assert!((s.matrix()[(n, 0)] - closed[n]).norm() < 1e-10, "level {n}");
        }
    }

    #[test]
    fn squeeze_truncation() {
        assert!(matches!(squeeze(1.0, 0.0, dim(64)), Err(Error::Truncation { required: Some(_), .. })));
        assert!(squeeze(1.0, 0.0, dim(96)).is_ok());
    }

    #[test]
    fn expm_simple_cases() {
        let d = dim(2);
        assert_eq!(expm_oracle(&LinOp::zeros(d)).unwrap().matrix(), LinOp::identity(d).matrix());
        let gen = LinOp::from_diagonal(&[ZERO, I * std::f64::consts::PI]).unwrap();
        let e = expm_oracle(&gen).unwrap();
        assert!((e.matrix()[(0, 0)] - ONE).norm() < 1e-15);
        assert!((e.matrix()[(1, 1)] + ONE).norm() < 1e-15);
        assert!(e.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_general_matches_taylor() {
        // Non-normal input takes the scaling-and-squaring path.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(0.1, 0.2),
                C64::new(0.5, 0.0),
                ZERO,
                ZERO,
                C64::new(-0.3, 0.0),
                C64::new(0.0, 0.7),
                C64::new(0.2, 0.0),
                ZERO,
                C64::new(0.05, -0.1),
            ],
        );
        let e = expm_oracle(&LinOp::from_matrix(m.clone()).unwrap()).unwrap();
        let mut sum = DMatrix::<C64>::identity(3, 3);
        let mut term = DMatrix::<C64>::identity(3, 3);
        for k in 1..40 {
            term = &term * &m / C64::from(k as f64);
            sum += &term;
        }
        assert!(max_abs(&(e.matrix() - sum)) < 1e-14);
    }

    #[test]
    fn expm_commuting_sum_factorizes() {
        let d = dim(5);
        let a = LinOp::from_diagonal(&[0.1, -0.4, 0.9, 0.0, 0.3].map(|v| C64::new(0.0, v))).unwrap();
        let b = LinOp::from_diagonal(&[0.2, 0.1, -0.3, 1.1, 0.7].map(|v| C64::new(0.0, v))).unwrap();
        let lhs = expm_oracle(&(&a + &b)).unwrap();
        let rhs = &expm_oracle(&a).unwrap() * &expm_oracle(&b).unwrap();
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-10);
        assert_eq!(lhs.dim(), d);
    }

    #[test]
    fn expectation_rejects_mismatch() {
        let err = expectation(&number(dim(3)), &Ket::basis(0, dim(4)).unwrap()).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, found: 4 });
    }

    #[test]
    fn density_validation() {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 0)] = C64::from(0.5);
        m[(1, 1)] = C64::from(0.5);
        assert!(DensOp::new(m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensOp::new(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.0, -0.1);
        assert!(DensOp::new(m.clone()).is_ok());
        m[(0, 1)] = C64::from(0.9);
        m[(1, 0)] = C64::from(0.9);
        assert!(DensOp::new(m).is_err());
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let d = dim(16);
        let x = position_quadrature(d);
        let (vals, vecs) = hermitian_eigen(x.matrix()).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lam: Vec<C64> = vals.iter().map(|&v| C64::from(v)).collect();
        assert!(max_abs(&(spectral_apply(&vecs, &lam) - x.matrix())) < 1e-12);
    }
}
