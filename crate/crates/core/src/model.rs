//! The open XXZ chain
//!
//! ```text
//! H = Σ_{i=1}^{N-1} J (S^x_i S^x_{i+1} + S^y_i S^y_{i+1} + Δ S^z_i S^z_{i+1})
//! ```
//!
//! with `S^k = σ^k / 2`. The local basis is `|↑⟩ = 0`, `|↓⟩ = 1` and two-site
//! operators use `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩` (left site is the major index).

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{exp_hermitian, CMat};
use crate::scalar::{cabs, cx, Cx, Real};

/// Largest chain handed out as a dense `2^N × 2^N` matrix (2 GiB at f64).
pub const DENSE_LIMIT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams<R> {
    pub n_sites: usize,
    pub coupling: R,
    pub anisotropy: R,
}

impl<R: Real> ChainParams<R> {
    pub fn new(n_sites: usize, coupling: R, anisotropy: R) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 != 0 {
            return Err(Error::param(format!(
                "n_sites must be even and at least 2, got {n_sites}"
            )));
        }
        if !coupling.is_finite() || coupling == R::zero() {
            return Err(Error::param("coupling must be finite and non-zero"));
        }
        if !anisotropy.is_finite() {
            return Err(Error::param("anisotropy must be finite"));
        }
        Ok(Self {
            n_sites,
            coupling,
            anisotropy,
        })
    }

    /// `J = 1` chain.
    pub fn xxz(n_sites: usize, anisotropy: R) -> Result<Self> {
        Self::new(n_sites, R::one(), anisotropy)
    }

    pub fn with_anisotropy(&self, anisotropy: R) -> Self {
        Self { anisotropy, ..*self }
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites - 1
    }

    /// Bond joining the two central spins `(N/2, N/2 + 1)` (1-indexed); as a
    /// 0-indexed bond it is `N/2 - 1`.
    pub fn center_bond(&self) -> usize {
        self.n_sites / 2 - 1
    }
}

/// Quench protocol: prepare at `delta_initial` (ground state or Gibbs state at
/// `temperature`), then evolve with `delta_final`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuenchSpec<R> {
    pub delta_initial: R,
    pub delta_final: R,
    pub temperature: R,
    pub t_max: R,
    pub dt: R,
    pub d_beta: R,
}

/// Number of whole `step`s in `span`, if `span / step` is an integer within
/// 1e-9.
pub fn whole_steps<R: Real>(span: R, step: R) -> Option<usize> {
    if !(step > R::zero()) || span < R::zero() {
        return None;
    }
    let ratio = (span / step).as_f64();
    let n = ratio.round();
    ((ratio - n).abs() <= 1e-9 * n.max(1.0)).then_some(n as usize)
}

impl<R: Real> QuenchSpec<R> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_initial", self.delta_initial),
            ("delta_final", self.delta_final),
        ] {
            if !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite")));
            }
        }
        if !(self.temperature >= R::zero()) || !self.temperature.is_finite() {
            return Err(Error::param("temperature must be finite and non-negative"));
        }
        if !(self.dt > R::zero()) {
            return Err(Error::param("dt must be positive"));
        }
        if !(self.t_max > R::zero()) {
            return Err(Error::param("t_max must be positive"));
        }
        if whole_steps(self.t_max, self.dt).is_none() {
            return Err(Error::param(format!(
                "t_max = {} is not an integer multiple of dt = {}",
                self.t_max, self.dt
            )));
        }
        if self.is_thermal() && !(self.d_beta > R::zero()) {
            return Err(Error::param("d_beta must be positive at finite temperature"));
        }
        Ok(())
    }

    pub fn is_thermal(&self) -> bool {
        self.temperature > R::zero()
    }

    /// Inverse temperature, `k = 1`.
    pub fn beta(&self) -> Option<R> {
        self.is_thermal().then(|| R::one() / self.temperature)
    }

    pub fn n_steps(&self) -> usize {
        whole_steps(self.t_max, self.dt).unwrap_or(0)
    }
}

/// Hermitian two-site operator commuting with the pair magnetization.
#[derive(Clone, Debug, PartialEq)]
pub struct BondOperator<R: Real> {
    pub matrix: CMat<R>,
}

impl<R: Real> BondOperator<R> {
    /// Largest entry of `M - M†`.
    pub fn hermiticity_error(&self) -> R {
        crate::linalg::max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// Largest entry of `[M, S^z ⊗ I + I ⊗ S^z]`.
    pub fn charge_commutator_error(&self) -> R {
        let sz = pair_sz::<R>();
        let c = &self.matrix * &sz - &sz * &self.matrix;
        c.iter().map(|x| cabs(*x)).fold(R::zero(), |a, b| a.max(b))
    }
}

fn pair_sz<R: Real>() -> CMat<R> {
    CMat::<R>::from_fn(4, 4, |i, j| {
        if i != j {
            return Cx::zero();
        }
        let m = [1.0, 0.0, 0.0, -1.0][i];
        cx(m, 0.0)
    })
}

/// Pauli matrices in the `|↑⟩, |↓⟩` basis.
pub fn pauli<R: Real>(axis: Axis) -> CMat<R> {
    let z = Cx::<R>::zero();
    let o = Cx::<R>::one();
    let i = Cx::<R>::i();
    match axis {
        Axis::X => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        Axis::Y => CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        Axis::Z => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// `J (S^x S^x + S^y S^y + Δ S^z S^z)` for one bond; `anisotropy` overrides
/// `params.anisotropy` when given.
pub fn bond_hamiltonian<R: Real>(params: &ChainParams<R>, anisotropy: Option<R>) -> BondOperator<R> {
    let delta = anisotropy.unwrap_or(params.anisotropy);
    let j = params.coupling;
    let quarter = R::lit(0.25);
    let half = R::lit(0.5);
    let mut m = CMat::<R>::zeros(4, 4);
    m[(0, 0)] = Cx::new(j * delta * quarter, R::zero());
    m[(3, 3)] = m[(0, 0)];
    m[(1, 1)] = Cx::new(-j * delta * quarter, R::zero());
    m[(2, 2)] = m[(1, 1)];
    // S^x S^x + S^y S^y = (S^+ S^- + S^- S^+) / 2 flips ↑↓ <-> ↓↑
    m[(1, 2)] = Cx::new(j * half, R::zero());
    m[(2, 1)] = m[(1, 2)];
    BondOperator { matrix: m }
}

/// Dense Hamiltonian on all `2^N` basis states (site 0 is the most significant
/// bit). The XXZ matrix is real in this basis, so a real matrix is returned.
pub fn full_hamiltonian<R: Real>(params: &ChainParams<R>) -> Result<nalgebra::DMatrix<R>> {
    let n = params.n_sites;
    if n > DENSE_LIMIT {
        return Err(Error::Size {
            n_sites: n,
            limit: DENSE_LIMIT,
        });
    }
    let dim = 1usize << n;
    let mut h = nalgebra::DMatrix::<R>::zeros(dim, dim);
    for state in 0..dim {
        let (diag, flips) = xxz_action(params, n, state);
        h[(state, state)] += diag;
        for (target, amp) in flips {
            h[(target, state)] += amp;
        }
    }
    Ok(h)
}

/// Action of `H` on one basis state: its diagonal energy and the off-diagonal
/// `(target, amplitude)` pairs. Bit `n-1-i` stores site `i` (1 = ↓).
pub(crate) fn xxz_action<R: Real>(
    params: &ChainParams<R>,
    n: usize,
    state: usize,
) -> (R, Vec<(usize, R)>) {
    let j = params.coupling;
    let zz = j * params.anisotropy * R::lit(0.25);
    let flip = j * R::lit(0.5);
    let mut diag = R::zero();
    let mut flips = Vec::new();
    for i in 0..n - 1 {
        let a = (state >> (n - 1 - i)) & 1;
        let b = (state >> (n - 2 - i)) & 1;
        if a == b {
            diag += zz;
        } else {
            diag -= zz;
            let mask = (1usize << (n - 1 - i)) | (1usize << (n - 2 - i));
            flips.push((state ^ mask, flip));
        }
    }
    (diag, flips)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    /// `exp(-i h τ)`
    RealTime,
    /// `exp(-h τ)`
    ImaginaryTime,
}

/// Gates for one symmetric second-order Trotter step: a half step on the odd
/// bonds `(1,2), (3,4), …`, a full step on the even bonds `(2,3), (4,5), …`,
/// and the odd half step again. Each entry pairs a 0-indexed bond (joining
/// sites `b` and `b+1`) with its gate.
#[derive(Clone, Debug)]
pub struct TrotterGateSet<R: Real> {
    pub odd_half_gates: Vec<(usize, CMat<R>)>,
    pub even_gates: Vec<(usize, CMat<R>)>,
    pub step: R,
    pub kind: GateKind,
}

impl<R: Real> TrotterGateSet<R> {
    /// Builds a set from per-bond gate constructors taking the bond index and
    /// the time slice (half or full step).
    pub fn from_fn(
        n_bonds: usize,
        step: R,
        kind: GateKind,
        mut gate: impl FnMut(usize, R) -> CMat<R>,
    ) -> Self {
        let half = step * R::lit(0.5);
        let odd_half_gates = (0..n_bonds).step_by(2).map(|b| (b, gate(b, half))).collect();
        let even_gates = (1..n_bonds).step_by(2).map(|b| (b, gate(b, step))).collect();
        Self {
            odd_half_gates,
            even_gates,
            step,
            kind,
        }
    }

    pub fn n_gates(&self) -> usize {
        self.odd_half_gates.len() + self.even_gates.len()
    }
}

/// Exact exponential of one bond term for a time slice `tau`.
pub fn bond_exponential<R: Real>(h: &BondOperator<R>, tau: R, kind: GateKind) -> CMat<R> {
    let factor = match kind {
        GateKind::RealTime => Cx::new(R::zero(), -tau),
        GateKind::ImaginaryTime => Cx::new(-tau, R::zero()),
    };
    exp_hermitian(&h.matrix, factor)
}

pub fn trotter_gates<R: Real>(params: &ChainParams<R>, step: R, kind: GateKind) -> Result<TrotterGateSet<R>> {
    if !(step > R::zero()) {
        return Err(Error::param("Trotter step must be positive"));
    }
    let h = bond_hamiltonian(params, None);
    Ok(TrotterGateSet::from_fn(params.n_bonds(), step, kind, |_, tau| {
        bond_exponential(&h, tau, kind)
    }))
}
