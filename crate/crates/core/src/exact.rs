//! Dense exact-diagonalization oracle for small chains.
//!
//! Basis states are bit strings with site 0 as the most significant bit and
//! `1 = ↓`. Every operator used here conserves the number of down spins, so
//! Hamiltonians and density matrices are stored as one dense block per
//! magnetization sector. The largest block at `N = 14` is 3432 × 3432.

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};

use crate::correlations::{BondCorrelators, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, svd, symmetric_eigh, CMat};
use crate::model::{xxz_action, ChainParams};
use crate::scalar::{cabs, cexp, re, Cx, Real};

/// Largest chain for pure-state routines.
pub const EXACT_LIMIT: usize = 14;
/// Largest chain for density-matrix routines.
pub const THERMAL_LIMIT: usize = 12;
/// Two lowest levels closer than this are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::Size { n_sites: n, limit })
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn bit(n: usize, state: usize, site: usize) -> usize {
    (state >> (n - 1 - site)) & 1
}

/// Basis states grouped by number of down spins.
#[derive(Clone, Debug)]
pub(crate) struct SectorBasis {
    n: usize,
    sectors: Vec<Vec<usize>>,
    position: Vec<usize>,
}

impl SectorBasis {
    pub(crate) fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let mut sectors = vec![Vec::new(); n + 1];
        let mut position = vec![0; dim];
        for s in 0..dim {
            let k = s.count_ones() as usize;
            position[s] = sectors[k].len();
            sectors[k].push(s);
        }
        Self { n, sectors, position }
    }

    fn hamiltonian<R: Real>(&self, params: &ChainParams<R>, k: usize) -> DMatrix<R> {
        let states = &self.sectors[k];
        let mut h = DMatrix::<R>::zeros(states.len(), states.len());
        for (col, &s) in states.iter().enumerate() {
            let (diag, flips) = xxz_action(params, self.n, s);
            h[(col, col)] += diag;
            for (t, amp) in flips {
                h[(self.position[t], col)] += amp;
            }
        }
        h
    }
}

/// Pure state on `2^N` amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<R: Real> {
    pub amplitudes: DVector<Cx<R>>,
    pub n_sites: usize,
}

impl<R: Real> StateVector<R> {
    pub fn new(amplitudes: DVector<Cx<R>>, n_sites: usize) -> Result<Self> {
        if amplitudes.len() != 1usize << n_sites {
            return Err(Error::Dimension {
                expected: 1 << n_sites,
                got: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, n_sites })
    }

    /// Computational basis state; `true` marks a down spin.
    pub fn product(pattern: &[bool]) -> Self {
        let n = pattern.len();
        let idx = pattern
            .iter()
            .fold(0usize, |acc, &down| (acc << 1) | usize::from(down));
        let mut amps = DVector::zeros(1 << n);
        amps[idx] = Cx::one();
        Self { amplitudes: amps, n_sites: n }
    }

    pub fn norm(&self) -> R {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &Self) -> Cx<R> {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn energy(&self, params: &ChainParams<R>) -> R {
        let n = self.n_sites;
        let mut e = Cx::<R>::zero();
        for (s, amp) in self.amplitudes.iter().enumerate() {
            if amp.norm_sqr() == R::zero() {
                continue;
            }
            let (diag, flips) = xxz_action(params, n, s);
            e += amp.conj() * amp * re(diag);
            for (t, a) in flips {
                e += self.amplitudes[t].conj() * amp * re(a);
            }
        }
        e.re
    }

    /// Von Neumann entropy (base 2) of the left half of the chain.
    pub fn half_chain_entropy(&self) -> R {
        let half = self.n_sites / 2;
        let rows = 1usize << half;
        let cols = 1usize << (self.n_sites - half);
        let m = CMat::<R>::from_fn(rows, cols, |l, r| self.amplitudes[l * cols + r]);
        let probs: Vec<R> = svd(&m).s.iter().map(|s| *s * *s).collect();
        crate::correlations::entropy_of_spectrum(&probs)
    }

    /// Expectation values of `σ^k_a σ^k_b` and `σ^z_a`, `σ^z_b` computed by
    /// applying the operators to the amplitudes directly.
    pub fn correlators(&self, a: usize, b: usize) -> Result<BondCorrelators<R>> {
        check_pair(self.n_sites, a, b)?;
        let n = self.n_sites;
        let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
        let (mut dx, mut dy) = (Cx::<R>::zero(), Cx::<R>::zero());
        let (mut dz, mut ma, mut mb) = (R::zero(), R::zero(), R::zero());
        for (s, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            let za = if bit(n, s, a) == 0 { R::one() } else { -R::one() };
            let zb = if bit(n, s, b) == 0 { R::one() } else { -R::one() };
            dz += p * za * zb;
            ma += p * za;
            mb += p * zb;
            let partner = self.amplitudes[s ^ mask].conj() * amp;
            dx += partner;
            // Y|↑⟩ = i|↓⟩, Y|↓⟩ = -i|↑⟩
            if za == zb {
                dy -= partner;
            } else {
                dy += partner;
            }
        }
        let tol = R::lit(1e-10);
        if dx.im.abs() > tol || dy.im.abs() > tol {
            return Err(Error::CorruptedState(format!(
                "complex Pauli correlators ({dx}, {dy})"
            )));
        }
        Ok(BondCorrelators {
            dx: dx.re,
            dy: dy.re,
            dz,
            mz_a: ma,
            mz_b: mb,
        })
    }
}

fn check_pair(n: usize, a: usize, b: usize) -> Result<()> {
    if a >= b || b >= n {
        return Err(Error::Index(format!(
            "site pair ({a}, {b}) invalid for {n} sites"
        )));
    }
    Ok(())
}

/// Ground state of `params` with its energy.
#[derive(Clone, Debug)]
pub struct GroundState<R: Real> {
    pub state: StateVector<R>,
    pub energy: R,
}

/// Lowest eigenvector in the zero-magnetization sector. When the two lowest
/// sector levels are degenerate within [`DEGENERACY_GAP`], the sector is
/// re-diagonalized inside the spin-flip-even subspace so that `⟨σ^z_i⟩ = 0`.
pub fn ground_state<R: Real>(params: &ChainParams<R>) -> Result<GroundState<R>> {
    let n = params.n_sites;
    check_size(n, EXACT_LIMIT)?;
    let basis = SectorBasis::new(n);
    let k = n / 2;
    let states = &basis.sectors[k];
    let h = basis.hamiltonian(params, k);
    let (vals, vecs) = symmetric_eigh(&h);

    let (energy, sector_vec) = if vals.len() > 1 && vals[1] - vals[0] < R::lit(DEGENERACY_GAP) {
        let all = (1usize << n) - 1;
        let pairs: Vec<(usize, usize)> = states
            .iter()
            .filter(|&&s| s < all ^ s)
            .map(|&s| (basis.position[s], basis.position[all ^ s]))
            .collect();
        let w = R::lit(std::f64::consts::FRAC_1_SQRT_2);
        let mut proj = DMatrix::<R>::zeros(states.len(), pairs.len());
        for (c, &(i, j)) in pairs.iter().enumerate() {
            proj[(i, c)] = w;
            proj[(j, c)] = w;
        }
        let h_even = proj.transpose() * &h * &proj;
        let (ev, evecs) = symmetric_eigh(&h_even);
        (ev[0], &proj * evecs.column(0))
    } else {
        (vals[0], vecs.column(0).into_owned())
    };

    let mut amps = DVector::<Cx<R>>::zeros(1 << n);
    for (i, &s) in states.iter().enumerate() {
        amps[s] = re(sector_vec[i]);
    }
    // fix the global sign so the largest amplitude is positive
    let (imax, _) = amps
        .iter()
        .enumerate()
        .fold((0, R::zero()), |(bi, bv), (i, a)| if cabs(*a) > bv { (i, cabs(*a)) } else { (bi, bv) });
    if amps[imax].re < R::zero() {
        amps.neg_mut();
    }
    let norm = amps.norm();
    amps.unscale_mut(norm);
    Ok(GroundState {
        state: StateVector { amplitudes: amps, n_sites: n },
        energy,
    })
}

/// Density matrix commuting with total `S^z`, held as one block per sector
/// (indexed by the number of down spins).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<R: Real> {
    pub n_sites: usize,
    pub blocks: Vec<CMat<R>>,
}

impl<R: Real> DensityMatrix<R> {
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Converts a dense `2^N` matrix; fails if it couples different sectors.
    pub fn from_dense(m: &CMat<R>, n_sites: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: m.nrows(),
            });
        }
        let basis = SectorBasis::new(n_sites);
        for i in 0..dim {
            for j in 0..dim {
                if i.count_ones() != j.count_ones() && cabs(m[(i, j)]) > R::lit(1e-12) {
                    return Err(Error::InvalidParameter(
                        "density matrix does not commute with total S^z".into(),
                    ));
                }
            }
        }
        let blocks = basis
            .sectors
            .iter()
            .map(|states| CMat::from_fn(states.len(), states.len(), |a, b| m[(states[a], states[b])]))
            .collect();
        Ok(Self { n_sites, blocks })
    }

    /// `|ψ⟩⟨ψ|` for a state confined to one magnetization sector.
    pub fn from_pure(state: &StateVector<R>) -> Result<Self> {
        let n = state.n_sites;
        let basis = SectorBasis::new(n);
        let mut blocks = Vec::with_capacity(n + 1);
        let mut occupied = 0;
        for states in &basis.sectors {
            let v = DVector::from_iterator(states.len(), states.iter().map(|&s| state.amplitudes[s]));
            if v.norm_squared() > R::lit(1e-12) {
                occupied += 1;
            }
            blocks.push(&v * v.adjoint());
        }
        if occupied > 1 {
            return Err(Error::InvalidParameter(
                "pure state spans several magnetization sectors".into(),
            ));
        }
        Ok(Self { n_sites: n, blocks })
    }

    pub fn to_dense(&self) -> CMat<R> {
        let basis = SectorBasis::new(self.n_sites);
        let mut m = CMat::<R>::zeros(self.dim(), self.dim());
        for (states, block) in basis.sectors.iter().zip(&self.blocks) {
            for (a, &sa) in states.iter().enumerate() {
                for (b, &sb) in states.iter().enumerate() {
                    m[(sa, sb)] = block[(a, b)];
                }
            }
        }
        m
    }

    pub fn trace(&self) -> Cx<R> {
        self.blocks.iter().map(|b| b.trace()).fold(Cx::zero(), |a, b| a + b)
    }

    pub fn hermiticity_error(&self) -> R {
        self.blocks
            .iter()
            .map(|b| crate::linalg::max_abs_diff(b, &b.adjoint()))
            .fold(R::zero(), |a, b| a.max(b))
    }

    /// Full spectrum, ascending.
    pub fn eigenvalues(&self) -> Vec<R> {
        let mut v: Vec<R> = self
            .blocks
            .iter()
            .filter(|b| b.nrows() > 0)
            .flat_map(|b| hermitian_eigenvalues(b))
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Checks Hermiticity, unit trace (1e-10) and positivity (-1e-9).
    pub fn validate(&self) -> Result<()> {
        let tol = R::lit(1e-10);
        if self.hermiticity_error() > tol {
            return Err(Error::CorruptedState("density matrix not Hermitian".into()));
        }
        let tr = self.trace();
        if cabs(tr - Cx::one()) > tol {
            return Err(Error::CorruptedState(format!("trace {tr} != 1")));
        }
        if let Some(&min) = self.eigenvalues().first() {
            if min < R::lit(-1e-9) {
                return Err(Error::CorruptedState(format!("negative eigenvalue {min}")));
            }
        }
        Ok(())
    }

    pub fn energy(&self, params: &ChainParams<R>) -> R {
        let basis = SectorBasis::new(self.n_sites);
        (0..=self.n_sites)
            .map(|k| {
                let h = basis.hamiltonian(params, k).map(re);
                (&self.blocks[k] * h).trace().re
            })
            .fold(R::zero(), |a, b| a + b)
    }

    /// Von Neumann entropy (base 2) of the reduced state of the left half.
    pub fn half_chain_entropy(&self) -> R {
        let n = self.n_sites;
        let half = n / 2;
        let right = n - half;
        let rmask = (1usize << right) - 1;
        let basis = SectorBasis::new(n);
        let mut rho = CMat::<R>::zeros(1 << half, 1 << half);
        for (k, states) in basis.sectors.iter().enumerate() {
            let block = &self.blocks[k];
            for (a, &s) in states.iter().enumerate() {
                let (l, r) = (s >> right, s & rmask);
                for l2 in 0..(1usize << half) {
                    let t = (l2 << right) | r;
                    if t.count_ones() as usize == k {
                        rho[(l, l2)] += block[(a, basis.position[t])];
                    }
                }
            }
        }
        crate::correlations::entropy_of_spectrum(&hermitian_eigenvalues(&rho))
    }
}

/// Spectral decomposition of `H_F`, built lazily per sector and reused across
/// evolution times.
pub struct SpectralPropagator<R: Real> {
    params: ChainParams<R>,
    basis: SectorBasis,
    sectors: Vec<Option<(Vec<R>, CMat<R>)>>,
}

impl<R: Real> SpectralPropagator<R> {
    pub fn new(params: &ChainParams<R>) -> Result<Self> {
        check_size(params.n_sites, EXACT_LIMIT)?;
        Ok(Self {
            params: *params,
            basis: SectorBasis::new(params.n_sites),
            sectors: vec![None; params.n_sites + 1],
        })
    }

    fn sector(&mut self, k: usize) -> &(Vec<R>, CMat<R>) {
        if self.sectors[k].is_none() {
            let (vals, vecs) = symmetric_eigh(&self.basis.hamiltonian(&self.params, k));
            self.sectors[k] = Some((vals, vecs.map(re)));
        }
        self.sectors[k].as_ref().unwrap()
    }

    /// `exp(-i H t) |ψ⟩`.
    pub fn evolve_state(&mut self, state: &StateVector<R>, t: R) -> Result<StateVector<R>> {
        let n = self.params.n_sites;
        if state.n_sites != n {
            return Err(Error::Dimension {
                expected: n,
                got: state.n_sites,
            });
        }
        let mut out = DVector::<Cx<R>>::zeros(1 << n);
        for k in 0..=n {
            let states = self.basis.sectors[k].clone();
            let v = DVector::from_iterator(states.len(), states.iter().map(|&s| state.amplitudes[s]));
            if v.norm_squared() == R::zero() {
                continue;
            }
            let (vals, vecs) = self.sector(k);
            let mut coeff = vecs.adjoint() * v;
            for (c, &lam) in coeff.iter_mut().zip(vals) {
                *c *= cexp(Cx::new(R::zero(), -lam * t));
            }
            let back = vecs * coeff;
            for (i, &s) in states.iter().enumerate() {
                out[s] = back[i];
            }
        }
        Ok(StateVector {
            amplitudes: out,
            n_sites: n,
        })
    }

    /// `U ρ U†` with `U = exp(-i H t)`.
    pub fn evolve_density(&mut self, rho: &DensityMatrix<R>, t: R) -> Result<DensityMatrix<R>> {
        let n = self.params.n_sites;
        check_size(n, THERMAL_LIMIT)?;
        if rho.n_sites != n {
            return Err(Error::Dimension {
                expected: n,
                got: rho.n_sites,
            });
        }
        let mut blocks = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let block = &rho.blocks[k];
            if block.nrows() == 0 || block.iter().all(|x| x.norm_sqr() == R::zero()) {
                blocks.push(block.clone());
                continue;
            }
            let (vals, vecs) = self.sector(k);
            let mut inner = vecs.adjoint() * block * vecs;
            for j in 0..inner.ncols() {
                for i in 0..inner.nrows() {
                    inner[(i, j)] *= cexp(Cx::new(R::zero(), -(vals[i] - vals[j]) * t));
                }
            }
            blocks.push(vecs * inner * vecs.adjoint());
        }
        Ok(DensityMatrix { n_sites: n, blocks })
    }
}

/// `exp(-i H_F t) |ψ⟩` by full spectral decomposition.
pub fn evolve_state<R: Real>(
    state: &StateVector<R>,
    params_final: &ChainParams<R>,
    t: R,
) -> Result<StateVector<R>> {
    SpectralPropagator::new(params_final)?.evolve_state(state, t)
}

/// `U ρ U†`, `U = exp(-i H_F t)`.
pub fn evolve_density<R: Real>(
    rho: &DensityMatrix<R>,
    params_final: &ChainParams<R>,
    t: R,
) -> Result<DensityMatrix<R>> {
    check_size(params_final.n_sites, THERMAL_LIMIT)?;
    SpectralPropagator::new(params_final)?.evolve_density(rho, t)
}

/// Gibbs state `e^{-βH} / Z`.
pub fn thermal_density<R: Real>(params: &ChainParams<R>, beta: R) -> Result<DensityMatrix<R>> {
    let n = params.n_sites;
    check_size(n, THERMAL_LIMIT)?;
    if !(beta >= R::zero()) || !beta.is_finite() {
        return Err(Error::param("beta must be finite and non-negative"));
    }
    let basis = SectorBasis::new(n);
    let spectra: Vec<(Vec<R>, DMatrix<R>)> =
        (0..=n).map(|k| symmetric_eigh(&basis.hamiltonian(params, k))).collect();
    let e_min = spectra
        .iter()
        .flat_map(|(v, _)| v.iter().copied())
        .fold(R::max_value().unwrap(), |a, b| a.min(b));
    let mut z = R::zero();
    let mut blocks = Vec::with_capacity(n + 1);
    for (vals, vecs) in &spectra {
        let w: Vec<R> = vals.iter().map(|&l| (-beta * (l - e_min)).exp()).collect();
        z += w.iter().copied().fold(R::zero(), |a, b| a + b);
        let mut scaled = vecs.clone();
        for (j, &wj) in w.iter().enumerate() {
            scaled.column_mut(j).scale_mut(wj);
        }
        blocks.push((scaled * vecs.transpose()).map(re));
    }
    for b in blocks.iter_mut() {
        b.unscale_mut(z);
    }
    Ok(DensityMatrix { n_sites: n, blocks })
}

/// States whose two-site reduced density matrix can be extracted.
pub trait TwoSiteReduce<R: Real> {
    fn n_sites(&self) -> usize;

    /// Partial trace over every site except `a < b`.
    fn reduce_two_site(&self, a: usize, b: usize) -> Result<TwoQubitDensity<R>>;

    /// Pauli correlators of the pair.
    fn correlators_exact(&self, a: usize, b: usize) -> Result<BondCorrelators<R>>;
}

impl<R: Real> TwoSiteReduce<R> for StateVector<R> {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn reduce_two_site(&self, a: usize, b: usize) -> Result<TwoQubitDensity<R>> {
        let n = self.n_sites;
        check_pair(n, a, b)?;
        let (ba, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
        let mut rho = nalgebra::Matrix4::<Cx<R>>::zeros();
        for rest in 0..(1usize << n) {
            if rest & (ba | bb) != 0 {
                continue;
            }
            let v = [rest, rest | bb, rest | ba, rest | ba | bb].map(|s| self.amplitudes[s]);
            for x in 0..4 {
                for y in 0..4 {
                    rho[(x, y)] += v[x] * v[y].conj();
                }
            }
        }
        Ok(TwoQubitDensity(rho))
    }

    fn correlators_exact(&self, a: usize, b: usize) -> Result<BondCorrelators<R>> {
        self.correlators(a, b)
    }
}

impl<R: Real> TwoSiteReduce<R> for DensityMatrix<R> {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn reduce_two_site(&self, a: usize, b: usize) -> Result<TwoQubitDensity<R>> {
        let n = self.n_sites;
        check_pair(n, a, b)?;
        let (ba, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
        let basis = SectorBasis::new(n);
        let mut rho = nalgebra::Matrix4::<Cx<R>>::zeros();
        for (k, states) in basis.sectors.iter().enumerate() {
            let block = &self.blocks[k];
            for (i, &s) in states.iter().enumerate() {
                let x = 2 * bit(n, s, a) + bit(n, s, b);
                let rest = s & !(ba | bb);
                for y in 0..4 {
                    let t = rest | if y & 2 != 0 { ba } else { 0 } | if y & 1 != 0 { bb } else { 0 };
                    if t.count_ones() as usize == k {
                        rho[(x, y)] += block[(i, basis.position[t])];
                    }
                }
            }
        }
        Ok(TwoQubitDensity(rho))
    }

    fn correlators_exact(&self, a: usize, b: usize) -> Result<BondCorrelators<R>> {
        BondCorrelators::from_density(&self.reduce_two_site(a, b)?)
    }
}

/// Pauli correlators of sites `a < b`.
pub fn correlators_exact<R: Real, S: TwoSiteReduce<R>>(
    source: &S,
    a: usize,
    b: usize,
) -> Result<BondCorrelators<R>> {
    source.correlators_exact(a, b)
}

pub fn reduce_two_site<R: Real, S: TwoSiteReduce<R>>(
    source: &S,
    a: usize,
    b: usize,
) -> Result<TwoQubitDensity<R>> {
    source.reduce_two_site(a, b)
}
