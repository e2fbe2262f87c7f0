//! Two-qubit correlation measures: concurrence, mutual information, classical
//! correlation by projective measurement on `B`, and quantum discord, plus the
//! closed forms valid for Bell-diagonal states `(I⊗I + Σ_k d_k σ^k⊗σ^k)/4`.
//!
//! Entropies use log base 2. Eigenvalues in `[-1e-12, 0)` are treated as 0.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::scalar::{cabs, cexp, xlog2x, Cx, Real};

/// Default bound on `|⟨σ^z⟩|` below which the Bell-diagonal reconstruction is
/// trusted.
pub const U1_VALIDITY_THRESHOLD: f64 = 1e-6;

/// Pauli correlators `d_k = ⟨σ^k_A σ^k_B⟩` of one pair plus the single-site
/// magnetizations `⟨σ^z⟩` used as validity diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BondCorrelators<R> {
    pub dx: R,
    pub dy: R,
    pub dz: R,
    pub mz_a: R,
    pub mz_b: R,
}

impl<R: Real> BondCorrelators<R> {
    /// Bell-diagonal correlators with zero magnetization.
    pub fn bell_diagonal(dx: R, dy: R, dz: R) -> Self {
        Self {
            dx,
            dy,
            dz,
            mz_a: R::zero(),
            mz_b: R::zero(),
        }
    }

    /// Eigenvalues of the reconstructed state:
    /// `(1-dx-dy-dz)/4, (1+dx-dy+dz)/4, (1-dx+dy+dz)/4, (1+dx+dy-dz)/4`.
    pub fn bell_weights(&self) -> [R; 4] {
        let (x, y, z) = (self.dx, self.dy, self.dz);
        let q = R::lit(0.25);
        let o = R::one();
        [
            (o - x - y - z) * q,
            (o + x - y + z) * q,
            (o - x + y + z) * q,
            (o + x + y - z) * q,
        ]
    }

    /// Range and reconstructability checks (slack 1e-9).
    pub fn check(&self) -> Result<()> {
        let slack = R::lit(1e-9);
        for (name, d) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz)] {
            if !d.is_finite() || d.abs() > R::one() + slack {
                return Err(Error::InvalidCorrelators(format!("|{name}| = {d} > 1")));
            }
        }
        if let Some(w) = self.bell_weights().iter().find(|w| **w < -slack) {
            return Err(Error::InvalidCorrelators(format!(
                "negative Bell weight {w}"
            )));
        }
        Ok(())
    }

    pub fn is_u1_valid(&self, threshold: R) -> bool {
        self.mz_a.abs() < threshold && self.mz_b.abs() < threshold
    }

    pub fn max_abs(&self) -> R {
        self.dx.abs().max(self.dy.abs()).max(self.dz.abs())
    }

    /// Reads the correlators off a two-qubit density matrix.
    pub fn from_density(rho: &TwoQubitDensity<R>) -> Result<Self> {
        Self::from_density_tol(rho, R::lit(1e-10))
    }

    /// As [`Self::from_density`], with the allowed imaginary part of each
    /// expectation value given explicitly. The bound never drops below
    /// `1000 ε` of the scalar type.
    pub fn from_density_tol(rho: &TwoQubitDensity<R>, tol: R) -> Result<Self> {
        let tol = tol.max(R::eps() * R::lit(1e3));
        let m = &rho.0;
        let dz = m[(0, 0)] - m[(1, 1)] - m[(2, 2)] + m[(3, 3)];
        // σ^xσ^x and σ^yσ^y couple |↑↑⟩<->|↓↓⟩ and |↑↓⟩<->|↓↑⟩
        let flip = m[(1, 2)] + m[(2, 1)];
        let pair = m[(0, 3)] + m[(3, 0)];
        let dx = flip + pair;
        let dy = flip - pair;
        let mz_a = m[(0, 0)] + m[(1, 1)] - m[(2, 2)] - m[(3, 3)];
        let mz_b = m[(0, 0)] - m[(1, 1)] + m[(2, 2)] - m[(3, 3)];
        if [dx, dy, dz, mz_a, mz_b].iter().any(|c| c.im.abs() > tol) {
            return Err(Error::CorruptedState(
                "complex expectation value of a Hermitian operator".into(),
            ));
        }
        Ok(Self {
            dx: dx.re,
            dy: dy.re,
            dz: dz.re,
            mz_a: mz_a.re,
            mz_b: mz_b.re,
        })
    }
}

/// Converts spin correlators `⟨S^k S^k⟩` and magnetizations `⟨S^z⟩` to Pauli
/// correlators (factors 4 and 2).
pub fn spin_to_pauli<R: Real>(spin: [R; 3], spin_mz: [R; 2]) -> Result<BondCorrelators<R>> {
    let four = R::lit(4.0);
    let two = R::lit(2.0);
    let c = BondCorrelators {
        dx: spin[0] * four,
        dy: spin[1] * four,
        dz: spin[2] * four,
        mz_a: spin_mz[0] * two,
        mz_b: spin_mz[1] * two,
    };
    let slack = R::lit(1e-9);
    if c.max_abs() > R::one() + slack {
        return Err(Error::InvalidCorrelators(format!(
            "Pauli correlator beyond unit modulus: ({}, {}, {})",
            c.dx, c.dy, c.dz
        )));
    }
    Ok(c)
}

/// Two-qubit density matrix in the `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩` basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitDensity<R: Real>(pub Matrix4<Cx<R>>);

impl<R: Real> TwoQubitDensity<R> {
    pub fn from_pure(v: [Cx<R>; 4]) -> Self {
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        Self(m)
    }

    pub fn eigenvalues(&self) -> [R; 4] {
        let e = self.0.symmetric_eigenvalues();
        let mut v = [e[0], e[1], e[2], e[3]];
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Hermitian, unit trace and positive semidefinite, each within 1e-9.
    pub fn validate(&self) -> Result<()> {
        let tol = R::lit(1e-9);
        let herm = (self.0 - self.0.adjoint()).iter().map(|x| cabs(*x)).fold(R::zero(), |a, b| a.max(b));
        if herm > tol {
            return Err(Error::CorruptedState(format!("non-Hermitian by {herm}")));
        }
        let tr = self.0.trace();
        if cabs(tr - Cx::one()) > tol {
            return Err(Error::CorruptedState(format!("trace {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -tol {
            return Err(Error::CorruptedState(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    /// `tr_B ρ`.
    pub fn reduced_a(&self) -> Matrix2<Cx<R>> {
        let m = &self.0;
        Matrix2::new(
            m[(0, 0)] + m[(1, 1)],
            m[(0, 2)] + m[(1, 3)],
            m[(2, 0)] + m[(3, 1)],
            m[(2, 2)] + m[(3, 3)],
        )
    }

    /// `tr_A ρ`.
    pub fn reduced_b(&self) -> Matrix2<Cx<R>> {
        let m = &self.0;
        Matrix2::new(
            m[(0, 0)] + m[(2, 2)],
            m[(0, 1)] + m[(2, 3)],
            m[(1, 0)] + m[(3, 2)],
            m[(1, 1)] + m[(3, 3)],
        )
    }

    pub fn entropy(&self) -> R {
        entropy_of_spectrum(&self.eigenvalues())
    }

    pub fn purity(&self) -> R {
        (self.0 * self.0).trace().re
    }
}

/// Outcome of [`rho_from_correlators`]; `warning` is set when the
/// magnetizations exceed the validity threshold.
#[derive(Clone, Debug)]
pub struct Reconstructed<R: Real> {
    pub rho: TwoQubitDensity<R>,
    pub warning: Option<String>,
}

/// `(I⊗I + Σ_k d_k σ^k⊗σ^k) / 4`.
pub fn rho_from_correlators<R: Real>(c: &BondCorrelators<R>) -> Result<Reconstructed<R>> {
    c.check()?;
    let q = R::lit(0.25);
    let mut m = Matrix4::<Cx<R>>::zeros();
    m[(0, 0)] = Cx::new((R::one() + c.dz) * q, R::zero());
    m[(3, 3)] = m[(0, 0)];
    m[(1, 1)] = Cx::new((R::one() - c.dz) * q, R::zero());
    m[(2, 2)] = m[(1, 1)];
    m[(1, 2)] = Cx::new((c.dx + c.dy) * q, R::zero());
    m[(2, 1)] = m[(1, 2)];
    m[(0, 3)] = Cx::new((c.dx - c.dy) * q, R::zero());
    m[(3, 0)] = m[(0, 3)];
    let warning = (!c.is_u1_valid(R::lit(U1_VALIDITY_THRESHOLD))).then(|| {
        format!(
            "magnetizations ({:.3e}, {:.3e}) exceed {:.0e}; Bell-diagonal form not exact",
            c.mz_a.as_f64(),
            c.mz_b.as_f64(),
            U1_VALIDITY_THRESHOLD
        )
    });
    Ok(Reconstructed {
        rho: TwoQubitDensity(m),
        warning,
    })
}

/// Entropy (base 2) of a probability spectrum.
pub fn entropy_of_spectrum<R: Real>(probs: &[R]) -> R {
    -probs.iter().map(|&p| xlog2x(p)).fold(R::zero(), |a, b| a + b)
}

/// `-tr ρ log2 ρ` for any Hermitian density matrix.
pub fn von_neumann_entropy<R: Real>(rho: &CMat<R>) -> R {
    entropy_of_spectrum(&crate::linalg::hermitian_eigenvalues(rho))
}

fn entropy2<R: Real>(m: &Matrix2<Cx<R>>) -> R {
    // eigenvalues of a 2×2 Hermitian matrix from its trace and determinant
    let t = (m[(0, 0)] + m[(1, 1)]).re;
    let half = t * R::lit(0.5);
    let d = (m[(0, 0)].re - m[(1, 1)].re) * R::lit(0.5);
    let r = (d * d + m[(0, 1)].norm_sqr()).sqrt();
    entropy_of_spectrum(&[half + r, half - r])
}

/// Wootters concurrence `max{λ1 - λ2 - λ3 - λ4, 0}` with `λ_i` the
/// descending square roots of the spectrum of `ρ (σ^y⊗σ^y) ρ* (σ^y⊗σ^y)`.
/// That spectrum is computed as the spectrum of the Hermitian matrix
/// `√ρ ρ̃ √ρ`.
pub fn concurrence_wootters<R: Real>(rho: &TwoQubitDensity<R>) -> R {
    let m = rho.0;
    let eig = m.symmetric_eigen();
    let mut sqrt_rho = Matrix4::<Cx<R>>::zeros();
    for k in 0..4 {
        let w = eig.eigenvalues[k].max(R::zero()).sqrt();
        let v = eig.eigenvectors.column(k);
        sqrt_rho += v * v.adjoint() * Cx::new(w, R::zero());
    }
    // σ^y⊗σ^y is real: it is antidiagonal with entries (-1, 1, 1, -1)
    let mut yy = Matrix4::<Cx<R>>::zeros();
    for (i, s) in [-1.0, 1.0, 1.0, -1.0].iter().enumerate() {
        yy[(i, 3 - i)] = Cx::new(R::lit(*s), R::zero());
    }
    let tilde = yy * m.conjugate() * yy;
    let herm = sqrt_rho * tilde * sqrt_rho;
    let herm = (herm + herm.adjoint()) * Cx::new(R::lit(0.5), R::zero());
    let e = herm.symmetric_eigenvalues();
    let mut lam: Vec<R> = e.iter().map(|x| x.max(R::zero()).sqrt()).collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (lam[0] - lam[1] - lam[2] - lam[3]).max(R::zero())
}

/// `½ max{0, |dx| + |dy| + |dz| - 1}`.
pub fn concurrence_diagonal<R: Real>(c: &BondCorrelators<R>) -> R {
    ((c.dx.abs() + c.dy.abs() + c.dz.abs() - R::one()) * R::lit(0.5)).max(R::zero())
}

/// `s(ρ_A) + s(ρ_B) - s(ρ_AB)`.
pub fn mutual_information<R: Real>(rho: &TwoQubitDensity<R>) -> R {
    (entropy2(&rho.reduced_a()) + entropy2(&rho.reduced_b()) - rho.entropy()).max(R::zero())
}

/// Bloch angles of the rank-1 projective measurement `{|n⟩⟨n|, 1 - |n⟩⟨n|}`
/// on qubit `B`, `|n⟩ = (cos θ/2, e^{iφ} sin θ/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementBasis<R> {
    pub theta: R,
    pub phi: R,
}

impl<R: Real> MeasurementBasis<R> {
    pub fn new(theta: R, phi: R) -> Result<Self> {
        let pi = R::pi();
        if !(theta >= R::zero() && theta <= pi) || !(phi >= R::zero() && phi < pi + pi) {
            return Err(Error::param(format!(
                "measurement angles out of range: theta={theta}, phi={phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    /// Maps arbitrary angles to the canonical range describing the same
    /// projector pair.
    pub fn canonical(theta: R, phi: R) -> Self {
        let two_pi = R::two_pi();
        let mut th = theta % two_pi;
        let mut ph = phi;
        if th < R::zero() {
            th += two_pi;
        }
        if th > R::pi() {
            th = two_pi - th;
            ph += R::pi();
        }
        ph %= two_pi;
        if ph < R::zero() {
            ph += two_pi;
        }
        Self { theta: th, phi: ph }
    }

    /// The two orthonormal measurement vectors.
    pub fn vectors(&self) -> [[Cx<R>; 2]; 2] {
        let half = self.theta * R::lit(0.5);
        let (s, c) = (half.sin(), half.cos());
        let e = cexp(Cx::new(R::zero(), self.phi));
        [
            [Cx::new(c, R::zero()), e * s],
            [-(e.conj()) * s, Cx::new(c, R::zero())],
        ]
    }
}

/// Post-measurement probabilities and conditional states of `A`:
/// `σ_k = (I⊗⟨n_k|) ρ (I⊗|n_k⟩)`, `p_k = tr σ_k`.
fn conditional_states<R: Real>(
    rho: &TwoQubitDensity<R>,
    basis: &MeasurementBasis<R>,
) -> [(R, Matrix2<Cx<R>>); 2] {
    let m = &rho.0;
    basis.vectors().map(|n| {
        let mut s = Matrix2::<Cx<R>>::zeros();
        for a in 0..2 {
            for a2 in 0..2 {
                let mut acc = Cx::zero();
                for b in 0..2 {
                    for b2 in 0..2 {
                        acc += n[b].conj() * m[(2 * a + b, 2 * a2 + b2)] * n[b2];
                    }
                }
                s[(a, a2)] = acc;
            }
        }
        ((s[(0, 0)] + s[(1, 1)]).re, s)
    })
}

/// `Σ_k p_k s(ρ_k)` for the measurement `basis` on `B`. Outcomes with
/// `p_k < 1e-14` contribute nothing.
pub fn conditional_entropy_measured<R: Real>(rho: &TwoQubitDensity<R>, basis: &MeasurementBasis<R>) -> R {
    let floor = R::lit(1e-14);
    conditional_states(rho, basis)
        .iter()
        .filter(|(p, _)| *p >= floor)
        .map(|(p, s)| *p * entropy2(&(s.unscale(*p))))
        .fold(R::zero(), |a, b| a + b)
}

/// Best measurement found by [`classical_correlation_with_basis`].
#[derive(Clone, Copy, Debug)]
pub struct ClassicalCorrelation<R> {
    pub value: R,
    pub basis: MeasurementBasis<R>,
}

const GRID_THETA: usize = 61;
const GRID_PHI: usize = 121;

/// `max_{B_k} s(ρ_A) - s(ρ|{B_k})`: coarse 61 × 121 grid over the Bloch
/// sphere plus the three axis measurements, then Nelder–Mead refinement from
/// the best candidate.
pub fn classical_correlation_with_basis<R: Real>(rho: &TwoQubitDensity<R>) -> ClassicalCorrelation<R> {
    let s_a = entropy2(&rho.reduced_a());
    let cost = |th: f64, ph: f64| -> f64 {
        conditional_entropy_measured(rho, &MeasurementBasis { theta: R::lit(th), phi: R::lit(ph) }).as_f64()
    };

    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut consider = |th: f64, ph: f64| {
        let v = cost(th, ph);
        if v < best.0 {
            best = (v, th, ph);
        }
    };
    for (th, ph) in [(0.0, 0.0), (PI / 2.0, 0.0), (PI / 2.0, PI / 2.0)] {
        consider(th, ph);
    }
    for i in 0..GRID_THETA {
        let th = PI * i as f64 / (GRID_THETA - 1) as f64;
        for j in 0..GRID_PHI {
            consider(th, 2.0 * PI * j as f64 / GRID_PHI as f64);
        }
    }

    let step = (PI / (GRID_THETA - 1) as f64, 2.0 * PI / GRID_PHI as f64);
    let (v, th, ph) = nelder_mead(|x| cost(x[0], x[1]), [best.1, best.2], [step.0, step.1], 1e-10, 400);
    let (v, th, ph) = if v < best.0 { (v, th, ph) } else { best };
    ClassicalCorrelation {
        value: (s_a - R::lit(v)).max(R::zero()),
        basis: MeasurementBasis::canonical(R::lit(th), R::lit(ph)),
    }
}

pub fn classical_correlation<R: Real>(rho: &TwoQubitDensity<R>) -> R {
    classical_correlation_with_basis(rho).value
}

/// Minimizes `f` over the plane; stops when the spread of simplex values
/// drops below `tol`.
fn nelder_mead(
    f: impl Fn([f64; 2]) -> f64,
    start: [f64; 2],
    scale: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> (f64, f64, f64) {
    let mut pts = [
        start,
        [start[0] + scale[0], start[1]],
        [start[0], start[1] + scale[1]],
    ];
    let mut vals = pts.map(&f);
    for _ in 0..max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        if vals[2] - vals[0] < tol {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    pts[k] = [
                        (pts[0][0] + pts[k][0]) / 2.0,
                        (pts[0][1] + pts[k][1]) / 2.0,
                    ];
                    vals[k] = f(pts[k]);
                }
            }
        }
    }
    let k = (0..3).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    (vals[k], pts[k][0], pts[k][1])
}

/// Mutual information minus optimized classical correlation, clipped at 0.
pub fn discord_general<R: Real>(rho: &TwoQubitDensity<R>) -> R {
    (mutual_information(rho) - classical_correlation(rho)).max(R::zero())
}

/// Closed-form discord of a Bell-diagonal state, with `g(x) = x log2 x`.
pub fn discord_bell_diagonal<R: Real>(c: &BondCorrelators<R>) -> R {
    let one = R::one();
    let (x, y, z) = (c.dx, c.dy, c.dz);
    let quantum = (xlog2x(one - x - y - z)
        + xlog2x(one + x - y + z)
        + xlog2x(one - x + y + z)
        + xlog2x(one + x + y - z))
        * R::lit(0.25);
    let d = c.max_abs();
    let classical = (xlog2x(one + d) + xlog2x(one - d)) * R::lit(0.5);
    (quantum - classical).max(R::zero())
}

/// Concurrence and discord of a pair, plus whether the Bell-diagonal fast
/// path was trusted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMeasures<R> {
    pub concurrence: R,
    pub discord: R,
    pub bell_diagonal: bool,
}

/// Uses the closed forms when the magnetizations pass the validity threshold,
/// otherwise the Wootters formula and the optimized discord on the full
/// reduced density matrix.
pub fn pair_measures<R: Real>(c: &BondCorrelators<R>, rho: &TwoQubitDensity<R>) -> Result<PairMeasures<R>> {
    if c.is_u1_valid(R::lit(U1_VALIDITY_THRESHOLD)) && c.check().is_ok() {
        Ok(PairMeasures {
            concurrence: concurrence_diagonal(c),
            discord: discord_bell_diagonal(c),
            bell_diagonal: true,
        })
    } else {
        rho.validate()?;
        Ok(PairMeasures {
            concurrence: concurrence_wootters(rho),
            discord: discord_general(rho),
            bell_diagonal: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Correlators of the four Bell states `Ψ-, Ψ+, Φ+, Φ-`.
    const BELL: [[f64; 3]; 4] = [[-1.0, -1.0, -1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [-1.0, 1.0, 1.0]];

    fn random_mixture(rng: &mut ChaCha8Rng) -> BondCorrelators<f64> {
        // uniform on the simplex via sorted uniforms
        let mut cuts = [rng.gen::<f64>(), rng.gen(), rng.gen()];
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p = [cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], 1.0 - cuts[2]];
        let mut d = [0.0; 3];
        for (w, b) in p.iter().zip(BELL) {
            for k in 0..3 {
                d[k] += w * b[k];
            }
        }
        BondCorrelators::bell_diagonal(d[0], d[1], d[2])
    }

    fn bell_rho(d: [f64; 3]) -> TwoQubitDensity<f64> {
        rho_from_correlators(&BondCorrelators::bell_diagonal(d[0], d[1], d[2])).unwrap().rho
    }

    fn product_rho() -> TwoQubitDensity<f64> {
        // ρ_A = diag(0.7, 0.3), ρ_B = |+⟩⟨+|
        let a = Matrix2::new(re(0.7), re(0.0), re(0.0), re(0.3));
        let b = Matrix2::new(re(0.5), re(0.5), re(0.5), re(0.5));
        TwoQubitDensity(a.kronecker(&b))
    }

    fn re(x: f64) -> Cx<f64> {
        Cx::new(x, 0.0)
    }

    fn werner(p: f64) -> TwoQubitDensity<f64> {
        let s = bell_rho(BELL[0]).0;
        TwoQubitDensity(s * re(p) + Matrix4::identity() * re((1.0 - p) / 4.0))
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spin_to_pauli_examples() {
        let c = spin_to_pauli([0.0, 0.0, -0.25], [0.0, 0.0]).unwrap();
        assert_eq!(c.dz, -1.0);
        let c = spin_to_pauli([0.0; 3], [0.0; 2]).unwrap();
        assert_eq!(c, BondCorrelators::default());
        let c = spin_to_pauli([-0.25; 3], [0.0; 2]).unwrap();
        assert_eq!((c.dx, c.dy, c.dz), (-1.0, -1.0, -1.0));
        assert!(spin_to_pauli([0.3, 0.0, 0.0], [0.0; 2]).is_err());
    }

    #[test]
    fn reconstruction_examples() {
        let rho = bell_rho([0.0; 3]);
        assert!((rho.0 - Matrix4::identity() * re(0.25)).norm() < 1e-15);

        let w = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = TwoQubitDensity::from_pure([re(0.0), re(w), re(-w), re(0.0)]);
        assert!((bell_rho(BELL[0]).0 - singlet.0).norm() < 1e-15);
        let phi_plus = TwoQubitDensity::from_pure([re(w), re(0.0), re(0.0), re(w)]);
        assert!((bell_rho([1.0, -1.0, 1.0]).0 - phi_plus.0).norm() < 1e-15);

        assert!(rho_from_correlators(&BondCorrelators::bell_diagonal(1.0, 1.0, 1.0)).is_err());
        let magnetized = BondCorrelators { mz_a: 1e-3, ..BondCorrelators::bell_diagonal(0.1, 0.1, 0.1) };
        assert!(rho_from_correlators(&magnetized).unwrap().warning.is_some());
    }

    #[test]
    fn correlators_round_trip_through_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let c = random_mixture(&mut rng);
            let back = BondCorrelators::from_density(&rho_from_correlators(&c).unwrap().rho).unwrap();
            assert!(close(back.dx, c.dx, 1e-14) && close(back.dy, c.dy, 1e-14) && close(back.dz, c.dz, 1e-14));
            assert!(back.mz_a.abs() < 1e-15 && back.mz_b.abs() < 1e-15);
        }
    }

    #[test]
    fn wootters_examples() {
        assert!(close(concurrence_wootters(&bell_rho(BELL[2])), 1.0, 1e-12));
        assert!(concurrence_wootters(&bell_rho([0.0; 3])).abs() < 1e-12);
        assert!(close(concurrence_wootters(&werner(0.5)), 0.25, 1e-12));
        assert!(concurrence_wootters(&product_rho()).abs() < 1e-7);
    }

    #[test]
    fn diagonal_concurrence_examples() {
        assert_eq!(concurrence_diagonal(&BondCorrelators::bell_diagonal(-1.0, -1.0, -1.0)), 1.0);
        assert_eq!(concurrence_diagonal(&BondCorrelators::bell_diagonal(0.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn diagonal_concurrence_matches_wootters_on_bell_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let c = random_mixture(&mut rng);
            let w = concurrence_wootters(&rho_from_correlators(&c).unwrap().rho);
            assert!(close(concurrence_diagonal(&c), w, 1e-10), "{c:?}");
        }
    }

    #[test]
    fn entropy_examples() {
        assert!(bell_rho(BELL[1]).entropy().abs() < 1e-12);
        assert!(close(bell_rho([0.0; 3]).entropy(), 2.0, 1e-12));
        // two-site Gibbs state at Δ = 1, β = 1: triplet weight e^{-1/4}, singlet e^{3/4}
        let (t, s) = ((-0.25f64).exp(), 0.75f64.exp());
        let z = 3.0 * t + s;
        let p = [t / z, t / z, t / z, s / z];
        // the three triplets sum to d = (1, 1, 1), the singlet is (-1, -1, -1)
        let d = (t - s) / z;
        let rho = bell_rho([d, d, d]);
        let direct: f64 = -p.iter().map(|x| x * x.log2()).sum::<f64>();
        assert!(close(rho.entropy(), direct, 1e-12));
    }

    #[test]
    fn mutual_information_examples() {
        assert!(mutual_information(&product_rho()).abs() < 1e-12);
        assert!(close(mutual_information(&bell_rho(BELL[0])), 2.0, 1e-12));
        assert!(close(mutual_information(&bell_rho([0.0, 0.0, 1.0])), 1.0, 1e-12));
    }

    #[test]
    fn measured_conditional_entropy() {
        let prod = product_rho();
        let s_a = entropy2(&prod.reduced_a());
        let bell = bell_rho(BELL[3]);
        for (th, ph) in [(0.0, 0.0), (0.3, 1.1), (PI / 2.0, 0.0), (2.0, 5.0)] {
            let b = MeasurementBasis::new(th, ph).unwrap();
            assert!(close(conditional_entropy_measured(&prod, &b), s_a, 1e-12));
            assert!(conditional_entropy_measured(&bell, &b).abs() < 1e-12);
        }
        // Werner p = 0.5 measured along z: each outcome leaves A in
        // diag(3/4, 1/4) up to ordering
        let z = MeasurementBasis::new(0.0, 0.0).unwrap();
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!(close(conditional_entropy_measured(&werner(0.5), &z), expected, 1e-12));
    }

    #[test]
    fn measurement_basis_ranges() {
        assert!(MeasurementBasis::new(-0.1, 0.0).is_err());
        assert!(MeasurementBasis::new(0.0, 7.0).is_err());
        let b = MeasurementBasis::canonical(-0.5, 0.0);
        assert!(close(b.theta, 0.5, 1e-15) && close(b.phi, PI, 1e-15));
        let [u, v] = b.vectors();
        let dot = u[0].conj() * v[0] + u[1].conj() * v[1];
        assert!(dot.norm() < 1e-15);
    }

    #[test]
    fn classical_correlation_examples() {
        assert!(close(classical_correlation(&bell_rho([0.0, 0.0, 1.0])), 1.0, 1e-9));
        assert!(classical_correlation(&product_rho()).abs() < 1e-9);
        let g = |x: f64| xlog2x(x);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = random_mixture(&mut rng);
            let d = c.max_abs();
            let closed = (g(1.0 + d) + g(1.0 - d)) / 2.0;
            let found = classical_correlation(&rho_from_correlators(&c).unwrap().rho);
            assert!(close(found, closed, 1e-9), "{c:?}: {found} vs {closed}");
        }
    }

    #[test]
    fn discord_examples() {
        assert!(discord_general(&bell_rho([0.0, 0.0, 1.0])).abs() < 1e-9);
        assert!(close(discord_general(&bell_rho(BELL[0])), 1.0, 1e-9));
        for (d, q) in [([0.0, 0.0, 0.0], 0.0), ([1.0, -1.0, 1.0], 1.0), ([0.0, 0.0, 1.0], 0.0), ([0.0, 0.0, -1.0], 0.0)] {
            assert!(close(discord_bell_diagonal(&BondCorrelators::bell_diagonal(d[0], d[1], d[2])), q, 1e-12));
        }
    }

    #[test]
    fn closed_form_discord_matches_optimization_on_bell_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let c = random_mixture(&mut rng);
            let general = discord_general(&rho_from_correlators(&c).unwrap().rho);
            assert!(close(discord_bell_diagonal(&c), general, 1e-6), "{c:?}");
        }
    }

    #[test]
    fn measures_are_invariant_under_paired_sign_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let flips = [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]];
        for _ in 0..200 {
            let c = random_mixture(&mut rng);
            let (c0, q0) = (concurrence_diagonal(&c), discord_bell_diagonal(&c));
            let i0 = mutual_information(&rho_from_correlators(&c).unwrap().rho);
            for f in flips {
                let g = BondCorrelators::bell_diagonal(f[0] * c.dx, f[1] * c.dy, f[2] * c.dz);
                assert!(close(concurrence_diagonal(&g), c0, 1e-10));
                assert!(close(discord_bell_diagonal(&g), q0, 1e-10));
                assert!(close(mutual_information(&rho_from_correlators(&g).unwrap().rho), i0, 1e-10));
            }
        }
    }

    #[test]
    fn ordering_and_optimizer_soundness() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let axes = [(0.0, 0.0), (PI, 0.0), (PI / 2.0, 0.0), (PI / 2.0, PI / 2.0)];
        for i in 0..200 {
            // alternate Bell mixtures with generic random states
            let rho = if i % 2 == 0 {
                rho_from_correlators(&random_mixture(&mut rng)).unwrap().rho
            } else {
                let m = Matrix4::<Cx<f64>>::from_fn(|_, _| Cx::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
                let p = m * m.adjoint();
                TwoQubitDensity(p / p.trace())
            };
            let i_ab = mutual_information(&rho);
            let cc = classical_correlation(&rho);
            let q = discord_general(&rho);
            assert!(cc >= -1e-9 && q >= -1e-9 && q <= i_ab + 1e-9);
            let s_a = entropy2(&rho.reduced_a());
            for (th, ph) in axes {
                let at_axis = s_a - conditional_entropy_measured(&rho, &MeasurementBasis { theta: th, phi: ph });
                assert!(cc >= at_axis - 1e-12);
            }
        }
    }

    #[test]
    fn pair_measures_fall_back_off_symmetry() {
        let c = BondCorrelators::bell_diagonal(-0.6, -0.6, -0.5);
        let rho = rho_from_correlators(&c).unwrap().rho;
        let fast = pair_measures(&c, &rho).unwrap();
        assert!(fast.bell_diagonal);

        // mix in a magnetized product component
        let up = TwoQubitDensity::from_pure([re(1.0), re(0.0), re(0.0), re(0.0)]);
        let mixed = TwoQubitDensity(rho.0 * re(0.9) + up.0 * re(0.1));
        let c = BondCorrelators::from_density(&mixed).unwrap();
        let slow = pair_measures(&c, &mixed).unwrap();
        assert!(!slow.bell_diagonal);
        assert!(close(slow.concurrence, concurrence_wootters(&mixed), 1e-15));
    }

    #[test]
    fn from_density_rejects_complex_expectations() {
        let mut rho = bell_rho([0.2, 0.1, -0.3]);
        rho.0[(1, 2)] += Cx::new(0.0, 1e-3);
        assert!(matches!(BondCorrelators::from_density(&rho), Err(Error::CorruptedState(_))));
    }
}
