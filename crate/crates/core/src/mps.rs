//! Matrix product states in mixed-canonical form with TEBD updates.
//!
//! Site `i` holds one `χ_i × χ_{i+1}` matrix per local basis state. Virtual
//! bond `i` sits left of site `i`, so bonds `0` and `N` are the trivial
//! boundaries. Public functions that take a `bond` use the pair convention
//! instead: bond `b` joins sites `b` and `b + 1`.
//!
//! When every local basis state carries a `U(1)` charge and the state has a
//! definite total charge, each virtual index is labeled by the charge to its
//! left. SVDs are then done sector by sector. A gate that breaks the symmetry
//! drops the labels and the state continues densely.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use num_traits::{One, Zero};

use crate::correlations::{BondCorrelators, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, identity, matmul, split, CMat, Split};
pub use crate::linalg::TruncationPolicy;
use crate::model::{bond_hamiltonian, trotter_gates, ChainParams, GateKind, TrotterGateSet};
use crate::scalar::{re, Cx, Real};

/// Charges of `|↑⟩, |↓⟩` (twice `S^z`).
pub const SPIN_CHARGES: [i32; 2] = [1, -1];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    /// `↑↓↑↓…` of length `n`.
    pub fn neel(n: usize) -> Vec<Spin> {
        (0..n).map(|i| if i % 2 == 0 { Spin::Up } else { Spin::Down }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sweep {
    Right,
    Left,
}

#[derive(Clone, Debug)]
pub struct MpsState<R: Real> {
    tensors: Vec<Vec<CMat<R>>>,
    local_dim: usize,
    site_charges: Vec<i32>,
    bond_charges: Option<Vec<Vec<i32>>>,
    ortho_center: Option<usize>,
    discarded_weight_total: R,
}

impl<R: Real> MpsState<R> {
    /// Product of normalized single-site vectors. `site_charges` labels the
    /// local basis; charge labels are kept when every site vector has a
    /// definite charge.
    pub fn from_product(site_vectors: &[Vec<Cx<R>>], site_charges: &[i32]) -> Result<Self> {
        let d = site_charges.len();
        if site_vectors.is_empty() {
            return Err(Error::param("empty chain"));
        }
        let mut tensors = Vec::with_capacity(site_vectors.len());
        let mut labels = vec![vec![0]];
        let mut symmetric = true;
        for v in site_vectors {
            if v.len() != d {
                return Err(Error::Dimension { expected: d, got: v.len() });
            }
            let norm = v.iter().map(|x| x.norm_sqr()).fold(R::zero(), |a, b| a + b).sqrt();
            if !(norm > R::zero()) {
                return Err(Error::param("zero site vector"));
            }
            tensors.push(v.iter().map(|&x| CMat::from_element(1, 1, x / re(norm))).collect());
            let mut qs = v
                .iter()
                .zip(site_charges)
                .filter(|(x, _)| x.norm_sqr() > R::zero())
                .map(|(_, &q)| q);
            let q0 = qs.next().unwrap();
            if qs.any(|q| q != q0) {
                symmetric = false;
            }
            let prev = labels.last().unwrap()[0];
            labels.push(vec![prev + q0]);
        }
        Ok(Self {
            tensors,
            local_dim: d,
            site_charges: site_charges.to_vec(),
            bond_charges: symmetric.then_some(labels),
            ortho_center: Some(0),
            discarded_weight_total: R::zero(),
        })
    }

    /// Spin-1/2 computational product state.
    pub fn product_state(pattern: &[Spin]) -> Result<Self> {
        let vecs: Vec<Vec<Cx<R>>> = pattern
            .iter()
            .map(|s| {
                let mut v = vec![Cx::zero(); 2];
                v[s.index()] = Cx::one();
                v
            })
            .collect();
        Self::from_product(&vecs, &SPIN_CHARGES)
    }

    /// Checks `pattern.len() == n_sites` before building the product state.
    pub fn product_state_checked(n_sites: usize, pattern: &[Spin]) -> Result<Self> {
        if pattern.len() != n_sites {
            return Err(Error::Dimension {
                expected: n_sites,
                got: pattern.len(),
            });
        }
        Self::product_state(pattern)
    }

    /// `(|↑↓↑…⟩ + sign |↓↑↓…⟩) / √2` as a bond-dimension-2 MPS. It is an
    /// eigenstate of the global spin flip with eigenvalue `sign`.
    pub fn neel_cat(n_sites: usize, sign: R) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::param("need at least two sites"));
        }
        let neel = Spin::neel(n_sites);
        let one = Cx::<R>::one();
        let w = re(R::lit(std::f64::consts::FRAC_1_SQRT_2));
        let mut tensors = Vec::with_capacity(n_sites);
        let mut labels = vec![vec![0]];
        for (i, s) in neel.iter().enumerate() {
            let a = s.index();
            let b = 1 - a;
            let (rows, cols) = match i {
                0 => (1, 2),
                _ if i == n_sites - 1 => (2, 1),
                _ => (2, 2),
            };
            let mut site = vec![CMat::<R>::zeros(rows, cols); 2];
            if i == 0 {
                site[a][(0, 0)] = w;
                site[b][(0, 1)] = w * re(sign);
            } else if i == n_sites - 1 {
                site[a][(0, 0)] = one;
                site[b][(1, 0)] = one;
            } else {
                site[a][(0, 0)] = one;
                site[b][(1, 1)] = one;
            }
            tensors.push(site);
            let prev = labels.last().unwrap().clone();
            let next = if i == n_sites - 1 {
                vec![prev[0] + SPIN_CHARGES[a]]
            } else if i == 0 {
                vec![SPIN_CHARGES[a], SPIN_CHARGES[b]]
            } else {
                vec![prev[0] + SPIN_CHARGES[a], prev[1] + SPIN_CHARGES[b]]
            };
            labels.push(next);
        }
        let mut mps = Self {
            tensors,
            local_dim: 2,
            site_charges: SPIN_CHARGES.to_vec(),
            bond_charges: Some(labels),
            ortho_center: None,
            discarded_weight_total: R::zero(),
        };
        mps.canonicalize()?;
        Ok(mps)
    }

    /// Factorizes a dense state vector (site 0 most significant) by successive
    /// SVDs. No charge labels are attached.
    pub fn from_dense(amplitudes: &DVector<Cx<R>>, n_sites: usize, local_dim: usize) -> Result<Self> {
        let dim = local_dim.pow(n_sites as u32);
        if amplitudes.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let exact = TruncationPolicy::exact();
        let mut tensors = Vec::with_capacity(n_sites);
        // rest: χ × (remaining sites), row-major in the remaining index
        let mut rest = CMat::<R>::from_fn(1, dim, |_, j| amplitudes[j]);
        for _ in 0..n_sites - 1 {
            let chi = rest.nrows();
            let tail = rest.ncols() / local_dim;
            // rows (α, s), cols (remaining)
            let m = CMat::<R>::from_fn(chi * local_dim, tail, |r, c| {
                let (a, s) = (r / local_dim, r % local_dim);
                rest[(a, s * tail + c)]
            });
            let Split { u, s, vt, .. } = split(&m, None, &exact)?;
            let k = s.len();
            tensors.push(
                (0..local_dim)
                    .map(|si| CMat::from_fn(chi, k, |a, b| u[(a * local_dim + si, b)]))
                    .collect(),
            );
            rest = CMat::from_fn(k, tail, |a, c| vt[(a, c)] * re(s[a]));
        }
        let chi = rest.nrows();
        tensors.push(
            (0..local_dim)
                .map(|si| CMat::from_fn(chi, 1, |a, _| rest[(a, si)]))
                .collect(),
        );
        Ok(Self {
            tensors,
            local_dim,
            site_charges: vec![0; local_dim],
            bond_charges: None,
            ortho_center: Some(n_sites - 1),
            discarded_weight_total: R::zero(),
        })
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_dense(&self) -> DVector<Cx<R>> {
        let d = self.local_dim;
        // row vector over (configs) × χ
        let mut acc: Vec<CMat<R>> = vec![CMat::from_element(1, 1, Cx::one())];
        for site in &self.tensors {
            let mut next = Vec::with_capacity(acc.len() * d);
            for a in &acc {
                for s in 0..d {
                    next.push(a * &site[s]);
                }
            }
            acc = next;
        }
        DVector::from_iterator(acc.len(), acc.iter().map(|m| m[(0, 0)]))
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn site_charges(&self) -> &[i32] {
        &self.site_charges
    }

    /// `χ_0, …, χ_N` including the trivial boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t[0].nrows()).collect();
        dims.push(self.tensors.last().unwrap()[0].ncols());
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn discarded_weight_total(&self) -> R {
        self.discarded_weight_total
    }

    /// Whether virtual indices still carry `U(1)` labels.
    pub fn is_charge_labeled(&self) -> bool {
        self.bond_charges.is_some()
    }

    pub fn tensors(&self) -> &[Vec<CMat<R>>] {
        &self.tensors
    }

    fn bond_labels(&self, vbond: usize) -> Option<&[i32]> {
        self.bond_charges.as_ref().map(|l| l[vbond].as_slice())
    }

    fn set_labels(&mut self, vbond: usize, labels: Option<Vec<i32>>) {
        match labels {
            Some(l) => {
                if let Some(all) = self.bond_charges.as_mut() {
                    all[vbond] = l;
                }
            }
            None => self.bond_charges = None,
        }
    }

    /// Rows `(s, α)` of site `i` stacked: `d χ_i × χ_{i+1}`.
    fn stack_rows(&self, i: usize) -> CMat<R> {
        let site = &self.tensors[i];
        let (chi_l, chi_r) = (site[0].nrows(), site[0].ncols());
        let mut m = CMat::<R>::zeros(self.local_dim * chi_l, chi_r);
        for (s, a) in site.iter().enumerate() {
            m.rows_mut(s * chi_l, chi_l).copy_from(a);
        }
        m
    }

    /// Columns `(s, β)` of site `i` side by side: `χ_i × d χ_{i+1}`.
    fn stack_cols(&self, i: usize) -> CMat<R> {
        let site = &self.tensors[i];
        let (chi_l, chi_r) = (site[0].nrows(), site[0].ncols());
        let mut m = CMat::<R>::zeros(chi_l, self.local_dim * chi_r);
        for (s, a) in site.iter().enumerate() {
            m.columns_mut(s * chi_r, chi_r).copy_from(a);
        }
        m
    }

    fn unstack_rows(m: &CMat<R>, d: usize) -> Vec<CMat<R>> {
        let chi_l = m.nrows() / d;
        (0..d).map(|s| m.rows(s * chi_l, chi_l).into_owned()).collect()
    }

    fn unstack_cols(m: &CMat<R>, d: usize) -> Vec<CMat<R>> {
        let chi_r = m.ncols() / d;
        (0..d).map(|s| m.columns(s * chi_r, chi_r).into_owned()).collect()
    }

    fn row_charges(&self, i: usize) -> Option<Vec<i32>> {
        let left = self.bond_labels(i)?;
        Some(
            self.site_charges
                .iter()
                .flat_map(|q| left.iter().map(move |l| l + q))
                .collect(),
        )
    }

    fn col_charges(&self, i: usize) -> Option<Vec<i32>> {
        let right = self.bond_labels(i + 1)?;
        Some(
            self.site_charges
                .iter()
                .flat_map(|q| right.iter().map(move |r| r - q))
                .collect(),
        )
    }

    /// Shifts the orthogonality center one site right without truncation.
    fn shift_right(&mut self, c: usize) -> Result<()> {
        let m = self.stack_rows(c);
        let rq = self.row_charges(c);
        let cq = self.bond_labels(c + 1).map(|l| l.to_vec());
        let charges = rq.as_deref().zip(cq.as_deref());
        let Split { u, s, vt, charges, .. } = split(&m, charges, &TruncationPolicy::exact())?;
        let sv = scale_rows(&vt, &s);
        self.tensors[c] = Self::unstack_rows(&u, self.local_dim);
        for a in self.tensors[c + 1].iter_mut() {
            *a = matmul(&sv, a);
        }
        self.set_labels(c + 1, charges);
        self.ortho_center = Some(c + 1);
        Ok(())
    }

    /// Shifts the orthogonality center one site left without truncation.
    fn shift_left(&mut self, c: usize) -> Result<()> {
        let m = self.stack_cols(c);
        let rq = self.bond_labels(c).map(|l| l.to_vec());
        let cq = self.col_charges(c);
        let charges = rq.as_deref().zip(cq.as_deref());
        let Split { u, s, vt, charges, .. } = split(&m, charges, &TruncationPolicy::exact())?;
        let us = scale_cols(&u, &s);
        self.tensors[c] = Self::unstack_cols(&vt, self.local_dim);
        for a in self.tensors[c - 1].iter_mut() {
            *a = matmul(a, &us);
        }
        self.set_labels(c, charges);
        self.ortho_center = Some(c - 1);
        Ok(())
    }

    /// Brings an arbitrary MPS into mixed-canonical form with center 0 and
    /// unit norm.
    pub fn canonicalize(&mut self) -> Result<()> {
        let n = self.n_sites();
        for c in 0..n - 1 {
            self.shift_right(c)?;
        }
        for c in (1..n).rev() {
            self.shift_left(c)?;
        }
        self.normalize();
        Ok(())
    }

    pub fn move_center_to(&mut self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::Index(format!("site {site} out of range")));
        }
        let mut c = match self.ortho_center {
            Some(c) => c,
            None => {
                self.canonicalize()?;
                0
            }
        };
        while c < site {
            self.shift_right(c)?;
            c += 1;
        }
        while c > site {
            self.shift_left(c)?;
            c -= 1;
        }
        Ok(())
    }

    /// Rescales the center tensor to unit norm.
    pub fn normalize(&mut self) {
        if let Some(c) = self.ortho_center {
            let n = self.tensors[c]
                .iter()
                .map(|a| a.norm_squared())
                .fold(R::zero(), |a, b| a + b)
                .sqrt();
            if n > R::zero() {
                for a in self.tensors[c].iter_mut() {
                    a.unscale_mut(n);
                }
            }
        }
    }

    /// `‖ψ‖` by full contraction (no canonical-form assumption).
    pub fn norm(&self) -> R {
        let mut env = CMat::<R>::from_element(1, 1, Cx::one());
        for i in 0..self.n_sites() {
            env = transfer_left(&env, &self.tensors[i]);
        }
        env[(0, 0)].re.max(R::zero()).sqrt()
    }

    /// Largest deviation from the left/right isometry conditions around the
    /// orthogonality center.
    pub fn isometry_error(&self) -> R {
        let Some(c) = self.ortho_center else {
            return R::max_value().unwrap();
        };
        let mut worst = R::zero();
        for (i, site) in self.tensors.iter().enumerate() {
            if i == c {
                continue;
            }
            let g = if i < c {
                transfer_left(&identity(site[0].nrows()), site)
            } else {
                transfer_right(&identity(site[0].ncols()), site)
            };
            let id = identity::<R>(g.nrows());
            worst = worst.max(crate::linalg::max_abs_diff(&g, &id));
        }
        worst
    }

    pub fn check_canonical(&self, tol: R) -> Result<()> {
        let err = self.isometry_error();
        if err > tol {
            return Err(Error::CorruptedState(format!(
                "canonical form violated by {err:.3e}"
            )));
        }
        Ok(())
    }

    fn check_bond(&self, bond: usize) -> Result<()> {
        if bond + 1 >= self.n_sites() {
            return Err(Error::Index(format!(
                "bond {bond} invalid for {} sites",
                self.n_sites()
            )));
        }
        Ok(())
    }

    /// Contracts `gate` into sites `(bond, bond+1)`, truncates by `policy` and
    /// returns the discarded weight. The orthogonality center ends on
    /// `bond + 1`.
    pub fn apply_two_site_gate(&mut self, gate: &CMat<R>, bond: usize, policy: &TruncationPolicy<R>) -> Result<R> {
        self.apply_gate(gate, bond, policy, Sweep::Right)
    }

    fn apply_gate(&mut self, gate: &CMat<R>, bond: usize, policy: &TruncationPolicy<R>, dir: Sweep) -> Result<R> {
        self.check_bond(bond)?;
        let d = self.local_dim;
        if gate.nrows() != d * d || gate.ncols() != d * d {
            return Err(Error::Dimension {
                expected: d * d,
                got: gate.nrows(),
            });
        }
        match self.ortho_center {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) if c < bond => self.move_center_to(bond)?,
            _ => self.move_center_to(bond + 1)?,
        }

        // Θ = A_b B_{b+1}: rows (s1, α), cols (s2, β)
        let theta = matmul(&self.stack_rows(bond), &self.stack_cols(bond + 1));
        let chi_l = self.tensors[bond][0].nrows();
        let chi_r = self.tensors[bond + 1][0].ncols();
        let mut out = CMat::<R>::zeros(d * chi_l, d * chi_r);
        for x in 0..d * d {
            let (s1, s2) = (x / d, x % d);
            for y in 0..d * d {
                let g = gate[(y, x)];
                if g == Cx::zero() {
                    continue;
                }
                let (t1, t2) = (y / d, y % d);
                let src = theta.view((s1 * chi_l, s2 * chi_r), (chi_l, chi_r));
                let mut dst = out.view_mut((t1 * chi_l, t2 * chi_r), (chi_l, chi_r));
                dst.zip_apply(&src, |o, v| *o += g * v);
            }
        }

        let rq = self.row_charges(bond);
        let cq = self.col_charges(bond + 1);
        let charges = rq.as_deref().zip(cq.as_deref());
        let Split {
            u,
            s,
            vt,
            charges,
            discarded,
        } = split(&out, charges, policy)?;
        match dir {
            Sweep::Right => {
                self.tensors[bond] = Self::unstack_rows(&u, d);
                self.tensors[bond + 1] = Self::unstack_cols(&scale_rows(&vt, &s), d);
                self.ortho_center = Some(bond + 1);
            }
            Sweep::Left => {
                self.tensors[bond] = Self::unstack_rows(&scale_cols(&u, &s), d);
                self.tensors[bond + 1] = Self::unstack_cols(&vt, d);
                self.ortho_center = Some(bond);
            }
        }
        self.set_labels(bond + 1, charges);
        self.discarded_weight_total += discarded;
        Ok(discarded)
    }

    /// One symmetric second-order step: odd half-step sweeping right, even
    /// full step sweeping left, odd half-step sweeping right. Returns the
    /// discarded weight of the step.
    pub fn tebd_step(&mut self, gates: &TrotterGateSet<R>, policy: &TruncationPolicy<R>) -> Result<R> {
        let mut w = self.layer(&gates.odd_half_gates, policy, Sweep::Right)?;
        w += self.layer(&gates.even_gates, policy, Sweep::Left)?;
        w += self.layer(&gates.odd_half_gates, policy, Sweep::Right)?;
        Ok(w)
    }

    /// `n` symmetric steps with the odd half-steps between consecutive steps
    /// merged into one full odd step. Without truncation the result equals
    /// `n` calls of [`Self::tebd_step`] up to rounding.
    pub fn tebd_steps(&mut self, gates: &TrotterGateSet<R>, n: usize, policy: &TruncationPolicy<R>) -> Result<R> {
        if n == 0 {
            return Ok(R::zero());
        }
        let full_odd: Vec<(usize, CMat<R>)> = gates
            .odd_half_gates
            .iter()
            .map(|(b, g)| (*b, g * g))
            .collect();
        let full_odd = &full_odd[..];
        let mut w = self.layer(&gates.odd_half_gates, policy, Sweep::Right)?;
        for k in 0..n {
            w += self.layer(&gates.even_gates, policy, Sweep::Left)?;
            let odd = if k + 1 == n { &gates.odd_half_gates[..] } else { full_odd };
            w += self.layer(odd, policy, Sweep::Right)?;
        }
        Ok(w)
    }

    fn layer(&mut self, gates: &[(usize, CMat<R>)], policy: &TruncationPolicy<R>, dir: Sweep) -> Result<R> {
        let mut w = R::zero();
        match dir {
            Sweep::Right => {
                for (b, g) in gates {
                    w += self.apply_gate(g, *b, policy, dir)?;
                }
            }
            Sweep::Left => {
                for (b, g) in gates.iter().rev() {
                    w += self.apply_gate(g, *b, policy, dir)?;
                }
            }
        }
        Ok(w)
    }

    /// Environments `L_i` (left of site `i`) for `i = 0..=upto`. Sites left
    /// of the center are isometries, so their environments are identities.
    fn left_envs(&self, upto: usize) -> Vec<CMat<R>> {
        let start = self.ortho_center.unwrap_or(0).min(upto);
        let mut envs = Vec::with_capacity(upto + 1);
        for i in 0..=start {
            let chi = self.tensors.get(i).map_or_else(|| self.tensors[i - 1][0].ncols(), |t| t[0].nrows());
            envs.push(if self.ortho_center.is_some() { identity(chi) } else { identity(1) });
        }
        if self.ortho_center.is_none() {
            envs.truncate(1);
            for i in 0..upto {
                let next = transfer_left(&envs[i], &self.tensors[i]);
                envs.push(next);
            }
            return envs;
        }
        for i in start..upto {
            let next = transfer_left(&envs[i], &self.tensors[i]);
            envs.push(next);
        }
        envs
    }

    /// Environments `R_i` (right of site `i - 1`) for `i = from..=N`, returned
    /// indexed by `i - from`.
    fn right_envs(&self, from: usize) -> Vec<CMat<R>> {
        let n = self.n_sites();
        let stop = match self.ortho_center {
            Some(c) => (c + 1).max(from),
            None => n,
        };
        let mut envs: Vec<CMat<R>> = vec![CMat::zeros(0, 0); n + 1 - from];
        for i in (stop..=n).rev() {
            let chi = if i == n { 1 } else { self.tensors[i][0].nrows() };
            envs[i - from] = identity(chi);
        }
        for i in (from..stop).rev() {
            envs[i - from] = transfer_right(&envs[i + 1 - from], &self.tensors[i]);
        }
        envs
    }

    /// Reduced density matrix of sites `(bond, bond+1)` on the full local
    /// space (`d² × d²`), normalized to unit trace.
    pub fn two_site_rdm(&self, bond: usize) -> Result<CMat<R>> {
        self.check_bond(bond)?;
        let left = self.left_envs(bond);
        let right = self.right_envs(bond + 2);
        Ok(self.rdm_from_envs(bond, &left[bond], &right[0]))
    }

    /// Two-site reduced density matrices of every bond.
    pub fn all_two_site_rdms(&self) -> Vec<CMat<R>> {
        let n = self.n_sites();
        let left = self.left_envs(n - 2);
        let right = self.right_envs(2);
        (0..n - 1)
            .map(|b| self.rdm_from_envs(b, &left[b], &right[b]))
            .collect()
    }

    fn rdm_from_envs(&self, bond: usize, left: &CMat<R>, right: &CMat<R>) -> CMat<R> {
        let d = self.local_dim;
        let a = &self.tensors[bond];
        let b = &self.tensors[bond + 1];
        // ρ[x, x'] = tr(L M_x R M_x'†), M_(s1 s2) = A[s1] B[s2]
        let la: Vec<CMat<R>> = a.iter().map(|m| matmul(left, m)).collect();
        let br: Vec<CMat<R>> = b.iter().map(|m| matmul(m, right)).collect();
        let mut p = Vec::with_capacity(d * d);
        let mut mats = Vec::with_capacity(d * d);
        for s1 in 0..d {
            for s2 in 0..d {
                p.push(matmul(&la[s1], &br[s2]));
                mats.push(matmul(&a[s1], &b[s2]));
            }
        }
        let mut rho = CMat::<R>::zeros(d * d, d * d);
        for x in 0..d * d {
            for y in 0..d * d {
                rho[(x, y)] = p[x].dotc(&mats[y]).conj();
            }
        }
        let tr = rho.trace();
        rho / tr
    }

    /// Schmidt probabilities across `bond`, descending.
    pub fn schmidt_spectrum(&self, bond: usize) -> Result<Vec<R>> {
        self.check_bond(bond)?;
        let vbond = bond + 1;
        let env = match self.ortho_center {
            Some(c) if c < vbond => self.left_envs(vbond).pop().unwrap(),
            Some(_) => self.right_envs(vbond).swap_remove(0),
            None => {
                let mut m = self.clone();
                m.canonicalize()?;
                return m.schmidt_spectrum(bond);
            }
        };
        let tr = env.trace().re;
        let mut p: Vec<R> = hermitian_eigenvalues(&env).into_iter().map(|x| x / tr).collect();
        p.reverse();
        Ok(p)
    }

    /// Von Neumann entropy (base 2) of the Schmidt spectrum at `bond`.
    pub fn entanglement_entropy(&self, bond: usize) -> Result<R> {
        Ok(crate::correlations::entropy_of_spectrum(&self.schmidt_spectrum(bond)?))
    }

    /// Pauli correlators of sites `(bond, bond+1)` of a spin-1/2 chain.
    pub fn measure_bond_correlators(&self, bond: usize) -> Result<BondCorrelators<R>> {
        if self.local_dim != 2 {
            return Err(Error::param("bond correlators need a spin-1/2 MPS"));
        }
        let rho = self.two_site_rdm(bond)?;
        BondCorrelators::from_density_tol(&TwoQubitDensity(rho.fixed_view::<4, 4>(0, 0).into_owned()), R::lit(1e-9))
    }

    /// `⟨H⟩` as a sum of bond expectation values.
    pub fn energy(&self, params: &ChainParams<R>) -> Result<R> {
        if self.local_dim != 2 {
            return Err(Error::param("energy needs a spin-1/2 MPS"));
        }
        let h = bond_hamiltonian(params, None).matrix;
        Ok(self
            .all_two_site_rdms()
            .iter()
            .map(|rho| (rho * &h).trace().re)
            .fold(R::zero(), |a, b| a + b))
    }

    /// Serializes the state (layout in [`Self::read_checkpoint`]).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let dims = self.bond_dims();
        out.extend_from_slice(&(self.n_sites() as u64).to_le_bytes());
        out.extend_from_slice(&(self.local_dim as u64).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.ortho_center.map_or(u64::MAX, |c| c as u64).to_le_bytes());
        out.extend_from_slice(&self.discarded_weight_total.as_f64().to_le_bytes());
        match &self.bond_charges {
            Some(labels) => {
                out.push(1);
                for q in &self.site_charges {
                    out.extend_from_slice(&(*q as i64).to_le_bytes());
                }
                for bond in labels {
                    for q in bond {
                        out.extend_from_slice(&(*q as i64).to_le_bytes());
                    }
                }
            }
            None => out.push(0),
        }
        for site in &self.tensors {
            let (chi_l, chi_r) = (site[0].nrows(), site[0].ncols());
            for a in 0..chi_l {
                for s in site {
                    for b in 0..chi_r {
                        out.extend_from_slice(&s[(a, b)].re.as_f64().to_le_bytes());
                        out.extend_from_slice(&s[(a, b)].im.as_f64().to_le_bytes());
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`Self::to_bytes`].
    ///
    /// ```text
    /// magic      8 bytes  "XXZMPS\0\x01"
    /// n_sites    u64
    /// local_dim  u64
    /// bond_dims  (n_sites + 1) × u64
    /// center     u64 (u64::MAX when not canonical)
    /// discarded  f64
    /// labeled    u8; if 1: local_dim × i64 site charges, then Σ bond_dims × i64
    /// tensors    per site, row-major over (left, physical, right): (re, im) f64
    /// ```
    /// All integers and floats are little-endian.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let n = r.u64()? as usize;
        let d = r.u64()? as usize;
        if n == 0 || d == 0 || n > 1 << 20 {
            return Err(Error::Checkpoint(format!("implausible header n={n} d={d}")));
        }
        let dims: Vec<usize> = (0..=n).map(|_| r.u64().map(|x| x as usize)).collect::<Result<_>>()?;
        if dims[0] != 1 || dims[n] != 1 {
            return Err(Error::Checkpoint("boundary bond dimensions must be 1".into()));
        }
        let center = r.u64()?;
        let center = (center != u64::MAX).then_some(center as usize);
        let discarded = R::lit(r.f64()?);
        let (site_charges, bond_charges) = match r.take(1)?[0] {
            0 => (vec![0; d], None),
            1 => {
                let sc = (0..d).map(|_| r.i64().map(|q| q as i32)).collect::<Result<Vec<_>>>()?;
                let bc = dims
                    .iter()
                    .map(|&chi| (0..chi).map(|_| r.i64().map(|q| q as i32)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                (sc, Some(bc))
            }
            f => return Err(Error::Checkpoint(format!("bad label flag {f}"))),
        };
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let (chi_l, chi_r) = (dims[i], dims[i + 1]);
            let mut site = vec![CMat::<R>::zeros(chi_l, chi_r); d];
            for a in 0..chi_l {
                for s in site.iter_mut() {
                    for b in 0..chi_r {
                        let (x, y) = (r.f64()?, r.f64()?);
                        s[(a, b)] = Cx::new(R::lit(x), R::lit(y));
                    }
                }
            }
            tensors.push(site);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            tensors,
            local_dim: d,
            site_charges,
            bond_charges,
            ortho_center: center,
            discarded_weight_total: discarded,
        })
    }

    pub fn write_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"XXZMPS\x00\x01";

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn scale_rows<R: Real>(m: &CMat<R>, s: &[R]) -> CMat<R> {
    let mut out = m.clone();
    for (i, &x) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(x);
    }
    out
}

fn scale_cols<R: Real>(m: &CMat<R>, s: &[R]) -> CMat<R> {
    let mut out = m.clone();
    for (j, &x) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(x);
    }
    out
}

/// `Σ_s A[s]† E A[s]`.
fn transfer_left<R: Real>(env: &CMat<R>, site: &[CMat<R>]) -> CMat<R> {
    let chi = site[0].ncols();
    let mut out = CMat::<R>::zeros(chi, chi);
    for a in site {
        out += matmul(&a.adjoint(), &matmul(env, a));
    }
    out
}

/// `Σ_s A[s] E A[s]†`.
fn transfer_right<R: Real>(env: &CMat<R>, site: &[CMat<R>]) -> CMat<R> {
    let chi = site[0].nrows();
    let mut out = CMat::<R>::zeros(chi, chi);
    for a in site {
        out += matmul(&matmul(a, env), &a.adjoint());
    }
    out
}

/// Imaginary-time schedule for [`ground_state_mps_with`].
#[derive(Clone, Debug)]
pub struct GroundStateSchedule<R> {
    /// Successive imaginary-time slices; each stage runs to stationarity.
    pub d_beta: Vec<R>,
    /// Energy is measured every this many steps.
    pub check_every: usize,
    pub max_steps_per_stage: usize,
}

impl<R: Real> Default for GroundStateSchedule<R> {
    fn default() -> Self {
        Self {
            d_beta: vec![R::lit(0.1), R::lit(0.01), R::lit(0.001)],
            check_every: 10,
            max_steps_per_stage: 20_000,
        }
    }
}

/// Ground state by imaginary-time TEBD with the default schedule.
pub fn ground_state_mps<R: Real>(params: &ChainParams<R>, policy: &TruncationPolicy<R>, tol: R) -> Result<MpsState<R>> {
    ground_state_mps_with(params, policy, tol, &GroundStateSchedule::default())
}

/// Imaginary-time TEBD from the spin-flip-symmetrized Néel state. Each stage
/// stops once the energy per site changes by less than `tol` per unit
/// imaginary time. The starting state has spin-flip parity `(-1)^{N/2}`, the
/// parity of the ground state of the antiferromagnetic open chain, so the
/// evolution never has to resolve the near-degenerate Néel doublet.
pub fn ground_state_mps_with<R: Real>(
    params: &ChainParams<R>,
    policy: &TruncationPolicy<R>,
    tol: R,
    schedule: &GroundStateSchedule<R>,
) -> Result<MpsState<R>> {
    if !(tol > R::zero()) {
        return Err(Error::param("tolerance must be positive"));
    }
    let n = params.n_sites;
    let sign = if (n / 2) % 2 == 0 { R::one() } else { -R::one() };
    let mut mps = MpsState::neel_cat(n, sign)?;
    let policy = TruncationPolicy {
        renormalize: true,
        ..*policy
    };
    let nf = R::lit(n as f64);
    for &db in &schedule.d_beta {
        let gates = trotter_gates(params, db, GateKind::ImaginaryTime)?;
        let mut energy = mps.energy(params)?;
        let mut steps = 0;
        let mut rate;
        loop {
            for _ in 0..schedule.check_every {
                mps.tebd_step(&gates, &policy)?;
            }
            steps += schedule.check_every;
            let e = mps.energy(params)?;
            rate = (e - energy).abs() / (nf * db * R::lit(schedule.check_every as f64));
            energy = e;
            if rate < tol {
                break;
            }
            if steps >= schedule.max_steps_per_stage {
                return Err(Error::Convergence {
                    steps,
                    residual: rate.as_f64(),
                });
            }
        }
    }
    Ok(mps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{self, StateVector, TwoSiteReduce};
    use crate::linalg::max_abs_diff;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = MpsState<f64>;

    /// Applies a `4 × 4` gate to sites `(b, b+1)` of a dense vector.
    fn dense_gate(v: &DVector<Cx<f64>>, n: usize, b: usize, g: &CMat<f64>) -> DVector<Cx<f64>> {
        let (ba, bb) = (1usize << (n - 1 - b), 1usize << (n - 2 - b));
        let mut out = v.clone();
        for rest in 0..v.len() {
            if rest & (ba | bb) != 0 {
                continue;
            }
            let idx = [rest, rest | bb, rest | ba, rest | ba | bb];
            for x in 0..4 {
                out[idx[x]] = (0..4).map(|y| g[(x, y)] * v[idx[y]]).sum();
            }
        }
        out
    }

    fn dense_step(v: &DVector<Cx<f64>>, n: usize, gates: &TrotterGateSet<f64>) -> DVector<Cx<f64>> {
        let mut v = v.clone();
        for (b, g) in &gates.odd_half_gates {
            v = dense_gate(&v, n, *b, g);
        }
        for (b, g) in &gates.even_gates {
            v = dense_gate(&v, n, *b, g);
        }
        for (b, g) in &gates.odd_half_gates {
            v = dense_gate(&v, n, *b, g);
        }
        v
    }

    fn random_vector(dim: usize, seed: u64) -> DVector<Cx<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(dim, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        v.unscale(n)
    }

    fn random_unitary(seed: u64) -> CMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = CMat::<f64>::from_fn(4, 4, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = &h + h.adjoint();
        crate::linalg::exp_hermitian(&h, cx(0.0, -1.0))
    }

    fn overlap_error(a: &DVector<Cx<f64>>, b: &DVector<Cx<f64>>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn neel_bools(n: usize) -> Vec<bool> {
        (0..n).map(|i| i % 2 == 1).collect()
    }

    #[test]
    fn product_state_matches_dense() {
        let m = M::product_state(&Spin::neel(6)).unwrap();
        let v = StateVector::<f64>::product(&neel_bools(6));
        assert!(overlap_error(&m.to_dense(), &v.amplitudes) < 1e-15);
        assert_eq!(m.max_bond_dim(), 1);
        assert!(m.is_charge_labeled());
        assert!(M::product_state_checked(5, &Spin::neel(6)).is_err());
    }

    #[test]
    fn neel_cat_is_parity_symmetric_superposition() {
        for &sign in &[1.0, -1.0] {
            let m = M::neel_cat(6, sign).unwrap();
            let a = StateVector::<f64>::product(&neel_bools(6)).amplitudes;
            let b = StateVector::<f64>::product(&neel_bools(6).iter().map(|x| !x).collect::<Vec<_>>()).amplitudes;
            let expect = (a + b * cx(sign, 0.0)).unscale(2f64.sqrt());
            assert!(overlap_error(&m.to_dense(), &expect) < 1e-14);
            assert!(m.isometry_error() < 1e-13);
            assert!(m.is_charge_labeled());
            let c = m.measure_bond_correlators(2).unwrap();
            assert!(c.mz_a.abs() < 1e-14 && (c.dz + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_round_trip() {
        let v = random_vector(1 << 7, 3);
        let m = M::from_dense(&v, 7, 2).unwrap();
        assert!(overlap_error(&m.to_dense(), &v) < 1e-13);
        assert_eq!(m.bond_dims(), vec![1, 2, 4, 8, 8, 4, 2, 1]);
        assert!(m.isometry_error() < 1e-12);
        assert!(M::from_dense(&v, 6, 2).is_err());
    }

    #[test]
    fn center_moves_preserve_state() {
        let v = random_vector(1 << 6, 4);
        let mut m = M::from_dense(&v, 6, 2).unwrap();
        for target in [0, 3, 5, 1] {
            m.move_center_to(target).unwrap();
            assert_eq!(m.ortho_center(), Some(target));
            assert!(m.isometry_error() < 1e-12);
            assert!(overlap_error(&m.to_dense(), &v) < 1e-12);
        }
        assert!(m.move_center_to(6).is_err());
        assert!((m.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_gate_matches_dense_application() {
        let n = 6;
        let v = random_vector(1 << n, 5);
        let mut m = M::from_dense(&v, n, 2).unwrap();
        let mut dense = v.clone();
        for (k, &b) in [0usize, 3, 1, 4, 2, 0].iter().enumerate() {
            let g = random_unitary(10 + k as u64);
            let w = m.apply_two_site_gate(&g, b, &TruncationPolicy::exact()).unwrap();
            dense = dense_gate(&dense, n, b, &g);
            assert!(w < 1e-24);
            assert_eq!(m.ortho_center(), Some(b + 1));
            assert!(m.isometry_error() < 1e-12);
        }
        assert!(overlap_error(&m.to_dense(), &dense) < 1e-12);
    }

    #[test]
    fn gate_rejects_bad_bond_and_shape() {
        let mut m = M::product_state(&Spin::neel(4)).unwrap();
        let p = TruncationPolicy::exact();
        assert!(matches!(m.apply_two_site_gate(&identity(4), 3, &p), Err(Error::Index(_))));
        assert!(matches!(
            m.apply_two_site_gate(&identity(2), 0, &p),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn symmetry_breaking_gate_drops_labels() {
        let n = 4;
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        let mut dense = m.to_dense();
        let g = random_unitary(77);
        m.apply_two_site_gate(&g, 1, &TruncationPolicy::exact()).unwrap();
        dense = dense_gate(&dense, n, 1, &g);
        assert!(!m.is_charge_labeled());
        let params = ChainParams::xxz(n, 0.7).unwrap();
        let gates = trotter_gates(&params, 0.1, GateKind::RealTime).unwrap();
        m.tebd_step(&gates, &TruncationPolicy::exact()).unwrap();
        dense = dense_step(&dense, n, &gates);
        assert!(overlap_error(&m.to_dense(), &dense) < 1e-12);
    }

    #[test]
    fn tebd_step_matches_dense_trotter_product() {
        let n = 8;
        let params = ChainParams::xxz(n, 0.5).unwrap();
        let gates = trotter_gates(&params, 0.1, GateKind::RealTime).unwrap();
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        let mut dense = m.to_dense();
        let policy = TruncationPolicy::with_max_bond(64);
        for _ in 0..20 {
            m.tebd_step(&gates, &policy).unwrap();
            dense = dense_step(&dense, n, &gates);
        }
        assert!(m.is_charge_labeled());
        assert!(m.discarded_weight_total() < 1e-18);
        let err = overlap_error(&m.to_dense(), &dense);
        assert!(err < 1e-10, "{err:e} {}", m.discarded_weight_total());
    }

    #[test]
    fn merged_steps_equal_individual_steps() {
        let n = 8;
        let params = ChainParams::xxz(n, 1.5).unwrap();
        let gates = trotter_gates(&params, 0.05, GateKind::RealTime).unwrap();
        let policy = TruncationPolicy::with_max_bond(64);
        let mut a = M::product_state(&Spin::neel(n)).unwrap();
        let mut b = a.clone();
        for _ in 0..7 {
            a.tebd_step(&gates, &policy).unwrap();
        }
        b.tebd_steps(&gates, 7, &policy).unwrap();
        assert!(overlap_error(&a.to_dense(), &b.to_dense()) < 1e-11);
        assert_eq!(b.tebd_steps(&gates, 0, &policy).unwrap(), 0.0);
    }

    #[test]
    fn tebd_tracks_exact_evolution_to_trotter_accuracy() {
        // Second-order Trotter error after t = 1 at dt = 0.01 is ~1e-5 in
        // the amplitudes; use a bound an order of magnitude looser.
        let n = 8;
        let params = ChainParams::xxz(n, 0.5).unwrap();
        let gates = trotter_gates(&params, 0.01, GateKind::RealTime).unwrap();
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        m.tebd_steps(&gates, 100, &TruncationPolicy::with_max_bond(64)).unwrap();
        let start = StateVector::<f64>::product(&neel_bools(n));
        let exact = exact::evolve_state(&start, &params, 1.0).unwrap();
        assert!(overlap_error(&m.to_dense(), &exact.amplitudes) < 1e-4);
    }

    #[test]
    fn truncation_respects_max_bond() {
        let n = 10;
        let params = ChainParams::xxz(n, 0.0).unwrap();
        let gates = trotter_gates(&params, 0.1, GateKind::RealTime).unwrap();
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        let policy = TruncationPolicy::with_max_bond(4);
        let mut w = 0.0;
        for _ in 0..30 {
            w += m.tebd_step(&gates, &policy).unwrap();
        }
        assert_eq!(m.max_bond_dim(), 4);
        assert!(w > 0.0);
        assert!((w - m.discarded_weight_total()).abs() < 1e-15);
        assert!((m.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_densities_match_exact() {
        let n = 7;
        let v = random_vector(1 << n, 9);
        let sv = StateVector::new(v.clone(), n).unwrap();
        let mut m = M::from_dense(&v, n, 2).unwrap();
        for center in [0, 3, 6] {
            m.move_center_to(center).unwrap();
            let all = m.all_two_site_rdms();
            for b in 0..n - 1 {
                let want = sv.reduce_two_site(b, b + 1).unwrap().0;
                let got = m.two_site_rdm(b).unwrap();
                let want = CMat::from_fn(4, 4, |i, j| want[(i, j)]);
                assert!(max_abs_diff(&got, &want) < 1e-12, "bond {b} center {center}");
                assert!(max_abs_diff(&all[b], &want) < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_and_energy_match_exact() {
        let n = 8;
        let params = ChainParams::xxz(n, 0.8).unwrap();
        let v = random_vector(1 << n, 11);
        let sv = StateVector::new(v.clone(), n).unwrap();
        let mut m = M::from_dense(&v, n, 2).unwrap();
        m.move_center_to(1).unwrap();
        let s_mps = m.entanglement_entropy(n / 2 - 1).unwrap();
        assert!((s_mps - sv.half_chain_entropy()).abs() < 1e-11);
        m.move_center_to(6).unwrap();
        assert!((m.entanglement_entropy(n / 2 - 1).unwrap() - s_mps).abs() < 1e-11);
        assert!((m.energy(&params).unwrap() - sv.energy(&params)).abs() < 1e-12);
        let p: f64 = m.schmidt_spectrum(2).unwrap().iter().sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bond_correlators_match_exact() {
        let n = 6;
        let params = ChainParams::xxz(n, 2.0).unwrap();
        let gates = trotter_gates(&params, 0.05, GateKind::RealTime).unwrap();
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        m.tebd_steps(&gates, 10, &TruncationPolicy::exact()).unwrap();
        let sv = StateVector::new(m.to_dense(), n).unwrap();
        for b in 0..n - 1 {
            let c = m.measure_bond_correlators(b).unwrap();
            let e = sv.correlators(b, b + 1).unwrap();
            for (x, y) in [(c.dx, e.dx), (c.dy, e.dy), (c.dz, e.dz), (c.mz_a, e.mz_a), (c.mz_b, e.mz_b)] {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn imaginary_time_reaches_exact_ground_state() {
        for delta in [1.0f64, 3.0] {
            let n = 8;
            let params = ChainParams::xxz(n, delta).unwrap();
            let m = ground_state_mps(&params, &TruncationPolicy::with_max_bond(64), 1e-12).unwrap();
            let gs = exact::ground_state(&params).unwrap();
            let e = m.energy(&params).unwrap();
            assert!((e - gs.energy).abs() < 1e-8, "Δ={delta}: {e} vs {}", gs.energy);
            let fid = StateVector::new(m.to_dense(), n).unwrap().inner(&gs.state).norm();
            assert!(fid > 1.0 - 1e-7, "fidelity {fid}");
            let c = m.measure_bond_correlators(params.center_bond()).unwrap();
            assert!(c.mz_a.abs() < 1e-10);
        }
    }

    #[test]
    fn ground_state_rejects_bad_tolerance() {
        let params = ChainParams::xxz(4, 1.0).unwrap();
        assert!(ground_state_mps(&params, &TruncationPolicy::with_max_bond(8), 0.0).is_err());
        let schedule = GroundStateSchedule {
            d_beta: vec![0.1],
            check_every: 1,
            max_steps_per_stage: 2,
        };
        let r = ground_state_mps_with(&params, &TruncationPolicy::with_max_bond(8), 1e-15, &schedule);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let n = 6;
        let params = ChainParams::xxz(n, 0.3).unwrap();
        let gates = trotter_gates(&params, 0.1, GateKind::RealTime).unwrap();
        let mut m = M::product_state(&Spin::neel(n)).unwrap();
        m.tebd_steps(&gates, 5, &TruncationPolicy::with_max_bond(3)).unwrap();
        let bytes = m.to_bytes();
        let back = M::from_bytes(&bytes).unwrap();
        assert_eq!(back.bond_dims(), m.bond_dims());
        assert_eq!(back.ortho_center(), m.ortho_center());
        assert_eq!(back.discarded_weight_total(), m.discarded_weight_total());
        assert_eq!(back.is_charge_labeled(), m.is_charge_labeled());
        assert!(overlap_error(&back.to_dense(), &m.to_dense()) == 0.0);

        let dir = std::env::temp_dir().join(format!("xxz-ckpt-{}", std::process::id()));
        m.write_checkpoint(&dir).unwrap();
        let read = M::read_checkpoint(&dir).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert!(overlap_error(&read.to_dense(), &m.to_dense()) == 0.0);

        assert!(matches!(M::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[0] = b'Y';
        assert!(matches!(M::from_bytes(&bad), Err(Error::Checkpoint(_))));
        assert!(matches!(M::read_checkpoint("/nonexistent/ckpt"), Err(Error::Io { .. })));
    }

    #[test]
    fn single_precision_step() {
        let n = 6;
        let params = ChainParams::<f32>::xxz(n, 0.5).unwrap();
        let gates = trotter_gates(&params, 0.1, GateKind::RealTime).unwrap();
        let mut m = MpsState::<f32>::product_state(&Spin::neel(n)).unwrap();
        m.tebd_steps(&gates, 10, &TruncationPolicy::with_max_bond(16)).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-4);
        let c = m.measure_bond_correlators(2);
        assert!(c.is_ok());
    }
}
