//! Finite-temperature states by purification.
//!
//! Each site carries a physical spin and an ancilla spin fused into one
//! four-dimensional leg, `s = 2p + a` with `p, a ∈ {↑ = 0, ↓ = 1}`. The
//! charge of a fused state is `q_p − q_a`, which every gate used here
//! conserves. Cooling applies `e^{−H dβ/2}` to the physical legs, so after
//! reaching `β` the traced physical state is `e^{−βH}/Z`.

use crate::correlations::{BondCorrelators, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::linalg::{exp_hermitian, identity, CMat, TruncationPolicy};
use crate::model::{bond_hamiltonian, whole_steps, ChainParams, GateKind, TrotterGateSet};
use crate::mps::MpsState;
use crate::record::{RecordLabel, Snapshot, TimeSeriesRecord};
use crate::scalar::{Cx, Real};

use nalgebra::Matrix4;
use num_traits::Zero;

/// Charges of the fused states `s = 0..4`.
pub const FUSED_CHARGES: [i32; 4] = [0, 2, -2, 0];

/// Default cap on the accumulated discarded weight during a thermal quench.
pub const DEFAULT_WEIGHT_CAP: f64 = 1e-6;

/// Purified thermal state and the inverse temperature reached so far.
#[derive(Clone, Debug)]
pub struct PurifiedState<R: Real> {
    pub mps: MpsState<R>,
    pub beta: R,
}

/// `⊗_i (|↑↑⟩ + |↓↓⟩)/√2`: the purification of the identity.
pub fn init_infinite_temperature<R: Real>(n_sites: usize) -> Result<PurifiedState<R>> {
    if n_sites < 2 || n_sites % 2 != 0 {
        return Err(Error::param(format!(
            "number of sites must be even and at least 2, got {n_sites}"
        )));
    }
    let w = Cx::new(R::lit(std::f64::consts::FRAC_1_SQRT_2), R::zero());
    let site = vec![w, Cx::zero(), Cx::zero(), w];
    let mps = MpsState::from_product(&vec![site; n_sites], &FUSED_CHARGES)?;
    Ok(PurifiedState { mps, beta: R::zero() })
}

/// Two-site gate on fused legs from separate physical and ancilla gates
/// (both `4 × 4` in `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩`).
pub fn fuse_gates<R: Real>(physical: &CMat<R>, ancilla: &CMat<R>) -> CMat<R> {
    let idx = |p1: usize, p2: usize, a1: usize, a2: usize| (2 * p1 + a1) * 4 + 2 * p2 + a2;
    let mut g = CMat::<R>::zeros(16, 16);
    for x in 0..16 {
        let (p1, p2, a1, a2) = (x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1);
        for y in 0..16 {
            let (q1, q2, b1, b2) = (y >> 3 & 1, y >> 2 & 1, y >> 1 & 1, y & 1);
            let v = physical[(2 * p1 + p2, 2 * q1 + q2)] * ancilla[(2 * a1 + a2, 2 * b1 + b2)];
            if v != Cx::zero() {
                g[(idx(p1, p2, a1, a2), idx(q1, q2, b1, b2))] = v;
            }
        }
    }
    g
}

/// Cools from `state.beta` to `beta_target` in steps of `d_beta`, each step a
/// symmetric Trotter product of `e^{−h dβ/2}` on the physical legs.
pub fn cool<R: Real>(
    state: &PurifiedState<R>,
    params: &ChainParams<R>,
    beta_target: R,
    d_beta: R,
    policy: &TruncationPolicy<R>,
) -> Result<PurifiedState<R>> {
    check_sites(state, params)?;
    if !(beta_target >= state.beta) || !beta_target.is_finite() {
        return Err(Error::param(format!(
            "cannot cool from beta = {} to beta = {beta_target}",
            state.beta
        )));
    }
    let steps = whole_steps(beta_target - state.beta, d_beta).ok_or_else(|| {
        Error::param(format!(
            "d_beta = {d_beta} does not divide the increment {}",
            beta_target - state.beta
        ))
    })?;
    let mut out = state.clone();
    if steps == 0 {
        return Ok(out);
    }
    let h = bond_hamiltonian(params, None).matrix;
    let id = identity::<R>(4);
    let half = R::lit(0.5);
    let gates = TrotterGateSet::from_fn(params.n_bonds(), d_beta * half, GateKind::ImaginaryTime, |_, tau| {
        fuse_gates(&exp_hermitian(&h, Cx::new(-tau, R::zero())), &id)
    });
    let policy = TruncationPolicy {
        renormalize: true,
        ..*policy
    };
    for k in 0..steps {
        out.mps.tebd_step(&gates, &policy)?;
        out.beta = state.beta + d_beta * R::lit((k + 1) as f64);
    }
    out.beta = beta_target;
    Ok(out)
}

/// How the ancilla register evolves during a thermal quench.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AncillaEvolution {
    /// `e^{+i H̃ t}` on the ancillas, `H̃` the complex conjugate of `H_F`.
    /// Leaves physical observables unchanged and slows entanglement growth.
    #[default]
    BackEvolve,
    /// Identity on the ancillas.
    Idle,
}

/// Real-time schedule of a thermal quench.
#[derive(Clone, Copy, Debug)]
pub struct ThermalQuench<R> {
    pub t_max: R,
    pub dt: R,
    /// Steps between emitted records.
    pub report_every: usize,
    /// Abort once the accumulated discarded weight exceeds this.
    pub weight_cap: R,
    pub ancilla: AncillaEvolution,
}

impl<R: Real> ThermalQuench<R> {
    pub fn new(t_max: R, dt: R) -> Self {
        Self {
            t_max,
            dt,
            report_every: 1,
            weight_cap: R::lit(DEFAULT_WEIGHT_CAP),
            ancilla: AncillaEvolution::default(),
        }
    }
}

/// Real-time gates for the fused chain.
pub fn thermal_quench_gates<R: Real>(params_final: &ChainParams<R>, dt: R, ancilla: AncillaEvolution) -> TrotterGateSet<R> {
    let h = bond_hamiltonian(params_final, None).matrix;
    let h_conj = h.map(|z| z.conj());
    let id = identity::<R>(4);
    TrotterGateSet::from_fn(params_final.n_bonds(), dt, GateKind::RealTime, |_, tau| {
        let phys = exp_hermitian(&h, Cx::new(R::zero(), -tau));
        match ancilla {
            AncillaEvolution::BackEvolve => fuse_gates(&phys, &exp_hermitian(&h_conj, Cx::new(R::zero(), tau))),
            AncillaEvolution::Idle => fuse_gates(&phys, &id),
        }
    })
}

/// Evolves a cooled state under `params_final`, handing a record for `t = 0`
/// and every `report_every` steps (and the final step) to `sink`.
pub fn quench_evolve_thermal<R: Real>(
    state: &PurifiedState<R>,
    params_final: &ChainParams<R>,
    schedule: &ThermalQuench<R>,
    label: &RecordLabel<R>,
    policy: &TruncationPolicy<R>,
    sink: &mut dyn FnMut(TimeSeriesRecord<R>),
) -> Result<PurifiedState<R>> {
    check_sites(state, params_final)?;
    let n_steps = whole_steps(schedule.t_max, schedule.dt)
        .ok_or_else(|| Error::param("t_max must be a non-negative integer multiple of dt"))?;
    if schedule.report_every == 0 {
        return Err(Error::param("report interval must be at least one step"));
    }
    let gates = thermal_quench_gates(params_final, schedule.dt, schedule.ancilla);
    let mut out = state.clone();
    sink(thermal_record(&out, params_final, label, R::zero())?);
    let mut done = 0;
    while done < n_steps {
        let k = schedule.report_every.min(n_steps - done);
        out.mps.tebd_steps(&gates, k, policy)?;
        done += k;
        let t = schedule.dt * R::lit(done as f64);
        let total = out.mps.discarded_weight_total();
        if total > schedule.weight_cap {
            return Err(Error::TruncationBudget {
                total: total.as_f64(),
                cap: schedule.weight_cap.as_f64(),
                t: t.as_f64(),
            });
        }
        sink(thermal_record(&out, params_final, label, t)?);
    }
    Ok(out)
}

/// Traces the ancillas out of a fused two-site density matrix.
pub fn trace_ancillas<R: Real>(rho: &CMat<R>) -> TwoQubitDensity<R> {
    let mut out = Matrix4::<Cx<R>>::zeros();
    for p in 0..4 {
        for q in 0..4 {
            let mut acc = Cx::zero();
            for a in 0..4 {
                let fused = |pp: usize| (2 * (pp >> 1) + (a >> 1)) * 4 + 2 * (pp & 1) + (a & 1);
                acc += rho[(fused(p), fused(q))];
            }
            out[(p, q)] = acc;
        }
    }
    TwoQubitDensity(out)
}

/// Physical two-site density matrix of sites `(bond, bond+1)`.
pub fn physical_pair_density<R: Real>(state: &PurifiedState<R>, bond: usize) -> Result<TwoQubitDensity<R>> {
    Ok(trace_ancillas(&state.mps.two_site_rdm(bond)?))
}

/// Pauli correlators of the physical spins on `(bond, bond+1)`.
pub fn thermal_correlators<R: Real>(state: &PurifiedState<R>, bond: usize) -> Result<BondCorrelators<R>> {
    BondCorrelators::from_density_tol(&physical_pair_density(state, bond)?, R::lit(1e-8))
}

/// Physical energy `tr(ρ H)`.
pub fn thermal_energy<R: Real>(state: &PurifiedState<R>, params: &ChainParams<R>) -> Result<R> {
    check_sites(state, params)?;
    let h = bond_hamiltonian(params, None).matrix;
    let h4 = Matrix4::<Cx<R>>::from_fn(|i, j| h[(i, j)]);
    Ok(state
        .mps
        .all_two_site_rdms()
        .iter()
        .map(|rho| (trace_ancillas(rho).0 * h4).trace().re)
        .fold(R::zero(), |a, b| a + b))
}

fn thermal_record<R: Real>(
    state: &PurifiedState<R>,
    params: &ChainParams<R>,
    label: &RecordLabel<R>,
    t: R,
) -> Result<TimeSeriesRecord<R>> {
    let b = params.center_bond();
    let rho = physical_pair_density(state, b)?;
    let correlators = BondCorrelators::from_density_tol(&rho, R::lit(1e-8))?;
    TimeSeriesRecord::measure(
        label,
        Snapshot {
            t,
            correlators,
            rho,
            energy: thermal_energy(state, params)?,
            entropy_center: state.mps.entanglement_entropy(b)?,
            discarded_weight_total: state.mps.discarded_weight_total(),
        },
    )
}

fn check_sites<R: Real>(state: &PurifiedState<R>, params: &ChainParams<R>) -> Result<()> {
    if state.mps.local_dim() != 4 {
        return Err(Error::param("purified state must have local dimension 4"));
    }
    if state.mps.n_sites() != params.n_sites {
        return Err(Error::Dimension {
            expected: params.n_sites,
            got: state.mps.n_sites(),
        });
    }
    Ok(())
}
