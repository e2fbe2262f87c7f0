//! Per-time observables recorded along a quench.

use crate::correlations::{pair_measures, BondCorrelators, TwoQubitDensity};
use crate::error::Result;
use crate::scalar::Real;

/// Quench parameters copied into every record so rows stand on their own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordLabel<R> {
    pub delta_i: R,
    pub delta_f: R,
    pub temperature: R,
}

/// Center-bond observables at one report time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeSeriesRecord<R> {
    pub t: R,
    pub delta_i: R,
    pub delta_f: R,
    pub temperature: R,
    pub concurrence: R,
    pub discord: R,
    pub dx: R,
    pub dy: R,
    pub dz: R,
    /// `⟨σ^z⟩` of the left center site.
    pub mz_center: R,
    pub energy: R,
    pub entropy_center: R,
    pub discarded_weight_total: R,
    /// `true` when the Bell-diagonal closed forms were used, `false` when the
    /// magnetization check failed and the general formulas were used instead.
    pub validity_flag: bool,
}

/// Everything measured on the state at one time; turned into a record by
/// [`TimeSeriesRecord::measure`].
pub struct Snapshot<R: Real> {
    pub t: R,
    pub correlators: BondCorrelators<R>,
    pub rho: TwoQubitDensity<R>,
    pub energy: R,
    pub entropy_center: R,
    pub discarded_weight_total: R,
}

impl<R: Real> TimeSeriesRecord<R> {
    pub fn measure(label: &RecordLabel<R>, snap: Snapshot<R>) -> Result<Self> {
        let m = pair_measures(&snap.correlators, &snap.rho)?;
        let c = snap.correlators;
        Ok(Self {
            t: snap.t,
            delta_i: label.delta_i,
            delta_f: label.delta_f,
            temperature: label.temperature,
            concurrence: m.concurrence,
            discord: m.discord,
            dx: c.dx,
            dy: c.dy,
            dz: c.dz,
            mz_center: c.mz_a,
            energy: snap.energy,
            entropy_center: snap.entropy_center,
            discarded_weight_total: snap.discarded_weight_total,
            validity_flag: m.bell_diagonal,
        })
    }

    /// Observables compared between runs, in CSV column order.
    pub fn observables(&self) -> [(&'static str, R); 8] {
        [
            ("concurrence", self.concurrence),
            ("discord", self.discord),
            ("dx", self.dx),
            ("dy", self.dy),
            ("dz", self.dz),
            ("mz_center", self.mz_center),
            ("energy", self.energy),
            ("entropy_center", self.entropy_center),
        ]
    }
}
