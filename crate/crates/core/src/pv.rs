//! PV installation plans and the irradiance-to-power map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{InsolationProfile, SolarReadyBus};

/// Irradiance at standard test conditions, kW/m².
pub const STC_IRRADIANCE: f64 = 1.0;

/// Siting and sizing decision over the solar-ready buses of a study.
///
/// Entry `i` of both vectors refers to candidate `i` of the study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstallationPlan {
    pub locations: Vec<bool>,
    pub capacities_kw: Vec<f64>,
}

impl InstallationPlan {
    pub fn empty(candidates: usize) -> Self {
        InstallationPlan { locations: vec![false; candidates], capacities_kw: vec![0.0; candidates] }
    }

    /// Locations follow the sign of each capacity.
    pub fn from_capacities(capacities_kw: Vec<f64>) -> Self {
        let locations = capacities_kw.iter().map(|&c| c > 0.0).collect();
        InstallationPlan { locations, capacities_kw }
    }

    /// Every candidate at its ceiling.
    pub fn at_caps(candidates: &[SolarReadyBus]) -> Self {
        Self::from_capacities(candidates.iter().map(|c| c.p_max_kw).collect())
    }

    pub fn len(&self) -> usize {
        self.capacities_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacities_kw.is_empty()
    }

    pub fn total_kw(&self) -> f64 {
        self.capacities_kw.iter().sum()
    }

    pub fn installed(&self) -> usize {
        self.locations.iter().filter(|&&l| l).count()
    }

    /// Checks the plan against the candidate list it was built for.
    pub fn validate(&self, candidates: &[SolarReadyBus]) -> Result<()> {
        if self.locations.len() != self.capacities_kw.len() {
            return Err(Error::DimensionMismatch {
                what: "plan locations",
                expected: self.capacities_kw.len(),
                actual: self.locations.len(),
            });
        }
        if self.capacities_kw.len() != candidates.len() {
            return Err(Error::DimensionMismatch {
                what: "plan candidates",
                expected: candidates.len(),
                actual: self.capacities_kw.len(),
            });
        }
        for (i, ((&on, &cap), c)) in
            self.locations.iter().zip(&self.capacities_kw).zip(candidates).enumerate()
        {
            if !(cap.is_finite() && cap >= 0.0 && cap <= c.p_max_kw) {
                return Err(Error::invalid(
                    format!("plan capacity at bus {}", c.bus),
                    format!("{cap} kW outside [0, {}]", c.p_max_kw),
                ));
            }
            if !on && cap != 0.0 {
                return Err(Error::invalid(
                    format!("plan entry {i}"),
                    "capacity without a location",
                ));
            }
        }
        Ok(())
    }
}

/// Real-power output of one installation, kW.
///
/// Linear in irradiance, saturating at [`STC_IRRADIANCE`], unity power factor.
pub fn pv_output(capacity_kw: f64, insolation_kw_per_m2: f64) -> Result<f64> {
    if !(capacity_kw >= 0.0) {
        return Err(Error::invalid("capacity_kw", format!("must be >= 0, got {capacity_kw}")));
    }
    if !(insolation_kw_per_m2 >= 0.0) {
        return Err(Error::invalid(
            "insolation_kw_per_m2",
            format!("must be >= 0, got {insolation_kw_per_m2}"),
        ));
    }
    Ok(capacity_kw * (insolation_kw_per_m2 / STC_IRRADIANCE).min(1.0))
}

/// Candidate-by-timestep PV injection, kW.
#[derive(Debug, Clone, PartialEq)]
pub struct PvInjectionSeries {
    pub p_kw: Vec<Vec<f64>>,
}

impl PvInjectionSeries {
    pub fn at(&self, candidate: usize, t: usize) -> f64 {
        self.p_kw[candidate][t]
    }
}

pub fn pv_profile(plan: &InstallationPlan, insolation: &InsolationProfile) -> Result<PvInjectionSeries> {
    if plan.locations.len() != plan.capacities_kw.len() {
        return Err(Error::DimensionMismatch {
            what: "plan locations",
            expected: plan.capacities_kw.len(),
            actual: plan.locations.len(),
        });
    }
    let horizon = insolation.i_kw_per_m2.len();
    let p_kw = plan
        .locations
        .iter()
        .zip(&plan.capacities_kw)
        .map(|(&on, &cap)| {
            if !on {
                return Ok(vec![0.0; horizon]);
            }
            insolation.i_kw_per_m2.iter().map(|&i| pv_output(cap, i)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(PvInjectionSeries { p_kw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BusId;
    use proptest::prelude::*;

    #[test]
    fn output_examples() {
        assert_eq!(pv_output(5.0, 0.0).unwrap(), 0.0);
        assert_eq!(pv_output(5.0, 1.0).unwrap(), 5.0);
        assert_eq!(pv_output(5.0, 0.5).unwrap(), 2.5);
        assert_eq!(pv_output(5.0, 1.3).unwrap(), 5.0);
        assert!(pv_output(-1.0, 0.5).is_err());
        assert!(pv_output(1.0, -0.5).is_err());
        assert!(pv_output(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn profile_examples() {
        let ins = InsolationProfile { i_kw_per_m2: vec![0.0, 0.5, 1.0] };
        let empty = pv_profile(&InstallationPlan::empty(3), &ins).unwrap();
        assert!(empty.p_kw.iter().flatten().all(|&p| p == 0.0));

        let single = pv_profile(&InstallationPlan::from_capacities(vec![10.0]), &ins).unwrap();
        assert_eq!(single.p_kw, vec![vec![0.0, 5.0, 10.0]]);

        let bad = InstallationPlan { locations: vec![true], capacities_kw: vec![1.0, 2.0] };
        assert!(matches!(pv_profile(&bad, &ins), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn plan_validation() {
        let cands = [
            SolarReadyBus { bus: BusId(1), p_max_kw: 10.0 },
            SolarReadyBus { bus: BusId(2), p_max_kw: 4.0 },
        ];
        assert!(InstallationPlan::from_capacities(vec![10.0, 0.0]).validate(&cands).is_ok());
        assert!(InstallationPlan::from_capacities(vec![10.5, 0.0]).validate(&cands).is_err());
        let orphan = InstallationPlan { locations: vec![false, false], capacities_kw: vec![1.0, 0.0] };
        assert!(orphan.validate(&cands).is_err());
        assert!(InstallationPlan::empty(1).validate(&cands).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_both_arguments(c in 0.0..1e4f64, dc in 0.0..1e3f64, i in 0.0..2.0f64, di in 0.0..1.0f64) {
            let base = pv_output(c, i).unwrap();
            prop_assert!(pv_output(c + dc, i).unwrap() >= base);
            prop_assert!(pv_output(c, i + di).unwrap() >= base);
            prop_assert!(base <= c);
        }

        #[test]
        fn saturates_at_stc(c in 0.0..1e4f64, i in 1.0..5.0f64) {
            prop_assert_eq!(pv_output(c, i).unwrap(), c);
        }

        #[test]
        fn homogeneous_below_saturation(c in 0.0..1e4f64, alpha in 0.0..10.0f64, i in 0.0..=1.0f64) {
            let lhs = pv_output(alpha * c, i).unwrap();
            let rhs = alpha * pv_output(c, i).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
