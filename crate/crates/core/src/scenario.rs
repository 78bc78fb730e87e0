//! Synthetic load conditions and the multiplicative measurement noise model.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hydraulics::{NetworkModel, ResistanceVector};
use crate::scalar::{lit, Real};
use crate::topology::NetworkTopology;

/// Pressure at the supply reference node for generated conditions. Only
/// `p_alpha - p_beta` enters the estimator. With the anchor at zero the noisy
/// reading of `p_beta` is a noisy reading of the differential pressure.
pub const REFERENCE_P_ALPHA: f64 = 0.0;

/// One steady-state snapshot of the measured quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCondition<T: Real> {
    pub index: usize,
    pub boundary_flows: DVector<T>,
    pub valve_settings: DVector<T>,
    pub p_alpha: T,
    pub p_beta: T,
}

impl<T: Real> LoadCondition<T> {
    pub fn differential_pressure(&self) -> T {
        self.p_alpha - self.p_beta
    }

    pub fn n_valves(&self) -> usize {
        self.boundary_flows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    epsilon: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Config(format!("noise level {epsilon} outside [0, 1)")));
        }
        Ok(Self { epsilon, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// One noisy reading of `x`, uniform on `[x(1 - eps), x(1 + eps)]`.
    fn perturb<T: Real, R: Rng + ?Sized>(&self, x: T, rng: &mut R) -> T {
        let w = 2.0 * rng.gen::<f64>() - 1.0;
        x * (T::one() + lit::<T>(self.epsilon * w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub flow_range: (f64, f64),
    /// Range of the multiplier applied to the minimum feasible differential
    /// pressure.
    pub dp_headroom: (f64, f64),
    pub count: usize,
    pub seed: u64,
    pub p_alpha: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            flow_range: (100.0, 200.0),
            dp_headroom: (1.0, 2.0),
            count: 4,
            seed: 0,
            p_alpha: REFERENCE_P_ALPHA,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.flow_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("flow range ({lo}, {hi}) must satisfy 0 < low <= high")));
        }
        let (m_lo, m_hi) = self.dp_headroom;
        if !(m_lo >= 1.0 && m_hi >= m_lo && m_hi.is_finite()) {
            return Err(Error::Config(format!(
                "headroom range ({m_lo}, {m_hi}) must satisfy 1 <= low <= high"
            )));
        }
        if self.count == 0 {
            return Err(Error::Config("load condition count must be at least 1".into()));
        }
        if !self.p_alpha.is_finite() {
            return Err(Error::Config("p_alpha must be finite".into()));
        }
        Ok(())
    }
}

/// SplitMix64 step; derives independent sub-seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_load_conditions<T: Real>(
    net: &NetworkTopology,
    s: &ResistanceVector<T>,
    cfg: &ScenarioConfig,
) -> Result<Vec<LoadCondition<T>>> {
    let model = NetworkModel::new(net)?;
    generate_with_model(&model, s, cfg)
}

pub(crate) fn generate_with_model<T: Real>(
    model: &NetworkModel<T>,
    s: &ResistanceVector<T>,
    cfg: &ScenarioConfig,
) -> Result<Vec<LoadCondition<T>>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.flow_range;
    let (m_lo, m_hi) = cfg.dp_headroom;
    let p_alpha = lit::<T>(cfg.p_alpha);
    (0..cfg.count)
        .map(|t| {
            let boundary = DVector::from_iterator(
                model.n_valves(),
                (0..model.n_valves()).map(|_| lit::<T>(lo + (hi - lo) * rng.gen::<f64>())),
            );
            let headroom = lit::<T>(m_lo + (m_hi - m_lo) * rng.gen::<f64>());
            let flows = model.solve_flows(&boundary)?;
            let dp = headroom * model.min_required_dp(s, &flows)?;
            let mut lc = model.simulate(s, &boundary, dp, p_alpha)?;
            lc.index = t;
            Ok(lc)
        })
        .collect()
}

/// Replaces every measured scalar with an independent noisy reading. Draw
/// order: boundary flows in valve order, valve settings, `p_alpha`,
/// `p_beta`. Noisy valve settings are clamped to at most 1.
pub fn apply_noise<T: Real, R: Rng + ?Sized>(
    lc: &LoadCondition<T>,
    noise: &NoiseModel,
    rng: &mut R,
) -> LoadCondition<T> {
    let boundary_flows = lc.boundary_flows.map(|q| noise.perturb(q, rng));
    let valve_settings = lc
        .valve_settings
        .map(|u| noise.perturb(u, rng).min(T::one()));
    let p_alpha = noise.perturb(lc.p_alpha, rng);
    let p_beta = noise.perturb(lc.p_beta, rng);
    LoadCondition {
        index: lc.index,
        boundary_flows,
        valve_settings,
        p_alpha,
        p_beta,
    }
}

/// Noise for a whole batch, drawn from a generator seeded by `noise.seed`.
pub fn apply_noise_all<T: Real>(
    conditions: &[LoadCondition<T>],
    noise: &NoiseModel,
) -> Vec<LoadCondition<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    conditions
        .iter()
        .map(|lc| apply_noise(lc, noise, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Edge;

    fn fig1() -> NetworkTopology {
        NetworkTopology::new(
            0,
            vec![
                Edge::new(0, 4),
                Edge::new(4, 1),
                Edge::new(4, 5),
                Edge::new(5, 2),
                Edge::new(5, 3),
            ],
            vec![1, 2, 3],
        )
    }

    fn s() -> ResistanceVector<f64> {
        ResistanceVector::new(
            DVector::from_vec(vec![0.1, 0.3, 0.2, 0.4, 0.5]),
            DVector::from_vec(vec![0.2, 0.3, 0.1]),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_flow_range_is_deterministic() {
        let cfg = ScenarioConfig {
            flow_range: (150.0, 150.0),
            count: 1,
            ..Default::default()
        };
        let lcs = generate_load_conditions(&fig1(), &s(), &cfg).unwrap();
        assert_eq!(lcs.len(), 1);
        assert!(lcs[0].boundary_flows.iter().all(|&q| q == 150.0));
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = ScenarioConfig {
            count: 5,
            seed: 42,
            ..Default::default()
        };
        let a = generate_load_conditions(&fig1(), &s(), &cfg).unwrap();
        let b = generate_load_conditions(&fig1(), &s(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_load_conditions(&fig1(), &s(), &ScenarioConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_is_identity() {
        let cfg = ScenarioConfig::default();
        let lcs = generate_load_conditions(&fig1(), &s(), &cfg).unwrap();
        let noisy = apply_noise_all(&lcs, &NoiseModel::new(0.0, 3).unwrap());
        assert_eq!(lcs, noisy);
    }

    #[test]
    fn noise_bounds() {
        let noise = NoiseModel::new(0.01, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let x: f64 = noise.perturb(100.0, &mut rng);
            assert!((99.0..=101.0).contains(&x));
        }
    }

    #[test]
    fn noise_is_unbiased() {
        let noise = NoiseModel::new(0.01, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| noise.perturb(100.0f64, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 100.0).abs() < 0.1);
    }

    #[test]
    fn invalid_configs() {
        assert!(NoiseModel::new(1.0, 0).is_err());
        assert!(NoiseModel::new(-0.1, 0).is_err());
        for cfg in [
            ScenarioConfig { count: 0, ..Default::default() },
            ScenarioConfig { flow_range: (0.0, 1.0), ..Default::default() },
            ScenarioConfig { flow_range: (2.0, 1.0), ..Default::default() },
            ScenarioConfig { dp_headroom: (0.5, 2.0), ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn clamped_settings_stay_in_domain() {
        let lc = LoadCondition {
            index: 0,
            boundary_flows: DVector::from_element(1, 100.0),
            valve_settings: DVector::from_element(1, 1.0),
            p_alpha: 10.0,
            p_beta: 5.0,
        };
        let noise = NoiseModel::new(0.5, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = apply_noise(&lc, &noise, &mut rng).valve_settings[0];
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
