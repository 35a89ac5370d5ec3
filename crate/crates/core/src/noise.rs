//! Exploration strategies.
//!
//! Action-space strategies return an additive term for the actor's output.
//! Adaptive parameter noise instead keeps a perturbed copy of the actor,
//! re-sampled at every episode start, and tunes its scale so that the
//! perturbed policy stays about `target_distance` away from the live one.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    None,
    Gaussian,
    Ou,
    AdaptiveParam,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Ou => "ou",
            NoiseKind::AdaptiveParam => "adaptive-param",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseKind::None),
            "gaussian" => Ok(NoiseKind::Gaussian),
            "ou" => Ok(NoiseKind::Ou),
            "adaptive-param" => Ok(NoiseKind::AdaptiveParam),
            other => Err(Error::Parse(format!(
                "unknown noise `{other}` (expected none|gaussian|ou|adaptive-param)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParamNoise {
    sigma: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub adapt_factor: f64,
    pub target_distance: f64,
    perturbed_actor: Option<Network>,
}

impl AdaptiveParamNoise {
    pub fn new(
        sigma: f64,
        sigma_min: f64,
        sigma_max: f64,
        adapt_factor: f64,
        target_distance: f64,
    ) -> Result<Self> {
        if !(sigma_min >= 0.0 && sigma_min <= sigma && sigma <= sigma_max && sigma_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= sigma_min <= sigma <= sigma_max, got {sigma_min} <= {sigma} <= {sigma_max}"
            )));
        }
        if !(adapt_factor > 1.0 && adapt_factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "adapt factor must be > 1, got {adapt_factor}"
            )));
        }
        if !(target_distance > 0.0 && target_distance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "target distance must be > 0, got {target_distance}"
            )));
        }
        Ok(Self {
            sigma,
            sigma_min,
            sigma_max,
            adapt_factor,
            target_distance,
            perturbed_actor: None,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn perturbed_actor(&self) -> Option<&Network> {
        self.perturbed_actor.as_ref()
    }

    /// Shrinks sigma when the perturbed policy is farther than the target,
    /// grows it otherwise (ties grow), then clamps.
    pub fn adapt(&mut self, measured_distance: f64) -> Result<()> {
        if !(measured_distance >= 0.0 && measured_distance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "measured distance must be finite and >= 0, got {measured_distance}"
            )));
        }
        let next = if measured_distance > self.target_distance {
            self.sigma / self.adapt_factor
        } else {
            self.sigma * self.adapt_factor
        };
        self.sigma = next.clamp(self.sigma_min, self.sigma_max);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseStrategy {
    None,
    Gaussian {
        sigma: f64,
    },
    /// Discrete Ornstein-Uhlenbeck process reverting to zero.
    Ou {
        theta: f64,
        sigma: f64,
        state: Vec<f64>,
    },
    AdaptiveParam(AdaptiveParamNoise),
}

impl NoiseStrategy {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gaussian sigma must be >= 0, got {sigma}")));
        }
        Ok(NoiseStrategy::Gaussian { sigma })
    }

    pub fn ou(theta: f64, sigma: f64, action_dim: usize) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "OU parameters must be >= 0, got theta={theta} sigma={sigma}"
            )));
        }
        Ok(NoiseStrategy::Ou {
            theta,
            sigma,
            state: vec![0.0; action_dim],
        })
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseStrategy::None => NoiseKind::None,
            NoiseStrategy::Gaussian { .. } => NoiseKind::Gaussian,
            NoiseStrategy::Ou { .. } => NoiseKind::Ou,
            NoiseStrategy::AdaptiveParam(_) => NoiseKind::AdaptiveParam,
        }
    }

    /// Current parameter-noise scale, if this is adaptive parameter noise.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            NoiseStrategy::AdaptiveParam(p) => Some(p.sigma()),
            _ => None,
        }
    }

    /// Actor that should generate behavior this episode, when it differs from
    /// the live actor.
    pub fn behavior_actor(&self) -> Option<&Network> {
        match self {
            NoiseStrategy::AdaptiveParam(p) => p.perturbed_actor(),
            _ => None,
        }
    }

    pub fn on_episode_start<R: Rng + ?Sized>(&mut self, actor: &Network, rng: &mut R) -> Result<()> {
        match self {
            NoiseStrategy::AdaptiveParam(p) => {
                p.perturbed_actor = Some(actor.perturb(p.sigma, rng)?);
            }
            NoiseStrategy::Ou { state, .. } => state.fill(0.0),
            NoiseStrategy::None | NoiseStrategy::Gaussian { .. } => {}
        }
        Ok(())
    }

    pub fn action_term<R: Rng + ?Sized>(&mut self, action_dim: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            NoiseStrategy::None => Ok(vec![0.0; action_dim]),
            NoiseStrategy::Gaussian { sigma } => Ok((0..action_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    *sigma * z
                })
                .collect()),
            NoiseStrategy::Ou {
                theta,
                sigma,
                state,
            } => {
                if state.len() != action_dim {
                    return Err(Error::DimensionMismatch {
                        context: "OU state",
                        expected: action_dim,
                        found: state.len(),
                    });
                }
                for x in state.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += *theta * (0.0 - *x) + *sigma * z;
                }
                Ok(state.clone())
            }
            NoiseStrategy::AdaptiveParam(_) => Err(Error::InvalidArgument(
                "adaptive parameter noise has no additive action term".into(),
            )),
        }
    }

    pub fn adapt(&mut self, measured_distance: f64) -> Result<()> {
        match self {
            NoiseStrategy::AdaptiveParam(p) => p.adapt(measured_distance),
            other => Err(Error::InvalidArgument(format!(
                "adapt called on `{}` noise",
                other.kind().name()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_shapes, Activation};
    use crate::seeded_rng;

    fn actor() -> Network {
        let shapes = mlp_shapes(&[3, 8, 2], Activation::Relu, Activation::Tanh, true);
        Network::random(shapes, 0.1, &mut seeded_rng(11)).unwrap()
    }

    fn adaptive(sigma: f64, min: f64) -> NoiseStrategy {
        NoiseStrategy::AdaptiveParam(AdaptiveParamNoise::new(sigma, min, 1.0, 1.01, 0.1).unwrap())
    }

    #[test]
    fn zero_sigma_perturbation_equals_live_actor() {
        let mut n = adaptive(0.0, 0.0);
        let a = actor();
        n.on_episode_start(&a, &mut seeded_rng(0)).unwrap();
        assert_eq!(n.behavior_actor().unwrap(), &a);
    }

    #[test]
    fn perturbation_is_deterministic_per_seed() {
        let a = actor();
        let mut n1 = adaptive(0.1, 1e-4);
        let mut n2 = adaptive(0.1, 1e-4);
        n1.on_episode_start(&a, &mut seeded_rng(5)).unwrap();
        n2.on_episode_start(&a, &mut seeded_rng(5)).unwrap();
        assert_eq!(n1.behavior_actor(), n2.behavior_actor());
    }

    #[test]
    fn perturbation_never_touches_live_actor() {
        let a = actor();
        let before = a.clone();
        let mut n = adaptive(0.5, 1e-4);
        let mut rng = seeded_rng(5);
        for _ in 0..3 {
            n.on_episode_start(&a, &mut rng).unwrap();
        }
        assert_eq!(a, before);
        assert_ne!(n.behavior_actor().unwrap(), &a);
    }

    #[test]
    fn ou_resets_to_zero() {
        let mut n = NoiseStrategy::ou(0.15, 0.2, 3).unwrap();
        let mut rng = seeded_rng(1);
        n.action_term(3, &mut rng).unwrap();
        n.on_episode_start(&actor(), &mut rng).unwrap();
        match &n {
            NoiseStrategy::Ou { state, .. } => assert_eq!(state, &vec![0.0; 3]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn no_noise_term_is_zero() {
        let mut n = NoiseStrategy::None;
        assert_eq!(n.action_term(4, &mut seeded_rng(0)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn full_reversion_ou_is_zero_forever() {
        let mut n = NoiseStrategy::Ou {
            theta: 1.0,
            sigma: 0.0,
            state: vec![0.7, -2.0],
        };
        let mut rng = seeded_rng(2);
        for _ in 0..10 {
            assert_eq!(n.action_term(2, &mut rng).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn ou_replays_under_fixed_seed() {
        let run = || {
            let mut n = NoiseStrategy::ou(0.15, 0.2, 2).unwrap();
            let mut rng = seeded_rng(8);
            (0..50).map(|_| n.action_term(2, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn action_term_rejects_adaptive() {
        let mut n = adaptive(0.1, 1e-4);
        assert!(n.action_term(2, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn tie_grows_sigma() {
        let mut p = AdaptiveParamNoise::new(0.1, 1e-4, 1.0, 1.01, 0.1).unwrap();
        p.adapt(0.1).unwrap();
        assert_eq!(p.sigma(), 0.1 * 1.01);
    }

    #[test]
    fn sigma_clamped_at_max() {
        let mut p = AdaptiveParamNoise::new(1.0, 1e-4, 1.0, 1.01, 0.1).unwrap();
        p.adapt(0.0).unwrap();
        assert_eq!(p.sigma(), 1.0);
    }

    #[test]
    fn grow_then_shrink_returns_to_start() {
        let mut p = AdaptiveParamNoise::new(0.2, 1e-4, 1.0, 1.01, 0.1).unwrap();
        for _ in 0..20 {
            p.adapt(0.05).unwrap();
            p.adapt(0.5).unwrap();
            assert!((p.sigma() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn adapt_rejects_negative_distance_and_wrong_kind() {
        let mut n = adaptive(0.1, 1e-4);
        assert!(n.adapt(-1.0).is_err());
        assert!(NoiseStrategy::None.adapt(0.1).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(AdaptiveParamNoise::new(2.0, 1e-4, 1.0, 1.01, 0.1).is_err());
        assert!(AdaptiveParamNoise::new(0.1, 1e-4, 1.0, 1.0, 0.1).is_err());
        assert!(AdaptiveParamNoise::new(0.1, 1e-4, 1.0, 1.01, 0.0).is_err());
        assert!(NoiseStrategy::gaussian(-0.1).is_err());
        assert!(NoiseStrategy::ou(-0.1, 0.2, 1).is_err());
    }

    #[test]
    fn parses_kinds() {
        for k in [NoiseKind::None, NoiseKind::Gaussian, NoiseKind::Ou, NoiseKind::AdaptiveParam] {
            assert_eq!(k.name().parse::<NoiseKind>().unwrap(), k);
        }
        assert!("pink".parse::<NoiseKind>().is_err());
    }
}
