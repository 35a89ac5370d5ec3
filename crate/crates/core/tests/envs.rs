use pddpg_core::envs::{EnvId, StepResult};
use pddpg_core::error::Error;
use proptest::prelude::*;

fn rollout(id: EnvId, seed: u64, actions: &[f64]) -> Vec<StepResult> {
    let mut env = id.make();
    env.reset(seed);
    let dim = id.spec().action_dim;
    let mut out = Vec::new();
    for k in 0.. {
        let a: Vec<f64> = (0..dim).map(|j| actions[(k * dim + j) % actions.len()]).collect();
        let r = env.step(&a).unwrap();
        let done = r.done;
        out.push(r);
        if done {
            break;
        }
    }
    out
}

#[test]
fn finished_episodes_refuse_further_steps() {
    for id in EnvId::ALL {
        let mut env = id.make();
        env.reset(0);
        let a = vec![0.0; id.spec().action_dim];
        while !env.step(&a).unwrap().done {}
        assert!(matches!(env.step(&a), Err(Error::EpisodeFinished)));
        env.reset(1);
        assert!(env.step(&a).is_ok());
    }
}

#[test]
fn wrong_action_shapes_are_rejected() {
    for id in EnvId::ALL {
        let mut env = id.make();
        env.reset(0);
        let bad = vec![0.0; id.spec().action_dim + 1];
        assert!(matches!(env.step(&bad), Err(Error::DimensionMismatch { .. })));
        assert!(env.step(&vec![f64::NAN; id.spec().action_dim]).is_err());
    }
}

#[test]
fn time_limit_is_flagged_as_truncation() {
    for id in [EnvId::Pendulum, EnvId::Reacher] {
        let steps = rollout(id, 3, &[0.3, -0.7]);
        assert_eq!(steps.len(), id.spec().max_steps);
        let last = steps.last().unwrap();
        assert!(last.done && last.truncated);
        assert!(steps[..steps.len() - 1].iter().all(|s| !s.done && !s.truncated));
    }
}

#[test]
fn mountain_car_goal_is_terminal() {
    // Bang-bang control in the direction of motion climbs out of the valley.
    let mut env = EnvId::MountainCar.make();
    let mut state = env.reset(0);
    loop {
        let a = if state[1] >= 0.0 { 1.0 } else { -1.0 };
        let r = env.step(&[a]).unwrap();
        if r.done {
            assert!(!r.truncated);
            assert!(r.next_state[0] >= 0.45);
            assert!(r.reward > 90.0);
            break;
        }
        state = r.next_state;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn out_of_range_actions_act_like_clipped_ones(
        seed in any::<u64>(),
        actions in prop::collection::vec(-20.0f64..20.0, 1..16),
    ) {
        for id in EnvId::ALL {
            let spec = id.spec();
            let clipped: Vec<f64> = actions.iter().map(|a| a.clamp(spec.action_low[0], spec.action_high[0])).collect();
            prop_assert_eq!(rollout(id, seed, &actions), rollout(id, seed, &clipped));
        }
    }

    #[test]
    fn observations_stay_finite_and_in_range(seed in any::<u64>(), actions in prop::collection::vec(-3.0f64..3.0, 1..16)) {
        for id in EnvId::ALL {
            for r in rollout(id, seed, &actions) {
                prop_assert!(r.next_state.iter().all(|x| x.is_finite()));
                prop_assert!(r.reward.is_finite());
                match id {
                    EnvId::Pendulum => prop_assert!(r.next_state[2].abs() <= 8.0),
                    EnvId::MountainCar => prop_assert!((-1.2..=0.6).contains(&r.next_state[0])),
                    EnvId::Reacher => {
                        prop_assert!(r.next_state[2].abs() <= 1.0 && r.next_state[3].abs() <= 1.0);
                        prop_assert!(r.reward <= 0.0);
                    }
                }
            }
        }
    }
}
