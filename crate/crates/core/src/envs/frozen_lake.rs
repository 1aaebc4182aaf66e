//! 4×4 FrozenLake on the map `SFFF / FHFH / FFFH / HFFG`.
//!
//! Actions: 0 left, 1 down, 2 right, 3 up. On slippery ice the agent moves in
//! the intended direction or one of the two perpendicular directions, each
//! with probability 1/3. Reaching `G` pays 1 and ends the episode; falling
//! into `H` pays 0 and ends it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_action, DiscreteEnv, Environment, StateKind, Step};
use crate::stochmax::ActionId;
use crate::{Error, FiniteMdp, Result};

const MAP: [&[u8; 4]; 4] = [b"SFFF", b"FHFH", b"FFFH", b"HFFG"];
const SIZE: usize = 4;

#[derive(Debug, Clone)]
pub struct FrozenLake {
    slippery: bool,
    pos: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl FrozenLake {
    pub const N_STATES: usize = SIZE * SIZE;

    pub fn new(slippery: bool, seed: u64) -> Self {
        Self::with_rng(slippery, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(slippery: bool, rng: ChaCha8Rng) -> Self {
        Self {
            slippery,
            pos: 0,
            done: false,
            rng,
        }
    }

    pub fn is_slippery(&self) -> bool {
        self.slippery
    }

    pub fn tile(state: usize) -> u8 {
        MAP[state / SIZE][state % SIZE]
    }

    pub fn is_terminal(state: usize) -> bool {
        matches!(Self::tile(state), b'H' | b'G')
    }

    /// Cell reached by moving in `direction` from `state`, clamped at borders.
    pub fn moved(state: usize, direction: usize) -> usize {
        let (r, c) = (state / SIZE, state % SIZE);
        let (r, c) = match direction {
            0 => (r, c.saturating_sub(1)),
            1 => ((r + 1).min(SIZE - 1), c),
            2 => (r, (c + 1).min(SIZE - 1)),
            _ => (r.saturating_sub(1), c),
        };
        r * SIZE + c
    }

    /// Directions actually taken for `action`, each equally likely.
    fn outcomes(&self, action: usize) -> Vec<usize> {
        if self.slippery {
            vec![(action + 3) % 4, action, (action + 1) % 4]
        } else {
            vec![action]
        }
    }
}

impl Environment for FrozenLake {
    type State = usize;

    fn n_actions(&self) -> usize {
        4
    }

    fn state_kind(&self) -> StateKind {
        StateKind::Discrete(Self::N_STATES)
    }

    fn reset(&mut self) -> usize {
        self.pos = 0;
        self.done = false;
        0
    }

    fn step(&mut self, action: ActionId) -> Result<Step<usize>> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        check_action(action, 4)?;
        let direction = if self.slippery {
            (action.index() + 3 + self.rng.random_range(0..3)) % 4
        } else {
            action.index()
        };
        let next = Self::moved(self.pos, direction);
        self.pos = next;
        self.done = Self::is_terminal(next);
        Ok(Step {
            next_state: next,
            reward: if Self::tile(next) == b'G' { 1.0 } else { 0.0 },
            terminated: self.done,
            truncated: false,
        })
    }
}

impl DiscreteEnv for FrozenLake {
    fn n_states(&self) -> usize {
        Self::N_STATES
    }

    fn tables(&self) -> FiniteMdp {
        let (ns, na) = (Self::N_STATES, 4);
        let mut rewards = vec![0.0; ns * na];
        let mut p = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                let base = (s * na + a) * ns;
                if Self::is_terminal(s) {
                    p[base + s] = 1.0;
                    continue;
                }
                let outs = self.outcomes(a);
                let w = 1.0 / outs.len() as f64;
                for d in outs {
                    let next = Self::moved(s, d);
                    p[base + next] += w;
                    if Self::tile(next) == b'G' {
                        rewards[s * na + a] += w;
                    }
                }
            }
        }
        let terminal = (0..ns).map(Self::is_terminal).collect();
        FiniteMdp::new(ns, na, rewards, p)
            .and_then(|m| m.with_terminals(terminal))
            .expect("frozen lake tables are well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_walk_reaches_goal() {
        let mut env = FrozenLake::new(false, 0);
        env.reset();
        let mut last = None;
        for a in [2, 2, 1, 1, 1, 2] {
            last = Some(env.step(ActionId(a)).unwrap());
        }
        let last = last.unwrap();
        assert_eq!(last.next_state, 15);
        assert_eq!(last.reward, 1.0);
        assert!(last.terminated);
    }

    #[test]
    fn hole_terminates_without_reward() {
        let mut env = FrozenLake::new(false, 0);
        env.reset();
        env.step(ActionId(2)).unwrap();
        let step = env.step(ActionId(1)).unwrap();
        assert_eq!(step.next_state, 5);
        assert_eq!(step.reward, 0.0);
        assert!(step.terminated);
        assert_eq!(env.step(ActionId(0)), Err(Error::StepAfterDone));
    }

    #[test]
    fn slippery_split_is_one_third_each() {
        let mut env = FrozenLake::new(true, 99);
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            // from cell 6 (row 1, col 2) every direction leads somewhere distinct
            env.pos = 6;
            env.done = false;
            let step = env.step(ActionId(1)).unwrap();
            match step.next_state {
                10 => counts[0] += 1,
                5 => counts[1] += 1,
                7 => counts[2] += 1,
                other => panic!("unexpected cell {other}"),
            }
        }
        for c in counts {
            assert!(
                (c as f64 / trials as f64 - 1.0 / 3.0).abs() < 0.01,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn slippery_rows_sum_exactly() {
        let mdp = FrozenLake::new(true, 0).tables();
        for s in 0..16 {
            for a in 0..4 {
                let sum: f64 = mdp.transition_row(s, a).iter().sum();
                assert!((sum - 1.0).abs() < 1e-15);
            }
        }
    }
}
