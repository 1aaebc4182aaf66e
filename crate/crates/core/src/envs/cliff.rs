//! 4×12 cliff gridworld.
//!
//! Start at the bottom-left, goal at the bottom-right, the cells between them
//! are the cliff. Actions: 0 up, 1 right, 2 down, 3 left. Every move costs
//! −1; stepping onto the cliff costs −100 and returns the agent to the start
//! without ending the episode. Moves into the border leave the agent in place.

use super::{check_action, DiscreteEnv, Environment, StateKind, Step};
use crate::stochmax::ActionId;
use crate::{Error, FiniteMdp, Result};

const ROWS: usize = 4;
const COLS: usize = 12;

#[derive(Debug, Clone)]
pub struct CliffWalking {
    pos: usize,
    done: bool,
}

impl Default for CliffWalking {
    fn default() -> Self {
        Self::new()
    }
}

impl CliffWalking {
    pub const START: usize = (ROWS - 1) * COLS;
    pub const GOAL: usize = ROWS * COLS - 1;
    pub const N_STATES: usize = ROWS * COLS;

    pub fn new() -> Self {
        Self {
            pos: Self::START,
            done: false,
        }
    }

    pub fn is_cliff(state: usize) -> bool {
        state > Self::START && state < Self::GOAL
    }

    /// Deterministic successor and reward of `action` from `state`.
    pub fn transition(state: usize, action: usize) -> (usize, f64) {
        let (r, c) = (state / COLS, state % COLS);
        let (r, c) = match action {
            0 => (r.saturating_sub(1), c),
            1 => (r, (c + 1).min(COLS - 1)),
            2 => ((r + 1).min(ROWS - 1), c),
            _ => (r, c.saturating_sub(1)),
        };
        let next = r * COLS + c;
        if Self::is_cliff(next) {
            (Self::START, -100.0)
        } else {
            (next, -1.0)
        }
    }
}

impl Environment for CliffWalking {
    type State = usize;

    fn n_actions(&self) -> usize {
        4
    }

    fn state_kind(&self) -> StateKind {
        StateKind::Discrete(Self::N_STATES)
    }

    fn reset(&mut self) -> usize {
        self.pos = Self::START;
        self.done = false;
        self.pos
    }

    fn step(&mut self, action: ActionId) -> Result<Step<usize>> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        check_action(action, 4)?;
        let (next, reward) = Self::transition(self.pos, action.index());
        self.pos = next;
        self.done = next == Self::GOAL;
        Ok(Step {
            next_state: next,
            reward,
            terminated: self.done,
            truncated: false,
        })
    }
}

impl DiscreteEnv for CliffWalking {
    fn n_states(&self) -> usize {
        Self::N_STATES
    }

    fn tables(&self) -> FiniteMdp {
        let (ns, na) = (Self::N_STATES, 4);
        let mut rewards = vec![0.0; ns * na];
        let mut p = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                let (next, r) = if s == Self::GOAL {
                    (s, 0.0)
                } else {
                    Self::transition(s, a)
                };
                rewards[s * na + a] = r;
                p[(s * na + a) * ns + next] = 1.0;
            }
        }
        let mut terminal = vec![false; ns];
        terminal[Self::GOAL] = true;
        FiniteMdp::new(ns, na, rewards, p)
            .and_then(|m| m.with_terminals(terminal))
            .expect("cliff tables are well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Fewest moves from start to goal avoiding the cliff, by BFS over the grid.
    fn bfs_moves() -> usize {
        let mut dist = vec![usize::MAX; CliffWalking::N_STATES];
        let mut queue = VecDeque::from([CliffWalking::START]);
        dist[CliffWalking::START] = 0;
        while let Some(s) = queue.pop_front() {
            for a in 0..4 {
                let (next, r) = CliffWalking::transition(s, a);
                if r == -1.0 && dist[next] == usize::MAX {
                    dist[next] = dist[s] + 1;
                    queue.push_back(next);
                }
            }
        }
        dist[CliffWalking::GOAL]
    }

    #[test]
    fn optimal_return_is_minus_13() {
        assert_eq!(bfs_moves(), 13);
        let mut env = CliffWalking::new();
        env.reset();
        let mut ret = 0.0;
        let plan = std::iter::once(0)
            .chain(std::iter::repeat_n(1, 11))
            .chain(std::iter::once(2));
        let mut last = None;
        for a in plan {
            let step = env.step(ActionId(a)).unwrap();
            ret += step.reward;
            last = Some(step);
        }
        assert!(last.unwrap().terminated);
        assert_eq!(ret, -13.0);
    }

    #[test]
    fn walls_clamp() {
        let mut env = CliffWalking::new();
        let s = env.reset();
        let step = env.step(ActionId(3)).unwrap();
        assert_eq!((step.next_state, step.reward), (s, -1.0));
        let step = env.step(ActionId(2)).unwrap();
        assert_eq!((step.next_state, step.reward), (s, -1.0));
    }

    #[test]
    fn cliff_teleports() {
        let mut env = CliffWalking::new();
        env.reset();
        env.step(ActionId(0)).unwrap();
        env.step(ActionId(1)).unwrap();
        let step = env.step(ActionId(2)).unwrap();
        assert_eq!(step.reward, -100.0);
        assert_eq!(step.next_state, CliffWalking::START);
        assert!(!step.terminated);
    }

    #[test]
    fn step_after_goal_fails() {
        let mut env = CliffWalking::new();
        env.reset();
        for a in [0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2] {
            env.step(ActionId(a)).unwrap();
        }
        assert_eq!(env.step(ActionId(0)), Err(Error::StepAfterDone));
        assert_eq!(env.reset(), CliffWalking::START);
        assert!(env.step(ActionId(4)).is_err());
    }

    #[test]
    fn tables_value_iteration_matches_bfs() {
        let mdp = CliffWalking::new().tables();
        let q = mdp.optimal_q(0.999, 1e-12, 1_000_000).unwrap();
        let mut s = CliffWalking::START;
        let mut moves = 0;
        while s != CliffWalking::GOAL && moves < 100 {
            s = CliffWalking::transition(s, q.argmax_row(s).index()).0;
            moves += 1;
        }
        assert_eq!(moves, 13);
    }
}
