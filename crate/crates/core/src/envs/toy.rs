use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{StepResult, VectorEnv};

/// Velocity retained per step.
const DAMPING: f64 = 0.8;
/// Velocity gained per unit of action per step.
const ACCEL: f64 = 0.05;
/// Observed velocities are scaled so every relevant feature is O(1).
const VEL_OBS_SCALE: f64 = 4.0;
const CONTROL_COST: f64 = 0.05;
/// Reward sharpness: `exp(-REWARD_SHARPNESS * distance)`.
const REWARD_SHARPNESS: f64 = 5.0;
/// Per-step rewards reach up to this value. With a fixed SAC temperature of
/// 0.2, rewards near 1 per step are swamped by the entropy bonus.
const REWARD_SCALE: f64 = 10.0;

fn shaped_reward(dist: f64, action: &[f64]) -> f64 {
    let effort: f64 = action.iter().map(|a| a.clamp(-1.0, 1.0).powi(2)).sum::<f64>()
        / action.len() as f64;
    REWARD_SCALE * ((-REWARD_SHARPNESS * dist).exp() - CONTROL_COST * effort)
}

/// Damped point mass in the 4-D unit cube that must reach a random goal.
///
/// Observation (8): goal - position (4), scaled velocity (4). Action (4):
/// acceleration in `[-1, 1]`. Every observed feature is needed to act well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassReach {
    pos: [f64; PointMassReach::DIM],
    vel: [f64; PointMassReach::DIM],
    goal: [f64; PointMassReach::DIM],
    /// Goals for the later segments of the episode.
    pending_goals: Vec<[f64; PointMassReach::DIM]>,
    t: usize,
}

impl PointMassReach {
    pub const DIM: usize = 4;
    pub const HORIZON: usize = 100;
    /// The goal jumps to a fresh random location this often.
    pub const GOAL_PERIOD: usize = 25;

    pub fn new() -> Self {
        Self {
            pos: [0.0; Self::DIM],
            vel: [0.0; Self::DIM],
            goal: [0.0; Self::DIM],
            pending_goals: Vec::new(),
            t: 0,
        }
    }

    /// Place the mass at rest at `pos` with the given goal.
    pub fn set_state(&mut self, pos: [f64; Self::DIM], goal: [f64; Self::DIM]) {
        self.pos = pos;
        self.vel = [0.0; Self::DIM];
        self.goal = goal;
        self.pending_goals.clear();
        self.t = 0;
    }

    pub fn distance(&self) -> f64 {
        self.goal
            .iter()
            .zip(&self.pos)
            .map(|(g, p)| (g - p).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn observe(&self) -> Vec<f64> {
        let offset = self.goal.iter().zip(&self.pos).map(|(g, p)| g - p);
        let vel = self.vel.iter().map(|v| v * VEL_OBS_SCALE);
        offset.chain(vel).collect()
    }
}

impl Default for PointMassReach {
    fn default() -> Self {
        Self::new()
    }
}

impl VectorEnv for PointMassReach {
    fn state_dim(&self) -> usize {
        2 * Self::DIM
    }

    fn action_dim(&self) -> usize {
        Self::DIM
    }

    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); Self::DIM]
    }

    fn horizon(&self) -> usize {
        Self::HORIZON
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let pos = std::array::from_fn(|_| rng.random_range(-0.9..0.9));
        let mut goals: Vec<[f64; Self::DIM]> = (0..Self::HORIZON / Self::GOAL_PERIOD)
            .map(|_| std::array::from_fn(|_| rng.random_range(-0.8..0.8)))
            .collect();
        self.set_state(pos, goals[0]);
        goals.remove(0);
        goals.reverse();
        self.pending_goals = goals;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        for i in 0..Self::DIM {
            let a = action[i].clamp(-1.0, 1.0);
            self.vel[i] = DAMPING * self.vel[i] + ACCEL * a;
            self.pos[i] += self.vel[i];
            if self.pos[i].abs() > 1.0 {
                self.pos[i] = self.pos[i].clamp(-1.0, 1.0);
                self.vel[i] = 0.0;
            }
        }
        self.t += 1;
        let reward = shaped_reward(self.distance(), action);
        if self.t % Self::GOAL_PERIOD == 0 {
            if let Some(g) = self.pending_goals.pop() {
                self.goal = g;
            }
        }
        StepResult {
            reward,
            state: self.observe(),
            terminated: false,
            truncated: self.t >= Self::HORIZON,
        }
    }

    fn scripted_action(&self) -> Vec<f64> {
        (0..Self::DIM)
            .map(|i| (1.5 * (self.goal[i] - self.pos[i]) - 6.0 * self.vel[i]).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Damped 3-D mass tracking a sinusoidal reference trajectory.
///
/// Observation (12): position (3), scaled velocity (3), reference - position
/// (3), scaled reference velocity (3). Action (3): acceleration in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTracker {
    pos: [f64; 3],
    vel: [f64; 3],
    phase: [f64; 3],
    freq: [f64; 3],
    t: usize,
}

impl LinearTracker {
    pub const HORIZON: usize = 200;
    const AMPLITUDE: f64 = 0.5;

    pub fn new() -> Self {
        Self {
            pos: [0.0; 3],
            vel: [0.0; 3],
            phase: [0.0; 3],
            freq: [0.1; 3],
            t: 0,
        }
    }

    fn reference(&self, t: usize) -> [f64; 3] {
        std::array::from_fn(|i| Self::AMPLITUDE * (self.freq[i] * t as f64 + self.phase[i]).sin())
    }

    fn reference_velocity(&self, t: usize) -> [f64; 3] {
        let now = self.reference(t);
        let next = self.reference(t + 1);
        std::array::from_fn(|i| next[i] - now[i])
    }

    pub fn tracking_error(&self) -> f64 {
        let r = self.reference(self.t);
        (0..3).map(|i| (r[i] - self.pos[i]).powi(2)).sum::<f64>().sqrt()
    }

    fn observe(&self) -> Vec<f64> {
        let r = self.reference(self.t);
        let rv = self.reference_velocity(self.t);
        let mut obs = Vec::with_capacity(12);
        obs.extend_from_slice(&self.pos);
        obs.extend(self.vel.iter().map(|v| v * VEL_OBS_SCALE));
        obs.extend((0..3).map(|i| r[i] - self.pos[i]));
        obs.extend(rv.iter().map(|v| v * VEL_OBS_SCALE));
        obs
    }
}

impl Default for LinearTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl VectorEnv for LinearTracker {
    fn state_dim(&self) -> usize {
        12
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); 3]
    }

    fn horizon(&self) -> usize {
        Self::HORIZON
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.pos = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        self.vel = [0.0; 3];
        self.phase = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
        self.freq = std::array::from_fn(|_| rng.random_range(0.05..0.12));
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        for i in 0..3 {
            let a = action[i].clamp(-1.0, 1.0);
            self.vel[i] = DAMPING * self.vel[i] + ACCEL * a;
            self.pos[i] = (self.pos[i] + self.vel[i]).clamp(-2.0, 2.0);
        }
        self.t += 1;
        StepResult {
            reward: shaped_reward(self.tracking_error(), action),
            state: self.observe(),
            terminated: false,
            truncated: self.t >= Self::HORIZON,
        }
    }

    fn scripted_action(&self) -> Vec<f64> {
        let r = self.reference(self.t + 1);
        let rv = self.reference_velocity(self.t + 1);
        (0..3)
            .map(|i| {
                // Feed-forward the reference velocity, then PD on the error.
                let ff = (rv[i] - DAMPING * self.vel[i]) / ACCEL;
                (ff + 1.5 * (r[i] - self.pos[i]) - 6.0 * (self.vel[i] - rv[i])).clamp(-1.0, 1.0)
            })
            .collect()
    }
}
