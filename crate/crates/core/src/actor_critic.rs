//! Online actor-critic learner shared by the victim, the jammer and the
//! victim's imitation jammer.
//!
//! The actor maps a flattened observation matrix to softmax scores over
//! channels; the critic maps it to a scalar value. Both are updated once per
//! slot from the one-step TD error `r + γ·V(next) − V(now)`.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, softmax, Mlp};

/// Sliding `N × depth` memory of sensed feedback, newest column first.
///
/// Each column holds at most one nonzero: the reward observed on the
/// channel chosen in that slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    n_channels: usize,
    depth: usize,
    columns: VecDeque<Option<(usize, f64)>>,
}

impl ObservationMatrix {
    pub fn new(n_channels: usize, depth: usize) -> Self {
        Self { n_channels, depth, columns: VecDeque::from(vec![None; depth]) }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn input_size(&self) -> usize {
        self.n_channels * self.depth
    }

    /// Adds a new column with `value` at `channel`, dropping the oldest.
    pub fn push(&mut self, channel: usize, value: f64) {
        debug_assert!(channel < self.n_channels);
        debug_assert!([1.0, -1.0, 0.5, -0.5].contains(&value), "unexpected observation value {value}");
        self.columns.pop_back();
        self.columns.push_front(Some((channel, value)));
    }

    /// Adds an all-zero column.
    pub fn push_empty(&mut self) {
        self.columns.pop_back();
        self.columns.push_front(None);
    }

    pub fn clear(&mut self) {
        self.columns.iter_mut().for_each(|c| *c = None);
    }

    /// Entry of the column `age` slots old (0 = newest).
    pub fn column(&self, age: usize) -> Option<(usize, f64)> {
        self.columns[age]
    }

    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.columns
            .iter()
            .enumerate()
            .filter_map(|(age, c)| c.map(|(ch, v)| (age * self.n_channels + ch, v)))
            .collect()
    }

    /// Row-per-channel dense view: `dense()[channel][age]`.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.depth]; self.n_channels];
        for (age, c) in self.columns.iter().enumerate() {
            if let Some((ch, v)) = c {
                m[*ch][age] = *v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: usize,
    /// Whether the action is the policy's argmax rather than an exploration draw.
    pub greedy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub net: Mlp,
    pub learning_rate: f64,
    /// Weight of the policy-entropy bonus added to each update.
    pub entropy_weight: f64,
}

impl PolicyNetwork {
    fn input(&self, obs: &ObservationMatrix) -> Result<Vec<(usize, f64)>> {
        if obs.input_size() != self.net.input_size() {
            return Err(Error::DimensionMismatch { expected: self.net.input_size(), got: obs.input_size() });
        }
        Ok(obs.sparse())
    }

    pub fn scores(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        let x = self.input(obs)?;
        Ok(softmax(&self.net.forward(&x)?.output))
    }

    /// ε-greedy over the softmax scores; returns the decision and the scores.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &ObservationMatrix,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(Decision, Vec<f64>)> {
        let scores = self.scores(obs)?;
        Ok((epsilon_greedy(&scores, epsilon, rng), scores))
    }

    /// `∇_θ log π(action | obs)`.
    pub fn log_prob_gradient(&self, obs: &ObservationMatrix, action: usize) -> Result<Vec<f64>> {
        let x = self.input(obs)?;
        let acts = self.net.forward(&x)?;
        let grad = log_prob_output_grad(&acts.output, action);
        let deltas = self.net.deltas(&acts, &grad);
        Ok(self.net.gradient(&x, &acts, &deltas))
    }

    /// One ascent step `θ ← θ + α·(δ·∇ log π(action | obs) + β·∇H(π))`,
    /// where `β` is the entropy weight (zero by default).
    pub fn update(&mut self, td_error: f64, obs: &ObservationMatrix, action: usize) -> Result<()> {
        if !td_error.is_finite() {
            return Err(Error::Diverged);
        }
        if td_error == 0.0 && self.entropy_weight == 0.0 {
            return Ok(());
        }
        if action >= self.net.output_size() {
            return Err(Error::ChannelOutOfRange { index: action, n_channels: self.net.output_size() });
        }
        let x = self.input(obs)?;
        let acts = self.net.forward(&x)?;
        let mut grad = log_prob_output_grad(&acts.output, action);
        if self.entropy_weight == 0.0 {
            let deltas = self.net.deltas(&acts, &grad);
            if deltas.iter().flatten().any(|d| !d.is_finite()) {
                return Err(Error::Diverged);
            }
            self.net.apply(&x, &acts, &deltas, self.learning_rate * td_error);
            return Ok(());
        }
        let p = softmax(&acts.output);
        let entropy: f64 = -p.iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum::<f64>();
        for (g, &q) in grad.iter_mut().zip(&p) {
            let dh = if q > 0.0 { -q * (q.ln() + entropy) } else { 0.0 };
            *g = td_error * *g + self.entropy_weight * dh;
        }
        let deltas = self.net.deltas(&acts, &grad);
        if deltas.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::Diverged);
        }
        self.net.apply(&x, &acts, &deltas, self.learning_rate);
        Ok(())
    }
}

fn log_prob_output_grad(logits: &[f64], action: usize) -> Vec<f64> {
    let mut g: Vec<f64> = softmax(logits).into_iter().map(|p| -p).collect();
    g[action] += 1.0;
    g
}

pub fn epsilon_greedy<R: Rng + ?Sized>(scores: &[f64], epsilon: f64, rng: &mut R) -> Decision {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Decision { action: rng.gen_range(0..scores.len()), greedy: false }
    } else {
        Decision { action: argmax(scores), greedy: true }
    }
}

/// Draws an action from the score distribution itself.
pub fn sample_scores<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in scores.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last action with nonzero mass
    scores.iter().rposition(|&p| p > 0.0).unwrap_or(scores.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork {
    pub net: Mlp,
    pub learning_rate: f64,
    pub discount: f64,
}

impl ValueNetwork {
    fn input(&self, obs: &ObservationMatrix) -> Result<Vec<(usize, f64)>> {
        if obs.input_size() != self.net.input_size() {
            return Err(Error::DimensionMismatch { expected: self.net.input_size(), got: obs.input_size() });
        }
        Ok(obs.sparse())
    }

    pub fn value(&self, obs: &ObservationMatrix) -> Result<f64> {
        Ok(self.net.forward(&self.input(obs)?)?.output[0])
    }

    pub fn td_error(&self, reward: f64, obs: &ObservationMatrix, next: &ObservationMatrix) -> Result<f64> {
        Ok(reward + self.discount * self.value(next)? - self.value(obs)?)
    }

    /// TD error with the successor value fixed at zero.
    pub fn td_error_terminal(&self, reward: f64, obs: &ObservationMatrix) -> Result<f64> {
        Ok(reward - self.value(obs)?)
    }

    pub fn value_gradient(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        let x = self.input(obs)?;
        let acts = self.net.forward(&x)?;
        let deltas = self.net.deltas(&acts, &[1.0]);
        Ok(self.net.gradient(&x, &acts, &deltas))
    }

    /// Semi-gradient descent on `½δ²`: the bootstrap target is held fixed,
    /// so the step is `μ ← μ + lr·δ·∇V(obs)`.
    pub fn update(&mut self, td_error: f64, obs: &ObservationMatrix) -> Result<()> {
        if !td_error.is_finite() {
            return Err(Error::Diverged);
        }
        if td_error == 0.0 {
            return Ok(());
        }
        let x = self.input(obs)?;
        let acts = self.net.forward(&x)?;
        let deltas = self.net.deltas(&acts, &[1.0]);
        if deltas.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::Diverged);
        }
        self.net.apply(&x, &acts, &deltas, self.learning_rate * td_error);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentParams {
    pub hidden: [usize; 2],
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub entropy_weight: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self { hidden: [128, 64], actor_lr: 3e-3, critic_lr: 3e-3, discount: 0.9, entropy_weight: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticAgent {
    pub actor: PolicyNetwork,
    pub critic: ValueNetwork,
}

impl ActorCriticAgent {
    pub fn new<R: Rng + ?Sized>(n_channels: usize, depth: usize, params: &AgentParams, rng: &mut R) -> Result<Self> {
        let input = n_channels * depth;
        let [h1, h2] = params.hidden;
        let actor = PolicyNetwork {
            net: Mlp::new(&[input, h1, h2, n_channels], rng)?,
            learning_rate: params.actor_lr,
            entropy_weight: params.entropy_weight,
        };
        let critic = ValueNetwork {
            net: Mlp::new(&[input, h1, h2, 1], rng)?,
            learning_rate: params.critic_lr,
            discount: params.discount,
        };
        Ok(Self { actor, critic })
    }

    pub fn n_actions(&self) -> usize {
        self.actor.net.output_size()
    }

    /// Critic then actor update for one transition; returns the TD error.
    pub fn learn(
        &mut self,
        obs: &ObservationMatrix,
        action: usize,
        reward: f64,
        next: &ObservationMatrix,
    ) -> Result<f64> {
        let delta = self.critic.td_error(reward, obs, next)?;
        self.critic.update(delta, obs)?;
        self.actor.update(delta, obs, action)?;
        Ok(delta)
    }

    pub fn snapshot(&self) -> ParameterBlob {
        ParameterBlob {
            actor_sizes: self.actor.net.sizes().to_vec(),
            critic_sizes: self.critic.net.sizes().to_vec(),
            actor: self.actor.net.params().to_vec(),
            critic: self.critic.net.params().to_vec(),
        }
    }

    pub fn restore(&mut self, blob: &ParameterBlob) -> Result<()> {
        if blob.actor_sizes != self.actor.net.sizes() {
            return Err(Error::ArchitectureMismatch {
                expected: self.actor.net.sizes().to_vec(),
                got: blob.actor_sizes.clone(),
            });
        }
        if blob.critic_sizes != self.critic.net.sizes() {
            return Err(Error::ArchitectureMismatch {
                expected: self.critic.net.sizes().to_vec(),
                got: blob.critic_sizes.clone(),
            });
        }
        self.actor.net.params_mut().copy_from_slice(&blob.actor);
        self.critic.net.params_mut().copy_from_slice(&blob.critic);
        Ok(())
    }

    /// Builds an agent directly from a blob with the given learning settings.
    pub fn from_blob(blob: &ParameterBlob, params: &AgentParams) -> Result<Self> {
        Ok(Self {
            actor: PolicyNetwork {
                net: Mlp::from_params(&blob.actor_sizes, blob.actor.clone())?,
                learning_rate: params.actor_lr,
                entropy_weight: params.entropy_weight,
            },
            critic: ValueNetwork {
                net: Mlp::from_params(&blob.critic_sizes, blob.critic.clone())?,
                learning_rate: params.critic_lr,
                discount: params.discount,
            },
        })
    }
}

pub const BLOB_FORMAT_VERSION: u8 = 1;

/// Flat actor and critic parameters with their layer sizes.
///
/// Binary layout (little-endian): version byte, actor layer count (u32),
/// actor sizes (u32 each), critic layer count (u32), critic sizes (u32
/// each), then actor parameters and critic parameters as f64.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBlob {
    pub actor_sizes: Vec<usize>,
    pub critic_sizes: Vec<usize>,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl ParameterBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 8 * (self.actor.len() + self.critic.len()) + 64);
        out.push(BLOB_FORMAT_VERSION);
        for sizes in [&self.actor_sizes, &self.critic_sizes] {
            out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
            for &s in sizes.iter() {
                out.extend_from_slice(&(s as u32).to_le_bytes());
            }
        }
        for v in self.actor.iter().chain(&self.critic) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0 };
        let version = cur.take(1)?[0];
        if version != BLOB_FORMAT_VERSION {
            return Err(Error::VersionMismatch { expected: BLOB_FORMAT_VERSION, found: version });
        }
        let actor_sizes = cur.sizes()?;
        let critic_sizes = cur.sizes()?;
        let n_actor = param_count(&actor_sizes)?;
        let n_critic = param_count(&critic_sizes)?;
        let actor = cur.floats(n_actor)?;
        let critic = cur.floats(n_critic)?;
        if cur.at != bytes.len() {
            return Err(Error::Malformed(format!("{} trailing bytes in parameter blob", bytes.len() - cur.at)));
        }
        Ok(Self { actor_sizes, critic_sizes, actor, critic })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingCheckpoint(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

fn param_count(sizes: &[usize]) -> Result<usize> {
    if sizes.len() < 2 {
        return Err(Error::Malformed(format!("layer list {sizes:?} too short")));
    }
    Ok(sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(Error::Malformed("truncated parameter blob".into())),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn sizes(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(Error::Malformed(format!("implausible layer count {n}")));
        }
        (0..n).map(|_| self.u32().map(|v| v as usize)).collect()
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Malformed("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Sparse view helper for callers holding a raw input vector.
pub fn dense_to_sparse(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect()
}
