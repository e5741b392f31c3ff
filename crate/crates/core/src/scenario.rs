//! Pre-training and the per-slot experiment loop.
//!
//! Slot order, fixed for every scenario:
//! 1. scheduled events (attack onset, pattern change, defense start)
//! 2. the environment advances
//! 3. jammer, imitation attacker and victim commit their channels
//! 4. the transmission resolves
//! 5. victim feedback and learning
//! 6. jammer feedback, learning and schedule tick
//! 7. imitation feedback and learning
//! 8. defense and detector ticks
//! 9. the slot is logged

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::actor_critic::{ActorCriticAgent, Decision, ParameterBlob};
use crate::attacker::{AttackerState, BudgetState};
use crate::config::{CheckpointPaths, ExperimentConfig, Scenario};
use crate::defense::imitation::{imitation_select_rule, ChannelOracle, ImitationAttacker, ImitationRewardKind};
use crate::defense::orthogonal::{switch_defense_tick, train_orthogonal_pair, OrthoTrainResult, PolicyId};
use crate::defense::pid::PidConfig;
use crate::defense::{diversified_select, rank_channels};
use crate::detector::{detect, respond, Response};
use crate::env::ChannelPattern;
use crate::error::{Error, Result};
use crate::log::{DefenseKind, MetricsLog, SlotRecord};
use crate::metrics::RollingMean;
use crate::rng::{stream, substream, SimRng, Stream};
use crate::victim::VictimState;

/// Checkpoints a scenario run starts from.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub victim: ParameterBlob,
    pub attacker: Option<ParameterBlob>,
    pub imitation: Vec<(ImitationRewardKind, ParameterBlob)>,
    pub orthogonal: Option<[ParameterBlob; 2]>,
}

impl Pretrained {
    pub fn imitation_for(&self, kind: ImitationRewardKind) -> Option<&ParameterBlob> {
        self.imitation.iter().find(|(k, _)| *k == kind).map(|(_, b)| b)
    }

    /// Loads whatever `paths` names. Missing entries are only an error once
    /// a scenario needs them.
    pub fn load(paths: &CheckpointPaths) -> Result<Self> {
        let victim_path = paths.victim.as_ref().ok_or_else(|| Error::MissingCheckpoint("victim".into()))?;
        let load = |p: &Option<std::path::PathBuf>| p.as_ref().map(ParameterBlob::load).transpose();
        let orthogonal = match (load(&paths.orthogonal_1)?, load(&paths.orthogonal_2)?) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        };
        let mut imitation = Vec::new();
        if let Some(p) = &paths.imitation {
            for kind in ImitationRewardKind::ALL {
                let path = imitation_path(p, kind);
                if path.exists() {
                    imitation.push((kind, ParameterBlob::load(&path)?));
                }
            }
        }
        Ok(Self { victim: ParameterBlob::load(victim_path)?, attacker: load(&paths.attacker)?, imitation, orthogonal })
    }
}

/// Imitation checkpoints share a stem and differ by reward variant.
pub fn imitation_path(stem: &std::path::Path, kind: ImitationRewardKind) -> std::path::PathBuf {
    let name = stem.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = stem.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    stem.with_file_name(format!("{name}_{}{ext}", kind.as_str()))
}

fn victim_state(cfg: &ExperimentConfig, blob: &ParameterBlob, rng: SimRng) -> Result<VictimState> {
    let agent = ActorCriticAgent::from_blob(blob, &cfg.victim.agent)?;
    Ok(VictimState::new(agent, cfg.victim.memory_depth, cfg.victim.epsilon, rng))
}

fn imitation_agent(cfg: &ExperimentConfig, agent: ActorCriticAgent, kind: ImitationRewardKind, rng: SimRng) -> ImitationAttacker {
    ImitationAttacker::new(agent, cfg.imitation.memory_depth, kind, cfg.imitation.epsilon, rng)
}

/// Trains the victim from scratch with no jammer present. Training draws
/// actions from the softmax; the ε-uniform draws are not learned from.
pub fn pretrain_victim(cfg: &ExperimentConfig, seed: u64) -> Result<ParameterBlob> {
    let n = cfg.env.n_channels;
    let agent = ActorCriticAgent::new(n, cfg.victim.memory_depth, &cfg.victim.agent, &mut stream(seed, Stream::VictimInit))?;
    let mut victim = VictimState::new(agent, cfg.victim.memory_depth, cfg.victim.epsilon, substream(seed, Stream::VictimExplore, 1));
    victim.sample_actions = true;
    let mut env = cfg.env.build(substream(seed, Stream::Environment, 1))?;
    for _ in 0..cfg.pretrain.victim_slots {
        env.advance();
        victim.step(&env, None)?;
    }
    Ok(victim.agent.snapshot())
}

#[derive(Debug, Clone)]
pub struct AttackerPretraining {
    pub attacker: ParameterBlob,
    pub imitation: Vec<(ImitationRewardKind, ParameterBlob)>,
    /// Fraction of slots, over the final tenth, where the jammer picked
    /// the victim's channel.
    pub match_rate: f64,
}

/// Trains the jammer in listening mode against the deployed victim, and
/// alongside it one imitation attacker per reward variant on the victim's
/// side.
pub fn pretrain_attacker(cfg: &ExperimentConfig, victim_blob: &ParameterBlob, seed: u64) -> Result<AttackerPretraining> {
    let n = cfg.env.n_channels;
    let mut victim = victim_state(cfg, victim_blob, substream(seed, Stream::VictimExplore, 2))?;
    let agent = ActorCriticAgent::new(n, cfg.attacker.attacker.memory_depth, &cfg.attacker.agent, &mut stream(seed, Stream::AttackerInit))?;
    let mut attacker = AttackerState::new(agent, cfg.attacker.attacker, substream(seed, Stream::AttackerExplore, 1));
    attacker.sample_actions = true;
    let mut imitations = ImitationRewardKind::ALL
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let mut init = substream(seed, Stream::ImitationInit, k as u64);
            let agent = ActorCriticAgent::new(n, cfg.imitation.memory_depth, &cfg.imitation.agent, &mut init)?;
            let mut imit = imitation_agent(cfg, agent, kind, substream(seed, Stream::ImitationExplore, k as u64 + 1));
            imit.sample_actions = true;
            Ok(imit)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut env = cfg.env.build(substream(seed, Stream::Environment, 2))?;
    let tail = cfg.pretrain.attacker_slots - cfg.pretrain.attacker_slots / 10;
    let mut matches = 0usize;
    for t in 0..cfg.pretrain.attacker_slots {
        env.advance();
        let att = attacker.decide()?;
        for imit in &mut imitations {
            imit.predict()?;
        }
        let scores = victim.scores()?;
        let decision = victim.choose(&scores);
        let outcome = env.transmit(decision.action, att.jam)?;
        victim.observe(decision, &outcome)?;
        attacker.observe(&att, decision.action, outcome.was_good_pre_jam)?;
        if t >= tail && att.channel == decision.action {
            matches += 1;
        }
        let oracle = ChannelOracle { victim_channel_good: outcome.was_good_pre_jam };
        for imit in &mut imitations {
            imit.observe(decision.action, Some(oracle))?;
        }
    }
    Ok(AttackerPretraining {
        attacker: attacker.agent.snapshot(),
        imitation: imitations.iter().map(|i| (i.reward_kind, i.agent.snapshot())).collect(),
        match_rate: matches as f64 / (cfg.pretrain.attacker_slots - tail).max(1) as f64,
    })
}

pub fn pretrain_orthogonal(cfg: &ExperimentConfig, victim_blob: &ParameterBlob, seed: u64) -> Result<OrthoTrainResult> {
    train_orthogonal_pair(victim_blob, &cfg.victim, &cfg.env, &cfg.orthogonal, seed)
}

/// Everything a scenario might need, trained for one seed.
pub fn pretrain_all(cfg: &ExperimentConfig, seed: u64, with_orthogonal: bool) -> Result<(Pretrained, Option<OrthoTrainResult>)> {
    let victim = pretrain_victim(cfg, seed)?;
    let att = pretrain_attacker(cfg, &victim, seed)?;
    let ortho = if with_orthogonal { Some(pretrain_orthogonal(cfg, &victim, seed)?) } else { None };
    let orthogonal = ortho.as_ref().map(|o| [o.policy_1.clone(), o.policy_2.clone()]);
    Ok((Pretrained { victim, attacker: Some(att.attacker), imitation: att.imitation, orthogonal }, ortho))
}

struct Probe {
    trace: Vec<f64>,
    extensions: usize,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    pre: &'a Pretrained,
    seed: u64,
    env: ChannelPattern,
    victim: VictimState,
    attacker: Option<AttackerState>,
    imitation: Option<ImitationAttacker>,
    imitation_probs: Vec<f64>,
    pid: PidConfig,
    defense: DefenseKind,
    policy: PolicyId,
    ortho_clock: usize,
    /// Detector waiting for the accuracy drop that starts a probe.
    armed: bool,
    probe: Option<Probe>,
    rolling: RollingMean,
    /// Smoothed accuracy the detector sees.
    probe_rolling: RollingMean,
    rng: SimRng,
    log: MetricsLog,
}

impl Run<'_> {
    fn orthogonal(&self) -> Result<&[ParameterBlob; 2]> {
        self.pre.orthogonal.as_ref().ok_or_else(|| Error::MissingCheckpoint("orthogonal policy pair".into()))
    }

    fn engage_orthogonal(&mut self, t: usize) -> Result<()> {
        let blob = self.orthogonal()?[0].clone();
        self.victim.agent.restore(&blob)?;
        self.victim.learning = false;
        self.victim.epsilon = self.cfg.victim.defense_epsilon;
        self.defense = DefenseKind::Orthogonal;
        self.policy = PolicyId::One;
        self.ortho_clock = 0;
        self.log.event(t, "defense", "orthogonal");
        Ok(())
    }

    fn engage_diversified(&mut self, kind: DefenseKind, t: usize) {
        self.defense = kind;
        self.victim.epsilon = self.cfg.victim.defense_epsilon;
        if kind == DefenseKind::Pid {
            self.victim.partial_reward = self.cfg.pid.partial_reward;
        }
        self.log.event(t, "defense", kind.as_str());
    }

    fn scheduled(&mut self, t: usize) -> Result<()> {
        let s = self.cfg.schedule;
        let scenario = self.cfg.scenario;
        if t == s.attack_start {
            if scenario == Scenario::DetectEnvChange {
                let mut rng = stream(self.seed, Stream::Permutation);
                let mut perm: Vec<usize> = (0..self.env.n_channels()).collect();
                while perm.iter().enumerate().all(|(i, &p)| i == p) {
                    perm.shuffle(&mut rng);
                }
                self.log.event(t, "environment", format!("permutation {perm:?}"));
                self.env.set_permutation(perm)?;
            }
            if let Some(att) = self.attacker.as_mut() {
                if scenario == Scenario::BudgetedAttack {
                    att.budget = Some(BudgetState::new(self.cfg.attacker.budget));
                }
                att.start_sra(self.cfg.attacker.sra);
                self.log.event(t, "attack", "start");
            }
        }
        if t == s.defense_start {
            match scenario {
                Scenario::DefensePid => self.engage_diversified(DefenseKind::Pid, t),
                Scenario::DefenseImitation => self.engage_diversified(DefenseKind::Imitation, t),
                Scenario::DefenseOrthogonal => self.engage_orthogonal(t)?,
                Scenario::DetectEnvChange | Scenario::DetectAttack => self.armed = true,
                _ => {}
            }
        }
        Ok(())
    }

    fn choose(&mut self, imitation_action: Option<usize>) -> Result<Decision> {
        let scores = self.victim.scores()?;
        let d = self.victim.choose(&scores);
        if !d.greedy {
            return Ok(d);
        }
        let action = match self.defense {
            DefenseKind::None | DefenseKind::Orthogonal => return Ok(d),
            DefenseKind::Pid => {
                let probs = self.pid.probabilities(&self.victim.history);
                diversified_select(&rank_channels(&scores), &probs, &mut self.rng)?
            }
            DefenseKind::Imitation => {
                let predicted = imitation_action.ok_or_else(|| Error::MissingCheckpoint("imitation attacker".into()))?;
                imitation_select_rule(&rank_channels(&scores), predicted, &self.imitation_probs, &mut self.rng)?
            }
        };
        Ok(Decision { action, greedy: true })
    }

    fn defense_tick(&mut self, t: usize, accuracy_ma: f64, probe_ma: f64) -> Result<()> {
        if self.defense == DefenseKind::Orthogonal {
            self.ortho_clock += 1;
            let acc = self.victim.accuracy(self.cfg.orthogonal.switch_window)?;
            let next = switch_defense_tick(self.policy, acc, self.ortho_clock, &self.cfg.orthogonal);
            if next != self.policy {
                let blob = self.orthogonal()?[next.index() - 1].clone();
                self.victim.agent.restore(&blob)?;
                self.policy = next;
                self.log.event(t, "switch", format!("policy {}", next.index()));
            }
        }
        if self.armed && accuracy_ma < self.cfg.detector.trigger_drop {
            self.armed = false;
            self.engage_orthogonal(t)?;
            self.probe = Some(Probe { trace: Vec::with_capacity(self.cfg.detector.probe_duration), extensions: 0 });
            self.log.event(t, "probe", "start");
            return Ok(());
        }
        let Some(probe) = self.probe.as_mut() else { return Ok(()) };
        probe.trace.push(probe_ma);
        if probe.trace.len() < self.cfg.detector.probe_duration {
            return Ok(());
        }
        let decision = detect(&probe.trace, &self.cfg.detector)?;
        let extensions = probe.extensions;
        self.log.event(t, "detector", decision.as_str());
        match respond(decision, extensions, &self.cfg.detector) {
            Some(Response::ExtendProbe) => {
                self.probe = Some(Probe { trace: Vec::new(), extensions: extensions + 1 });
            }
            Some(Response::EngageImitation) => {
                self.probe = None;
                self.victim.agent.restore(&self.pre.victim)?;
                self.victim.learning = true;
                self.policy = PolicyId::One;
                self.engage_diversified(DefenseKind::Imitation, t);
            }
            Some(Response::RetrainVictim) => {
                self.probe = None;
                self.victim.agent.restore(&self.pre.victim)?;
                self.victim.learning = true;
                self.victim.sample_actions = true;
                self.victim.epsilon = self.cfg.victim.epsilon;
                self.defense = DefenseKind::None;
                self.log.event(t, "defense", "none");
            }
            None => self.probe = None,
        }
        Ok(())
    }

    fn slot(&mut self, t: usize) -> Result<()> {
        self.scheduled(t)?;
        let good = self.env.advance();
        let good_mask = good.states.iter().enumerate().fold(0u64, |m, (i, &g)| if g { m | 1 << i } else { m });

        let att = self.attacker.as_mut().map(|a| a.decide()).transpose()?;
        let imitation_action = self.imitation.as_mut().map(|i| i.predict()).transpose()?;
        let decision = self.choose(imitation_action)?;

        let jam = att.as_ref().and_then(|a| a.jam);
        let outcome = self.env.transmit(decision.action, jam)?;
        let step = self.victim.observe(decision, &outcome)?;

        let attacker_reward = match (self.attacker.as_mut(), att.as_ref()) {
            (Some(a), Some(d)) => {
                let r = a.observe(d, decision.action, outcome.was_good_pre_jam)?;
                a.tick()?;
                Some(r)
            }
            _ => None,
        };
        if let Some(imit) = self.imitation.as_mut() {
            imit.observe(decision.action, Some(ChannelOracle { victim_channel_good: outcome.was_good_pre_jam }))?;
        }

        let hit = if step.success { 1.0 } else { 0.0 };
        let accuracy_ma = self.rolling.push(hit);
        let probe_ma = self.probe_rolling.push(hit);
        let (defense, policy) = (self.defense, self.policy);
        let phase = self.attacker.as_ref().and_then(|a| a.phase());
        self.defense_tick(t, accuracy_ma, probe_ma)?;

        self.log.push(SlotRecord {
            slot: t as u64,
            good_mask,
            victim_action: decision.action,
            attacker_action: att.as_ref().map(|a| a.channel),
            jammed: jam,
            victim_reward: step.reward,
            attacker_reward,
            success: step.success,
            pre_jam_good: outcome.was_good_pre_jam,
            partial_reward: self.victim.partial_reward,
            defense,
            policy: if defense == DefenseKind::Orthogonal { policy.index() as u8 } else { 0 },
            phase,
            imitation_action,
        });
        Ok(())
    }
}

/// Runs `cfg.scenario` for `cfg.horizon` slots. Identical inputs give an
/// identical log.
pub fn run_scenario(cfg: &ExperimentConfig, seed: u64, pre: &Pretrained) -> Result<MetricsLog> {
    cfg.validate()?;
    let scenario = cfg.scenario;
    let attacker = if scenario.has_attacker() {
        let blob = pre.attacker.as_ref().ok_or_else(|| Error::MissingCheckpoint("attacker".into()))?;
        let agent = ActorCriticAgent::from_blob(blob, &cfg.attacker.agent)?;
        Some(AttackerState::new(agent, cfg.attacker.attacker, stream(seed, Stream::AttackerExplore)))
    } else {
        None
    };
    let imitation = if scenario.needs_imitation() {
        let kind = cfg.imitation.reward;
        let blob = pre
            .imitation_for(kind)
            .ok_or_else(|| Error::MissingCheckpoint(format!("imitation attacker ({})", kind.as_str())))?;
        let agent = ActorCriticAgent::from_blob(blob, &cfg.imitation.agent)?;
        Some(imitation_agent(cfg, agent, kind, stream(seed, Stream::ImitationExplore)))
    } else {
        None
    };
    if scenario.needs_orthogonal() && pre.orthogonal.is_none() {
        return Err(Error::MissingCheckpoint("orthogonal policy pair".into()));
    }
    let mut run = Run {
        cfg,
        pre,
        seed,
        env: cfg.env.build(stream(seed, Stream::Environment))?,
        victim: victim_state(cfg, &pre.victim, stream(seed, Stream::VictimExplore))?,
        attacker,
        imitation,
        imitation_probs: cfg.imitation.resolve_probs(cfg.env.n_channels)?,
        pid: cfg.pid.resolve(cfg.env.n_channels)?,
        defense: DefenseKind::None,
        policy: PolicyId::One,
        ortho_clock: 0,
        armed: false,
        probe: None,
        rolling: RollingMean::new(cfg.metrics.moving_average_window),
        probe_rolling: RollingMean::new(cfg.detector.window),
        rng: stream(seed, Stream::Defense),
        log: MetricsLog::new(cfg.env.n_channels, cfg.metrics.moving_average_window),
    };
    run.log.event(0, "scenario", format!("{} seed={seed}", scenario.as_str()));
    for t in 0..cfg.horizon {
        run.slot(t)?;
    }
    Ok(run.log)
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub slots: usize,
    pub mean_accuracy: f64,
    /// Mean success rate from the attack onset on.
    pub post_attack_accuracy: f64,
    /// Mean success rate over the final quarter of the run.
    pub final_accuracy: f64,
    /// Empirical CDF of post-attack moving-average accuracy at 0.2.
    pub cdf_at_0_2: f64,
    pub jam_ratio: f64,
    pub detection: Option<String>,
}

pub fn summarize(log: &MetricsLog, cfg: &ExperimentConfig) -> Result<RunSummary> {
    let n = log.len();
    let start = cfg.schedule.attack_start.min(n);
    let ma = log.accuracy_series();
    let post = &ma[start..];
    let cdf = crate::metrics::empirical_cdf(post)?;
    let jams = log.records[start..].iter().filter(|r| r.jammed.is_some()).count();
    Ok(RunSummary {
        slots: n,
        mean_accuracy: log.accuracy(0, n),
        post_attack_accuracy: log.accuracy(start, n),
        final_accuracy: log.accuracy(n - n / 4, n),
        cdf_at_0_2: cdf.eval(0.2),
        jam_ratio: jams as f64 / (n - start).max(1) as f64,
        detection: log.events_of("detector").last().map(|e| e.detail.clone()),
    })
}
