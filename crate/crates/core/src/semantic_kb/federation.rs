use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::d3ql::{argmax, Learner, LearnerConfig, Transition, WeightSnapshot};
use crate::exec::{self, Execution};
use crate::rng;

use super::dataset::{pick, DataItem};
use super::{KbError, KnowledgeBase};

/// Element-wise mean of weight snapshots with identical architectures.
///
/// Each element's values are sorted and averaged as offsets from their
/// minimum, so the result does not depend on the order of `models` and
/// identical inputs come back bit for bit.
pub fn fed_average(models: &[WeightSnapshot]) -> Result<WeightSnapshot, KbError> {
    let first = models.first().ok_or(KbError::NoParticipants)?;
    if models.iter().any(|m| m.arch != first.arch) {
        return Err(KbError::ArchitectureMismatch { version: 0 });
    }
    let n = models.len() as f64;
    let mut column = Vec::with_capacity(models.len());
    let params = (0..first.params.len())
        .map(|i| {
            column.clear();
            column.extend(models.iter().map(|m| m.params[i]));
            column.sort_by(f64::total_cmp);
            let lo = column[0];
            lo + column.iter().map(|x| x - lo).sum::<f64>() / n
        })
        .collect();
    Ok(WeightSnapshot {
        arch: first.arch.clone(),
        params,
    })
}

/// Contextual-bandit training on a local data stream: one-step episodes where
/// the action is the predicted semantic and the reward is 1 when correct.
pub fn local_train<R: Rng + ?Sized>(
    classifier: &mut Learner,
    data: &[DataItem],
    steps: usize,
    rng: &mut R,
) -> Result<(), KbError> {
    if data.is_empty() {
        return Ok(());
    }
    let n_actions = classifier.online().architecture().actions;
    for _ in 0..steps {
        let item = pick(data, rng);
        let eps = classifier.epsilon_at(classifier.steps());
        let action = if rng.gen::<f64>() < eps {
            rng.gen_range(0..n_actions)
        } else {
            classifier.greedy_action(&item.features)?
        };
        let reward = (action == item.true_semantic) as u8 as f64;
        classifier.remember(Transition {
            state: item.features.clone(),
            action,
            reward,
            next_state: item.features.clone(),
            terminal: true,
        });
        classifier.train(rng)?;
    }
    Ok(())
}

/// Fraction of `data` labelled correctly by the greedy policy of `classifier`.
pub fn accuracy(classifier: &Learner, data: &[DataItem]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .iter()
        .filter(|item| {
            classifier
                .online()
                .forward(&item.features)
                .map(|q| argmax(&q) == item.true_semantic)
                .unwrap_or(false)
        })
        .count();
    hits as f64 / data.len() as f64
}

/// A user device holding local data and a local classifier.
#[derive(Debug, Clone)]
pub struct FedUser {
    pub id: usize,
    pub classifier: Learner,
    pub data: Vec<DataItem>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionEvent {
    pub round: u64,
    pub user: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationRound {
    pub index: u64,
    pub participants: Vec<usize>,
    pub local_steps: usize,
    pub version: u64,
    pub events: Vec<DistributionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundConfig {
    /// User ids taking part; must be nonempty.
    pub participants: Vec<usize>,
    pub local_steps: usize,
    /// Slot stamped on the published KB.
    pub slot: u64,
}

/// Base station plus user devices running federated averaging.
#[derive(Debug, Clone)]
pub struct Federation {
    service_id: String,
    users: Vec<FedUser>,
    current: KnowledgeBase,
    rounds: u64,
    exec: Execution,
}

impl Federation {
    /// All users start from the same initial weights (version 0).
    pub fn new(
        service_id: impl Into<String>,
        d: usize,
        k: usize,
        config: LearnerConfig,
        user_data: Vec<Vec<DataItem>>,
        seed: u64,
    ) -> Result<Self, KbError> {
        let mut init_rng = rng::stream(seed, rng::FEDERATION, u64::MAX);
        let init = Learner::new(d, k, config.clone(), &mut init_rng)?;
        let current = KnowledgeBase {
            service_id: service_id.into(),
            version: 0,
            trained_at: 0,
            weights: WeightSnapshot::of(init.online()),
        };
        let users = user_data
            .into_iter()
            .enumerate()
            .map(|(id, data)| FedUser {
                id,
                classifier: Learner::with_network(init.online().clone(), config.clone()),
                data,
                rng: rng::stream(seed, rng::FEDERATION, id as u64),
            })
            .collect();
        Ok(Self {
            service_id: current.service_id.clone(),
            users,
            current,
            rounds: 0,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn users(&self) -> &[FedUser] {
        &self.users
    }

    pub fn current(&self) -> &KnowledgeBase {
        &self.current
    }

    /// Trains the listed users without aggregating.
    pub fn train_locally(&mut self, participants: &[usize], steps: usize) -> Result<(), KbError> {
        self.check_participants(participants)?;
        let chosen: Vec<FedUser> = participants.iter().map(|&p| self.users[p].clone()).collect();
        let trained = exec::try_map(self.exec, chosen, |mut u| {
            local_train(&mut u.classifier, &u.data, steps, &mut u.rng)?;
            Ok::<_, KbError>(u)
        })?;
        for u in trained {
            let id = u.id;
            self.users[id] = u;
        }
        Ok(())
    }

    fn check_participants(&self, participants: &[usize]) -> Result<(), KbError> {
        if participants.is_empty() {
            return Err(KbError::NoParticipants);
        }
        if let Some(&p) = participants.iter().find(|&&p| p >= self.users.len()) {
            return Err(KbError::UnknownUser(p));
        }
        Ok(())
    }

    /// Local training, aggregation at the base station, version bump and
    /// redistribution of the global model to the participants.
    pub fn round(&mut self, config: &RoundConfig) -> Result<(FederationRound, KnowledgeBase), KbError> {
        self.train_locally(&config.participants, config.local_steps)?;
        let snapshots: Vec<WeightSnapshot> = config
            .participants
            .iter()
            .map(|&p| WeightSnapshot::of(self.users[p].classifier.online()))
            .collect();
        let global = fed_average(&snapshots)?;
        let net = global.to_network()?;
        self.rounds += 1;
        let version = self.current.version + 1;
        let mut events = Vec::with_capacity(config.participants.len());
        for &p in &config.participants {
            self.users[p].classifier.load_network(net.clone())?;
            events.push(DistributionEvent {
                round: self.rounds,
                user: p,
                version,
            });
        }
        self.current = KnowledgeBase {
            service_id: self.service_id.clone(),
            version,
            trained_at: config.slot,
            weights: global,
        };
        let round = FederationRound {
            index: self.rounds,
            participants: config.participants.clone(),
            local_steps: config.local_steps,
            version,
            events,
        };
        Ok((round, self.current.clone()))
    }
}
