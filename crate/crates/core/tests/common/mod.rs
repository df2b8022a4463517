//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use kbmano::d3ql::{Architecture, QNetwork};
use kbmano::mac_env::{Action, SemanticAssignment};
use kbmano::mano::{select_strategy, LayerProfile, ManoError, Strategy, TaskProfile};
use kbmano::oracle::{Objective, OracleProblem, Schedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line forward pass over the flat parameter vector, written
/// independently of the library's layer structs.
pub fn reference_forward(arch: &Architecture, params: &[f64], state: &[f64]) -> Vec<f64> {
    let mut pos = 0;
    let mut dense = |x: &[f64], out: usize, relu: bool| -> Vec<f64> {
        let inp = x.len();
        let w = &params[pos..pos + out * inp];
        let b = &params[pos + out * inp..pos + out * inp + out];
        pos += out * inp + out;
        (0..out)
            .map(|o| {
                let mut s = b[o];
                for i in 0..inp {
                    s += w[o * inp + i] * x[i];
                }
                if relu { s.max(0.0) } else { s }
            })
            .collect()
    };
    let mut h = state.to_vec();
    for &width in &arch.hidden {
        h = dense(&h, width, true);
    }
    let v = dense(&h, 1, false)[0];
    let a = dense(&h, arch.actions, false);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    a.iter().map(|x| v + x - mean).collect()
}

/// Smallest |pre-activation| of any trunk unit; central differences are only
/// meaningful away from the rectifier's kink.
pub fn kink_distance(arch: &Architecture, params: &[f64], state: &[f64]) -> f64 {
    let mut pos = 0;
    let mut h = state.to_vec();
    let mut min = f64::INFINITY;
    for &width in &arch.hidden {
        let inp = h.len();
        let pre: Vec<f64> = (0..width)
            .map(|o| params[pos + width * inp + o] + (0..inp).map(|i| params[pos + o * inp + i] * h[i]).sum::<f64>())
            .collect();
        pos += width * inp + width;
        min = pre.iter().fold(min, |m, v| m.min(v.abs()));
        h = pre.iter().map(|v| v.max(0.0)).collect();
    }
    min
}

pub fn random_arch(rng: &mut ChaCha8Rng) -> Architecture {
    let input = rng.gen_range(2..6);
    let depth = rng.gen_range(1..3);
    let hidden = (0..depth).map(|_| rng.gen_range(3..9)).collect();
    Architecture::new(input, hidden, rng.gen_range(2..5))
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 { 0.0 } else { diff / scale }
}

pub fn finite_difference_check(arch: Architecture, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = QNetwork::new(arch.clone(), &mut rng).unwrap();
    let params = net.params();
    let states: Vec<Vec<f64>> = (0..4)
        .map(|_| loop {
            let s = random_state(&mut rng, arch.input);
            if kink_distance(&arch, &params, &s) > 1e-3 {
                break s;
            }
        })
        .collect();
    let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
    let actions: Vec<usize> = (0..4).map(|_| rng.gen_range(0..arch.actions)).collect();
    let targets: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let (_, analytic) = net.loss_gradient(&refs, &actions, &targets).unwrap();

    // Central differences of an independently computed loss.
    let loss = |p: &[f64]| -> f64 {
        refs.iter()
            .zip(&actions)
            .zip(&targets)
            .map(|((s, &a), &y)| (reference_forward(&arch, p, s)[a] - y).powi(2))
            .sum::<f64>()
            / refs.len() as f64
    };
    let h = 1e-5;
    let base = net.params();
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += h;
            let up = loss(&p);
            p[i] -= 2.0 * h;
            let down = loss(&p);
            (up - down) / (2.0 * h)
        })
        .collect();
    relative_error(&analytic, &numeric)
}

/// Per-user moves in lexicographic order: idle, sense by channel, transmit by channel.
pub fn moves(c: usize) -> Vec<Option<Action>> {
    let mut m = vec![None];
    m.extend((0..c).map(|ch| Some(Action::sense(ch))));
    m.extend((0..c).map(|ch| Some(Action::transmit(ch))));
    m
}

pub fn score(p: &OracleProblem, schedule: &[Option<Action>]) -> u32 {
    let mut load = vec![0; p.n_channels];
    for a in schedule.iter().flatten() {
        if a.is_transmit() {
            load[a.channel] += 1;
        }
    }
    let winners: Vec<usize> = (0..schedule.len())
        .filter(|&u| matches!(schedule[u], Some(a) if a.is_transmit() && load[a.channel] == 1))
        .collect();
    match p.objective {
        Objective::MaxTransmissions => winners.len() as u32,
        Objective::MaxDistinctSemantics => {
            let group = |u: usize| p.groups.iter().position(|g| g.contains(&u)).unwrap();
            winners
                .iter()
                .map(|&u| (group(u), p.assignment.per_user_semantic[u]))
                .collect::<BTreeSet<_>>()
                .len() as u32
        }
    }
}

/// Walks all (2C + 1)^N joint actions; the first maximum met is the
/// lexicographically smallest.
pub fn naive(p: &OracleProblem) -> (u32, Schedule) {
    fn rec(p: &OracleProblem, m: &[Option<Action>], cur: &mut Schedule, best: &mut Option<(u32, Schedule)>) {
        if cur.len() == p.assignment.per_user_semantic.len() {
            let v = score(p, cur);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, cur.clone()));
            }
            return;
        }
        for mv in m {
            cur.push(*mv);
            rec(p, m, cur, best);
            cur.pop();
        }
    }
    let mut best = None;
    rec(p, &moves(p.n_channels), &mut Vec::new(), &mut best);
    best.unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> OracleProblem {
    let n = rng.gen_range(1..=6);
    let c = rng.gen_range(1..=2);
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for u in 1..n {
        if rng.gen_bool(0.5) {
            groups.push(vec![u]);
        } else {
            groups.last_mut().unwrap().push(u);
        }
    }
    OracleProblem {
        assignment: SemanticAssignment {
            per_user_semantic: (0..n).map(|_| rng.gen_range(0..3)).collect(),
        },
        groups,
        n_channels: c,
        objective: if rng.gen_bool(0.5) { Objective::MaxTransmissions } else { Objective::MaxDistinctSemantics },
    }
}

pub fn task(layers: &[(f64, f64)], data_rate: f64, model_size: f64, deadline: u64) -> TaskProfile {
    TaskProfile {
        layers: layers
            .iter()
            .map(|&(compute, activation)| LayerProfile {
                compute,
                activation,
            })
            .collect(),
        data_rate,
        model_size,
        deadline,
    }
}

#[derive(Debug, PartialEq)]
pub enum Expected {
    Federated,
    Centralized,
    Distributed(usize),
    Infeasible,
}

/// Rule table written out with exhaustive split enumeration.
pub fn rule_oracle(t: &TaskProfile, device: f64, bandwidth: f64) -> Expected {
    let demand: f64 = t.layers.iter().map(|l| l.compute).sum();
    if device >= demand {
        return Expected::Federated;
    }
    if bandwidth >= t.data_rate {
        return Expected::Centralized;
    }
    let time = |work: f64, rate: f64| {
        if work == 0.0 {
            0.0
        } else if rate == 0.0 {
            f64::INFINITY
        } else {
            work / rate
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for k in 1..t.layers.len() {
        let dev: f64 = t.layers[..k].iter().map(|l| l.compute).sum();
        let c = time(dev, device).max(time(t.layers[k - 1].activation, bandwidth));
        if best.is_none() || c < best.unwrap().1 {
            best = Some((k, c));
        }
    }
    match best {
        Some((k, c)) if c <= t.deadline as f64 => Expected::Distributed(k),
        _ => Expected::Infeasible,
    }
}

pub fn observed(t: &TaskProfile, device: f64, bandwidth: f64) -> Expected {
    match select_strategy(t, device, bandwidth) {
        Ok(Strategy::Federated) => Expected::Federated,
        Ok(Strategy::Centralized) => Expected::Centralized,
        Ok(Strategy::Distributed { split_layer }) => Expected::Distributed(split_layer),
        Err(ManoError::NoFeasibleStrategy) => Expected::Infeasible,
        Err(e) => panic!("unexpected error {e}"),
    }
}
