//! Brute-force reference implementation of the step schedule.
//!
//! Written from the model description rather than from the engine: plain
//! arrays, no ordering helpers, argmax selection by repeated linear scans. It
//! consumes the documented random streams in the documented order:
//!
//! * stream 0, skills: four `f64` draws per agent (tech, mgmt, comp, soft);
//! * stream 1, tenure: per agent in assignment order, a `u32` base on the
//!   level's band then an `i64` jitter on `[-5, 5]`;
//! * stream 2, attrition: `index::sample(n, k)` per level with `k > 0`, over
//!   the level's members in id order;
//! * stream 3, ordering: one shuffle of the id-ordered candidate list per
//!   promotion pass with open seats (random rule only);
//! * stream 4, hiring: four `f64` draws per hire.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WEIGHTS: [[f64; 4]; 5] = [
    [0.9, 0.0, 0.0, 0.1],
    [0.5, 0.3, 0.0, 0.2],
    [0.0, 0.5, 0.3, 0.2],
    [0.0, 0.7, 0.1, 0.2],
    [0.0, 0.8, 0.1, 0.1],
];
const BANDS: [[u32; 2]; 5] = [[0, 3], [2, 5], [4, 7], [6, 10], [8, 12]];
const GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Merit,
    Seniority,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub agent: u64,
    pub t: u32,
    pub from: u8,
    pub to: u8,
    pub pre: f64,
    pub post: f64,
}

#[derive(Clone, Debug)]
struct Person {
    level: usize,
    tenure: i64,
    skills: [f64; 4],
    perf: f64,
    active: bool,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn perf(skills: &[f64; 4], level: usize) -> f64 {
    let w = WEIGHTS[level];
    let mut s = 0.0;
    for k in 0..4 {
        s += w[k] * skills[k];
    }
    s.clamp(0.0, 1.0)
}

fn draw(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let a = rng.random::<f64>();
    let b = rng.random::<f64>();
    let c = rng.random::<f64>();
    let d = rng.random::<f64>();
    [a, b, c, d]
}

pub struct Outcome {
    pub efficiency: Vec<f64>,
    pub events: Vec<Event>,
}

/// Runs `steps` steps on an `n`-agent org with the given shares and exit rates.
#[allow(clippy::needless_range_loop)]
pub fn simulate(n: usize, shares: [f64; 5], xi: [f64; 5], seed: u64, steps: u32, rule: Rule, theta: f64) -> Outcome {
    let mut caps = [0usize; 5];
    for l in 1..5 {
        caps[l] = (shares[l] * n as f64).floor() as usize;
    }
    caps[0] = n - caps[1..].iter().sum::<usize>();

    let mut skills_rng = stream(seed, 0);
    let mut people: Vec<Person> = (0..n)
        .map(|_| Person { level: 0, tenure: 0, skills: draw(&mut skills_rng), perf: 0.0, active: true })
        .collect();

    // Seeding: top level first, relaxing the bar until the level is full.
    let mut assigned = vec![false; n];
    let mut order = Vec::new();
    for l in (1..5).rev() {
        let mut filled = 0;
        for rho in GRID {
            for i in 0..n {
                if filled == caps[l] {
                    break;
                }
                let ok = (0..4).all(|k| WEIGHTS[l][k] == 0.0 || people[i].skills[k] >= (1.0 - rho) * WEIGHTS[l][k]);
                if !assigned[i] && ok {
                    assigned[i] = true;
                    people[i].level = l;
                    order.push(i);
                    filled += 1;
                }
            }
        }
    }
    order.extend((0..n).filter(|&i| !assigned[i]));

    let mut tenure_rng = stream(seed, 1);
    for &i in &order {
        let [lo, hi] = BANDS[people[i].level];
        let base = tenure_rng.random_range(lo..=hi) as i64;
        let jitter: i64 = tenure_rng.random_range(-5..=5);
        people[i].tenure = (base + jitter).max(0);
    }
    for p in &mut people {
        p.perf = perf(&p.skills, p.level);
    }

    let mean = |people: &[Person]| {
        let (mut s, mut c) = (0.0, 0usize);
        for p in people.iter().filter(|p| p.active) {
            s += p.perf;
            c += 1;
        }
        s / c as f64
    };

    let mut attr_rng = stream(seed, 2);
    let mut ord_rng = stream(seed, 3);
    let mut hire_rng = stream(seed, 4);
    let mut efficiency = vec![mean(&people)];
    let mut events = Vec::new();

    for t in 1..=steps {
        for p in people.iter_mut().filter(|p| p.active) {
            p.tenure += 1;
            p.perf = perf(&p.skills, p.level);
        }

        for l in 0..5 {
            let members: Vec<usize> = (0..people.len()).filter(|&i| people[i].active && people[i].level == l).collect();
            let k = (xi[l] * members.len() as f64).floor() as usize;
            if k > 0 {
                for j in index::sample(&mut attr_rng, members.len(), k) {
                    people[members[j]].active = false;
                }
            }
        }

        for l in (0..4).rev() {
            let above = people.iter().filter(|p| p.active && p.level == l + 1).count();
            let seats = caps[l + 1].saturating_sub(above);
            let mut cands: Vec<usize> = (0..people.len()).filter(|&i| people[i].active && people[i].level == l).collect();
            if seats == 0 || cands.is_empty() {
                continue;
            }
            let chosen: Vec<usize> = match rule {
                Rule::Random => {
                    cands.shuffle(&mut ord_rng);
                    cands.into_iter().take(seats).collect()
                }
                Rule::Merit | Rule::Seniority => {
                    let key = |i: usize| match rule {
                        Rule::Merit => people[i].perf,
                        _ => people[i].tenure as f64,
                    };
                    let mut picked = Vec::new();
                    while picked.len() < seats && !cands.is_empty() {
                        let mut best = 0;
                        for j in 1..cands.len() {
                            let (a, b) = (key(cands[j]), key(cands[best]));
                            if ((a >= theta) as u8, a) > ((b >= theta) as u8, b) {
                                best = j;
                            }
                        }
                        picked.push(cands.remove(best));
                    }
                    picked
                }
            };
            for i in chosen {
                let pre = people[i].perf;
                people[i].level = l + 1;
                people[i].perf = perf(&people[i].skills, l + 1);
                events.push(Event { agent: i as u64, t, from: l as u8 + 1, to: l as u8 + 2, pre, post: people[i].perf });
            }
        }

        let l1 = people.iter().filter(|p| p.active && p.level == 0).count();
        for _ in l1..caps[0] {
            let skills = draw(&mut hire_rng);
            people.push(Person { level: 0, tenure: 0, skills, perf: perf(&skills, 0), active: true });
        }
        efficiency.push(mean(&people));
    }
    Outcome { efficiency, events }
}
