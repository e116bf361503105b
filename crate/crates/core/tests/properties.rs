use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;

use promosim_core::diagnostics::{
    agent_trajectory, efficiency_from_histories, negative_counts_series, path_matrix, summarize_deltas,
};
use promosim_core::domain::{compute_performance, CompetenceVector, Regime, Skill};
use promosim_core::engine::AttritionRates;
use promosim_core::init::{compute_capacities, create_agents, seed_levels};
use promosim_core::LevelShares;
use promosim_core::mitigations::training_burst;
use promosim_core::strategies::{order_hybrid, order_merit, order_random, order_seniority, Candidate};
use promosim_core::{
    run_simulation, AgentId, EventCause, LevelId, PromotionEvent, RegimeName, RegimeSpec, ScenarioConfig,
    StrategyConfig, StrategyKind, TrainingMode,
};
use rand::SeedableRng;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn competence() -> impl Strategy<Value = CompetenceVector<f64>> {
    [unit(), unit(), unit(), unit()].prop_map(|a| CompetenceVector::from_array(a).unwrap())
}

fn weights() -> impl Strategy<Value = [f64; 4]> {
    [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64].prop_filter_map("non-zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| w.map(|x| x / s))
    })
}

fn candidates() -> impl Strategy<Value = Vec<Candidate<f64>>> {
    prop::collection::vec((unit(), 0u32..20), 0..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (p, y))| Candidate { id: AgentId(i as u64), performance: (p * 20.0).round() / 20.0, tenure_years: y })
            .collect()
    })
}

fn is_permutation(a: &[Candidate<f64>], b: &[Candidate<f64>]) -> bool {
    let ids = |v: &[Candidate<f64>]| v.iter().map(|c| c.id).collect::<Vec<_>>();
    let (mut x, mut y) = (ids(a), ids(b));
    x.sort();
    y.sort();
    x == y
}

proptest! {
    #[test]
    fn performance_is_unit_and_monotone(c in competence(), w in weights(), k in 0usize..4, bump in unit()) {
        let profile = promosim_core::domain::RoleProfile::new(w).unwrap();
        let p = compute_performance(&c, &profile);
        prop_assert!((0.0..=1.0).contains(&p));
        let skill = Skill::ALL[k];
        let mut higher = c;
        higher.set(skill, c.get(skill).max(bump));
        prop_assert!(compute_performance(&higher, &profile) >= p - 1e-15);
    }

    #[test]
    fn capacities_sum_to_population(n in 1usize..50_000, raw in [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64]) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-3);
        let shares = LevelShares::new(raw.map(|x| x / total));
        prop_assume!(shares.is_ok());
        let caps = compute_capacities(n, &shares.unwrap()).unwrap();
        prop_assert_eq!(caps.total(), n);
    }

    #[test]
    fn seeding_fills_every_cap(n in 1usize..400, seed in any::<u64>(), transferable in any::<bool>()) {
        let regime = if transferable { Regime::<f64>::transferable() } else { Regime::high_mismatch() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<CompetenceVector<f64>> = create_agents(n, &mut rng);
        let caps = compute_capacities(n, &LevelShares::default()).unwrap();
        let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let seeded = seed_levels(&agents, &regime, &caps, &grid).unwrap();
        for level in LevelId::ALL {
            prop_assert_eq!(seeded.levels.iter().filter(|&&l| l == level).count(), caps.get(level));
        }
        let again = seed_levels(&agents, &regime, &caps, &grid).unwrap();
        prop_assert_eq!(seeded, again);
    }

    #[test]
    fn orderings_are_permutations(c in candidates(), theta in unit(), ty in 0u32..15, seed in any::<u64>()) {
        let merit = order_merit(&c, theta);
        prop_assert!(is_permutation(&c, &merit));
        // Above-gate candidates precede the rest; each block is descending.
        let split = merit.iter().position(|x| x.performance < theta).unwrap_or(merit.len());
        prop_assert!(merit[split..].iter().all(|x| x.performance < theta));
        prop_assert!(merit.windows(2).all(|w| w[0].performance >= w[1].performance));

        let sen = order_seniority(&c, ty);
        prop_assert!(is_permutation(&c, &sen));
        prop_assert!(sen.windows(2).all(|w| w[0].tenure_years >= w[1].tenure_years));

        let hyb = order_hybrid(&c, &StrategyConfig::default()).unwrap();
        prop_assert!(is_permutation(&c, &hyb));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(is_permutation(&c, &order_random(&c, &mut rng)));
    }

    #[test]
    fn equal_keys_keep_input_order(c in candidates(), theta in unit()) {
        let merit = order_merit(&c, theta);
        for w in merit.windows(2) {
            if w[0].performance == w[1].performance {
                prop_assert!(w[0].id < w[1].id);
            }
        }
        let sen = order_seniority(&c, 5);
        for w in sen.windows(2) {
            if w[0].tenure_years == w[1].tenure_years {
                prop_assert!(w[0].id < w[1].id);
            }
        }
    }

    #[test]
    fn pure_performance_hybrid_equals_merit(c in candidates(), theta in unit()) {
        let cfg = StrategyConfig { alpha: 1.0, theta_s: theta, ..Default::default() };
        prop_assert_eq!(order_hybrid(&c, &cfg).unwrap(), order_merit(&c, theta));
    }

    #[test]
    fn training_only_raises_trainable_skills(c in competence(), fixed in any::<bool>()) {
        let rate = [c.tech * (1.0 - c.tech), c.mgmt * (1.0 - c.mgmt)];
        let mode = if fixed { TrainingMode::FixedAtInit } else { TrainingMode::Dynamic };
        let out = training_burst(&c, mode, 1.0, Some(rate)).unwrap();
        for skill in [Skill::Tech, Skill::Mgmt] {
            prop_assert!(out.get(skill) >= c.get(skill));
            prop_assert!(out.get(skill) - c.get(skill) <= 0.25);
            prop_assert!(out.get(skill) <= 1.0);
        }
        prop_assert_eq!(out.comp.to_bits(), c.comp.to_bits());
        prop_assert_eq!(out.soft.to_bits(), c.soft.to_bits());
    }

    #[test]
    fn dynamic_bursts_climb_toward_one(x in 0.001..0.999f64) {
        let mut c = CompetenceVector::splat(x);
        for _ in 0..8 {
            let next = training_burst(&c, TrainingMode::Dynamic, 1.0, None).unwrap();
            if c.tech < 1.0 {
                prop_assert!(next.tech > c.tech);
            }
            c = next;
        }
    }

    #[test]
    fn delta_summary_identities(deltas in prop::collection::vec(-0.8..0.8f64, 0..200)) {
        let events: Vec<PromotionEvent> = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| PromotionEvent {
                agent_id: AgentId(i as u64),
                timestep: 1 + (i % 7) as u32,
                from_level: LevelId::from_index(i % 4),
                to_level: LevelId::from_index(i % 4 + 1),
                perf_pre: 0.5,
                perf_post: 0.5 + d,
                delta_p: d,
                cause: EventCause::VacancyFill,
                reverted: false,
            })
            .collect();
        let s = summarize_deltas(&events);
        prop_assert_eq!(s.count, deltas.len());
        prop_assert_eq!(s.histogram.iter().sum::<usize>(), s.count);
        prop_assert!((0.0..=1.0).contains(&s.share_negative));
        if !deltas.is_empty() {
            let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
            prop_assert!((s.mean - mean).abs() < 1e-12);
            prop_assert!(s.min <= s.median && s.median <= s.max);
        }
        let negatives = negative_counts_series(&events, 7);
        prop_assert_eq!(negatives.iter().sum::<usize>(), s.negative);
        let m = path_matrix(&events);
        prop_assert_eq!(m.total(), s.count);
        for cell in &m.cells {
            prop_assert_eq!(cell.positive + cell.negative + cell.zero, cell.count);
        }
    }
}

fn small_config(kind: StrategyKind, seed: u64, n: usize, transferable: bool) -> ScenarioConfig {
    ScenarioConfig {
        n_agents: n,
        steps: 12,
        seed,
        regime: RegimeSpec::Preset(if transferable { RegimeName::Transferable } else { RegimeName::HighMismatch }),
        attrition_rates: AttritionRates([0.1, 0.05, 0.05, 0.05, 0.05]),
        strategy: StrategyConfig::with_kind(kind),
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_keep_every_invariant(kind_ix in 0usize..6, seed in any::<u64>(), n in 20usize..400, transferable in any::<bool>()) {
        let kind = StrategyKind::ALL[kind_ix];
        let cfg = small_config(kind, seed, n, transferable);
        let run = run_simulation(&cfg).unwrap();
        let caps = run.capacities;

        prop_assert_eq!(run.efficiency_series.len(), 13);
        let rebuilt = efficiency_from_histories(&run);
        for (a, b) in run.efficiency_series.iter().zip(&rebuilt) {
            prop_assert!((a - b).abs() < 1e-12);
        }

        // Headcount and caps at every boundary, rebuilt from trajectories.
        let mut per_step = vec![[0usize; 5]; 13];
        for rec in &run.agents {
            let traj = agent_trajectory(&run, rec.id).unwrap();
            let mut competence = rec.history[0].competence.unwrap();
            for p in &traj.points {
                per_step[p.t as usize][p.level.index()] += 1;
                prop_assert_eq!(p.tenure_years, rec.initial_tenure + (p.t - rec.joined_at));
                if let Some(c) = p.competence {
                    competence = c;
                }
                let regime = cfg.resolve_regime().unwrap();
                prop_assert_eq!(p.performance, regime.performance(&competence, p.level));
            }
        }
        for counts in &per_step {
            prop_assert_eq!(counts.iter().sum::<usize>(), n);
            for (count, cap) in counts.iter().zip(caps.0) {
                prop_assert!(*count <= cap);
            }
        }

        for e in &run.promotion_events {
            prop_assert!(e.from_level < e.to_level);
            prop_assert!((1..=12).contains(&e.timestep));
            prop_assert_eq!(e.delta_p, e.perf_post - e.perf_pre);
        }

        // Demotions pair with a reverted promotion of the same step.
        let reverted: BTreeSet<(AgentId, u32)> = run
            .promotion_events
            .iter()
            .filter(|e| e.reverted)
            .map(|e| (e.agent_id, e.timestep))
            .collect();
        prop_assert_eq!(reverted.len(), run.demotion_events.len());
        for d in &run.demotion_events {
            prop_assert!(reverted.contains(&(d.agent_id, d.timestep)));
            prop_assert_eq!(d.to_level.get() + 1, d.from_level.get());
            prop_assert!(d.drop >= cfg.strategy.tau);
        }

        // A demoted agent is never promoted after its demotion step.
        let demoted_at: HashMap<AgentId, u32> = run.demotion_events.iter().map(|d| (d.agent_id, d.timestep)).collect();
        for e in &run.promotion_events {
            if let Some(&t) = demoted_at.get(&e.agent_id) {
                prop_assert!(e.timestep <= t);
            }
        }
        if kind != StrategyKind::SelectiveDemotion {
            prop_assert!(run.demotion_events.is_empty());
            prop_assert!(run.agents.iter().all(|a| !a.blacklisted));
        }

        let again = run_simulation(&cfg).unwrap();
        prop_assert_eq!(&again.promotion_events, &run.promotion_events);
        prop_assert_eq!(&again.efficiency_series, &run.efficiency_series);
        prop_assert_eq!(&again.agents, &run.agents);
    }
}
