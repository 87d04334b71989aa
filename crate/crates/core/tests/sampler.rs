mod common;

use std::sync::OnceLock;

use serorecency::bayes::{FitData, FollowUp, ModelSpec};
use serorecency::mcmc::{run_chain, split_rhat, AcceptanceRates, ChainOutput, SamplerConfig};
use serorecency::simgen::{simulate_dataset, ScenarioConfig};
use serorecency::ModelId;

fn fit(scenario: &ScenarioConfig, model: ModelId, replicate: u64, position: usize, config: &SamplerConfig) -> ChainOutput {
    let panel = simulate_dataset(scenario, model, replicate).unwrap();
    let new = panel.out_of_sample().nth(position).unwrap().id;
    let spec = ModelSpec::for_model(model, scenario.sero_interval);
    let data = FitData::from_panel(&panel, new, FollowUp::DiagnosisOnly, &spec).unwrap();
    run_chain(&data, &spec, config).unwrap()
}

fn ideal_ar4() -> &'static ChainOutput {
    static FIT: OnceLock<ChainOutput> = OnceLock::new();
    FIT.get_or_init(|| fit(&ScenarioConfig::ideal(7), ModelId::Ar4, 0, 1, &SamplerConfig::default()))
}

fn metropolis_rates(a: &AcceptanceRates) -> Vec<(&'static str, f64)> {
    [
        ("effects", a.effects),
        ("new_effects", a.new_effects),
        ("offset", a.offset),
        ("joint_new", a.joint_new),
        ("fixed_effects", a.fixed_effects),
    ]
    .into_iter()
    .filter_map(|(n, v)| v.map(|v| (n, v)))
    .collect()
}

#[test]
fn same_seed_gives_identical_output() {
    let config = SamplerConfig {
        iterations: 1_000,
        burn_in: 500,
        adaptation_window: 250,
        thinning: 2,
        ..SamplerConfig::default()
    };
    let scenario = ScenarioConfig::realistic(3);
    let a = fit(&scenario, ModelId::Ar4Vl, 0, 0, &config);
    let b = fit(&scenario, ModelId::Ar4Vl, 0, 0, &config);
    assert_eq!(a.param_names, b.param_names);
    for (x, y) in a.chains.iter().zip(&b.chains) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.result.as_ref().unwrap().values, y.result.as_ref().unwrap().values);
    }
    let c = fit(&scenario, ModelId::Ar4Vl, 0, 0, &SamplerConfig { seed: 2, ..config });
    assert_ne!(a.offset_chains(), c.offset_chains());
}

#[test]
fn ideal_ar4_chains_converge() {
    let out = ideal_ar4();
    assert_eq!(out.successful().count(), 4);
    let mut names = vec!["tau".to_string()];
    names.extend(out.param_names.iter().filter(|n| n.starts_with("mu.")).cloned());
    for name in names {
        let r = split_rhat(&out.chains_of(&name).unwrap()).unwrap();
        assert!(r.value < 1.05, "{name}: R-hat {}", r.value);
    }
}

#[test]
fn ideal_ar4_recovers_generating_means() {
    let out = ideal_ar4();
    let truth = ModelId::Ar4.realistic_block().mean;
    for (j, t) in truth.iter().enumerate() {
        let draws: Vec<f64> = out.chains_of(&format!("mu.1.{}", j + 1)).unwrap().concat();
        let (m, sd) = (common::mean(&draws), common::variance(&draws).sqrt());
        assert!((m - t).abs() <= 3.0 * sd.max(1e-12), "coordinate {j}: mean {m} sd {sd} truth {t}");
    }
}

#[test]
fn acceptance_rates_after_adaptation_are_moderate() {
    let short = SamplerConfig {
        iterations: 10_000,
        burn_in: 5_000,
        adaptation_window: 2_500,
        ..SamplerConfig::default()
    };
    let realistic = fit(&ScenarioConfig::realistic(11), ModelId::Ar4Vl, 0, 2, &short);
    for (label, out) in [("ideal AR4", ideal_ar4()), ("realistic AR4&VL", &realistic)] {
        for chain in out.successful() {
            for (block, rate) in metropolis_rates(&chain.acceptance) {
                assert!((0.1..=0.7).contains(&rate), "{label} chain block {block}: {rate}");
            }
        }
    }
}
