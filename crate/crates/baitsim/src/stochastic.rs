//! Per-mosquito discrete-time Monte Carlo simulation.
//!
//! Each step of length `dt`, every mosquito independently: may die (replaced
//! by a susceptible newborn), may revert from the removed state, and may take
//! a meal. A meal targets host class `i` with weight `p*k_i*N_i` or a bait
//! pool with weight `q * (bait weight)`; uniform baits carry total weight
//! `N*x`, targeted baits carry weight `k_i*B_i` per class. Exposed mosquitoes
//! carry an explicit incubation timer; they count as susceptible in the
//! compartment totals and can still be removed by a bait meal, which cancels
//! the pending infection.

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use thiserror::Error;

use crate::allocation::BaitAllocation;
use crate::dde::Trajectory;
use crate::params::ModelParams;
use crate::profile::AttractivenessProfile;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("per-step probability {name} = {value} is not < 1; reduce dt")]
    ProbabilityOverflow { name: &'static str, value: f64 },
    #[error("allocation has {alloc} classes but profile has {profile}")]
    ClassCountMismatch { alloc: usize, profile: usize },
    #[error("initial infected hosts ({requested}) exceed the population ({available})")]
    TooManyInitialInfected { requested: u64, available: u64 },
    #[error("t_end must be positive (got {0})")]
    BadSpan(f64),
    #[error("n_runs must be at least 1")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MosquitoStatus {
    Susceptible,
    Exposed { days_remaining: f64 },
    Infectious,
    Removed,
}

/// Where the initial infected hosts are placed in heterogeneous runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPlacement {
    /// Most attractive class first (default; worst case for takeoff).
    HighestK,
    /// A specific class index.
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_runs: u64,
    pub rng_seed: u64,
    pub initial_infected_hosts: u64,
    pub placement: InitialPlacement,
    /// Days between recorded output rows.
    pub output_interval: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_end: 500.0,
            n_runs: 1000,
            rng_seed: 0,
            initial_infected_hosts: 1,
            placement: InitialPlacement::HighestK,
            output_interval: 1.0,
        }
    }
}

impl SimConfig {
    /// Hard-errors when any per-event probability reaches 1; returns the
    /// names of events whose probability exceeds 0.1 as warnings.
    pub fn check_probabilities(&self, params: &ModelParams) -> Result<Vec<String>, SimError> {
        let events = [
            ("bite (a*dt)", params.bite_rate * self.dt),
            ("recovery (mu*dt)", params.recovery_rate * self.dt),
            ("turnover (delta*dt)", params.turnover_rate * self.dt),
            ("reversion (theta*dt)", params.reversion_rate * self.dt),
        ];
        let mut warnings = Vec::new();
        for (name, value) in events {
            if value >= 1.0 {
                return Err(SimError::ProbabilityOverflow { name, value });
            }
            if value >= 0.1 {
                warnings.push(format!("per-step probability {name} = {value} >= 0.1"));
            }
        }
        Ok(warnings)
    }
}

/// Full simulation state: mosquito agents plus per-class host counts.
#[derive(Debug, Clone)]
pub struct World {
    pub mosquitoes: Vec<MosquitoStatus>,
    /// (class population, infected count) per class; totals are constant.
    pub hosts: Vec<(u64, u64)>,
}

impl World {
    pub fn infected_hosts(&self) -> u64 {
        self.hosts.iter().map(|&(_, i)| i).sum()
    }

    pub fn count(&self, status_matches: impl Fn(&MosquitoStatus) -> bool) -> usize {
        self.mosquitoes.iter().filter(|s| status_matches(s)).count()
    }
}

/// Precomputed meal-target weights; constant over a run.
#[derive(Debug, Clone)]
pub struct MealTable {
    /// Cumulative weights: one entry per host class, then one for baits
    /// (uniform) or one per class bait pool (targeted).
    cumulative: Vec<f64>,
    host_classes: usize,
    total: f64,
}

impl MealTable {
    pub fn build(
        params: &ModelParams,
        profile: &AttractivenessProfile,
        alloc: Option<&BaitAllocation>,
    ) -> Result<Self, SimError> {
        if let Some(al) = alloc {
            if al.class_count() != profile.class_count() {
                return Err(SimError::ClassCountMismatch {
                    alloc: al.class_count(),
                    profile: profile.class_count(),
                });
            }
        }
        let p = params.blood_preference;
        let q = params.sugar_preference;
        let mut weights: Vec<f64> = profile
            .classes()
            .iter()
            .map(|&(k, n)| p * k * n as f64)
            .collect();
        match alloc {
            Some(al) => {
                for (&b, &(k, _)) in al.baits().iter().zip(profile.classes()) {
                    weights.push(q * k * b as f64);
                }
            }
            None => {
                weights.push(q * profile.n_hosts() as f64 * params.bait_density);
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(MealTable {
            cumulative,
            host_classes: profile.class_count(),
            total: acc,
        })
    }

    /// Probability that a meal is a bait meal (of any pool).
    pub fn bait_meal_probability(&self) -> f64 {
        let host_w = self.cumulative[self.host_classes - 1];
        (self.total - host_w) / self.total
    }

    /// Samples a meal target: `Ok(class)` for a host bite, `Err(())`-like
    /// `None` is impossible; bait pools map to `MealTarget::Bait`.
    fn sample(&self, rng: &mut impl Rng) -> MealTarget {
        let u = rng.gen_range(0.0..self.total);
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx < self.host_classes {
            MealTarget::Host(idx)
        } else {
            MealTarget::Bait
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MealTarget {
    Host(usize),
    Bait,
}

/// Advances the world by one step of `dt`.
///
/// Event order per mosquito: death, reversion, meal, incubation timer;
/// host recoveries are drawn after the mosquito pass.
pub fn step(
    world: &mut World,
    params: &ModelParams,
    table: &MealTable,
    dt: f64,
    rng: &mut impl Rng,
) {
    let p_death = params.turnover_rate * dt;
    let p_revert = params.reversion_rate * dt;
    let p_meal = params.bite_rate * dt;
    let tau = params.incubation_days;

    for idx in 0..world.mosquitoes.len() {
        // Death: replaced by a susceptible newborn; cancels any incubation.
        if rng.gen_bool(p_death) {
            world.mosquitoes[idx] = MosquitoStatus::Susceptible;
            continue;
        }
        if let MosquitoStatus::Removed = world.mosquitoes[idx] {
            if rng.gen_bool(p_revert) {
                world.mosquitoes[idx] = MosquitoStatus::Susceptible;
            }
        }
        if table.total > 0.0 && rng.gen_bool(p_meal) {
            match table.sample(rng) {
                MealTarget::Host(class) => {
                    let (n, infected) = world.hosts[class];
                    match world.mosquitoes[idx] {
                        MosquitoStatus::Susceptible => {
                            // Bite lands on a uniformly chosen host of the class.
                            if rng.gen_range(0..n) < infected
                                && rng.gen_bool(params.p_infect_mosquito)
                            {
                                world.mosquitoes[idx] =
                                    MosquitoStatus::Exposed { days_remaining: tau };
                            }
                        }
                        MosquitoStatus::Infectious => {
                            if rng.gen_range(0..n) >= infected
                                && rng.gen_bool(params.p_infect_human)
                            {
                                world.hosts[class].1 += 1;
                            }
                        }
                        // Exposed bites neither advance nor reset incubation;
                        // removed bites are harmless.
                        MosquitoStatus::Exposed { .. } | MosquitoStatus::Removed => {}
                    }
                }
                MealTarget::Bait => {
                    match world.mosquitoes[idx] {
                        MosquitoStatus::Susceptible | MosquitoStatus::Exposed { .. } => {
                            if rng.gen_bool(params.efficacy) {
                                world.mosquitoes[idx] = MosquitoStatus::Removed;
                            }
                        }
                        // No effect once sporozoites reached the glands.
                        MosquitoStatus::Infectious | MosquitoStatus::Removed => {}
                    }
                }
            }
        }
        if let MosquitoStatus::Exposed { days_remaining } = &mut world.mosquitoes[idx] {
            *days_remaining -= dt;
            if *days_remaining <= 0.0 {
                world.mosquitoes[idx] = MosquitoStatus::Infectious;
            }
        }
    }

    // Host recoveries: hosts within a class are exchangeable.
    let p_recover = params.recovery_rate * dt;
    for class in world.hosts.iter_mut() {
        if class.1 > 0 {
            let recovered = Binomial::new(class.1, p_recover).unwrap().sample(rng);
            class.1 -= recovered;
        }
    }
}

fn initial_world(
    params: &ModelParams,
    profile: &AttractivenessProfile,
    config: &SimConfig,
) -> Result<World, SimError> {
    let mut hosts: Vec<(u64, u64)> = profile.classes().iter().map(|&(_, n)| (n, 0)).collect();
    let seed_class = match config.placement {
        InitialPlacement::Class(i) => i.min(hosts.len() - 1),
        InitialPlacement::HighestK => {
            // Highest-k class that actually has hosts.
            let mut best = 0;
            for (i, &(k, n)) in profile.classes().iter().enumerate() {
                if n > 0 && k >= profile.classes()[best].0 {
                    best = i;
                }
            }
            best
        }
    };
    let mut remaining = config.initial_infected_hosts;
    // Fill the seed class first, spill into neighbours if it is too small.
    let mut order: Vec<usize> = (0..hosts.len()).collect();
    order.sort_by_key(|&i| if i == seed_class { 0 } else { 1 });
    for &i in &order {
        let take = remaining.min(hosts[i].0);
        hosts[i].1 = take;
        remaining -= take;
    }
    if remaining > 0 {
        return Err(SimError::TooManyInitialInfected {
            requested: config.initial_infected_hosts,
            available: profile.n_hosts(),
        });
    }
    Ok(World {
        mosquitoes: vec![MosquitoStatus::Susceptible; params.n_mosquitoes as usize],
        hosts,
    })
}

fn record_row(world: &World, n_hosts: f64, n_mosq: f64) -> Vec<f64> {
    let infectious = world.count(|s| matches!(s, MosquitoStatus::Infectious)) as f64;
    let removed = world.count(|s| matches!(s, MosquitoStatus::Removed)) as f64;
    vec![
        world.infected_hosts() as f64 / n_hosts,
        infectious / n_mosq,
        removed / n_mosq,
    ]
}

/// One seeded realization; identical seeds give bit-identical trajectories.
pub fn run(
    config: &SimConfig,
    params: &ModelParams,
    profile: &AttractivenessProfile,
    alloc: Option<&BaitAllocation>,
) -> Result<Trajectory, SimError> {
    config.check_probabilities(params)?;
    if !(config.t_end > 0.0) {
        return Err(SimError::BadSpan(config.t_end));
    }
    let table = MealTable::build(params, profile, alloc)?;
    let mut world = initial_world(params, profile, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let steps = (config.t_end / config.dt).round() as usize;
    let out_stride = (config.output_interval / config.dt).round().max(1.0) as usize;
    let n_hosts = profile.n_hosts() as f64;
    let n_mosq = params.n_mosquitoes as f64;

    let mut times = vec![0.0];
    let mut rows = vec![record_row(&world, n_hosts, n_mosq)];
    for n in 0..steps {
        step(&mut world, params, &table, config.dt, &mut rng);
        if (n + 1) % out_stride == 0 || n + 1 == steps {
            times.push((n + 1) as f64 * config.dt);
            rows.push(record_row(&world, n_hosts, n_mosq));
        }
    }
    Ok(Trajectory {
        dt: config.dt * out_stride as f64,
        labels: vec!["i_h".into(), "i_m".into(), "r_m".into()],
        times,
        rows,
        steady_state_reached: false,
        clamp_events: 0,
    })
}

/// Convenience wrapper for the homogeneous model (single class, k = 1).
pub fn run_homogeneous(config: &SimConfig, params: &ModelParams) -> Result<Trajectory, SimError> {
    let profile = AttractivenessProfile::single_class(1.0, params.n_hosts)
        .expect("positive host count");
    run(config, params, &profile, None)
}

/// Pointwise ensemble mean and standard deviation over seeded runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub n_runs: u64,
    pub master_seed: u64,
    /// The individual realizations, in run order.
    pub runs: Vec<Trajectory>,
}

/// Derives per-run seeds deterministically from the master seed.
pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    // SplitMix64 finalizer; decorrelates consecutive run indices.
    let mut z = master ^ run_index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs the configured number of realizations in parallel and aggregates.
/// Results do not depend on the worker count: runs are keyed by index and
/// reduced in index order.
pub fn run_ensemble(
    config: &SimConfig,
    params: &ModelParams,
    profile: &AttractivenessProfile,
    alloc: Option<&BaitAllocation>,
) -> Result<MeanTrajectory, SimError> {
    if config.n_runs == 0 {
        return Err(SimError::NoRuns);
    }
    let runs: Vec<Trajectory> = (0..config.n_runs)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.rng_seed = derive_seed(config.rng_seed, i);
            run(&cfg, params, profile, alloc)
        })
        .collect::<Result<_, _>>()?;

    let times = runs[0].times.clone();
    let labels = runs[0].labels.clone();
    let cols = labels.len();
    let n = config.n_runs as f64;
    let mut mean = vec![vec![0.0; cols]; times.len()];
    let mut std = vec![vec![0.0; cols]; times.len()];
    for run in &runs {
        for (t, row) in run.rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                mean[t][c] += v;
            }
        }
    }
    for row in &mut mean {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    for run in &runs {
        for (t, row) in run.rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let d = v - mean[t][c];
                std[t][c] += d * d;
            }
        }
    }
    for row in &mut std {
        for v in row.iter_mut() {
            *v = (*v / n).sqrt();
        }
    }
    Ok(MeanTrajectory {
        times,
        labels,
        mean,
        std,
        n_runs: config.n_runs,
        master_seed: config.rng_seed,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(p: f64, x: f64) -> ModelParams {
        ModelParams::baseline()
            .with_blood_preference(p)
            .with_bait_density(x)
    }

    fn quick_config(seed: u64) -> SimConfig {
        SimConfig {
            dt: 0.01,
            t_end: 20.0,
            n_runs: 1,
            rng_seed: seed,
            initial_infected_hosts: 1,
            placement: InitialPlacement::HighestK,
            output_interval: 1.0,
        }
    }

    #[test]
    fn meal_weights_hand_check() {
        // a=0.5, dt=0.01, p=0.5, x=1, k=1: P(meal) = 0.005 and
        // P(bait | meal) = qx/(p+qx) = 0.5 exactly.
        let params = baseline(0.5, 1.0);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let table = MealTable::build(&params, &profile, None).unwrap();
        assert!((table.bait_meal_probability() - 0.5).abs() < 1e-15);
        // And at x=2: qx/(p+qx) = 1/(0.5+1) = 2/3.
        let table = MealTable::build(&baseline(0.5, 2.0), &profile, None).unwrap();
        assert!((table.bait_meal_probability() - 2.0 / 3.0).abs() < 1e-15);
        assert!((params.bite_rate * 0.01 - 0.005).abs() < 1e-15);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let params = baseline(0.6, 0.1);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let a = run(&quick_config(42), &params, &profile, None).unwrap();
        let b = run(&quick_config(42), &params, &profile, None).unwrap();
        assert_eq!(a, b);
        let c = run(&quick_config(43), &params, &profile, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn homogeneous_wrapper_equals_single_class() {
        let params = baseline(0.6, 0.1);
        let profile = AttractivenessProfile::single_class(1.0, params.n_hosts).unwrap();
        let a = run_homogeneous(&quick_config(7), &params).unwrap();
        let b = run(&quick_config(7), &params, &profile, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_baits_leaves_removed_empty() {
        let params = baseline(0.6, 0.0);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let traj = run(&quick_config(3), &params, &profile, None).unwrap();
        assert!(traj.column("r_m").unwrap().iter().all(|&v| v == 0.0));

        let mut no_gamma = baseline(0.6, 0.5);
        no_gamma.efficacy = 0.0;
        let traj = run(&quick_config(3), &no_gamma, &profile, None).unwrap();
        assert!(traj.column("r_m").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_bait_meals_extinguish() {
        // p = 0 and gamma = 1: every meal removes; infection cannot spread.
        let mut params = baseline(0.0, 1.0);
        params.efficacy = 1.0;
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let mut config = quick_config(5);
        config.t_end = 200.0;
        let traj = run(&config, &params, &profile, None).unwrap();
        let i_h = traj.column("i_h").unwrap();
        assert_eq!(*i_h.last().unwrap(), 0.0);
        let i_m = traj.column("i_m").unwrap();
        assert!(i_m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disease_free_world_stays_disease_free() {
        let params = baseline(0.6, 0.0);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let mut config = quick_config(11);
        config.initial_infected_hosts = 0;
        let traj = run(&config, &params, &profile, None).unwrap();
        assert!(traj.column("i_h").unwrap().iter().all(|&v| v == 0.0));
        assert!(traj.column("i_m").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conservation_and_legality() {
        let params = baseline(0.6, 0.2);
        let profile =
            AttractivenessProfile::new(vec![(1.0, 500), (2.0, 300), (5.0, 200)]).unwrap();
        let table = MealTable::build(&params, &profile, None).unwrap();
        let config = quick_config(9);
        let mut world = initial_world(&params, &profile, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let before = world.mosquitoes.clone();
            step(&mut world, &params, &table, 0.01, &mut rng);
            assert_eq!(world.mosquitoes.len(), params.n_mosquitoes as usize);
            for (cls, &(n, infected)) in world.hosts.iter().enumerate() {
                assert_eq!(n, profile.classes()[cls].1);
                assert!(infected <= n);
            }
            for (b, a) in before.iter().zip(&world.mosquitoes) {
                // Removed never becomes infectious in one step.
                if matches!(b, MosquitoStatus::Removed) {
                    assert!(!matches!(a, MosquitoStatus::Infectious));
                }
                // Infectious exits only through death (to susceptible).
                if matches!(b, MosquitoStatus::Infectious) {
                    assert!(matches!(
                        a,
                        MosquitoStatus::Infectious | MosquitoStatus::Susceptible
                    ));
                }
            }
        }
    }

    #[test]
    fn instant_recovery_pins_infection_down() {
        let mut params = baseline(0.6, 0.0);
        params.recovery_rate = 50.0;
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let config = SimConfig {
            dt: 1e-4,
            t_end: 5.0,
            rng_seed: 17,
            initial_infected_hosts: 1,
            n_runs: 1,
            placement: InitialPlacement::HighestK,
            output_interval: 0.5,
        };
        let traj = run(&config, &params, &profile, None).unwrap();
        assert!(traj.column("i_h").unwrap().iter().all(|&v| v <= 0.002));
    }

    #[test]
    fn probability_overflow_rejected() {
        let mut params = baseline(0.6, 0.0);
        params.bite_rate = 150.0;
        let config = quick_config(1);
        assert!(matches!(
            config.check_probabilities(&params),
            Err(SimError::ProbabilityOverflow { .. })
        ));
        params.bite_rate = 50.0;
        let warnings = config.check_probabilities(&params).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn single_run_ensemble_equals_run() {
        let params = baseline(0.6, 0.1);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let config = quick_config(21);
        let ensemble = run_ensemble(&config, &params, &profile, None).unwrap();
        let mut solo_cfg = config.clone();
        solo_cfg.rng_seed = derive_seed(config.rng_seed, 0);
        let solo = run(&solo_cfg, &params, &profile, None).unwrap();
        assert_eq!(ensemble.mean, solo.rows);
        assert!(ensemble
            .std
            .iter()
            .all(|row| row.iter().all(|&v| v == 0.0)));
    }
}
