//! Fixed-step Euler integration of the delay-differential systems.
//!
//! Both systems carry a fixed incubation delay: new mosquito infections at
//! time `t` depend on the state at `t - tau`, discounted by the survival
//! factor `e^(-Lambda*tau)` (or `e^(-zeta*tau)`) for death and bait removal
//! during incubation. The delay is handled with a ring buffer holding the
//! last `tau/dt` states; the history on `[-tau, 0]` is the initial state
//! held constant.

use std::collections::VecDeque;

use thiserror::Error;

use crate::allocation::BaitAllocation;
use crate::params::ModelParams;
use crate::profile::AttractivenessProfile;

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("step size must be positive (got {0})")]
    BadStep(f64),
    #[error("delay {tau} is not a multiple of dt = {dt}")]
    DelayOffGrid { tau: f64, dt: f64 },
    #[error("dt = {dt} must be smaller than the delay {tau}")]
    StepExceedsDelay { dt: f64, tau: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("initial state out of range: {0}")]
    BadInit(String),
    #[error("state has {state} classes but profile has {profile}")]
    ClassCountMismatch { state: usize, profile: usize },
    #[error("steady-state window {window} exceeds trajectory span {span}")]
    WindowTooLong { window: f64, span: f64 },
}

/// Proportions (i_h, i_m, r_m) of the reduced homogeneous system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousState {
    pub i_h: f64,
    pub i_m: f64,
    pub r_m: f64,
}

impl HomogeneousState {
    pub const ZERO: HomogeneousState = HomogeneousState {
        i_h: 0.0,
        i_m: 0.0,
        r_m: 0.0,
    };

    fn check(&self) -> Result<(), DdeError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(self.i_h) || !ok(self.i_m) || !ok(self.r_m) || self.i_m + self.r_m > 1.0 {
            return Err(DdeError::BadInit(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Per-class infected-host proportions plus the mosquito compartments.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousState {
    pub i_h_by_class: Vec<f64>,
    pub i_m: f64,
    pub r_m: f64,
}

impl HeterogeneousState {
    pub fn disease_free(class_count: usize) -> Self {
        HeterogeneousState {
            i_h_by_class: vec![0.0; class_count],
            i_m: 0.0,
            r_m: 0.0,
        }
    }

    /// phi = sum_i k_i I_h^i / N, recomputed from the class states.
    pub fn phi(&self, profile: &AttractivenessProfile) -> f64 {
        self.i_h_by_class
            .iter()
            .zip(profile.classes())
            .map(|(&ih, &(k, n))| k * ih * n as f64)
            .sum::<f64>()
            / profile.n_hosts() as f64
    }

    fn check(&self) -> Result<(), DdeError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !self.i_h_by_class.iter().all(|&v| ok(v))
            || !ok(self.i_m)
            || !ok(self.r_m)
            || self.i_m + self.r_m > 1.0
        {
            return Err(DdeError::BadInit(format!("{self:?}")));
        }
        Ok(())
    }
}

/// A uniform-grid trajectory with named state columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub steady_state_reached: bool,
    /// Number of times Euler overshoot forced a component back into [0,1].
    pub clamp_events: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.rows.last().expect("trajectory is never empty")
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let idx = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// True iff no component moves more than `tol` over the trailing `window`.
pub fn detect_steady_state(traj: &Trajectory, window: f64, tol: f64) -> Result<bool, DdeError> {
    let span = traj.times.last().copied().unwrap_or(0.0);
    if window > span {
        return Err(DdeError::WindowTooLong { window, span });
    }
    let start_t = span - window;
    let start = traj.times.partition_point(|&t| t < start_t);
    let last = traj.final_state();
    for row in &traj.rows[start..] {
        for (a, b) in row.iter().zip(last) {
            if (a - b).abs() >= tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub const STEADY_WINDOW: f64 = 100.0;
pub const STEADY_TOL: f64 = 1e-8;

fn delay_steps(tau: f64, dt: f64) -> Result<usize, DdeError> {
    if !(dt > 0.0) {
        return Err(DdeError::BadStep(dt));
    }
    if tau == 0.0 {
        return Ok(0);
    }
    let ratio = tau / dt;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(DdeError::DelayOffGrid { tau, dt });
    }
    let steps = ratio.round() as usize;
    if steps < 2 {
        // dt >= tau leaves the delay unresolvable on the grid.
        return Err(DdeError::StepExceedsDelay { dt, tau });
    }
    Ok(steps)
}

fn clamp01(v: &mut f64, events: &mut u64) {
    if *v < 0.0 {
        *v = 0.0;
        *events += 1;
    } else if *v > 1.0 {
        *v = 1.0;
        *events += 1;
    }
}

/// Right-hand sides of the reduced homogeneous system at a given state,
/// with the delayed arguments set equal to the current ones. At an
/// equilibrium this is exactly the stationarity condition.
pub fn homogeneous_rhs_at_equilibrium(
    params: &ModelParams,
    i_h: f64,
    i_m: f64,
    r_m: f64,
) -> [f64; 3] {
    homogeneous_rhs(params, i_h, i_m, r_m, i_h, i_m, r_m)
}

#[allow(clippy::too_many_arguments)]
fn homogeneous_rhs(
    params: &ModelParams,
    i_h: f64,
    i_m: f64,
    r_m: f64,
    i_h_lag: f64,
    i_m_lag: f64,
    r_m_lag: f64,
) -> [f64; 3] {
    let a = params.bite_rate;
    let b = params.p_infect_human;
    let c = params.p_infect_mosquito;
    let m = params.mosquito_density;
    let p = params.blood_preference;
    let q = params.sugar_preference;
    let x = params.bait_density;
    let mu = params.recovery_rate;
    let delta = params.turnover_rate;
    let theta = params.reversion_rate;
    let gamma = params.efficacy;
    let den = p + q * x;
    let lambda = delta + a * gamma * q * x / den;
    let surv = (-lambda * params.incubation_days).exp();

    [
        -mu * i_h + a * b * m * p * (1.0 - i_h) * i_m / den,
        a * c * p * (1.0 - i_m_lag - r_m_lag) * i_h_lag * surv / den - delta * i_m,
        a * gamma * q * x * (1.0 - i_m - r_m) / den - (theta + delta) * r_m,
    ]
}

/// Euler integration of the reduced homogeneous system.
pub fn integrate_homogeneous(
    params: &ModelParams,
    init: HomogeneousState,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, DdeError> {
    init.check()?;
    let lag = delay_steps(params.incubation_days, dt)?;
    let steps = (t_end / dt).round() as usize;

    let mut history: VecDeque<[f64; 3]> = VecDeque::with_capacity(lag + 1);
    let mut state = [init.i_h, init.i_m, init.r_m];
    let mut times = Vec::with_capacity(steps + 1);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut clamp_events = 0u64;

    times.push(0.0);
    rows.push(state.to_vec());

    for n in 0..steps {
        let lagged = if lag == 0 || n < lag {
            // Constant history on [-tau, 0].
            if lag == 0 {
                state
            } else {
                [init.i_h, init.i_m, init.r_m]
            }
        } else {
            history[0]
        };
        let d = homogeneous_rhs(
            params, state[0], state[1], state[2], lagged[0], lagged[1], lagged[2],
        );
        if lag > 0 {
            history.push_back(state);
            if history.len() > lag {
                history.pop_front();
            }
        }
        for i in 0..3 {
            state[i] += dt * d[i];
            clamp01(&mut state[i], &mut clamp_events);
        }
        let t = (n + 1) as f64 * dt;
        if !state.iter().all(|v| v.is_finite()) {
            return Err(DdeError::NonFinite { t });
        }
        times.push(t);
        rows.push(state.to_vec());
    }

    let mut traj = Trajectory {
        dt,
        labels: vec!["i_h".into(), "i_m".into(), "r_m".into()],
        times,
        rows,
        steady_state_reached: false,
        clamp_events,
    };
    if t_end >= STEADY_WINDOW {
        traj.steady_state_reached = detect_steady_state(&traj, STEADY_WINDOW, STEADY_TOL)?;
    }
    Ok(traj)
}

/// Euler integration of the per-class heterogeneous system.
///
/// The per-class equations are integrated directly; phi is recomputed from
/// the class states every step rather than integrated through its own
/// equation, because the reduced phi-system is not closed (its derivative
/// involves the second attractiveness moment of the *infected* classes).
/// `alloc = None` means uniform baits at `params.bait_density`.
pub fn integrate_heterogeneous(
    params: &ModelParams,
    profile: &AttractivenessProfile,
    alloc: Option<&BaitAllocation>,
    init: &HeterogeneousState,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, DdeError> {
    init.check()?;
    if init.i_h_by_class.len() != profile.class_count() {
        return Err(DdeError::ClassCountMismatch {
            state: init.i_h_by_class.len(),
            profile: profile.class_count(),
        });
    }
    let lag = delay_steps(params.incubation_days, dt)?;
    let steps = (t_end / dt).round() as usize;
    let t_count = profile.class_count();

    let a = params.bite_rate;
    let b = params.p_infect_human;
    let c = params.p_infect_mosquito;
    let m = params.mosquito_density;
    let p = params.blood_preference;
    let q = params.sugar_preference;
    let mu = params.recovery_rate;
    let delta = params.turnover_rate;
    let theta = params.reversion_rate;
    let gamma = params.efficacy;
    let k_mean = profile.k_mean();
    // Effective attractiveness-weighted bait density.
    let y = match alloc {
        Some(al) => al.effective_y(),
        None => params.bait_density,
    };
    let den = p * k_mean + q * y;
    let zeta = delta + a * gamma * q * y / den;
    let surv = (-zeta * params.incubation_days).exp();
    let ks: Vec<f64> = profile.classes().iter().map(|&(k, _)| k).collect();
    let fractions: Vec<f64> = (0..t_count).map(|i| profile.fraction(i)).collect();

    let phi_of = |ih: &[f64]| -> f64 {
        ih.iter()
            .zip(&ks)
            .zip(&fractions)
            .map(|((&v, &k), &f)| k * v * f)
            .sum()
    };

    // History holds (phi, i_m, r_m) at each step.
    let mut history: VecDeque<[f64; 3]> = VecDeque::with_capacity(lag + 1);
    let mut ih = init.i_h_by_class.clone();
    let mut i_m = init.i_m;
    let mut r_m = init.r_m;
    let init_record = [phi_of(&ih), i_m, r_m];

    let mut labels: Vec<String> = (1..=t_count).map(|i| format!("i_h_{i}")).collect();
    labels.extend(["i_m".into(), "r_m".into(), "phi".into()]);

    let record = |ih: &[f64], i_m: f64, r_m: f64, phi: f64| -> Vec<f64> {
        let mut row = ih.to_vec();
        row.extend([i_m, r_m, phi]);
        row
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut clamp_events = 0u64;
    times.push(0.0);
    rows.push(record(&ih, i_m, r_m, init_record[0]));

    let mut dih = vec![0.0f64; t_count];
    for n in 0..steps {
        let phi = phi_of(&ih);
        let lagged = if lag == 0 {
            [phi, i_m, r_m]
        } else if n < lag {
            init_record
        } else {
            history[0]
        };

        for i in 0..t_count {
            dih[i] = a * b * m * ks[i] * p * (1.0 - ih[i]) * i_m / den - mu * ih[i];
        }
        let di_m = a * c * p * (1.0 - lagged[1] - lagged[2]) * surv * lagged[0] / den - delta * i_m;
        let dr_m = a * gamma * q * y * (1.0 - i_m - r_m) / den - (theta + delta) * r_m;

        if lag > 0 {
            history.push_back([phi, i_m, r_m]);
            if history.len() > lag {
                history.pop_front();
            }
        }
        for i in 0..t_count {
            ih[i] += dt * dih[i];
            clamp01(&mut ih[i], &mut clamp_events);
        }
        i_m += dt * di_m;
        r_m += dt * dr_m;
        clamp01(&mut i_m, &mut clamp_events);
        clamp01(&mut r_m, &mut clamp_events);

        let t = (n + 1) as f64 * dt;
        if !(i_m.is_finite() && r_m.is_finite() && ih.iter().all(|v| v.is_finite())) {
            return Err(DdeError::NonFinite { t });
        }
        times.push(t);
        rows.push(record(&ih, i_m, r_m, phi_of(&ih)));
    }

    let mut traj = Trajectory {
        dt,
        labels,
        times,
        rows,
        steady_state_reached: false,
        clamp_events,
    };
    if t_end >= STEADY_WINDOW {
        traj.steady_state_reached = detect_steady_state(&traj, STEADY_WINDOW, STEADY_TOL)?;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{endemic_equilibrium_homogeneous, r0_homogeneous};

    fn baseline(p: f64, x: f64) -> ModelParams {
        ModelParams::baseline()
            .with_blood_preference(p)
            .with_bait_density(x)
    }

    #[test]
    fn disease_free_state_is_invariant() {
        let params = baseline(0.6, 0.1);
        let traj =
            integrate_homogeneous(&params, HomogeneousState::ZERO, 0.01, 200.0).unwrap();
        let last = traj.final_state();
        assert_eq!(last[0], 0.0);
        assert_eq!(last[1], 0.0);
        // r_m converges to the closed-form removed fraction.
        let r = r0_homogeneous(&params).removed_frac;
        assert!((last[2] - r).abs() < 1e-6, "r_m = {}, r = {r}", last[2]);
    }

    #[test]
    fn converges_to_endemic_equilibrium() {
        let params = baseline(0.6, 0.1);
        let eq = endemic_equilibrium_homogeneous(&params);
        let init = HomogeneousState {
            i_h: 0.001,
            i_m: 0.0,
            r_m: 0.0,
        };
        let traj = integrate_homogeneous(&params, init, 0.01, 2000.0).unwrap();
        let last = traj.final_state();
        assert!((last[0] - eq.i_h).abs() < 1e-3, "{} vs {}", last[0], eq.i_h);
        assert!((last[1] - eq.i_m).abs() < 1e-3);
        assert!((last[2] - eq.r_m).abs() < 1e-3);
        assert!(traj.steady_state_reached);
        assert_eq!(traj.clamp_events, 0);
    }

    #[test]
    fn subcritical_infection_dies_out() {
        let params = baseline(0.2, 0.2);
        assert!(r0_homogeneous(&params).r0 < 1.0);
        let init = HomogeneousState {
            i_h: 0.1,
            i_m: 0.0,
            r_m: 0.0,
        };
        let traj = integrate_homogeneous(&params, init, 0.01, 2000.0).unwrap();
        let last = traj.final_state();
        assert!(last[0] < 1e-6);
        let r = r0_homogeneous(&params).removed_frac;
        assert!((last[2] - r).abs() < 1e-6);
    }

    #[test]
    fn single_class_matches_homogeneous_per_step() {
        let params = baseline(0.6, 0.1);
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        let init_h = HomogeneousState {
            i_h: 0.01,
            i_m: 0.005,
            r_m: 0.0,
        };
        let init = HeterogeneousState {
            i_h_by_class: vec![0.01],
            i_m: 0.005,
            r_m: 0.0,
        };
        let hom = integrate_homogeneous(&params, init_h, 0.01, 100.0).unwrap();
        let het = integrate_heterogeneous(&params, &profile, None, &init, 0.01, 100.0).unwrap();
        for (h, g) in hom.rows.iter().zip(&het.rows) {
            assert!((h[0] - g[0]).abs() <= 1e-10);
            assert!((h[1] - g[1]).abs() <= 1e-10);
            assert!((h[2] - g[2]).abs() <= 1e-10);
        }
    }

    #[test]
    fn equal_k_classes_merge() {
        let params = baseline(0.5, 0.1);
        let merged = AttractivenessProfile::single_class(3.0, 1000).unwrap();
        let split = AttractivenessProfile::new(vec![(3.0, 400), (3.0, 600)]).unwrap();
        let one = integrate_heterogeneous(
            &params,
            &merged,
            None,
            &HeterogeneousState {
                i_h_by_class: vec![0.01],
                i_m: 0.0,
                r_m: 0.0,
            },
            0.01,
            50.0,
        )
        .unwrap();
        let two = integrate_heterogeneous(
            &params,
            &split,
            None,
            &HeterogeneousState {
                i_h_by_class: vec![0.01, 0.01],
                i_m: 0.0,
                r_m: 0.0,
            },
            0.01,
            50.0,
        )
        .unwrap();
        for (a, b) in one.rows.iter().zip(&two.rows) {
            let (ih_one, ih_two) = (a[0], b[0]);
            assert!((ih_one - ih_two).abs() < 1e-12);
            assert!((b[0] - b[1]).abs() < 1e-12); // classes stay in lockstep
            let (im_a, im_b) = (a[1], b[2]);
            assert!((im_a - im_b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_matches_ode() {
        // With tau = 0 the delayed arguments are the current state; compare
        // against a direct no-history Euler loop.
        let mut params = baseline(0.6, 0.1);
        params.incubation_days = 0.0;
        let init = HomogeneousState {
            i_h: 0.01,
            i_m: 0.0,
            r_m: 0.0,
        };
        let traj = integrate_homogeneous(&params, init, 0.01, 50.0).unwrap();
        let mut s = [0.01, 0.0, 0.0];
        for row in &traj.rows {
            for i in 0..3 {
                assert!((row[i] - s[i]).abs() <= 1e-12);
            }
            let d = homogeneous_rhs(&params, s[0], s[1], s[2], s[0], s[1], s[2]);
            for i in 0..3 {
                s[i] = (s[i] + 0.01 * d[i]).clamp(0.0, 1.0);
            }
        }
    }

    #[test]
    fn first_order_step_size_convergence() {
        let params = baseline(0.6, 0.1);
        let init = HomogeneousState {
            i_h: 0.01,
            i_m: 0.0,
            r_m: 0.0,
        };
        let run = |dt: f64| {
            integrate_homogeneous(&params, init, dt, 100.0)
                .unwrap()
                .final_state()
                .to_vec()
        };
        let reference = run(0.01 / 8.0);
        let err = |dt: f64| -> f64 {
            run(dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.01) / err(0.005);
        assert!((1.6..=2.4).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn off_grid_delay_rejected() {
        let params = baseline(0.6, 0.1); // tau = 10
        assert!(matches!(
            integrate_homogeneous(&params, HomogeneousState::ZERO, 0.3, 10.0),
            Err(DdeError::DelayOffGrid { .. })
        ));
    }

    #[test]
    fn step_exceeding_delay_rejected() {
        let mut params = baseline(0.6, 0.1);
        params.incubation_days = 0.01;
        assert!(matches!(
            integrate_homogeneous(&params, HomogeneousState::ZERO, 0.01, 1.0),
            Err(DdeError::StepExceedsDelay { .. })
        ));
    }

    #[test]
    fn steady_state_detector() {
        let constant = Trajectory {
            dt: 1.0,
            labels: vec!["v".into()],
            times: (0..=200).map(f64::from).collect(),
            rows: (0..=200).map(|_| vec![0.5]).collect(),
            steady_state_reached: false,
            clamp_events: 0,
        };
        assert!(detect_steady_state(&constant, 100.0, 1e-8).unwrap());

        let ramp = Trajectory {
            dt: 1.0,
            labels: vec!["v".into()],
            times: (0..=200).map(f64::from).collect(),
            rows: (0..=200).map(|i| vec![i as f64 * 1e-4]).collect(),
            steady_state_reached: false,
            clamp_events: 0,
        };
        assert!(!detect_steady_state(&ramp, 100.0, 1e-8).unwrap());
        assert!(detect_steady_state(&ramp, 300.0, 1e-8).is_err());
    }
}
