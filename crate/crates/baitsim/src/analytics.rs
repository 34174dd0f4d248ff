//! Closed-form reproduction numbers, equilibria and the stability probe.
//!
//! All three R0 variants share one backbone. With mean attractiveness
//! `k_mean`, amplification `kappa = k_second/k_mean` and effective
//! attractiveness-weighted bait density `y`:
//!
//! ```text
//! r    = a*gamma*q*y / ((p*k_mean + q*y)(delta + theta) + a*gamma*q*y)
//! zeta = delta + a*gamma*q*y / (p*k_mean + q*y)
//! R0   = a^2 b c m p^2 k_mean kappa (1 - r) e^(-zeta*tau)
//!        / (delta mu (p*k_mean + q*y)^2)
//! ```
//!
//! The homogeneous case is `k_mean = kappa = 1`, `y = x`; uniform baits in a
//! heterogeneous population use `y = x`; targeted baits use
//! `y = sum_i k_i B_i / N`.

use thiserror::Error;

use crate::allocation::BaitAllocation;
use crate::params::ModelParams;
use crate::profile::AttractivenessProfile;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("allocation has {alloc} classes but profile has {profile}")]
    ClassCountMismatch { alloc: usize, profile: usize },
    #[error("r0 does not depend on bait density (efficacy or sugar preference is zero)")]
    BaitIneffective,
    #[error("r0 stays above 1 for all x <= {x_max}; threshold beyond search bound")]
    ThresholdBeyondBound { x_max: f64 },
}

/// Which mixing/bait scenario a result was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixing {
    Homogeneous,
    HeterogeneousUniform,
    HeterogeneousTargeted,
}

/// A reproduction number together with its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Result {
    pub r0: f64,
    /// Exposed-class decay rate: Lambda (homogeneous) or zeta (heterogeneous).
    pub lambda_eff: f64,
    /// Disease-free removed fraction: r (homogeneous) or r_m2.
    pub removed_frac: f64,
    pub scenario: Mixing,
}

/// Core evaluation shared by every scenario.
fn r0_with_moments(
    params: &ModelParams,
    k_mean: f64,
    kappa: f64,
    y: f64,
    scenario: Mixing,
) -> R0Result {
    let a = params.bite_rate;
    let b = params.p_infect_human;
    let c = params.p_infect_mosquito;
    let m = params.mosquito_density;
    let p = params.blood_preference;
    let q = params.sugar_preference;
    let tau = params.incubation_days;
    let gamma = params.efficacy;
    let theta = params.reversion_rate;
    let mu = params.recovery_rate;
    let delta = params.turnover_rate;

    let denom = p * k_mean + q * y;
    let bait_term = a * gamma * q * y;
    let removed_frac = bait_term / (denom * (delta + theta) + bait_term);
    let lambda_eff = delta + bait_term / denom;
    let r0 = a * a * b * c * m * p * p * k_mean * kappa * (1.0 - removed_frac)
        * (-lambda_eff * tau).exp()
        / (delta * mu * denom * denom);
    R0Result {
        r0,
        lambda_eff,
        removed_frac,
        scenario,
    }
}

/// Reproduction number under homogeneous mixing and uniform baits.
pub fn r0_homogeneous(params: &ModelParams) -> R0Result {
    r0_with_moments(params, 1.0, 1.0, params.bait_density, Mixing::Homogeneous)
}

/// Reproduction number under heterogeneous mixing and uniform baits.
pub fn r0_heterogeneous(params: &ModelParams, profile: &AttractivenessProfile) -> R0Result {
    r0_with_moments(
        params,
        profile.k_mean(),
        profile.kappa(),
        params.bait_density,
        Mixing::HeterogeneousUniform,
    )
}

/// Reproduction number for class-targeted baits described by `alloc`.
pub fn r0_targeted(
    params: &ModelParams,
    profile: &AttractivenessProfile,
    alloc: &BaitAllocation,
) -> Result<R0Result, AnalyticsError> {
    if alloc.class_count() != profile.class_count() {
        return Err(AnalyticsError::ClassCountMismatch {
            alloc: alloc.class_count(),
            profile: profile.class_count(),
        });
    }
    Ok(r0_with_moments(
        params,
        profile.k_mean(),
        profile.kappa(),
        alloc.effective_y(),
        Mixing::HeterogeneousTargeted,
    ))
}

/// Closed form for baits allocated proportionally to class attractiveness
/// (constraints C_i = x k_i N_i / k_mean, all filled), where y = x * kappa.
pub fn r0_proportional_targeted(
    params: &ModelParams,
    profile: &AttractivenessProfile,
    x: f64,
) -> R0Result {
    r0_with_moments(
        params,
        profile.k_mean(),
        profile.kappa(),
        x * profile.kappa(),
        Mixing::HeterogeneousTargeted,
    )
}

/// Endemic or disease-free equilibrium of the homogeneous system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResult {
    /// Infected host proportion.
    pub i_h: f64,
    /// Infectious mosquito proportion.
    pub i_m: f64,
    /// Removed mosquito proportion.
    pub r_m: f64,
    pub endemic: bool,
}

/// Closed-form equilibrium of the homogeneous system.
///
/// Subcritical parameters give the disease-free point (0, 0, r); above
/// threshold the unique endemic point is returned.
pub fn endemic_equilibrium_homogeneous(params: &ModelParams) -> EquilibriumResult {
    let res = r0_homogeneous(params);
    let r = res.removed_frac;
    if res.r0 <= 1.0 {
        return EquilibriumResult {
            i_h: 0.0,
            i_m: 0.0,
            r_m: r,
            endemic: false,
        };
    }
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
    let denom = p + q * x;
    let surv = (-res.lambda_eff * params.incubation_days).exp();

    let i_h = (res.r0 - 1.0) * delta * mu * denom * denom
        / ((1.0 - r) * a * c * p * surv * (a * b * m * p + mu * denom));
    let i_m = (res.r0 - 1.0) * denom * denom * mu * delta
        / (a * b * m
            * p
            * (1.0 - r)
            * (delta * denom + a * c * p * surv + delta * a * gamma * q * x / (delta + theta)));
    EquilibriumResult {
        i_h,
        i_m,
        r_m: r * (1.0 - i_m),
        endemic: true,
    }
}

/// Result of [`critical_bait_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDensity {
    /// Smallest bait density with r0 <= 1.
    pub x_star: f64,
    /// True when r0 was already <= 1 at x = 0 (x_star is 0).
    pub already_subcritical: bool,
}

pub const CRITICAL_X_MAX: f64 = 100.0;
pub const CRITICAL_X_TOL: f64 = 1e-6;

/// Bisects for the smallest bait density that drives `r0_of_x` to 1.
///
/// Relies on r0 being continuous and strictly decreasing in x whenever baits
/// have any effect. `tol` is an absolute tolerance on x.
pub fn critical_density_by(
    r0_of_x: impl Fn(f64) -> f64,
    x_max: f64,
    tol: f64,
) -> Result<CriticalDensity, AnalyticsError> {
    let at_zero = r0_of_x(0.0);
    if at_zero <= 1.0 {
        return Ok(CriticalDensity {
            x_star: 0.0,
            already_subcritical: true,
        });
    }
    if r0_of_x(x_max) > 1.0 {
        // Flat-in-x r0 (gamma = 0 or q = 0) can never cross.
        if (r0_of_x(x_max) - at_zero).abs() < 1e-14 * at_zero {
            return Err(AnalyticsError::BaitIneffective);
        }
        return Err(AnalyticsError::ThresholdBeyondBound { x_max });
    }
    let (mut lo, mut hi) = (0.0f64, x_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if r0_of_x(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalDensity {
        x_star: 0.5 * (lo + hi),
        already_subcritical: false,
    })
}

/// Critical bait density for the chosen scenario at default bounds.
pub fn critical_bait_density(
    params: &ModelParams,
    scenario: Mixing,
    profile: Option<&AttractivenessProfile>,
) -> Result<CriticalDensity, AnalyticsError> {
    let base = params.clone();
    let r0_of_x = move |x: f64| -> f64 {
        let p = base.clone().with_bait_density(x);
        match (scenario, profile) {
            (Mixing::Homogeneous, _) => r0_homogeneous(&p).r0,
            (Mixing::HeterogeneousUniform, Some(prof)) => r0_heterogeneous(&p, prof).r0,
            (Mixing::HeterogeneousTargeted, Some(prof)) => {
                r0_proportional_targeted(&p, prof, x).r0
            }
            _ => r0_homogeneous(&p).r0,
        }
    };
    critical_density_by(r0_of_x, CRITICAL_X_MAX, CRITICAL_X_TOL)
}

/// Verdict of the disease-free-equilibrium stability probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    /// F(0) = delta*mu*(1 - R0); negative exactly when R0 > 1.
    pub f_at_zero: f64,
    pub has_positive_real_root: bool,
    /// The positive real root when one exists.
    pub root: Option<f64>,
    /// Root of the always-stable linear factor (negative for valid params).
    pub linear_factor_root: f64,
    pub unstable: bool,
    pub r0: f64,
}

/// Probes the characteristic function of the linearized system at the
/// disease-free equilibrium for a positive real root.
///
/// `F(lambda) = lambda^2 + lambda(delta+mu) + delta*mu - R0*e^(-lambda*tau)*delta*mu`
/// is strictly increasing on `lambda >= 0`, so a positive real root exists
/// iff `F(0) < 0`, i.e. iff R0 > 1. Only the real axis is probed; the
/// transcendental factor has no purely imaginary roots when R0 < 1.
pub fn stability_probe(
    params: &ModelParams,
    scenario: Mixing,
    profile: Option<&AttractivenessProfile>,
) -> StabilityVerdict {
    let res = match (scenario, profile) {
        (Mixing::Homogeneous, _) | (_, None) => r0_homogeneous(params),
        (Mixing::HeterogeneousUniform, Some(p)) => r0_heterogeneous(params, p),
        (Mixing::HeterogeneousTargeted, Some(p)) => {
            r0_proportional_targeted(params, p, params.bait_density)
        }
    };
    let r0 = res.r0;
    let delta = params.turnover_rate;
    let mu = params.recovery_rate;
    let tau = params.incubation_days;
    let f = |lambda: f64| {
        lambda * lambda + lambda * (delta + mu) + delta * mu
            - r0 * (-lambda * tau).exp() * delta * mu
    };
    let f0 = delta * mu * (1.0 - r0);
    // Past lambda_max the quadratic part dominates the bounded exponential.
    let lambda_max = delta + mu + r0 * delta * mu + 1.0;
    let mut root = None;
    if f0 < 0.0 {
        debug_assert!(f(lambda_max) > 0.0);
        let (mut lo, mut hi) = (0.0f64, lambda_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        root = Some(0.5 * (lo + hi));
    }
    // Linear factor lambda + delta + theta + a*gamma*q*x/(p + q*x): every
    // term in the constant is nonnegative with delta > 0, so its root is
    // negative.
    let denom = params.blood_preference + params.sugar_preference * params.bait_density;
    let linear_factor_root = -(delta
        + params.reversion_rate
        + params.bite_rate * params.efficacy * params.sugar_preference * params.bait_density
            / denom);
    StabilityVerdict {
        f_at_zero: f0,
        has_positive_real_root: root.is_some(),
        root,
        linear_factor_root,
        unstable: root.is_some(),
        r0,
    }
}
