//! Host attractiveness profiles for heterogeneous biting.
//!
//! The human population is partitioned into classes; class `i` carries an
//! attractiveness factor `k_i` that multiplies its chance of being bitten.
//! A profile stores the class decomposition together with the first and
//! second moments of the attractiveness distribution, which are the only
//! quantities the reproduction-number formulas need.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile must contain at least one class")]
    Empty,
    #[error("attractiveness factors must be positive (class {index} has k = {k})")]
    NonPositiveK { index: usize, k: f64 },
    #[error("total class population is zero")]
    ZeroPopulation,
    #[error("n_classes = {requested} exceeds the {available} integer grid points in [{k_min}, {k_max}]")]
    GridExhausted {
        requested: usize,
        available: usize,
        k_min: f64,
        k_max: f64,
    },
    #[error("power-law exponent must be > 1 (got {0})")]
    BadExponent(f64),
    #[error("k_min must be positive and below k_max (k_min = {k_min}, k_max = {k_max})")]
    BadRange { k_min: f64, k_max: f64 },
    #[error("truncated Poisson tail mass {mass:.3e} exceeds 1e-9; increase n_classes")]
    TruncationMass { mass: f64 },
    #[error("mean_k must be positive (got {0})")]
    BadMean(f64),
    #[error("no truncated Poisson mean matches target {0}")]
    MeanMatchFailed(f64),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Class decomposition `{k_i, N_i}` with precomputed moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractivenessProfile {
    classes: Vec<(f64, u64)>,
    n_hosts: u64,
    k_mean: f64,
    k_second: f64,
}

impl AttractivenessProfile {
    pub fn new(classes: Vec<(f64, u64)>) -> Result<Self, ProfileError> {
        if classes.is_empty() {
            return Err(ProfileError::Empty);
        }
        for (i, &(k, _)) in classes.iter().enumerate() {
            if !(k > 0.0) {
                return Err(ProfileError::NonPositiveK { index: i, k });
            }
        }
        let n_hosts: u64 = classes.iter().map(|&(_, n)| n).sum();
        if n_hosts == 0 {
            return Err(ProfileError::ZeroPopulation);
        }
        let total = n_hosts as f64;
        let k_mean = classes.iter().map(|&(k, n)| k * n as f64 / total).sum();
        let k_second = classes
            .iter()
            .map(|&(k, n)| k * k * n as f64 / total)
            .sum();
        Ok(AttractivenessProfile {
            classes,
            n_hosts,
            k_mean,
            k_second,
        })
    }

    /// Homogeneous population: one class of attractiveness `k`.
    pub fn single_class(k: f64, n_hosts: u64) -> Result<Self, ProfileError> {
        Self::new(vec![(k, n_hosts)])
    }

    pub fn classes(&self) -> &[(f64, u64)] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn n_hosts(&self) -> u64 {
        self.n_hosts
    }

    /// First moment of attractiveness, k-bar.
    pub fn k_mean(&self) -> f64 {
        self.k_mean
    }

    /// Second moment, k-hat.
    pub fn k_second(&self) -> f64 {
        self.k_second
    }

    /// Heterogeneity amplification factor kappa = k_second / k_mean.
    pub fn kappa(&self) -> f64 {
        self.k_second / self.k_mean
    }

    /// Class fraction P(i) = N_i / N.
    pub fn fraction(&self, i: usize) -> f64 {
        self.classes[i].1 as f64 / self.n_hosts as f64
    }

    /// Two-column text table (k_i, n_i), one class per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# attractiveness profile: k_i n_i\n");
        for &(k, n) in &self.classes {
            out.push_str(&format!("{k} {n}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ProfileError> {
        let mut classes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let missing = |what: &str| ProfileError::Parse {
                line: idx + 1,
                message: format!("missing {what}"),
            };
            let k: f64 = parts
                .next()
                .ok_or_else(|| missing("attractiveness factor"))?
                .parse()
                .map_err(|e| ProfileError::Parse {
                    line: idx + 1,
                    message: format!("bad attractiveness factor: {e}"),
                })?;
            let n: u64 = parts
                .next()
                .ok_or_else(|| missing("class population"))?
                .parse()
                .map_err(|e| ProfileError::Parse {
                    line: idx + 1,
                    message: format!("bad class population: {e}"),
                })?;
            classes.push((k, n));
        }
        Self::new(classes)
    }

    pub fn from_file(path: &Path) -> Result<Self, ProfileError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Power-law attractiveness specification: P(k) proportional to k^(-alpha)
/// over an integer grid of support points.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawSpec {
    pub exponent: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_classes: usize,
}

impl PowerLawSpec {
    pub fn new(exponent: f64, n_classes: usize) -> Self {
        PowerLawSpec {
            exponent,
            k_min: 1.0,
            k_max: 100.0,
            n_classes,
        }
    }

    fn validate(&self) -> Result<(), ProfileError> {
        if !(self.exponent > 1.0) {
            return Err(ProfileError::BadExponent(self.exponent));
        }
        if !(self.k_min > 0.0) || self.k_min >= self.k_max {
            return Err(ProfileError::BadRange {
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        Ok(())
    }
}

/// Deterministic discretization of the power-law mass function.
///
/// Support points are evenly spaced on the integer grid between `k_min` and
/// `k_max`; class populations use largest-remainder rounding so they sum to
/// `n_hosts` exactly. No sampling is involved.
pub fn power_law_profile(
    spec: &PowerLawSpec,
    n_hosts: u64,
) -> Result<AttractivenessProfile, ProfileError> {
    spec.validate()?;
    let lo = spec.k_min.round() as i64;
    let hi = spec.k_max.round() as i64;
    let available = (hi - lo + 1).max(0) as usize;
    let t = spec.n_classes;
    if t == 0 || t > available {
        return Err(ProfileError::GridExhausted {
            requested: t,
            available,
            k_min: spec.k_min,
            k_max: spec.k_max,
        });
    }
    let mut ks: Vec<i64> = if t == available {
        (lo..=hi).collect()
    } else if t == 1 {
        vec![lo]
    } else {
        (0..t)
            .map(|j| lo + ((j as f64) * (hi - lo) as f64 / (t - 1) as f64).round() as i64)
            .collect()
    };
    ks.dedup();
    if ks.len() != t {
        return Err(ProfileError::GridExhausted {
            requested: t,
            available,
            k_min: spec.k_min,
            k_max: spec.k_max,
        });
    }

    let weights: Vec<f64> = ks
        .iter()
        .map(|&k| (k as f64).powf(-spec.exponent))
        .collect();
    let populations = largest_remainder(&weights, n_hosts);
    AttractivenessProfile::new(
        ks.iter()
            .zip(populations)
            .map(|(&k, n)| (k as f64, n))
            .collect(),
    )
}

/// Zero-truncated Poisson profile on k in {1..n_classes}, renormalized.
pub fn poisson_profile(
    mean_k: f64,
    n_classes: usize,
    n_hosts: u64,
) -> Result<AttractivenessProfile, ProfileError> {
    if !(mean_k > 0.0) {
        return Err(ProfileError::BadMean(mean_k));
    }
    if n_classes == 0 {
        return Err(ProfileError::Empty);
    }
    // pmf(k) for k = 1..n_classes plus relative tail mass beyond the support.
    let (weights, tail) = truncated_poisson_weights(mean_k, n_classes);
    if tail >= 1e-9 {
        return Err(ProfileError::TruncationMass { mass: tail });
    }
    let populations = largest_remainder(&weights, n_hosts);
    AttractivenessProfile::new(
        (1..=n_classes)
            .map(|k| k as f64)
            .zip(populations)
            .collect(),
    )
}

/// Poisson profile whose truncated mean k-bar matches `target_k_mean`.
///
/// The Poisson rate is found by bisection on the zero-truncated mean, which
/// is strictly increasing in the rate.
pub fn poisson_profile_mean_matched(
    target_k_mean: f64,
    n_classes: usize,
    n_hosts: u64,
) -> Result<AttractivenessProfile, ProfileError> {
    if !(target_k_mean > 1.0) {
        return Err(ProfileError::MeanMatchFailed(target_k_mean));
    }
    let mean_of = |lambda: f64| -> f64 {
        let (w, _) = truncated_poisson_weights(lambda, n_classes);
        let z: f64 = w.iter().sum();
        w.iter()
            .enumerate()
            .map(|(i, wi)| (i + 1) as f64 * wi / z)
            .sum()
    };
    let (mut lo, mut hi) = (1e-9, n_classes as f64 * 4.0);
    if mean_of(hi) < target_k_mean {
        return Err(ProfileError::MeanMatchFailed(target_k_mean));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) < target_k_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    poisson_profile(0.5 * (lo + hi), n_classes, n_hosts)
}

/// Poisson pmf on {1..t} (unnormalized, conditioned on k >= 1) and the
/// relative mass lost to truncation at t.
fn truncated_poisson_weights(lambda: f64, t: usize) -> (Vec<f64>, f64) {
    let mut weights = Vec::with_capacity(t);
    // pmf(k) / pmf(0) accumulated iteratively to avoid factorials.
    let mut term = 1.0f64;
    let mut inside = 0.0f64;
    for k in 1..=t {
        term *= lambda / k as f64;
        weights.push(term);
        inside += term;
    }
    let total = lambda.exp_m1(); // sum over all k >= 1 of lambda^k / k!
    let tail = ((total - inside) / total).max(0.0);
    (weights, tail)
}

/// Splits `total` into integer parts proportional to `weights`, with
/// largest-remainder correction so the parts sum to `total` exactly.
pub(crate) fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / wsum * total as f64).collect();
    let mut parts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut leftover = total - assigned;
    for &i in &order {
        if leftover == 0 {
            break;
        }
        parts[i] += 1;
        leftover -= 1;
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_definitional_sums() {
        let spec = PowerLawSpec::new(2.8, 100);
        let profile = power_law_profile(&spec, 1000).unwrap();
        let n = profile.n_hosts() as f64;
        let mean: f64 = profile
            .classes()
            .iter()
            .map(|&(k, c)| k * c as f64 / n)
            .sum();
        let second: f64 = profile
            .classes()
            .iter()
            .map(|&(k, c)| k * k * c as f64 / n)
            .sum();
        assert!((profile.k_mean() - mean).abs() <= 1e-12 * mean);
        assert!((profile.k_second() - second).abs() <= 1e-12 * second);
        assert!(profile.kappa() > profile.k_mean());
    }

    #[test]
    fn populations_sum_exactly() {
        for &n in &[1u64, 7, 999, 1000, 12345] {
            let profile = power_law_profile(&PowerLawSpec::new(2.8, 100), n).unwrap();
            assert_eq!(profile.classes().iter().map(|&(_, c)| c).sum::<u64>(), n);
        }
    }

    #[test]
    fn steep_exponent_concentrates_at_k_min() {
        let profile = power_law_profile(&PowerLawSpec::new(50.0, 100), 1000).unwrap();
        assert_eq!(profile.classes()[0], (1.0, 1000));
        assert!((profile.k_mean() - 1.0).abs() < 1e-12);
        assert!((profile.kappa() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_homogeneous() {
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        assert_eq!(profile.k_mean(), 1.0);
        assert_eq!(profile.kappa(), 1.0);
    }

    #[test]
    fn poisson_moments_match_truncated_mass() {
        let profile = poisson_profile(2.0, 50, 100_000).unwrap();
        // Oracle: direct summation over the truncated mass function.
        let lambda: f64 = 2.0;
        let mut term = 1.0;
        let mut z = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for k in 1..=50u32 {
            term *= lambda / k as f64;
            z += term;
            m1 += k as f64 * term;
            m2 += (k as f64) * (k as f64) * term;
        }
        let (k_mean, k_second) = (m1 / z, m2 / z);
        // Rounding to 100k hosts perturbs moments at the 1e-4 level.
        assert!((profile.k_mean() - k_mean).abs() < 1e-3);
        assert!((profile.kappa() - k_second / k_mean).abs() < 1e-3);
    }

    #[test]
    fn poisson_single_class_degenerates() {
        // Tiny rate keeps the relative tail mass below the truncation guard.
        let profile = poisson_profile(1e-9, 1, 1000).unwrap();
        assert_eq!(profile.class_count(), 1);
        assert_eq!(profile.k_mean(), profile.kappa());
    }

    #[test]
    fn poisson_truncation_mass_rejected() {
        assert!(matches!(
            poisson_profile(30.0, 5, 1000),
            Err(ProfileError::TruncationMass { .. })
        ));
    }

    #[test]
    fn mean_matching_hits_target() {
        let target = power_law_profile(&PowerLawSpec::new(2.8, 100), 1000)
            .unwrap()
            .k_mean();
        let matched = poisson_profile_mean_matched(target, 50, 1_000_000).unwrap();
        // Integer class populations limit how closely the mean is realized.
        assert!((matched.k_mean() - target).abs() < 1e-3, "got {}", matched.k_mean());
    }

    #[test]
    fn text_round_trip() {
        let profile = power_law_profile(&PowerLawSpec::new(2.8, 10), 500).unwrap();
        let parsed = AttractivenessProfile::from_text(&profile.to_text()).unwrap();
        assert_eq!(profile, parsed);
    }

    #[test]
    fn grid_exhaustion_rejected() {
        let spec = PowerLawSpec {
            exponent: 2.0,
            k_min: 1.0,
            k_max: 10.0,
            n_classes: 11,
        };
        assert!(matches!(
            power_law_profile(&spec, 100),
            Err(ProfileError::GridExhausted { .. })
        ));
    }
}
