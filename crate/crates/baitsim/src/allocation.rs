//! Constrained distribution of sugar baits over host classes.
//!
//! Placing baits near highly attractive hosts raises the chance that a
//! mosquito's sugar meal is an effective one. The attractiveness-weighted
//! bait density `y = sum_i k_i B_i / N` is what enters the reproduction
//! number, and R0 is strictly decreasing in y, so the optimizer maximizes y
//! subject to per-class caps `C_i` and the total budget.

use thiserror::Error;

use crate::profile::AttractivenessProfile;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("constraint list has {constraints} entries but profile has {classes} classes")]
    LengthMismatch { constraints: usize, classes: usize },
    #[error("classes {first} and {second} share attractiveness factor {k}; greedy optimality requires distinct k_i")]
    DuplicateK { first: usize, second: usize, k: f64 },
    #[error("bait list has {baits} entries but profile has {classes} classes")]
    BaitLengthMismatch { baits: usize, classes: usize },
    #[error("bait count {b} exceeds constraint {c} in class {index}")]
    ConstraintViolated { index: usize, b: u64, c: u64 },
    #[error("instance too large for exhaustive search: product of (C_i + 1) is {size}, limit {limit}")]
    InstanceTooLarge { size: u128, limit: u128 },
}

/// Per-class bait counts together with their constraints and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BaitAllocation {
    baits_by_class: Vec<u64>,
    constraints_by_class: Vec<u64>,
    budget: u64,
    effective_y: f64,
}

impl BaitAllocation {
    /// Wraps explicit bait counts, checking them against the constraints.
    pub fn new(
        profile: &AttractivenessProfile,
        constraints: Vec<u64>,
        baits: Vec<u64>,
    ) -> Result<Self, AllocationError> {
        if constraints.len() != profile.class_count() {
            return Err(AllocationError::LengthMismatch {
                constraints: constraints.len(),
                classes: profile.class_count(),
            });
        }
        if baits.len() != profile.class_count() {
            return Err(AllocationError::BaitLengthMismatch {
                baits: baits.len(),
                classes: profile.class_count(),
            });
        }
        for (i, (&b, &c)) in baits.iter().zip(&constraints).enumerate() {
            if b > c {
                return Err(AllocationError::ConstraintViolated { index: i, b, c });
            }
        }
        let budget = baits.iter().sum();
        let effective_y = effective_density(profile, &baits);
        Ok(BaitAllocation {
            baits_by_class: baits,
            constraints_by_class: constraints,
            budget,
            effective_y,
        })
    }

    pub fn baits(&self) -> &[u64] {
        &self.baits_by_class
    }

    pub fn constraints(&self) -> &[u64] {
        &self.constraints_by_class
    }

    pub fn total_baits(&self) -> u64 {
        self.baits_by_class.iter().sum()
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn class_count(&self) -> usize {
        self.baits_by_class.len()
    }

    /// Attractiveness-weighted bait density y = sum k_i B_i / N.
    pub fn effective_y(&self) -> f64 {
        self.effective_y
    }

    /// Objective value sum k_i B_i (= N * y).
    pub fn objective(&self, profile: &AttractivenessProfile) -> f64 {
        self.baits_by_class
            .iter()
            .zip(profile.classes())
            .map(|(&b, &(k, _))| k * b as f64)
            .sum()
    }

    /// Three-column text table (k_i, C_i, B_i), one class per line.
    pub fn to_text(&self, profile: &AttractivenessProfile) -> String {
        let mut out = String::from("# bait allocation: k_i C_i B_i\n");
        for ((&(k, _), &c), &b) in profile
            .classes()
            .iter()
            .zip(&self.constraints_by_class)
            .zip(&self.baits_by_class)
        {
            out.push_str(&format!("{k} {c} {b}\n"));
        }
        out
    }
}

fn effective_density(profile: &AttractivenessProfile, baits: &[u64]) -> f64 {
    let n = profile.n_hosts() as f64;
    baits
        .iter()
        .zip(profile.classes())
        .map(|(&b, &(k, _))| k * b as f64)
        .sum::<f64>()
        / n
}

/// Fills classes to capacity in decreasing attractiveness order until the
/// budget runs out; at most one class ends up partially filled.
///
/// Requires pairwise-distinct attractiveness factors, which is what makes
/// the greedy solution the unique maximizer of y.
pub fn greedy_allocate(
    profile: &AttractivenessProfile,
    constraints: &[u64],
    budget: u64,
) -> Result<BaitAllocation, AllocationError> {
    if constraints.len() != profile.class_count() {
        return Err(AllocationError::LengthMismatch {
            constraints: constraints.len(),
            classes: profile.class_count(),
        });
    }
    let mut order: Vec<usize> = (0..profile.class_count()).collect();
    order.sort_by(|&a, &b| {
        profile.classes()[b]
            .0
            .partial_cmp(&profile.classes()[a].0)
            .unwrap()
    });
    for w in order.windows(2) {
        let (ka, kb) = (profile.classes()[w[0]].0, profile.classes()[w[1]].0);
        if ka == kb {
            return Err(AllocationError::DuplicateK {
                first: w[0].min(w[1]),
                second: w[0].max(w[1]),
                k: ka,
            });
        }
    }
    let mut baits = vec![0u64; constraints.len()];
    let mut remaining = budget;
    for &i in &order {
        let take = remaining.min(constraints[i]);
        baits[i] = take;
        remaining -= take;
        if remaining == 0 {
            break;
        }
    }
    let mut alloc = BaitAllocation::new(profile, constraints.to_vec(), baits)?;
    alloc.budget = budget;
    Ok(alloc)
}

/// Exhaustive-search result: the maximizing allocation and whether the
/// maximizer was unique.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub allocation: BaitAllocation,
    pub objective: f64,
    pub unique: bool,
}

const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Enumerates every feasible allocation with `sum B_i = min(budget, sum C_i)`
/// and returns one maximizing `sum k_i B_i`. Tolerates duplicate k_i (it may
/// then report a non-unique maximizer). Intended as an optimality oracle for
/// small instances only.
pub fn brute_force_allocate(
    profile: &AttractivenessProfile,
    constraints: &[u64],
    budget: u64,
) -> Result<BruteForceResult, AllocationError> {
    if constraints.len() != profile.class_count() {
        return Err(AllocationError::LengthMismatch {
            constraints: constraints.len(),
            classes: profile.class_count(),
        });
    }
    let size: u128 = constraints
        .iter()
        .map(|&c| c as u128 + 1)
        .product();
    if size > BRUTE_FORCE_LIMIT {
        return Err(AllocationError::InstanceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let target: u64 = budget.min(constraints.iter().sum());
    let ks: Vec<f64> = profile.classes().iter().map(|&(k, _)| k).collect();

    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut unique = true;
    let mut current = vec![0u64; constraints.len()];

    fn recurse(
        idx: usize,
        spent: u64,
        target: u64,
        constraints: &[u64],
        ks: &[f64],
        current: &mut Vec<u64>,
        best: &mut Option<(f64, Vec<u64>)>,
        unique: &mut bool,
    ) {
        if idx == constraints.len() {
            if spent != target {
                return;
            }
            let obj: f64 = current.iter().zip(ks).map(|(&b, &k)| k * b as f64).sum();
            match best {
                None => *best = Some((obj, current.clone())),
                Some((b_obj, b_vec)) => {
                    let scale = b_obj.abs().max(1.0);
                    if obj > *b_obj + 1e-12 * scale {
                        *b_obj = obj;
                        *b_vec = current.clone();
                        *unique = true;
                    } else if (obj - *b_obj).abs() <= 1e-12 * scale && *b_vec != *current {
                        *unique = false;
                    }
                }
            }
            return;
        }
        // Prune branches that cannot reach the target.
        let remaining_cap: u64 = constraints[idx..].iter().sum();
        if spent + remaining_cap < target || spent > target {
            return;
        }
        for b in 0..=constraints[idx].min(target - spent) {
            current[idx] = b;
            recurse(idx + 1, spent + b, target, constraints, ks, current, best, unique);
        }
        current[idx] = 0;
    }

    recurse(
        0,
        0,
        target,
        constraints,
        &ks,
        &mut current,
        &mut best,
        &mut unique,
    );
    let (objective, baits) = best.expect("target is always reachable");
    let mut allocation = BaitAllocation::new(profile, constraints.to_vec(), baits)?;
    allocation.budget = budget;
    Ok(BruteForceResult {
        allocation,
        objective,
        unique,
    })
}

/// Illustrative constraint rule C_i = x k_i N_i / k_mean, rounded by largest
/// remainder so the caps sum to round(N x). Under these caps the greedy fill
/// uses every cap and y = x * kappa up to rounding.
pub fn proportional_constraints(profile: &AttractivenessProfile, x: f64) -> Vec<u64> {
    let total = (profile.n_hosts() as f64 * x).round() as u64;
    let weights: Vec<f64> = profile
        .classes()
        .iter()
        .map(|&(k, n)| k * n as f64)
        .collect();
    if weights.iter().sum::<f64>() == 0.0 || total == 0 {
        return vec![0; profile.class_count()];
    }
    crate::profile::largest_remainder(&weights, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{power_law_profile, PowerLawSpec};

    fn three_class() -> AttractivenessProfile {
        AttractivenessProfile::new(vec![(1.0, 400), (2.0, 300), (3.0, 300)]).unwrap()
    }

    #[test]
    fn greedy_fills_high_k_first() {
        let profile = three_class();
        let alloc = greedy_allocate(&profile, &[5, 5, 5], 8).unwrap();
        assert_eq!(alloc.baits(), &[0, 3, 5]);
        assert!((alloc.effective_y() - 21.0 / 1000.0).abs() < 1e-15);
        let oracle = brute_force_allocate(&profile, &[5, 5, 5], 8).unwrap();
        assert_eq!(oracle.allocation.baits(), alloc.baits());
        assert_eq!(oracle.objective, 21.0);
        assert!(oracle.unique);
    }

    #[test]
    fn zero_budget() {
        let alloc = greedy_allocate(&three_class(), &[5, 5, 5], 0).unwrap();
        assert_eq!(alloc.baits(), &[0, 0, 0]);
    }

    #[test]
    fn slack_budget_fills_all_constraints() {
        let alloc = greedy_allocate(&three_class(), &[5, 5, 5], 100).unwrap();
        assert_eq!(alloc.baits(), &[5, 5, 5]);
    }

    #[test]
    fn duplicate_k_rejected_by_greedy_tolerated_by_oracle() {
        let profile = AttractivenessProfile::new(vec![(2.0, 500), (2.0, 500)]).unwrap();
        match greedy_allocate(&profile, &[3, 3], 3) {
            Err(AllocationError::DuplicateK { first, second, .. }) => {
                assert_eq!((first, second), (0, 1));
            }
            other => panic!("expected DuplicateK, got {other:?}"),
        }
        let oracle = brute_force_allocate(&profile, &[3, 3], 3).unwrap();
        assert!(!oracle.unique);
        assert_eq!(oracle.objective, 6.0);
    }

    #[test]
    fn oversized_instance_rejected() {
        let profile = three_class();
        assert!(matches!(
            brute_force_allocate(&profile, &[10_000_000, 10_000_000, 4], 5),
            Err(AllocationError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn proportional_constraints_sum_and_y() {
        let profile = power_law_profile(&PowerLawSpec::new(2.8, 100), 1000).unwrap();
        let x = 0.25;
        let constraints = proportional_constraints(&profile, x);
        let total: u64 = constraints.iter().sum();
        assert_eq!(total, 250);
        let alloc = greedy_allocate(&profile, &constraints, total).unwrap();
        assert_eq!(alloc.baits(), &constraints[..]);
        // y = x * kappa up to integer rounding of the caps.
        let expected = x * profile.kappa();
        assert!(
            (alloc.effective_y() - expected).abs() < 0.05 * expected,
            "y = {}, expected ~{expected}",
            alloc.effective_y()
        );
    }

    #[test]
    fn proportional_single_class() {
        let profile = AttractivenessProfile::single_class(1.0, 1000).unwrap();
        assert_eq!(proportional_constraints(&profile, 0.3), vec![300]);
    }

    #[test]
    fn monotone_in_budget_and_constraints() {
        let profile = three_class();
        let mut prev = -1.0;
        for budget in 0..=15 {
            let y = greedy_allocate(&profile, &[5, 5, 5], budget)
                .unwrap()
                .effective_y();
            assert!(y >= prev);
            prev = y;
        }
        let tight = greedy_allocate(&profile, &[5, 2, 5], 10).unwrap().effective_y();
        let relaxed = greedy_allocate(&profile, &[5, 4, 5], 10).unwrap().effective_y();
        assert!(relaxed >= tight);
    }
}
