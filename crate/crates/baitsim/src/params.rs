//! Scalar model parameters and their validation.

/// All scalar rates, probabilities and densities of the transmission model.
///
/// Rates are per day, durations in days. `sugar_preference` is stored
/// redundantly and validated against `1 - blood_preference` so that config
/// typos surface instead of silently skewing results.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Number of human hosts (N).
    pub n_hosts: u64,
    /// Number of mosquitoes (M).
    pub n_mosquitoes: u64,
    /// Biting rate per mosquito (a), bites per day.
    pub bite_rate: f64,
    /// Probability that a bite by an infectious mosquito infects the human (b).
    pub p_infect_human: f64,
    /// Probability that biting an infected human infects the mosquito (c).
    pub p_infect_mosquito: f64,
    /// Mosquitoes per host (m = M/N).
    pub mosquito_density: f64,
    /// Baits per host (x = B/N).
    pub bait_density: f64,
    /// Preference for a blood meal (p).
    pub blood_preference: f64,
    /// Preference for a sugar meal (q = 1 - p).
    pub sugar_preference: f64,
    /// Incubation period inside the mosquito (tau), days.
    pub incubation_days: f64,
    /// Probability that an ingested bacterial dose kills the parasite (gamma).
    pub efficacy: f64,
    /// Rate at which the bacterial effect wears off (theta = 1/persistence).
    pub reversion_rate: f64,
    /// Human recovery rate (mu).
    pub recovery_rate: f64,
    /// Mosquito birth/death rate (delta); births equal deaths.
    pub turnover_rate: f64,
}

impl ModelParams {
    /// Literature baseline: a=0.5, b=c=0.5, m=2, tau=10d, gamma=0.8,
    /// theta=0.2, mu=0.05, delta=0.1, N=1000, p=0.5, no baits.
    pub fn baseline() -> Self {
        ModelParams {
            n_hosts: 1000,
            n_mosquitoes: 2000,
            bite_rate: 0.5,
            p_infect_human: 0.5,
            p_infect_mosquito: 0.5,
            mosquito_density: 2.0,
            bait_density: 0.0,
            blood_preference: 0.5,
            sugar_preference: 0.5,
            incubation_days: 10.0,
            efficacy: 0.8,
            reversion_rate: 0.2,
            recovery_rate: 0.05,
            turnover_rate: 0.1,
        }
    }

    /// Sets the blood-meal preference and keeps q = 1 - p consistent.
    pub fn with_blood_preference(mut self, p: f64) -> Self {
        self.blood_preference = p;
        self.sugar_preference = 1.0 - p;
        self
    }

    pub fn with_bait_density(mut self, x: f64) -> Self {
        self.bait_density = x;
        self
    }

    /// Checks every structural invariant; never panics or errors.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let mut prob = |name: &str, value: f64| {
            if !(0.0..=1.0).contains(&value) {
                v.push(Violation {
                    field: name.to_string(),
                    message: format!("{name} out of [0,1] (got {value})"),
                });
            }
        };
        prob("p_infect_human", self.p_infect_human);
        prob("p_infect_mosquito", self.p_infect_mosquito);
        prob("blood_preference", self.blood_preference);
        prob("efficacy", self.efficacy);

        let mut positive = |name: &str, value: f64| {
            if !(value > 0.0) {
                v.push(Violation {
                    field: name.to_string(),
                    message: format!("{name} must be > 0 (got {value})"),
                });
            }
        };
        positive("bite_rate", self.bite_rate);
        positive("recovery_rate", self.recovery_rate);
        positive("turnover_rate", self.turnover_rate);
        positive("reversion_rate", self.reversion_rate);
        positive("incubation_days", self.incubation_days);
        positive("mosquito_density", self.mosquito_density);

        if !(self.bait_density >= 0.0) {
            v.push(Violation {
                field: "bait_density".into(),
                message: format!("bait_density must be >= 0 (got {})", self.bait_density),
            });
        }
        if self.n_hosts == 0 {
            v.push(Violation {
                field: "n_hosts".into(),
                message: "n_hosts must be positive".into(),
            });
        }
        if self.n_mosquitoes == 0 {
            v.push(Violation {
                field: "n_mosquitoes".into(),
                message: "n_mosquitoes must be positive".into(),
            });
        }

        let q_expected = 1.0 - self.blood_preference;
        if (self.sugar_preference - q_expected).abs() > 1e-12 {
            v.push(Violation {
                field: "sugar_preference".into(),
                message: format!(
                    "q != 1 - p (q = {}, 1 - p = {q_expected})",
                    self.sugar_preference
                ),
            });
        }

        // Density must agree with the counts to within one mosquito.
        if self.n_hosts > 0 {
            let ratio = self.n_mosquitoes as f64 / self.n_hosts as f64;
            if (self.mosquito_density - ratio).abs() > 1.0 / self.n_hosts as f64 {
                v.push(Violation {
                    field: "mosquito_density".into(),
                    message: format!(
                        "m = {} inconsistent with M/N = {ratio}",
                        self.mosquito_density
                    ),
                });
            }
        }

        ValidationReport { violations: v }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Outcome of [`ModelParams::validate`]: empty means every invariant holds.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "pass")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {}", v.message)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_passes() {
        assert!(ModelParams::baseline().validate().is_valid());
    }

    #[test]
    fn out_of_range_probability_flagged() {
        let mut p = ModelParams::baseline();
        p.p_infect_human = 1.5;
        let report = p.validate();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.field == "p_infect_human"));
    }

    #[test]
    fn inconsistent_q_flagged() {
        let mut p = ModelParams::baseline().with_blood_preference(0.6);
        p.sugar_preference = 0.5;
        let report = p.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "sugar_preference"));
    }

    #[test]
    fn density_count_mismatch_flagged() {
        let mut p = ModelParams::baseline();
        p.n_mosquitoes = 1500; // m still 2.0
        assert!(!p.validate().is_valid());
    }
}
