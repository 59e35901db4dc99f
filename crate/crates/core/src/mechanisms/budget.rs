use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{check_parallel_decomposition, ConstraintKind, Policy};

/// One privacy charge. Charges sharing a `group` run on disjoint subsets of
/// the population and compose in parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

/// How a parallel group partitions the population, and whether that was
/// verified against a policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParallelGroup {
    /// Disjoint id subsets, one per member mechanism.
    #[serde(default)]
    pub subsets: Vec<Vec<u64>>,
    /// Population size the ids refer to.
    #[serde(default)]
    pub population: usize,
    /// Claim that the policy has only cardinality constraints.
    #[serde(default)]
    pub cardinality_only: bool,
    #[serde(default, skip_deserializing)]
    pub certified: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    #[serde(default)]
    pub charges: Vec<Charge>,
    #[serde(default)]
    pub groups: BTreeMap<String, ParallelGroup>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn charge(&mut self, label: impl Into<String>, epsilon: f64) {
        self.charges.push(Charge { label: label.into(), epsilon, group: None });
    }

    pub fn charge_parallel(&mut self, group: impl Into<String>, label: impl Into<String>, epsilon: f64) {
        let group = group.into();
        self.groups.entry(group.clone()).or_default();
        self.charges.push(Charge { label: label.into(), epsilon, group: Some(group) });
    }

    /// Certifies `group` by checking its subsets against `policy`.
    pub fn certify_group(&mut self, group: &str, policy: &Policy, subsets: Vec<Vec<u64>>, population: usize) -> Result<()> {
        if !check_parallel_decomposition(policy, &subsets, population)? {
            return Err(Error::UncertifiedParallelGroup(group.to_string()));
        }
        let g = self.groups.entry(group.to_string()).or_default();
        g.subsets = subsets;
        g.population = population;
        g.certified = true;
        Ok(())
    }

    /// Certifies `group` because `policy` has no constraints beyond cardinality.
    pub fn certify_cardinality(&mut self, group: &str, policy: &Policy) -> Result<()> {
        if policy.constraints().kind() == ConstraintKind::General {
            return Err(Error::UncertifiedParallelGroup(group.to_string()));
        }
        let g = self.groups.entry(group.to_string()).or_default();
        g.cardinality_only = true;
        g.certified = true;
        Ok(())
    }

    /// Verifies every group's stated certificate against `policy`.
    pub fn certify_all(&mut self, policy: &Policy) -> Result<()> {
        let names: Vec<String> = self.groups.keys().cloned().collect();
        for name in names {
            let g = self.groups[&name].clone();
            if g.cardinality_only {
                self.certify_cardinality(&name, policy)?;
            } else {
                self.certify_group(&name, policy, g.subsets, g.population)?;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> Result<f64> {
        compose_budgets(self)
    }
}

/// Sequential charges add up; each parallel group contributes its largest
/// charge.
pub fn compose_budgets(ledger: &BudgetLedger) -> Result<f64> {
    let mut total = 0.0;
    let mut group_max: BTreeMap<&str, f64> = BTreeMap::new();
    for c in &ledger.charges {
        if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "charge `{}` must be positive and finite, got {}",
                c.label, c.epsilon
            )));
        }
        match &c.group {
            None => total += c.epsilon,
            Some(g) => {
                let certified = ledger.groups.get(g).is_some_and(|p| p.certified);
                if !certified {
                    return Err(Error::UncertifiedParallelGroup(g.clone()));
                }
                let m = group_max.entry(g).or_insert(0.0);
                *m = m.max(c.epsilon);
            }
        }
    }
    Ok(total + group_max.values().sum::<f64>())
}
