//! Cross-domain consistency of the learning-environment effects: Pearson
//! matrices of each indicator across subject domains and paired t-tests of
//! the digital-skills effect between every pair of domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Domain, Indicator, TableSchema};
use crate::stats::{
    correlation_matrix, paired_t_test_pairwise, CorrelationMatrix, PairedTestResult,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConsistency {
    pub indicator: Indicator,
    /// Labels are the domain names, pairwise-complete deletion per cell.
    pub correlations: CorrelationMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainPairTest {
    pub indicator: Indicator,
    pub domain_a: Domain,
    pub domain_b: Domain,
    /// `None` when the pair had too few complete observations.
    pub result: Option<PairedTestResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub domains: Vec<Domain>,
    pub indicators: Vec<IndicatorConsistency>,
    pub paired_tests: Vec<DomainPairTest>,
}

/// Needs at least two domain tables in the dataset.
pub fn cross_domain_consistency(dataset: &Dataset) -> Result<ConsistencyReport> {
    let domains: Vec<Domain> = Domain::ALL
        .into_iter()
        .filter(|d| dataset.tables.contains(&TableSchema::Domain(*d)))
        .collect();
    if domains.len() < 2 {
        return Err(Error::insufficient(
            "cross-domain consistency (domain tables)",
            2,
            domains.len(),
        ));
    }
    let labels: Vec<String> = domains.iter().map(|d| d.to_string()).collect();

    let indicators = Indicator::ALL
        .into_iter()
        .map(|indicator| {
            let columns: Vec<Vec<Option<f64>>> = domains
                .iter()
                .map(|d| dataset.effect_column(*d, indicator))
                .collect();
            Ok(IndicatorConsistency {
                indicator,
                correlations: correlation_matrix(&labels, &columns)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut paired_tests = Vec::new();
    for (i, &a) in domains.iter().enumerate() {
        for &b in &domains[i + 1..] {
            let x = dataset.effect_column(a, Indicator::Digital);
            let y = dataset.effect_column(b, Indicator::Digital);
            let (result, error) = match paired_t_test_pairwise(&x, &y) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            paired_tests.push(DomainPairTest {
                indicator: Indicator::Digital,
                domain_a: a,
                domain_b: b,
                result,
                error,
            });
        }
    }

    Ok(ConsistencyReport {
        domains,
        indicators,
        paired_tests,
    })
}
