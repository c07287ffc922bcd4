use std::collections::HashMap;

use crate::dataio::{period_offset, Column, ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Default definition: more than `dpd_threshold` days past due at any month
/// within `horizon` months after the observation month.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub horizon: u32,
    pub dpd_threshold: u32,
    pub account_column: String,
    pub dpd_column: String,
    pub closed_column: String,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec {
            horizon: 6,
            dpd_threshold: 60,
            account_column: "account_id".into(),
            dpd_column: "latent_dpd".into(),
            closed_column: "latent_closed".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TargetOutcome {
    pub dataset: Dataset,
    /// Rows whose horizon runs past the last generated month.
    pub n_indeterminate: usize,
    /// Rows already closed or already beyond the threshold at observation.
    pub n_not_at_risk: usize,
}

fn numeric<'a>(ds: &'a Dataset, name: &str) -> Result<&'a [Option<f64>]> {
    ds.column(name)
        .and_then(|c| c.values.as_numeric())
        .ok_or_else(|| Error::Schema(format!("numeric column {name} required for targets")))
}

/// Labels each at-risk row and drops indeterminate ones.
pub fn assign_targets(dataset: &Dataset, spec: &TargetSpec) -> Result<TargetOutcome> {
    let periods = dataset.periods()?;
    let ids = numeric(dataset, &spec.account_column)?;
    let dpd = numeric(dataset, &spec.dpd_column)?;
    let closed = numeric(dataset, &spec.closed_column)?;
    let last_period = periods.iter().copied().max().unwrap_or(0);

    let key = |i: usize| (ids[i].map(f64::to_bits).unwrap_or(u64::MAX), periods[i]);
    let index: HashMap<(u64, i64), usize> = (0..dataset.n_rows()).map(|i| (key(i), i)).collect();
    let threshold = f64::from(spec.dpd_threshold);

    let mut keep = Vec::new();
    let mut target = Vec::new();
    let mut n_indeterminate = 0;
    let mut n_not_at_risk = 0;
    let mut any_within_history = false;
    for i in 0..dataset.n_rows() {
        let end = period_offset(periods[i], i64::from(spec.horizon));
        if end <= last_period {
            any_within_history = true;
        }
        if closed[i] == Some(1.0) || dpd[i].unwrap_or(0.0) > threshold {
            n_not_at_risk += 1;
            continue;
        }
        if end > last_period {
            n_indeterminate += 1;
            continue;
        }
        let (id, _) = key(i);
        let mut bad = false;
        let mut complete = true;
        for h in 1..=i64::from(spec.horizon) {
            match index.get(&(id, period_offset(periods[i], h))) {
                Some(&j) => {
                    if dpd[j].unwrap_or(0.0) > threshold {
                        bad = true;
                        break;
                    }
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !bad && !complete {
            n_indeterminate += 1;
            continue;
        }
        keep.push(i);
        target.push(Some(if bad { 1.0 } else { 0.0 }));
    }
    if !any_within_history {
        return Err(Error::HorizonTooLong {
            horizon: spec.horizon,
        });
    }
    let mut out = dataset.select_rows(&keep);
    out.push_column(Column::numeric("target", ColumnKind::Target, target))?;
    Ok(TargetOutcome {
        dataset: out,
        n_indeterminate,
        n_not_at_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One account, twelve months of DPD values.
    fn history(dpd: &[f64]) -> Dataset {
        let n = dpd.len();
        Dataset::new(vec![
            Column::numeric("account_id", ColumnKind::Id, vec![Some(1.0); n]),
            Column::numeric(
                "period",
                ColumnKind::Period,
                (0..n).map(|m| Some(period_offset(200501, m as i64) as f64)).collect(),
            ),
            Column::numeric("latent_dpd", ColumnKind::Latent, dpd.iter().map(|&d| Some(d)).collect()),
            Column::numeric("latent_closed", ColumnKind::Latent, vec![Some(0.0); n]),
        ])
        .unwrap()
    }

    #[test]
    fn default_two_months_after_observation() {
        let mut dpd = vec![0.0; 12];
        dpd[2] = 61.0;
        let out = assign_targets(&history(&dpd), &TargetSpec::default()).unwrap();
        // first observation row (month 0) sees the default at month 2
        assert_eq!(out.dataset.periods().unwrap()[0], 200501);
        assert_eq!(out.dataset.targets().unwrap()[0], 1);
    }

    #[test]
    fn always_current_is_good() {
        let out = assign_targets(&history(&[0.0; 12]), &TargetSpec::default()).unwrap();
        assert_eq!(out.dataset.n_rows(), 6);
        assert!(out.dataset.targets().unwrap().iter().all(|&t| t == 0));
        assert_eq!(out.n_indeterminate, 6);
    }

    #[test]
    fn sixty_days_is_not_default() {
        let mut dpd = vec![0.0; 12];
        dpd[3] = 31.0;
        let out = assign_targets(&history(&dpd), &TargetSpec::default()).unwrap();
        assert!(out.dataset.targets().unwrap().iter().all(|&t| t == 0));
        // the row observed in 31-60 stays at risk
        assert_eq!(out.n_not_at_risk, 0);
    }

    #[test]
    fn already_defaulted_rows_are_not_at_risk() {
        let mut dpd = vec![0.0; 12];
        dpd[1] = 61.0;
        dpd[2] = 91.0;
        let out = assign_targets(&history(&dpd), &TargetSpec::default()).unwrap();
        assert_eq!(out.n_not_at_risk, 2);
    }

    #[test]
    fn too_long_horizon_errors() {
        let spec = TargetSpec {
            horizon: 12,
            ..TargetSpec::default()
        };
        assert!(matches!(
            assign_targets(&history(&[0.0; 12]), &spec),
            Err(Error::HorizonTooLong { horizon: 12 })
        ));
    }
}
