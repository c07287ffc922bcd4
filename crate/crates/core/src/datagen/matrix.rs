use std::fmt;

use crate::error::{Error, Result};

/// A delinquency bucket: DPD range, or a closed (paid-off) state.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub label: String,
    pub dpd_low: u32,
    pub dpd_high: Option<u32>,
    pub closed: bool,
}

impl Bucket {
    pub fn dpd(label: &str, low: u32, high: Option<u32>) -> Self {
        Bucket {
            label: label.to_string(),
            dpd_low: low,
            dpd_high: high,
            closed: false,
        }
    }

    pub fn closed(label: &str) -> Self {
        Bucket {
            label: label.to_string(),
            dpd_low: 0,
            dpd_high: Some(0),
            closed: true,
        }
    }
}

/// Row-stochastic monthly migration kernel over delinquency buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    states: Vec<Bucket>,
    probs: Vec<Vec<f64>>,
    absorbing: Vec<usize>,
}

const ROW_TOL: f64 = 1e-12;

impl TransitionMatrix {
    /// Validates shape, entry range and row sums. Rows that are unit vectors
    /// on themselves are the absorbing states.
    pub fn new(states: Vec<Bucket>, probs: Vec<Vec<f64>>) -> Result<Self> {
        let k = states.len();
        if k == 0 || probs.len() != k {
            return Err(Error::InvalidMatrix(format!(
                "{} states but {} rows",
                k,
                probs.len()
            )));
        }
        for (i, row) in probs.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidMatrix(format!("row {i} has {} entries", row.len())));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidMatrix(format!("row {i} has entry {p} outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {s}")));
            }
        }
        let absorbing = (0..k).filter(|&i| probs[i][i] == 1.0).collect();
        Ok(TransitionMatrix {
            states,
            probs,
            absorbing,
        })
    }

    /// Six-bucket consumer-finance kernel (medium risk).
    pub fn consumer_finance() -> Self {
        let states = vec![
            Bucket::dpd("CURRENT", 0, Some(0)),
            Bucket::dpd("DPD1_30", 1, Some(30)),
            Bucket::dpd("DPD31_60", 31, Some(60)),
            Bucket::dpd("DPD61_90", 61, Some(90)),
            Bucket::dpd("DPD90PLUS", 91, None),
            Bucket::closed("PAIDOFF"),
        ];
        let probs = vec![
            vec![0.93, 0.05, 0.00, 0.00, 0.00, 0.02],
            vec![0.45, 0.35, 0.18, 0.00, 0.00, 0.02],
            vec![0.20, 0.10, 0.43, 0.25, 0.00, 0.02],
            vec![0.05, 0.03, 0.07, 0.53, 0.30, 0.02],
            vec![0.00, 0.00, 0.00, 0.00, 1.00, 0.00],
            vec![0.00, 0.00, 0.00, 0.00, 0.00, 1.00],
        ];
        TransitionMatrix::new(states, probs).expect("preset matrix is valid")
    }

    pub fn identity(states: Vec<Bucket>) -> Self {
        let k = states.len();
        let probs = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        TransitionMatrix::new(states, probs).expect("identity is valid")
    }

    pub fn states(&self) -> &[Bucket] {
        &self.states
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.absorbing.contains(&i)
    }

    /// Moving from `from` to `to` increases delinquency.
    pub fn is_worsening(&self, from: usize, to: usize) -> bool {
        let (a, b) = (&self.states[from], &self.states[to]);
        !b.closed && !a.closed && b.dpd_low > a.dpd_low
    }

    pub fn worsening_mass(&self, row: usize) -> f64 {
        (0..self.n_states())
            .filter(|&j| self.is_worsening(row, j))
            .map(|j| self.probs[row][j])
            .sum()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|b| b.label == label)
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, row) in self.states.iter().zip(&self.probs) {
            write!(f, "{:>10}", b.label)?;
            for p in row {
                write!(f, " {p:.4}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Multiplies each non-absorbing row's worsening mass by
/// `exp(sensitivity * macro_value)` and rebalances through the stay
/// probability.
pub fn modulated_matrix(
    base: &TransitionMatrix,
    macro_value: f64,
    sensitivity: f64,
) -> Result<TransitionMatrix> {
    if !(sensitivity >= 0.0) {
        return Err(Error::InvalidConfig(format!("negative sensitivity {sensitivity}")));
    }
    let factor = (sensitivity * macro_value).exp();
    scale_worsening(base, factor)
}

/// Worsening mass of every non-absorbing row multiplied by `factor`.
pub fn scale_worsening(base: &TransitionMatrix, factor: f64) -> Result<TransitionMatrix> {
    if factor == 1.0 {
        return Ok(base.clone());
    }
    let k = base.n_states();
    let mut probs = base.probs.clone();
    for i in 0..k {
        if base.is_absorbing(i) {
            continue;
        }
        for j in 0..k {
            if base.is_worsening(i, j) {
                probs[i][j] *= factor;
            }
        }
        let others: f64 = (0..k).filter(|&j| j != i).map(|j| probs[i][j]).sum();
        let stay = 1.0 - others;
        if stay < -ROW_TOL || others > 1.0 + ROW_TOL {
            return Err(Error::NegativeStay {
                row: i,
                label: base.states[i].label.clone(),
                stay,
            });
        }
        probs[i][i] = stay.max(0.0);
    }
    TransitionMatrix::new(base.states.clone(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state() -> TransitionMatrix {
        TransitionMatrix::new(
            vec![Bucket::dpd("CURRENT", 0, Some(0)), Bucket::dpd("DEFAULT", 61, None)],
            vec![vec![0.9, 0.1], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_macro_is_identity_map() {
        let base = TransitionMatrix::consumer_finance();
        assert_eq!(modulated_matrix(&base, 0.0, 3.0).unwrap(), base);
    }

    #[test]
    fn identity_kernel_is_unchanged() {
        let id = TransitionMatrix::identity(TransitionMatrix::consumer_finance().states().to_vec());
        assert_eq!(modulated_matrix(&id, 0.5, 1.0).unwrap(), id);
    }

    #[test]
    fn two_state_doubles_worsening() {
        let m = modulated_matrix(&two_state(), 2f64.ln(), 1.0).unwrap();
        assert!((m.row(0)[0] - 0.8).abs() < 1e-12);
        assert!((m.row(0)[1] - 0.2).abs() < 1e-12);
        assert_eq!(m.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn negative_stay_names_row() {
        let err = modulated_matrix(&two_state(), 20f64.ln(), 1.0).unwrap_err();
        match err {
            Error::NegativeStay { row, label, .. } => {
                assert_eq!(row, 0);
                assert_eq!(label, "CURRENT");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let states = vec![Bucket::dpd("A", 0, Some(0)), Bucket::dpd("B", 1, None)];
        assert!(TransitionMatrix::new(states.clone(), vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::new(states, vec![vec![1.5, -0.5], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn preset_absorbing_states() {
        let m = TransitionMatrix::consumer_finance();
        assert_eq!(m.absorbing(), &[4, 5]);
        assert!(m.is_worsening(0, 1));
        assert!(!m.is_worsening(0, 5));
        assert!(!m.is_worsening(2, 1));
    }

    fn random_matrix() -> impl Strategy<Value = TransitionMatrix> {
        // four DPD buckets + a closed state; rows built from positive weights
        // with the stay entry dominant so modulation stays feasible.
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 5), 3).prop_map(|rows| {
            let states = vec![
                Bucket::dpd("C", 0, Some(0)),
                Bucket::dpd("D1", 1, Some(30)),
                Bucket::dpd("D2", 31, Some(60)),
                Bucket::dpd("D3", 61, None),
                Bucket::closed("P"),
            ];
            let mut probs = Vec::new();
            for (i, w) in rows.iter().enumerate() {
                let mut row: Vec<f64> = w.iter().map(|x| 0.05 * x).collect();
                row[i] = 0.0;
                let s: f64 = row.iter().sum();
                row[i] = 1.0 - s;
                probs.push(row);
            }
            probs.push(vec![0.0, 0.0, 0.0, 1.0, 0.0]);
            probs.push(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
            TransitionMatrix::new(states, probs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn modulation_preserves_stochasticity(
            m in random_matrix(),
            macro_value in -0.99f64..0.99,
            sensitivity in 0.0f64..2.0,
        ) {
            let out = modulated_matrix(&m, macro_value, sensitivity).unwrap();
            for (i, row) in out.probs().iter().enumerate() {
                let s: f64 = row.iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
                if m.is_absorbing(i) {
                    prop_assert_eq!(row.as_slice(), m.row(i));
                }
            }
        }
    }
}
