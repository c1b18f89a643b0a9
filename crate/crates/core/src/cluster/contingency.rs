//! Contingency tables and the information-theoretic scores built on them:
//! mutual information, its expectation under the hypergeometric permutation
//! model, and the adjusted mutual information. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Builds margins from a dense `R×C` count matrix.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_cols = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|row| row.len() != n_cols) {
            return Err(Error::InvariantViolation("ragged contingency table".into()));
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..n_cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let total = row_sums.iter().sum();
        Ok(Self { counts, row_sums, col_sums, total })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn transpose(&self) -> Self {
        let counts = (0..self.col_sums.len())
            .map(|j| self.counts.iter().map(|r| r[j]).collect())
            .collect();
        Self { counts, row_sums: self.col_sums.clone(), col_sums: self.row_sums.clone(), total: self.total }
    }

    /// True when, ignoring empty rows and columns, every row and every column
    /// holds exactly one nonzero cell: the two labelings agree up to renaming.
    pub fn is_permuted_diagonal(&self) -> bool {
        let rows_ok = self
            .counts
            .iter()
            .all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
        let cols_ok = (0..self.col_sums.len()).all(|j| self.counts.iter().filter(|r| r[j] > 0).count() <= 1);
        rows_ok && cols_ok
    }
}

/// `counts[i][j] = |{t : u_t = i ∧ v_t = j}|`.
pub fn build_contingency(u: &[usize], v: &[usize]) -> Result<ContingencyTable> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    if u.is_empty() {
        return Err(Error::InvariantViolation("labelings must be non-empty".into()));
    }
    let n_rows = u.iter().max().unwrap() + 1;
    let n_cols = v.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0u64; n_cols]; n_rows];
    for (&i, &j) in u.iter().zip(v) {
        counts[i][j] += 1;
    }
    ContingencyTable::from_counts(counts)
}

/// Shannon entropy (nats) of a marginal count vector.
pub fn entropy(margins: &[u64]) -> f64 {
    let n: u64 = margins.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -margins
        .iter()
        .filter(|&&a| a > 0)
        .map(|&a| {
            let p = a as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

pub fn mutual_information(ct: &ContingencyTable) -> f64 {
    let n = ct.total as f64;
    let mut mi = 0.0;
    for (i, row) in ct.counts.iter().enumerate() {
        let a = ct.row_sums[i] as f64;
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            let b = ct.col_sums[j] as f64;
            mi += (nij / n) * (n.ln() + nij.ln() - a.ln() - b.ln());
        }
    }
    mi.max(0.0)
}

/// `ln k!` for `k = 0..=n`.
fn log_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Expected MI over all tables sharing `ct`'s margins (hypergeometric model).
pub fn expected_mutual_information(ct: &ContingencyTable) -> f64 {
    let total = ct.total;
    if total == 0 {
        return 0.0;
    }
    let lf = log_factorials(total);
    let n = total as f64;
    let ln_n = n.ln();
    let mut emi = 0.0;
    for &a in ct.row_sums.iter().filter(|&&a| a > 0) {
        for &b in ct.col_sums.iter().filter(|&&b| b > 0) {
            let lo = (a + b).saturating_sub(total).max(1);
            let hi = a.min(b);
            let fixed = lf[a as usize] + lf[b as usize] + lf[(total - a) as usize] + lf[(total - b) as usize]
                - lf[total as usize];
            let ln_ab = (a as f64).ln() + (b as f64).ln();
            for nij in lo..=hi {
                let log_p = fixed
                    - lf[nij as usize]
                    - lf[(a - nij) as usize]
                    - lf[(b - nij) as usize]
                    - lf[(total + nij - a - b) as usize];
                let x = nij as f64;
                emi += (x / n) * (ln_n + x.ln() - ln_ab) * log_p.exp();
            }
        }
    }
    emi
}

/// How the two entropies are combined in the AMI denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmiNormalizer {
    #[default]
    Arithmetic,
    Max,
}

/// AMI with the arithmetic-mean normalizer.
pub fn adjusted_mutual_info(u: &[usize], v: &[usize]) -> Result<f64> {
    adjusted_mutual_info_with(u, v, AmiNormalizer::Arithmetic)
}

pub fn adjusted_mutual_info_with(u: &[usize], v: &[usize], normalizer: AmiNormalizer) -> Result<f64> {
    let ct = build_contingency(u, v)?;
    Ok(ami_from_table(&ct, normalizer))
}

/// `(MI − E[MI]) / (norm(H(u), H(v)) − E[MI])`; exactly 1.0 when the labelings
/// agree up to renaming (which covers the 0/0 case of two trivial labelings).
pub fn ami_from_table(ct: &ContingencyTable, normalizer: AmiNormalizer) -> f64 {
    if ct.is_permuted_diagonal() {
        return 1.0;
    }
    let mi = mutual_information(ct);
    let emi = expected_mutual_information(ct);
    let (hu, hv) = (entropy(&ct.row_sums), entropy(&ct.col_sums));
    let norm = match normalizer {
        AmiNormalizer::Arithmetic => 0.5 * (hu + hv),
        AmiNormalizer::Max => hu.max(hv),
    };
    let denominator = norm - emi;
    if denominator == 0.0 {
        return 1.0;
    }
    (mi - emi) / denominator
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use proptest::prelude::*;

    use super::*;

    fn table(rows: &[&[u64]]) -> ContingencyTable {
        ContingencyTable::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn contingency_examples() {
        assert_eq!(build_contingency(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), table(&[&[2, 0], &[0, 2]]));
        assert_eq!(build_contingency(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), table(&[&[0, 2], &[2, 0]]));
        assert_eq!(build_contingency(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), table(&[&[1, 1], &[1, 1]]));
        assert!(matches!(build_contingency(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn mi_examples() {
        assert!((mutual_information(&table(&[&[2, 0], &[0, 2]])) - LN_2).abs() < 1e-15);
        assert_eq!(mutual_information(&table(&[&[1, 1], &[1, 1]])), 0.0);
    }

    #[test]
    fn mi_matches_direct_sum() {
        // fixed 3×4 table, N = 60
        let t = table(&[&[5, 0, 7, 3], &[2, 9, 1, 4], &[8, 6, 0, 15]]);
        assert_eq!(t.total(), 60);
        let n = 60.0f64;
        let a = [15.0, 16.0, 29.0];
        let b = [15.0, 15.0, 8.0, 22.0];
        let mut direct = 0.0;
        for (i, row) in t.counts().iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let p = c as f64 / n;
                    direct += p * (p / ((a[i] / n) * (b[j] / n))).ln();
                }
            }
        }
        assert!((mutual_information(&t) - direct).abs() < 1e-12);
    }

    #[test]
    fn emi_trivial_table_is_zero() {
        assert_eq!(expected_mutual_information(&table(&[&[7]])), 0.0);
    }

    #[test]
    fn emi_two_by_two_hand_enumeration() {
        // margins (2,2)/(2,2): n11 ∈ {0,1,2} with probabilities 1/6, 4/6, 1/6;
        // MI = ln 2 for the two diagonal outcomes, 0 otherwise.
        let expected = 2.0 / 6.0 * LN_2;
        let emi = expected_mutual_information(&table(&[&[1, 1], &[1, 1]]));
        assert!((emi - expected).abs() < 1e-14, "{emi} vs {expected}");
    }

    #[test]
    fn ami_examples() {
        assert_eq!(adjusted_mutual_info(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_mutual_info(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // MI = 0, EMI = ln2/3, H = ln2 → AMI = -(ln2/3)/(ln2 - ln2/3) = -1/2
        let ami = adjusted_mutual_info(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert!((ami + 0.5).abs() < 1e-14, "{ami}");
    }

    #[test]
    fn ami_one_trivial_side_is_zero() {
        assert_eq!(adjusted_mutual_info(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(adjusted_mutual_info(&[3, 3, 3], &[3, 3, 3]).unwrap(), 1.0);
        assert_eq!(adjusted_mutual_info(&[0, 1, 2, 3], &[3, 2, 1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn max_normalizer_is_not_above_arithmetic_for_positive_ami() {
        let u = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
        let v = [0, 0, 1, 1, 1, 1, 2, 2, 2, 0];
        let arith = adjusted_mutual_info_with(&u, &v, AmiNormalizer::Arithmetic).unwrap();
        let max = adjusted_mutual_info_with(&u, &v, AmiNormalizer::Max).unwrap();
        assert!(arith > 0.0 && max <= arith);
    }

    fn labelings() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..60).prop_flat_map(|n| {
            (proptest::collection::vec(0usize..5, n), proptest::collection::vec(0usize..4, n))
        })
    }

    proptest! {
        #[test]
        fn ami_is_symmetric((u, v) in labelings()) {
            let a = adjusted_mutual_info(&u, &v).unwrap();
            let b = adjusted_mutual_info(&v, &u).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(a <= 1.0 + 1e-12);
        }

        #[test]
        fn ami_ignores_relabeling((u, v) in labelings(), shift in 1usize..5) {
            let relabeled: Vec<usize> = u.iter().map(|&x| (x + shift) % 5).collect();
            let a = adjusted_mutual_info(&u, &v).unwrap();
            let b = adjusted_mutual_info(&relabeled, &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn entropy_bounds_mi((u, v) in labelings()) {
            let ct = build_contingency(&u, &v).unwrap();
            let mi = mutual_information(&ct);
            prop_assert!(mi >= 0.0);
            prop_assert!(entropy(ct.row_sums()) + 1e-12 >= mi);
            prop_assert!(entropy(ct.col_sums()) + 1e-12 >= mi);
        }
    }
}
