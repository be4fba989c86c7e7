//! Relation × group contingency counts and pointwise mutual information.
//!
//! For relation `R` and group `κ`:
//!
//! ```text
//! MI(R, κ) = log( (f(R,κ)/N) / ((Σ_κ' f(R,κ')/N) · (Σ_R' f(R',κ)/N)) )
//! ```
//!
//! A lawyer utterance sits in two pools, so every relation it yields is
//! counted once in each of its two columns and adds 2 to `N`.

use std::fmt;
use std::ops::AddAssign;

use thiserror::Error;

use crate::grouping::Kappa;
use crate::relext::RelationType;

pub const RELATIONS: usize = 7;
pub const GROUPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ContingencyTable {
    counts: [[u64; GROUPS]; RELATIONS],
}

impl ContingencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; GROUPS]; RELATIONS]) -> Self {
        ContingencyTable { counts }
    }

    pub fn add(&mut self, relation: RelationType, kappa: Kappa, n: u64) {
        self.counts[relation.index()][kappa.index()] += n;
    }

    pub fn get(&self, relation: RelationType, kappa: Kappa) -> u64 {
        self.counts[relation.index()][kappa.index()]
    }

    pub fn counts(&self) -> &[[u64; GROUPS]; RELATIONS] {
        &self.counts
    }

    pub fn row_total(&self, relation: RelationType) -> u64 {
        self.counts[relation.index()].iter().sum()
    }

    pub fn col_total(&self, kappa: Kappa) -> u64 {
        self.counts.iter().map(|row| row[kappa.index()]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn scaled(&self, c: u64) -> Self {
        let mut out = *self;
        out.counts.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }
}

impl AddAssign for ContingencyTable {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.counts.iter_mut().flatten().zip(rhs.counts.iter().flatten()) {
            *a += b;
        }
    }
}

/// Counts `(relation, groups)` observations; each group listed gets +1.
pub fn count<'a, I>(labelled: I) -> ContingencyTable
where
    I: IntoIterator<Item = (RelationType, &'a [Kappa])>,
{
    let mut t = ContingencyTable::new();
    for (relation, kappas) in labelled {
        for &k in kappas {
            t.add(relation, k, 1);
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    E,
    Two,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::E => "e",
            LogBase::Two => "2",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" | "ln" => Ok(LogBase::E),
            "2" => Ok(LogBase::Two),
            other => Err(format!("log base must be `e` or `2`, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmiConfig {
    /// Added to every cell before computing; 0 disables smoothing.
    pub smoothing: f64,
    pub log_base: LogBase,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("contingency table is empty (N = 0)")]
    EmptyTable,
    #[error("smoothing must be a finite non-negative number")]
    BadSmoothing,
}

/// PMI of one cell. Zero cells give `-inf` when smoothing is off.
pub fn pmi(
    table: &ContingencyTable,
    relation: RelationType,
    kappa: Kappa,
    config: PmiConfig,
) -> Result<f64, StatsError> {
    if !(config.smoothing.is_finite() && config.smoothing >= 0.0) {
        return Err(StatsError::BadSmoothing);
    }
    let n = table.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let f = table.get(relation, kappa);
    if config.smoothing == 0.0 {
        if f == 0 {
            return Ok(f64::NEG_INFINITY);
        }
        // f·N / (row·col) in exact integer arithmetic, one rounding per side
        let num = f as u128 * n as u128;
        let den = table.row_total(relation) as u128 * table.col_total(kappa) as u128;
        return Ok(config.log_base.log(num as f64 / den as f64));
    }
    let eps = config.smoothing;
    let n = n as f64 + eps * (RELATIONS * GROUPS) as f64;
    let f = f as f64 + eps;
    let row = table.row_total(relation) as f64 + eps * GROUPS as f64;
    let col = table.col_total(kappa) as f64 + eps * RELATIONS as f64;
    Ok(config.log_base.log((f / n) / ((row / n) * (col / n))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmiMatrix {
    pub values: [[f64; GROUPS]; RELATIONS],
    pub config: PmiConfig,
}

impl PmiMatrix {
    pub fn get(&self, relation: RelationType, kappa: Kappa) -> f64 {
        self.values[relation.index()][kappa.index()]
    }
}

pub fn pmi_matrix(table: &ContingencyTable, config: PmiConfig) -> Result<PmiMatrix, StatsError> {
    let mut values = [[0.0; GROUPS]; RELATIONS];
    for r in RelationType::ALL {
        for k in Kappa::ALL {
            values[r.index()][k.index()] = pmi(table, r, k, config)?;
        }
    }
    Ok(PmiMatrix { values, config })
}

/// Formats an MI value for CSV output; `-inf` for zero cells.
pub fn format_mi(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.12}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NATURAL: PmiConfig = PmiConfig {
        smoothing: 0.0,
        log_base: LogBase::E,
    };

    #[test]
    fn empty_table() {
        let t = ContingencyTable::new();
        assert_eq!(t.total(), 0);
        assert_eq!(pmi(&t, RelationType::IsA, Kappa::A, NATURAL), Err(StatsError::EmptyTable));
        assert!(pmi_matrix(&t, NATURAL).is_err());
    }

    #[test]
    fn counting() {
        let a: &[Kappa] = &[Kappa::A];
        let b: &[Kappa] = &[Kappa::B];
        let t = count([(RelationType::IsA, a), (RelationType::IsA, a), (RelationType::IsA, a), (RelationType::IsA, b)]);
        assert_eq!(t.get(RelationType::IsA, Kappa::A), 3);
        assert_eq!(t.get(RelationType::IsA, Kappa::B), 1);
        assert_eq!(t.total(), 4);
    }

    #[test]
    fn double_pooled_counts_twice() {
        let ac: &[Kappa] = &[Kappa::A, Kappa::C];
        let t = count([(RelationType::UsedFor, ac)]);
        assert_eq!(t.get(RelationType::UsedFor, Kappa::A), 1);
        assert_eq!(t.get(RelationType::UsedFor, Kappa::C), 1);
        assert_eq!(t.total(), 2);
    }

    #[test]
    fn two_by_two_hand_case() {
        let mut t = ContingencyTable::new();
        t.add(RelationType::IsA, Kappa::A, 2);
        t.add(RelationType::IsA, Kappa::B, 1);
        t.add(RelationType::PartOf, Kappa::A, 1);
        t.add(RelationType::PartOf, Kappa::B, 2);
        let v = pmi(&t, RelationType::IsA, Kappa::A, NATURAL).unwrap();
        assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((v - 0.28768).abs() < 1e-5);
        let bits = pmi(&t, RelationType::IsA, Kappa::A, PmiConfig { log_base: LogBase::Two, ..NATURAL }).unwrap();
        assert!((bits - (4.0f64 / 3.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn zero_cell_is_negative_infinity() {
        let mut t = ContingencyTable::new();
        t.add(RelationType::IsA, Kappa::A, 5);
        assert_eq!(pmi(&t, RelationType::IsA, Kappa::B, NATURAL).unwrap(), f64::NEG_INFINITY);
        let smoothed = pmi(&t, RelationType::IsA, Kappa::B, PmiConfig { smoothing: 0.5, ..NATURAL }).unwrap();
        assert!(smoothed.is_finite());
    }

    #[test]
    fn uniform_table_is_zero() {
        let t = ContingencyTable::from_counts([[3; GROUPS]; RELATIONS]);
        let m = pmi_matrix(&t, NATURAL).unwrap();
        assert!(m.values.iter().flatten().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn rejects_bad_smoothing() {
        let t = ContingencyTable::from_counts([[1; GROUPS]; RELATIONS]);
        for eps in [-1.0, f64::NAN, f64::INFINITY] {
            assert_eq!(
                pmi(&t, RelationType::IsA, Kappa::A, PmiConfig { smoothing: eps, ..NATURAL }),
                Err(StatsError::BadSmoothing)
            );
        }
    }

    #[test]
    fn smoothing_converges() {
        let mut t = ContingencyTable::new();
        for (i, r) in RelationType::ALL.into_iter().enumerate() {
            for (j, k) in Kappa::ALL.into_iter().enumerate() {
                t.add(r, k, ((i * 3 + j * 5) % 7) as u64 + 1);
            }
        }
        for r in RelationType::ALL {
            for k in Kappa::ALL {
                let exact = pmi(&t, r, k, NATURAL).unwrap();
                let errs: Vec<f64> = [1e-3, 1e-6, 1e-9]
                    .into_iter()
                    .map(|eps| (pmi(&t, r, k, PmiConfig { smoothing: eps, ..NATURAL }).unwrap() - exact).abs())
                    .collect();
                assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
                assert!(errs[2] < 1e-6);
            }
        }
    }

    #[test]
    fn format() {
        assert_eq!(format_mi(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_mi(0.5), "0.500000000000");
    }

    fn arb_table() -> impl Strategy<Value = ContingencyTable> {
        proptest::array::uniform7(proptest::array::uniform4(0u64..50))
            .prop_filter("non-empty", |c| c.iter().flatten().any(|&v| v > 0))
            .prop_map(ContingencyTable::from_counts)
    }

    proptest! {
        #[test]
        fn totals_agree(t in arb_table()) {
            let rows: u64 = RelationType::ALL.iter().map(|&r| t.row_total(r)).sum();
            let cols: u64 = Kappa::ALL.iter().map(|&k| t.col_total(k)).sum();
            prop_assert_eq!(rows, t.total());
            prop_assert_eq!(cols, t.total());
        }

        #[test]
        fn scale_invariant(t in arb_table(), c in 1u64..200) {
            let a = pmi_matrix(&t, NATURAL).unwrap();
            let b = pmi_matrix(&t.scaled(c), NATURAL).unwrap();
            for (x, y) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
                if x.is_finite() {
                    prop_assert!((x - y).abs() <= 1e-12);
                } else {
                    prop_assert_eq!(x, y);
                }
            }
        }

        #[test]
        fn sign_follows_observed_vs_expected(t in arb_table()) {
            let n = t.total() as u128;
            for r in RelationType::ALL {
                for k in Kappa::ALL {
                    let v = pmi(&t, r, k, NATURAL).unwrap();
                    let observed = t.get(r, k) as u128 * n;
                    let expected = t.row_total(r) as u128 * t.col_total(k) as u128;
                    prop_assert_eq!(observed > expected, v > 0.0);
                    prop_assert_eq!(observed < expected, v < 0.0);
                    prop_assert_eq!(v == f64::NEG_INFINITY, t.get(r, k) == 0);
                }
            }
        }

        #[test]
        fn independent_tables_are_zero(
            rows in proptest::array::uniform7(1u64..20),
            cols in proptest::array::uniform4(1u64..20),
        ) {
            let mut counts = [[0u64; GROUPS]; RELATIONS];
            for i in 0..RELATIONS {
                for j in 0..GROUPS {
                    counts[i][j] = rows[i] * cols[j];
                }
            }
            let m = pmi_matrix(&ContingencyTable::from_counts(counts), NATURAL).unwrap();
            prop_assert!(m.values.iter().flatten().all(|v| v.abs() <= 1e-12));
        }
    }
}
