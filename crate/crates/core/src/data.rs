//! Trial data: ingestion, missing-covariate handling, feature expansion and
//! fold construction.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcomes, arm indicators and baseline covariates for `n` participants.
///
/// Missing covariate cells are stored as `NaN` until [`impute_missing`] runs;
/// estimators refuse datasets that still contain them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    y: Vec<f64>,
    z: Vec<u8>,
    x: DMatrix<f64>,
    column_names: Vec<String>,
}

impl TrialDataset {
    pub fn new(
        y: Vec<f64>,
        z: Vec<u8>,
        x: DMatrix<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 participants, got {n}")));
        }
        if z.len() != n || x.nrows() != n {
            return Err(Error::InvalidData(format!(
                "y has {n} rows, z has {}, x has {}",
                z.len(),
                x.nrows()
            )));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} covariates",
                column_names.len(),
                x.ncols()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingOutcome(i));
        }
        if let Some(i) = z.iter().position(|&v| v > 1) {
            return Err(Error::ArmNotBinary {
                row: i,
                value: z[i].to_string(),
            });
        }
        let n1 = z.iter().filter(|&&v| v == 1).count();
        if n1 == 0 {
            return Err(Error::EmptyArm(1));
        }
        if n1 == n {
            return Err(Error::EmptyArm(0));
        }
        Ok(Self {
            y,
            z,
            x,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.z.iter().filter(|&&v| v == arm).count()
    }

    pub fn arm_rows(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.z[i] == arm).collect()
    }

    /// True when no covariate cell is missing or non-finite.
    pub fn is_complete(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }

    pub fn ensure_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MissingCovariates)
        }
    }

    /// Copy with outcomes replaced; used for location/scale checks.
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.z.clone(), self.x.clone(), self.column_names.clone())
    }

    /// Copy with arms replaced.
    pub fn with_arms(&self, z: Vec<u8>) -> Result<Self> {
        Self::new(self.y.clone(), z, self.x.clone(), self.column_names.clone())
    }

    /// Copy keeping only the named covariate columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<Vec<_>>>()?;
        let x = select_cols(&self.x, &idx);
        Self::new(self.y.clone(), self.z.clone(), x, names.to_vec())
    }
}

/// Rows `rows` of `x`, in order.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Columns `cols` of `x`, in order.
pub fn select_cols(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

pub fn gather(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

fn is_missing_cell(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "NA"
}

/// Read a comma-delimited file with a header row.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    outcome_col: &str,
    arm_col: &str,
    covariate_cols: &[String],
) -> Result<TrialDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, outcome_col, arm_col, covariate_cols)
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    outcome_col: &str,
    arm_col: &str,
    covariate_cols: &[String],
) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedCsv(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let y_idx = find(outcome_col)?;
    let z_idx = find(arm_col)?;
    let x_idx = covariate_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut cells = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedCsv(e.to_string()))?;
        let field = |j: usize| record.get(j).unwrap_or("");

        let yv = field(y_idx);
        if is_missing_cell(yv) {
            return Err(Error::MissingOutcome(row));
        }
        let yv: f64 = yv
            .parse()
            .map_err(|_| Error::MalformedCsv(format!("row {row}: outcome {yv:?}")))?;
        if !yv.is_finite() {
            return Err(Error::MissingOutcome(row));
        }
        y.push(yv);

        let zv = field(z_idx);
        let arm = match zv.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::ArmNotBinary {
                    row,
                    value: zv.to_string(),
                })
            }
        };
        z.push(arm);

        for &j in &x_idx {
            let s = field(j);
            let v = if is_missing_cell(s) {
                f64::NAN
            } else {
                s.parse::<f64>()
                    .map_err(|_| Error::MalformedCsv(format!("row {row}: covariate cell {s:?}")))?
            };
            cells.push(v);
        }
    }
    let n = y.len();
    let p = x_idx.len();
    let x = DMatrix::from_row_slice(n, p, &cells);
    TrialDataset::new(y, z, x, covariate_cols.to_vec())
}

/// Mean-impute missing covariates and append one 0/1 missingness indicator per
/// affected column (named `<col>_missing`). Uses covariates only.
pub fn impute_missing(d: &TrialDataset) -> Result<TrialDataset> {
    let n = d.n();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut indicators: Vec<(String, Vec<f64>)> = Vec::new();
    for (j, name) in d.column_names.iter().enumerate() {
        let col: Vec<f64> = d.x.column(j).iter().copied().collect();
        let observed: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        if observed.len() == n {
            columns.push(col);
        } else if observed.is_empty() {
            return Err(Error::AllMissingColumn(name.clone()));
        } else {
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            let ind = col.iter().map(|v| if v.is_finite() { 0.0 } else { 1.0 }).collect();
            columns.push(col.iter().map(|&v| if v.is_finite() { v } else { mean }).collect());
            indicators.push((format!("{name}_missing"), ind));
        }
        names.push(name.clone());
    }
    for (name, ind) in indicators {
        names.push(name);
        columns.push(ind);
    }
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    TrialDataset::new(d.y.clone(), d.z.clone(), x, names)
}

impl Default for FeatureExpansion {
    fn default() -> Self {
        Self::identity()
    }
}

/// How the raw covariates are expanded into candidate model terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureExpansion {
    /// Columns to keep; empty means every column of the dataset.
    pub base_columns: Vec<String>,
    pub interactions: Vec<(String, String)>,
    pub polynomial_degree: u32,
    /// Expanded columns always retained through selection.
    pub forced_columns: Vec<String>,
}

impl FeatureExpansion {
    pub fn identity() -> Self {
        Self {
            base_columns: Vec::new(),
            interactions: Vec::new(),
            polynomial_degree: 1,
            forced_columns: Vec::new(),
        }
    }

    /// Names of the expanded columns, in construction order.
    pub fn expanded_names(&self, available: &[String]) -> Result<Vec<String>> {
        let base = self.base(available)?;
        let mut names = base.clone();
        for c in &base {
            for deg in 2..=self.polynomial_degree {
                names.push(format!("{c}^{deg}"));
            }
        }
        for (a, b) in &self.interactions {
            for c in [a, b] {
                if !available.contains(c) {
                    return Err(Error::UnknownColumn(c.clone()));
                }
            }
            names.push(format!("{a}:{b}"));
        }
        Ok(names)
    }

    fn base(&self, available: &[String]) -> Result<Vec<String>> {
        if self.polynomial_degree < 1 {
            return Err(Error::config("polynomial_degree", "must be at least 1"));
        }
        if self.base_columns.is_empty() {
            return Ok(available.to_vec());
        }
        for c in &self.base_columns {
            if !available.contains(c) {
                return Err(Error::UnknownColumn(c.clone()));
            }
        }
        Ok(self.base_columns.clone())
    }
}

/// Build base columns, then powers 2..=degree of each base column, then the
/// listed pairwise products. Raw values are used; no centering or scaling.
pub fn expand_features(d: &TrialDataset, spec: &FeatureExpansion) -> Result<TrialDataset> {
    let base = spec.base(&d.column_names)?;
    let names = spec.expanded_names(&d.column_names)?;
    for f in &spec.forced_columns {
        if !names.contains(f) {
            return Err(Error::UnknownColumn(f.clone()));
        }
    }
    let n = d.n();
    let col = |name: &str| -> Result<Vec<f64>> {
        let j = d.column_index(name)?;
        Ok(d.x.column(j).iter().copied().collect())
    };
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for c in &base {
        columns.push(col(c)?);
    }
    for c in &base {
        let v = col(c)?;
        for deg in 2..=spec.polynomial_degree {
            columns.push(v.iter().map(|x| x.powi(deg as i32)).collect());
        }
    }
    for (a, b) in &spec.interactions {
        let va = col(a)?;
        let vb = col(b)?;
        columns.push(va.iter().zip(&vb).map(|(p, q)| p * q).collect());
    }
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    TrialDataset::new(d.y.clone(), d.z.clone(), x, names)
}

/// Partition of participant indices into `k` folds. Fold labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub stratified_by_arm: bool,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// Indices in fold `fold`, ascending.
    pub fn fold(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    /// Indices outside fold `fold`, ascending.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

/// Seeded shuffle followed by round-robin assignment. When stratified, arm 1
/// is dealt first and arm 0 continues from where arm 1 stopped, so both the
/// per-arm and overall fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, z: &[u8], seed: u64, stratified: bool) -> Result<FoldPlan> {
    if z.len() != n {
        return Err(Error::LengthMismatch(format!("n = {n} but z has {}", z.len())));
    }
    if k < 2 {
        return Err(Error::TooManyFolds {
            k,
            reason: "need at least 2 folds".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; n];
    if stratified {
        let treated: Vec<usize> = (0..n).filter(|&i| z[i] == 1).collect();
        let control: Vec<usize> = (0..n).filter(|&i| z[i] == 0).collect();
        let smallest = treated.len().min(control.len());
        if k > smallest {
            return Err(Error::TooManyFolds {
                k,
                reason: format!("smallest arm has {smallest} participants"),
            });
        }
        let mut offset = 0;
        for mut group in [treated, control] {
            group.shuffle(&mut rng);
            for (pos, &i) in group.iter().enumerate() {
                assignments[i] = (offset + pos) % k;
            }
            offset = (offset + group.len()) % k;
        }
    } else {
        if k > n {
            return Err(Error::TooManyFolds {
                k,
                reason: format!("only {n} participants"),
            });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignments[i] = pos % k;
        }
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
        stratified_by_arm: stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ingest_four_rows() {
        let csv = "y,z,a\n1,1,0.5\n0,0,1.5\n3,1,NA\n2,0,\n";
        let d = ingest_reader(csv.as_bytes(), "y", "z", &names(&["a"])).unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.arm_size(1), 2);
        assert_eq!(d.arm_size(0), 2);
        assert!(!d.is_complete());
    }

    #[test]
    fn ingest_errors() {
        let bad_arm = "y,z\n1,1\n2,2\n";
        assert!(matches!(
            ingest_reader(bad_arm.as_bytes(), "y", "z", &[]),
            Err(Error::ArmNotBinary { row: 1, .. })
        ));
        let one_arm = "y,z\n1,1\n2,1\n";
        assert!(matches!(
            ingest_reader(one_arm.as_bytes(), "y", "z", &[]),
            Err(Error::EmptyArm(0))
        ));
        let no_y = "y,z\n1,1\nNA,0\n";
        assert!(matches!(
            ingest_reader(no_y.as_bytes(), "y", "z", &[]),
            Err(Error::MissingOutcome(1))
        ));
        let junk = "y,z,a\n1,1,abc\n2,0,1\n";
        assert!(matches!(
            ingest_reader(junk.as_bytes(), "y", "z", &names(&["a"])),
            Err(Error::MalformedCsv(_))
        ));
        assert!(matches!(
            ingest_reader(junk.as_bytes(), "y", "z", &names(&["b"])),
            Err(Error::UnknownColumn(_))
        ));
    }

    fn dataset(x: Vec<f64>, p: usize, cols: &[&str]) -> TrialDataset {
        let n = x.len() / p;
        let z = (0..n).map(|i| (i % 2) as u8).collect();
        TrialDataset::new(
            vec![0.0; n],
            z,
            DMatrix::from_row_slice(n, p, &x),
            names(cols),
        )
        .unwrap()
    }

    #[test]
    fn impute_mean_and_indicator() {
        let d = dataset(vec![1.0, f64::NAN, 3.0], 1, &["a"]);
        let out = impute_missing(&d).unwrap();
        assert_eq!(out.column_names(), &names(&["a", "a_missing"])[..]);
        assert_eq!(out.x().column(0).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(out.x().column(1).as_slice(), &[0.0, 1.0, 0.0]);

        let complete = dataset(vec![1.0, 2.0, 3.0], 1, &["a"]);
        assert_eq!(impute_missing(&complete).unwrap(), complete);

        let empty = dataset(vec![f64::NAN, f64::NAN], 1, &["a"]);
        assert!(matches!(impute_missing(&empty), Err(Error::AllMissingColumn(_))));
    }

    #[test]
    fn expansion_examples() {
        let d = dataset(vec![2.0, 3.0], 1, &["x"]);
        let spec = FeatureExpansion {
            polynomial_degree: 2,
            ..FeatureExpansion::identity()
        };
        let e = expand_features(&d, &spec).unwrap();
        assert_eq!(e.x().row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 4.0]);
        assert_eq!(e.column_names(), &names(&["x", "x^2"])[..]);

        let d = dataset(vec![1.0, 3.0, 2.0, 4.0], 2, &["a", "b"]);
        let spec = FeatureExpansion {
            interactions: vec![("a".into(), "b".into())],
            ..FeatureExpansion::identity()
        };
        let e = expand_features(&d, &spec).unwrap();
        assert_eq!(e.x().column(2).as_slice(), &[3.0, 8.0]);
        assert_eq!(e.column_names()[2], "a:b");

        assert_eq!(expand_features(&d, &FeatureExpansion::identity()).unwrap(), d);

        let bad = FeatureExpansion {
            base_columns: names(&["c"]),
            ..FeatureExpansion::identity()
        };
        assert!(matches!(expand_features(&d, &bad), Err(Error::UnknownColumn(_))));
        let forced = FeatureExpansion {
            forced_columns: names(&["a^2"]),
            ..FeatureExpansion::identity()
        };
        assert!(matches!(expand_features(&d, &forced), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn fold_examples() {
        let z = [1, 0, 1, 0, 1, 0];
        let plan = make_folds(6, 3, &z, 11, false).unwrap();
        assert_eq!(plan.sizes(), vec![2, 2, 2]);
        assert_eq!(plan, make_folds(6, 3, &z, 11, false).unwrap());

        let z = [1, 1, 1, 1, 0, 0, 0, 0];
        let plan = make_folds(8, 2, &z, 3, true).unwrap();
        for f in 0..2 {
            let rows = plan.fold(f);
            assert_eq!(rows.iter().filter(|&&i| z[i] == 1).count(), 2);
            assert_eq!(rows.len(), 4);
        }
        assert!(matches!(
            make_folds(8, 5, &z, 3, true),
            Err(Error::TooManyFolds { .. })
        ));
        assert!(matches!(
            make_folds(3, 4, &[1, 0, 1], 3, false),
            Err(Error::TooManyFolds { .. })
        ));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(
            z in proptest::collection::vec(0u8..2, 6..80),
            k in 2usize..6,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let n = z.len();
            let n1 = z.iter().filter(|&&v| v == 1).count();
            let ok = if stratified { k <= n1.min(n - n1) } else { k <= n };
            let plan = make_folds(n, k, &z, seed, stratified);
            prop_assert_eq!(plan.is_ok(), ok);
            if let Ok(plan) = plan {
                let mut all: Vec<usize> = (0..k).flat_map(|f| plan.fold(f)).collect();
                all.sort();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let sizes = plan.sizes();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                prop_assert!(sizes.iter().all(|&s| s > 0));
                if stratified {
                    for arm in 0..2u8 {
                        let per: Vec<usize> = (0..k)
                            .map(|f| plan.fold(f).iter().filter(|&&i| z[i] == arm).count())
                            .collect();
                        prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                    }
                }
            }
        }

        #[test]
        fn imputation_ignores_arms(
            cells in proptest::collection::vec(prop_oneof![3 => -5.0f64..5.0, 1 => Just(f64::NAN)], 8),
            flip in any::<bool>(),
        ) {
            prop_assume!(cells.iter().any(|v| v.is_finite()));
            let x = DMatrix::from_column_slice(8, 1, &cells);
            let z1: Vec<u8> = vec![1, 0, 1, 0, 1, 0, 1, 0];
            let z2: Vec<u8> = if flip { z1.iter().map(|v| 1 - v).collect() } else { vec![0, 0, 1, 1, 0, 1, 1, 0] };
            let a = impute_missing(&TrialDataset::new(vec![0.0; 8], z1, x.clone(), vec!["a".into()]).unwrap()).unwrap();
            let b = impute_missing(&TrialDataset::new(vec![0.0; 8], z2, x, vec!["a".into()]).unwrap()).unwrap();
            prop_assert_eq!(a.x(), b.x());
        }
    }
}
