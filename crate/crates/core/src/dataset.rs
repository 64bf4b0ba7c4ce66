//! Group-stratified datasets and their CSV form.
//!
//! The CSV layout is one example per line, header `x1,...,xd,label,group,split`,
//! with floats written in 17-significant-digit scientific notation so that a
//! write/read cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CgdError, Result};

/// Examples of one group within one split, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupData {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl GroupData {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, u8)]) -> Result<Self> {
        let mut g = Self::new(dim);
        for (x, y) in rows {
            g.push(x, *y)?;
        }
        Ok(g)
    }

    pub fn push(&mut self, x: &[f64], label: u8) -> Result<()> {
        if x.len() != self.dim {
            return Err(CgdError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if label > 1 {
            return Err(CgdError::InvalidConfig(format!(
                "label {label} is not binary"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CgdError::NonFiniteInput(
                "feature values must be finite".into(),
            ));
        }
        self.features.extend_from_slice(x);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.features
            .chunks_exact(self.dim.max(1))
            .zip(self.labels.iter().copied())
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Val, SplitKind::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitKind::Train),
            "val" => Some(SplitKind::Val),
            "test" => Some(SplitKind::Test),
            _ => None,
        }
    }
}

/// One split, indexed by group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub groups: Vec<GroupData>,
}

impl Split {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(GroupData::len).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(GroupData::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDataset {
    dim: usize,
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

impl GroupDataset {
    /// Checks group indices and that every group appears in the test split.
    pub fn new(dim: usize, train: Split, val: Split, test: Split) -> Result<Self> {
        let k = train.k();
        if k == 0 {
            return Err(CgdError::InvalidConfig(
                "dataset needs at least one group".into(),
            ));
        }
        for (name, split) in [("val", &val), ("test", &test)] {
            if split.k() != k {
                return Err(CgdError::InvalidConfig(format!(
                    "{name} split has {} groups, train has {k}",
                    split.k()
                )));
            }
        }
        for split in [&train, &val, &test] {
            for g in &split.groups {
                if g.dim() != dim {
                    return Err(CgdError::DimensionMismatch {
                        expected: dim,
                        found: g.dim(),
                    });
                }
            }
        }
        if let Some(group) = test.groups.iter().position(GroupData::is_empty) {
            return Err(CgdError::EmptyGroup { group });
        }
        Ok(Self {
            dim,
            train,
            val,
            test,
        })
    }

    pub fn k(&self) -> usize {
        self.train.k()
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    /// Per-group train sizes `n_i`.
    pub fn group_counts(&self) -> Vec<usize> {
        self.train.counts()
    }

    pub fn split(&self, kind: SplitKind) -> &Split {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for j in 1..=self.dim {
            let _ = write!(out, "x{j},");
        }
        out.push_str("label,group,split\n");
        for kind in SplitKind::ALL {
            for (group, data) in self.split(kind).groups.iter().enumerate() {
                for (x, y) in data.rows() {
                    for v in x {
                        out.push_str(&format_f64(*v));
                        out.push(',');
                    }
                    let _ = writeln!(out, "{y},{group},{}", kind.as_str());
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| CgdError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CgdError::io(path, e))?;
        Self::from_csv_str(&text).map_err(|e| match e {
            CgdError::Parse { message, .. } => CgdError::parse(path, message),
            other => other,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let err =
            |line: usize, msg: String| CgdError::parse("<csv>", format!("line {line}: {msg}"));
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| err(1, "missing header".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 4 || cols[cols.len() - 3..] != ["label", "group", "split"] {
            return Err(err(1, format!("unexpected header {header:?}")));
        }
        let dim = cols.len() - 3;
        for (j, c) in cols[..dim].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(err(1, format!("unexpected column {c:?}")));
            }
        }

        let mut splits = [Split::default(), Split::default(), Split::default()];
        let mut x = vec![0.0; dim];
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 3 {
                return Err(err(lineno, format!("expected {} fields", dim + 3)));
            }
            for j in 0..dim {
                x[j] = fields[j]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad float {:?}: {e}", fields[j])))?;
            }
            let label: u8 = fields[dim]
                .parse()
                .map_err(|e| err(lineno, format!("bad label: {e}")))?;
            let group: usize = fields[dim + 1]
                .parse()
                .map_err(|e| err(lineno, format!("bad group: {e}")))?;
            let kind = SplitKind::parse(fields[dim + 2])
                .ok_or_else(|| err(lineno, format!("bad split {:?}", fields[dim + 2])))?;
            let split = &mut splits[kind as usize];
            while split.groups.len() <= group {
                split.groups.push(GroupData::new(dim));
            }
            split.groups[group]
                .push(&x, label)
                .map_err(|e| err(lineno, e.to_string()))?;
        }
        let k = splits.iter().map(Split::k).max().unwrap_or(0);
        for split in &mut splits {
            split.groups.resize_with(k, || GroupData::new(dim));
        }
        let [train, val, test] = splits;
        Self::new(dim, train, val, test)
    }
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GroupDataset {
        let mk = |rows: &[(Vec<f64>, u8)]| GroupData::from_rows(2, rows).unwrap();
        let train = Split {
            groups: vec![
                mk(&[(vec![0.1, -0.2], 1), (vec![1.0 / 3.0, 2.0], 0)]),
                mk(&[(vec![-1e-300, 7.5], 1)]),
            ],
        };
        let val = Split {
            groups: vec![mk(&[(vec![0.0, 0.0], 0)]), mk(&[])],
        };
        let test = Split {
            groups: vec![mk(&[(vec![1.0, 1.0], 1)]), mk(&[(vec![-1.0, 0.5], 0)])],
        };
        GroupDataset::new(2, train, val, test).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = tiny();
        let text = ds.to_csv_string();
        assert!(text.starts_with("x1,x2,label,group,split\n"));
        let back = GroupDataset::from_csv_str(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.group_counts(), vec![2, 1]);
    }

    #[test]
    fn rejects_bad_header_and_rows() {
        assert!(GroupDataset::from_csv_str("a,b\n").is_err());
        assert!(GroupDataset::from_csv_str("x1,label,group,split\n0.5,2,0,test\n").is_err());
        assert!(GroupDataset::from_csv_str("x1,label,group,split\n0.5,1,0,holdout\n").is_err());
    }

    #[test]
    fn test_split_must_cover_every_group() {
        let g = GroupData::from_rows(1, &[(vec![0.0], 0)]).unwrap();
        let train = Split {
            groups: vec![g.clone(), g.clone()],
        };
        let test = Split {
            groups: vec![g.clone(), GroupData::new(1)],
        };
        let val = train.clone();
        assert!(matches!(
            GroupDataset::new(1, train, val, test),
            Err(CgdError::EmptyGroup { group: 1 })
        ));
    }

    #[test]
    fn format_is_seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
