//! Seeded generators for the three linear subpopulation-shift settings.
//!
//! All three draw `(x1, x2)` from a standard normal and use three groups.
//! Randomness comes from ChaCha8 with one stream per (split, group), so a
//! group's samples do not depend on how many samples other groups drew.
//! Corruptions (label flips, feature reflections) touch exactly
//! `round(rate * n)` examples chosen by a seeded shuffle.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroupData, GroupDataset, Split, SplitKind};
use crate::error::{CgdError, Result};

pub const VAL_PER_GROUP: usize = 500;
pub const TEST_PER_GROUP: usize = 1000;

pub const NOISE_TRAIN_SIZES: [usize; 3] = [450, 450, 100];
pub const NOISE_FLIP_RATE: f64 = 0.2;

pub const ROTATION_TRAIN_SIZES: [usize; 3] = [499, 499, 2];
/// Label normals of the Left, Center and Right groups.
pub const ROTATION_NORMALS: [[f64; 2]; 3] = [[1.0, 0.0], [0.87, 0.5], [0.5, 0.87]];

pub const SPURIOUS_MAJORITY: usize = 490;
pub const SPURIOUS_DEFAULT_MINORITY: usize = 20;
/// Fraction of group-0 training examples whose first two features are reflected.
pub const SPURIOUS_REFLECT_RATE: f64 = 0.4;
/// Fraction of group-1 examples whose third feature disagrees with the label.
pub const SPURIOUS_MIXED_RATE: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    NoiseSimple,
    RotationSimple,
    SpuriousSimple,
}

impl Setting {
    pub const ALL: [Setting; 3] = [
        Setting::NoiseSimple,
        Setting::RotationSimple,
        Setting::SpuriousSimple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::NoiseSimple => "noise_simple",
            Setting::RotationSimple => "rotation_simple",
            Setting::SpuriousSimple => "spurious_simple",
        }
    }

    pub fn generate(self, seed: u64, minority_ratio: Option<f64>) -> Result<GroupDataset> {
        match self {
            Setting::NoiseSimple => gen_noise_simple(seed),
            Setting::RotationSimple => gen_rotation_simple(seed),
            Setting::SpuriousSimple => gen_spurious_simple(seed, minority_ratio),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = CgdError;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| CgdError::InvalidConfig(format!("unknown setting {s:?}")))
    }
}

fn stream(seed: u64, split: SplitKind, group: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((split as u64) << 32) | group as u64);
    rng
}

fn normal_pair(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// `round(rate * n)` distinct indices, chosen by a seeded shuffle.
fn pick(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<bool> {
    let m = (rate * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut chosen = vec![false; n];
    for &i in &idx[..m.min(n)] {
        chosen[i] = true;
    }
    chosen
}

fn diagonal_label(x: &[f64; 2]) -> u8 {
    u8::from(x[0] + x[1] > 0.0)
}

fn build(
    dim: usize,
    sizes: [usize; 3],
    mut group: impl FnMut(SplitKind, usize, usize) -> Result<GroupData>,
) -> Result<GroupDataset> {
    let mut splits = Vec::with_capacity(3);
    for kind in SplitKind::ALL {
        let groups = (0..3)
            .map(|g| {
                let n = match kind {
                    SplitKind::Train => sizes[g],
                    SplitKind::Val => VAL_PER_GROUP,
                    SplitKind::Test => TEST_PER_GROUP,
                };
                group(kind, g, n)
            })
            .collect::<Result<Vec<_>>>()?;
        splits.push(Split { groups });
    }
    let test = splits.pop().unwrap();
    let val = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    GroupDataset::new(dim, train, val, test)
}

/// Label noise in the first group (training split only).
pub fn gen_noise_simple(seed: u64) -> Result<GroupDataset> {
    build(2, NOISE_TRAIN_SIZES, |kind, g, n| {
        let mut rng = stream(seed, kind, g);
        let xs: Vec<[f64; 2]> = (0..n).map(|_| normal_pair(&mut rng)).collect();
        let flip = if kind == SplitKind::Train && g == 0 {
            pick(&mut rng, n, NOISE_FLIP_RATE)
        } else {
            vec![false; n]
        };
        let mut data = GroupData::new(2);
        for (x, f) in xs.iter().zip(flip) {
            let y = diagonal_label(x);
            data.push(x, if f { 1 - y } else { y })?;
        }
        Ok(data)
    })
}

/// Group-specific linear rules 30 degrees apart.
pub fn gen_rotation_simple(seed: u64) -> Result<GroupDataset> {
    build(2, ROTATION_TRAIN_SIZES, |kind, g, n| {
        let mut rng = stream(seed, kind, g);
        let normal = ROTATION_NORMALS[g];
        let mut data = GroupData::new(2);
        for _ in 0..n {
            let x = normal_pair(&mut rng);
            data.push(&x, u8::from(normal[0] * x[0] + normal[1] * x[1] > 0.0))?;
        }
        Ok(data)
    })
}

/// Minority size for a majority:minority ratio `r`, i.e. `round(980 / r)`, at least one.
pub fn spurious_minority_size(minority_ratio: Option<f64>) -> Result<usize> {
    match minority_ratio {
        None => Ok(SPURIOUS_DEFAULT_MINORITY),
        Some(r) if r.is_finite() && r >= 1.0 => {
            Ok((((2 * SPURIOUS_MAJORITY) as f64 / r).round() as usize).max(1))
        }
        Some(r) => Err(CgdError::InvalidRatio(r)),
    }
}

/// Spurious third feature: equal to `y` in group 0, `1 - y` in group 2 and
/// mixed in group 1. In group 0's training split 40% of the examples have
/// `(x1, x2)` reflected through the origin so the clean features only predict
/// the label on 60% of them.
pub fn gen_spurious_simple(seed: u64, minority_ratio: Option<f64>) -> Result<GroupDataset> {
    let minority = spurious_minority_size(minority_ratio)?;
    let sizes = [SPURIOUS_MAJORITY, SPURIOUS_MAJORITY, minority];
    build(3, sizes, |kind, g, n| {
        let mut rng = stream(seed, kind, g);
        let xs: Vec<[f64; 2]> = (0..n).map(|_| normal_pair(&mut rng)).collect();
        let reflect = if kind == SplitKind::Train && g == 0 {
            pick(&mut rng, n, SPURIOUS_REFLECT_RATE)
        } else {
            vec![false; n]
        };
        let disagree = if g == 1 {
            pick(&mut rng, n, SPURIOUS_MIXED_RATE)
        } else {
            vec![g == 2; n]
        };
        let mut data = GroupData::new(3);
        for ((x, r), d) in xs.iter().zip(reflect).zip(disagree) {
            let y = diagonal_label(x);
            let x3 = f64::from(if d { 1 - y } else { y });
            let (x1, x2) = if r { (-x[0], -x[1]) } else { (x[0], x[1]) };
            data.push(&[x1, x2, x3], y)?;
        }
        Ok(data)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_simple_shape_and_flips() {
        let ds = gen_noise_simple(1).unwrap();
        assert_eq!(ds.group_counts(), vec![450, 450, 100]);
        assert_eq!(ds.feature_dim(), 2);
        let flipped = ds.train.groups[0]
            .rows()
            .filter(|(x, y)| u8::from(x[0] + x[1] > 0.0) != *y)
            .count();
        assert_eq!(flipped, 90);
        for g in &ds.train.groups[1..] {
            assert!(g.rows().all(|(x, y)| u8::from(x[0] + x[1] > 0.0) == y));
        }
        for split in [&ds.val, &ds.test] {
            for g in &split.groups {
                assert!(g.rows().all(|(x, y)| u8::from(x[0] + x[1] > 0.0) == y));
            }
        }
        assert_eq!(ds.test.counts(), vec![1000; 3]);
        assert_eq!(ds.val.counts(), vec![500; 3]);
    }

    #[test]
    fn rotation_simple_rules() {
        let ds = gen_rotation_simple(3).unwrap();
        assert_eq!(ds.group_counts(), vec![499, 499, 2]);
        for split in [&ds.train, &ds.test] {
            assert!(split.groups[0]
                .rows()
                .all(|(x, y)| u8::from(x[0] > 0.0) == y));
            for (g, n) in ROTATION_NORMALS.iter().enumerate() {
                assert!(split.groups[g]
                    .rows()
                    .all(|(x, y)| u8::from(n[0] * x[0] + n[1] * x[1] > 0.0) == y));
            }
        }
        // x = (0, 1): labels (0, 1, 1)
        let labels: Vec<u8> = ROTATION_NORMALS
            .iter()
            .map(|n| u8::from(n[1] > 0.0))
            .collect();
        assert_eq!(labels, vec![0, 1, 1]);
    }

    #[test]
    fn spurious_simple_rules() {
        let ds = gen_spurious_simple(5, None).unwrap();
        assert_eq!(ds.group_counts(), vec![490, 490, 20]);
        let g0 = &ds.train.groups[0];
        let correct = g0
            .rows()
            .filter(|(x, y)| u8::from(x[0] + x[1] > 0.0) == *y)
            .count();
        assert_eq!(correct, 294);
        assert!(g0.rows().all(|(x, y)| x[2] == f64::from(y)));
        for split in [&ds.train, &ds.val, &ds.test] {
            assert!(split.groups[2]
                .rows()
                .all(|(x, y)| x[2] == f64::from(1 - y)));
        }
        let g1 = &ds.train.groups[1];
        assert_eq!(
            g1.rows().filter(|(x, y)| x[2] == f64::from(*y)).count(),
            294
        );
        assert!(g1.rows().all(|(x, y)| u8::from(x[0] + x[1] > 0.0) == y));
    }

    #[test]
    fn spurious_ratio_sizes() {
        assert_eq!(spurious_minority_size(Some(2.0)).unwrap(), 490);
        assert_eq!(spurious_minority_size(Some(10.0)).unwrap(), 98);
        assert_eq!(spurious_minority_size(Some(100.0)).unwrap(), 10);
        assert_eq!(spurious_minority_size(Some(1000.0)).unwrap(), 1);
        assert!(matches!(
            gen_spurious_simple(0, Some(0.5)),
            Err(CgdError::InvalidRatio(_))
        ));
        assert!(gen_spurious_simple(0, Some(f64::NAN)).is_err());
    }

    #[test]
    fn same_seed_same_data() {
        for s in Setting::ALL {
            assert_eq!(s.generate(11, None).unwrap(), s.generate(11, None).unwrap());
            assert_ne!(s.generate(11, None).unwrap(), s.generate(12, None).unwrap());
        }
    }

    #[test]
    fn net_correlations_are_comparable() {
        // Pooled training data: both the clean features and the spurious one
        // should agree with the label on roughly 80% of examples.
        let ds = gen_spurious_simple(2, None).unwrap();
        let (mut clean, mut spur, mut n) = (0usize, 0usize, 0usize);
        for g in &ds.train.groups {
            for (x, y) in g.rows() {
                clean += usize::from(u8::from(x[0] + x[1] > 0.0) == y);
                spur += usize::from(x[2] == f64::from(y));
                n += 1;
            }
        }
        let (c, s) = (clean as f64 / n as f64, spur as f64 / n as f64);
        assert!(
            (c - 0.8).abs() < 0.05 && (s - 0.8).abs() < 0.05,
            "clean {c}, spurious {s}"
        );
    }
}
