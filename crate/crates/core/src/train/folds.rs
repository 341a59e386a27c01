use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::signal::SegmentBatch;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Kfold10,
    Loocv,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kfold10" => Some(Strategy::Kfold10),
            "loocv" => Some(Strategy::Loocv),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Kfold10 => "kfold10",
            Strategy::Loocv => "loocv",
        }
    }
}

/// One train/validation/test split. Segment indices are always filled; the
/// subject lists only for subject-level plans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_subjects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub val_subjects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_subjects: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub strategy: Strategy,
    pub seed: u64,
    pub n_segments: usize,
    pub folds: Vec<Fold>,
}

/// Shuffle all segments into `k` near-equal groups and rotate:
/// test = group `i`, validation = group `i+1 mod k`, train = the rest.
pub fn make_kfold(batch: &SegmentBatch, k: usize, seed: u64) -> Result<FoldPlan, TrainError> {
    let n = batch.len();
    if k < 3 {
        return Err(TrainError::Plan(format!("k = {k}; need at least 3 groups")));
    }
    if n < k {
        return Err(TrainError::Plan(format!("{n} segments cannot fill {k} groups")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let groups: Vec<Vec<usize>> = (0..k)
        .map(|g| {
            let mut v = idx[g * n / k..(g + 1) * n / k].to_vec();
            v.sort_unstable();
            v
        })
        .collect();
    let folds = (0..k)
        .map(|i| {
            let v = (i + 1) % k;
            let mut train: Vec<usize> = (0..k).filter(|&g| g != i && g != v).flat_map(|g| groups[g].clone()).collect();
            train.sort_unstable();
            Fold {
                index: i,
                train,
                val: groups[v].clone(),
                test: groups[i].clone(),
                train_subjects: Vec::new(),
                val_subjects: Vec::new(),
                test_subjects: Vec::new(),
            }
        })
        .collect();
    Ok(FoldPlan {
        strategy: Strategy::Kfold10,
        seed,
        n_segments: n,
        folds,
    })
}

/// One fold per subject. Validation is one other subject drawn with a
/// per-fold seeded choice; everyone else trains.
pub fn make_loocv(batch: &SegmentBatch, seed: u64) -> Result<FoldPlan, TrainError> {
    let subjects = batch.subjects();
    if subjects.len() < 3 {
        return Err(TrainError::Plan(format!("{} subjects; leave-one-out needs at least 3", subjects.len())));
    }
    let folds = subjects
        .iter()
        .enumerate()
        .map(|(i, test)| {
            let others: Vec<&String> = subjects.iter().filter(|s| *s != test).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(super::fold_seed(seed, i));
            let val = (*others.choose(&mut rng).unwrap()).clone();
            let train_subjects: Vec<String> = others.into_iter().filter(|s| **s != val).cloned().collect();
            Fold {
                index: i,
                train: batch.indices_of_subjects(&train_subjects),
                val: batch.indices_of_subjects(std::slice::from_ref(&val)),
                test: batch.indices_of_subjects(std::slice::from_ref(test)),
                train_subjects,
                val_subjects: vec![val],
                test_subjects: vec![test.clone()],
            }
        })
        .collect();
    Ok(FoldPlan {
        strategy: Strategy::Loocv,
        seed,
        n_segments: batch.len(),
        folds,
    })
}

/// Scan every fold of `plan` against `batch`:
/// - train, val and test are non-empty, disjoint and in range;
/// - loocv: no segment of a test subject sits in train or val, and every
///   subject is tested exactly once;
/// - kfold: each fold covers all segments and the test sets partition them.
pub fn check_hygiene(plan: &FoldPlan, batch: &SegmentBatch) -> Result<(), TrainError> {
    let n = batch.len();
    if plan.n_segments != n {
        return Err(TrainError::Hygiene(format!("plan built for {} segments, batch has {n}", plan.n_segments)));
    }
    let mut tested = vec![0usize; n];
    for f in &plan.folds {
        let fail = |m: String| Err(TrainError::Hygiene(format!("fold {}: {m}", f.index)));
        if f.train.is_empty() || f.val.is_empty() || f.test.is_empty() {
            return fail("empty partition".into());
        }
        let mut seen = HashSet::new();
        for &i in f.train.iter().chain(&f.val).chain(&f.test) {
            if i >= n {
                return fail(format!("index {i} out of range"));
            }
            if !seen.insert(i) {
                return fail(format!("segment {i} appears in two partitions"));
            }
        }
        for &i in &f.test {
            tested[i] += 1;
        }
        match plan.strategy {
            Strategy::Kfold10 => {
                if seen.len() != n {
                    return fail(format!("covers {} of {n} segments", seen.len()));
                }
            }
            Strategy::Loocv => {
                let test: HashSet<&str> = f.test.iter().map(|&i| batch.subject_ids[i].as_str()).collect();
                if test.len() != 1 {
                    return fail(format!("{} test subjects", test.len()));
                }
                if let Some(&i) = f.train.iter().chain(&f.val).find(|&&i| test.contains(batch.subject_ids[i].as_str())) {
                    return fail(format!("test subject {} leaks into segment {i}", batch.subject_ids[i]));
                }
                // every segment of the test subject is in the test set
                let want = batch.subject_ids.iter().filter(|s| test.contains(s.as_str())).count();
                if want != f.test.len() {
                    return fail("test set misses segments of its subject".into());
                }
            }
        }
    }
    if let Some(i) = tested.iter().position(|&c| c != 1) {
        return Err(TrainError::Hygiene(format!("segment {i} is tested {} times", tested[i])));
    }
    Ok(())
}
