use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// Random balanced partition of `0..n` into `L` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    folds: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl FoldPartition {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn fold_of(&self, subject: usize) -> usize {
        self.assignment[subject]
    }

    /// Subjects outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != f)
            .collect()
    }
}

/// Shuffles the subjects and deals them round-robin into `l` folds, so fold
/// sizes differ by at most one. Each fold lists its subjects in ascending order.
pub fn make_folds(n: usize, l: usize, seed: u64) -> Result<FoldPartition> {
    if l < 2 || l > n {
        return Err(Error::Parameter(format!(
            "fold count must satisfy 2 <= L <= n (L = {l}, n = {n})"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let mut assignment = vec![0; n];
    let mut folds = vec![Vec::with_capacity(n / l + 1); l];
    for (pos, &subject) in perm.iter().enumerate() {
        assignment[subject] = pos % l;
    }
    for (subject, &f) in assignment.iter().enumerate() {
        folds[f].push(subject);
    }
    Ok(FoldPartition { folds, assignment })
}
