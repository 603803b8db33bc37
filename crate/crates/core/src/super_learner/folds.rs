use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of observations to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub strata: Option<Vec<u8>>,
    /// Strata with fewer members than folds.
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Balanced, optionally stratified fold assignment.
///
/// Observations are shuffled within each stratum and dealt round-robin, with
/// the dealing position carried across strata. Overall fold sizes therefore
/// differ by at most one, and so do the per-stratum counts.
pub fn make_folds(n: usize, k: usize, strata: Option<&[u8]>, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("{n} observations cannot fill {k} folds")));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(Error::Dimension("strata length differs from n".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<(u8, Vec<usize>)> = match strata {
        None => vec![(0, (0..n).collect())],
        Some(s) => {
            let mut labels: Vec<u8> = s.to_vec();
            labels.sort_unstable();
            labels.dedup();
            labels.into_iter().map(|l| (l, (0..n).filter(|&i| s[i] == l).collect())).collect()
        }
    };
    let mut warnings = Vec::new();
    let mut fold_of = vec![0usize; n];
    let mut next = 0usize;
    for (label, members) in groups.iter_mut() {
        if strata.is_some() && members.len() < k {
            warnings.push(format!("stratum {label} has {} members for {k} folds", members.len()));
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed, strata: strata.map(<[u8]>::to_vec), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_into_ten_gives_five_each() {
        let f = make_folds(50, 10, None, 7).unwrap();
        assert_eq!(f.fold_sizes(), vec![5; 10]);
    }

    #[test]
    fn leave_one_out() {
        let f = make_folds(12, 12, None, 1).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 12]);
    }

    #[test]
    fn n_below_k_is_an_error() {
        assert!(make_folds(4, 5, None, 0).is_err());
    }

    #[test]
    fn small_stratum_is_flagged() {
        let strata: Vec<u8> = (0..20).map(|i| u8::from(i < 3)).collect();
        let f = make_folds(20, 5, Some(&strata), 0).unwrap();
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = make_folds(37, 10, None, 99).unwrap();
        let b = make_folds(37, 10, None, 99).unwrap();
        let c = make_folds(37, 10, None, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.fold_of, c.fold_of);
    }
}
