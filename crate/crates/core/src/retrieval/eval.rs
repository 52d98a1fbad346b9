use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Retrieval errors of one example. A paired addition and deletion counts as
/// one replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorTally {
    pub additions: usize,
    pub deletions: usize,
    pub replacements: usize,
}

impl std::ops::AddAssign for ErrorTally {
    fn add_assign(&mut self, rhs: Self) {
        self.additions += rhs.additions;
        self.deletions += rhs.deletions;
        self.replacements += rhs.replacements;
    }
}

fn as_set<'a>(ids: impl IntoIterator<Item = &'a str>) -> HashSet<&'a str> {
    ids.into_iter().collect()
}

/// Set-based precision and recall of a retrieved document set.
pub fn retrieval_pr_at_k<'a>(
    retrieved: impl IntoIterator<Item = &'a str>,
    gold: impl IntoIterator<Item = &'a str>,
) -> Result<(f64, f64), RetrievalError> {
    let retrieved = as_set(retrieved);
    let gold = as_set(gold);
    if gold.is_empty() {
        return Err(RetrievalError::EmptyGold);
    }
    if retrieved.is_empty() {
        return Err(RetrievalError::EmptyRetrieval);
    }
    let hits = retrieved.intersection(&gold).count() as f64;
    Ok((hits / retrieved.len() as f64, hits / gold.len() as f64))
}

pub fn count_retrieval_errors<'a>(
    retrieved: impl IntoIterator<Item = &'a str>,
    gold: impl IntoIterator<Item = &'a str>,
) -> ErrorTally {
    let retrieved = as_set(retrieved);
    let gold = as_set(gold);
    let raw_add = retrieved.difference(&gold).count();
    let raw_del = gold.difference(&retrieved).count();
    let replacements = raw_add.min(raw_del);
    ErrorTally {
        additions: raw_add - replacements,
        deletions: raw_del - replacements,
        replacements,
    }
}
