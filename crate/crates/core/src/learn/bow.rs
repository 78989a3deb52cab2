use super::kmeans::Codebook;
use crate::error::{Error, Result};

/// L1-normalised codeword histogram of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BowHistogram {
    pub counts: Vec<f64>,
    /// Set when the sequence had no descriptors; `counts` is then all zero.
    pub empty: bool,
}

/// Hard-assigns every descriptor to its nearest codeword (lowest index on
/// ties) and normalises the counts to sum to one.
pub fn bow_encode(descriptors: &[Vec<f64>], codebook: &Codebook) -> Result<BowHistogram> {
    let mut counts = vec![0.0; codebook.k()];
    if descriptors.is_empty() {
        return Ok(BowHistogram { counts, empty: true });
    }
    for d in descriptors {
        if d.len() != codebook.dim {
            return Err(Error::data(format!("descriptor dimension {} does not match codebook {}", d.len(), codebook.dim)));
        }
        counts[codebook.nearest(d).0] += 1.0;
    }
    let n = descriptors.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(BowHistogram { counts, empty: false })
}
