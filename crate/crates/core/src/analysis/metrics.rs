//! β (estimation error) and ω (similarity ratio) of a candidate set.

use crate::stochmax::{exact_max, stoch_max, CandidateSet};
use crate::Result;

/// `max_a q[a] − max_{c∈C} q[c]`, never negative.
pub fn beta(q: &[f64], candidates: &CandidateSet) -> Result<f64> {
    let sm = stoch_max(candidates, |a| q[a.index()])?;
    Ok(exact_max(q.len(), |a| q[a.index()]) - sm)
}

/// `max_{c∈C} q[c] / max_a q[a]`, or `None` when the exact max is not positive.
pub fn omega(q: &[f64], candidates: &CandidateSet) -> Result<Option<f64>> {
    let sm = stoch_max(candidates, |a| q[a.index()])?;
    let m = exact_max(q.len(), |a| q[a.index()]);
    Ok((m > 0.0).then(|| sm / m))
}
