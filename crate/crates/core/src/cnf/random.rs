use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Clause, Formula, Literal};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("clause length {clause_len} exceeds variable count {num_vars}")]
pub struct GenError {
    pub clause_len: usize,
    pub num_vars: u32,
}

/// Uniform random k-CNF: each clause draws `clause_len` distinct variables
/// and an independent fair polarity for each. Deterministic in `seed`.
pub fn gen_random(
    num_vars: u32,
    num_clauses: usize,
    clause_len: usize,
    seed: u64,
) -> Result<Formula, GenError> {
    if clause_len > num_vars as usize {
        return Err(GenError {
            clause_len,
            num_vars,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..num_clauses)
        .map(|_| {
            let vars = sample(&mut rng, num_vars as usize, clause_len);
            let lits: Vec<Literal> = vars
                .iter()
                .map(|v| Literal::new(v as u32 + 1, rng.gen_bool(0.5)))
                .collect();
            Clause::new(lits)
        })
        .collect();
    Ok(Formula::new(num_vars, clauses).expect("sampled vars are in range"))
}
