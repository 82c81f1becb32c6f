//! Seeded random k-CNF generation with a satisfiability filter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{brute_force_sat, Clause, Formula, Literal};

/// [`generate_instance`] refuses more variables than this; every draw is
/// checked by exhaustive enumeration.
pub const GENERATION_VAR_LIMIT: u32 = 20;

/// Unsatisfiable draws are redrawn from a derived sub-seed at most this
/// many times.
pub const RETRY_BUDGET: u64 = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("clause width {width} must lie in 1..={num_vars}")]
    InvalidWidth { width: u32, num_vars: u32 },
    #[error("clause count must be at least 1")]
    NoClauses,
    #[error("{num_vars} variables exceeds the generation limit of {limit}")]
    TooManyVariables { num_vars: u32, limit: u32 },
    #[error("no satisfiable draw within {attempts} attempts for seed {seed}")]
    RetriesExhausted { attempts: u64, seed: u64 },
}

fn validate(num_vars: u32, num_clauses: usize, width: u32) -> Result<(), GenerateError> {
    if width < 1 || width > num_vars {
        return Err(GenerateError::InvalidWidth { width, num_vars });
    }
    if num_clauses == 0 {
        return Err(GenerateError::NoClauses);
    }
    Ok(())
}

fn draw_clause(num_vars: u32, width: u32, rng: &mut ChaCha8Rng) -> Clause {
    // Distinct variables rule out duplicate literals and tautological
    // pairs; variable and polarity order are kept as drawn.
    let vars = rand::seq::index::sample(rng, num_vars as usize, width as usize);
    let literals = vars
        .iter()
        .map(|i| Literal::new(i as u32 + 1, rng.gen_bool(0.5)))
        .collect();
    Clause::new(literals).expect("width >= 1")
}

/// One unfiltered draw: `num_clauses` clauses of exactly `width` distinct
/// variables each, polarities uniform. Deterministic in its arguments;
/// not satisfiability-checked.
pub fn random_formula(
    num_vars: u32,
    num_clauses: usize,
    width: u32,
    seed: u64,
) -> Result<Formula, GenerateError> {
    validate(num_vars, num_clauses, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..num_clauses)
        .map(|_| draw_clause(num_vars, width, &mut rng))
        .collect();
    Ok(Formula::new(num_vars, clauses).expect("generator stays in bounds"))
}

/// Satisfiable instance, deterministic in `(num_vars, num_clauses, width,
/// seed)`.
///
/// Draws are filtered through [`brute_force_sat`]; an unsatisfiable draw is
/// redrawn from the incremented sub-seed `seed + (attempt << 32)` (the high
/// word keeps retry streams disjoint from neighboring instance seeds), up
/// to [`RETRY_BUDGET`] attempts.
pub fn generate_instance(
    num_vars: u32,
    num_clauses: usize,
    width: u32,
    seed: u64,
) -> Result<Formula, GenerateError> {
    validate(num_vars, num_clauses, width)?;
    if num_vars > GENERATION_VAR_LIMIT {
        return Err(GenerateError::TooManyVariables {
            num_vars,
            limit: GENERATION_VAR_LIMIT,
        });
    }
    for attempt in 0..RETRY_BUDGET {
        let sub_seed = seed.wrapping_add(attempt << 32);
        let f = random_formula(num_vars, num_clauses, width, sub_seed)?;
        if brute_force_sat(&f)
            .expect("generation limit is below the enumeration limit")
            .is_some()
        {
            return Ok(f);
        }
    }
    Err(GenerateError::RetriesExhausted {
        attempts: RETRY_BUDGET,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::serialize_dimacs;

    // Independent of the library evaluation path: a clause is satisfied by
    // a value vector when some literal's polarity matches its variable's
    // value.
    fn satisfiable_by_enumeration(f: &Formula) -> bool {
        let n = f.num_vars();
        (0u64..(1u64 << n)).any(|bits| {
            f.clauses().iter().all(|c| {
                c.literals()
                    .iter()
                    .any(|l| ((bits >> (l.var() - 1)) & 1 == 1) == l.is_positive())
            })
        })
    }

    #[test]
    fn emits_requested_shape() {
        let f = generate_instance(5, 10, 3, 7).unwrap();
        assert_eq!(f.num_vars(), 5);
        assert_eq!(f.num_clauses(), 10);
        for c in f.clauses() {
            assert_eq!(c.len(), 3);
            assert!(!c.has_duplicate());
            assert!(!c.is_tautological());
        }
    }

    #[test]
    fn single_full_width_clause_is_satisfiable() {
        let f = generate_instance(3, 1, 3, 11).unwrap();
        assert_eq!(f.num_clauses(), 1);
        assert_eq!(f.clause(1).unwrap().len(), 3);
        assert!(satisfiable_by_enumeration(&f));
    }

    #[test]
    fn every_generated_instance_is_satisfiable() {
        for seed in 0..50u64 {
            let f = generate_instance(8, 24, 3, seed).unwrap();
            assert!(satisfiable_by_enumeration(&f), "seed {seed}");
        }
    }

    #[test]
    fn deterministic_in_all_arguments() {
        let a = generate_instance(9, 27, 3, 123).unwrap();
        let b = generate_instance(9, 27, 3, 123).unwrap();
        assert_eq!(serialize_dimacs(&a), serialize_dimacs(&b));
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_instance(9, 27, 3, 1).unwrap();
        let b = generate_instance(9, 27, 3, 2).unwrap();
        assert_ne!(serialize_dimacs(&a), serialize_dimacs(&b));
    }

    #[test]
    fn width_wider_than_variables_is_rejected() {
        assert_eq!(
            generate_instance(3, 1, 4, 0),
            Err(GenerateError::InvalidWidth {
                width: 4,
                num_vars: 3
            })
        );
    }

    #[test]
    fn zero_clauses_rejected() {
        assert_eq!(random_formula(3, 0, 2, 0), Err(GenerateError::NoClauses));
    }

    #[test]
    fn oversized_generation_rejected() {
        assert_eq!(
            generate_instance(21, 3, 2, 0),
            Err(GenerateError::TooManyVariables {
                num_vars: 21,
                limit: GENERATION_VAR_LIMIT
            })
        );
    }
}
