//! The polynomial-time algorithm for PCSP(1-in-3-SAT, NAE-3-SAT):
//! replace each triple (x, y, z) by the equation x + y + z = 1, solve
//! exactly over Z (or over Q avoiding 1/3), and round the solution to a
//! not-all-equal assignment.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linear::{
    solve_integer_system, solve_rational_avoiding, IntMatrix, IntegerLinearSystem,
    RationalAvoidOutcome,
};
use crate::structure::Assignment;
use crate::Error;

/// Variables plus ordered triples over them; repetitions are allowed
/// both inside a triple and across triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleInstance {
    var_names: Vec<String>,
    triples: Vec<[usize; 3]>,
}

impl TripleInstance {
    pub fn new(var_names: Vec<String>, triples: Vec<[usize; 3]>) -> Result<Self, Error> {
        let n = var_names.len();
        for (i, t) in triples.iter().enumerate() {
            if let Some(&v) = t.iter().find(|&&v| v >= n) {
                return Err(Error::UnknownName(format!(
                    "triple {i} references undeclared variable index {v}"
                )));
            }
        }
        Ok(TripleInstance { var_names, triples })
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.triples
    }
}

/// Which exact domain the linear system is solved over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Solve over Z and round at 0.
    Integers,
    /// Solve over Q \ {1/3} and round at 1/3.
    Rationals,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The instance maps to NAE; the witness is attached.
    Yes(Assignment),
    /// The instance has no 1-in-3 assignment.
    No,
}

/// Diagnostic statistics from the solved system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemStats {
    pub rows: usize,
    pub cols: usize,
    pub kernel_rank: Option<usize>,
    pub method: Method,
}

/// Promise-semantics answer: "yes" claims only that a valid NAE
/// assignment exists (and attaches one); "no" certifies that no 1-in-3
/// assignment exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcspAnswer {
    pub verdict: Verdict,
    pub stats: SystemStats,
}

/// One row per triple, one column per variable; the coefficient is the
/// multiplicity of the variable in the triple and the right-hand side
/// is 1.
pub fn triples_to_system(x: &TripleInstance) -> IntegerLinearSystem {
    let mut a = IntMatrix::zero(x.triples.len(), x.num_vars());
    for (r, t) in x.triples.iter().enumerate() {
        for &v in t {
            let coeff = a.get(r, v) + BigInt::one();
            a.set(r, v, coeff);
        }
    }
    let b = vec![BigInt::one(); x.triples.len()];
    IntegerLinearSystem::new(a, b).expect("row count matches rhs length by construction")
}

/// psi(x) = 0 if phi(x) <= 0, else 1.
pub fn round_integer(phi: &[BigInt]) -> Assignment {
    Assignment::new(phi.iter().map(|v| usize::from(v.is_positive())).collect())
}

/// psi(x) = 0 iff phi(x) < 1/3; no coordinate may equal 1/3.
pub fn round_rational(phi: &[BigRational]) -> Result<Assignment, Error> {
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    if let Some(i) = phi.iter().position(|v| *v == third) {
        return Err(Error::CoordinateEqualsOneThird { index: i });
    }
    Ok(Assignment::new(phi.iter().map(|v| usize::from(*v > third)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    OneInThree,
    NotAllEqual,
}

/// True iff every triple meets the mode's condition under `a`. The
/// assignment must be total over the instance's variables with values
/// in {0, 1}.
pub fn verify_assignment(
    x: &TripleInstance,
    a: &Assignment,
    mode: VerifyMode,
) -> Result<bool, Error> {
    if a.len() != x.num_vars() {
        return Err(Error::PartialAssignment(format!(
            "assignment covers {} of {} variables",
            a.len(),
            x.num_vars()
        )));
    }
    if let Some(&v) = a.values().iter().find(|&&v| v > 1) {
        return Err(Error::ElementOutOfDomain(format!("value {v} outside {{0,1}}")));
    }
    Ok(x.triples.iter().all(|t| {
        let ones = t.iter().filter(|&&v| a.get(v) == 1).count();
        match mode {
            VerifyMode::OneInThree => ones == 1,
            VerifyMode::NotAllEqual => ones != 0 && ones != 3,
        }
    }))
}

/// Decides the promise problem: "yes" iff the encoded system is
/// solvable over the chosen domain, in which case the rounded solution
/// is a valid NAE assignment; "no" certifies 1-in-3 unsatisfiability.
pub fn solve_pcsp(x: &TripleInstance, method: Method) -> PcspAnswer {
    let sys = triples_to_system(x);
    let rows = sys.a.rows();
    let cols = sys.a.cols();
    let (verdict, kernel_rank) = match method {
        Method::Integers => match solve_integer_system(&sys) {
            Some(space) => {
                let psi = round_integer(&space.particular);
                (Verdict::Yes(psi), Some(space.basis.len()))
            }
            None => (Verdict::No, None),
        },
        Method::Rationals => {
            let third = BigRational::new(BigInt::one(), BigInt::from(3));
            match solve_rational_avoiding(&sys, &third) {
                RationalAvoidOutcome::Solution(phi) => {
                    let psi = round_rational(&phi)
                        .expect("solution avoids 1/3 by construction");
                    (Verdict::Yes(psi), None)
                }
                RationalAvoidOutcome::Unsolvable
                | RationalAvoidOutcome::ForcedCoordinate { .. } => (Verdict::No, None),
            }
        }
    };
    if let Verdict::Yes(psi) = &verdict {
        debug_assert!(verify_assignment(x, psi, VerifyMode::NotAllEqual).unwrap());
    }
    PcspAnswer { verdict, stats: SystemStats { rows, cols, kernel_rank, method } }
}

/// A random instance admitting at least one 1-in-3 assignment (the
/// plant); deterministic per seed.
pub fn gen_planted(n: usize, m: usize, seed: u64) -> Result<TripleInstance, Error> {
    if n < 3 {
        return Err(Error::InfeasibleParameters(format!(
            "need at least 3 variables, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the plant: each variable 1 with probability 1/3, patched so both
    // values occur
    let mut plant: Vec<usize> = (0..n).map(|_| usize::from(rng.gen_range(0..3) == 0)).collect();
    if plant.iter().all(|&v| v == 0) {
        plant[0] = 1;
    }
    if plant.iter().all(|&v| v == 1) {
        plant[0] = 0;
    }
    let ones: Vec<usize> = (0..n).filter(|&v| plant[v] == 1).collect();
    let zeros: Vec<usize> = (0..n).filter(|&v| plant[v] == 0).collect();
    let triples = (0..m)
        .map(|_| {
            let one = ones[rng.gen_range(0..ones.len())];
            let z1 = zeros[rng.gen_range(0..zeros.len())];
            let z2 = zeros[rng.gen_range(0..zeros.len())];
            let mut t = [one, z1, z2];
            // shuffle positions so the 1 is not always first
            let pos = rng.gen_range(0..3);
            t.swap(0, pos);
            t
        })
        .collect();
    TripleInstance::new((0..n).map(|i| format!("x{i}")).collect(), triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn inst(n: usize, triples: Vec<[usize; 3]>) -> TripleInstance {
        TripleInstance::new((0..n).map(|i| format!("x{i}")).collect(), triples).unwrap()
    }

    #[test]
    fn system_encoding_multiplicity() {
        let x = inst(3, vec![[0, 1, 2], [0, 0, 1], [2, 2, 2]]);
        let sys = triples_to_system(&x);
        let row = |r: usize| -> Vec<i64> {
            (0..3).map(|c| i64::try_from(sys.a.get(r, c)).unwrap()).collect()
        };
        assert_eq!(row(0), vec![1, 1, 1]);
        assert_eq!(row(1), vec![2, 1, 0]);
        assert_eq!(row(2), vec![0, 0, 3]);
        assert!(sys.b.iter().all(|v| v.is_one()));
    }

    #[test]
    fn rounding_examples() {
        let phi = vec![BigInt::from(-2), BigInt::from(3), BigInt::zero()];
        assert_eq!(round_integer(&phi).values(), &[0, 1, 0]);
        assert_eq!(
            round_integer(&[BigInt::from(-1), BigInt::from(-7)]).values(),
            &[0, 0]
        );

        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let phi = vec![r(0, 1), r(2, 3), r(1, 3) - r(1, 1000)];
        assert_eq!(round_rational(&phi).unwrap().values(), &[0, 1, 0]);
        assert_eq!(
            round_rational(&[r(1, 1), r(1, 1), r(-1, 1)]).unwrap().values(),
            &[1, 1, 0]
        );
        assert!(matches!(
            round_rational(&[r(1, 3)]),
            Err(Error::CoordinateEqualsOneThird { index: 0 })
        ));
    }

    #[test]
    fn verify_modes() {
        let x = inst(3, vec![[0, 1, 2]]);
        let a = |vals: Vec<usize>| Assignment::new(vals);
        assert!(verify_assignment(&x, &a(vec![1, 0, 0]), VerifyMode::OneInThree).unwrap());
        assert!(!verify_assignment(&x, &a(vec![1, 1, 0]), VerifyMode::OneInThree).unwrap());
        assert!(verify_assignment(&x, &a(vec![1, 1, 0]), VerifyMode::NotAllEqual).unwrap());
        assert!(!verify_assignment(&x, &a(vec![1, 1, 1]), VerifyMode::NotAllEqual).unwrap());
        assert!(verify_assignment(&x, &a(vec![0, 0, 1]), VerifyMode::OneInThree).unwrap());
        // repeated variables share their value
        let rep = inst(2, vec![[0, 0, 1]]);
        assert!(!verify_assignment(&rep, &a(vec![1, 0]), VerifyMode::OneInThree).unwrap());
        assert!(verify_assignment(&rep, &a(vec![0, 1]), VerifyMode::OneInThree).unwrap());
    }

    #[test]
    fn solve_single_triple() {
        let x = inst(3, vec![[0, 1, 2]]);
        for method in [Method::Integers, Method::Rationals] {
            match solve_pcsp(&x, method).verdict {
                Verdict::Yes(psi) => {
                    assert!(verify_assignment(&x, &psi, VerifyMode::NotAllEqual).unwrap())
                }
                Verdict::No => panic!("satisfiable instance rejected"),
            }
        }
    }

    #[test]
    fn solve_constant_triple_rejected() {
        // 3x = 1 is unsolvable over Z and forces x = 1/3 over Q
        let x = inst(3, vec![[0, 0, 0]]);
        assert_eq!(solve_pcsp(&x, Method::Integers).verdict, Verdict::No);
        assert_eq!(solve_pcsp(&x, Method::Rationals).verdict, Verdict::No);
    }

    #[test]
    fn planted_instances_verify() {
        let x = gen_planted(50, 100, 7).unwrap();
        assert_eq!(x.num_vars(), 50);
        assert_eq!(x.triples().len(), 100);
        // the generator's plant is recoverable: solve and check the promise
        match solve_pcsp(&x, Method::Integers).verdict {
            Verdict::Yes(psi) => {
                assert!(verify_assignment(&x, &psi, VerifyMode::NotAllEqual).unwrap())
            }
            Verdict::No => panic!("planted instance rejected"),
        }
        // determinism
        assert_eq!(gen_planted(50, 100, 7).unwrap(), x);
        assert!(matches!(gen_planted(2, 1, 0), Err(Error::InfeasibleParameters(_))));
    }

    #[test]
    fn rounding_soundness_on_solution_space_samples() {
        // any exact solution of the system rounds to an NAE assignment
        let mut state = 31u64;
        let mut next = move |bound: usize| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as usize) % bound
        };
        for trial in 0..50 {
            let n = 3 + next(6);
            let m = 1 + next(5);
            let triples: Vec<[usize; 3]> =
                (0..m).map(|_| [next(n), next(n), next(n)]).collect();
            let x = inst(n, triples);
            let sys = triples_to_system(&x);
            if let Some(space) = solve_integer_system(&sys) {
                // random lattice point: particular + combination of basis
                let mut phi = space.particular.clone();
                for v in &space.basis {
                    let c = BigInt::from(next(7) as i64 - 3);
                    for (p, e) in phi.iter_mut().zip(v) {
                        *p += &c * e;
                    }
                }
                assert_eq!(sys.a.mul_vec(&phi).unwrap(), sys.b, "trial {trial}");
                let psi = round_integer(&phi);
                assert!(
                    verify_assignment(&x, &psi, VerifyMode::NotAllEqual).unwrap(),
                    "trial {trial}: rounded solution is not NAE"
                );
            }
        }
    }
}
