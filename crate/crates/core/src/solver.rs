//! Complete backtracking search for homomorphisms Instance -> Structure,
//! with generalized arc consistency as the propagation step.
//!
//! Propagation filters each constraint's relation against the current
//! variable domains and re-runs to a fixpoint after every decision.
//! Variable order is minimum-remaining-values with ties broken by
//! index; value order is domain order. The search is deterministic:
//! identical inputs and config yield identical outputs.

use crate::structure::{Assignment, Instance, RelationalStructure};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableOrdering {
    /// Minimum remaining values, ties by variable index.
    MinRemainingValues,
    /// Declaration order.
    InputOrder,
}

/// Search limits and heuristics. Limits are positive.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub variable_ordering: VariableOrdering,
    pub node_limit: u64,
    pub solution_limit: usize,
    /// Reserved for randomized heuristics; the default orderings ignore it.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variable_ordering: VariableOrdering::MinRemainingValues,
            node_limit: 1_000_000_000,
            solution_limit: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Assignment),
    /// Search space exhausted: no homomorphism exists.
    NoSolution,
}

/// Result of an enumeration run. `complete` is false when the solution
/// limit cut the enumeration short.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub assignments: Vec<Assignment>,
    pub complete: bool,
    pub nodes: u64,
}

/// Variable domains as bitsets over the template's domain.
#[derive(Clone)]
struct Domains {
    words_per_var: usize,
    bits: Vec<u64>,
    counts: Vec<u32>,
}

impl Domains {
    fn full(vars: usize, domain_size: usize) -> Self {
        let words_per_var = (domain_size + 63) / 64;
        let mut bits = vec![0u64; vars * words_per_var];
        for v in 0..vars {
            for x in 0..domain_size {
                bits[v * words_per_var + x / 64] |= 1 << (x % 64);
            }
        }
        Domains { words_per_var, bits, counts: vec![domain_size as u32; vars] }
    }

    fn contains(&self, var: usize, value: usize) -> bool {
        self.bits[var * self.words_per_var + value / 64] & (1 << (value % 64)) != 0
    }

    fn remove(&mut self, var: usize, value: usize) {
        let w = var * self.words_per_var + value / 64;
        let mask = 1 << (value % 64);
        if self.bits[w] & mask != 0 {
            self.bits[w] &= !mask;
            self.counts[var] -= 1;
        }
    }

    fn assign(&mut self, var: usize, value: usize) {
        let base = var * self.words_per_var;
        for w in 0..self.words_per_var {
            self.bits[base + w] = 0;
        }
        self.bits[base + value / 64] = 1 << (value % 64);
        self.counts[var] = 1;
    }

    fn count(&self, var: usize) -> u32 {
        self.counts[var]
    }

    fn first(&self, var: usize) -> usize {
        let base = var * self.words_per_var;
        for w in 0..self.words_per_var {
            if self.bits[base + w] != 0 {
                return w * 64 + self.bits[base + w].trailing_zeros() as usize;
            }
        }
        unreachable!("empty domain queried");
    }

    fn iter(&self, var: usize, domain_size: usize) -> impl Iterator<Item = usize> + '_ {
        let base = var * self.words_per_var;
        (0..domain_size).filter(move |&x| self.bits[base + x / 64] & (1 << (x % 64)) != 0)
    }
}

struct Search<'a> {
    instance: &'a Instance,
    template: &'a RelationalStructure,
    cfg: SolverConfig,
    /// constraints watching each variable, for propagation scheduling
    watchers: Vec<Vec<usize>>,
    nodes: u64,
    solutions: Vec<Assignment>,
}

enum Walk {
    Continue,
    SolutionLimit,
    NodeLimit,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, template: &'a RelationalStructure, cfg: SolverConfig) -> Self {
        let mut watchers = vec![Vec::new(); instance.num_vars()];
        for (ci, c) in instance.constraints().iter().enumerate() {
            for &v in &c.vars {
                if !watchers[v].contains(&ci) {
                    watchers[v].push(ci);
                }
            }
        }
        Search { instance, template, cfg, watchers, nodes: 0, solutions: Vec::new() }
    }

    /// Filters one constraint to arc consistency. Returns the variables
    /// whose domain shrank, or None on wipeout.
    fn revise(&self, ci: usize, domains: &mut Domains) -> Option<Vec<usize>> {
        let c = &self.instance.constraints()[ci];
        let relation = self.template.relation(c.relation);
        let k = c.vars.len();
        let d = self.template.domain_size();

        // supported[j] = values occurring at position j in some tuple
        // that is consistent with current domains and with repeated
        // variables taking equal values.
        let mut supported = vec![vec![false; d]; k];
        'tuples: for t in relation.tuples() {
            for j in 0..k {
                if !domains.contains(c.vars[j], t[j]) {
                    continue 'tuples;
                }
                for j2 in 0..j {
                    if c.vars[j2] == c.vars[j] && t[j2] != t[j] {
                        continue 'tuples;
                    }
                }
            }
            for j in 0..k {
                supported[j][t[j]] = true;
            }
        }

        let mut changed = Vec::new();
        for j in 0..k {
            let var = c.vars[j];
            let before = domains.count(var);
            for x in 0..d {
                if !supported[j][x] && domains.contains(var, x) {
                    domains.remove(var, x);
                }
            }
            if domains.count(var) == 0 {
                return None;
            }
            if domains.count(var) != before && !changed.contains(&var) {
                changed.push(var);
            }
        }
        Some(changed)
    }

    /// Generalized arc consistency to fixpoint. False means wipeout.
    fn propagate(&self, domains: &mut Domains, mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; self.instance.constraints().len()];
        for &ci in &queue {
            queued[ci] = true;
        }
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            match self.revise(ci, domains) {
                None => return false,
                Some(changed) => {
                    for var in changed {
                        for &w in &self.watchers[var] {
                            if !queued[w] {
                                queued[w] = true;
                                queue.push(w);
                            }
                        }
                    }
                }
            }
        }
        true
    }

    fn pick_variable(&self, domains: &Domains) -> Option<usize> {
        match self.cfg.variable_ordering {
            VariableOrdering::MinRemainingValues => (0..self.instance.num_vars())
                .filter(|&v| domains.count(v) > 1)
                .min_by_key(|&v| (domains.count(v), v)),
            VariableOrdering::InputOrder => {
                (0..self.instance.num_vars()).find(|&v| domains.count(v) > 1)
            }
        }
    }

    fn walk(&mut self, domains: &Domains) -> Walk {
        let var = match self.pick_variable(domains) {
            None => {
                let values = (0..self.instance.num_vars()).map(|v| domains.first(v)).collect();
                self.solutions.push(Assignment::new(values));
                if self.solutions.len() >= self.cfg.solution_limit {
                    return Walk::SolutionLimit;
                }
                return Walk::Continue;
            }
            Some(v) => v,
        };
        let candidates: Vec<usize> =
            domains.iter(var, self.template.domain_size()).collect();
        for value in candidates {
            self.nodes += 1;
            if self.nodes > self.cfg.node_limit {
                return Walk::NodeLimit;
            }
            let mut child = domains.clone();
            child.assign(var, value);
            if self.propagate(&mut child, self.watchers[var].clone()) {
                match self.walk(&child) {
                    Walk::Continue => {}
                    stop => return stop,
                }
            }
        }
        Walk::Continue
    }

    fn run(mut self) -> Result<Enumeration, Error> {
        if self.instance.num_vars() == 0 {
            // the empty assignment is the unique homomorphism
            return Ok(Enumeration {
                assignments: vec![Assignment::new(Vec::new())],
                complete: true,
                nodes: 0,
            });
        }
        let mut domains = Domains::full(self.instance.num_vars(), self.template.domain_size());
        let all: Vec<usize> = (0..self.instance.constraints().len()).collect();
        if !self.propagate(&mut domains, all) {
            return Ok(Enumeration { assignments: Vec::new(), complete: true, nodes: 0 });
        }
        match self.walk(&domains) {
            Walk::NodeLimit => Err(Error::NodeLimitExceeded { nodes: self.nodes }),
            Walk::SolutionLimit => Ok(Enumeration {
                assignments: self.solutions,
                complete: false,
                nodes: self.nodes,
            }),
            Walk::Continue => Ok(Enumeration {
                assignments: self.solutions,
                complete: true,
                nodes: self.nodes,
            }),
        }
    }
}

fn check_compatible(x: &Instance, a: &RelationalStructure) -> Result<(), Error> {
    if x.signature() != a.signature() {
        return Err(Error::SignatureMismatch(format!(
            "instance {} does not match the signature of {}",
            x.name(),
            a.name()
        )));
    }
    Ok(())
}

/// Decides whether `x` has a homomorphism to `a`; on success the
/// returned assignment satisfies every constraint. `NoSolution` is a
/// completeness certificate. A node-limit hit is an error, not a "no".
pub fn find_homomorphism(
    x: &Instance,
    a: &RelationalStructure,
    cfg: &SolverConfig,
) -> Result<SearchOutcome, Error> {
    check_compatible(x, a)?;
    let mut cfg = *cfg;
    cfg.solution_limit = 1;
    let e = Search::new(x, a, cfg).run()?;
    Ok(match e.assignments.into_iter().next() {
        Some(assignment) => SearchOutcome::Found(assignment),
        None => SearchOutcome::NoSolution,
    })
}

/// Enumerates homomorphisms `x -> a` in deterministic order, up to the
/// configured solution limit.
pub fn enumerate_homomorphisms(
    x: &Instance,
    a: &RelationalStructure,
    cfg: &SolverConfig,
) -> Result<Enumeration, Error> {
    check_compatible(x, a)?;
    Search::new(x, a, *cfg).run()
}

/// Searches for a homomorphism between two structures by treating the
/// source as an instance.
pub fn find_structure_homomorphism(
    a: &RelationalStructure,
    b: &RelationalStructure,
    cfg: &SolverConfig,
) -> Result<SearchOutcome, Error> {
    if !a.is_similar_to(b) {
        return Err(Error::SignatureMismatch(format!(
            "{} and {} are not similar",
            a.name(),
            b.name()
        )));
    }
    find_homomorphism(&Instance::from_structure(a), b, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{
        builtin_template, is_homomorphism, Constraint, Instance, RelationalStructure, Signature,
    };

    fn one_triple(template: &str) -> (Instance, RelationalStructure) {
        let a = builtin_template(template).unwrap();
        let x = Instance::new(
            "x",
            a.signature().clone(),
            vec!["x".into(), "y".into(), "z".into()],
            vec![Constraint { relation: 0, vars: vec![0, 1, 2] }],
        )
        .unwrap();
        (x, a)
    }

    #[test]
    fn finds_one_in_three_assignment() {
        let (x, a) = one_triple("one-in-three");
        match find_homomorphism(&x, &a, &SolverConfig::default()).unwrap() {
            SearchOutcome::Found(h) => {
                assert_eq!(h.values().iter().sum::<usize>(), 1);
                assert!(is_homomorphism(&h, &x.to_structure(), &a).unwrap());
            }
            other => panic!("expected a solution, got {other:?}"),
        }
    }

    #[test]
    fn constant_triple_has_no_solution() {
        let a = builtin_template("one-in-three").unwrap();
        let x = Instance::new(
            "x",
            a.signature().clone(),
            vec!["x".into()],
            vec![Constraint { relation: 0, vars: vec![0, 0, 0] }],
        )
        .unwrap();
        assert_eq!(
            find_homomorphism(&x, &a, &SolverConfig::default()).unwrap(),
            SearchOutcome::NoSolution
        );
    }

    #[test]
    fn triangle_three_coloring() {
        let neq = RelationalStructure::new(
            "k3",
            3,
            vec![(
                "E".into(),
                2,
                (0..3)
                    .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| vec![i, j]))
                    .collect(),
            )],
        );
        let x = Instance::new(
            "triangle",
            neq.signature().clone(),
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Constraint { relation: 0, vars: vec![0, 1] },
                Constraint { relation: 0, vars: vec![1, 2] },
                Constraint { relation: 0, vars: vec![2, 0] },
            ],
        )
        .unwrap();
        match find_homomorphism(&x, &neq, &SolverConfig::default()).unwrap() {
            SearchOutcome::Found(h) => {
                assert_ne!(h.get(0), h.get(1));
                assert_ne!(h.get(1), h.get(2));
                assert_ne!(h.get(2), h.get(0));
            }
            other => panic!("expected a coloring, got {other:?}"),
        }
    }

    #[test]
    fn enumeration_counts() {
        let (x, a) = one_triple("one-in-three");
        let e = enumerate_homomorphisms(&x, &a, &SolverConfig::default()).unwrap();
        assert!(e.complete);
        assert_eq!(e.assignments.len(), 3);

        let (x, b) = one_triple("nae");
        let e = enumerate_homomorphisms(&x, &b, &SolverConfig::default()).unwrap();
        assert_eq!(e.assignments.len(), 6);

        let a = builtin_template("one-in-three").unwrap();
        let free = Instance::new(
            "free",
            a.signature().clone(),
            vec!["x".into(), "y".into()],
            vec![],
        )
        .unwrap();
        let e = enumerate_homomorphisms(&free, &a, &SolverConfig::default()).unwrap();
        assert_eq!(e.assignments.len(), 4);
    }

    #[test]
    fn solution_limit_truncates() {
        let (x, b) = one_triple("nae");
        let cfg = SolverConfig { solution_limit: 2, ..SolverConfig::default() };
        let e = enumerate_homomorphisms(&x, &b, &cfg).unwrap();
        assert_eq!(e.assignments.len(), 2);
        assert!(!e.complete);
    }

    #[test]
    fn node_limit_is_an_error() {
        let (x, b) = one_triple("nae");
        let cfg = SolverConfig { node_limit: 1, ..SolverConfig::default() };
        assert!(matches!(
            enumerate_homomorphisms(&x, &b, &cfg),
            Err(Error::NodeLimitExceeded { .. })
        ));
    }

    #[test]
    fn signature_mismatch_is_reported() {
        let (x, _) = one_triple("one-in-three");
        let c = builtin_template("c2-plus-c3").unwrap();
        assert!(matches!(
            find_homomorphism(&x, &c, &SolverConfig::default()),
            Err(Error::SignatureMismatch(_))
        ));
    }

    /// Exhaustive-enumeration oracle: decision agrees on all instances
    /// with few variables over small domains.
    #[test]
    fn completeness_against_exhaustion() {
        let mut rng_state = 0xdecafu64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 33) as usize
        };
        let templates = [builtin_template("one-in-three").unwrap(), builtin_template("nae").unwrap()];
        for trial in 0..200 {
            let a = &templates[trial % 2];
            let nv = 2 + next() % 7; // up to 8 variables
            let nc = next() % 6;
            let constraints: Vec<Constraint> = (0..nc)
                .map(|_| Constraint {
                    relation: 0,
                    vars: (0..3).map(|_| next() % nv).collect(),
                })
                .collect();
            let x = Instance::new(
                "rand",
                a.signature().clone(),
                (0..nv).map(|i| format!("v{i}")).collect(),
                constraints,
            )
            .unwrap();

            let brute = (0..(1usize << nv)).any(|mask| {
                x.constraints().iter().all(|c| {
                    let t: Vec<usize> = c.vars.iter().map(|&v| (mask >> v) & 1).collect();
                    a.relation(c.relation).contains(&t)
                })
            });
            let solved = matches!(
                find_homomorphism(&x, a, &SolverConfig::default()).unwrap(),
                SearchOutcome::Found(_)
            );
            assert_eq!(brute, solved, "disagreement on trial {trial}");
        }
    }

    #[test]
    fn determinism() {
        let (x, b) = one_triple("nae");
        let cfg = SolverConfig::default();
        let e1 = enumerate_homomorphisms(&x, &b, &cfg).unwrap();
        let e2 = enumerate_homomorphisms(&x, &b, &cfg).unwrap();
        assert_eq!(e1.assignments, e2.assignments);
    }

    #[test]
    fn empty_relation_wipes_out() {
        let empty = RelationalStructure::new("empty", 2, vec![("R".into(), 3, vec![])]);
        let x = Instance::new(
            "x",
            Signature::new(vec![("R".into(), 3)]),
            vec!["x".into(), "y".into(), "z".into()],
            vec![Constraint { relation: 0, vars: vec![0, 1, 2] }],
        )
        .unwrap();
        assert_eq!(
            find_homomorphism(&x, &empty, &SolverConfig::default()).unwrap(),
            SearchOutcome::NoSolution
        );
    }
}
