//! Primitive positive formulas, pp-powers, homomorphic relaxations, and
//! instance-level gadget reductions.
//!
//! pp-formula text format (one clause per line or `;`-separated):
//!
//! ```text
//! free x y
//! exists z
//! atom R x y z
//! eq x y
//! ```

use crate::solver::{
    enumerate_homomorphisms, find_structure_homomorphism, SearchOutcome, SolverConfig,
};
use crate::structure::{
    is_homomorphism, tuple_rank, Assignment, Constraint, Instance, RelationalStructure, Signature,
};
use crate::{Error, Limits};

/// One atom of a pp-formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    /// `(v_1, ..., v_k) in R`, with variables by index into the
    /// formula's variable list.
    Relation { symbol: String, vars: Vec<usize> },
    /// `v = w`
    Equality(usize, usize),
}

/// An existentially quantified conjunction of relation and equality
/// atoms. Variables are indexed: free variables first (in order), then
/// existential ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpFormula {
    free_names: Vec<String>,
    existential_names: Vec<String>,
    atoms: Vec<Atom>,
}

impl PpFormula {
    pub fn new(
        free_names: Vec<String>,
        existential_names: Vec<String>,
        atoms: Vec<Atom>,
    ) -> Result<Self, Error> {
        if free_names.is_empty() {
            return Err(Error::Range("a pp-formula needs at least one free variable".into()));
        }
        let total = free_names.len() + existential_names.len();
        for atom in &atoms {
            let vars: Vec<usize> = match atom {
                Atom::Relation { vars, .. } => vars.clone(),
                Atom::Equality(a, b) => vec![*a, *b],
            };
            if let Some(&v) = vars.iter().find(|&&v| v >= total) {
                return Err(Error::UnknownName(format!("atom references variable index {v}")));
            }
        }
        Ok(PpFormula { free_names, existential_names, atoms })
    }

    pub fn free_count(&self) -> usize {
        self.free_names.len()
    }

    pub fn total_vars(&self) -> usize {
        self.free_names.len() + self.existential_names.len()
    }

    pub fn free_names(&self) -> &[String] {
        &self.free_names
    }

    pub fn existential_names(&self) -> &[String] {
        &self.existential_names
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn var_name(&self, i: usize) -> &str {
        if i < self.free_names.len() {
            &self.free_names[i]
        } else {
            &self.existential_names[i - self.free_names.len()]
        }
    }

    /// Parses the `free/exists/atom/eq` clause syntax; clauses are
    /// separated by newlines or semicolons, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut free = Vec::new();
        let mut exists = Vec::new();
        let mut raw_atoms: Vec<(usize, Vec<String>)> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = line.split('#').next().unwrap_or("");
            for clause in line.split(';') {
                let toks: Vec<&str> = clause.split_whitespace().collect();
                if toks.is_empty() {
                    continue;
                }
                match toks[0] {
                    "free" => free.extend(toks[1..].iter().map(|s| s.to_string())),
                    "exists" => exists.extend(toks[1..].iter().map(|s| s.to_string())),
                    "atom" => {
                        if toks.len() < 3 {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: "atom needs a relation and variables".into(),
                            });
                        }
                        raw_atoms.push((line_no, toks.iter().map(|s| s.to_string()).collect()));
                    }
                    "eq" => {
                        if toks.len() != 3 {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: "eq needs exactly two variables".into(),
                            });
                        }
                        raw_atoms.push((line_no, toks.iter().map(|s| s.to_string()).collect()));
                    }
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("unknown clause `{other}`"),
                        })
                    }
                }
            }
        }
        if free.is_empty() {
            return Err(Error::Parse { line: 1, msg: "no free variables declared".into() });
        }
        let lookup = |name: &str, line: usize| -> Result<usize, Error> {
            free.iter()
                .chain(exists.iter())
                .position(|n| n == name)
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("undeclared variable `{name}`"),
                })
        };
        let mut atoms = Vec::new();
        for (line, toks) in raw_atoms {
            if toks[0] == "atom" {
                let vars = toks[2..]
                    .iter()
                    .map(|t| lookup(t, line))
                    .collect::<Result<Vec<_>, _>>()?;
                atoms.push(Atom::Relation { symbol: toks[1].clone(), vars });
            } else {
                atoms.push(Atom::Equality(lookup(&toks[1], line)?, lookup(&toks[2], line)?));
            }
        }
        PpFormula::new(free, exists, atoms)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("free {}\n", self.free_names.join(" "));
        if !self.existential_names.is_empty() {
            out.push_str(&format!("exists {}\n", self.existential_names.join(" ")));
        }
        for atom in &self.atoms {
            match atom {
                Atom::Relation { symbol, vars } => {
                    let names: Vec<&str> = vars.iter().map(|&v| self.var_name(v)).collect();
                    out.push_str(&format!("atom {symbol} {}\n", names.join(" ")));
                }
                Atom::Equality(a, b) => {
                    out.push_str(&format!("eq {} {}\n", self.var_name(*a), self.var_name(*b)));
                }
            }
        }
        out
    }
}

/// Union-find over variable indices, used to eliminate equality atoms.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // keep the smaller index as representative, for determinism
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
    }
}

/// The formula's instance form: equality atoms eliminated by variable
/// identification, relation atoms as constraints over representatives.
fn formula_instance(
    phi: &PpFormula,
    sig: &Signature,
) -> Result<(Instance, Vec<usize>), Error> {
    let total = phi.total_vars();
    let mut uf = UnionFind::new(total);
    for atom in phi.atoms() {
        if let Atom::Equality(a, b) = atom {
            uf.union(*a, *b);
        }
    }
    // map representatives to fresh solver variables
    let mut solver_var = vec![usize::MAX; total];
    let mut names = Vec::new();
    for v in 0..total {
        let r = uf.find(v);
        if solver_var[r] == usize::MAX {
            solver_var[r] = names.len();
            names.push(phi.var_name(r).to_string());
        }
        solver_var[v] = solver_var[r];
    }
    let mut constraints = Vec::new();
    for atom in phi.atoms() {
        if let Atom::Relation { symbol, vars } = atom {
            let ri = sig.index_of(symbol).ok_or_else(|| {
                Error::SignatureMismatch(format!("formula uses unknown relation {symbol}"))
            })?;
            if vars.len() != sig.arity(ri) {
                return Err(Error::ArityMismatch(format!(
                    "atom on {symbol} has {} variables, arity is {}",
                    vars.len(),
                    sig.arity(ri)
                )));
            }
            constraints.push(Constraint {
                relation: ri,
                vars: vars.iter().map(|&v| solver_var[v]).collect(),
            });
        }
    }
    let instance = Instance::new("pp-formula", sig.clone(), names, constraints)?;
    let var_map = (0..total).map(|v| solver_var[v]).collect();
    Ok((instance, var_map))
}

/// The relation defined by `phi` over `a`: all free-variable tuples for
/// which some existential witness satisfies every atom.
pub fn evaluate_pp(
    phi: &PpFormula,
    a: &RelationalStructure,
    limits: &Limits,
) -> Result<Vec<Vec<usize>>, Error> {
    let (instance, var_map) = formula_instance(phi, a.signature())?;
    let cfg = SolverConfig {
        solution_limit: limits.max_tuples,
        ..SolverConfig::default()
    };
    let e = enumerate_homomorphisms(&instance, a, &cfg)?;
    if !e.complete {
        return Err(Error::ResourceLimit(format!(
            "pp-evaluation exceeded {} solutions",
            limits.max_tuples
        )));
    }
    let mut tuples: Vec<Vec<usize>> = e
        .assignments
        .iter()
        .map(|h| (0..phi.free_count()).map(|v| h.get(var_map[v])).collect())
        .collect();
    tuples.sort_unstable();
    tuples.dedup();
    Ok(tuples)
}

/// One output relation of a pp-power: `arity` is its arity over the
/// power domain; the formula has `arity * n` free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpPowerOutput {
    pub name: String,
    pub arity: usize,
    pub formula: PpFormula,
}

/// Defines an n-th pp-power: each output k-ary relation is given by a
/// kn-ary pp-formula over the base signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpPowerSpec {
    exponent: usize,
    outputs: Vec<PpPowerOutput>,
}

impl PpPowerSpec {
    pub fn new(exponent: usize, outputs: Vec<PpPowerOutput>) -> Result<Self, Error> {
        if exponent == 0 {
            return Err(Error::Range("pp-power exponent must be >= 1".into()));
        }
        for out in &outputs {
            let expected = out.arity * exponent;
            if out.formula.free_count() != expected {
                return Err(Error::ArityMismatch(format!(
                    "output {} has arity {} and exponent {exponent}, formula needs {expected} \
                     free variables but has {}",
                    out.name,
                    out.arity,
                    out.formula.free_count()
                )));
            }
        }
        Ok(PpPowerSpec { exponent, outputs })
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    pub fn outputs(&self) -> &[PpPowerOutput] {
        &self.outputs
    }

    /// The signature of the structures this spec produces.
    pub fn output_signature(&self) -> Signature {
        Signature::new(self.outputs.iter().map(|o| (o.name.clone(), o.arity)).collect())
    }
}

/// Applies the spec to one structure: the domain becomes the set of
/// n-tuples (encoded by lexicographic rank) and each output relation is
/// the formula's kn-ary relation regrouped into k-tuples of n-tuples.
fn pp_power_one(
    spec: &PpPowerSpec,
    base: &RelationalStructure,
    limits: &Limits,
) -> Result<RelationalStructure, Error> {
    let d = base.domain_size();
    let n = spec.exponent;
    let power_size = d.checked_pow(n as u32).filter(|&s| s <= limits.max_cells).ok_or_else(
        || Error::ResourceLimit(format!("power domain {d}^{n} exceeds cap")),
    )?;
    let mut rels = Vec::new();
    for out in &spec.outputs {
        let flat = evaluate_pp(&out.formula, base, limits)?;
        let tuples = flat
            .into_iter()
            .map(|t| {
                t.chunks(n).map(|chunk| tuple_rank(chunk, d)).collect::<Vec<usize>>()
            })
            .collect();
        rels.push((out.name.clone(), out.arity, tuples));
    }
    Ok(RelationalStructure::new(format!("{}^[{n}]", base.name()), power_size, rels))
}

/// The n-th pp-power of the template pair (A, B): the same formulas
/// are evaluated in A for A' and in B for B'.
pub fn pp_power(
    spec: &PpPowerSpec,
    a: &RelationalStructure,
    b: &RelationalStructure,
    limits: &Limits,
) -> Result<(RelationalStructure, RelationalStructure), Error> {
    if !a.is_similar_to(b) {
        return Err(Error::SignatureMismatch(format!(
            "{} and {} are not similar",
            a.name(),
            b.name()
        )));
    }
    Ok((pp_power_one(spec, a, limits)?, pp_power_one(spec, b, limits)?))
}

/// Witness that (A', B') is a homomorphic relaxation of (A, B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxationWitness {
    pub f: Assignment,
    pub g: Assignment,
}

/// Finds homomorphisms f: A' -> A and g: B -> B', or certifies that
/// none exist (the searches are exhaustive).
pub fn check_relaxation(
    a_prime: &RelationalStructure,
    b_prime: &RelationalStructure,
    a: &RelationalStructure,
    b: &RelationalStructure,
) -> Result<Option<RelaxationWitness>, Error> {
    let cfg = SolverConfig::default();
    let f = match find_structure_homomorphism(a_prime, a, &cfg)? {
        SearchOutcome::Found(f) => f,
        SearchOutcome::NoSolution => return Ok(None),
    };
    let g = match find_structure_homomorphism(b, b_prime, &cfg)? {
        SearchOutcome::Found(g) => g,
        SearchOutcome::NoSolution => return Ok(None),
    };
    debug_assert!(is_homomorphism(&f, a_prime, a)?);
    debug_assert!(is_homomorphism(&g, b, b_prime)?);
    Ok(Some(RelaxationWitness { f, g }))
}

/// The gadget reduction: each variable of `x` becomes n fresh
/// variables, each constraint is replaced by its formula's atoms with
/// per-occurrence fresh existential variables, and equality atoms are
/// eliminated by variable identification.
pub fn gadget_reduce(
    x: &Instance,
    spec: &PpPowerSpec,
    base_signature: &Signature,
) -> Result<Instance, Error> {
    let n = spec.exponent;
    let out_sig = spec.output_signature();
    if x.signature() != &out_sig {
        return Err(Error::SignatureMismatch(
            "instance signature does not match the spec outputs".into(),
        ));
    }

    // variable layout: n coordinates per original variable, then
    // existential blocks per constraint occurrence
    let mut names: Vec<String> = Vec::with_capacity(x.num_vars() * n);
    for v in 0..x.num_vars() {
        for i in 0..n {
            if n == 1 {
                names.push(x.var_names()[v].clone());
            } else {
                names.push(format!("{}.{i}", x.var_names()[v]));
            }
        }
    }
    let coord = |v: usize, i: usize| v * n + i;

    let mut constraints: Vec<Constraint> = Vec::new();
    let mut equalities: Vec<(usize, usize)> = Vec::new();
    for (ci, c) in x.constraints().iter().enumerate() {
        let out = &spec.outputs[c.relation];
        let phi = &out.formula;
        // map formula variables to gadget variables: free variable
        // j*n + l is coordinate l of the constraint's j-th argument;
        // existentials are fresh per constraint occurrence
        let mut map = Vec::with_capacity(phi.total_vars());
        for fv in 0..phi.free_count() {
            map.push(coord(c.vars[fv / n], fv % n));
        }
        for ename in phi.existential_names() {
            map.push(names.len());
            names.push(format!("{ename}~{}", ci + 1));
        }
        for atom in phi.atoms() {
            match atom {
                Atom::Relation { symbol, vars } => {
                    let ri = base_signature.index_of(symbol).ok_or_else(|| {
                        Error::SignatureMismatch(format!(
                            "formula uses unknown base relation {symbol}"
                        ))
                    })?;
                    constraints.push(Constraint {
                        relation: ri,
                        vars: vars.iter().map(|&v| map[v]).collect(),
                    });
                }
                Atom::Equality(a, b) => equalities.push((map[*a], map[*b])),
            }
        }
    }

    // eliminate equalities by identification
    let mut uf = UnionFind::new(names.len());
    for (a, b) in equalities {
        uf.union(a, b);
    }
    let mut final_index = vec![usize::MAX; names.len()];
    let mut final_names = Vec::new();
    for v in 0..names.len() {
        let r = uf.find(v);
        if final_index[r] == usize::MAX {
            final_index[r] = final_names.len();
            final_names.push(names[r].clone());
        }
        final_index[v] = final_index[r];
    }
    for c in &mut constraints {
        for v in &mut c.vars {
            *v = final_index[*v];
        }
    }
    Instance::new(
        format!("gadget({})", x.name()),
        base_signature.clone(),
        final_names,
        constraints,
    )
}

/// One step of a pp-construction chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PpStep {
    Power(PpPowerSpec),
    /// Homomorphic relaxation: the instance-level reduction is the
    /// identity.
    Relaxation,
}

/// An explicit pp-construction pipeline from a base template pair; the
/// chain reducer composes gadget reductions and identity steps. Each
/// step's signatures are the caller's responsibility; base signatures
/// per power step are supplied alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpChain {
    /// steps outward from the base template, each paired with the
    /// signature of the structures the step starts from
    pub steps: Vec<(PpStep, Signature)>,
}

impl PpChain {
    /// Reduces an instance over the chain's final signature back to the
    /// base signature by walking the steps in reverse.
    pub fn reduce_instance(&self, x: &Instance) -> Result<Instance, Error> {
        let mut current = x.clone();
        for (step, base_sig) in self.steps.iter().rev() {
            current = match step {
                PpStep::Power(spec) => gadget_reduce(&current, spec, base_sig)?,
                PpStep::Relaxation => current,
            };
        }
        Ok(current)
    }
}
