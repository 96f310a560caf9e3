//! Polymorphism checking and search for CSP templates and PCSP template
//! pairs: operation tables, cyclicity, the indicator construction (with
//! structural cyclic-symmetry reduction), sandwich composition, the
//! pseudo-Siggers condition, and a block-symmetry checker.

use crate::solver::{enumerate_homomorphisms, find_homomorphism, SearchOutcome, SolverConfig};
use crate::structure::{
    is_homomorphism, tuple_of_rank, tuple_rank, Assignment, Constraint, Instance,
    RelationalStructure,
};
use crate::{Error, Limits};

/// A finite n-ary operation stored as a value table of length
/// `domain_size^arity`, indexed by argument tuples in lexicographic
/// order (first argument most significant).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperationTable {
    arity: usize,
    domain_size: usize,
    values: Vec<usize>,
}

impl OperationTable {
    /// An operation whose values stay inside the argument domain.
    pub fn new(arity: usize, domain_size: usize, values: Vec<usize>) -> Result<Self, Error> {
        let t = Self::with_any_values(arity, domain_size, values)?;
        if let Some(&v) = t.values.iter().find(|&&v| v >= domain_size) {
            return Err(Error::ElementOutOfDomain(format!(
                "table value {v} outside domain 0..{domain_size}"
            )));
        }
        Ok(t)
    }

    /// An operation whose values may live in a different (caller-known)
    /// domain, as needed for PCSP polymorphisms A^n -> B.
    pub fn with_any_values(
        arity: usize,
        domain_size: usize,
        values: Vec<usize>,
    ) -> Result<Self, Error> {
        let expected = domain_size.checked_pow(arity as u32).ok_or_else(|| {
            Error::ResourceLimit(format!("table size {domain_size}^{arity} overflows"))
        })?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "table has {} entries, expected {domain_size}^{arity} = {expected}",
                values.len()
            )));
        }
        Ok(OperationTable { arity, domain_size, values })
    }

    pub fn from_fn(
        arity: usize,
        domain_size: usize,
        f: impl Fn(&[usize]) -> usize,
    ) -> Self {
        let size = domain_size.pow(arity as u32);
        let values = (0..size)
            .map(|r| f(&tuple_of_rank(r, domain_size, arity)))
            .collect();
        OperationTable { arity, domain_size, values }
    }

    /// The i-th n-ary projection.
    pub fn projection(arity: usize, domain_size: usize, i: usize) -> Self {
        Self::from_fn(arity, domain_size, |args| args[i])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn apply(&self, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.arity);
        self.values[tuple_rank(args, self.domain_size)]
    }

    /// Serialized as `op <arity> <domain-size>` followed by one line of
    /// values in lexicographic argument order.
    pub fn to_text(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        format!("op {} {}\n{}\n", self.arity, self.domain_size, vals.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "empty operation table".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "op" {
            return Err(Error::Parse {
                line: hline,
                msg: "expected header `op <arity> <domain-size>`".into(),
            });
        }
        let arity: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse { line: hline, msg: "bad arity".into() })?;
        let domain: usize = parts[2]
            .parse()
            .map_err(|_| Error::Parse { line: hline, msg: "bad domain size".into() })?;
        let mut values = Vec::new();
        let mut last_line = hline;
        for (ln, l) in lines {
            last_line = ln;
            for tok in l.split_whitespace() {
                values.push(tok.parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad value `{tok}`"),
                })?);
            }
        }
        Self::with_any_values(arity, domain, values)
            .map_err(|e| Error::Parse { line: last_line, msg: e.to_string() })
    }
}

/// Requested symmetry of a searched operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryConstraint {
    None,
    Cyclic,
}

/// True iff applying `s` coordinatewise to any n-tuple of tuples of any
/// relation of `c` lands back in that relation.
pub fn is_polymorphism(s: &OperationTable, c: &RelationalStructure) -> Result<bool, Error> {
    is_pcsp_polymorphism(s, c, c)
}

/// True iff `s` maps n-tuples of A-relation tuples into the
/// corresponding B-relation: a homomorphism from the n-th categorical
/// power of A to B.
pub fn is_pcsp_polymorphism(
    s: &OperationTable,
    a: &RelationalStructure,
    b: &RelationalStructure,
) -> Result<bool, Error> {
    if !a.is_similar_to(b) {
        return Err(Error::SignatureMismatch(format!(
            "{} and {} are not similar",
            a.name(),
            b.name()
        )));
    }
    if s.domain_size() != a.domain_size() {
        return Err(Error::DomainMismatch(format!(
            "operation domain {} does not match |{}| = {}",
            s.domain_size(),
            a.name(),
            a.domain_size()
        )));
    }
    if let Some(&v) = s.values().iter().find(|&&v| v >= b.domain_size()) {
        return Err(Error::DomainMismatch(format!(
            "table value {v} outside the domain of {}",
            b.name()
        )));
    }
    let n = s.arity();
    for ri in 0..a.signature().len() {
        let ra = a.relation(ri);
        let rb = b.relation(ri);
        let k = ra.arity();
        if ra.is_empty() {
            continue;
        }
        let mut choice = vec![0usize; n];
        loop {
            let mut image = Vec::with_capacity(k);
            for j in 0..k {
                let args: Vec<usize> =
                    choice.iter().map(|&ci| ra.tuples()[ci][j]).collect();
                image.push(s.apply(&args));
            }
            if !rb.contains(&image) {
                return Ok(false);
            }
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < ra.len() {
                    break;
                }
                choice[i] = 0;
            }
            if choice.iter().all(|&c| c == 0) {
                break;
            }
        }
    }
    Ok(true)
}

/// True iff the value is invariant under the cyclic shift of arguments.
pub fn is_cyclic(s: &OperationTable) -> Result<bool, Error> {
    if s.arity() < 2 {
        return Err(Error::ArityTooSmall(format!(
            "cyclicity needs arity >= 2, got {}",
            s.arity()
        )));
    }
    let d = s.domain_size();
    let n = s.arity();
    for rank in 0..s.values().len() {
        let t = tuple_of_rank(rank, d, n);
        let mut shifted = Vec::with_capacity(n);
        shifted.extend_from_slice(&t[1..]);
        shifted.push(t[0]);
        if s.values()[rank] != s.apply(&shifted) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The lexicographically smallest rotation of a tuple.
fn canonical_rotation(t: &[usize]) -> Vec<usize> {
    let n = t.len();
    let mut best = t.to_vec();
    let mut rot = t.to_vec();
    for _ in 1..n {
        rot.rotate_left(1);
        if rot < best {
            best = rot.clone();
        }
    }
    best
}

/// Indicator instance plus the map from argument-tuple ranks to
/// instance variables.
#[derive(Debug, Clone)]
pub struct Indicator {
    pub instance: Instance,
    /// variable index for each argument tuple rank (0..d^n)
    pub var_of_rank: Vec<usize>,
    pub arity: usize,
    pub domain_size: usize,
}

/// The indicator construction: an instance over A's signature whose
/// homomorphisms to B are exactly the arity-n (cyclic, if requested)
/// polymorphisms (A, B). With cyclic symmetry the variables are the
/// rotation orbits of argument tuples, represented by their
/// lexicographically minimal rotation.
pub fn indicator_instance(
    a: &RelationalStructure,
    n: usize,
    sym: SymmetryConstraint,
    limits: &Limits,
) -> Result<Indicator, Error> {
    if n == 0 {
        return Err(Error::ArityTooSmall("indicator arity must be >= 1".into()));
    }
    let d = a.domain_size();
    let size = d.checked_pow(n as u32).filter(|&s| s <= limits.max_cells).ok_or_else(|| {
        Error::ResourceLimit(format!("indicator needs {d}^{n} tuples, cap is {}", limits.max_cells))
    })?;

    // assign variables to tuples (or orbit representatives)
    let mut var_of_rank = vec![usize::MAX; size];
    let mut var_names = Vec::new();
    for rank in 0..size {
        let t = tuple_of_rank(rank, d, n);
        let rep = match sym {
            SymmetryConstraint::None => t.clone(),
            SymmetryConstraint::Cyclic => canonical_rotation(&t),
        };
        let rep_rank = tuple_rank(&rep, d);
        if rep_rank == rank {
            var_of_rank[rank] = var_names.len();
            var_names.push(tuple_var_name(&t, d));
        } else {
            // iterating in rank order, the representative was seen first
            var_of_rank[rank] = var_of_rank[rep_rank];
        }
    }

    let mut constraints = Vec::new();
    for ri in 0..a.signature().len() {
        let r = a.relation(ri);
        let k = r.arity();
        if r.is_empty() {
            continue;
        }
        let count = r.len().checked_pow(n as u32).filter(|&c| c <= limits.max_tuples);
        if count.is_none() {
            return Err(Error::ResourceLimit(format!(
                "indicator for {} needs {}^{n} constraints, cap is {}",
                a.signature().name(ri),
                r.len(),
                limits.max_tuples
            )));
        }
        let mut choice = vec![0usize; n];
        loop {
            let vars: Vec<usize> = (0..k)
                .map(|j| {
                    let args: Vec<usize> =
                        choice.iter().map(|&ci| r.tuples()[ci][j]).collect();
                    var_of_rank[tuple_rank(&args, d)]
                })
                .collect();
            constraints.push(Constraint { relation: ri, vars });
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < r.len() {
                    break;
                }
                choice[i] = 0;
            }
            if choice.iter().all(|&c| c == 0) {
                break;
            }
        }
    }

    let instance = Instance::new(
        format!("indicator({}, {n})", a.name()),
        a.signature().clone(),
        var_names,
        constraints,
    )?;
    Ok(Indicator { instance, var_of_rank, arity: n, domain_size: d })
}

fn tuple_var_name(t: &[usize], d: usize) -> String {
    if d <= 10 {
        let digits: String = t.iter().map(|x| x.to_string()).collect();
        format!("s{digits}")
    } else {
        let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
        format!("s{}", parts.join("-"))
    }
}

impl Indicator {
    /// Reads an operation table off a solution of the indicator CSP.
    pub fn table_from_solution(&self, h: &Assignment) -> OperationTable {
        let values = self.var_of_rank.iter().map(|&v| h.get(v)).collect();
        OperationTable { arity: self.arity, domain_size: self.domain_size, values }
    }
}

/// Searches for an arity-n (cyclic, if requested) polymorphism of the
/// pair (A, B); `None` certifies exhaustive absence.
pub fn find_polymorphism(
    a: &RelationalStructure,
    b: &RelationalStructure,
    n: usize,
    sym: SymmetryConstraint,
    limits: &Limits,
) -> Result<Option<OperationTable>, Error> {
    let ind = indicator_instance(a, n, sym, limits)?;
    match find_homomorphism(&ind.instance, b, &SolverConfig::default())? {
        SearchOutcome::Found(h) => Ok(Some(ind.table_from_solution(&h))),
        SearchOutcome::NoSolution => Ok(None),
    }
}

/// Enumerates polymorphisms (up to `limit` of them) in deterministic
/// order; used by differential tests and the sandwich property checks.
pub fn enumerate_polymorphisms(
    a: &RelationalStructure,
    b: &RelationalStructure,
    n: usize,
    sym: SymmetryConstraint,
    limits: &Limits,
    limit: usize,
) -> Result<Vec<OperationTable>, Error> {
    let ind = indicator_instance(a, n, sym, limits)?;
    let cfg = SolverConfig { solution_limit: limit, ..SolverConfig::default() };
    let e = enumerate_homomorphisms(&ind.instance, b, &cfg)?;
    Ok(e.assignments.iter().map(|h| ind.table_from_solution(h)).collect())
}

/// g . s . (f, ..., f): the operation (a_1, ..., a_n) |->
/// g(s(f(a_1), ..., f(a_n))). If f: A -> C and g: C -> B are
/// homomorphisms and s is a polymorphism of C, the result is a
/// polymorphism of (A, B).
pub fn compose_sandwich(
    f: &Assignment,
    s: &OperationTable,
    g: &Assignment,
    a: &RelationalStructure,
    c: &RelationalStructure,
    b: &RelationalStructure,
) -> Result<OperationTable, Error> {
    if !is_homomorphism(f, a, c)? {
        return Err(Error::NotAHomomorphism(format!("f: {} -> {}", a.name(), c.name())));
    }
    if !is_homomorphism(g, c, b)? {
        return Err(Error::NotAHomomorphism(format!("g: {} -> {}", c.name(), b.name())));
    }
    if s.domain_size() != c.domain_size() {
        return Err(Error::DomainMismatch(format!(
            "operation domain {} does not match |{}| = {}",
            s.domain_size(),
            c.name(),
            c.domain_size()
        )));
    }
    let table = OperationTable::from_fn(s.arity(), a.domain_size(), |args| {
        let inner: Vec<usize> = args.iter().map(|&x| f.get(x)).collect();
        g.get(s.apply(&inner))
    });
    Ok(table)
}

/// All unary polymorphisms of `c`, in lexicographic table order.
pub fn unary_polymorphisms(c: &RelationalStructure) -> Result<Vec<Assignment>, Error> {
    let d = c.domain_size();
    let total = d.checked_pow(d as u32).ok_or_else(|| {
        Error::ResourceLimit(format!("{d}^{d} unary maps is too many to enumerate"))
    })?;
    let mut out = Vec::new();
    for rank in 0..total {
        let values = tuple_of_rank(rank, d, d);
        let h = Assignment::new(values);
        if is_homomorphism(&h, c, c)? {
            out.push(h);
        }
    }
    Ok(out)
}

/// A pseudo-Siggers witness: a 6-ary polymorphism `s` and unary
/// polymorphisms `alpha`, `beta` with
/// `alpha(s(x,y,x,z,y,z)) = beta(s(y,x,z,x,z,y))` for all x, y, z.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoSiggersWitness {
    pub s: OperationTable,
    pub alpha: Assignment,
    pub beta: Assignment,
}

/// Searches for a pseudo-Siggers polymorphism of `c` by enumerating
/// pairs of unary polymorphisms and solving, for each pair, the 6-ary
/// indicator CSP extended with the linking constraints
/// `alpha(s(x,y,x,z,y,z)) = beta(s(y,x,z,x,z,y))`.
pub fn pseudo_siggers_search(
    c: &RelationalStructure,
    limits: &Limits,
) -> Result<Option<PseudoSiggersWitness>, Error> {
    let d = c.domain_size();
    let ind = indicator_instance(c, 6, SymmetryConstraint::None, limits)?;
    let unaries = unary_polymorphisms(c)?;

    for alpha in &unaries {
        for beta in &unaries {
            // extended template: c plus the binary relation
            // {(u, v) : alpha(u) = beta(v)}
            let link: Vec<Vec<usize>> = (0..d)
                .flat_map(|u| (0..d).filter(move |&v| alpha.get(u) == beta.get(v)).map(move |v| vec![u, v]))
                .collect();
            let mut rels: Vec<(String, usize, Vec<Vec<usize>>)> = (0..c.signature().len())
                .map(|ri| {
                    (
                        c.signature().name(ri).to_string(),
                        c.signature().arity(ri),
                        c.relation(ri).tuples().to_vec(),
                    )
                })
                .collect();
            rels.push(("link".into(), 2, link));
            let extended = RelationalStructure::new(format!("{}+link", c.name()), d, rels);

            let link_idx = extended.signature().len() - 1;
            let mut constraints = ind.instance.constraints().to_vec();
            for x in 0..d {
                for y in 0..d {
                    for z in 0..d {
                        let u = ind.var_of_rank[tuple_rank(&[x, y, x, z, y, z], d)];
                        let v = ind.var_of_rank[tuple_rank(&[y, x, z, x, z, y], d)];
                        constraints.push(Constraint { relation: link_idx, vars: vec![u, v] });
                    }
                }
            }
            let extended_instance = Instance::new(
                format!("pseudo-siggers({})", c.name()),
                extended.signature().clone(),
                ind.instance.var_names().to_vec(),
                constraints,
            )?;

            if let SearchOutcome::Found(h) =
                find_homomorphism(&extended_instance, &extended, &SolverConfig::default())?
            {
                let s = ind.table_from_solution(&h);
                debug_assert!(is_polymorphism(&s, c)?);
                return Ok(Some(PseudoSiggersWitness {
                    s,
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                }));
            }
        }
    }
    Ok(None)
}

/// Checks the displayed pseudo-Siggers identity for a given witness.
pub fn pseudo_siggers_identity_holds(w: &PseudoSiggersWitness) -> bool {
    let d = w.s.domain_size();
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                let lhs = w.alpha.get(w.s.apply(&[x, y, x, z, y, z]));
                let rhs = w.beta.get(w.s.apply(&[y, x, z, x, z, y]));
                if lhs != rhs {
                    return false;
                }
            }
        }
    }
    true
}

/// True iff for every two-element subset {a, b} of the domain, the
/// value on tuples from {a, b}^n depends only on the number of
/// occurrences of a.
pub fn check_block_symmetric_on_pairs(s: &OperationTable) -> bool {
    let d = s.domain_size();
    let n = s.arity();
    for a in 0..d {
        for b in a + 1..d {
            // values grouped by the count of `a` in the tuple
            let mut value_for_count: Vec<Option<usize>> = vec![None; n + 1];
            for mask in 0..(1usize << n) {
                let tuple: Vec<usize> =
                    (0..n).map(|i| if mask >> i & 1 == 0 { a } else { b }).collect();
                let count_a = n - mask.count_ones() as usize;
                let v = s.apply(&tuple);
                match value_for_count[count_a] {
                    None => value_for_count[count_a] = Some(v),
                    Some(prev) if prev != v => return false,
                    Some(_) => {}
                }
            }
        }
    }
    true
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Runs `find_polymorphism` with cyclic symmetry over all primes up to
/// the cap, reporting whether one exists at each arity.
pub fn cyclic_survey(
    a: &RelationalStructure,
    b: &RelationalStructure,
    max_prime: usize,
    limits: &Limits,
) -> Result<Vec<(usize, Option<OperationTable>)>, Error> {
    (2..=max_prime)
        .filter(|&p| is_prime(p))
        .map(|p| Ok((p, find_polymorphism(a, b, p, SymmetryConstraint::Cyclic, limits)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::builtin_template;

    fn t13() -> RelationalStructure {
        builtin_template("one-in-three").unwrap()
    }

    fn nae() -> RelationalStructure {
        builtin_template("nae").unwrap()
    }

    fn binary(vals: [usize; 4]) -> OperationTable {
        OperationTable::new(2, 2, vals.to_vec()).unwrap()
    }

    #[test]
    fn projections_preserve_everything() {
        for tpl in [t13(), nae(), builtin_template("c2-plus-c3").unwrap()] {
            for n in 1..=3 {
                for i in 0..n {
                    let p = OperationTable::projection(n, tpl.domain_size(), i);
                    assert!(is_polymorphism(&p, &tpl).unwrap());
                }
            }
        }
    }

    #[test]
    fn binary_min_is_not_a_polymorphism() {
        let and = binary([0, 0, 0, 1]);
        assert!(!is_polymorphism(&and, &nae()).unwrap());
        assert!(!is_polymorphism(&and, &t13()).unwrap());
    }

    #[test]
    fn pcsp_polymorphism_examples() {
        let or = binary([0, 1, 1, 1]);
        let and = binary([0, 0, 0, 1]);
        assert!(is_pcsp_polymorphism(&or, &t13(), &nae()).unwrap());
        assert!(!is_pcsp_polymorphism(&and, &t13(), &nae()).unwrap());
        // arity 1 identity: the 1-in-3 relation is contained in NAE
        let id = OperationTable::new(1, 2, vec![0, 1]).unwrap();
        assert!(is_pcsp_polymorphism(&id, &t13(), &nae()).unwrap());
    }

    #[test]
    fn cyclicity_checks() {
        let parity3 = OperationTable::from_fn(3, 2, |a| a.iter().sum::<usize>() % 2);
        assert!(is_cyclic(&parity3).unwrap());
        let proj = OperationTable::projection(2, 2, 0);
        assert!(!is_cyclic(&proj).unwrap());
        let majority = OperationTable::from_fn(3, 2, |a| {
            usize::from(a.iter().sum::<usize>() >= 2)
        });
        assert!(is_cyclic(&majority).unwrap());
        let unary = OperationTable::new(1, 2, vec![0, 1]).unwrap();
        assert!(matches!(is_cyclic(&unary), Err(Error::ArityTooSmall(_))));
    }

    #[test]
    fn indicator_shapes() {
        let limits = Limits::default();
        let ind = indicator_instance(&t13(), 2, SymmetryConstraint::None, &limits).unwrap();
        assert_eq!(ind.instance.num_vars(), 4);
        assert_eq!(ind.instance.constraints().len(), 9);

        // orbit count of {0,1}^3 under rotation is 4: 000, 001, 011, 111
        let ind = indicator_instance(&t13(), 3, SymmetryConstraint::Cyclic, &limits).unwrap();
        assert_eq!(ind.instance.num_vars(), 4);
        assert_eq!(ind.instance.constraints().len(), 27);

        let ind = indicator_instance(&nae(), 2, SymmetryConstraint::None, &limits).unwrap();
        assert_eq!(ind.instance.num_vars(), 4);
        assert_eq!(ind.instance.constraints().len(), 36);
    }

    #[test]
    fn find_polymorphism_matches_examples() {
        let limits = Limits::default();
        // (1-in-3, NAE) has a binary polymorphism (e.g. OR)
        let found = find_polymorphism(&t13(), &nae(), 2, SymmetryConstraint::None, &limits)
            .unwrap()
            .expect("binary pcsp polymorphism exists");
        assert!(is_pcsp_polymorphism(&found, &t13(), &nae()).unwrap());

        // no ternary cyclic polymorphism of NAE (cross-checked below)
        assert!(find_polymorphism(&nae(), &nae(), 3, SymmetryConstraint::Cyclic, &limits)
            .unwrap()
            .is_none());
        // no binary cyclic polymorphism of 1-in-3
        assert!(find_polymorphism(&t13(), &t13(), 2, SymmetryConstraint::Cyclic, &limits)
            .unwrap()
            .is_none());
    }

    /// Exhaustive oracle: all 2^(2^n) tables at arity n on {0,1}.
    fn exhaustive_tables(n: usize) -> Vec<OperationTable> {
        let size = 1usize << n;
        (0..(1usize << size))
            .map(|mask| {
                OperationTable::new(n, 2, (0..size).map(|i| mask >> i & 1).collect()).unwrap()
            })
            .collect()
    }

    #[test]
    fn cyclic_absence_cross_checked_exhaustively() {
        for (tpl, n) in [(nae(), 3usize), (t13(), 2)] {
            let any_cyclic = exhaustive_tables(n).into_iter().any(|t| {
                is_cyclic(&t).unwrap() && is_polymorphism(&t, &tpl).unwrap()
            });
            assert!(!any_cyclic, "{} has a cyclic polymorphism at arity {n}", tpl.name());
        }
    }

    #[test]
    fn cyclic_orbit_reduction_preserves_solutions() {
        // tables found with cyclic symmetry = tables found plain,
        // filtered by is_cyclic (at n <= 3, d = 2)
        let limits = Limits::default();
        for n in 2..=3usize {
            for (a, b) in [(t13(), nae()), (nae(), nae()), (t13(), t13())] {
                let mut with_sym =
                    enumerate_polymorphisms(&a, &b, n, SymmetryConstraint::Cyclic, &limits, 10_000)
                        .unwrap();
                let mut filtered: Vec<OperationTable> =
                    enumerate_polymorphisms(&a, &b, n, SymmetryConstraint::None, &limits, 10_000)
                        .unwrap()
                        .into_iter()
                        .filter(|t| is_cyclic(t).unwrap())
                        .collect();
                with_sym.sort();
                filtered.sort();
                assert_eq!(with_sym, filtered, "mismatch for ({}, {}) at {n}", a.name(), b.name());
            }
        }
    }

    #[test]
    fn sandwich_composition() {
        let id = Assignment::identity(2);
        // f = g = id on C = 1-in-3: projection stays a projection
        let proj = OperationTable::projection(2, 2, 0);
        let out = compose_sandwich(&id, &proj, &id, &t13(), &t13(), &t13()).unwrap();
        assert_eq!(out, proj);

        // f: 1-in-3 -> NAE inclusion, any polymorphism s of NAE, g = id
        let limits = Limits::default();
        let polys =
            enumerate_polymorphisms(&nae(), &nae(), 2, SymmetryConstraint::None, &limits, 100)
                .unwrap();
        assert!(!polys.is_empty());
        for s in polys {
            let out = compose_sandwich(&id, &s, &id, &t13(), &nae(), &nae()).unwrap();
            assert!(is_pcsp_polymorphism(&out, &t13(), &nae()).unwrap());
        }

        // rejection: f must be a homomorphism
        let const1 = Assignment::constant(2, 1);
        assert!(matches!(
            compose_sandwich(&const1, &proj, &id, &t13(), &t13(), &t13()),
            Err(Error::NotAHomomorphism(_))
        ));
    }

    #[test]
    fn block_symmetry_on_pairs() {
        let parity4 = OperationTable::from_fn(4, 2, |a| a.iter().sum::<usize>() % 2);
        assert!(check_block_symmetric_on_pairs(&parity4));
        let proj = OperationTable::projection(2, 2, 0);
        assert!(!check_block_symmetric_on_pairs(&proj));
        let majority = OperationTable::from_fn(3, 2, |a| {
            usize::from(a.iter().sum::<usize>() >= 2)
        });
        assert!(check_block_symmetric_on_pairs(&majority));
    }

    #[test]
    fn unary_polymorphisms_of_one_in_three() {
        // only the identity preserves the 1-in-3 relation
        let unaries = unary_polymorphisms(&t13()).unwrap();
        assert_eq!(unaries, vec![Assignment::identity(2)]);
    }

    #[test]
    fn pseudo_siggers_on_full_relation() {
        let full = RelationalStructure::new(
            "full",
            2,
            vec![("R".into(), 3, (0..8).map(|r| tuple_of_rank(r, 2, 3)).collect())],
        );
        let w = pseudo_siggers_search(&full, &Limits::default())
            .unwrap()
            .expect("full relation admits every operation");
        assert!(pseudo_siggers_identity_holds(&w));
        assert!(is_polymorphism(&w.s, &full).unwrap());
    }

    #[test]
    fn table_text_roundtrip() {
        let or = binary([0, 1, 1, 1]);
        let text = or.to_text();
        assert_eq!(text, "op 2 2\n0 1 1 1\n");
        assert_eq!(OperationTable::from_text(&text).unwrap(), or);
        assert!(OperationTable::from_text("garbage").is_err());
        assert!(OperationTable::from_text("op 2 2\n0 1 1\n").is_err());
    }

    #[test]
    fn survey_runs_over_primes() {
        let limits = Limits::default();
        let results = cyclic_survey(&t13(), &nae(), 5, &limits).unwrap();
        let primes: Vec<usize> = results.iter().map(|(p, _)| *p).collect();
        assert_eq!(primes, vec![2, 3, 5]);
        // (1-in-3, NAE) has cyclic polymorphisms at 2 and 5 but not 3
        assert!(results[0].1.is_some());
        assert!(results[1].1.is_none());
        assert!(results[2].1.is_some());
    }
}
