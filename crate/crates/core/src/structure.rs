//! Relational structures, signatures, instances, assignments, and
//! homomorphism checking.
//!
//! Domain elements are canonical integers `0..d-1`; external element
//! names are interned at parse time. Relations are stored as sorted,
//! deduplicated tuple sets; for small tuple spaces a bitset index is
//! kept as a membership cache.

use crate::error::{ValidationReport, Violation, ViolationKind};
use crate::{Error, Limits};

/// Relation names with their arities. Names are unique, arities >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    relations: Vec<(String, usize)>,
}

impl Signature {
    pub fn new(relations: Vec<(String, usize)>) -> Self {
        Signature { relations }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.relations[i].0
    }

    pub fn arity(&self, i: usize) -> usize {
        self.relations[i].1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|(n, _)| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(n, a)| (n.as_str(), *a))
    }
}

/// A finite relation: a sorted, deduplicated set of fixed-arity tuples.
///
/// When `domain_size^arity` is small a bitset index is kept so that
/// membership tests (which dominate polymorphism checking) are O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    arity: usize,
    tuples: Vec<Vec<usize>>,
    index: Option<TupleIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TupleIndex {
    domain_size: usize,
    bits: Vec<u64>,
}

const INDEX_CAP: usize = 1 << 22;

impl TupleIndex {
    fn build(domain_size: usize, arity: usize, tuples: &[Vec<usize>]) -> Option<Self> {
        let mut size = 1usize;
        for _ in 0..arity {
            size = size.checked_mul(domain_size)?;
            if size > INDEX_CAP {
                return None;
            }
        }
        let mut bits = vec![0u64; (size + 63) / 64];
        for t in tuples {
            let r = tuple_rank(t, domain_size);
            bits[r / 64] |= 1 << (r % 64);
        }
        Some(TupleIndex { domain_size, bits })
    }

    fn contains(&self, tuple: &[usize]) -> bool {
        let r = tuple_rank(tuple, self.domain_size);
        self.bits[r / 64] & (1 << (r % 64)) != 0
    }
}

/// Rank of a tuple in lexicographic order (first coordinate most
/// significant); inverse of [`tuple_of_rank`].
pub fn tuple_rank(tuple: &[usize], domain_size: usize) -> usize {
    let mut r = 0;
    for &x in tuple {
        r = r * domain_size + x;
    }
    r
}

pub fn tuple_of_rank(mut rank: usize, domain_size: usize, len: usize) -> Vec<usize> {
    let mut t = vec![0; len];
    for i in (0..len).rev() {
        t[i] = rank % domain_size;
        rank /= domain_size;
    }
    t
}

impl Relation {
    pub fn new(arity: usize, mut tuples: Vec<Vec<usize>>, domain_size: usize) -> Self {
        tuples.sort_unstable();
        tuples.dedup();
        let index = TupleIndex::build(domain_size, arity, &tuples);
        Relation { arity, tuples, index }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        if tuple.len() != self.arity {
            return false;
        }
        match &self.index {
            Some(idx) => idx.contains(tuple),
            None => self.tuples.binary_search_by(|t| t.as_slice().cmp(tuple)).is_ok(),
        }
    }
}

/// A finite relational structure: a domain `0..d-1` plus one relation
/// per signature symbol. Doubles as a (P)CSP template. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalStructure {
    name: String,
    signature: Signature,
    domain_size: usize,
    relations: Vec<Relation>,
}

impl RelationalStructure {
    /// Builds a structure without validating tuple contents; call
    /// [`validate_structure`] to check the invariants.
    pub fn new(
        name: impl Into<String>,
        domain_size: usize,
        relations: Vec<(String, usize, Vec<Vec<usize>>)>,
    ) -> Self {
        let signature = Signature::new(relations.iter().map(|(n, a, _)| (n.clone(), *a)).collect());
        let rels = relations
            .into_iter()
            .map(|(_, a, tuples)| Relation::new(a, tuples, domain_size))
            .collect();
        RelationalStructure { name: name.into(), signature, domain_size, relations: rels }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn relation(&self, i: usize) -> &Relation {
        &self.relations[i]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    /// Same signature, name for name and arity for arity.
    pub fn is_similar_to(&self, other: &RelationalStructure) -> bool {
        self.signature == other.signature
    }
}

/// A total map, either variables -> domain elements (instance solution)
/// or elements -> elements (homomorphism between structures).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    values: Vec<usize>,
}

impl Assignment {
    pub fn new(values: Vec<usize>) -> Self {
        Assignment { values }
    }

    /// The identity map on a domain of the given size.
    pub fn identity(domain_size: usize) -> Self {
        Assignment { values: (0..domain_size).collect() }
    }

    pub fn constant(len: usize, value: usize) -> Self {
        Assignment { values: vec![value; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.values[i]
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn apply(&self, tuple: &[usize]) -> Vec<usize> {
        tuple.iter().map(|&x| self.values[x]).collect()
    }
}

/// One constraint of an instance: a relation symbol applied to a
/// variable tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub relation: usize,
    pub vars: Vec<usize>,
}

/// An input to (P)CSP solving: a variable set plus constraints over a
/// signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    name: String,
    signature: Signature,
    var_names: Vec<String>,
    constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        signature: Signature,
        var_names: Vec<String>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, Error> {
        for (ci, c) in constraints.iter().enumerate() {
            if c.relation >= signature.len() {
                return Err(Error::UnknownName(format!(
                    "constraint {ci} references relation index {}",
                    c.relation
                )));
            }
            let arity = signature.arity(c.relation);
            if c.vars.len() != arity {
                return Err(Error::ArityMismatch(format!(
                    "constraint {ci} on {} has {} variables, arity is {arity}",
                    signature.name(c.relation),
                    c.vars.len()
                )));
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= var_names.len()) {
                return Err(Error::UnknownName(format!(
                    "constraint {ci} references undeclared variable index {v}"
                )));
            }
        }
        Ok(Instance { name: name.into(), signature, var_names, constraints })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
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

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// The structure whose domain is this instance's variable set and
    /// whose relations are the constraint tuples. An assignment solves
    /// the instance iff it is a homomorphism from this structure to the
    /// template.
    pub fn to_structure(&self) -> RelationalStructure {
        let rels = (0..self.signature.len())
            .map(|ri| {
                let tuples = self
                    .constraints
                    .iter()
                    .filter(|c| c.relation == ri)
                    .map(|c| c.vars.clone())
                    .collect();
                (self.signature.name(ri).to_string(), self.signature.arity(ri), tuples)
            })
            .collect();
        RelationalStructure::new(self.name.clone(), self.num_vars(), rels)
    }

    /// The instance whose variables are the elements of `a` and whose
    /// constraints are `a`'s relation tuples; homomorphisms of this
    /// instance into `b` are exactly the homomorphisms `a -> b`.
    pub fn from_structure(a: &RelationalStructure) -> Self {
        let var_names = (0..a.domain_size()).map(|e| format!("e{e}")).collect();
        let constraints = (0..a.signature().len())
            .flat_map(|ri| {
                a.relation(ri)
                    .tuples()
                    .iter()
                    .map(move |t| Constraint { relation: ri, vars: t.clone() })
            })
            .collect();
        Instance {
            name: a.name().to_string(),
            signature: a.signature().clone(),
            var_names,
            constraints,
        }
    }
}

/// Checks all type invariants of a structure, reporting every violation
/// with its location.
pub fn validate_structure(s: &RelationalStructure) -> Result<(), ValidationReport> {
    let mut report = ValidationReport::default();
    let mut seen = std::collections::HashSet::new();
    for (name, arity) in s.signature().iter() {
        if !seen.insert(name.to_string()) {
            report.violations.push(Violation {
                location: format!("signature/{name}"),
                kind: ViolationKind::DuplicateRelationName(name.to_string()),
            });
        }
        if arity == 0 {
            report.violations.push(Violation {
                location: format!("signature/{name}"),
                kind: ViolationKind::ZeroArity(name.to_string()),
            });
        }
    }
    for ri in 0..s.signature().len() {
        let name = s.signature().name(ri);
        let arity = s.signature().arity(ri);
        for (ti, t) in s.relation(ri).tuples().iter().enumerate() {
            if t.len() != arity {
                report.violations.push(Violation {
                    location: format!("{name}/tuple {ti}"),
                    kind: ViolationKind::ArityMismatch { expected: arity, found: t.len() },
                });
            }
            for &x in t {
                if x >= s.domain_size() {
                    report.violations.push(Violation {
                        location: format!("{name}/tuple {ti}"),
                        kind: ViolationKind::ElementOutOfDomain {
                            element: x,
                            domain_size: s.domain_size(),
                        },
                    });
                }
            }
        }
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(report)
    }
}

/// True iff `h` maps every relation tuple of `a` into the corresponding
/// relation of `b`.
pub fn is_homomorphism(
    h: &Assignment,
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
    if h.len() != a.domain_size() {
        return Err(Error::PartialAssignment(format!(
            "map has {} entries, domain of {} has {}",
            h.len(),
            a.name(),
            a.domain_size()
        )));
    }
    if let Some(&v) = h.values().iter().find(|&&v| v >= b.domain_size()) {
        return Err(Error::ElementOutOfDomain(format!(
            "map value {v} outside domain of {}",
            b.name()
        )));
    }
    for ri in 0..a.signature().len() {
        let rb = b.relation(ri);
        for t in a.relation(ri).tuples() {
            if !rb.contains(&h.apply(t)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The n-th categorical power of `a`: the domain is the set of
/// n-tuples, and a relation holds on n-tuples iff it holds
/// coordinatewise in `a`.
pub fn power_structure(
    a: &RelationalStructure,
    n: usize,
    limits: &Limits,
) -> Result<RelationalStructure, Error> {
    if n == 0 {
        return Err(Error::Range("power exponent must be >= 1".into()));
    }
    let d = a.domain_size();
    let power_size = checked_pow(d, n).filter(|&s| s <= limits.max_cells).ok_or_else(|| {
        Error::ResourceLimit(format!("domain size {d}^{n} exceeds cap {}", limits.max_cells))
    })?;

    let mut rels = Vec::with_capacity(a.signature().len());
    for ri in 0..a.signature().len() {
        let r = a.relation(ri);
        let k = r.arity();
        let count = checked_pow(r.len(), n).filter(|&c| c <= limits.max_tuples).ok_or_else(|| {
            Error::ResourceLimit(format!(
                "relation {} would have {}^{n} tuples, cap is {}",
                a.signature().name(ri),
                r.len(),
                limits.max_tuples
            ))
        })?;
        let mut tuples = Vec::with_capacity(count);
        if r.is_empty() {
            rels.push((a.signature().name(ri).to_string(), k, tuples));
            continue;
        }
        // Each choice of n tuples from r yields one power tuple whose j-th
        // coordinate is the n-tuple of j-th entries.
        let mut choice = vec![0usize; n];
        loop {
            let mut tuple = Vec::with_capacity(k);
            for j in 0..k {
                let coords: Vec<usize> = choice.iter().map(|&ci| r.tuples()[ci][j]).collect();
                tuple.push(tuple_rank(&coords, d));
            }
            tuples.push(tuple);
            // advance the choice odometer
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
        rels.push((a.signature().name(ri).to_string(), k, tuples));
    }
    Ok(RelationalStructure::new(format!("{}^{n}", a.name()), power_size, rels))
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

pub const TEMPLATE_NAMES: &[&str] = &["one-in-three", "nae", "c2-plus-c3"];

/// The built-in templates. Both Boolean templates use the relation name
/// `R` so that they are similar to each other.
pub fn builtin_template(name: &str) -> Result<RelationalStructure, Error> {
    match name {
        "one-in-three" => Ok(RelationalStructure::new(
            "one-in-three",
            2,
            vec![("R".into(), 3, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])],
        )),
        "nae" => {
            let tuples = (0..8)
                .map(|r| tuple_of_rank(r, 2, 3))
                .filter(|t| !(t.iter().all(|&x| x == 0) || t.iter().all(|&x| x == 1)))
                .collect();
            Ok(RelationalStructure::new("nae", 2, vec![("R".into(), 3, tuples)]))
        }
        // Disjoint union of a directed 2-cycle (0,1) and 3-cycle (2,3,4).
        "c2-plus-c3" => Ok(RelationalStructure::new(
            "c2-plus-c3",
            5,
            vec![(
                "E".into(),
                2,
                vec![vec![0, 1], vec![1, 0], vec![2, 3], vec![3, 4], vec![4, 2]],
            )],
        )),
        other => Err(Error::UnknownName(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_in_three() -> RelationalStructure {
        builtin_template("one-in-three").unwrap()
    }

    fn nae() -> RelationalStructure {
        builtin_template("nae").unwrap()
    }

    #[test]
    fn builtin_sizes() {
        assert_eq!(one_in_three().relation(0).len(), 3);
        assert_eq!(nae().relation(0).len(), 6);
        let c = builtin_template("c2-plus-c3").unwrap();
        assert_eq!(c.domain_size(), 5);
        assert_eq!(c.relation(0).len(), 5);
        assert!(matches!(builtin_template("no-such"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn validation_catches_bad_tuples() {
        assert!(validate_structure(&one_in_three()).is_ok());

        let bad_arity =
            RelationalStructure::new("bad", 2, vec![("R".into(), 3, vec![vec![0, 1]])]);
        let report = validate_structure(&bad_arity).unwrap_err();
        assert!(matches!(report.violations[0].kind, ViolationKind::ArityMismatch { .. }));

        let bad_elem =
            RelationalStructure::new("bad", 2, vec![("R".into(), 1, vec![vec![5]])]);
        let report = validate_structure(&bad_elem).unwrap_err();
        assert!(matches!(
            report.violations[0].kind,
            ViolationKind::ElementOutOfDomain { element: 5, .. }
        ));
    }

    #[test]
    fn homomorphism_basics() {
        let a = one_in_three();
        let id = Assignment::identity(2);
        assert!(is_homomorphism(&id, &a, &a).unwrap());
        // every 1-in-3 tuple is not-all-equal
        assert!(is_homomorphism(&id, &a, &nae()).unwrap());
        let const0 = Assignment::constant(2, 0);
        assert!(!is_homomorphism(&const0, &a, &a).unwrap());
    }

    #[test]
    fn homomorphism_composition_on_enumerated_maps() {
        // h2 . h1 is a homomorphism whenever h1: A->B and h2: B->C are.
        let a = one_in_three();
        let b = nae();
        for h1v in 0..4usize {
            for h2v in 0..4usize {
                let h1 = Assignment::new(vec![h1v & 1, h1v >> 1]);
                let h2 = Assignment::new(vec![h2v & 1, h2v >> 1]);
                if is_homomorphism(&h1, &a, &b).unwrap() && is_homomorphism(&h2, &b, &b).unwrap() {
                    let comp = Assignment::new(h1.values().iter().map(|&x| h2.get(x)).collect());
                    assert!(is_homomorphism(&comp, &a, &b).unwrap());
                }
            }
        }
    }

    #[test]
    fn power_structure_counts() {
        let limits = Limits::default();
        let a = one_in_three();
        let p1 = power_structure(&a, 1, &limits).unwrap();
        assert_eq!(p1.domain_size(), 2);
        assert_eq!(p1.relation(0).len(), 3);
        // power(A,1) is isomorphic to A via the identity on ranks
        assert!(is_homomorphism(&Assignment::identity(2), &p1, &a).unwrap());
        assert!(is_homomorphism(&Assignment::identity(2), &a, &p1).unwrap());

        let p2 = power_structure(&a, 2, &limits).unwrap();
        assert_eq!(p2.domain_size(), 4);
        assert_eq!(p2.relation(0).len(), 9);
        assert_eq!(power_structure(&nae(), 2, &limits).unwrap().relation(0).len(), 36);
    }

    #[test]
    fn power_structure_respects_caps() {
        let limits = Limits { max_cells: 10, max_tuples: 10 };
        assert!(matches!(
            power_structure(&nae(), 4, &limits),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn tuple_rank_roundtrip() {
        for rank in 0..27 {
            let t = tuple_of_rank(rank, 3, 3);
            assert_eq!(tuple_rank(&t, 3), rank);
        }
    }

    #[test]
    fn instance_structure_roundtrip() {
        let a = one_in_three();
        let x = Instance::from_structure(&a);
        assert_eq!(x.num_vars(), 2);
        assert_eq!(x.constraints().len(), 3);
        let back = x.to_structure();
        assert_eq!(back.relation(0).len(), 3);
    }
}
