//! Line-oriented text formats for structures and instances. `#` starts
//! a comment anywhere; blank lines are ignored.
//!
//! Structure file:
//!
//! ```text
//! structure one-in-three
//! domain 2
//! relation R 3
//! 1 0 0
//! 0 1 0
//! 0 0 1
//! end
//! ```
//!
//! Instance file: `instance <name>`, optional `var <names...>` lines,
//! then either `constraint <rel> <vars...>` lines (a general instance)
//! or `triple <x> <y> <z>` lines (a triple instance). Variables are
//! declared by `var` lines or on first use.

use pcspwb_core::pcsp13::TripleInstance;
use pcspwb_core::structure::{
    validate_structure, Constraint, Instance, RelationalStructure, Signature,
};
use pcspwb_core::Error;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            None
        } else {
            Some((i + 1, toks))
        }
    })
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_structure_file(text: &str) -> Result<RelationalStructure, Error> {
    let mut name = None;
    let mut domain = None;
    let mut relations: Vec<(String, usize, Vec<Vec<usize>>)> = Vec::new();
    let mut ended = false;
    for (ln, toks) in content_lines(text) {
        if ended {
            return Err(perr(ln, "content after `end`"));
        }
        match toks[0] {
            "structure" => {
                if toks.len() != 2 {
                    return Err(perr(ln, "expected `structure <name>`"));
                }
                name = Some(toks[1].to_string());
            }
            "domain" => {
                let d: usize = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(ln, "expected `domain <size>`"))?;
                if d == 0 {
                    return Err(perr(ln, "domain must be nonempty"));
                }
                domain = Some(d);
            }
            "relation" => {
                if toks.len() != 3 {
                    return Err(perr(ln, "expected `relation <name> <arity>`"));
                }
                let arity: usize = toks[2]
                    .parse()
                    .map_err(|_| perr(ln, format!("bad arity `{}`", toks[2])))?;
                if arity == 0 {
                    return Err(perr(ln, "arity must be >= 1"));
                }
                relations.push((toks[1].to_string(), arity, Vec::new()));
            }
            "end" => ended = true,
            _ => {
                // a tuple line inside the current relation block
                let Some(current) = relations.last_mut() else {
                    return Err(perr(ln, format!("unexpected token `{}`", toks[0])));
                };
                let tuple: Vec<usize> = toks
                    .iter()
                    .map(|t| t.parse().map_err(|_| perr(ln, format!("bad element `{t}`"))))
                    .collect::<Result<_, _>>()?;
                if tuple.len() != current.1 {
                    return Err(perr(
                        ln,
                        format!("tuple has {} entries, arity is {}", tuple.len(), current.1),
                    ));
                }
                current.2.push(tuple);
            }
        }
    }
    let name = name.ok_or_else(|| perr(1, "missing `structure <name>` header"))?;
    let domain = domain.ok_or_else(|| perr(1, "missing `domain <size>` line"))?;
    let s = RelationalStructure::new(name, domain, relations);
    validate_structure(&s).map_err(Error::InvalidStructure)?;
    Ok(s)
}

pub fn print_structure(s: &RelationalStructure) -> String {
    let mut out = format!("structure {}\ndomain {}\n", s.name(), s.domain_size());
    for ri in 0..s.signature().len() {
        out.push_str(&format!(
            "relation {} {}\n",
            s.signature().name(ri),
            s.signature().arity(ri)
        ));
        for t in s.relation(ri).tuples() {
            let parts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

/// A parsed instance file: general constraints or the `triple`
/// shorthand.
#[derive(Debug, Clone)]
pub enum ParsedInstance {
    General(Instance),
    Triples(TripleInstance),
}

pub fn parse_instance_file(
    text: &str,
    signature: Option<&Signature>,
) -> Result<ParsedInstance, Error> {
    let mut name = String::from("instance");
    let mut var_names: Vec<String> = Vec::new();
    let mut triples: Vec<(usize, [usize; 3])> = Vec::new();
    let mut constraints: Vec<(usize, String, Vec<usize>)> = Vec::new();
    let mut ended = false;

    let mut var_index = |names: &mut Vec<String>, tok: &str| -> usize {
        match names.iter().position(|n| n == tok) {
            Some(i) => i,
            None => {
                names.push(tok.to_string());
                names.len() - 1
            }
        }
    };

    for (ln, toks) in content_lines(text) {
        if ended {
            return Err(perr(ln, "content after `end`"));
        }
        match toks[0] {
            "instance" => {
                if toks.len() != 2 {
                    return Err(perr(ln, "expected `instance <name>`"));
                }
                name = toks[1].to_string();
            }
            "var" => {
                for t in &toks[1..] {
                    var_index(&mut var_names, t);
                }
            }
            "triple" => {
                if toks.len() != 4 {
                    return Err(perr(ln, "expected `triple <x> <y> <z>`"));
                }
                let t = [
                    var_index(&mut var_names, toks[1]),
                    var_index(&mut var_names, toks[2]),
                    var_index(&mut var_names, toks[3]),
                ];
                triples.push((ln, t));
            }
            "constraint" => {
                if toks.len() < 3 {
                    return Err(perr(ln, "expected `constraint <relation> <vars...>`"));
                }
                let vars = toks[2..]
                    .iter()
                    .map(|t| var_index(&mut var_names, t))
                    .collect();
                constraints.push((ln, toks[1].to_string(), vars));
            }
            "end" => ended = true,
            other => return Err(perr(ln, format!("unexpected token `{other}`"))),
        }
    }

    match (triples.is_empty(), constraints.is_empty()) {
        (false, false) => Err(perr(
            triples[0].0,
            "an instance cannot mix `triple` and `constraint` lines",
        )),
        (false, true) => {
            let ts = triples.into_iter().map(|(_, t)| t).collect();
            Ok(ParsedInstance::Triples(TripleInstance::new(var_names, ts)?))
        }
        (true, _) => {
            let sig = signature.ok_or_else(|| {
                perr(1, "constraint instances need a template for their signature")
            })?;
            let cs = constraints
                .into_iter()
                .map(|(ln, rel, vars)| {
                    let ri = sig
                        .index_of(&rel)
                        .ok_or_else(|| perr(ln, format!("unknown relation `{rel}`")))?;
                    if vars.len() != sig.arity(ri) {
                        return Err(perr(
                            ln,
                            format!(
                                "constraint on {rel} has {} variables, arity is {}",
                                vars.len(),
                                sig.arity(ri)
                            ),
                        ));
                    }
                    Ok(Constraint { relation: ri, vars })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ParsedInstance::General(Instance::new(name, sig.clone(), var_names, cs)?))
        }
    }
}

pub fn print_instance(x: &Instance) -> String {
    let mut out = format!("instance {}\n", x.name());
    if x.num_vars() > 0 {
        out.push_str(&format!("var {}\n", x.var_names().join(" ")));
    }
    for c in x.constraints() {
        let vars: Vec<&str> = c.vars.iter().map(|&v| x.var_names()[v].as_str()).collect();
        out.push_str(&format!(
            "constraint {} {}\n",
            x.signature().name(c.relation),
            vars.join(" ")
        ));
    }
    out.push_str("end\n");
    out
}

pub fn print_triple_instance(x: &TripleInstance) -> String {
    let mut out = String::from("instance triples\n");
    if x.num_vars() > 0 {
        out.push_str(&format!("var {}\n", x.var_names().join(" ")));
    }
    for t in x.triples() {
        out.push_str(&format!(
            "triple {} {} {}\n",
            x.var_names()[t[0]],
            x.var_names()[t[1]],
            x.var_names()[t[2]]
        ));
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcspwb_core::structure::builtin_template;

    #[test]
    fn structure_roundtrip_matches_builtin() {
        let builtin = builtin_template("one-in-three").unwrap();
        let parsed = parse_structure_file(&print_structure(&builtin)).unwrap();
        assert_eq!(parsed, builtin);
    }

    #[test]
    fn structure_parse_errors() {
        assert!(matches!(parse_structure_file(""), Err(Error::Parse { .. })));
        let bad_arity = "structure s\ndomain 2\nrelation R 3\n1 0\nend\n";
        match parse_structure_file(bad_arity) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_elem = "structure s\ndomain 2\nrelation R 1\n5\nend\n";
        assert!(matches!(parse_structure_file(bad_elem), Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn triple_shorthand() {
        let parsed = parse_instance_file("triple x y z\n", None).unwrap();
        match parsed {
            ParsedInstance::Triples(t) => {
                assert_eq!(t.num_vars(), 3);
                assert_eq!(t.triples(), &[[0, 1, 2]]);
            }
            other => panic!("expected triples, got {other:?}"),
        }
    }

    #[test]
    fn constraint_instance_needs_signature() {
        let text = "instance i\nconstraint R x y z\n";
        assert!(parse_instance_file(text, None).is_err());
        let sig = builtin_template("one-in-three").unwrap().signature().clone();
        let parsed = parse_instance_file(text, Some(&sig)).unwrap();
        match parsed {
            ParsedInstance::General(x) => {
                assert_eq!(x.num_vars(), 3);
                assert_eq!(x.constraints().len(), 1);
            }
            other => panic!("expected general instance, got {other:?}"),
        }
        // unknown relation is a parse error at its line
        let bad = "instance i\nconstraint S x y\n";
        match parse_instance_file(bad, Some(&sig)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn instance_print_parse_roundtrip() {
        let sig = builtin_template("one-in-three").unwrap().signature().clone();
        let text = "instance demo\nvar a b c d\nconstraint R a b c\nconstraint R b c d\n";
        let ParsedInstance::General(x) = parse_instance_file(text, Some(&sig)).unwrap() else {
            panic!("expected general instance");
        };
        let printed = print_instance(&x);
        let ParsedInstance::General(y) = parse_instance_file(&printed, Some(&sig)).unwrap()
        else {
            panic!("expected general instance");
        };
        assert_eq!(x, y);
    }

    #[test]
    fn mixing_triple_and_constraint_rejected() {
        let sig = builtin_template("one-in-three").unwrap().signature().clone();
        let text = "triple x y z\nconstraint R x y z\n";
        assert!(parse_instance_file(text, Some(&sig)).is_err());
    }
}
