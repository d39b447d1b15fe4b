//! Pretty-printer for shield documents. Printed output reparses to a
//! structurally identical AST.

use super::ast::*;

pub fn print_spec(spec: &ShieldSpec) -> String {
    let mut out = String::new();
    for (name, expr) in &spec.bindings {
        out.push_str(&format!("let {} = {};\n", name, print_setexpr(expr)));
    }
    out.push_str(&format!(
        "process {} = {};\n",
        spec.process_name,
        print_term(&spec.root)
    ));
    out
}

pub fn print_term(t: &ProcessTerm) -> String {
    match t {
        ProcessTerm::Idle => "idle".into(),
        ProcessTerm::Fail => "fail".into(),
        ProcessTerm::Var(v) => v.clone(),
        ProcessTerm::Mu(v, body) => format!("mu {} . {}", v, print_term(body)),
        ProcessTerm::Prefix(sh, cont) => {
            format!("{} . {}", print_prefix_set(sh), print_term(cont))
        }
        ProcessTerm::GuardedChoice(l, g, r) => format!(
            "({} ||[{}] {})",
            print_term(l),
            print_setexpr(g),
            print_term(r)
        ),
    }
}

/// Prefix shields with binary connectives need parentheses so the `.` binds
/// to the whole expression on reparse.
fn print_prefix_set(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::Union(..) | StateSetExpr::Intersection(..) | StateSetExpr::Difference(..) => {
            format!("({})", print_setexpr(e))
        }
        _ => print_setexpr(e),
    }
}

pub fn print_setexpr(e: &StateSetExpr) -> String {
    print_union(e)
}

fn print_union(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::Union(l, r) => format!("{} | {}", print_union(l), print_diff(r)),
        _ => print_diff(e),
    }
}

fn print_diff(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::Difference(l, r) => format!("{} \\ {}", print_diff(l), print_inter(r)),
        _ => print_inter(e),
    }
}

fn print_inter(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::Intersection(l, r) => format!("{} & {}", print_inter(l), print_atom(r)),
        _ => print_atom(e),
    }
}

fn print_atom(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::NamedRef(n) => n.clone(),
        StateSetExpr::Builtin(Builtin::All) => "ALL".into(),
        StateSetExpr::Builtin(Builtin::Safe) => "SAFE".into(),
        StateSetExpr::Builtin(Builtin::Obs(i, lit)) => format!("OBS({}, \"{}\")", i, lit),
        StateSetExpr::Literal(states) => {
            let body = states
                .iter()
                .map(|cells| {
                    let inner = cells
                        .iter()
                        .map(|(c, r)| format!("({},{})", c, r))
                        .collect::<Vec<_>>()
                        .join(",");
                    format!("({})", inner)
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!("{{ {} }}", body)
        }
        StateSetExpr::Complement(inner) => format!("!{}", print_atom_parens(inner)),
        _ => format!("({})", print_setexpr(e)),
    }
}

fn print_atom_parens(e: &StateSetExpr) -> String {
    match e {
        StateSetExpr::Union(..) | StateSetExpr::Intersection(..) | StateSetExpr::Difference(..) => {
            format!("({})", print_setexpr(e))
        }
        _ => print_atom(e),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_spec;
    use super::*;

    #[test]
    fn roundtrip_blind_document() {
        let doc = "let g = { ((1,2),(0,1)) };\nlet Sh1 = { ((1,1),(0,1)) };\nprocess P = (Sh1 . idle ||[g] fail);\n";
        let spec = parse_spec(doc).unwrap();
        let printed = print_spec(&spec);
        let reparsed = parse_spec(&printed).unwrap();
        assert_eq!(spec, reparsed);
    }

    #[test]
    fn roundtrip_operators() {
        let doc = "let a = !(ALL | SAFE) & ALL \\ SAFE;\nprocess P = (a | a) . idle;\n";
        let spec = parse_spec(doc).unwrap();
        let reparsed = parse_spec(&print_spec(&spec)).unwrap();
        assert_eq!(spec, reparsed);
    }
}
