//! Recursive-descent parser for shield documents.
//!
//! Grammar (operator precedence `!` > `&` > `\` > `|`, prefix `.` right
//! associative):
//!
//! ```text
//! document := let* process
//! let      := "let" IDENT "=" setexpr ";"
//! process  := "process" IDENT "=" term ";"
//! term     := "idle" | "fail" | "mu" IDENT "." term | IDENT
//!           | setexpr "." term | "(" term "||[" setexpr "]" term ")"
//! setexpr  := "ALL" | "SAFE" | "OBS" "(" INT "," STRING ")"
//!           | "{" state-literal,* "}" | IDENT | "(" setexpr ")"
//!           | "!" setexpr | setexpr "&" setexpr | setexpr "\" setexpr
//!           | setexpr "|" setexpr
//! ```

use super::ast::*;
use crate::error::DslError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Eq,
    Dot,
    Bang,
    Amp,
    Backslash,
    Pipe,
    ParOpen, // "||["
    RBracket,
    Eof,
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

struct Lexer {
    toks: Vec<(Tok, Pos)>,
}

fn lex(text: &str) -> Result<Lexer, DslError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        match c {
            ' ' | '\t' | '\r' | '\n' => bump!(),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    bump!();
                }
            }
            '(' => {
                toks.push((Tok::LParen, pos));
                bump!();
            }
            ')' => {
                toks.push((Tok::RParen, pos));
                bump!();
            }
            '{' => {
                toks.push((Tok::LBrace, pos));
                bump!();
            }
            '}' => {
                toks.push((Tok::RBrace, pos));
                bump!();
            }
            ',' => {
                toks.push((Tok::Comma, pos));
                bump!();
            }
            ';' => {
                toks.push((Tok::Semi, pos));
                bump!();
            }
            '=' => {
                toks.push((Tok::Eq, pos));
                bump!();
            }
            '.' => {
                toks.push((Tok::Dot, pos));
                bump!();
            }
            '!' => {
                toks.push((Tok::Bang, pos));
                bump!();
            }
            '&' => {
                toks.push((Tok::Amp, pos));
                bump!();
            }
            '\\' => {
                toks.push((Tok::Backslash, pos));
                bump!();
            }
            ']' => {
                toks.push((Tok::RBracket, pos));
                bump!();
            }
            '|' => {
                if i + 2 < chars.len() && chars[i + 1] == '|' && chars[i + 2] == '[' {
                    toks.push((Tok::ParOpen, pos));
                    bump!();
                    bump!();
                    bump!();
                } else {
                    toks.push((Tok::Pipe, pos));
                    bump!();
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(DslError::Syntax {
                            line: pos.line,
                            col: pos.col,
                            expected: "closing '\"'".into(),
                        });
                    }
                    if chars[i] == '"' {
                        bump!();
                        break;
                    }
                    s.push(chars[i]);
                    bump!();
                }
                toks.push((Tok::Str(s), pos));
            }
            '-' | '0'..='9' => {
                let mut s = String::new();
                s.push(c);
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    bump!();
                }
                let v: i64 = s.parse().map_err(|_| DslError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    expected: "integer".into(),
                })?;
                toks.push((Tok::Int(v), pos));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    bump!();
                }
                toks.push((Tok::Ident(s), pos));
            }
            _ => {
                return Err(DslError::Syntax {
                    line,
                    col,
                    expected: format!("token, found '{c}'"),
                })
            }
        }
    }
    toks.push((Tok::Eof, Pos { line, col }));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, DslError> {
        let p = self.pos();
        Err(DslError::Syntax {
            line: p.line,
            col: p.col,
            expected: expected.to_string(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), DslError> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.err(what)
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.err(what),
        }
    }

    fn parse_document(&mut self) -> Result<ShieldSpec, DslError> {
        let mut bindings: Vec<(String, StateSetExpr)> = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(k) if k == "let" => {
                    self.next();
                    let name = self.ident("binding name")?;
                    if bindings.iter().any(|(n, _)| *n == name) {
                        return Err(DslError::DuplicateBinding(name));
                    }
                    self.expect(Tok::Eq, "'='")?;
                    let e = self.parse_setexpr()?;
                    self.expect(Tok::Semi, "';'")?;
                    bindings.push((name, e));
                }
                Tok::Ident(k) if k == "process" => break,
                _ => return self.err("'let' or 'process'"),
            }
        }
        self.next(); // "process"
        let process_name = self.ident("process name")?;
        self.expect(Tok::Eq, "'='")?;
        let root = self.parse_term()?;
        self.expect(Tok::Semi, "';'")?;
        self.expect(Tok::Eof, "end of document")?;
        Ok(ShieldSpec {
            bindings,
            process_name,
            root,
        })
    }

    fn parse_term(&mut self) -> Result<ProcessTerm, DslError> {
        match self.peek().clone() {
            Tok::Ident(k) if k == "idle" => {
                self.next();
                Ok(ProcessTerm::Idle)
            }
            Tok::Ident(k) if k == "fail" => {
                self.next();
                Ok(ProcessTerm::Fail)
            }
            Tok::Ident(k) if k == "mu" => {
                self.next();
                let var = self.ident("recursion variable")?;
                self.expect(Tok::Dot, "'.'")?;
                let body = self.parse_term()?;
                Ok(ProcessTerm::Mu(var, Box::new(body)))
            }
            Tok::LParen => {
                // Either a guarded choice or a parenthesised set expression
                // used as a prefix; try the choice first and backtrack.
                let save = self.at;
                self.next();
                if let Ok(left) = self.parse_term() {
                    if *self.peek() == Tok::ParOpen {
                        self.next();
                        let guard = self.parse_setexpr()?;
                        self.expect(Tok::RBracket, "']'")?;
                        let right = self.parse_term()?;
                        self.expect(Tok::RParen, "')'")?;
                        return Ok(ProcessTerm::GuardedChoice(
                            Box::new(left),
                            guard,
                            Box::new(right),
                        ));
                    }
                }
                self.at = save;
                self.parse_prefix_term()
            }
            _ => self.parse_prefix_term(),
        }
    }

    /// `setexpr "." term`, or a bare identifier read as a recursion variable.
    fn parse_prefix_term(&mut self) -> Result<ProcessTerm, DslError> {
        let expr = self.parse_setexpr()?;
        if *self.peek() == Tok::Dot {
            self.next();
            let cont = self.parse_term()?;
            Ok(ProcessTerm::Prefix(expr, Box::new(cont)))
        } else if let StateSetExpr::NamedRef(name) = expr {
            Ok(ProcessTerm::Var(name))
        } else {
            self.err("'.' after shield set")
        }
    }

    fn parse_setexpr(&mut self) -> Result<StateSetExpr, DslError> {
        self.parse_union()
    }

    fn parse_union(&mut self) -> Result<StateSetExpr, DslError> {
        let mut left = self.parse_difference()?;
        while *self.peek() == Tok::Pipe {
            self.next();
            let right = self.parse_difference()?;
            left = StateSetExpr::Union(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_difference(&mut self) -> Result<StateSetExpr, DslError> {
        let mut left = self.parse_intersection()?;
        while *self.peek() == Tok::Backslash {
            self.next();
            let right = self.parse_intersection()?;
            left = StateSetExpr::Difference(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_intersection(&mut self) -> Result<StateSetExpr, DslError> {
        let mut left = self.parse_atom()?;
        while *self.peek() == Tok::Amp {
            self.next();
            let right = self.parse_atom()?;
            left = StateSetExpr::Intersection(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_atom(&mut self) -> Result<StateSetExpr, DslError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.next();
                let e = self.parse_atom()?;
                Ok(StateSetExpr::Complement(Box::new(e)))
            }
            Tok::LParen => {
                self.next();
                let e = self.parse_setexpr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::LBrace => {
                self.next();
                let mut states = Vec::new();
                if *self.peek() != Tok::RBrace {
                    loop {
                        states.push(self.parse_state_literal()?);
                        if *self.peek() == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace, "'}'")?;
                Ok(StateSetExpr::Literal(states))
            }
            Tok::Ident(k) if k == "ALL" => {
                self.next();
                Ok(StateSetExpr::Builtin(Builtin::All))
            }
            Tok::Ident(k) if k == "SAFE" => {
                self.next();
                Ok(StateSetExpr::Builtin(Builtin::Safe))
            }
            Tok::Ident(k) if k == "OBS" => {
                self.next();
                self.expect(Tok::LParen, "'('")?;
                let agent = match self.peek().clone() {
                    Tok::Int(v) if v >= 1 => {
                        self.next();
                        v as usize
                    }
                    _ => return self.err("agent index (1-based)"),
                };
                self.expect(Tok::Comma, "','")?;
                let lit = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.next();
                        s
                    }
                    _ => return self.err("observation literal string"),
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(StateSetExpr::Builtin(Builtin::Obs(agent, lit)))
            }
            Tok::Ident(name) => {
                self.next();
                Ok(StateSetExpr::NamedRef(name))
            }
            _ => self.err("set expression"),
        }
    }

    /// `((c1,r1),(c2,r2),...)` — one cell pair per agent.
    fn parse_state_literal(&mut self) -> Result<Vec<(i32, i32)>, DslError> {
        self.expect(Tok::LParen, "'('")?;
        let mut cells = Vec::new();
        loop {
            self.expect(Tok::LParen, "'('")?;
            let c = self.int()?;
            self.expect(Tok::Comma, "','")?;
            let r = self.int()?;
            self.expect(Tok::RParen, "')'")?;
            cells.push((c, r));
            if *self.peek() == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(cells)
    }

    fn int(&mut self) -> Result<i32, DslError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(v as i32)
            }
            _ => self.err("integer"),
        }
    }
}

/// Parses a shield document.
pub fn parse_spec(text: &str) -> Result<ShieldSpec, DslError> {
    let lexer = lex(text)?;
    let mut p = Parser {
        toks: lexer.toks,
        at: 0,
    };
    p.parse_document()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_program() {
        let spec = parse_spec("process P = idle;").unwrap();
        assert!(spec.bindings.is_empty());
        assert_eq!(spec.root, ProcessTerm::Idle);
    }

    #[test]
    fn mu_safe_recursion() {
        let spec = parse_spec("process P = mu X . SAFE . X;").unwrap();
        assert_eq!(
            spec.root,
            ProcessTerm::Mu(
                "X".into(),
                Box::new(ProcessTerm::Prefix(
                    StateSetExpr::Builtin(Builtin::Safe),
                    Box::new(ProcessTerm::Var("X".into()))
                ))
            )
        );
    }

    #[test]
    fn blind_agents_document() {
        let doc = "\
let g   = { ((1,2),(0,1)) };\n\
let Sh1 = { ((1,1),(0,1)) };\n\
let Sh2 = { ((1,0),(1,1)) };\n\
let Sh3 = { ((1,0),(2,1)) };\n\
process P = (Sh1 . Sh2 . Sh3 . idle ||[g] fail);\n";
        let spec = parse_spec(doc).unwrap();
        assert_eq!(spec.bindings.len(), 4);
        match &spec.root {
            ProcessTerm::GuardedChoice(l, g, r) => {
                assert_eq!(**r, ProcessTerm::Fail);
                assert_eq!(*g, StateSetExpr::NamedRef("g".into()));
                match &**l {
                    ProcessTerm::Prefix(sh, cont) => {
                        assert_eq!(*sh, StateSetExpr::NamedRef("Sh1".into()));
                        match &**cont {
                            ProcessTerm::Prefix(sh2, cont2) => {
                                assert_eq!(*sh2, StateSetExpr::NamedRef("Sh2".into()));
                                match &**cont2 {
                                    ProcessTerm::Prefix(sh3, cont3) => {
                                        assert_eq!(*sh3, StateSetExpr::NamedRef("Sh3".into()));
                                        assert_eq!(**cont3, ProcessTerm::Idle);
                                    }
                                    _ => panic!("expected third prefix"),
                                }
                            }
                            _ => panic!("expected second prefix"),
                        }
                    }
                    _ => panic!("expected prefix chain"),
                }
            }
            _ => panic!("expected guarded choice"),
        }
    }

    #[test]
    fn duplicate_binding_rejected() {
        let doc = "let a = ALL; let a = SAFE; process P = idle;";
        match parse_spec(doc) {
            Err(DslError::DuplicateBinding(n)) => assert_eq!(n, "a"),
            other => panic!("expected DuplicateBinding, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_spec("process P = ;") {
            Err(DslError::Syntax { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col >= 13);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn obs_and_operators() {
        let doc = r#"let a = OBS(1, "a@0,-1") & !SAFE | ALL \ { ((0,0)) };
process P = a . idle;"#;
        let spec = parse_spec(doc).unwrap();
        // `!` > `&` > `\` > `|`: ((OBS & !SAFE) | (ALL \ {..}))
        match spec.binding("a").unwrap() {
            StateSetExpr::Union(l, r) => {
                assert!(matches!(**l, StateSetExpr::Intersection(_, _)));
                assert!(matches!(**r, StateSetExpr::Difference(_, _)));
            }
            other => panic!("unexpected parse: {other:?}"),
        }
    }

    #[test]
    fn parenthesised_set_as_prefix() {
        let doc = "let a = ALL; let b = SAFE; process P = (a | b) . idle;";
        let spec = parse_spec(doc).unwrap();
        assert!(matches!(spec.root, ProcessTerm::Prefix(StateSetExpr::Union(_, _), _)));
    }
}
