//! Abstract syntax of shield documents.

/// Built-in state-set constructors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Builtin {
    All,
    Safe,
    /// `OBS(agent, "literal")` with a 1-based agent index.
    Obs(usize, String),
}

/// A state-set expression. Literals are opaque cell tuples validated at
/// evaluation time against a concrete environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateSetExpr {
    NamedRef(String),
    Literal(Vec<Vec<(i32, i32)>>),
    Builtin(Builtin),
    Union(Box<StateSetExpr>, Box<StateSetExpr>),
    Intersection(Box<StateSetExpr>, Box<StateSetExpr>),
    Difference(Box<StateSetExpr>, Box<StateSetExpr>),
    Complement(Box<StateSetExpr>),
}

/// A shield process term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProcessTerm {
    Idle,
    Fail,
    Mu(String, Box<ProcessTerm>),
    Var(String),
    Prefix(StateSetExpr, Box<ProcessTerm>),
    /// `(left ||[guard] right)`: behaves as `left` when the current state is
    /// in the guard, as `right` otherwise.
    GuardedChoice(Box<ProcessTerm>, StateSetExpr, Box<ProcessTerm>),
}

/// A parsed shield document: ordered `let` bindings plus the process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShieldSpec {
    pub bindings: Vec<(String, StateSetExpr)>,
    pub process_name: String,
    pub root: ProcessTerm,
}

impl ShieldSpec {
    pub fn binding(&self, name: &str) -> Option<&StateSetExpr> {
        self.bindings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }
}
