//! Program trees for genetic programming.
//!
//! A [`ProgramTree`] is a binary expression over the four arithmetic
//! operators with variable and integer-constant leaves. Nodes are stored in
//! prefix order, so every subtree occupies a contiguous slice of the node
//! vector. That makes subtree extraction and replacement a splice, and lets
//! evaluation walk the slice with a single cursor.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Denominators smaller than this in magnitude make division return 1.0.
pub const DIV_EPSILON: f64 = 1e-9;

/// Every intermediate value is clamped into `[-OVERFLOW_GUARD, OVERFLOW_GUARD]`.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        match s {
            "+" => Some(Op::Add),
            "-" => Some(Op::Sub),
            "*" => Some(Op::Mul),
            "/" => Some(Op::Div),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => protected_div(a, b),
        };
        v.clamp(-OVERFLOW_GUARD, OVERFLOW_GUARD)
    }
}

#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() < DIV_EPSILON {
        1.0
    } else {
        a / b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    /// 0-based position into the input vector.
    Variable(usize),
    Constant(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Op(Op),
    Leaf(Terminal),
}

impl Node {
    #[inline]
    fn arity(self) -> usize {
        match self {
            Node::Op(_) => 2,
            Node::Leaf(_) => 0,
        }
    }
}

/// The variables and constant range a tree may draw leaves from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalSet {
    variable_names: Vec<String>,
    const_min: i64,
    const_max: i64,
}

pub const DEFAULT_CONST_MIN: i64 = -10;
pub const DEFAULT_CONST_MAX: i64 = 10;

impl TerminalSet {
    pub fn new<S: Into<String>>(
        variable_names: impl IntoIterator<Item = S>,
        const_min: i64,
        const_max: i64,
    ) -> Result<Self> {
        let variable_names: Vec<String> = variable_names.into_iter().map(Into::into).collect();
        if const_min > const_max {
            return Err(Error::invalid(format!(
                "const_min {const_min} exceeds const_max {const_max}"
            )));
        }
        for (i, name) in variable_names.iter().enumerate() {
            if !is_valid_name(name) {
                return Err(Error::invalid(format!("invalid variable name {name:?}")));
            }
            if variable_names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate variable name {name:?}")));
            }
        }
        Ok(TerminalSet {
            variable_names,
            const_min,
            const_max,
        })
    }

    /// Terminal set with the default constant range.
    pub fn with_variables<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(names, DEFAULT_CONST_MIN, DEFAULT_CONST_MAX)
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn arity(&self) -> usize {
        self.variable_names.len()
    }

    pub fn const_min(&self) -> i64 {
        self.const_min
    }

    pub fn const_max(&self) -> i64 {
        self.const_max
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|n| n == name)
    }

    /// Same variables, different constant range.
    pub fn with_const_range(&self, const_min: i64, const_max: i64) -> Result<Self> {
        Self::new(self.variable_names.clone(), const_min, const_max)
    }

    /// Draws a leaf uniformly over the variables plus one ephemeral constant.
    fn random_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Terminal {
        let choice = rng.gen_range(0..=self.variable_names.len());
        if choice < self.variable_names.len() {
            Terminal::Variable(choice)
        } else {
            Terminal::Constant(rng.gen_range(self.const_min..=self.const_max))
        }
    }
}

fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && Op::from_symbol(name).is_none()
        && name.parse::<i64>().is_err()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || c == '(' || c == ')' || c == ',')
}

/// Values for the variables of a [`TerminalSet`], in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct InputBinding(Vec<f64>);

impl InputBinding {
    pub fn new(values: Vec<f64>) -> Self {
        InputBinding(values)
    }

    /// Checks the arity against a terminal set.
    pub fn for_terminals(values: Vec<f64>, terminals: &TerminalSet) -> Result<Self> {
        if values.len() != terminals.arity() {
            return Err(Error::invalid(format!(
                "binding has {} values, terminal set has {} variables",
                values.len(),
                terminals.arity()
            )));
        }
        Ok(InputBinding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for InputBinding {
    fn from(values: Vec<f64>) -> Self {
        InputBinding(values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Grow,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeMetrics {
    pub depth: usize,
    pub node_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A node position, as its index in prefix order. Index 0 is the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeLocator(usize);

impl NodeLocator {
    pub const ROOT: NodeLocator = NodeLocator(0);

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProgramTree {
    nodes: Vec<Node>,
}

impl ProgramTree {
    /// Builds a tree from prefix-ordered nodes, checking that they form
    /// exactly one complete expression.
    pub fn from_prefix_nodes(nodes: Vec<Node>) -> Result<Self> {
        let mut open = 1usize;
        for (i, node) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::invalid(format!("trailing node at index {i}")));
            }
            open = open - 1 + node.arity();
        }
        if open != 0 || nodes.is_empty() {
            return Err(Error::invalid("incomplete prefix node sequence"));
        }
        Ok(ProgramTree { nodes })
    }

    pub fn leaf(terminal: Terminal) -> Self {
        ProgramTree {
            nodes: vec![Node::Leaf(terminal)],
        }
    }

    pub fn variable(index: usize) -> Self {
        Self::leaf(Terminal::Variable(index))
    }

    pub fn constant(value: i64) -> Self {
        Self::leaf(Terminal::Constant(value))
    }

    pub fn apply(op: Op, left: ProgramTree, right: ProgramTree) -> Self {
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(Node::Op(op));
        nodes.extend(left.nodes);
        nodes.extend(right.nodes);
        ProgramTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> Node {
        self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        let mut stack: Vec<usize> = Vec::with_capacity(32);
        for node in self.nodes.iter().rev() {
            match node {
                Node::Leaf(_) => stack.push(1),
                Node::Op(_) => {
                    let a = stack.pop().expect("well-formed tree");
                    let b = stack.pop().expect("well-formed tree");
                    stack.push(1 + a.max(b));
                }
            }
        }
        stack[0]
    }

    pub fn metrics(&self) -> TreeMetrics {
        TreeMetrics {
            depth: self.depth(),
            node_count: self.node_count(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_variable_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(Terminal::Variable(i)) => Some(*i),
                _ => None,
            })
            .max()
    }

    pub fn evaluate(&self, binding: &InputBinding) -> Result<f64> {
        self.evaluate_slice(binding.values())
    }

    /// Evaluates against raw input values.
    pub fn evaluate_slice(&self, inputs: &[f64]) -> Result<f64> {
        if let Some(index) = self.max_variable_index() {
            if index >= inputs.len() {
                return Err(Error::ArityMismatch {
                    index,
                    arity: inputs.len(),
                });
            }
        }
        Ok(self.evaluate_checked(inputs))
    }

    /// Evaluation without the arity check. Callers must have verified that
    /// every variable index is in range for `inputs`.
    #[inline]
    pub(crate) fn evaluate_checked(&self, inputs: &[f64]) -> f64 {
        let mut cursor = 0;
        eval_at(&self.nodes, &mut cursor, inputs)
    }

    /// End (exclusive) of the subtree rooted at `start`.
    fn subtree_end(&self, start: usize) -> usize {
        let mut open = 1usize;
        let mut i = start;
        while open > 0 {
            open = open - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    pub fn locator(&self, index: usize) -> Option<NodeLocator> {
        (index < self.nodes.len()).then_some(NodeLocator(index))
    }

    pub fn subtree(&self, at: NodeLocator) -> ProgramTree {
        let end = self.subtree_end(at.0);
        ProgramTree {
            nodes: self.nodes[at.0..end].to_vec(),
        }
    }

    /// Copy of `self` with the subtree at `at` replaced by `replacement`.
    pub fn replace_subtree(&self, at: NodeLocator, replacement: &ProgramTree) -> ProgramTree {
        let end = self.subtree_end(at.0);
        let mut nodes =
            Vec::with_capacity(self.nodes.len() - (end - at.0) + replacement.nodes.len());
        nodes.extend_from_slice(&self.nodes[..at.0]);
        nodes.extend_from_slice(&replacement.nodes);
        nodes.extend_from_slice(&self.nodes[end..]);
        ProgramTree { nodes }
    }

    /// Depth of the node at `at`, counting the root as depth 1.
    pub fn depth_of(&self, at: NodeLocator) -> usize {
        self.path(at).len() + 1
    }

    /// The root-to-node path for a locator.
    pub fn path(&self, at: NodeLocator) -> Vec<Side> {
        let mut path = Vec::new();
        let mut i = 0;
        while i != at.0 {
            // i is an operator whose subtree contains at.0
            let left = i + 1;
            let left_end = self.subtree_end(left);
            if at.0 < left_end {
                path.push(Side::Left);
                i = left;
            } else {
                path.push(Side::Right);
                i = left_end;
            }
        }
        path
    }

    /// Resolves a root-to-node path, or `None` if it leaves the tree.
    pub fn locate(&self, path: &[Side]) -> Option<NodeLocator> {
        let mut i = 0;
        for side in path {
            if !matches!(self.nodes[i], Node::Op(_)) {
                return None;
            }
            i = match side {
                Side::Left => i + 1,
                Side::Right => self.subtree_end(i + 1),
            };
        }
        Some(NodeLocator(i))
    }

    /// Canonical parenthesized prefix text, e.g. `(+ (* x angle) 2)`.
    pub fn to_prefix(&self, terminals: &TerminalSet) -> String {
        let mut out = String::new();
        let mut cursor = 0;
        write_prefix(&self.nodes, &mut cursor, terminals, &mut out);
        out
    }

    pub fn parse_prefix(text: &str, terminals: &TerminalSet) -> Result<Self> {
        Parser::new(text, terminals).parse()
    }

    pub fn display<'a>(&'a self, terminals: &'a TerminalSet) -> impl fmt::Display + 'a {
        PrefixDisplay {
            tree: self,
            terminals,
        }
    }

    pub fn random<R: Rng + ?Sized>(
        max_depth: usize,
        method: InitMethod,
        terminals: &TerminalSet,
        rng: &mut R,
    ) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        let mut nodes = Vec::new();
        grow_into(&mut nodes, max_depth, method, terminals, rng);
        Ok(ProgramTree { nodes })
    }

    /// Picks a node uniformly over all nodes.
    pub fn select_random_node<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeLocator {
        NodeLocator(rng.gen_range(0..self.nodes.len()))
    }
}

fn eval_at(nodes: &[Node], cursor: &mut usize, inputs: &[f64]) -> f64 {
    let node = nodes[*cursor];
    *cursor += 1;
    match node {
        Node::Leaf(Terminal::Variable(i)) => inputs[i],
        Node::Leaf(Terminal::Constant(c)) => c as f64,
        Node::Op(op) => {
            let a = eval_at(nodes, cursor, inputs);
            let b = eval_at(nodes, cursor, inputs);
            op.apply(a, b)
        }
    }
}

fn grow_into<R: Rng + ?Sized>(
    nodes: &mut Vec<Node>,
    depth_left: usize,
    method: InitMethod,
    terminals: &TerminalSet,
    rng: &mut R,
) {
    let leaf = match (depth_left, method) {
        (1, _) => true,
        (_, InitMethod::Full) => false,
        (_, InitMethod::Grow) => {
            // uniform over the function set and the terminal set
            let terminal_count = terminals.arity() + 1;
            rng.gen_range(0..Op::ALL.len() + terminal_count) >= Op::ALL.len()
        }
    };
    if leaf {
        nodes.push(Node::Leaf(terminals.random_terminal(rng)));
    } else {
        nodes.push(Node::Op(Op::ALL[rng.gen_range(0..Op::ALL.len())]));
        grow_into(nodes, depth_left - 1, method, terminals, rng);
        grow_into(nodes, depth_left - 1, method, terminals, rng);
    }
}

fn write_prefix(nodes: &[Node], cursor: &mut usize, terminals: &TerminalSet, out: &mut String) {
    let node = nodes[*cursor];
    *cursor += 1;
    match node {
        Node::Leaf(Terminal::Variable(i)) => match terminals.variable_names.get(i) {
            Some(name) => out.push_str(name),
            None => {
                out.push('$');
                out.push_str(&i.to_string());
            }
        },
        Node::Leaf(Terminal::Constant(c)) => out.push_str(&c.to_string()),
        Node::Op(op) => {
            out.push('(');
            out.push_str(op.symbol());
            out.push(' ');
            write_prefix(nodes, cursor, terminals, out);
            out.push(' ');
            write_prefix(nodes, cursor, terminals, out);
            out.push(')');
        }
    }
}

struct PrefixDisplay<'a> {
    tree: &'a ProgramTree,
    terminals: &'a TerminalSet,
}

impl fmt::Display for PrefixDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tree.to_prefix(self.terminals))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    len: usize,
    terminals: &'a TerminalSet,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, terminals: &'a TerminalSet) -> Self {
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            if c == '(' || c == ')' || c.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((s, Token::Atom(&text[s..i])));
                }
                match c {
                    '(' => tokens.push((i, Token::Open)),
                    ')' => tokens.push((i, Token::Close)),
                    _ => {}
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push((s, Token::Atom(&text[s..])));
        }
        Parser {
            tokens,
            pos: 0,
            len: text.len(),
            terminals,
        }
    }

    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<(usize, Token<'a>)> {
        let t = self.tokens.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn parse(mut self) -> Result<ProgramTree> {
        let mut nodes = Vec::new();
        self.expr(&mut nodes)?;
        if let Some(&(at, tok)) = self.tokens.get(self.pos) {
            return match tok {
                Token::Close => self.error(at, "unbalanced ')'"),
                _ => self.error(at, "unexpected trailing input"),
            };
        }
        Ok(ProgramTree { nodes })
    }

    fn expr(&mut self, nodes: &mut Vec<Node>) -> Result<()> {
        match self.next() {
            None => self.error(self.len, "unexpected end of input (unbalanced parentheses)"),
            Some((at, Token::Close)) => self.error(at, "unexpected ')'"),
            Some((at, Token::Atom(atom))) => {
                let leaf = self.terminal(at, atom)?;
                nodes.push(Node::Leaf(leaf));
                Ok(())
            }
            Some((at, Token::Open)) => {
                let op = match self.next() {
                    Some((_, Token::Atom(sym))) => match Op::from_symbol(sym) {
                        Some(op) => op,
                        None => return self.error(at + 1, format!("unknown operator {sym:?}")),
                    },
                    Some((p, _)) => return self.error(p, "expected an operator after '('"),
                    None => {
                        return self.error(self.len, "unexpected end of input (unbalanced parentheses)")
                    }
                };
                nodes.push(Node::Op(op));
                for _ in 0..2 {
                    if let Some(&(p, Token::Close)) = self.tokens.get(self.pos) {
                        return self.error(
                            p,
                            format!("operator {} takes exactly 2 arguments", op.symbol()),
                        );
                    }
                    self.expr(nodes)?;
                }
                match self.next() {
                    Some((_, Token::Close)) => Ok(()),
                    Some((p, _)) => self.error(
                        p,
                        format!("operator {} takes exactly 2 arguments", op.symbol()),
                    ),
                    None => self.error(self.len, "unexpected end of input (unbalanced parentheses)"),
                }
            }
        }
    }

    fn terminal(&self, at: usize, atom: &str) -> Result<Terminal> {
        if let Some(i) = self.terminals.index_of(atom) {
            return Ok(Terminal::Variable(i));
        }
        if let Ok(c) = atom.parse::<i64>() {
            return Ok(Terminal::Constant(c));
        }
        if Op::from_symbol(atom).is_some() {
            return self.error(at, format!("operator {atom:?} outside of an application"));
        }
        self.error(at, format!("unknown symbol {atom:?}"))
    }
}
