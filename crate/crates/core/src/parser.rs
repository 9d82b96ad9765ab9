//! Surface syntax for programs (`.dl`), fact files (`.facts`) and updates (`.delta`).
//!
//! ```text
//! program    := rule*
//! rule       := atom ( ":-" literal ( "," literal )* )? "."
//! literal    := atom | "not" atom | VARIABLE "=" expr
//! atom       := IDENT ( "(" ( term ( "," term )* )? ")" )?
//! term       := VARIABLE | constant
//! constant   := LOWER_IDENT | "-"? INTEGER | STRING
//! expr       := product ( ( "+" | "-" ) product )*
//! product    := unary ( "*" unary )*
//! unary      := "-" unary | INTEGER | VARIABLE | "(" expr ")"
//! facts      := ( atom "." )*                       (atoms must be ground)
//! delta      := ( ( "+" | "-" ) atom "." )*         (atoms must be ground)
//! ```
//!
//! Variables start with an uppercase letter, constants with a lowercase letter
//! or `_`; predicate names may use either. `%` starts a comment running to the
//! end of the line.

use std::fmt;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::model::{
    check_arity, Atom, BinOp, BuiltinAtom, Expr, Fact, ModelError, Program, Rule, Symbol, Term,
    Value, VarId,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: variable {var} in a ground statement")]
    NotGround { line: usize, column: usize, var: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ParseError {
    /// Source position of a syntax or groundness error.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ParseError::Syntax { line, column, .. } | ParseError::NotGround { line, column, .. } => {
                Some((*line, *column))
            }
            ParseError::Model(_) => None,
        }
    }
}

/// Ground facts read from a `.facts` file, in first-occurrence order.
pub type FactList = IndexSet<Fact>;

/// An update: explicit facts to retract and to assert.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Delta {
    pub deletions: IndexSet<Fact>,
    pub insertions: IndexSet<Fact>,
}

impl Delta {
    pub fn new(
        deletions: impl IntoIterator<Item = Fact>,
        insertions: impl IntoIterator<Item = Fact>,
    ) -> Delta {
        Delta { deletions: deletions.into_iter().collect(), insertions: insertions.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.deletions.is_empty() && self.insertions.is_empty()
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.deletions {
            writeln!(f, "- {d}.")?;
        }
        for i in &self.insertions {
            writeln!(f, "+ {i}.")?;
        }
        Ok(())
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    Ok(Program::new(parse_rules(text)?)?)
}

/// Parses rules without the safety and stratification checks.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, ParseError> {
    let mut p = Parser::new(text);
    let mut rules = Vec::new();
    while !p.at_end() {
        rules.push(p.rule()?);
    }
    Ok(rules)
}

pub fn parse_facts(text: &str) -> Result<FactList, ParseError> {
    let mut p = Parser::new(text);
    let mut facts = FactList::new();
    let mut arities = IndexMap::new();
    while !p.at_end() {
        let f = p.ground_atom()?;
        check_arity(&mut arities, f.pred, f.args.len())?;
        p.expect(Tok::Dot, "'.'")?;
        facts.insert(f);
    }
    Ok(facts)
}

pub fn parse_delta(text: &str) -> Result<Delta, ParseError> {
    let mut p = Parser::new(text);
    let mut delta = Delta::default();
    let mut arities = IndexMap::new();
    while !p.at_end() {
        let (tok, line, column) = p.next();
        let insert = match tok {
            Tok::Plus => true,
            Tok::Minus => false,
            other => return Err(p.error_at(line, column, format!("expected '+' or '-', found {other}"))),
        };
        let f = p.ground_atom()?;
        check_arity(&mut arities, f.pred, f.args.len())?;
        p.expect(Tok::Dot, "'.'")?;
        if insert {
            delta.insertions.insert(f);
        } else {
            delta.deletions.insert(f);
        }
    }
    Ok(delta)
}

/// One fact per line, sorted, in `.facts` syntax.
pub fn render_facts<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> String {
    let mut sorted: Vec<&Fact> = facts.into_iter().collect();
    sorted.sort();
    let mut out = String::new();
    for f in sorted {
        out.push_str(&f.to_string());
        out.push_str(".\n");
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Implies,
    Eq,
    Plus,
    Minus,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Dot => f.write_str("'.'"),
            Tok::Implies => f.write_str("':-'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
    peeked: Option<(Tok, usize, usize, usize, usize, usize)>,
    lex_error: Option<ParseError>,
    vars: IndexMap<String, VarId>,
}

fn is_variable(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase())
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0, line: 1, column: 1, peeked: None, lex_error: None, vars: IndexMap::new() }
    }

    fn error_at(&self, line: usize, column: usize, message: String) -> ParseError {
        ParseError::Syntax { line, column, message }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn lex(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, line, column));
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '=' => Tok::Eq,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            ':' => {
                if self.peek_char() == Some('-') {
                    self.bump();
                    Tok::Implies
                } else {
                    return Err(self.error_at(line, column, "expected ':-'".into()));
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error_at(line, column, "unterminated string".into())),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            _ => {
                                return Err(self.error_at(self.line, self.column, "invalid escape".into()))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let start = self.pos - 1;
                while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
                let digits = &self.src[start..self.pos];
                let n = digits
                    .parse::<i64>()
                    .map_err(|_| self.error_at(line, column, format!("integer {digits} out of range")))?;
                Tok::Int(n)
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = self.pos - c.len_utf8();
                while self.peek_char().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.bump();
                }
                Tok::Ident(self.src[start..self.pos].to_owned())
            }
            other => return Err(self.error_at(line, column, format!("unexpected character {other:?}"))),
        };
        Ok((tok, line, column))
    }

    fn fill(&mut self) {
        if self.peeked.is_none() && self.lex_error.is_none() {
            let before = (self.pos, self.line, self.column);
            match self.lex() {
                Ok((tok, line, column)) => {
                    self.peeked = Some((tok, line, column, self.pos, self.line, self.column));
                    (self.pos, self.line, self.column) = before;
                }
                Err(e) => self.lex_error = Some(e),
            }
        }
    }

    fn peek(&mut self) -> Result<&Tok, ParseError> {
        self.fill();
        if let Some(e) = &self.lex_error {
            return Err(e.clone());
        }
        Ok(&self.peeked.as_ref().unwrap().0)
    }

    fn peek_pos(&mut self) -> (usize, usize) {
        self.fill();
        match &self.peeked {
            Some((_, l, c, ..)) => (*l, *c),
            None => (self.line, self.column),
        }
    }

    /// Consumes a token; lexing errors surface as an `Eof` whose error is returned by `try_next`.
    fn try_next(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        self.fill();
        if let Some(e) = self.lex_error.take() {
            return Err(e);
        }
        let (tok, line, column, pos, nl, nc) = self.peeked.take().unwrap();
        (self.pos, self.line, self.column) = (pos, nl, nc);
        Ok((tok, line, column))
    }

    fn next(&mut self) -> (Tok, usize, usize) {
        match self.try_next() {
            Ok(t) => t,
            Err(e) => {
                self.lex_error = Some(e);
                (Tok::Eof, self.line, self.column)
            }
        }
    }

    fn at_end(&mut self) -> bool {
        matches!(self.peek(), Ok(Tok::Eof))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (tok, line, column) = self.try_next()?;
        if tok == want {
            Ok(())
        } else {
            Err(self.error_at(line, column, format!("expected {what}, found {tok}")))
        }
    }

    fn var(&mut self, name: &str) -> VarId {
        let next = VarId(self.vars.len() as u32);
        *self.vars.entry(name.to_owned()).or_insert(next)
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        self.vars.clear();
        let head = self.atom()?;
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        let mut builtins = Vec::new();
        let (tok, line, column) = self.try_next()?;
        match tok {
            Tok::Dot => {}
            Tok::Implies => loop {
                self.literal(&mut positive, &mut negative, &mut builtins)?;
                let (tok, line, column) = self.try_next()?;
                match tok {
                    Tok::Comma => continue,
                    Tok::Dot => break,
                    other => {
                        return Err(self.error_at(line, column, format!("expected ',' or '.', found {other}")))
                    }
                }
            },
            other => return Err(self.error_at(line, column, format!("expected ':-' or '.', found {other}"))),
        }
        let vars = self.vars.keys().map(|k| Symbol::intern(k)).collect();
        Ok(Rule { head, positive, negative, builtins, vars })
    }

    fn literal(
        &mut self,
        positive: &mut Vec<Atom>,
        negative: &mut Vec<Atom>,
        builtins: &mut Vec<BuiltinAtom>,
    ) -> Result<(), ParseError> {
        let (line, column) = self.peek_pos();
        let name = match self.peek()? {
            Tok::Ident(name) => name.clone(),
            other => {
                let msg = format!("expected a body literal, found {other}");
                return Err(self.error_at(line, column, msg));
            }
        };
        if name == "not" {
            self.next();
            if matches!(self.peek()?, Tok::Ident(_)) {
                negative.push(self.atom()?);
                return Ok(());
            }
            // `not` used as a predicate name
            positive.push(self.atom_named(name, line, column)?);
            return Ok(());
        }
        self.next();
        if *self.peek()? == Tok::Eq {
            if !is_variable(&name) {
                return Err(self.error_at(line, column, "built-in target must be a variable".into()));
            }
            self.next();
            let target = self.var(&name);
            let expr = self.expr()?;
            builtins.push(BuiltinAtom { target, expr });
            return Ok(());
        }
        positive.push(self.atom_named(name, line, column)?);
        Ok(())
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let (tok, line, column) = self.try_next()?;
        match tok {
            Tok::Ident(name) => self.atom_named(name, line, column),
            other => Err(self.error_at(line, column, format!("expected an atom, found {other}"))),
        }
    }

    fn atom_named(&mut self, name: String, _line: usize, _column: usize) -> Result<Atom, ParseError> {
        let pred = Symbol::intern(&name);
        let mut args = Vec::new();
        if *self.peek()? == Tok::LParen {
            self.next();
            if *self.peek()? == Tok::RParen {
                self.next();
            } else {
                loop {
                    args.push(self.term()?);
                    let (tok, line, column) = self.try_next()?;
                    match tok {
                        Tok::Comma => continue,
                        Tok::RParen => break,
                        other => {
                            return Err(self.error_at(line, column, format!("expected ',' or ')', found {other}")))
                        }
                    }
                }
            }
        }
        Ok(Atom { pred, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (tok, line, column) = self.try_next()?;
        match tok {
            Tok::Ident(name) if is_variable(&name) => Ok(Term::Var(self.var(&name))),
            Tok::Ident(name) => Ok(Term::Const(Value::sym(&name))),
            Tok::Int(i) => Ok(Term::Const(Value::Int(i))),
            Tok::Str(s) => Ok(Term::Const(Value::string(&s))),
            Tok::Minus => match self.try_next()? {
                (Tok::Int(i), ..) => Ok(Term::Const(Value::Int(-i))),
                (other, line, column) => {
                    Err(self.error_at(line, column, format!("expected an integer after '-', found {other}")))
                }
            },
            other => Err(self.error_at(line, column, format!("expected a term, found {other}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek()? {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek()? == Tok::Star {
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let (tok, line, column) = self.try_next()?;
        match tok {
            Tok::Minus => match self.unary()? {
                Expr::Const(c) => Ok(Expr::Const(-c)),
                e => Ok(Expr::Neg(Box::new(e))),
            },
            Tok::Int(i) => Ok(Expr::Const(i)),
            Tok::Ident(name) if is_variable(&name) => Ok(Expr::Var(self.var(&name))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            other => Err(self.error_at(line, column, format!("expected an expression, found {other}"))),
        }
    }

    fn ground_atom(&mut self) -> Result<Fact, ParseError> {
        self.vars.clear();
        let (line, column) = self.peek_pos();
        let atom = self.atom()?;
        let mut args = crate::model::Tuple::new();
        for t in &atom.args {
            match t {
                Term::Const(c) => args.push(*c),
                Term::Var(v) => {
                    return Err(ParseError::NotGround {
                        line,
                        column,
                        var: self.vars.get_index(v.index()).unwrap().0.clone(),
                    })
                }
            }
        }
        Ok(Fact { pred: atom.pred, args })
    }
}
