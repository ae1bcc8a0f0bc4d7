use thiserror::Error;

use super::{
    Cmp, MergeCondition, MergeRules, NodePredicate, Pattern, Provenance, TextRule,
    TransformProgram, TypeRule, ViewPredicate,
};

/// Hard nesting limit of the parser itself. Programs deeper than the
/// configured validator limit still parse and are reported by validation.
const PARSE_NESTING_LIMIT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("expression nesting exceeds {limit} at {line}:{column}")]
    DepthExceeded {
        line: usize,
        column: usize,
        limit: usize,
    },
}

impl SyntaxError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            SyntaxError::Syntax { line, column, .. } | SyntaxError::DepthExceeded { line, column, .. } => {
                (*line, *column)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u32),
    Str(String),
    Regex(String),
    Cmp(Cmp),
    Punct(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Regex(s) => format!("pattern /{s}/"),
            Tok::Cmp(c) => format!("`{}`", c.symbol()),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! advance {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let err = |message: String| SyntaxError::Syntax {
            line: l,
            column: col,
            message,
        };
        if c.is_whitespace() {
            advance!();
            continue;
        }
        if c == '/' {
            advance!();
            if chars.peek() == Some(&'/') {
                while let Some(c) = advance!() {
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            let mut re = String::new();
            loop {
                match advance!() {
                    None | Some('\n') => return Err(err("unterminated pattern".into())),
                    Some('/') => break,
                    Some('\\') if chars.peek() == Some(&'/') => {
                        advance!();
                        re.push('/');
                    }
                    Some(c) => re.push(c),
                }
            }
            out.push(Token { tok: Tok::Regex(re), line: l, column: col });
            continue;
        }
        if c == '"' {
            advance!();
            let mut s = String::new();
            loop {
                match advance!() {
                    None => return Err(err("unterminated string".into())),
                    Some('"') => break,
                    Some('\\') => match advance!() {
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        other => return Err(err(format!("invalid escape {other:?}"))),
                    },
                    Some(c) => s.push(c),
                }
            }
            out.push(Token { tok: Tok::Str(s), line: l, column: col });
            continue;
        }
        let tok = match c {
            '<' | '>' | '=' | '≤' | '≥' => {
                advance!();
                let eq = chars.peek() == Some(&'=');
                match (c, eq) {
                    ('<', true) => {
                        advance!();
                        Tok::Cmp(Cmp::Le)
                    }
                    ('>', true) => {
                        advance!();
                        Tok::Cmp(Cmp::Ge)
                    }
                    ('<', false) => Tok::Cmp(Cmp::Lt),
                    ('>', false) => Tok::Cmp(Cmp::Gt),
                    ('≤', _) => Tok::Cmp(Cmp::Le),
                    ('≥', _) => Tok::Cmp(Cmp::Ge),
                    _ => Tok::Cmp(Cmp::Eq),
                }
            }
            '{' | '}' | '(' | ')' | '[' | ']' | ';' | ':' | ',' => {
                advance!();
                Tok::Punct(c)
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                        word.push(c);
                        advance!();
                    } else {
                        break;
                    }
                }
                if word.bytes().all(|b| b.is_ascii_digit()) {
                    Tok::Int(word.parse().map_err(|_| err(format!("integer {word} out of range")))?)
                } else {
                    Tok::Ident(word)
                }
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        };
        out.push(Token { tok, line: l, column: col });
    }
    out.push(Token { tok: Tok::Eof, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    nesting: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> SyntaxError {
        SyntaxError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, t: &Token, wanted: &str) -> SyntaxError {
        self.error_at(t, format!("expected {wanted}, found {}", t.tok.describe()))
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w == word)
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.is_ident(word) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), SyntaxError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(w) if w == word => Ok(()),
            _ => Err(self.unexpected(&t, &format!("`{word}`"))),
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SyntaxError> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(self.unexpected(&t, &format!("`{c}`")))
        }
    }

    fn expect_str(&mut self) -> Result<String, SyntaxError> {
        let t = self.next();
        match t.tok {
            Tok::Str(s) => Ok(s),
            _ => Err(self.unexpected(&t, "a string literal")),
        }
    }

    fn expect_cmp(&mut self) -> Result<Cmp, SyntaxError> {
        let t = self.next();
        match t.tok {
            Tok::Cmp(c) => Ok(c),
            _ => Err(self.unexpected(&t, "a comparison operator")),
        }
    }

    fn expect_eq(&mut self) -> Result<(), SyntaxError> {
        let t = self.next();
        match t.tok {
            Tok::Cmp(Cmp::Eq) => Ok(()),
            _ => Err(self.unexpected(&t, "`=`")),
        }
    }

    fn expect_int(&mut self) -> Result<u32, SyntaxError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(n),
            _ => Err(self.unexpected(&t, "an integer")),
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.nesting += 1;
        if self.nesting > PARSE_NESTING_LIMIT {
            let t = self.peek();
            return Err(SyntaxError::DepthExceeded {
                line: t.line,
                column: t.column,
                limit: PARSE_NESTING_LIMIT,
            });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.nesting -= 1;
    }

    /// Generic precedence climbing shared by the three predicate languages.
    fn bool_expr<T>(
        &mut self,
        atom: &mut dyn FnMut(&mut Self) -> Result<T, SyntaxError>,
        not: fn(T) -> T,
        and: fn(T, T) -> T,
        or: fn(T, T) -> T,
    ) -> Result<T, SyntaxError> {
        self.enter()?;
        let mut lhs = self.and_expr(atom, not, and)?;
        while self.eat_ident("or") {
            let rhs = self.and_expr(atom, not, and)?;
            lhs = or(lhs, rhs);
        }
        self.leave();
        Ok(lhs)
    }

    fn and_expr<T>(
        &mut self,
        atom: &mut dyn FnMut(&mut Self) -> Result<T, SyntaxError>,
        not: fn(T) -> T,
        and: fn(T, T) -> T,
    ) -> Result<T, SyntaxError> {
        let mut lhs = self.unary(atom, not)?;
        while self.eat_ident("and") {
            let rhs = self.unary(atom, not)?;
            lhs = and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary<T>(
        &mut self,
        atom: &mut dyn FnMut(&mut Self) -> Result<T, SyntaxError>,
        not: fn(T) -> T,
    ) -> Result<T, SyntaxError> {
        if self.eat_ident("not") {
            self.enter()?;
            let inner = self.unary(atom, not)?;
            self.leave();
            return Ok(not(inner));
        }
        atom(self)
    }

    fn node_pred(&mut self) -> Result<NodePredicate, SyntaxError> {
        self.bool_expr(
            &mut |p: &mut Parser| {
                if p.eat_punct('(') {
                    let inner = p.node_pred()?;
                    p.expect_punct(')')?;
                    return Ok(inner);
                }
                p.node_atom()
            },
            NodePredicate::not,
            NodePredicate::and,
            NodePredicate::or,
        )
    }

    /// Node atoms; `true`/`false` are included.
    fn node_atom(&mut self) -> Result<NodePredicate, SyntaxError> {
        let t = self.next();
        let word = match &t.tok {
            Tok::Ident(w) => w.clone(),
            _ => return Err(self.unexpected(&t, "a predicate")),
        };
        Ok(match word.as_str() {
            "true" => NodePredicate::True,
            "false" => NodePredicate::False,
            "tag" => {
                if self.eat_ident("in") {
                    self.expect_punct('(')?;
                    let mut set = Vec::new();
                    if !self.eat_punct(')') {
                        loop {
                            set.push(self.expect_str()?);
                            if self.eat_punct(')') {
                                break;
                            }
                            self.expect_punct(',')?;
                        }
                    }
                    NodePredicate::TagIn(set)
                } else {
                    self.expect_eq()?;
                    NodePredicate::TagEquals(self.expect_str()?)
                }
            }
            "attr" => {
                self.expect_punct('(')?;
                let key = self.expect_str()?;
                self.expect_punct(')')?;
                let t = self.next();
                match &t.tok {
                    Tok::Ident(w) if w == "exists" => NodePredicate::AttrExists(key),
                    Tok::Ident(w) if w == "matches" => {
                        let t = self.next();
                        match t.tok {
                            Tok::Regex(re) => NodePredicate::AttrMatches(key, Pattern::new(re)),
                            _ => return Err(self.unexpected(&t, "a /pattern/")),
                        }
                    }
                    Tok::Cmp(Cmp::Eq) => NodePredicate::AttrEquals(key, self.expect_str()?),
                    _ => return Err(self.unexpected(&t, "`exists`, `=` or `matches`")),
                }
            }
            "text" => {
                if self.eat_ident("empty") {
                    NodePredicate::TextEmpty
                } else if self.eat_ident("nonempty") {
                    NodePredicate::TextNonEmpty
                } else {
                    let t = self.peek().clone();
                    if !matches!(t.tok, Tok::Cmp(Cmp::Eq)) {
                        return Err(self.unexpected(&t, "`empty`, `nonempty` or `=`"));
                    }
                    self.next();
                    NodePredicate::TextEquals(self.expect_str()?)
                }
            }
            "flag" => {
                self.expect_punct('(')?;
                let t = self.next();
                let name = match t.tok {
                    Tok::Ident(n) => n,
                    _ => return Err(self.unexpected(&t, "a flag name")),
                };
                self.expect_punct(')')?;
                NodePredicate::Flag(name)
            }
            "child-count" => {
                let c = self.expect_cmp()?;
                NodePredicate::ChildCount(c, self.expect_int()?)
            }
            "depth" => {
                let c = self.expect_cmp()?;
                NodePredicate::Depth(c, self.expect_int()?)
            }
            _ => return Err(self.unexpected(&t, "a predicate")),
        })
    }

    fn view_pred(&mut self) -> Result<ViewPredicate, SyntaxError> {
        self.bool_expr(
            &mut |p: &mut Parser| {
                if p.eat_punct('(') {
                    let inner = p.view_pred()?;
                    p.expect_punct(')')?;
                    return Ok(inner);
                }
                let t = p.next();
                match &t.tok {
                    Tok::Ident(w) => match w.as_str() {
                        "true" => Ok(ViewPredicate::True),
                        "false" => Ok(ViewPredicate::False),
                        "interactive" => Ok(ViewPredicate::Interactive),
                        "text" if p.eat_ident("empty") => Ok(ViewPredicate::TextEmpty),
                        "text" if p.eat_ident("nonempty") => Ok(ViewPredicate::TextNonEmpty),
                        "type" => {
                            p.expect_eq()?;
                            Ok(ViewPredicate::TypeEquals(p.expect_str()?))
                        }
                        _ => Err(p.unexpected(&t, "a view predicate")),
                    },
                    _ => Err(p.unexpected(&t, "a view predicate")),
                }
            },
            ViewPredicate::not,
            ViewPredicate::and,
            ViewPredicate::or,
        )
    }

    fn merge_cond(&mut self) -> Result<MergeCondition, SyntaxError> {
        self.bool_expr(
            &mut |p: &mut Parser| {
                if p.eat_punct('(') {
                    let inner = p.merge_cond()?;
                    p.expect_punct(')')?;
                    return Ok(inner);
                }
                let t = p.peek().clone();
                let word = match &t.tok {
                    Tok::Ident(w) => w.clone(),
                    _ => return Err(p.unexpected(&t, "a merge condition")),
                };
                match word.as_str() {
                    "true" => {
                        p.next();
                        Ok(MergeCondition::True)
                    }
                    "false" => {
                        p.next();
                        Ok(MergeCondition::False)
                    }
                    "all-views" | "any-view" => {
                        p.next();
                        p.expect_punct('(')?;
                        let v = p.view_pred()?;
                        p.expect_punct(')')?;
                        Ok(if word == "all-views" {
                            MergeCondition::AllViews(v)
                        } else {
                            MergeCondition::AnyView(v)
                        })
                    }
                    "view-count" => {
                        p.next();
                        let c = p.expect_cmp()?;
                        Ok(MergeCondition::ViewCount(c, p.expect_int()?))
                    }
                    "node" => {
                        p.next();
                        p.expect_punct('(')?;
                        let g = p.node_pred()?;
                        p.expect_punct(')')?;
                        Ok(MergeCondition::Guard(g))
                    }
                    _ => Ok(MergeCondition::Guard(p.node_atom()?)),
                }
            },
            MergeCondition::not,
            MergeCondition::and,
            MergeCondition::or,
        )
    }

    fn section(&mut self, name: &str) -> Result<(), SyntaxError> {
        self.expect_ident(name)?;
        self.expect_punct(':')
    }

    fn program(&mut self) -> Result<TransformProgram, SyntaxError> {
        self.expect_ident("program")?;
        let t = self.next();
        let program_id = match t.tok {
            Tok::Ident(id) => id,
            Tok::Int(n) => n.to_string(),
            _ => return Err(self.unexpected(&t, "a program id")),
        };
        self.expect_punct('{')?;

        self.section("leaf-filter")?;
        let leaf_filter = self.node_pred()?;
        self.expect_punct(';')?;

        self.section("leaf-props")?;
        self.expect_punct('[')?;
        let mut leaf_props = Vec::new();
        if !self.eat_punct(']') {
            loop {
                let t = self.next();
                match t.tok {
                    Tok::Ident(k) | Tok::Str(k) => leaf_props.push(k),
                    _ => return Err(self.unexpected(&t, "an attribute key")),
                }
                if self.eat_punct(']') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        self.expect_punct(';')?;

        self.section("node-filter")?;
        let node_filter = self.node_pred()?;
        self.expect_punct(';')?;

        self.section("merge-when")?;
        let merge_when = self.merge_cond()?;
        self.expect_punct(';')?;

        let mut merge_props = MergeRules::default();
        if self.eat_ident("merge-props") {
            self.expect_punct('{')?;
            let mut seen_text = false;
            let mut seen_type = false;
            while !self.eat_punct('}') {
                let t = self.next();
                let key = match &t.tok {
                    Tok::Ident(k) if k == "text" && !seen_text => {
                        seen_text = true;
                        "text"
                    }
                    Tok::Ident(k) if k == "type" && !seen_type => {
                        seen_type = true;
                        "type"
                    }
                    _ => return Err(self.unexpected(&t, "`text`, `type` or `}`")),
                };
                self.expect_punct(':')?;
                let t = self.next();
                match (key, &t.tok) {
                    ("text", Tok::Ident(v)) if v == "concat" => merge_props.text = TextRule::Concat,
                    ("text", Tok::Ident(v)) if v == "first" => merge_props.text = TextRule::First,
                    ("text", Tok::Ident(v)) if v == "parent" => merge_props.text = TextRule::Parent,
                    ("type", Tok::Ident(v)) if v == "parent" => merge_props.type_rule = TypeRule::Parent,
                    ("type", Tok::Ident(v)) if v == "dominant-child" => {
                        merge_props.type_rule = TypeRule::DominantChild
                    }
                    ("text", _) => return Err(self.unexpected(&t, "concat, first or parent")),
                    _ => return Err(self.unexpected(&t, "parent or dominant-child")),
                }
                if !self.eat_punct(';') && self.peek().tok != Tok::Punct('}') {
                    let t = self.peek().clone();
                    return Err(self.unexpected(&t, "`;` or `}`"));
                }
            }
            self.eat_punct(';');
        }
        self.expect_punct('}')?;

        Ok(TransformProgram {
            program_id,
            leaf_filter,
            leaf_props,
            node_filter,
            merge_when,
            merge_props,
            provenance: Provenance::default(),
        })
    }
}

/// Parses exactly one program block.
pub fn parse_program(text: &str) -> Result<TransformProgram, SyntaxError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        nesting: 0,
    };
    let prog = p.program()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return Err(p.unexpected(&t, "end of input"));
    }
    Ok(prog)
}

/// Parses a library file: zero or more program blocks, applied in file order.
pub fn parse_library(text: &str) -> Result<Vec<TransformProgram>, SyntaxError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        nesting: 0,
    };
    let mut out = Vec::new();
    while p.peek().tok != Tok::Eof {
        out.push(p.program()?);
    }
    Ok(out)
}
