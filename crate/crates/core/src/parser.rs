/*!
Reader and writer for chain and infrastructure fact files.

The accepted language is a fixed fact schema in Prolog syntax:

```text
file        ::= clause*
clause      ::= alternative (';' alternative)* '.'
alternative ::= (number '::')? term
term        ::= ident ('(' term (',' term)* ')')? | number | list
list        ::= '[' (term (',' term)*)? ']'
ident       ::= [a-z][A-Za-z0-9_]*
number      ::= [0-9]+ ('.' [0-9]+)? | 'inf'
comment     ::= '%' .* EOL
```

Chain files hold `chain/2`, `service/5`, `flow/3` and `maxLatency/2` facts.
Infrastructure files hold `node/4` and `link/4` facts; each clause is one
random variable, written as a single fact (probability 1) or as an annotated
disjunction `p1::f1; p2::f2; ... .` over the same node or link.

Security policies are `[a, b, ...]`, `atom`, `and(P, P)` or `or(P, P)`.
*/

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::iter::Peekable;
use std::str::CharIndices;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{
    ChainId, ChainSpec, Flow, Infrastructure, LatencyConstraint, LinkProfile, LinkScenario,
    NodeId, NodeProfile, NodeScenario, SecurityPolicy, ServiceFunction, ServiceId,
};

const MAX_NESTING: usize = 128;

/// 1-based location of a token or term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col_start)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: Pos,
    end: Pos,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semi,
    ColonColon,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(n) => write!(f, "number `{n}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::ColonColon => f.write_str("`::`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    text: &'a str,
    chars: Peekable<CharIndices<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            text,
            chars: text.char_indices().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        next
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.text.len())
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Span), (String, Span)> {
        self.skip_trivia();
        let start = self.pos();
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, Span { start, end: start }));
        };
        let single = |lexer: &mut Self, tok: Tok| {
            lexer.bump();
            Ok((
                tok,
                Span {
                    start,
                    end: lexer.pos(),
                },
            ))
        };
        match c {
            '(' => single(self, Tok::LParen),
            ')' => single(self, Tok::RParen),
            '[' => single(self, Tok::LBracket),
            ']' => single(self, Tok::RBracket),
            ',' => single(self, Tok::Comma),
            '.' => single(self, Tok::Dot),
            ';' => single(self, Tok::Semi),
            ':' => {
                self.bump();
                if self.peek() == Some(':') {
                    self.bump();
                    Ok((
                        Tok::ColonColon,
                        Span {
                            start,
                            end: self.pos(),
                        },
                    ))
                } else {
                    Err((
                        "expected `::`".into(),
                        Span {
                            start,
                            end: self.pos(),
                        },
                    ))
                }
            }
            'a'..='z' => {
                let from = self.offset();
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                let to = self.offset();
                let span = Span {
                    start,
                    end: self.pos(),
                };
                let word = &self.text[from..to];
                if word == "inf" {
                    Ok((Tok::Number(f64::INFINITY), span))
                } else {
                    Ok((Tok::Ident(word.to_owned()), span))
                }
            }
            '0'..='9' => {
                let from = self.offset();
                while matches!(self.peek(), Some('0'..='9')) {
                    self.bump();
                }
                // A '.' is a decimal point only when a digit follows it.
                let mut ahead = self.chars.clone();
                ahead.next();
                if self.peek() == Some('.') && matches!(ahead.peek(), Some((_, '0'..='9'))) {
                    self.bump();
                    while matches!(self.peek(), Some('0'..='9')) {
                        self.bump();
                    }
                }
                let to = self.offset();
                let span = Span {
                    start,
                    end: self.pos(),
                };
                self.text[from..to]
                    .parse::<f64>()
                    .map(|n| (Tok::Number(n), span))
                    .map_err(|e| (format!("bad number: {e}"), span))
            }
            'A'..='Z' | '_' => {
                self.bump();
                Err((
                    "variables are not supported; identifiers start with a lowercase letter"
                        .into(),
                    Span {
                        start,
                        end: self.pos(),
                    },
                ))
            }
            other => {
                self.bump();
                Err((
                    format!("unexpected character {other:?}"),
                    Span {
                        start,
                        end: self.pos(),
                    },
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TermKind {
    Atom(String),
    Number(f64),
    Compound(String, Vec<Term>),
    List(Vec<Term>),
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    kind: TermKind,
    span: Span,
}

struct Alternative {
    prob: Option<(f64, Span)>,
    term: Term,
}

struct Clause {
    alternatives: Vec<Alternative>,
    span: Span,
}

struct Parser<'a> {
    file: String,
    lexer: Lexer<'a>,
    tok: Tok,
    span: Span,
    // The closing '.' of the last clause is still the current token; the
    // lexer only moves past it when the next clause is requested.
    after_dot: bool,
}

impl<'a> Parser<'a> {
    fn new(file: &str, text: &'a str) -> Result<Self, ParseError> {
        let origin = Pos { line: 1, col: 1 };
        let mut p = Parser {
            file: file.to_owned(),
            lexer: Lexer::new(text),
            tok: Tok::Eof,
            span: Span {
                start: origin,
                end: origin,
            },
            after_dot: false,
        };
        p.advance()?;
        Ok(p)
    }

    fn error(&self, span: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            span: SourceSpan {
                file: self.file.clone(),
                line: span.start.line,
                col_start: span.start.col,
                col_end: if span.end.line == span.start.line {
                    span.end.col
                } else {
                    span.start.col + 1
                },
            },
            message: message.into(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        match self.lexer.next_token() {
            Ok((tok, span)) => {
                self.tok = tok;
                self.span = span;
                Ok(())
            }
            Err((msg, span)) => Err(self.error(span, msg)),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        if self.tok == tok {
            let span = self.span;
            self.advance()?;
            Ok(span)
        } else {
            Err(self.error(self.span, format!("expected {tok}, found {}", self.tok)))
        }
    }

    fn clause(&mut self) -> Result<Option<Clause>, ParseError> {
        if self.after_dot {
            self.after_dot = false;
            self.advance()?;
        }
        if self.tok == Tok::Eof {
            return Ok(None);
        }
        let start = self.span.start;
        let mut alternatives = vec![self.alternative()?];
        while self.tok == Tok::Semi {
            self.advance()?;
            alternatives.push(self.alternative()?);
        }
        if self.tok != Tok::Dot {
            return Err(self.error(self.span, format!("expected {}, found {}", Tok::Dot, self.tok)));
        }
        let end = self.span.end;
        self.after_dot = true;
        Ok(Some(Clause {
            alternatives,
            span: Span { start, end },
        }))
    }

    fn alternative(&mut self) -> Result<Alternative, ParseError> {
        if let Tok::Number(p) = self.tok {
            let span = self.span;
            self.advance()?;
            self.expect(Tok::ColonColon)?;
            let term = self.term(0)?;
            Ok(Alternative {
                prob: Some((p, span)),
                term,
            })
        } else {
            Ok(Alternative {
                prob: None,
                term: self.term(0)?,
            })
        }
    }

    fn term(&mut self, depth: usize) -> Result<Term, ParseError> {
        if depth > MAX_NESTING {
            return Err(self.error(self.span, "terms nested too deeply"));
        }
        let start = self.span;
        match self.tok.clone() {
            Tok::Number(n) => {
                self.advance()?;
                Ok(Term {
                    kind: TermKind::Number(n),
                    span: start,
                })
            }
            Tok::Ident(name) => {
                self.advance()?;
                if self.tok != Tok::LParen {
                    return Ok(Term {
                        kind: TermKind::Atom(name),
                        span: start,
                    });
                }
                self.advance()?;
                let args = self.sequence(Tok::RParen, depth)?;
                let end = self.expect(Tok::RParen)?.end;
                if args.is_empty() {
                    return Err(self.error(start, "empty argument list"));
                }
                Ok(Term {
                    kind: TermKind::Compound(name, args),
                    span: Span {
                        start: start.start,
                        end,
                    },
                })
            }
            Tok::LBracket => {
                self.advance()?;
                let items = self.sequence(Tok::RBracket, depth)?;
                let end = self.expect(Tok::RBracket)?.end;
                Ok(Term {
                    kind: TermKind::List(items),
                    span: Span {
                        start: start.start,
                        end,
                    },
                })
            }
            other => Err(self.error(start, format!("expected a term, found {other}"))),
        }
    }

    fn sequence(&mut self, close: Tok, depth: usize) -> Result<Vec<Term>, ParseError> {
        let mut items = Vec::new();
        if self.tok == close {
            return Ok(items);
        }
        items.push(self.term(depth + 1)?);
        while self.tok == Tok::Comma {
            self.advance()?;
            items.push(self.term(depth + 1)?);
        }
        Ok(items)
    }
}

/// Schema-level interpretation of terms.
struct Reader<'p, 'a> {
    parser: &'p Parser<'a>,
}

impl Reader<'_, '_> {
    fn err(&self, span: Span, message: impl Into<String>) -> ParseError {
        self.parser.error(span, message)
    }

    fn fact<'t>(&self, t: &'t Term, known: &[(&str, usize)]) -> Result<(&'t str, &'t [Term]), ParseError> {
        let (name, args) = match &t.kind {
            TermKind::Compound(name, args) => (name.as_str(), args.as_slice()),
            TermKind::Atom(name) => (name.as_str(), &[][..]),
            _ => return Err(self.err(t.span, "expected a fact")),
        };
        match known.iter().find(|(n, _)| *n == name) {
            None => Err(self.err(t.span, format!("unknown functor {name}/{}", args.len()))),
            Some(&(_, arity)) if arity != args.len() => Err(self.err(
                t.span,
                format!("arity mismatch: {name}/{}, expected {name}/{arity}", args.len()),
            )),
            Some(_) => Ok((name, args)),
        }
    }

    fn ident(&self, t: &Term) -> Result<String, ParseError> {
        match &t.kind {
            TermKind::Atom(a) => Ok(a.clone()),
            _ => Err(self.err(t.span, "expected an identifier")),
        }
    }

    fn number(&self, t: &Term) -> Result<f64, ParseError> {
        match t.kind {
            TermKind::Number(n) => Ok(n),
            _ => Err(self.err(t.span, "expected a number")),
        }
    }

    fn finite(&self, t: &Term) -> Result<f64, ParseError> {
        let n = self.number(t)?;
        if n.is_finite() {
            Ok(n)
        } else {
            Err(self.err(t.span, "expected a finite number"))
        }
    }

    fn ident_list(&self, t: &Term) -> Result<Vec<String>, ParseError> {
        match &t.kind {
            TermKind::List(items) => items.iter().map(|i| self.ident(i)).collect(),
            _ => Err(self.err(t.span, "expected a list of identifiers")),
        }
    }

    fn ident_set(&self, t: &Term) -> Result<BTreeSet<String>, ParseError> {
        let items = self.ident_list(t)?;
        let n = items.len();
        let set: BTreeSet<String> = items.into_iter().collect();
        if set.len() != n {
            return Err(self.err(t.span, "duplicate entries in list"));
        }
        Ok(set)
    }

    fn policy(&self, t: &Term) -> Result<SecurityPolicy, ParseError> {
        match &t.kind {
            TermKind::Atom(a) => Ok(SecurityPolicy::Atom(a.clone())),
            TermKind::List(_) => Ok(SecurityPolicy::All(self.ident_list(t)?)),
            TermKind::Compound(op, args) if args.len() == 2 && (op == "and" || op == "or") => {
                let (l, r) = (self.policy(&args[0])?, self.policy(&args[1])?);
                Ok(if op == "and" {
                    SecurityPolicy::and(l, r)
                } else {
                    SecurityPolicy::or(l, r)
                })
            }
            TermKind::Compound(op, args) => Err(self.err(
                t.span,
                format!("unknown policy connective {op}/{}", args.len()),
            )),
            TermKind::Number(_) => Err(self.err(t.span, "expected a security policy")),
        }
    }
}

/// Parses a chain file; returns one chain per `chain/2` fact, in order.
pub fn parse_chain_file(text: &str) -> Result<Vec<ChainSpec>, ParseError> {
    parse_chain_file_named("<input>", text)
}

pub fn parse_chain_file_named(file: &str, text: &str) -> Result<Vec<ChainSpec>, ParseError> {
    const SCHEMA: &[(&str, usize)] = &[("chain", 2), ("service", 5), ("flow", 3), ("maxLatency", 2)];

    let mut parser = Parser::new(file, text)?;
    let mut chains: Vec<(ChainId, Vec<(ServiceId, Span)>)> = Vec::new();
    let mut services: IndexMap<ServiceId, ServiceFunction> = IndexMap::new();
    let mut flows: Vec<(Flow, Span)> = Vec::new();
    let mut latencies: Vec<LatencyConstraint> = Vec::new();

    while let Some(clause) = parser.clause()? {
        let rd = Reader { parser: &parser };
        if clause.alternatives.len() != 1 || clause.alternatives[0].prob.is_some() {
            return Err(rd.err(clause.span, "chain files hold plain facts only"));
        }
        let term = &clause.alternatives[0].term;
        let (name, args) = rd.fact(term, SCHEMA)?;
        match name {
            "chain" => {
                let id = ChainId::new(rd.ident(&args[0])?);
                if chains.iter().any(|(c, _)| *c == id) {
                    return Err(rd.err(term.span, format!("chain {id} declared twice")));
                }
                let TermKind::List(items) = &args[1].kind else {
                    return Err(rd.err(args[1].span, "expected a list of service ids"));
                };
                let members = items
                    .iter()
                    .map(|i| Ok((ServiceId::new(rd.ident(i)?), i.span)))
                    .collect::<Result<Vec<_>, ParseError>>()?;
                chains.push((id, members));
            }
            "service" => {
                let id = ServiceId::new(rd.ident(&args[0])?);
                let iot_reqs = rd.ident_list(&args[3])?;
                let sf = ServiceFunction {
                    id: id.clone(),
                    tproc: rd.finite(&args[1])?,
                    hw_reqs: rd.finite(&args[2])?,
                    iot_reqs,
                    sec_policy: rd.policy(&args[4])?,
                };
                if services.insert(id.clone(), sf).is_some() {
                    return Err(rd.err(term.span, format!("service {id} declared twice")));
                }
            }
            "flow" => {
                let flow = Flow {
                    src: ServiceId::new(rd.ident(&args[0])?),
                    dst: ServiceId::new(rd.ident(&args[1])?),
                    bandwidth: rd.finite(&args[2])?,
                };
                flows.push((flow, term.span));
            }
            "maxLatency" => {
                let path = rd
                    .ident_list(&args[0])?
                    .into_iter()
                    .map(ServiceId::new)
                    .collect();
                latencies.push(LatencyConstraint {
                    path,
                    max_latency: rd.finite(&args[1])?,
                });
            }
            _ => unreachable!("schema covers every functor"),
        }
    }

    let rd = Reader { parser: &parser };
    if chains.is_empty() {
        return Err(rd.err(parser.span, "no chain declared"));
    }
    let member_of_any: HashSet<&ServiceId> =
        chains.iter().flat_map(|(_, m)| m.iter().map(|(s, _)| s)).collect();
    for (f, span) in &flows {
        if !member_of_any.contains(&f.src) && !member_of_any.contains(&f.dst) {
            return Err(rd.err(
                *span,
                format!("flow ({}, {}) does not touch any declared chain", f.src, f.dst),
            ));
        }
    }

    let mut out = Vec::with_capacity(chains.len());
    for (id, members) in chains {
        let mut chain_services = Vec::with_capacity(members.len());
        for (sid, span) in &members {
            let sf = services
                .get(sid)
                .ok_or_else(|| rd.err(*span, format!("chain {id} lists undeclared service {sid}")))?;
            chain_services.push(sf.clone());
        }
        let is_member = |s: &ServiceId| members.iter().any(|(m, _)| m == s);
        let chain_flows: Vec<Flow> = flows
            .iter()
            .filter(|(f, _)| is_member(&f.src) || is_member(&f.dst))
            .map(|(f, _)| f.clone())
            .collect();
        let chain_latencies: Vec<LatencyConstraint> = latencies
            .iter()
            .filter(|lc| lc.path.iter().any(is_member))
            .cloned()
            .collect();

        let mut external_ids: Vec<&ServiceId> = Vec::new();
        let referenced = chain_flows
            .iter()
            .flat_map(|f| [&f.src, &f.dst])
            .chain(chain_latencies.iter().flat_map(|lc| lc.path.iter()));
        for s in referenced {
            if !is_member(s) && !external_ids.contains(&s) {
                external_ids.push(s);
            }
        }
        let external_services = external_ids
            .into_iter()
            .filter_map(|s| services.get(s).cloned())
            .collect();

        out.push(ChainSpec {
            id,
            services: chain_services,
            flows: chain_flows,
            latency_constraints: chain_latencies,
            external_services,
        });
    }
    Ok(out)
}

pub fn parse_infrastructure_file(text: &str) -> Result<Infrastructure, ParseError> {
    parse_infrastructure_file_named("<input>", text)
}

pub fn parse_infrastructure_file_named(file: &str, text: &str) -> Result<Infrastructure, ParseError> {
    const SCHEMA: &[(&str, usize)] = &[("node", 4), ("link", 4)];

    enum Variable {
        Node(NodeId, Vec<(f64, NodeScenario)>),
        Link(NodeId, NodeId, Vec<(f64, LinkScenario)>),
    }

    let mut parser = Parser::new(file, text)?;
    let mut infra = Infrastructure::default();
    let mut first_seen: HashMap<String, Span> = HashMap::new();

    while let Some(clause) = parser.clause()? {
        let rd = Reader { parser: &parser };
        let single = clause.alternatives.len() == 1;
        let mut var: Option<Variable> = None;

        for alt in &clause.alternatives {
            let prob = match alt.prob {
                Some((p, span)) => {
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(rd.err(span, format!("probability {p} outside (0, 1]")));
                    }
                    p
                }
                None if single => 1.0,
                None => {
                    return Err(rd.err(alt.term.span, "disjunct without a probability annotation"))
                }
            };
            let (name, args) = rd.fact(&alt.term, SCHEMA)?;
            match (name, &mut var) {
                ("node", None | Some(Variable::Node(..))) => {
                    let id = NodeId::new(rd.ident(&args[0])?);
                    let hw_caps = rd.number(&args[1])?;
                    let scenario = NodeScenario {
                        hw_caps,
                        iot_caps: rd.ident_set(&args[2])?,
                        sec_caps: rd.ident_set(&args[3])?,
                    };
                    match &mut var {
                        None => var = Some(Variable::Node(id, vec![(prob, scenario)])),
                        Some(Variable::Node(prev, scenarios)) if *prev == id => {
                            scenarios.push((prob, scenario))
                        }
                        _ => {
                            return Err(rd.err(
                                alt.term.span,
                                "all disjuncts of a clause must describe the same node",
                            ))
                        }
                    }
                }
                ("link", None | Some(Variable::Link(..))) => {
                    let src = NodeId::new(rd.ident(&args[0])?);
                    let dst = NodeId::new(rd.ident(&args[1])?);
                    let scenario = LinkScenario {
                        latency: rd.number(&args[2])?,
                        bandwidth: rd.number(&args[3])?,
                    };
                    match &mut var {
                        None => var = Some(Variable::Link(src, dst, vec![(prob, scenario)])),
                        Some(Variable::Link(s, d, scenarios)) if *s == src && *d == dst => {
                            scenarios.push((prob, scenario))
                        }
                        _ => {
                            return Err(rd.err(
                                alt.term.span,
                                "all disjuncts of a clause must describe the same link",
                            ))
                        }
                    }
                }
                _ => {
                    return Err(rd.err(
                        alt.term.span,
                        "a disjunction cannot mix node and link facts",
                    ))
                }
            }
        }

        match var.expect("clause has at least one alternative") {
            Variable::Node(id, scenarios) => {
                let key = format!("node {id}");
                if let Some(prev) = first_seen.get(&key) {
                    return Err(rd.err(
                        clause.span,
                        format!("{key} already declared at line {}", prev.start.line),
                    ));
                }
                first_seen.insert(key, clause.span);
                infra
                    .nodes
                    .insert(id.clone(), NodeProfile { id, scenarios });
            }
            Variable::Link(src, dst, scenarios) => {
                let key = format!("link ({src}, {dst})");
                if let Some(prev) = first_seen.get(&key) {
                    return Err(rd.err(
                        clause.span,
                        format!("{key} already declared at line {}", prev.start.line),
                    ));
                }
                first_seen.insert(key, clause.span);
                infra.links.insert(
                    (src.clone(), dst.clone()),
                    LinkProfile {
                        src,
                        dst,
                        scenarios,
                    },
                );
            }
        }
    }
    Ok(infra)
}

fn num(n: f64) -> String {
    if n == f64::INFINITY {
        "inf".into()
    } else {
        format!("{n}")
    }
}

fn list<I, S>(items: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let items: Vec<String> = items.into_iter().map(|s| s.as_ref().to_owned()).collect();
    format!("[{}]", items.join(", "))
}

pub fn render_policy(p: &SecurityPolicy) -> String {
    match p {
        SecurityPolicy::Atom(a) => a.clone(),
        SecurityPolicy::All(v) => list(v),
        SecurityPolicy::And(a, b) => format!("and({}, {})", render_policy(a), render_policy(b)),
        SecurityPolicy::Or(a, b) => format!("or({}, {})", render_policy(a), render_policy(b)),
    }
}

/// Renders chains as a fact file. Shared services and flows are written once.
pub fn render_chains(chains: &[ChainSpec]) -> String {
    let mut out = String::new();
    let mut written_services = HashSet::new();
    let mut written_flows = HashSet::new();
    let mut written_latencies = Vec::new();
    for chain in chains {
        let ids = chain.services.iter().map(|s| s.id.as_str());
        let _ = writeln!(out, "chain({}, {}).", chain.id, list(ids));
        for s in chain.services.iter().chain(chain.external_services.iter()) {
            if written_services.insert(s.id.clone()) {
                let _ = writeln!(
                    out,
                    "service({}, {}, {}, {}, {}).",
                    s.id,
                    num(s.tproc),
                    num(s.hw_reqs),
                    list(&s.iot_reqs),
                    render_policy(&s.sec_policy)
                );
            }
        }
        for f in &chain.flows {
            if written_flows.insert(f.pair()) {
                let _ = writeln!(out, "flow({}, {}, {}).", f.src, f.dst, num(f.bandwidth));
            }
        }
        for lc in &chain.latency_constraints {
            if !written_latencies.contains(lc) {
                written_latencies.push(lc.clone());
                let path = lc.path.iter().map(|s| s.as_str());
                let _ = writeln!(out, "maxLatency({}, {}).", list(path), num(lc.max_latency));
            }
        }
    }
    out
}

pub fn render_infrastructure(infra: &Infrastructure) -> String {
    fn disjunction<T>(out: &mut String, scenarios: &[(f64, T)], fact: impl Fn(&T) -> String) {
        let deterministic = scenarios.len() == 1 && scenarios[0].0 == 1.0;
        let parts: Vec<String> = scenarios
            .iter()
            .map(|(p, s)| {
                if deterministic {
                    fact(s)
                } else {
                    format!("{}::{}", num(*p), fact(s))
                }
            })
            .collect();
        let _ = writeln!(out, "{}.", parts.join(";\n    "));
    }

    let mut out = String::new();
    for node in infra.nodes.values() {
        disjunction(&mut out, &node.scenarios, |s| {
            format!(
                "node({}, {}, {}, {})",
                node.id,
                num(s.hw_caps),
                list(&s.iot_caps),
                list(&s.sec_caps)
            )
        });
    }
    for link in infra.links.values() {
        disjunction(&mut out, &link.scenarios, |s| {
            format!(
                "link({}, {}, {}, {})",
                link.src,
                link.dst,
                num(s.latency),
                num(s.bandwidth)
            )
        });
    }
    out
}
