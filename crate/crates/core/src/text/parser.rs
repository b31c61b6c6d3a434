use super::lexer::{lex, Spanned, Tok};
use crate::error::{Error, Result};
use crate::function::{AnnotationFn, FnKind, FunctionRegistry};
use crate::model::{Aggregate, AnnExpr, Atom, BodyAnn, BodyLit, NeighborTemplate, Program, Rule, Term, VcRule};

pub(crate) fn is_var_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

/// Parses a .cgap program. Exactly one vertex choice rule is required.
pub fn parse_program(src: &str) -> Result<Program> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut functions = FunctionRegistry::new();
    let (mut rules, mut templates, mut vc) = (Vec::new(), Vec::new(), None);
    while p.peek() != &Tok::Eof {
        let (line, col) = p.here();
        match p.statement()? {
            Stmt::Function(f) => {
                functions.register(f).map_err(|e| at(line, col, e))?;
            }
            Stmt::Rule(r) => rules.push(r),
            Stmt::Template(t) => templates.push(t),
            Stmt::Choice(v) => {
                if vc.is_some() {
                    return Err(Error::Syntax { line, col, msg: "a second vertex choice rule".into() });
                }
                vc = Some(v);
            }
        }
    }
    let vc = vc.ok_or_else(|| Error::Invalid("missing vertex choice rule".into()))?;
    Program::new(functions, rules, templates, vc)
}

fn at(line: usize, col: usize, e: Error) -> Error {
    match e {
        Error::Invalid(msg) => Error::Syntax { line, col, msg },
        e => e,
    }
}

enum Stmt {
    Function(AnnotationFn),
    Rule(Rule),
    Template(NeighborTemplate),
    Choice(VcRule),
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Syntax { line, col, msg: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T> {
        self.fail(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&t.describe())
        }
    }

    fn eat(&mut self, t: Tok) -> bool {
        if *self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek().clone() {
            Tok::Number(s) => match s.parse::<f64>() {
                Ok(x) if x.is_finite() => {
                    self.bump();
                    Ok(x)
                }
                _ => self.fail(format!("number `{s}` out of range")),
            },
            _ => self.unexpected("a number"),
        }
    }

    fn statement(&mut self) -> Result<Stmt> {
        if let Tok::Directive(d) = self.peek().clone() {
            if d != "function" {
                return self.fail(format!("unknown directive `#{d}`"));
            }
            self.bump();
            return self.function().map(Stmt::Function);
        }
        let first = self.atom()?;
        match self.peek() {
            Tok::Comma | Tok::Choice => self.choice(first).map(Stmt::Choice),
            Tok::Colon => {
                self.bump();
                let agg = match (self.peek(), self.peek_at(1)) {
                    (Tok::Ident(a), Tok::LBrace) if a == "avg" => Some(Aggregate::Avg),
                    (Tok::Ident(a), Tok::LBrace) if a == "max" => Some(Aggregate::Max),
                    (Tok::Ident(a), Tok::LBrace) => return self.fail(format!("unknown aggregate `{a}`")),
                    _ => None,
                };
                match agg {
                    Some(agg) => self.template(first, agg).map(Stmt::Template),
                    None => self.rule(first).map(Stmt::Rule),
                }
            }
            _ => self.unexpected("`:`, `,` or `<~`"),
        }
    }

    fn function(&mut self) -> Result<AnnotationFn> {
        let (line, col) = self.here();
        let name = self.ident()?;
        let arity = match self.bump() {
            Tok::Star => None,
            Tok::Number(s) => match s.parse::<usize>() {
                Ok(n) => Some(n),
                Err(_) => return Err(Error::Syntax { line, col, msg: format!("bad arity `{s}`") }),
            },
            t => return Err(Error::Syntax { line, col, msg: format!("expected an arity or `*`, found {}", t.describe()) }),
        };
        let kind_name = self.ident()?;
        let mut params = Vec::new();
        if self.eat(Tok::LParen) {
            if !self.eat(Tok::RParen) {
                loop {
                    params.push(self.number()?);
                    if self.eat(Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma)?;
                }
            }
        }
        if !self.eat(Tok::Dot) && *self.peek() != Tok::Eof && self.toks[self.pos].line == line {
            return self.unexpected("end of declaration");
        }
        let bad = |m: &str| Err(Error::Syntax { line, col, msg: m.to_string() });
        let kind = match (kind_name.as_str(), params.as_slice()) {
            ("linear", ps) => FnKind::Linear { coeffs: ps.to_vec() },
            ("max", []) => FnKind::Max,
            ("avg", []) => FnKind::Average,
            ("gmax", [t]) => FnKind::GatedMax { tau: *t },
            ("matchsum", [b, ws @ ..]) => FnKind::MatchSum { base: *b, weights: ws.to_vec() },
            ("max" | "avg" | "gmax" | "matchsum", _) => return bad(&format!("wrong parameters for `{kind_name}`")),
            _ => return bad(&format!("unknown function kind `{kind_name}`")),
        };
        AnnotationFn::new(name, arity, kind).map_err(|e| at(line, col, e))
    }

    fn term(&mut self) -> Result<Term> {
        let t = match self.peek().clone() {
            Tok::Ident(s) if is_var_name(&s) => Term::Var(s),
            Tok::Ident(s) | Tok::Number(s) | Tok::Str(s) => Term::Const(s),
            _ => return self.unexpected("a term"),
        };
        self.bump();
        Ok(t)
    }

    fn atom(&mut self) -> Result<Atom> {
        let pred = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.eat(Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(Atom::new(pred, args))
    }

    fn choice(&mut self, first: Atom) -> Result<VcRule> {
        let mut decisions = vec![first];
        while self.eat(Tok::Comma) {
            decisions.push(self.atom()?);
        }
        self.expect(Tok::Choice)?;
        let mut utilities = vec![self.atom()?];
        while self.eat(Tok::Comma) {
            utilities.push(self.atom()?);
        }
        self.expect(Tok::Dot)?;
        Ok(VcRule { decisions, utilities })
    }

    fn expr(&mut self) -> Result<AnnExpr> {
        match self.peek().clone() {
            Tok::Number(_) => Ok(AnnExpr::Const(self.number()?)),
            Tok::Ident(s) if is_var_name(&s) => {
                self.bump();
                Ok(AnnExpr::Var(s))
            }
            Tok::Ident(s) => {
                self.bump();
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if !self.eat(Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                Ok(AnnExpr::Apply(s, args))
            }
            _ => self.unexpected("an annotation"),
        }
    }

    fn rule(&mut self, head: Atom) -> Result<Rule> {
        let ann = self.expr()?;
        let mut body = Vec::new();
        if self.eat(Tok::Arrow) && *self.peek() != Tok::Dot {
            loop {
                let atom = self.atom()?;
                self.expect(Tok::Colon)?;
                let ann = match self.peek().clone() {
                    Tok::Ident(s) if is_var_name(&s) => {
                        self.bump();
                        BodyAnn::Var(s)
                    }
                    Tok::Number(_) => BodyAnn::Const(self.number()?),
                    _ => return self.unexpected("an annotation variable or constant"),
                };
                body.push(BodyLit { atom, ann });
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Rule { head, ann, body })
    }

    fn template(&mut self, head: Atom, agg: Aggregate) -> Result<NeighborTemplate> {
        self.bump();
        self.expect(Tok::LBrace)?;
        let var = self.ident()?;
        if !is_var_name(&var) {
            return self.fail("template value must be a variable");
        }
        self.expect(Tok::Pipe)?;
        let edge = self.atom()?;
        self.expect(Tok::Colon)?;
        let edge_ann = self.number()?;
        self.expect(Tok::Comma)?;
        let body = self.atom()?;
        self.expect(Tok::Colon)?;
        if self.ident()? != var {
            return self.fail(format!("template body must carry `{var}`"));
        }
        self.expect(Tok::RBrace)?;
        let mut gate = None;
        if matches!(self.peek(), Tok::Ident(s) if s == "if") {
            self.bump();
            if self.ident()? != "sum" {
                return self.fail("expected `sum`");
            }
            self.expect(Tok::Ge)?;
            gate = Some(self.number()?);
        }
        self.expect(Tok::Dot)?;
        Ok(NeighborTemplate { head, agg, var, edge, edge_ann, body, gate })
    }
}
