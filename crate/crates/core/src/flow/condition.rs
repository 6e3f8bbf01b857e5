//! Branch conditions: `not slots.x`, `slots.a > 100 and slots.b`, ...
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! or      := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | primary
//! primary := "(" or ")" | "slots." IDENT [op literal]
//! op      := "=" | "==" | "!=" | "<" | "<=" | ">" | ">="
//! literal := number | "quoted" | 'quoted' | true | false | null
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Slot(String),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Compare {
        slot: String,
        op: CompareOp,
        value: Option<Value>,
    },
}

/// Read access to slot values for condition evaluation.
pub trait SlotLookup {
    fn lookup(&self, slot: &str) -> Option<&Value>;
}

impl SlotLookup for BTreeMap<String, Option<Value>> {
    fn lookup(&self, slot: &str) -> Option<&Value> {
        self.get(slot).and_then(Option::as_ref)
    }
}

/// Result of evaluating a condition. Evaluation never fails; type
/// mismatches evaluate to `false` and are reported as warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub value: bool,
    pub warnings: Vec<String>,
}

impl Condition {
    pub fn parse(text: &str) -> Result<Condition, String> {
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.or_expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(format!(
                "unexpected `{}` in condition",
                parser.tokens[parser.pos]
            ));
        }
        Ok(expr)
    }

    pub fn evaluate(&self, slots: &dyn SlotLookup) -> Evaluation {
        let mut warnings = Vec::new();
        let value = self.eval_into(slots, &mut warnings);
        Evaluation { value, warnings }
    }

    fn eval_into(&self, slots: &dyn SlotLookup, warnings: &mut Vec<String>) -> bool {
        match self {
            Condition::Slot(id) => slots.lookup(id).is_some_and(Value::truthy),
            Condition::Not(inner) => !inner.eval_into(slots, warnings),
            // both sides are evaluated so warnings do not depend on short-circuiting
            Condition::And(a, b) => {
                let l = a.eval_into(slots, warnings);
                let r = b.eval_into(slots, warnings);
                l && r
            }
            Condition::Or(a, b) => {
                let l = a.eval_into(slots, warnings);
                let r = b.eval_into(slots, warnings);
                l || r
            }
            Condition::Compare { slot, op, value } => {
                compare(slot, slots.lookup(slot), *op, value.as_ref(), warnings)
            }
        }
    }

    /// Every slot id referenced by the condition, in order of appearance.
    pub fn slot_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Condition::Slot(id) | Condition::Compare { slot: id, .. } => out.push(id),
            Condition::Not(inner) => inner.collect_refs(out),
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 1,
            Condition::And(..) => 2,
            Condition::Not(_) => 3,
            Condition::Slot(_) | Condition::Compare { .. } => 4,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Condition::Slot(id) => write!(f, "slots.{id}")?,
            Condition::Compare { slot, op, value } => {
                write!(f, "slots.{slot} {} {}", op.symbol(), Literal(value.as_ref()))?
            }
            Condition::Not(inner) => {
                f.write_str("not ")?;
                inner.write_at(f, 3)?;
            }
            Condition::And(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" and ")?;
                b.write_at(f, 3)?;
            }
            Condition::Or(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(" or ")?;
                b.write_at(f, 2)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

struct Literal<'a>(Option<&'a Value>);

impl fmt::Display for Literal<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("null"),
            Some(Value::Bool(b)) => write!(f, "{b}"),
            Some(Value::Float(x)) => write!(f, "{x:?}"),
            Some(Value::Text(s)) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

fn compare(
    slot: &str,
    actual: Option<&Value>,
    op: CompareOp,
    expected: Option<&Value>,
    warnings: &mut Vec<String>,
) -> bool {
    use std::cmp::Ordering;
    let ordering = match (actual, expected) {
        (None, None) => Some(Ordering::Equal),
        (None, Some(_)) | (Some(_), None) => {
            return match op {
                CompareOp::Eq => false,
                CompareOp::Ne => true,
                _ => false,
            };
        }
        (Some(Value::Float(a)), Some(Value::Float(b))) => a.partial_cmp(b),
        (Some(Value::Text(a)), Some(Value::Text(b))) => Some(a.cmp(b)),
        (Some(Value::Bool(a)), Some(Value::Bool(b))) => {
            if matches!(op, CompareOp::Eq | CompareOp::Ne) {
                Some(a.cmp(b))
            } else {
                warnings.push(format!("cannot order boolean slot `{slot}`"));
                return false;
            }
        }
        (Some(a), Some(b)) => {
            warnings.push(format!(
                "cannot compare slot `{slot}` of type {} with {} literal",
                a.type_name(),
                b.type_name()
            ));
            return false;
        }
    };
    let Some(ordering) = ordering else {
        return false;
    };
    match op {
        CompareOp::Eq => ordering == Ordering::Equal,
        CompareOp::Ne => ordering != Ordering::Equal,
        CompareOp::Lt => ordering == Ordering::Less,
        CompareOp::Le => ordering != Ordering::Greater,
        CompareOp::Gt => ordering == Ordering::Greater,
        CompareOp::Ge => ordering != Ordering::Less,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    SlotRef(String),
    Op(CompareOp),
    Number(f64),
    Str(String),
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => f.write_str(s),
            Token::SlotRef(s) => write!(f, "slots.{s}"),
            Token::Op(op) => f.write_str(op.symbol()),
            Token::Number(n) => write!(f, "{n}"),
            Token::Str(s) => write!(f, "\"{s}\""),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '=' | '!' | '<' | '>' => {
                let next = chars.get(i + 1).copied();
                let (op, width) = match (c, next) {
                    ('=', Some('=')) => (CompareOp::Eq, 2),
                    ('=', _) => (CompareOp::Eq, 1),
                    ('!', Some('=')) => (CompareOp::Ne, 2),
                    ('<', Some('=')) => (CompareOp::Le, 2),
                    ('<', _) => (CompareOp::Lt, 1),
                    ('>', Some('=')) => (CompareOp::Ge, 2),
                    ('>', _) => (CompareOp::Gt, 1),
                    _ => return Err("expected `!=`".to_string()),
                };
                tokens.push(Token::Op(op));
                i += width;
            }
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err("unterminated string literal".to_string()),
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some(&other) => s.push(other),
                                None => return Err("unterminated string literal".to_string()),
                            }
                            i += 2;
                        }
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                tokens.push(Token::Str(s));
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'))
                || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) =>
            {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let raw: String = chars[start..i].iter().collect();
                let n: f64 = raw
                    .parse()
                    .map_err(|_| format!("invalid number `{raw}`"))?;
                tokens.push(Token::Number(n));
            }
            c if is_ident_char(c) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if word == "slots" && chars.get(i) == Some(&'.') {
                    i += 1;
                    let s = i;
                    while i < chars.len() && is_ident_char(chars[i]) {
                        i += 1;
                    }
                    if s == i {
                        return Err("expected slot name after `slots.`".to_string());
                    }
                    tokens.push(Token::SlotRef(chars[s..i].iter().collect()));
                } else {
                    tokens.push(Token::Ident(word));
                }
            }
            other => return Err(format!("unexpected character `{other}` in condition")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Token::Ident(w)) if w == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or_expr(&mut self) -> Result<Condition, String> {
        let mut left = self.and_expr()?;
        while self.keyword("or") {
            let right = self.and_expr()?;
            left = Condition::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Condition, String> {
        let mut left = self.unary()?;
        while self.keyword("and") {
            let right = self.unary()?;
            left = Condition::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Condition, String> {
        if self.keyword("not") {
            return Ok(Condition::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Condition, String> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.or_expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err("expected `)`".to_string());
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::SlotRef(slot)) => {
                self.pos += 1;
                if let Some(Token::Op(op)) = self.peek().cloned() {
                    self.pos += 1;
                    let value = self.literal()?;
                    Ok(Condition::Compare { slot, op, value })
                } else {
                    Ok(Condition::Slot(slot))
                }
            }
            Some(other) => Err(format!("expected `slots.<name>`, found `{other}`")),
            None => Err("unexpected end of condition".to_string()),
        }
    }

    fn literal(&mut self) -> Result<Option<Value>, String> {
        let token = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| "expected a literal after comparison operator".to_string())?;
        self.pos += 1;
        match token {
            Token::Number(n) => Ok(Some(Value::Float(n))),
            Token::Str(s) => Ok(Some(Value::Text(s))),
            Token::Ident(w) => match w.as_str() {
                "true" | "True" => Ok(Some(Value::Bool(true))),
                "false" | "False" => Ok(Some(Value::Bool(false))),
                "null" | "None" => Ok(None),
                _ => Err(format!("expected a literal, found `{w}`")),
            },
            other => Err(format!("expected a literal, found `{other}`")),
        }
    }
}
