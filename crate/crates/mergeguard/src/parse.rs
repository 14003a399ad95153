//! Concrete syntax for the mini-language.
//!
//! ```text
//! program := stmt*
//! stmt    := "skip" ";"
//!          | ID ":=" expr ";"
//!          | ID "[" expr "]" ":=" expr ";"
//!          | "if" "(" pred ")" "{" program "}" "else" "{" program "}"
//!          | "while" "(" pred ")" "{" program "}"
//! expr    := term (("+"|"-") term)*
//! term    := factor ("*" factor)*
//! factor  := INT | ID | ID "[" expr "]" | "(" expr ")" | "-" factor
//! pred    := conj ("||" conj)*
//! conj    := neg ("&&" neg)*
//! neg     := "!" neg | "(" pred ")" | expr CMP expr | "true" | "false"
//! CMP     := "==" | "!=" | "<" | "<=" | ">" | ">="
//! ```
//!
//! Braces and the else branch are mandatory; statements end with `;`;
//! `//` comments run to end of line. `out` is reserved for the output array
//! and cannot be used as a scalar. [`parse_with_holes`] additionally accepts
//! the hole marker `<?HOLE?>` as a statement (trailing `;` optional).

use crate::ast::*;
use num_bigint::BigInt;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Hole,
    KwSkip,
    KwIf,
    KwElse,
    KwWhile,
    KwTrue,
    KwFalse,
    Assign, // :=
    Semi,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    AndAnd,
    OrOr,
    Bang,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(x) => return write!(f, "identifier `{x}`"),
            Tok::Int(n) => return write!(f, "integer `{n}`"),
            Tok::Hole => "<?HOLE?>",
            Tok::KwSkip => "`skip`",
            Tok::KwIf => "`if`",
            Tok::KwElse => "`else`",
            Tok::KwWhile => "`while`",
            Tok::KwTrue => "`true`",
            Tok::KwFalse => "`false`",
            Tok::Assign => "`:=`",
            Tok::Semi => "`;`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Bang => "`!`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

type Spanned = (Tok, usize, usize);

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn error(&self, expected: &str, found: String) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            expected: vec![expected.to_string()],
            found,
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_ascii_whitespace() {
                    self.bump();
                } else if c == b'/' && self.peek2() == Some(b'/') {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let c = match self.peek() {
                None => {
                    out.push((Tok::Eof, line, col));
                    return Ok(out);
                }
                Some(c) => c,
            };
            let tok = match c {
                b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_')
                    {
                        self.bump();
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    match word {
                        "skip" => Tok::KwSkip,
                        "if" => Tok::KwIf,
                        "else" => Tok::KwElse,
                        "while" => Tok::KwWhile,
                        "true" => Tok::KwTrue,
                        "false" => Tok::KwFalse,
                        _ => Tok::Ident(word.to_string()),
                    }
                }
                b'0'..=b'9' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.bump();
                    }
                    let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    Tok::Int(digits.parse().unwrap())
                }
                b'<' => {
                    // `<?HOLE?>` or a comparison.
                    if self.src[self.pos..].starts_with(b"<?HOLE?>") {
                        for _ in 0.."<?HOLE?>".len() {
                            self.bump();
                        }
                        Tok::Hole
                    } else {
                        self.bump();
                        if self.peek() == Some(b'=') {
                            self.bump();
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::EqEq
                    } else {
                        return Err(self.error("`==`", "`=`".to_string()));
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::NotEq
                    } else {
                        Tok::Bang
                    }
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Assign
                    } else {
                        return Err(self.error("`:=`", "`:`".to_string()));
                    }
                }
                b'&' => {
                    self.bump();
                    if self.peek() == Some(b'&') {
                        self.bump();
                        Tok::AndAnd
                    } else {
                        return Err(self.error("`&&`", "`&`".to_string()));
                    }
                }
                b'|' => {
                    self.bump();
                    if self.peek() == Some(b'|') {
                        self.bump();
                        Tok::OrOr
                    } else {
                        return Err(self.error("`||`", "`|`".to_string()));
                    }
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b'[' => {
                    self.bump();
                    Tok::LBracket
                }
                b']' => {
                    self.bump();
                    Tok::RBracket
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                other => {
                    return Err(self.error("a token", format!("`{}`", other as char)));
                }
            };
            out.push((tok, line, col));
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    allow_holes: bool,
}

impl Parser {
    fn cur(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        let (tok, line, col) = &self.toks[self.pos];
        ParseError {
            line: *line,
            col: *col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.to_string(),
        }
    }

    fn eat(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.cur() == t {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&[what]))
        }
    }

    fn program(&mut self, stop_at_brace: bool) -> Result<HStmt, ParseError> {
        let mut stmts = Vec::new();
        loop {
            match self.cur() {
                Tok::Eof => break,
                Tok::RBrace if stop_at_brace => break,
                _ => stmts.push(self.stmt()?),
            }
        }
        Ok(seq_of_h(stmts))
    }

    fn stmt(&mut self) -> Result<HStmt, ParseError> {
        match self.cur().clone() {
            Tok::Hole if self.allow_holes => {
                self.pos += 1;
                if *self.cur() == Tok::Semi {
                    self.pos += 1;
                }
                Ok(HStmt::Hole)
            }
            Tok::KwSkip => {
                self.pos += 1;
                self.eat(Tok::Semi, "`;`")?;
                Ok(HStmt::skip())
            }
            Tok::Ident(x) => {
                self.pos += 1;
                if *self.cur() == Tok::LBracket {
                    self.pos += 1;
                    let idx = self.expr()?;
                    self.eat(Tok::RBracket, "`]`")?;
                    self.eat(Tok::Assign, "`:=`")?;
                    let rhs = self.expr()?;
                    self.eat(Tok::Semi, "`;`")?;
                    Ok(HStmt::Atom(Atom::ArrayAssign(x, idx, rhs)))
                } else {
                    if x == "out" {
                        return Err(self.err(&["`[` (`out` is usable only as an array)"]));
                    }
                    self.eat(Tok::Assign, "`:=`")?;
                    let rhs = self.expr()?;
                    self.eat(Tok::Semi, "`;`")?;
                    Ok(HStmt::Atom(Atom::Assign(x, rhs)))
                }
            }
            Tok::KwIf => {
                self.pos += 1;
                self.eat(Tok::LParen, "`(`")?;
                let cond = self.pred()?;
                self.eat(Tok::RParen, "`)`")?;
                self.eat(Tok::LBrace, "`{`")?;
                let then = self.program(true)?;
                self.eat(Tok::RBrace, "`}`")?;
                self.eat(Tok::KwElse, "`else`")?;
                self.eat(Tok::LBrace, "`{`")?;
                let els = self.program(true)?;
                self.eat(Tok::RBrace, "`}`")?;
                Ok(HStmt::If(cond, Box::new(then), Box::new(els)))
            }
            Tok::KwWhile => {
                self.pos += 1;
                self.eat(Tok::LParen, "`(`")?;
                let cond = self.pred()?;
                self.eat(Tok::RParen, "`)`")?;
                self.eat(Tok::LBrace, "`{`")?;
                let body = self.program(true)?;
                self.eat(Tok::RBrace, "`}`")?;
                Ok(HStmt::While(cond, Box::new(body)))
            }
            _ => Err(self.err(&["a statement"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.cur() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while *self.cur() == Tok::Star {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.cur().clone() {
            Tok::Int(n) => {
                self.pos += 1;
                Ok(Expr::Int(n))
            }
            Tok::Ident(x) => {
                self.pos += 1;
                if *self.cur() == Tok::LBracket {
                    self.pos += 1;
                    let idx = self.expr()?;
                    self.eat(Tok::RBracket, "`]`")?;
                    Ok(Expr::ArrayRead(x, Box::new(idx)))
                } else if x == "out" {
                    Err(self.err(&["`[` (`out` is usable only as an array)"]))
                } else {
                    Ok(Expr::Var(x))
                }
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Minus => {
                self.pos += 1;
                let e = self.factor()?;
                // Fold constants so `-3` is a literal, not 0 - 3.
                Ok(match e {
                    Expr::Int(n) => Expr::Int(-n),
                    other => Expr::Bin(
                        BinOp::Sub,
                        Box::new(Expr::Int(BigInt::from(0))),
                        Box::new(other),
                    ),
                })
            }
            _ => Err(self.err(&["an expression"])),
        }
    }

    fn pred(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.conj()?;
        while *self.cur() == Tok::OrOr {
            self.pos += 1;
            let rhs = self.conj()?;
            lhs = Pred::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.neg()?;
        while *self.cur() == Tok::AndAnd {
            self.pos += 1;
            let rhs = self.neg()?;
            lhs = Pred::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn neg(&mut self) -> Result<Pred, ParseError> {
        match self.cur() {
            Tok::Bang => {
                self.pos += 1;
                Ok(Pred::Not(Box::new(self.neg()?)))
            }
            Tok::KwTrue => {
                self.pos += 1;
                Ok(Pred::Bool(true))
            }
            Tok::KwFalse => {
                self.pos += 1;
                Ok(Pred::Bool(false))
            }
            Tok::LParen => {
                // Either a parenthesized predicate or a parenthesized
                // expression starting a comparison; backtrack on failure.
                let save = self.pos;
                self.pos += 1;
                if let Ok(p) = self.pred() {
                    if *self.cur() == Tok::RParen {
                        // `(pred)` only if what follows cannot continue a
                        // comparison; `(e1) < e2` needs the expression read.
                        let after = &self.toks[self.pos + 1].0;
                        if !matches!(
                            after,
                            Tok::EqEq
                                | Tok::NotEq
                                | Tok::Lt
                                | Tok::Le
                                | Tok::Gt
                                | Tok::Ge
                                | Tok::Plus
                                | Tok::Minus
                                | Tok::Star
                        ) {
                            self.pos += 1;
                            return Ok(p);
                        }
                    }
                }
                self.pos = save;
                self.cmp()
            }
            _ => self.cmp(),
        }
    }

    fn cmp(&mut self) -> Result<Pred, ParseError> {
        let lhs = self.expr()?;
        let op = match self.cur() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(self.err(&["a comparison operator"])),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(Pred::Cmp(op, lhs, rhs))
    }
}

fn parse_inner(text: &str, allow_holes: bool) -> Result<HStmt, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        allow_holes,
    };
    let prog = p.program(false)?;
    p.eat(Tok::Eof, "end of input")?;
    Ok(prog)
}

/// Parse a hole-free program; an empty program parses to `skip`.
pub fn parse(text: &str) -> Result<Stmt, ParseError> {
    let h = parse_inner(text, false)?;
    Ok(h.try_into().expect("holes were rejected by the lexer path"))
}

/// Parse a program that may contain `<?HOLE?>` markers.
pub fn parse_with_holes(text: &str) -> Result<HStmt, ParseError> {
    parse_inner(text, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_ast_shape() {
        let s = parse("x := x + 1;").unwrap();
        assert_eq!(
            s,
            Stmt::Atom(Atom::Assign(
                "x".into(),
                Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::Var("x".into())),
                    Box::new(Expr::Int(BigInt::from(1)))
                )
            ))
        );
    }

    #[test]
    fn branching_program() {
        let s = parse("if (x > 0) { y := 1; } else { y := 0; } out[0] := y;").unwrap();
        match s {
            Stmt::Seq(a, b) => {
                assert!(matches!(*a, Stmt::If(..)));
                assert!(matches!(*b, Stmt::Atom(Atom::ArrayAssign(..))));
            }
            other => panic!("expected Seq, got {other:?}"),
        }
    }

    #[test]
    fn empty_program_is_skip() {
        assert_eq!(parse("").unwrap(), Stmt::skip());
        assert_eq!(parse("// just a comment\n").unwrap(), Stmt::skip());
    }

    #[test]
    fn dangling_comparison_is_an_error() {
        let e = parse("while (x <").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn out_is_array_only() {
        assert!(parse("out := 1;").is_err());
        assert!(parse("x := out;").is_err());
        assert!(parse("out[0] := 1; x := out[0];").is_ok());
    }

    #[test]
    fn holes_require_opt_in() {
        assert!(parse_with_holes("<?HOLE?>").is_ok());
        assert!(parse_with_holes("<?HOLE?>;").is_ok());
        assert!(parse("x := 1;").is_ok());
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(
            parse("x := -3;").unwrap(),
            Stmt::Atom(Atom::Assign("x".into(), Expr::Int(BigInt::from(-3))))
        );
    }

    #[test]
    fn boolean_connectives() {
        let s = parse("if (x > 0 && !(y == 1) || true) { skip; } else { skip; }");
        assert!(s.is_ok());
    }

    #[test]
    fn parenthesized_expression_in_comparison() {
        assert!(parse("if ((x + 1) * 2 > y) { skip; } else { skip; }").is_ok());
    }
}
