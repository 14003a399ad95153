//! Fuel-bounded reference interpreter.
//!
//! State is a finite map from (identifier, index) pairs to values; scalar
//! variables live at index 0. Reading an absent key yields the distinguished
//! uninitialized value ⊥, never an error. Arithmetic on ⊥ is ⊥; a comparison
//! involving exactly one ⊥ is false; `⊥ == ⊥` is true and `⊥ != ⊥` is false
//! (other comparisons of two ⊥ are false). Fuel is consumed once per
//! completed loop-body iteration, so straight-line code always terminates.

use crate::ast::*;
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Bottom,
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation {
    map: BTreeMap<(Ident, BigInt), Value>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn get(&self, var: &str, idx: &BigInt) -> Value {
        self.map
            .get(&(var.to_string(), idx.clone()))
            .cloned()
            .unwrap_or(Value::Bottom)
    }

    pub fn get_scalar(&self, var: &str) -> Value {
        self.get(var, &BigInt::zero())
    }

    pub fn set(&mut self, var: &str, idx: BigInt, v: Value) {
        self.map.insert((var.to_string(), idx), v);
    }

    pub fn set_scalar(&mut self, var: &str, v: Value) {
        self.set(var, BigInt::zero(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Ident, BigInt), &Value)> {
        self.map.iter()
    }

    /// Indices at which `var` has an explicit entry.
    pub fn indices_of(&self, var: &str) -> Vec<BigInt> {
        self.map
            .keys()
            .filter(|(v, _)| v == var)
            .map(|(_, i)| i.clone())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuelExhausted;

pub fn eval_expr(sigma: &Valuation, e: &Expr) -> Value {
    match e {
        Expr::Int(n) => Value::Int(n.clone()),
        Expr::Var(x) => sigma.get_scalar(x),
        Expr::ArrayRead(a, i) => match eval_expr(sigma, i) {
            Value::Int(idx) => sigma.get(a, &idx),
            Value::Bottom => Value::Bottom,
        },
        Expr::Bin(op, l, r) => match (eval_expr(sigma, l), eval_expr(sigma, r)) {
            (Value::Int(a), Value::Int(b)) => Value::Int(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
            }),
            _ => Value::Bottom,
        },
    }
}

pub fn eval_cmp(op: CmpOp, l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        },
        (Value::Bottom, Value::Bottom) => op == CmpOp::Eq,
        _ => false,
    }
}

pub fn eval_pred(sigma: &Valuation, p: &Pred) -> bool {
    match p {
        Pred::Bool(b) => *b,
        Pred::Cmp(op, l, r) => eval_cmp(*op, &eval_expr(sigma, l), &eval_expr(sigma, r)),
        Pred::And(a, b) => eval_pred(sigma, a) && eval_pred(sigma, b),
        Pred::Or(a, b) => eval_pred(sigma, a) || eval_pred(sigma, b),
        Pred::Not(a) => !eval_pred(sigma, a),
    }
}

/// Run `program` from `input`; `fuel` bounds the total number of completed
/// loop iterations across the whole run.
pub fn interpret(program: &Stmt, input: &Valuation, fuel: u64) -> Result<Valuation, FuelExhausted> {
    let mut sigma = input.clone();
    let mut fuel = fuel;
    run(program, &mut sigma, &mut fuel)?;
    Ok(sigma)
}

fn run(s: &Stmt, sigma: &mut Valuation, fuel: &mut u64) -> Result<(), FuelExhausted> {
    match s {
        Stmt::Atom(Atom::Skip) => Ok(()),
        Stmt::Atom(Atom::Assign(x, e)) => {
            let v = eval_expr(sigma, e);
            sigma.set_scalar(x, v);
            Ok(())
        }
        Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
            // A ⊥-valued index leaves the array unchanged: there is no cell
            // to write, mirroring the verifier's treatment of the store as a
            // no-op on an unconstrained location being irrelevant to output
            // comparisons that agree across versions.
            if let Value::Int(idx) = eval_expr(sigma, i) {
                let v = eval_expr(sigma, e);
                sigma.set(a, idx, v);
            }
            Ok(())
        }
        Stmt::Seq(a, b) => {
            run(a, sigma, fuel)?;
            run(b, sigma, fuel)
        }
        Stmt::If(c, t, e) => {
            if eval_pred(sigma, c) {
                run(t, sigma, fuel)
            } else {
                run(e, sigma, fuel)
            }
        }
        Stmt::While(c, b) => {
            while eval_pred(sigma, c) {
                run(b, sigma, fuel)?;
                if *fuel == 0 {
                    return Err(FuelExhausted);
                }
                *fuel -= 1;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use num_bigint::BigInt;

    fn sigma(pairs: &[(&str, i64)]) -> Valuation {
        let mut v = Valuation::new();
        for (x, n) in pairs {
            v.set_scalar(x, Value::int(*n));
        }
        v
    }

    #[test]
    fn straight_line_and_branching() {
        let p = parse("x := 1; if (y > 0) { z := 1; x := 2; } else { z := 2; }").unwrap();
        let out = interpret(&p, &sigma(&[("x", 0), ("y", 1), ("z", 0)]), 100).unwrap();
        assert_eq!(out.get_scalar("x"), Value::int(2));
        assert_eq!(out.get_scalar("y"), Value::int(1));
        assert_eq!(out.get_scalar("z"), Value::int(1));
    }

    #[test]
    fn skip_preserves_state() {
        let s = sigma(&[("x", 5)]);
        assert_eq!(interpret(&Stmt::skip(), &s, 1).unwrap(), s);
    }

    #[test]
    fn infinite_loop_exhausts_fuel() {
        let p = parse("while (0 < 1) { skip; }").unwrap();
        assert_eq!(interpret(&p, &Valuation::new(), 10), Err(FuelExhausted));
    }

    #[test]
    fn fuel_monotonicity() {
        let p = parse("i := 0; while (i < 5) { i := i + 1; }").unwrap();
        let at_5 = interpret(&p, &Valuation::new(), 5).unwrap();
        for fuel in [6, 10, 1000] {
            assert_eq!(interpret(&p, &Valuation::new(), fuel).unwrap(), at_5);
        }
        assert_eq!(interpret(&p, &Valuation::new(), 4), Err(FuelExhausted));
    }

    #[test]
    fn uninitialized_read_binds_bottom() {
        let p = parse("y := a[5];").unwrap();
        let out = interpret(&p, &Valuation::new(), 10).unwrap();
        assert_eq!(out.get_scalar("y"), Value::Bottom);
    }

    #[test]
    fn bottom_semantics_in_predicates() {
        let bot = Value::Bottom;
        let one = Value::int(1);
        assert!(eval_cmp(CmpOp::Eq, &bot, &bot));
        assert!(!eval_cmp(CmpOp::Ne, &bot, &bot));
        assert!(!eval_cmp(CmpOp::Lt, &bot, &bot));
        assert!(!eval_cmp(CmpOp::Eq, &bot, &one));
        assert!(!eval_cmp(CmpOp::Lt, &bot, &one));
        assert!(!eval_cmp(CmpOp::Ge, &one, &bot));
    }

    #[test]
    fn arithmetic_on_bottom_is_bottom() {
        let p = parse("y := a[0] + 1;").unwrap();
        let out = interpret(&p, &Valuation::new(), 10).unwrap();
        assert_eq!(out.get_scalar("y"), Value::Bottom);
    }

    #[test]
    fn array_roundtrip() {
        let p = parse("a[2] := 7; y := a[2] * 3;").unwrap();
        let out = interpret(&p, &Valuation::new(), 10).unwrap();
        assert_eq!(out.get("a", &BigInt::from(2)), Value::int(7));
        assert_eq!(out.get_scalar("y"), Value::int(21));
    }
}
