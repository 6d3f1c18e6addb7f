//! Gateway condition expressions.
//!
//! A small boolean language over process variables: literals (numbers,
//! booleans, quoted text), variable names, comparisons `> >= < <= == !=`,
//! and `and`, `or`, `not` with parentheses for grouping. Binding strength,
//! tightest first: `not`, comparisons, `and`, `or`. Comparisons do not chain.
//! There is no arithmetic.
//!
//! A Camunda-style `${ ... }` wrapper around the whole text is accepted.

mod eval;
mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::value::VariableMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Integer(i64),
    Decimal(f64),
    Boolean(bool),
    Text(String),
}

/// Expression tree. Parentheses only group; they leave no node behind.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Var(String),
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at column {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("condition must evaluate to a boolean, got {0}")]
    NotBoolean(String),
}

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_CMP: u8 = 3;
const PREC_UNARY: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        parser::parse(src)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => PREC_OR,
            Expr::And(..) => PREC_AND,
            Expr::Compare { .. } => PREC_CMP,
            Expr::Not(_) => PREC_UNARY,
            Expr::Literal(_) | Expr::Var(_) => PREC_ATOM,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Expr::Literal(Literal::Integer(i)) => write!(f, "{i}")?,
            Expr::Literal(Literal::Decimal(d)) => write!(f, "{d:?}")?,
            Expr::Literal(Literal::Boolean(b)) => write!(f, "{b}")?,
            Expr::Literal(Literal::Text(s)) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
            }
            Expr::Var(name) => f.write_str(name)?,
            Expr::Compare { op, lhs, rhs } => {
                lhs.write(f, PREC_UNARY)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write(f, PREC_UNARY)?;
            }
            Expr::Not(inner) => {
                f.write_str("not ")?;
                inner.write(f, PREC_UNARY)?;
            }
            Expr::And(l, r) => {
                l.write(f, PREC_AND)?;
                f.write_str(" and ")?;
                r.write(f, PREC_CMP)?;
            }
            Expr::Or(l, r) => {
                l.write(f, PREC_OR)?;
                f.write_str(" or ")?;
                r.write(f, PREC_AND)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Var(v) => {
                out.insert(v);
            }
            Expr::Compare { lhs, rhs, .. } | Expr::And(lhs, rhs) | Expr::Or(lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Not(inner) => inner.collect_vars(out),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, PREC_OR)
    }
}

/// A parsed condition together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionExpression {
    source: String,
    ast: Expr,
}

impl ConditionExpression {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let trimmed = text.trim();
        let inner = trimmed
            .strip_prefix("${")
            .and_then(|t| t.strip_suffix('}'))
            .unwrap_or(trimmed);
        Ok(ConditionExpression {
            source: trimmed.to_string(),
            ast: Expr::parse(inner)?,
        })
    }

    pub fn from_ast(ast: Expr) -> Self {
        ConditionExpression {
            source: ast.to_string(),
            ast,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.ast.collect_vars(&mut out);
        out
    }

    /// Evaluates to a boolean. Never modifies `vars`.
    pub fn evaluate(&self, vars: &VariableMap) -> Result<bool, ExprError> {
        eval::eval_bool(&self.ast, vars)
    }
}

impl fmt::Display for ConditionExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for ConditionExpression {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ConditionExpression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        ConditionExpression::parse(&text).map_err(serde::de::Error::custom)
    }
}

pub fn parse_expr(text: &str) -> Result<ConditionExpression, ExprError> {
    ConditionExpression::parse(text)
}

pub fn eval_expr(expr: &ConditionExpression, vars: &VariableMap) -> Result<bool, ExprError> {
    expr.evaluate(vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(n: &str) -> Box<Expr> {
        Box::new(Expr::Var(n.into()))
    }

    fn cmp(op: CmpOp, name: &str, lit: Literal) -> Expr {
        Expr::Compare {
            op,
            lhs: var(name),
            rhs: Box::new(Expr::Literal(lit)),
        }
    }

    #[test]
    fn heat_and_rain_triggers_parse() {
        let e = parse_expr("t_max > 35").unwrap();
        assert_eq!(*e.ast(), cmp(CmpOp::Gt, "t_max", Literal::Integer(35)));
        let e = parse_expr("precipitation_total > 6").unwrap();
        assert_eq!(*e.ast(), cmp(CmpOp::Gt, "precipitation_total", Literal::Integer(6)));
    }

    #[test]
    fn not_binds_tighter_than_and() {
        let e = Expr::parse("not (a and b)").unwrap();
        assert_eq!(e, Expr::Not(Box::new(Expr::And(var("a"), var("b")))));
        let e = Expr::parse("not a and b").unwrap();
        assert_eq!(e, Expr::And(Box::new(Expr::Not(var("a"))), var("b")));
        let e = Expr::parse("a or b and c").unwrap();
        assert_eq!(e, Expr::Or(var("a"), Box::new(Expr::And(var("b"), var("c")))));
    }

    #[test]
    fn chained_comparison_is_rejected() {
        let err = Expr::parse("a < b < c").unwrap_err();
        assert!(matches!(err, ExprError::Syntax { position: 7, .. }), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(Expr::parse("t_max >"), Err(ExprError::Syntax { position: 8, .. })));
        assert!(matches!(Expr::parse("(a and b"), Err(ExprError::Syntax { position: 9, .. })));
        assert!(matches!(Expr::parse("a = 1"), Err(ExprError::Syntax { position: 3, .. })));
        assert!(matches!(Expr::parse("t + 1"), Err(ExprError::Syntax { position: 3, .. })));
        assert!(matches!(Expr::parse(""), Err(ExprError::Syntax { position: 1, .. })));
    }

    #[test]
    fn camunda_wrapper_is_accepted() {
        let e = parse_expr("${t_max > 35}").unwrap();
        assert_eq!(e.source(), "${t_max > 35}");
        assert_eq!(e.ast().to_string(), "t_max > 35");
    }

    #[test]
    fn strict_inequality_at_thresholds() {
        let heat = parse_expr("t_max > 35").unwrap();
        let rain = parse_expr("precipitation_total > 6").unwrap();
        let vars = |t: f64, p: f64| VariableMap::new().with("t_max", t).with("precipitation_total", p);
        assert!(heat.evaluate(&vars(36.2, 0.0)).unwrap());
        assert!(!heat.evaluate(&vars(35.0, 0.0)).unwrap());
        assert!(!rain.evaluate(&vars(0.0, 6.0)).unwrap());
        assert!(rain.evaluate(&vars(0.0, 6.1)).unwrap());
    }

    #[test]
    fn boolean_equality() {
        let e = parse_expr("disease_warning == true").unwrap();
        assert!(e.evaluate(&VariableMap::new().with("disease_warning", true)).unwrap());
        assert!(!e.evaluate(&VariableMap::new().with("disease_warning", false)).unwrap());
    }

    #[test]
    fn evaluation_errors() {
        let vars = VariableMap::new().with("name", "vine").with("n", 3i64);
        assert_eq!(
            parse_expr("t_max > 35").unwrap().evaluate(&vars),
            Err(ExprError::Unbound("t_max".into()))
        );
        assert!(matches!(
            parse_expr("name > 3").unwrap().evaluate(&vars),
            Err(ExprError::TypeMismatch(_))
        ));
        assert!(matches!(
            parse_expr("name >= \"a\"").unwrap().evaluate(&vars),
            Err(ExprError::TypeMismatch(_))
        ));
        assert!(matches!(
            parse_expr("n").unwrap().evaluate(&vars),
            Err(ExprError::NotBoolean(_))
        ));
        assert!(matches!(
            parse_expr("n and true").unwrap().evaluate(&vars),
            Err(ExprError::TypeMismatch(_))
        ));
        assert!(parse_expr("name == \"vine\"").unwrap().evaluate(&vars).unwrap());
    }

    #[test]
    fn integers_promote_against_decimals() {
        let vars = VariableMap::new().with("d", 6i64);
        assert!(parse_expr("d == 6.0").unwrap().evaluate(&vars).unwrap());
        assert!(parse_expr("d < 6.5").unwrap().evaluate(&vars).unwrap());
    }

    #[test]
    fn lists_referenced_variables() {
        let e = parse_expr("t_max > 35 or (hail_expected and not t_max < 0)").unwrap();
        assert_eq!(e.variables().into_iter().collect::<Vec<_>>(), vec!["hail_expected", "t_max"]);
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,6}".prop_filter("keyword", |s| {
            !matches!(s.as_str(), "and" | "or" | "not" | "true" | "false")
        })
    }

    fn literal() -> impl Strategy<Value = Literal> {
        prop_oneof![
            any::<i64>().prop_map(Literal::Integer),
            (-1.0e6f64..1.0e6).prop_map(Literal::Decimal),
            any::<bool>().prop_map(Literal::Boolean),
            "[ -~]{0,8}".prop_map(Literal::Text),
        ]
    }

    fn operand() -> impl Strategy<Value = Expr> {
        prop_oneof![literal().prop_map(Expr::Literal), ident().prop_map(Expr::Var)]
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        operand().prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
                (proptest::sample::select(CmpOp::ALL.to_vec()), inner.clone(), inner).prop_map(
                    |(op, a, b)| Expr::Compare { op, lhs: Box::new(a), rhs: Box::new(b) }
                ),
            ]
        })
    }

    fn arb_bool_expr() -> impl Strategy<Value = Expr> {
        prop_oneof![
            any::<bool>().prop_map(|b| Expr::Literal(Literal::Boolean(b))),
            proptest::sample::select(vec!["p", "q", "r"]).prop_map(|v| Expr::Var(v.into())),
        ]
        .prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(Expr::parse(&printed).unwrap(), e, "printed: {}", printed);
        }

        #[test]
        fn de_morgan(a in arb_bool_expr(), b in arb_bool_expr(), p: bool, q: bool, r: bool) {
            let vars = VariableMap::new().with("p", p).with("q", q).with("r", r);
            let lhs = ConditionExpression::from_ast(Expr::Not(Box::new(Expr::And(Box::new(a.clone()), Box::new(b.clone())))));
            let rhs = ConditionExpression::from_ast(Expr::Or(
                Box::new(Expr::Not(Box::new(a))),
                Box::new(Expr::Not(Box::new(b))),
            ));
            let before = vars.clone();
            prop_assert_eq!(lhs.evaluate(&vars).unwrap(), rhs.evaluate(&vars).unwrap());
            prop_assert_eq!(vars, before);
        }

        #[test]
        fn evaluation_is_deterministic(e in arb_bool_expr(), p: bool, q: bool, r: bool) {
            let vars = VariableMap::new().with("p", p).with("q", q).with("r", r);
            let c = ConditionExpression::from_ast(e);
            prop_assert_eq!(c.evaluate(&vars), c.evaluate(&vars));
        }
    }
}
