use std::cmp::Ordering;

use super::{CmpOp, Expr, ExprError, Literal};
use crate::value::{Value, VariableMap};

pub(super) fn eval_bool(expr: &Expr, vars: &VariableMap) -> Result<bool, ExprError> {
    match eval(expr, vars)? {
        Value::Boolean(b) => Ok(b),
        other => Err(ExprError::NotBoolean(format!("{} {other}", other.value_type()))),
    }
}

fn operand_bool(expr: &Expr, vars: &VariableMap, op: &str) -> Result<bool, ExprError> {
    match eval(expr, vars)? {
        Value::Boolean(b) => Ok(b),
        other => Err(ExprError::TypeMismatch(format!(
            "'{op}' needs boolean operands, got {}",
            other.value_type()
        ))),
    }
}

// Both sides of 'and'/'or' are always evaluated so that type errors and
// unbound names surface regardless of the other operand's value.
fn eval(expr: &Expr, vars: &VariableMap) -> Result<Value, ExprError> {
    match expr {
        Expr::Literal(lit) => Ok(match lit {
            Literal::Integer(i) => Value::Integer(*i),
            Literal::Decimal(d) => Value::Decimal(*d),
            Literal::Boolean(b) => Value::Boolean(*b),
            Literal::Text(s) => Value::Text(s.clone()),
        }),
        Expr::Var(name) => vars
            .get(name)
            .cloned()
            .ok_or_else(|| ExprError::Unbound(name.clone())),
        Expr::Not(inner) => Ok(Value::Boolean(!operand_bool(inner, vars, "not")?)),
        Expr::And(l, r) => {
            let a = operand_bool(l, vars, "and")?;
            let b = operand_bool(r, vars, "and")?;
            Ok(Value::Boolean(a && b))
        }
        Expr::Or(l, r) => {
            let a = operand_bool(l, vars, "or")?;
            let b = operand_bool(r, vars, "or")?;
            Ok(Value::Boolean(a || b))
        }
        Expr::Compare { op, lhs, rhs } => {
            let a = eval(lhs, vars)?;
            let b = eval(rhs, vars)?;
            compare(*op, &a, &b).map(Value::Boolean)
        }
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, ExprError> {
    let ordering = match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => Some(x.cmp(y)),
        (Value::Integer(_) | Value::Decimal(_), Value::Integer(_) | Value::Decimal(_)) => {
            let (x, y) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            x.partial_cmp(&y)
        }
        (Value::Boolean(x), Value::Boolean(y)) => return equality(op, x == y, "boolean"),
        (Value::Text(x), Value::Text(y)) => return equality(op, x == y, "text"),
        (Value::Document(x), Value::Document(y)) => return equality(op, x == y, "document"),
        _ => {
            return Err(ExprError::TypeMismatch(format!(
                "cannot compare {} {} {}",
                a.value_type(),
                op.symbol(),
                b.value_type()
            )))
        }
    };
    // NaN only arises from stored decimals, never from literals.
    let Some(ord) = ordering else {
        return Ok(op == CmpOp::Ne);
    };
    Ok(match op {
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
    })
}

fn equality(op: CmpOp, equal: bool, ty: &str) -> Result<bool, ExprError> {
    match op {
        CmpOp::Eq => Ok(equal),
        CmpOp::Ne => Ok(!equal),
        _ => Err(ExprError::TypeMismatch(format!(
            "{ty} values only support '==' and '!=', not '{}'",
            op.symbol()
        ))),
    }
}
