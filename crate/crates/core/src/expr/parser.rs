use super::lexer::{tokenize, Spanned, Tok};
use super::{Expr, ExprError, Literal};

// or   := and ("or" and)*
// and  := cmp ("and" cmp)*
// cmp  := unary (op unary)?          -- at most one comparison
// unary:= "not" unary | primary
// primary := literal | ident | "(" or ")"
pub(super) fn parse(src: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.or()?;
    match p.peek() {
        Tok::Eof => Ok(expr),
        other => Err(p.error(format!("unexpected {}", other.describe()))),
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ExprError {
        ExprError::Syntax {
            position: self.tokens[self.pos].1,
            message,
        }
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.comparison()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.unary()?;
        let Tok::Cmp(op) = *self.peek() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.unary()?;
        if let Tok::Cmp(_) = self.peek() {
            return Err(self.error("chained comparison; combine comparisons with 'and'".into()));
        }
        Ok(Expr::Compare {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Not {
            self.bump();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let at = self.pos;
        match self.bump() {
            Tok::Int(i) => Ok(Expr::Literal(Literal::Integer(i))),
            Tok::Dec(d) => Ok(Expr::Literal(Literal::Decimal(d))),
            Tok::Str(s) => Ok(Expr::Literal(Literal::Text(s))),
            Tok::True => Ok(Expr::Literal(Literal::Boolean(true))),
            Tok::False => Ok(Expr::Literal(Literal::Boolean(false))),
            Tok::Ident(name) => Ok(Expr::Var(name)),
            Tok::LParen => {
                let inner = self.or()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(format!("expected ')', found {}", self.peek().describe())));
                }
                self.bump();
                Ok(inner)
            }
            other => {
                self.pos = at;
                Err(self.error(format!("expected a value, found {}", other.describe())))
            }
        }
    }
}
