use super::lexer::{tokenize, Spanned, Token};
use super::{BinaryOp, Call, Expr, Func, ParseError, UnaryOp};

/// Parses DSL text into an [`Expr`].
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.or_expr()?;
    let tail = p.peek();
    if tail.token != Token::Eof {
        let mut expected = vec!["operator".to_string(), "end of input".to_string()];
        if tail.token.comparison().is_some() {
            expected = vec!["`and`".into(), "`or`".into(), "end of input".into()];
        }
        return Err(ParseError::new(tail.offset, expected, tail.token.describe()));
    }
    Ok(expr)
}

impl Token {
    fn comparison(&self) -> Option<BinaryOp> {
        Some(match self {
            Token::EqEq => BinaryOp::Eq,
            Token::NotEq => BinaryOp::Ne,
            Token::Lt => BinaryOp::Lt,
            Token::Le => BinaryOp::Le,
            Token::Gt => BinaryOp::Gt,
            Token::Ge => BinaryOp::Ge,
            _ => return None,
        })
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::new(
            t.offset,
            expected.iter().map(|s| s.to_string()).collect(),
            t.token.describe(),
        ))
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.peek().token == Token::Or {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while self.peek().token == Token::And {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let Some(op) = self.peek().token.comparison() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.add_expr()?;
        if self.peek().token.comparison().is_some() {
            // chained comparison
            return self.error(&["`and`", "`or`", "`)`", "end of input"]);
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek().token {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().token {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek().token {
            Token::Minus => UnaryOp::Neg,
            Token::Not => UnaryOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        Ok(Expr::unary(op, self.unary()?))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.peek().offset;
        match self.peek().token.clone() {
            Token::Number(n) => {
                self.bump();
                Ok(Expr::Number(n))
            }
            Token::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Token::LParen => {
                self.bump();
                let inner = self.or_expr()?;
                if self.peek().token != Token::RParen {
                    return self.error(&["`)`"]);
                }
                self.bump();
                Ok(inner)
            }
            Token::Ident(name) => {
                self.bump();
                if self.peek().token != Token::LParen {
                    return Ok(Expr::Column(name));
                }
                let Some(func) = Func::from_name(&name) else {
                    let names: Vec<String> =
                        Func::ALL.iter().map(|f| format!("`{}`", f.name())).collect();
                    return Err(ParseError::new(start, names, format!("unknown function `{name}`")));
                };
                self.bump();
                let mut args = Vec::new();
                if self.peek().token != Token::RParen {
                    loop {
                        args.push(self.or_expr()?);
                        match self.peek().token {
                            Token::Comma => {
                                self.bump();
                            }
                            Token::RParen => break,
                            _ => return self.error(&["`,`", "`)`"]),
                        }
                    }
                }
                self.bump();
                Call::new(func, args)
                    .map(Expr::Call)
                    .map_err(|msg| ParseError::new(start, vec![format!("valid `{}` call", func.name())], msg))
            }
            _ => self.error(&["number", "string", "column", "function call", "`(`", "`-`", "`not`"]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(s: &str) -> Expr {
        Expr::column(s)
    }

    #[test]
    fn exact_match_objective() {
        assert_eq!(
            parse("esci_label == 'E'").unwrap(),
            Expr::binary(BinaryOp::Eq, col("esci_label"), Expr::string("E"))
        );
    }

    #[test]
    fn multiplication_binds_tighter() {
        assert_eq!(
            parse("a + b * c").unwrap(),
            Expr::binary(BinaryOp::Add, col("a"), Expr::binary(BinaryOp::Mul, col("b"), col("c")))
        );
    }

    #[test]
    fn left_associative() {
        assert_eq!(
            parse("a - b - c").unwrap(),
            Expr::binary(BinaryOp::Sub, Expr::binary(BinaryOp::Sub, col("a"), col("b")), col("c"))
        );
    }

    #[test]
    fn and_binds_tighter_than_or() {
        assert_eq!(
            parse("a or b and c").unwrap(),
            Expr::binary(BinaryOp::Or, col("a"), Expr::binary(BinaryOp::And, col("b"), col("c")))
        );
    }

    #[test]
    fn unary_is_tightest() {
        assert_eq!(
            parse("-a * b").unwrap(),
            Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Neg, col("a")), col("b"))
        );
        assert_eq!(
            parse("not a == b").unwrap(),
            Expr::binary(BinaryOp::Eq, Expr::unary(UnaryOp::Not, col("a")), col("b"))
        );
    }

    #[test]
    fn unbalanced_paren_reports_end_of_input() {
        let err = parse("(a + b").unwrap_err();
        assert_eq!(err.offset, 6);
        assert_eq!(err.expected, vec!["`)`".to_string()]);
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn dangling_operator() {
        let err = parse("a +").unwrap_err();
        assert_eq!(err.offset, 3);
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn unknown_function() {
        let err = parse("sqrt(a)").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.found.contains("sqrt"));
    }

    #[test]
    fn chained_comparison_is_rejected() {
        let err = parse("a < b < c").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(parse("(a < b) and (b < c)").is_ok());
        assert!(parse("(a < b) < c").is_ok());
    }

    #[test]
    fn call_arity_and_pattern() {
        assert!(parse("clip(a, 0, 1)").is_ok());
        assert!(parse("clip(a, 0)").is_err());
        assert!(parse("matches(query_text, x)").is_err());
        assert!(parse("matches(query_text, '(')").is_err());
        let e = parse(r"matches(query_text, '[0-9]+\\s*(quart|oz|pack|count)')").unwrap();
        let Expr::Call(call) = e else { panic!() };
        assert!(call.pattern().unwrap().is_match("30 quart coolers"));
    }

    #[test]
    fn trailing_garbage() {
        let err = parse("a b").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn empty_input() {
        let err = parse("   ").unwrap_err();
        assert_eq!(err.offset, 3);
    }
}
