use super::{Expr, UnaryOp};

const UNARY_PREC: u8 = 6;
const ATOM_PREC: u8 = 7;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Unary(..) => UNARY_PREC,
        // a negative literal prints with a leading minus
        Expr::Number(n) if n.is_sign_negative() => UNARY_PREC,
        _ => ATOM_PREC,
    }
}

/// Canonical text with the minimal parentheses needed to reparse to the
/// same tree.
pub fn format(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_child(child: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(child, out);
        out.push(')');
    } else {
        write_expr(child, out);
    }
}

fn write_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Number(n) => out.push_str(&format_number(*n)),
        Expr::Str(s) => write_string(s, out),
        Expr::Column(c) => out.push_str(c),
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "not ",
            });
            write_child(inner, precedence(inner) < UNARY_PREC, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            let lp = precedence(lhs);
            let left_parens = lp < p || (op.is_comparison() && lp == p);
            write_child(lhs, left_parens, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_child(rhs, precedence(rhs) <= p, out);
        }
        Expr::Call(call) => {
            out.push_str(call.func.name());
            out.push('(');
            for (i, arg) in call.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(arg, out);
            }
            out.push(')');
        }
    }
}

fn format_number(n: f64) -> String {
    // Display for f64 is shortest-round-trip and never uses exponents.
    format!("{n}")
}

fn write_string(s: &str, out: &mut String) {
    out.push('\'');
    for ch in s.chars() {
        if ch == '\\' || ch == '\'' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('\'');
}

#[cfg(test)]
mod tests {
    use super::super::{parse, BinaryOp};
    use super::*;

    fn col(s: &str) -> Expr {
        Expr::column(s)
    }

    #[test]
    fn minimal_parentheses() {
        let e = Expr::binary(BinaryOp::Add, col("a"), Expr::binary(BinaryOp::Mul, col("b"), col("c")));
        assert_eq!(format(&e), "a + b * c");
        let e = Expr::binary(BinaryOp::Mul, Expr::binary(BinaryOp::Add, col("a"), col("b")), col("c"));
        assert_eq!(format(&e), "(a + b) * c");
    }

    #[test]
    fn right_nested_same_precedence_keeps_parens() {
        let e = Expr::binary(BinaryOp::Sub, col("a"), Expr::binary(BinaryOp::Sub, col("b"), col("c")));
        assert_eq!(format(&e), "a - (b - c)");
        assert_eq!(parse(&format(&e)).unwrap(), e);
    }

    #[test]
    fn nested_comparison_is_parenthesized() {
        let e = Expr::binary(BinaryOp::Lt, Expr::binary(BinaryOp::Lt, col("a"), col("b")), col("c"));
        assert_eq!(format(&e), "(a < b) < c");
        assert_eq!(parse(&format(&e)).unwrap(), e);
    }

    #[test]
    fn strings_escape_quotes_and_backslashes() {
        let e = Expr::binary(BinaryOp::Eq, col("t"), Expr::string(r"it's \s"));
        assert_eq!(format(&e), r"t == 'it\'s \\s'");
        assert_eq!(parse(&format(&e)).unwrap(), e);
    }

    #[test]
    fn unary_over_binary() {
        let e = Expr::unary(UnaryOp::Not, Expr::binary(BinaryOp::Eq, col("a"), Expr::Number(1.0)));
        assert_eq!(format(&e), "not (a == 1)");
        let e = Expr::unary(UnaryOp::Neg, Expr::unary(UnaryOp::Neg, col("a")));
        assert_eq!(parse(&format(&e)).unwrap(), e);
    }

    #[test]
    fn composite_objective_round_trips() {
        let src = "(esci_label == 'E') * purchase_probability * (review_rating > 4)";
        let e = parse(src).unwrap();
        assert_eq!(format(&e), src);
    }
}
