mod common;

use proptest::prelude::*;

use common::{arb_expr, bindings, eval_deriv, random_deriv, render_flat, render_full, rng};
use tradeoff_core::expr::{evaluate, format, parse, Bindings, Expr, ValueRef};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn format_parse_round_trip(e in arb_expr()) {
        let text = format(&e);
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(&back, &e, "text: {}", text);
        prop_assert_eq!(format(&back), text);
    }

    #[test]
    fn flat_and_parenthesized_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_deriv(&mut r);
        let ctx = bindings(&mut r);
        let flat = render_flat(&d);
        let full = render_full(&d);
        let lookup = |c: &str| match ctx.lookup(c) { Some(ValueRef::Num(n)) => n, _ => f64::NAN };
        let want = eval_deriv(&d, &lookup);
        let got_flat = evaluate(&parse(&flat).unwrap(), &ctx).unwrap().0;
        let got_full = evaluate(&parse(&full).unwrap(), &ctx).unwrap().0;
        prop_assert_eq!(got_flat.to_bits(), want.to_bits(), "{} vs {}", flat, full);
        prop_assert_eq!(got_full.to_bits(), want.to_bits(), "{}", full);
    }

    #[test]
    fn parse_never_panics(s in "[a-z0-9 ()+*/<>=!.'-]{0,24}") {
        let _ = parse(&s);
    }

    #[test]
    fn parsed_trees_have_no_negative_literals(seed in any::<u64>()) {
        fn check(e: &Expr) -> bool {
            match e {
                Expr::Number(n) => *n >= 0.0 && n.is_sign_positive(),
                Expr::Str(_) | Expr::Column(_) => true,
                Expr::Unary(_, i) => check(i),
                Expr::Binary(_, l, r) => check(l) && check(r),
                Expr::Call(c) => c.args.iter().all(check),
            }
        }
        let d = random_deriv(&mut rng(seed));
        prop_assert!(check(&parse(&render_flat(&d)).unwrap()));
    }
}

#[test]
fn boolean_results_are_zero_or_one() {
    for seed in 0..300 {
        let mut r = rng(seed);
        let d = random_deriv(&mut r);
        let ctx = bindings(&mut r);
        let e = parse(&render_flat(&d)).unwrap();
        if e.is_boolean_root() {
            let v = evaluate(&e, &ctx).unwrap().0;
            assert!(v == 0.0 || v == 1.0, "{e} = {v}");
        }
    }
}
