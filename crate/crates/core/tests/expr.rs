use biocontrol_core::expr::{parse, BinOp, Expr, Func};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::Var),
        (-20i32..20).prop_map(|n| Expr::Const(f64::from(n) / 4.0)),
        (0.001f64..1e6).prop_map(Expr::Const),
    ]
}

/// Trees the parser can produce: negation never wraps a literal.
fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let unary = prop_oneof![Just(Func::Exp), Just(Func::Ln), Just(Func::Sqrt), Just(Func::Abs)];
        let binary = prop_oneof![Just(Func::Min), Just(Func::Max)];
        prop_oneof![
            inner
                .clone()
                .prop_filter("folded", |e| !matches!(e, Expr::Const(_)))
                .prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
            (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (binary, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn display_reparses_to_same_tree(e in tree()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", printed);
    }

    #[test]
    fn reparsed_tree_evaluates_identically(e in tree(), x in -5.0f64..5.0) {
        let back = parse(&e.to_string()).unwrap();
        match (e.eval(x), back.eval(x)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn error_offsets_stay_in_source(src in "[x0-9+*/^() .,a-z-]{1,24}") {
        if let Err(err) = parse(&src) {
            prop_assert!(err.offset() <= src.len(), "{} for {:?}", err.offset(), src);
        }
    }

    #[test]
    fn whitespace_insensitive(e in tree()) {
        let printed = e.to_string();
        let squeezed: String = printed.chars().filter(|c| *c != ' ').collect();
        let spaced = printed.replace('(', " ( ").replace(')', " ) ");
        prop_assert_eq!(parse(&squeezed).unwrap(), e.clone());
        prop_assert_eq!(parse(&spaced).unwrap(), e);
    }
}

#[test]
fn empty_and_dangling_inputs_fail() {
    for src in ["", "   ", "1 +", "(x", "x)", "exp", "exp()", "min(1)", "2 ^", "foo(x)", "y"] {
        let err = parse(src).unwrap_err();
        assert!(err.offset() <= src.len(), "{src:?}: {err}");
    }
}
