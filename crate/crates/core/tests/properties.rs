mod common;

use std::collections::BTreeMap;

use jwbinder_core::js::{format_number, parse_js, print_js, quote_string, ExprKind, StmtKind};
use jwbinder_core::oracle::{differential_check, StubHost, Value};
use jwbinder_core::wasm::{decode_module, decode_sleb, decode_sleb64, decode_uleb};
use proptest::prelude::*;

fn literal(src: &str) -> ExprKind {
    let p = parse_js(&format!("x = {src};")).unwrap();
    match &p.body[0].kind {
        StmtKind::Expr(e) => match &e.kind {
            ExprKind::Assign { value, .. } => value.kind.clone(),
            other => panic!("{other:?}"),
        },
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn uleb_matches_reference(v: u32, pad in 0usize..3) {
        let mut buf = vec![0xFFu8; pad];
        leb128::write::unsigned(&mut buf, v as u64).unwrap();
        prop_assert_eq!(decode_uleb(&buf, pad), Ok((v, buf.len())));
    }

    #[test]
    fn sleb_matches_reference(a: i32, b: i64) {
        let mut buf = Vec::new();
        leb128::write::signed(&mut buf, a as i64).unwrap();
        prop_assert_eq!(decode_sleb(&buf, 0), Ok((a, buf.len())));
        buf.clear();
        leb128::write::signed(&mut buf, b).unwrap();
        prop_assert_eq!(decode_sleb64(&buf, 0), Ok((b, buf.len())));
    }

    #[test]
    fn decoder_rejects_garbage_without_panicking(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let mut framed = b"\0asm\x01\0\0\0".to_vec();
        framed.extend(&bytes);
        let _ = decode_module(&bytes);
        let _ = decode_module(&framed);
    }

    #[test]
    fn truncation_agrees_with_reference(cut in 8usize..400) {
        let wasm = common::fig1_wasm();
        prop_assume!(cut < wasm.len());
        let reference = wasmparser::Validator::new().validate_all(&wasm[..cut]);
        prop_assert_eq!(decode_module(&wasm[..cut]).is_ok(), reference.is_ok());
    }

    #[test]
    fn strings_survive_quoting(s in "\\PC*|[\\x00-\\x1f\"'\\\\\u{2028}]{0,8}") {
        prop_assert_eq!(literal(&quote_string(&s)), ExprKind::String(s));
    }

    #[test]
    fn numbers_survive_formatting(n in any::<f64>().prop_filter("finite", |n| n.is_finite() && n.is_sign_positive())) {
        match literal(&format_number(n)) {
            ExprKind::Number(m) => prop_assert_eq!(m.to_bits(), n.to_bits()),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn printing_is_a_fixed_point(a: i32, b in -1e6f64..1e6, s in "[a-z ]{0,12}") {
        let src = format!("var v = [{a}, {b}, \"{s}\"]; if (v[0] > {b}) {{ f(v, 0 - {a}); }} else g(typeof v);");
        let printed = print_js(&parse_js(&src).unwrap());
        prop_assert_eq!(print_js(&parse_js(&printed).unwrap()), printed);
    }

    #[test]
    fn abstraction_matches_on_arbitrary_arguments(x: i32, y: i32) {
        let m = decode_module(&wat::parse_str(common::SMALL_WAT).unwrap()).unwrap();
        let args = vec![vec![Value::I32(x), Value::I32(y)]];
        for name in ["add", "div"] {
            let f = m.exported_func(name).unwrap();
            let r = differential_check(&m, f, &args, &BTreeMap::new(), &mut || Box::new(StubHost::default()));
            prop_assert!(r.mismatches.is_empty(), "{name}: {:?}", r.mismatches);
        }
    }
}
