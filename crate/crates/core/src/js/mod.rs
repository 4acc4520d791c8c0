//! JavaScript front end: parser and printer for the supported subset.

pub mod ast;
mod lexer;
mod parser;
pub mod printer;
pub mod visit;

use std::path::PathBuf;

pub use ast::*;
pub use parser::is_reserved;
pub use printer::{format_number, print_expr, quote_string};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{col}: expected {expected}, found {found}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

impl SyntaxError {
    pub(crate) fn at(src: &str, offset: usize, expected: &str, found: &str) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let col = src[line_start..offset].chars().count() + 1;
        SyntaxError {
            line,
            col,
            offset,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

/// A JavaScript input file.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub path: PathBuf,
    pub text: String,
}

impl SourceProgram {
    pub fn read(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let bytes = std::fs::read(&path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(SourceProgram { path, text })
    }
}

pub fn parse_js(source: &str) -> Result<Program, SyntaxError> {
    parser::Parser::new(source)?.parse_program()
}

pub fn print_js(program: &Program) -> String {
    printer::print_program(program)
}

/// Copy of `program` with every id and span zeroed, for structural comparison.
pub fn normalized(program: &Program) -> Program {
    let mut p = program.clone();
    visit::for_each_node_mut(&mut p, &mut |id, span| {
        *id = NodeId::default();
        *span = Span::default();
    });
    p.next_id = 0;
    p
}

/// Equality ignoring node ids and spans.
pub fn structurally_equal(a: &Program, b: &Program) -> bool {
    normalized(a) == normalized(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(src: &str) -> String {
        let ast = parse_js(src).unwrap();
        let printed = print_js(&ast);
        let again = parse_js(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert!(
            structurally_equal(&ast, &again),
            "not idempotent:\n{printed}"
        );
        printed
    }

    #[test]
    fn minimal_declaration() {
        let ast = parse_js("var a = 1;").unwrap();
        assert_eq!(ast.body.len(), 1);
        let StmtKind::VarDecl(decl) = &ast.body[0].kind else {
            panic!("expected declaration")
        };
        assert_eq!(decl.kind, DeclKind::Var);
        assert_eq!(decl.declarators[0].name.name, "a");
        assert_eq!(
            decl.declarators[0].init.as_ref().unwrap().kind,
            ExprKind::Number(1.0)
        );
    }

    #[test]
    fn malformed_declaration_reports_equals() {
        let err = parse_js("var = ;").unwrap_err();
        assert_eq!((err.line, err.col), (1, 5));
        assert_eq!(err.found, "`=`");
    }

    #[test]
    fn new_webassembly_module() {
        let src = "var m = new WebAssembly.Module(bytes);\nvar i = new WebAssembly.Instance(m, {});\ni.exports.foo();";
        let ast = parse_js(src).unwrap();
        let StmtKind::VarDecl(d) = &ast.body[0].kind else {
            panic!()
        };
        let init = d.declarators[0].init.as_ref().unwrap();
        let ExprKind::New { callee, .. } = &init.kind else {
            panic!()
        };
        assert_eq!(callee.dotted_path().as_deref(), Some("WebAssembly.Module"));
    }

    #[test]
    fn assign_prints_plainly() {
        assert_eq!(roundtrip("v = e;"), "v = e;");
    }

    #[test]
    fn labeled_loop_layout() {
        assert_eq!(
            roundtrip("L0: for (;;) { break L0; }"),
            "L0: for (;;) {\n  break L0;\n}"
        );
    }

    #[test]
    fn if_idempotence() {
        assert_eq!(roundtrip("if (a) { b(); }"), "if (a) {\n  b();\n}");
    }

    #[test]
    fn precedence_is_preserved() {
        roundtrip("x = (a + b) * c - -d;");
        roundtrip("y = a ? b : c ? d : e;");
        roundtrip("z = (a, b);");
        roundtrip("(function () { return 1; })();");
        roundtrip("f = (x) => ({ a: x });");
        roundtrip("w = (a ?? b) || c;");
        roundtrip("q = - -a + +(+b);");
        roundtrip("r = 2 ** -1;");
        roundtrip("s = (-2) ** 2;");
        roundtrip("new (f())();");
        roundtrip("new X().y;");
        roundtrip("t = typeof a === \"string\";");
        roundtrip("u = `a${b + 1}c${`d${e}`}`;");
    }

    #[test]
    fn statements_roundtrip() {
        let printed = roundtrip(
            "function f(a, b) { for (var i = 0; i < 10; i++) { if (i % 2) continue; else break; } while (x) x--; return a; }\n\
             try { g(); } catch (e) { h(e); } finally { k(); }\n\
             outer: while (true) { break outer; }\n\
             var o = { a: 1, \"b-c\": [1, 2, 3], d, 4: null };\n\
             p.then(function (r) { return r.instance.exports.run(); });",
        );
        assert!(printed.contains("catch (e)"));
    }

    #[test]
    fn numbers_use_shortest_form() {
        assert_eq!(roundtrip("a = 0.1;"), "a = 0.1;");
        assert_eq!(roundtrip("a = 0x10;"), "a = 16;");
        assert_eq!(roundtrip("a = 1e21;"), "a = 1e21;");
        assert_eq!(roundtrip("a = 1.5e-7;"), "a = 1.5e-7;");
        assert_eq!(roundtrip("a = 123456789012;"), "a = 123456789012;");
    }

    #[test]
    fn strings_are_double_quoted() {
        assert_eq!(
            roundtrip("a = 'it\\'s \"x\"\\n';"),
            "a = \"it's \\\"x\\\"\\n\";"
        );
    }

    #[test]
    fn asi_accepts_newlines() {
        let ast = parse_js("a = 1\nb = 2\nreturn_value()").unwrap();
        assert_eq!(ast.body.len(), 3);
    }

    #[test]
    fn unsupported_constructs_are_rejected() {
        for src in [
            "class A {}",
            "import x from 'y';",
            "export const a = 1;",
            "async function f() {}",
            "function* g() {}",
            "var r = /ab+c/;",
            "for (var k in o) {}",
            "for (const v of xs) {}",
            "switch (a) { case 1: break; }",
            "do { a(); } while (b);",
            "var {a} = o;",
            "f(...args);",
            "var x = 10n;",
        ] {
            assert!(parse_js(src).is_err(), "accepted {src}");
        }
    }

    #[test]
    fn error_positions_are_line_and_column() {
        let err = parse_js("a = 1;\nb = ;").unwrap_err();
        assert_eq!((err.line, err.col), (2, 5));
    }

    #[test]
    fn empty_program() {
        let ast = parse_js("").unwrap();
        assert!(ast.body.is_empty());
        assert_eq!(print_js(&ast), "");
    }
}
