//! Deterministic source printer: two-space indent, semicolons always,
//! double-quoted strings, one statement per line.

use super::ast::*;

pub fn print_program(program: &Program) -> String {
    print_statements(&program.body)
}

pub fn print_statements(stmts: &[Stmt]) -> String {
    let mut p = Printer::default();
    p.stmts(stmts);
    p.finish()
}

pub fn print_expr(expr: &Expr) -> String {
    let mut p = Printer::default();
    p.expr(expr, PREC_SEQUENCE);
    p.buf
}

/// Shortest round-trip decimal form, switching to exponent notation at the
/// same magnitudes JavaScript does.
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        return "NaN".to_string();
    }
    if n.is_infinite() {
        return if n > 0.0 { "Infinity" } else { "-Infinity" }.to_string();
    }
    if n == 0.0 {
        return "0".to_string();
    }
    let abs = n.abs();
    if (1e-6..1e21).contains(&abs) {
        format!("{n}")
    } else {
        format!("{n:e}")
    }
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            '\u{b}' => out.push_str("\\v"),
            '\u{2028}' => out.push_str("\\u2028"),
            '\u{2029}' => out.push_str("\\u2029"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn template_chunk(s: &str, out: &mut String) {
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '`' => out.push_str("\\`"),
            '\\' => out.push_str("\\\\"),
            '$' if chars.peek() == Some(&'{') => out.push_str("\\$"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 && c != '\n' && c != '\t' => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
}

const PREC_SEQUENCE: u8 = 1;
const PREC_ASSIGN: u8 = 2;
const PREC_CONDITIONAL: u8 = 3;
const PREC_UNARY: u8 = 16;
const PREC_POSTFIX: u8 = 17;
const PREC_CALL: u8 = 18;
const PREC_PRIMARY: u8 = 19;

fn expr_precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Sequence(_) => PREC_SEQUENCE,
        ExprKind::Assign { .. } => PREC_ASSIGN,
        ExprKind::Function(f) if f.is_arrow => PREC_ASSIGN,
        ExprKind::Conditional { .. } => PREC_CONDITIONAL,
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } => PREC_UNARY,
        ExprKind::Update { prefix: true, .. } => PREC_UNARY,
        ExprKind::Update { prefix: false, .. } => PREC_POSTFIX,
        ExprKind::Call { .. } | ExprKind::New { .. } | ExprKind::Member { .. } => PREC_CALL,
        _ => PREC_PRIMARY,
    }
}

/// Whether printing `e` first would begin with `{` or `function`, which a
/// statement context would misread as a block or declaration.
fn starts_ambiguously(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Object(_) => true,
        ExprKind::Function(f) => !f.is_arrow,
        ExprKind::Call { callee, .. } => starts_ambiguously(callee),
        ExprKind::Member { object, .. } => starts_ambiguously(object),
        ExprKind::Binary { left, .. } => starts_ambiguously(left),
        ExprKind::Assign { target, .. } => starts_ambiguously(target),
        ExprKind::Conditional { test, .. } => starts_ambiguously(test),
        ExprKind::Sequence(items) => items.first().is_some_and(starts_ambiguously),
        ExprKind::Update {
            prefix: false, arg, ..
        } => starts_ambiguously(arg),
        _ => false,
    }
}

fn contains_call(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Call { .. } => true,
        ExprKind::Member { object, .. } => contains_call(object),
        _ => false,
    }
}

#[derive(Default)]
struct Printer {
    buf: String,
    indent: usize,
}

impl Printer {
    fn finish(self) -> String {
        self.buf
    }

    fn push(&mut self, s: &str) {
        self.buf.push_str(s);
    }

    fn newline(&mut self) {
        self.buf.push('\n');
        for _ in 0..self.indent {
            self.buf.push_str("  ");
        }
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for (i, s) in stmts.iter().enumerate() {
            if i > 0 {
                self.newline();
            }
            self.stmt(s);
        }
    }

    fn block(&mut self, stmts: &[Stmt]) {
        if stmts.is_empty() {
            self.push("{}");
            return;
        }
        self.push("{");
        self.indent += 1;
        for s in stmts {
            self.newline();
            self.stmt(s);
        }
        self.indent -= 1;
        self.newline();
        self.push("}");
    }

    /// Body of if/for/while/labeled: blocks stay on the same line.
    fn body(&mut self, body: &Stmt) {
        self.push(" ");
        self.stmt(body);
    }

    fn var_decl(&mut self, decl: &VarDecl) {
        self.push(decl.kind.keyword());
        self.push(" ");
        for (i, d) in decl.declarators.iter().enumerate() {
            if i > 0 {
                self.push(", ");
            }
            self.push(&d.name.name);
            if let Some(init) = &d.init {
                self.push(" = ");
                self.expr(init, PREC_ASSIGN);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::VarDecl(decl) => {
                self.var_decl(decl);
                self.push(";");
            }
            StmtKind::FunctionDecl(f) => self.function(f),
            StmtKind::Expr(e) => {
                if starts_ambiguously(e) {
                    self.push("(");
                    self.expr(e, PREC_SEQUENCE);
                    self.push(")");
                } else {
                    self.expr(e, PREC_SEQUENCE);
                }
                self.push(";");
            }
            StmtKind::If {
                test,
                consequent,
                alternate,
            } => {
                self.push("if (");
                self.expr(test, PREC_SEQUENCE);
                self.push(")");
                self.body(consequent);
                if let Some(alt) = alternate {
                    if matches!(consequent.kind, StmtKind::Block(_)) {
                        self.push(" else");
                    } else {
                        self.newline();
                        self.push("else");
                    }
                    self.body(alt);
                }
            }
            StmtKind::For {
                init,
                test,
                update,
                body,
            } => {
                self.push("for (");
                match init {
                    Some(ForInit::Decl(d)) => self.var_decl(d),
                    Some(ForInit::Expr(e)) => self.expr(e, PREC_SEQUENCE),
                    None => {}
                }
                self.push(";");
                if let Some(t) = test {
                    self.push(" ");
                    self.expr(t, PREC_SEQUENCE);
                }
                self.push(";");
                if let Some(u) = update {
                    self.push(" ");
                    self.expr(u, PREC_SEQUENCE);
                }
                self.push(")");
                self.body(body);
            }
            StmtKind::While { test, body } => {
                self.push("while (");
                self.expr(test, PREC_SEQUENCE);
                self.push(")");
                self.body(body);
            }
            StmtKind::Labeled { label, body } => {
                self.push(&label.name);
                self.push(":");
                self.body(body);
            }
            StmtKind::Break(label) => {
                self.push("break");
                if let Some(l) = label {
                    self.push(" ");
                    self.push(&l.name);
                }
                self.push(";");
            }
            StmtKind::Continue(label) => {
                self.push("continue");
                if let Some(l) = label {
                    self.push(" ");
                    self.push(&l.name);
                }
                self.push(";");
            }
            StmtKind::Return(arg) => {
                self.push("return");
                if let Some(a) = arg {
                    self.push(" ");
                    self.expr(a, PREC_SEQUENCE);
                }
                self.push(";");
            }
            StmtKind::Throw(arg) => {
                self.push("throw ");
                self.expr(arg, PREC_SEQUENCE);
                self.push(";");
            }
            StmtKind::Try {
                block,
                handler,
                finalizer,
            } => {
                self.push("try ");
                self.block(block);
                if let Some(h) = handler {
                    self.push(" catch ");
                    if let Some(p) = &h.param {
                        self.push("(");
                        self.push(&p.name);
                        self.push(") ");
                    }
                    self.block(&h.body);
                }
                if let Some(f) = finalizer {
                    self.push(" finally ");
                    self.block(f);
                }
            }
            StmtKind::Block(body) => self.block(body),
            StmtKind::Empty => self.push(";"),
        }
    }

    fn params(&mut self, params: &[Ident]) {
        self.push("(");
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.push(", ");
            }
            self.push(&p.name);
        }
        self.push(")");
    }

    fn function(&mut self, f: &Function) {
        if f.is_arrow {
            self.params(&f.params);
            self.push(" => ");
            match &f.body {
                FunctionBody::Block(b) => self.block(b),
                FunctionBody::Expr(e) => {
                    if starts_ambiguously(e) {
                        self.push("(");
                        self.expr(e, PREC_SEQUENCE);
                        self.push(")");
                    } else {
                        self.expr(e, PREC_ASSIGN);
                    }
                }
            }
            return;
        }
        self.push("function");
        if let Some(name) = &f.name {
            self.push(" ");
            self.push(&name.name);
        } else {
            self.push(" ");
        }
        self.params(&f.params);
        self.push(" ");
        match &f.body {
            FunctionBody::Block(b) => self.block(b),
            FunctionBody::Expr(e) => {
                // Only arrows have concise bodies; print as a return block.
                self.push("{");
                self.indent += 1;
                self.newline();
                self.push("return ");
                self.expr(e, PREC_SEQUENCE);
                self.push(";");
                self.indent -= 1;
                self.newline();
                self.push("}");
            }
        }
    }

    fn expr(&mut self, e: &Expr, min_prec: u8) {
        if expr_precedence(e) < min_prec {
            self.push("(");
            self.expr_inner(e);
            self.push(")");
        } else {
            self.expr_inner(e);
        }
    }

    fn args(&mut self, args: &[Expr]) {
        self.push("(");
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.push(", ");
            }
            self.expr(a, PREC_ASSIGN);
        }
        self.push(")");
    }

    fn expr_inner(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(name) => self.push(name),
            ExprKind::Number(n) => self.push(&format_number(*n)),
            ExprKind::String(s) => self.push(&quote_string(s)),
            ExprKind::Bool(b) => self.push(if *b { "true" } else { "false" }),
            ExprKind::Null => self.push("null"),
            ExprKind::This => self.push("this"),
            ExprKind::Template { quasis, exprs } => {
                let mut out = String::from("`");
                template_chunk(&quasis[0], &mut out);
                self.push(&out);
                for (i, ex) in exprs.iter().enumerate() {
                    self.push("${");
                    self.expr(ex, PREC_SEQUENCE);
                    self.push("}");
                    let mut chunk = String::new();
                    template_chunk(&quasis[i + 1], &mut chunk);
                    self.push(&chunk);
                }
                self.push("`");
            }
            ExprKind::Array(items) => {
                self.push("[");
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        self.push(", ");
                    }
                    self.expr(it, PREC_ASSIGN);
                }
                self.push("]");
            }
            ExprKind::Object(props) => {
                if props.is_empty() {
                    self.push("{}");
                    return;
                }
                self.push("{ ");
                for (i, p) in props.iter().enumerate() {
                    if i > 0 {
                        self.push(", ");
                    }
                    if p.shorthand {
                        self.push(&p.key.as_key());
                        continue;
                    }
                    match &p.key {
                        PropKey::Ident(n) => self.push(n),
                        PropKey::String(s) => self.push(&quote_string(s)),
                        PropKey::Number(n) => self.push(&format_number(*n)),
                    }
                    self.push(": ");
                    self.expr(&p.value, PREC_ASSIGN);
                }
                self.push(" }");
            }
            ExprKind::Function(f) => self.function(f),
            ExprKind::Unary { op, arg } => {
                self.push(op.as_str());
                let word = matches!(op, UnaryOp::Typeof | UnaryOp::Void | UnaryOp::Delete);
                // Avoid `- -x` collapsing into `--x`.
                let clash = matches!(
                    (&op, &arg.kind),
                    (
                        UnaryOp::Minus,
                        ExprKind::Unary {
                            op: UnaryOp::Minus,
                            ..
                        }
                    ) | (
                        UnaryOp::Plus,
                        ExprKind::Unary {
                            op: UnaryOp::Plus,
                            ..
                        }
                    ) | (
                        UnaryOp::Minus,
                        ExprKind::Update {
                            op: UpdateOp::Decrement,
                            prefix: true,
                            ..
                        },
                    ) | (
                        UnaryOp::Plus,
                        ExprKind::Update {
                            op: UpdateOp::Increment,
                            prefix: true,
                            ..
                        },
                    )
                );
                if word || clash {
                    self.push(" ");
                }
                self.expr(arg, PREC_UNARY);
            }
            ExprKind::Update { op, prefix, arg } => {
                let sym = match op {
                    UpdateOp::Increment => "++",
                    UpdateOp::Decrement => "--",
                };
                if *prefix {
                    self.push(sym);
                    self.expr(arg, PREC_UNARY);
                } else {
                    self.expr(arg, PREC_CALL);
                    self.push(sym);
                }
            }
            ExprKind::Binary { op, left, right } => {
                let prec = op.precedence();
                let (lmin, rmin) = if *op == BinaryOp::Exp {
                    (prec + 1, prec)
                } else {
                    (prec, prec + 1)
                };
                let mixes_nullish = |child: &Expr| {
                    matches!(
                        (op, &child.kind),
                        (
                            BinaryOp::Nullish,
                            ExprKind::Binary {
                                op: BinaryOp::And | BinaryOp::Or,
                                ..
                            }
                        ) | (
                            BinaryOp::And | BinaryOp::Or,
                            ExprKind::Binary {
                                op: BinaryOp::Nullish,
                                ..
                            }
                        )
                    )
                };
                let lmin = if mixes_nullish(left)
                    || (*op == BinaryOp::Exp && matches!(left.kind, ExprKind::Unary { .. }))
                {
                    PREC_PRIMARY
                } else {
                    lmin
                };
                let rmin = if mixes_nullish(right) {
                    PREC_PRIMARY
                } else {
                    rmin
                };
                self.expr(left, lmin);
                self.push(" ");
                self.push(op.as_str());
                self.push(" ");
                self.expr(right, rmin);
            }
            ExprKind::Assign { op, target, value } => {
                self.expr(target, PREC_CALL);
                self.push(" ");
                self.push(op.as_str());
                self.push(" ");
                self.expr(value, PREC_ASSIGN);
            }
            ExprKind::Conditional {
                test,
                consequent,
                alternate,
            } => {
                self.expr(test, PREC_CONDITIONAL + 1);
                self.push(" ? ");
                self.expr(consequent, PREC_ASSIGN);
                self.push(" : ");
                self.expr(alternate, PREC_ASSIGN);
            }
            ExprKind::Call { callee, args } => {
                if matches!(callee.kind, ExprKind::New { .. }) {
                    self.expr_inner(callee);
                } else {
                    self.expr(callee, PREC_CALL);
                }
                self.args(args);
            }
            ExprKind::New { callee, args } => {
                self.push("new ");
                let simple = matches!(
                    callee.kind,
                    ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::This
                ) && !contains_call(callee);
                if simple {
                    self.expr(callee, PREC_CALL);
                } else {
                    self.push("(");
                    self.expr(callee, PREC_SEQUENCE);
                    self.push(")");
                }
                self.args(args);
            }
            ExprKind::Member { object, property } => {
                let needs_parens = matches!(object.kind, ExprKind::Number(_))
                    || expr_precedence(object) < PREC_CALL;
                if needs_parens {
                    self.push("(");
                    self.expr(object, PREC_SEQUENCE);
                    self.push(")");
                } else {
                    self.expr_inner(object);
                }
                match property {
                    MemberProp::Static(id) => {
                        self.push(".");
                        self.push(&id.name);
                    }
                    MemberProp::Computed(p) => {
                        self.push("[");
                        self.expr(p, PREC_SEQUENCE);
                        self.push("]");
                    }
                }
            }
            ExprKind::Sequence(items) => {
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        self.push(", ");
                    }
                    self.expr(it, PREC_ASSIGN);
                }
            }
        }
    }
}
