//! Seeded generator of well-typed, import-free WAT functions over the
//! supported opcode set. Loops are always bounded by a private counter and
//! branches only target block labels, so every program terminates.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use jwbinder_core::oracle::Value;

const BIN32: &[&str] = &[
    "add", "sub", "mul", "div_s", "div_u", "rem_s", "rem_u", "and", "or", "xor", "shl", "shr_s",
    "shr_u", "rotl", "rotr",
];
const CMP: &[&str] = &[
    "eq", "ne", "lt_s", "lt_u", "gt_s", "gt_u", "le_s", "le_u", "ge_s", "ge_u",
];
const UN: &[&str] = &["clz", "ctz", "popcnt"];
const FBIN: &[&str] = &["add", "sub", "mul", "div"];
const FCMP: &[&str] = &["eq", "ne", "lt", "gt", "le", "ge"];
const LOADS: &[&str] = &[
    "i32.load",
    "i32.load8_s",
    "i32.load8_u",
    "i32.load16_s",
    "i32.load16_u",
];
const STORES: &[&str] = &["i32.store", "i32.store8", "i32.store16"];
const COUNTERS: usize = 4;

pub struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    labels: Vec<String>,
    next_label: usize,
    free_counters: Vec<usize>,
}

impl<'r> Gen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        Gen {
            rng,
            labels: Vec::new(),
            next_label: 0,
            free_counters: (0..COUNTERS).rev().collect(),
        }
    }

    fn label(&mut self) -> String {
        self.next_label += 1;
        format!("$b{}", self.next_label)
    }

    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(self.rng).unwrap()
    }

    fn const32(&mut self) -> i32 {
        match self.rng.gen_range(0..6) {
            0 => *[0, 1, -1, i32::MIN, i32::MAX, 31, 32]
                .choose(self.rng)
                .unwrap(),
            1 | 2 => self.rng.gen_range(-16..16),
            _ => self.rng.gen(),
        }
    }

    fn leaf(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 | 1 => format!("(i32.const {})", self.const32()),
            2 => format!("(local.get {})", self.rng.gen_range(0..2)),
            3 => format!("(local.get $l{})", self.rng.gen_range(0..3)),
            _ => "(global.get $g)".to_string(),
        }
    }

    /// An expression leaving exactly one i32 on the stack.
    pub fn expr(&mut self, depth: u32) -> String {
        if depth == 0 {
            return self.leaf();
        }
        let d = depth - 1;
        match self.rng.gen_range(0..22) {
            0..=5 => {
                let op = self.pick(BIN32);
                format!("(i32.{op} {} {})", self.expr(d), self.expr(d))
            }
            6 | 7 => {
                let op = self.pick(CMP);
                format!("(i32.{op} {} {})", self.expr(d), self.expr(d))
            }
            8 => {
                let op = self.pick(UN);
                format!("(i32.{op} {})", self.expr(d))
            }
            9 => format!("(i32.eqz {})", self.expr(d)),
            10 => format!(
                "(select {} {} {})",
                self.expr(d),
                self.expr(d),
                self.expr(d)
            ),
            11 => format!(
                "(if (result i32) {} (then {}) (else {}))",
                self.expr(d),
                self.expr(d),
                self.expr(d)
            ),
            12 => {
                let l = self.label();
                format!(
                    "(block {l} (result i32) {} (br_if {l} {} {}) (drop) {})",
                    self.stmt(d),
                    self.expr(d),
                    self.expr(d),
                    self.expr(d)
                )
            }
            13 | 14 => {
                let op = self.pick(&[
                    "add", "sub", "mul", "div_s", "rem_u", "xor", "shl", "shr_s", "rotl",
                ]);
                let ext = if self.rng.gen() { "s" } else { "u" };
                let k: i64 = self.rng.gen_range(-100_000_000_000..100_000_000_000);
                format!(
                    "(i32.wrap_i64 (i64.{op} (i64.extend_i32_{ext} {}) (i64.const {k})))",
                    self.expr(d)
                )
            }
            15 => {
                let op = self.pick(LOADS);
                format!(
                    "({op} offset={} (i32.and {} (i32.const 0xFFF0)))",
                    self.rng.gen_range(0..8),
                    self.expr(d)
                )
            }
            16 => format!("(call $h {})", self.expr(d)),
            17 => format!(
                "(local.tee $l{} {})",
                self.rng.gen_range(0..3),
                self.expr(d)
            ),
            18 => {
                let op = self.pick(FBIN);
                let sx = if self.rng.gen() { "s" } else { "u" };
                format!(
                    "(i32.trunc_f64_{sx} (f64.{op} (f64.convert_i32_s {}) (f64.const {})))",
                    self.expr(d),
                    self.rng.gen_range(-64..64) as f64 / 4.0
                )
            }
            19 => {
                let op = self.pick(FCMP);
                format!(
                    "(f32.{op} (f32.convert_i32_u {}) (f32.demote_f64 (f64.convert_i32_s {})))",
                    self.expr(d),
                    self.expr(d)
                )
            }
            20 => format!("(i32.add (memory.size) {})", self.expr(d)),
            _ => format!(
                "(call_indirect (type $un) {} (i32.const {}))",
                self.expr(d),
                self.rng.gen_range(0..2)
            ),
        }
    }

    /// A statement with no net stack effect.
    pub fn stmt(&mut self, depth: u32) -> String {
        let d = depth.saturating_sub(1);
        let choice = if depth == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..11)
        };
        match choice {
            0 => format!(
                "(local.set $l{} {})",
                self.rng.gen_range(0..3),
                self.expr(d)
            ),
            1 => format!("(global.set $g {})", self.expr(d)),
            2 => {
                let op = self.pick(STORES);
                format!(
                    "({op} (i32.and {} (i32.const 0xFFF0)) {})",
                    self.expr(d),
                    self.expr(d)
                )
            }
            3 => format!(
                "(if {} (then {}) (else {}))",
                self.expr(d),
                self.stmts(d, 2),
                self.stmts(d, 2)
            ),
            4 | 5 => {
                let l = self.label();
                self.labels.push(l.clone());
                let body = format!(
                    "{} (br_if {l} {}) {}",
                    self.stmts(d, 2),
                    self.expr(d),
                    self.stmts(d, 2)
                );
                self.labels.pop();
                format!("(block {l} {body})")
            }
            6 | 7 => match self.free_counters.pop() {
                Some(c) => {
                    let n = self.rng.gen_range(1..6);
                    let l = self.label();
                    let body = self.stmts(d, 3);
                    self.free_counters.push(c);
                    format!(
                        "(local.set $c{c} (i32.const {n})) (loop {l} {body} \
                         (local.set $c{c} (i32.sub (local.get $c{c}) (i32.const 1))) \
                         (br_if {l} (i32.gt_s (local.get $c{c}) (i32.const 0))))"
                    )
                }
                None => format!("(local.set $l0 {})", self.expr(d)),
            },
            8 => format!("(if {} (then (return {})))", self.expr(d), self.expr(d)),
            9 if !self.labels.is_empty() => {
                let target = self.labels.choose(self.rng).unwrap().clone();
                format!("(br_if {target} {})", self.expr(d))
            }
            9 => format!("(drop {})", self.expr(d)),
            _ => {
                let outer = self.label();
                let inner = self.label();
                let mut targets: Vec<String> = (0..self.rng.gen_range(1..4))
                    .map(|_| {
                        if self.rng.gen() {
                            inner.clone()
                        } else {
                            outer.clone()
                        }
                    })
                    .collect();
                targets.push(outer.clone());
                self.labels.push(outer.clone());
                let sel = self.expr(d);
                let after = self.stmts(d, 1);
                self.labels.pop();
                format!(
                    "(block {outer} (block {inner} (br_table {} {sel})) {after})",
                    targets.join(" ")
                )
            }
        }
    }

    fn stmts(&mut self, depth: u32, max: usize) -> String {
        let n = self.rng.gen_range(0..=max);
        (0..n)
            .map(|_| self.stmt(depth))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One exported `(i32, i32) -> i32` function named `$name`.
    pub fn function(&mut self, name: &str, depth: u32) -> String {
        self.labels.clear();
        let body = self.stmts(depth, 4);
        let tail = self.expr(depth);
        let counters: String = (0..COUNTERS)
            .map(|c| format!(" (local $c{c} i32)"))
            .collect();
        format!(
            "(func ${name} (export \"{name}\") (param i32 i32) (result i32)\n\
             (local $l0 i32) (local $l1 i32) (local $l2 i32){counters}\n\
             {body}\n{tail})"
        )
    }

    /// Shared declarations the generated functions rely on, plus `extra`.
    pub fn module_with(&mut self, funcs: &[String], extra: &str) -> String {
        format!(
            "(module\n\
             (type $un (func (param i32) (result i32)))\n\
             (memory 1 2)\n\
             (global $g (mut i32) (i32.const {g}))\n\
             (table 2 funcref)\n\
             (elem (i32.const 0) $h $h2)\n\
             (data (i32.const 16) \"\\01\\02\\03\\04\\ff\\fe\\fd\\fc jwb\")\n\
             {extra}\n\
             (func $h (type $un) (i32.xor (i32.mul (local.get 0) (i32.const 31)) (i32.const {hk})))\n\
             (func $h2 (type $un) (i32.sub (i32.const 0) (local.get 0)))\n\
             {})",
            funcs.join("\n"),
            g = self.const32(),
            hk = self.const32(),
        )
    }

    /// A complete module exporting `f: (i32, i32) -> i32`.
    pub fn module(&mut self, depth: u32) -> String {
        let f = self.function("f", depth);
        self.module_with(&[f], "")
    }
}

/// Input pairs mixing edge values and uniform draws.
pub fn inputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Value>> {
    let edge = [0, 1, -1, 2, i32::MIN, i32::MAX, 0x8000, -0x8000];
    (0..n)
        .map(|_| {
            (0..2)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        Value::I32(*edge.choose(rng).unwrap())
                    } else {
                        Value::I32(rng.gen())
                    }
                })
                .collect()
        })
        .collect()
}
