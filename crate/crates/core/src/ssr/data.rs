use crate::js::Expr;
use crate::wasm::{SegmentOffset, WasmModule};

use super::{Emitter, JsFragment};

fn printable(b: u8) -> bool {
    (0x20..=0x7E).contains(&b) || matches!(b, b'\t' | b'\n' | b'\r')
}

/// Whether a segment is rendered as a string literal rather than a byte array.
pub fn is_mostly_printable(bytes: &[u8]) -> bool {
    let n = bytes.iter().filter(|b| printable(**b)).count();
    n * 10 >= bytes.len() * 9
}

/// `const DATA_n = ...; const DATA_n_OFFSET = k;` for every data segment.
pub fn abstract_data(module: &WasmModule, prefix: &str, em: &mut Emitter) -> JsFragment {
    let mut frag = JsFragment::default();
    for (n, seg) in module.data_segments.iter().enumerate() {
        let name = em.names.fixed(&format!("{prefix}DATA_{n}"));
        let offset_name = em.names.fixed(&format!("{name}_OFFSET"));
        let mut b = em.builder();
        let init: Expr = if is_mostly_printable(&seg.bytes) {
            let s: String = seg.bytes.iter().map(|b| *b as char).collect();
            b.string(&s)
        } else {
            let items = seg.bytes.iter().map(|v| b.num(*v as f64)).collect();
            b.array(items)
        };
        frag.statements.push(b.const_decl(&name, init));
        let off = match seg.offset() {
            SegmentOffset::Const(k) => b.num(k as f64),
            SegmentOffset::Dynamic => b.string("dynamic"),
            SegmentOffset::Passive => b.string("passive"),
        };
        frag.statements.push(b.const_decl(&offset_name, off));
    }
    frag
}
