use super::instr::{memory_opcode, simple_opcode};
use super::*;

const MAGIC: [u8; 8] = [0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00];
const MAX_NESTING: usize = 1024;
const MAX_LOCALS: u64 = 50_000;

/// Position of each known section id in the required order
/// (data count, id 12, sits between element and code).
fn section_rank(id: u8) -> Option<u8> {
    const ORDER: [u8; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 10, 11];
    ORDER.iter().position(|&x| x == id).map(|p| p as u8)
}

/// Cursor over a byte slice; offsets are absolute within `bytes`.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], pos: usize, end: usize) -> Self {
        Reader { bytes, pos, end }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.end
    }

    fn byte(&mut self) -> Result<u8, DecodeError> {
        if self.pos >= self.end {
            return Err(DecodeError::truncated(self.bytes, self.pos));
        }
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn window(&self) -> &'a [u8] {
        &self.bytes[..self.end]
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        let (v, next) = decode_uleb(self.window(), self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        let (v, next) = decode_sleb(self.window(), self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn i64(&mut self) -> Result<i64, DecodeError> {
        let (v, next) = decode_sleb64(self.window(), self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.end - self.pos < n {
            return Err(DecodeError::truncated(self.bytes, self.end));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn fixed<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let s = self.take(N)?;
        Ok(s.try_into().expect("length checked"))
    }

    fn name(&mut self) -> Result<String, DecodeError> {
        let at = self.pos;
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| malformed(at, "name is not UTF-8"))
    }

    fn count(&mut self) -> Result<u32, DecodeError> {
        let at = self.pos;
        let n = self.u32()?;
        // Every vector element occupies at least one byte.
        if n as usize > self.end - self.pos {
            return Err(DecodeError::truncated(self.bytes, at.max(self.pos)));
        }
        Ok(n)
    }

    fn val_type(&mut self) -> Result<ValType, DecodeError> {
        let at = self.pos;
        let b = self.byte()?;
        ValType::from_byte(b)
            .ok_or_else(|| malformed(at, &format!("unsupported value type 0x{b:02x}")))
    }

    fn limits(&mut self) -> Result<Limits, DecodeError> {
        let at = self.pos;
        match self.byte()? {
            0x00 => Ok(Limits {
                min: self.u32()?,
                max: None,
            }),
            0x01 => Ok(Limits {
                min: self.u32()?,
                max: Some(self.u32()?),
            }),
            b => Err(malformed(at, &format!("unsupported limits flag 0x{b:02x}"))),
        }
    }
}

fn malformed(offset: usize, what: &str) -> DecodeError {
    DecodeError::Malformed {
        offset,
        what: what.to_string(),
    }
}

/// Decodes a complete binary module.
pub fn decode_module(bytes: &[u8]) -> Result<WasmModule, DecodeError> {
    if bytes.len() < 8 || bytes[..8] != MAGIC {
        let offset = bytes
            .iter()
            .zip(MAGIC.iter())
            .position(|(a, b)| a != b)
            .unwrap_or(bytes.len());
        return Err(DecodeError::BadMagic {
            offset: offset.min(bytes.len().saturating_sub(1)),
        });
    }
    let mut module = WasmModule::default();
    let mut r = Reader::new(bytes, 8, bytes.len());
    let mut last_rank: Option<u8> = None;
    let mut func_types: Vec<u32> = Vec::new();
    let mut saw_code = false;

    while !r.at_end() {
        let section_start = r.pos;
        let id = r.byte()?;
        let size = r.u32()? as usize;
        if size > bytes.len() - r.pos {
            return Err(DecodeError::truncated(bytes, bytes.len()));
        }
        let end = r.pos + size;
        let mut s = Reader::new(bytes, r.pos, end);
        r.pos = end;

        if id == 0 {
            let name = s.name().ok();
            module.skipped_sections.push(SkippedSection {
                id,
                offset: section_start,
                name,
            });
            continue;
        }
        let Some(rank) = section_rank(id) else {
            module.skipped_sections.push(SkippedSection {
                id,
                offset: section_start,
                name: None,
            });
            continue;
        };
        if last_rank.is_some_and(|l| rank <= l) {
            return Err(DecodeError::SectionOrder {
                id,
                offset: section_start,
            });
        }
        last_rank = Some(rank);

        match id {
            1 => {
                for _ in 0..s.count()? {
                    let at = s.pos;
                    if s.byte()? != 0x60 {
                        return Err(malformed(at, "expected function type"));
                    }
                    let params = (0..s.count()?)
                        .map(|_| s.val_type())
                        .collect::<Result<_, _>>()?;
                    let results = (0..s.count()?)
                        .map(|_| s.val_type())
                        .collect::<Result<_, _>>()?;
                    module.types.push(FuncType { params, results });
                }
            }
            2 => {
                for _ in 0..s.count()? {
                    let module_name = s.name()?;
                    let field = s.name()?;
                    let at = s.pos;
                    let kind = match s.byte()? {
                        0x00 => ImportKind::Func(s.u32()?),
                        0x01 => {
                            let rt = s.pos;
                            if s.byte()? != 0x70 {
                                return Err(malformed(rt, "unsupported table element type"));
                            }
                            ImportKind::Table(s.limits()?)
                        }
                        0x02 => ImportKind::Memory(s.limits()?),
                        0x03 => {
                            let ty = s.val_type()?;
                            let mutable = mutability(&mut s)?;
                            ImportKind::Global { ty, mutable }
                        }
                        b => return Err(malformed(at, &format!("unknown import kind 0x{b:02x}"))),
                    };
                    module.imports.push(Import {
                        module: module_name,
                        field,
                        kind,
                    });
                }
            }
            3 => {
                for _ in 0..s.count()? {
                    func_types.push(s.u32()?);
                }
            }
            4 => {
                for _ in 0..s.count()? {
                    let rt = s.pos;
                    if s.byte()? != 0x70 {
                        return Err(malformed(rt, "unsupported table element type"));
                    }
                    module.tables.push(s.limits()?);
                }
            }
            5 => {
                for _ in 0..s.count()? {
                    module.memories.push(s.limits()?);
                }
            }
            6 => {
                for _ in 0..s.count()? {
                    let ty = s.val_type()?;
                    let mutable = mutability(&mut s)?;
                    let init = const_expr(&mut s)?;
                    module.globals.push(Global { ty, mutable, init });
                }
            }
            7 => {
                for _ in 0..s.count()? {
                    let name = s.name()?;
                    let at = s.pos;
                    let kind = match s.byte()? {
                        0x00 => ExternalKind::Func,
                        0x01 => ExternalKind::Table,
                        0x02 => ExternalKind::Memory,
                        0x03 => ExternalKind::Global,
                        b => return Err(malformed(at, &format!("unknown export kind 0x{b:02x}"))),
                    };
                    let index = s.u32()?;
                    module.exports.push(Export { name, kind, index });
                }
            }
            8 => module.start = Some(s.u32()?),
            9 => {
                for _ in 0..s.count()? {
                    let at = s.pos;
                    let flags = s.u32()?;
                    let table_idx = match flags {
                        0 => 0,
                        2 => s.u32()?,
                        _ => {
                            return Err(malformed(
                                at,
                                &format!("unsupported element segment flags {flags}"),
                            ))
                        }
                    };
                    let offset_expr = const_expr(&mut s)?;
                    if flags == 2 {
                        let kind_at = s.pos;
                        if s.byte()? != 0x00 {
                            return Err(malformed(kind_at, "unsupported element kind"));
                        }
                    }
                    let func_indices =
                        (0..s.count()?).map(|_| s.u32()).collect::<Result<_, _>>()?;
                    module.elements.push(ElementSegment {
                        table_idx,
                        offset_expr,
                        func_indices,
                    });
                }
            }
            12 => {
                s.u32()?;
            }
            10 => {
                saw_code = true;
                let count_at = s.pos;
                let n = s.count()?;
                if n as usize != func_types.len() {
                    return Err(malformed(
                        count_at,
                        "function and code section counts differ",
                    ));
                }
                for &type_idx in func_types.iter() {
                    let size = s.u32()? as usize;
                    let body_start = s.pos;
                    s.take(size)?;
                    let (locals, instrs) = match decode_locals(bytes, body_start, body_start + size)
                    {
                        Ok((locals, instr_start)) => (
                            locals,
                            decode_expr_at(bytes, instr_start, body_start + size),
                        ),
                        Err(e) => (Vec::new(), Err(e)),
                    };
                    module.functions.push(Function {
                        type_idx,
                        locals,
                        body: instrs,
                        offset: body_start,
                    });
                }
            }
            11 => {
                for _ in 0..s.count()? {
                    let at = s.pos;
                    let flags = s.u32()?;
                    let (mem_idx, passive) = match flags {
                        0 => (0, false),
                        1 => (0, true),
                        2 => (s.u32()?, false),
                        _ => {
                            return Err(malformed(
                                at,
                                &format!("unsupported data segment flags {flags}"),
                            ))
                        }
                    };
                    let offset_expr = if passive {
                        Vec::new()
                    } else {
                        const_expr(&mut s)?
                    };
                    let len = s.u32()? as usize;
                    let payload = s.take(len)?.to_vec();
                    module.data_segments.push(DataSegment {
                        mem_idx,
                        offset_expr,
                        passive,
                        bytes: payload,
                    });
                }
            }
            _ => unreachable!("rank table covers all known ids"),
        }
        if !s.at_end() {
            return Err(malformed(
                s.pos,
                &format!("section {id} has trailing bytes"),
            ));
        }
    }

    if !saw_code && !func_types.is_empty() {
        return Err(malformed(
            bytes.len() - 1,
            "function section without code section",
        ));
    }
    validate_indices(&module, bytes.len())?;
    Ok(module)
}

fn mutability(s: &mut Reader) -> Result<bool, DecodeError> {
    let at = s.pos;
    match s.byte()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(malformed(at, &format!("bad mutability flag 0x{b:02x}"))),
    }
}

fn const_expr(s: &mut Reader) -> Result<Vec<Instr>, DecodeError> {
    let mut d = BodyDecoder {
        r: Reader::new(s.bytes, s.pos, s.end),
        depth: 0,
    };
    let (instrs, terminator) = d.seq()?;
    if terminator != Terminator::End {
        return Err(DecodeError::Unbalanced {
            offset: d.r.pos - 1,
        });
    }
    s.pos = d.r.pos;
    Ok(instrs)
}

fn validate_indices(m: &WasmModule, len: usize) -> Result<(), DecodeError> {
    let at = len.saturating_sub(1);
    let total = m.total_funcs();
    for (_, t) in m.imported_funcs() {
        if t as usize >= m.types.len() {
            return Err(malformed(at, "import references unknown type"));
        }
    }
    for f in &m.functions {
        if f.type_idx as usize >= m.types.len() {
            return Err(malformed(at, "function references unknown type"));
        }
    }
    for e in &m.exports {
        if e.kind == ExternalKind::Func && e.index >= total {
            return Err(malformed(
                at,
                &format!("export {} references unknown function", e.name),
            ));
        }
    }
    for seg in &m.elements {
        if seg.func_indices.iter().any(|&f| f >= total) {
            return Err(malformed(at, "element segment references unknown function"));
        }
    }
    let memories = m.memories.len()
        + m.imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Memory(_)))
            .count();
    if memories > 1 {
        return Err(malformed(at, "multiple memories are not supported"));
    }
    Ok(())
}

/// Decodes a code-section entry (without its size prefix): local
/// declarations followed by the instruction sequence.
pub fn decode_body(body: &[u8]) -> Result<(Vec<ValType>, Vec<Instr>), DecodeError> {
    let (locals, start) = decode_locals(body, 0, body.len())?;
    let instrs = decode_expr_at(body, start, body.len())?;
    Ok((locals, instrs))
}

fn decode_locals(
    bytes: &[u8],
    start: usize,
    end: usize,
) -> Result<(Vec<ValType>, usize), DecodeError> {
    let mut r = Reader::new(bytes, start, end);
    let mut locals = Vec::new();
    let mut total: u64 = 0;
    for _ in 0..r.count()? {
        let at = r.pos;
        let n = r.u32()?;
        total += u64::from(n);
        if total > MAX_LOCALS {
            return Err(malformed(at, "too many locals"));
        }
        let ty = r.val_type()?;
        locals.extend(std::iter::repeat_n(ty, n as usize));
    }
    Ok((locals, r.pos))
}

fn decode_expr_at(bytes: &[u8], start: usize, end: usize) -> Result<Vec<Instr>, DecodeError> {
    let mut d = BodyDecoder {
        r: Reader::new(bytes, start, end),
        depth: 0,
    };
    let (instrs, term) = d.seq()?;
    if term != Terminator::End {
        return Err(DecodeError::Unbalanced {
            offset: d.r.pos - 1,
        });
    }
    if !d.r.at_end() {
        return Err(DecodeError::Unbalanced { offset: d.r.pos });
    }
    Ok(instrs)
}

#[derive(Debug, PartialEq, Eq)]
enum Terminator {
    End,
    Else,
}

struct BodyDecoder<'a> {
    r: Reader<'a>,
    depth: usize,
}

impl BodyDecoder<'_> {
    /// Reads instructions up to and including the matching `end` or `else`.
    fn seq(&mut self) -> Result<(Vec<Instr>, Terminator), DecodeError> {
        let mut out = Vec::new();
        loop {
            if self.r.at_end() {
                return Err(DecodeError::Unbalanced {
                    offset: self.r.pos.min(self.r.bytes.len().saturating_sub(1)),
                });
            }
            let at = self.r.pos;
            let op = self.r.byte()?;
            match op {
                0x0B => return Ok((out, Terminator::End)),
                0x05 => return Ok((out, Terminator::Else)),
                _ => out.push(self.instr(op, at)?),
            }
        }
    }

    fn block_type(&mut self) -> Result<BlockType, DecodeError> {
        let at = self.r.pos;
        let b = *self
            .r
            .bytes
            .get(at)
            .filter(|_| at < self.r.end)
            .ok_or_else(|| DecodeError::truncated(self.r.bytes, at))?;
        if b == 0x40 {
            self.r.pos += 1;
            return Ok(BlockType::Empty);
        }
        if let Some(t) = ValType::from_byte(b) {
            self.r.pos += 1;
            return Ok(BlockType::Value(t));
        }
        let (idx, next) = decode_sleb64(self.r.window(), at)?;
        if idx < 0 || idx > i64::from(u32::MAX) {
            return Err(malformed(at, "bad block type"));
        }
        self.r.pos = next;
        Ok(BlockType::Func(idx as u32))
    }

    fn nested(&mut self, at: usize) -> Result<(Vec<Instr>, Terminator), DecodeError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(malformed(at, "blocks nested too deeply"));
        }
        let result = self.seq();
        self.depth -= 1;
        result
    }

    fn instr(&mut self, op: u8, at: usize) -> Result<Instr, DecodeError> {
        if let Some(i) = simple_opcode(op) {
            return Ok(i);
        }
        Ok(match op {
            0x02 | 0x03 => {
                let ty = self.block_type()?;
                let (body, term) = self.nested(at)?;
                if term == Terminator::Else {
                    return Err(DecodeError::Unbalanced {
                        offset: self.r.pos - 1,
                    });
                }
                if op == 0x02 {
                    Instr::Block { ty, body }
                } else {
                    Instr::Loop { ty, body }
                }
            }
            0x04 => {
                let ty = self.block_type()?;
                let (then, term) = self.nested(at)?;
                let otherwise = if term == Terminator::Else {
                    let (o, t2) = self.nested(at)?;
                    if t2 == Terminator::Else {
                        return Err(DecodeError::Unbalanced {
                            offset: self.r.pos - 1,
                        });
                    }
                    o
                } else {
                    Vec::new()
                };
                Instr::If {
                    ty,
                    then,
                    otherwise,
                }
            }
            0x0C => Instr::Br(self.r.u32()?),
            0x0D => Instr::BrIf(self.r.u32()?),
            0x0E => {
                let n = self.r.count()?;
                let targets = (0..n).map(|_| self.r.u32()).collect::<Result<_, _>>()?;
                Instr::BrTable {
                    targets,
                    default: self.r.u32()?,
                }
            }
            0x10 => Instr::Call(self.r.u32()?),
            0x11 => {
                let type_idx = self.r.u32()?;
                let table = self.r.u32()?;
                Instr::CallIndirect { type_idx, table }
            }
            0x20 => Instr::LocalGet(self.r.u32()?),
            0x21 => Instr::LocalSet(self.r.u32()?),
            0x22 => Instr::LocalTee(self.r.u32()?),
            0x23 => Instr::GlobalGet(self.r.u32()?),
            0x24 => Instr::GlobalSet(self.r.u32()?),
            0x28..=0x3E => {
                let align = self.r.u32()?;
                let offset = self.r.u32()?;
                memory_opcode(op, MemArg { align, offset }).expect("range checked")
            }
            0x3F | 0x40 => {
                let idx_at = self.r.pos;
                if self.r.byte()? != 0 {
                    return Err(DecodeError::UnsupportedOpcode {
                        byte: u32::from(op),
                        offset: idx_at - 1,
                    });
                }
                if op == 0x3F {
                    Instr::MemorySize
                } else {
                    Instr::MemoryGrow
                }
            }
            0x41 => Instr::I32Const(self.r.i32()?),
            0x42 => Instr::I64Const(self.r.i64()?),
            0x43 => Instr::F32Const(u32::from_le_bytes(self.r.fixed::<4>()?)),
            0x44 => Instr::F64Const(u64::from_le_bytes(self.r.fixed::<8>()?)),
            0xFC..=0xFE => {
                let sub = decode_uleb(self.r.window(), self.r.pos)
                    .map(|(v, _)| v)
                    .unwrap_or(0);
                return Err(DecodeError::UnsupportedOpcode {
                    byte: (u32::from(op) << 8) | sub.min(0xFF),
                    offset: at,
                });
            }
            _ => {
                return Err(DecodeError::UnsupportedOpcode {
                    byte: u32::from(op),
                    offset: at,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only() {
        let m = decode_module(&MAGIC).unwrap();
        assert_eq!(m, WasmModule::default());
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            decode_module(&[0xFF, 0x61, 0x73, 0x6D, 1, 0, 0, 0]),
            Err(DecodeError::BadMagic { offset: 0 })
        ));
        assert!(matches!(
            decode_module(&[0x00, 0x61]),
            Err(DecodeError::BadMagic { .. })
        ));
        assert!(matches!(
            decode_module(&[0, 0x61, 0x73, 0x6D, 2, 0, 0, 0]),
            Err(DecodeError::BadMagic { offset: 4 })
        ));
    }

    #[test]
    fn body_mul() {
        let (locals, body) = decode_body(&[0x00, 0x41, 2, 0x41, 3, 0x6C, 0x0B]).unwrap();
        assert!(locals.is_empty());
        assert_eq!(
            body,
            vec![
                Instr::I32Const(2),
                Instr::I32Const(3),
                Instr::IntBin(IntWidth::W32, IntBinOp::Mul)
            ]
        );
    }

    #[test]
    fn empty_body() {
        assert_eq!(decode_body(&[0x00, 0x0B]).unwrap().1, vec![]);
    }

    #[test]
    fn unbalanced_body() {
        assert!(matches!(
            decode_body(&[0x00, 0x02, 0x40, 0x0B]),
            Err(DecodeError::Unbalanced { .. })
        ));
        assert!(matches!(
            decode_body(&[0x00, 0x0B, 0x0B]),
            Err(DecodeError::Unbalanced { .. })
        ));
    }

    #[test]
    fn rejected_opcodes() {
        // f32.abs, i32.reinterpret_f32, i32.extend8_s, memory.fill
        for body in [
            vec![0x00, 0x8B, 0x0B],
            vec![0x00, 0xBC, 0x0B],
            vec![0x00, 0xC0, 0x0B],
            vec![0x00, 0xFC, 0x0B, 0x0B],
        ] {
            assert!(matches!(
                decode_body(&body),
                Err(DecodeError::UnsupportedOpcode { .. })
            ));
        }
    }

    #[test]
    fn section_order_enforced() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend([5, 3, 1, 0, 1]); // memory
        bytes.extend([1, 1, 0]); // type section after memory
        assert!(matches!(
            decode_module(&bytes),
            Err(DecodeError::SectionOrder { id: 1, .. })
        ));
    }

    #[test]
    fn custom_sections_are_recorded() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend([0, 4, 3, b'a', b'b', b'c']);
        let m = decode_module(&bytes).unwrap();
        assert_eq!(m.skipped_sections.len(), 1);
        assert_eq!(m.skipped_sections[0].name.as_deref(), Some("abc"));
    }

    #[test]
    fn truncated_section() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend([1, 10, 0]);
        let err = decode_module(&bytes).unwrap_err();
        assert!(matches!(err, DecodeError::TruncatedSection { .. }));
        assert!(err.offset() < bytes.len());
    }
}
