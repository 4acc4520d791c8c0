//! Static reconstruction of JavaScript/WebAssembly programs into plain JavaScript.

pub mod harness;
pub mod interop;
pub mod js;
pub mod oracle;
pub mod pdg;
pub mod reconstruct;
pub mod ssr;
pub mod wasm;
