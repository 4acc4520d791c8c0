use std::collections::{BTreeSet, HashMap, HashSet};

/// Deterministic fresh-name source for one reconstruction.
///
/// Names are drawn from per-prefix counters (`C_0`, `T_3`, ...) or requested
/// verbatim (`MEM`, `loc1`); either way a name already used by the
/// JavaScript unit or handed out earlier is never returned.
#[derive(Clone, Debug, Default)]
pub struct NameGenerator {
    reserved: BTreeSet<String>,
    issued: HashSet<String>,
    counters: HashMap<String, u32>,
    frames: u32,
}

impl NameGenerator {
    pub fn new(reserved: impl IntoIterator<Item = String>) -> Self {
        NameGenerator {
            reserved: reserved.into_iter().collect(),
            ..Default::default()
        }
    }

    fn taken(&self, name: &str) -> bool {
        self.reserved.contains(name) || self.issued.contains(name)
    }

    /// Next `{prefix}_{n}` name.
    pub fn counter(&mut self, prefix: &str) -> String {
        loop {
            let n = self.counters.entry(prefix.to_string()).or_insert(0);
            let name = format!("{prefix}_{n}");
            *n += 1;
            if !self.taken(&name) {
                self.issued.insert(name.clone());
                return name;
            }
        }
    }

    /// `base` itself if free, otherwise `base_1`, `base_2`, ...
    pub fn fixed(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut k = 1;
        while self.taken(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.issued.insert(name.clone());
        name
    }

    /// Allocates a frame number for one abstracted function body.
    pub fn frame(&mut self) -> u32 {
        let f = self.frames;
        self.frames += 1;
        f
    }

    pub fn issued(&self) -> impl Iterator<Item = &String> {
        self.issued.iter()
    }

    pub fn is_reserved(&self, name: &str) -> bool {
        self.reserved.contains(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_skip_reserved() {
        let mut g = NameGenerator::new(["C_1".to_string(), "MEM".to_string()]);
        assert_eq!(g.counter("C"), "C_0");
        assert_eq!(g.counter("C"), "C_2");
        assert_eq!(g.counter("T"), "T_0");
        assert_eq!(g.fixed("MEM"), "MEM_1");
        assert_eq!(g.fixed("MEM"), "MEM_2");
        assert_eq!(g.fixed("loc0"), "loc0");
    }
}
