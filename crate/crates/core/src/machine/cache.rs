/// Kind of access presented to a cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Fetch,
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub hit: bool,
    /// A dirty line was evicted to make room.
    pub writeback: bool,
}

#[derive(Debug, Clone, Copy)]
struct Way {
    tag: u32,
    dirty: bool,
}

/// Set-associative cache with LRU replacement, write-back and
/// write-allocate. Each set keeps its ways most-recent first.
#[derive(Debug, Clone)]
pub struct Cache {
    line_shift: u32,
    set_mask: u32,
    ways: usize,
    sets: Vec<Vec<Way>>,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
}

impl Cache {
    /// `assoc` must divide the line count, leaving a power-of-two number
    /// of sets.
    pub fn new(bytes: u32, line_bytes: u32, assoc: u32) -> Self {
        assert!(line_bytes.is_power_of_two(), "line size must be a power of two");
        let lines = bytes / line_bytes;
        assert!(assoc > 0 && lines >= assoc && lines.is_multiple_of(assoc), "associativity must divide the line count");
        let sets = lines / assoc;
        assert!(sets.is_power_of_two(), "set count must be a power of two");
        Self {
            line_shift: line_bytes.trailing_zeros(),
            set_mask: sets - 1,
            ways: assoc as usize,
            sets: vec![Vec::with_capacity(assoc as usize); sets as usize],
            hits: 0,
            misses: 0,
            writebacks: 0,
        }
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    pub fn access(&mut self, addr: u32, kind: AccessKind) -> Access {
        let line = addr >> self.line_shift;
        let set = &mut self.sets[(line & self.set_mask) as usize];
        let tag = line >> self.set_mask.count_ones();
        let write = kind == AccessKind::Store;
        if let Some(pos) = set.iter().position(|w| w.tag == tag) {
            let mut way = set.remove(pos);
            way.dirty |= write;
            set.insert(0, way);
            self.hits += 1;
            return Access { hit: true, writeback: false };
        }
        self.misses += 1;
        let mut writeback = false;
        if set.len() == self.ways {
            writeback = set.pop().is_some_and(|w| w.dirty);
        }
        set.insert(0, Way { tag, dirty: write });
        if writeback {
            self.writebacks += 1;
        }
        Access { hit: false, writeback }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn repeated_address_misses_once() {
        let mut c = Cache::new(1024, 32, 2);
        let hits: Vec<bool> = (0..5).map(|_| c.access(0x100, AccessKind::Load).hit).collect();
        assert_eq!(hits, [false, true, true, true, true]);
    }

    #[test]
    fn cycling_past_associativity_always_misses() {
        let mut c = Cache::new(1024, 32, 4);
        let stride = 32 * c.set_count() as u32;
        for i in 0..50u32 {
            assert!(!c.access((i % 5) * stride, AccessKind::Load).hit);
        }
        assert_eq!(c.misses, 50);
    }

    #[test]
    fn dirty_eviction_writes_back() {
        let mut c = Cache::new(64, 32, 1);
        c.access(0, AccessKind::Store);
        assert!(c.access(64, AccessKind::Load).writeback);
        assert!(!c.access(0, AccessKind::Load).writeback);
    }

    proptest! {
        #[test]
        fn more_ways_never_miss_more(addrs in proptest::collection::vec(0u32..4096, 1..400), sets_log in 0u32..4, ways in 1u32..4) {
            let sets = 1 << sets_log;
            let mut narrow = Cache::new(16 * sets * ways, 16, ways);
            let mut wide = Cache::new(16 * sets * ways * 2, 16, ways * 2);
            for &a in &addrs {
                narrow.access(a, AccessKind::Load);
                wide.access(a, AccessKind::Load);
            }
            prop_assert!(wide.misses <= narrow.misses);
        }
    }
}
