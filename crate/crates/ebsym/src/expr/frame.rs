use std::collections::BTreeMap;

/// Differentiation order multi-index over the two active independent
/// variables. `[i, j]` means i derivatives in the first variable and j in the
/// second.
pub type Idx2 = [u32; 2];

/// The active chart: names of the two independent variables plus the declared
/// dependencies of the unknown (jet) functions. A function absent from `deps`
/// is assumed to depend on both variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub vars: [String; 2],
    pub deps: BTreeMap<String, [bool; 2]>,
}

impl Frame {
    pub fn new(v0: &str, v1: &str) -> Self {
        Frame {
            vars: [v0.to_string(), v1.to_string()],
            deps: BTreeMap::new(),
        }
    }

    /// The standard target chart (y, z) used throughout the derivation.
    pub fn yz() -> Self {
        Frame::new("y", "z")
    }

    /// The source chart (t, x) used by the symmetry computations.
    pub fn tx() -> Self {
        Frame::new("t", "x")
    }

    /// Declare that `func` depends only on the variables flagged true.
    pub fn with_dep(mut self, func: &str, on: [bool; 2]) -> Self {
        self.deps.insert(func.to_string(), on);
        self
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn depends(&self, func: &str, slot: usize) -> bool {
        self.deps.get(func).map(|d| d[slot]).unwrap_or(true)
    }

    /// A jet index is admissible when it is zero in every direction the
    /// function does not depend on.
    pub fn admissible(&self, func: &str, idx: Idx2) -> bool {
        (0..2).all(|s| idx[s] == 0 || self.depends(func, s))
    }
}

pub fn idx_add(a: Idx2, slot: usize) -> Idx2 {
    let mut b = a;
    b[slot] += 1;
    b
}

/// Graded-lexicographic order on jet indices, first variable before second.
/// Used wherever deterministic coefficient listings are needed.
pub fn grlex(a: Idx2, b: Idx2) -> std::cmp::Ordering {
    let (da, db) = (a[0] + a[1], b[0] + b[1]);
    da.cmp(&db).then(a.cmp(&b))
}

/// Newtype key ordering jet indices graded-lexicographically in maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetIdx(pub Idx2);

impl PartialOrd for JetIdx {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JetIdx {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        grlex(self.0, other.0)
    }
}
