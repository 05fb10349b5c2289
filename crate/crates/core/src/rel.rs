//! Dense binary relations over at most 64 elements, one bitset row each.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    rows: Vec<u64>,
}

impl Relation {
    pub fn new(n: usize) -> Self {
        assert!(n <= 64, "relation over {n} elements exceeds 64");
        Relation { rows: vec![0; n] }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn add(&mut self, a: usize, b: usize) {
        self.rows[a] |= 1 << b;
    }

    pub fn has(&self, a: usize, b: usize) -> bool {
        self.rows[a] >> b & 1 == 1
    }

    pub fn row(&self, a: usize) -> u64 {
        self.rows[a]
    }

    pub fn union_with(&mut self, other: &Relation) {
        for (r, o) in self.rows.iter_mut().zip(&other.rows) {
            *r |= o;
        }
    }

    /// Transitive closure (Warshall).
    pub fn closure(&self) -> Relation {
        let mut rows = self.rows.clone();
        let n = rows.len();
        for k in 0..n {
            let rk = rows[k];
            let bit = 1u64 << k;
            for r in rows.iter_mut() {
                if *r & bit != 0 {
                    *r |= rk;
                }
            }
        }
        Relation { rows }
    }

    pub fn is_irreflexive(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r >> i & 1 == 0)
    }

    pub fn is_acyclic(&self) -> bool {
        topo_order(&self.rows).is_some()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(a, r)| (0..64).filter(move |b| r >> b & 1 == 1).map(move |b| (a, b)))
    }
}

/// Kahn's algorithm over bitset adjacency; returns `None` on a cycle.
/// Ties break toward the smallest index, so the order is canonical.
pub fn topo_order(rows: &[u64]) -> Option<Vec<usize>> {
    let n = rows.len();
    let mut preds = vec![0u64; n];
    for (a, r) in rows.iter().enumerate() {
        for b in 0..n {
            if r >> b & 1 == 1 {
                preds[b] |= 1 << a;
            }
        }
    }
    let mut done = 0u64;
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| done >> i & 1 == 0 && preds[i] & !done == 0)?;
        done |= 1 << next;
        order.push(next);
    }
    Some(order)
}
