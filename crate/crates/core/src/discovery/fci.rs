//! FCI over discrete data and Markov-blanket extraction on the resulting PAG.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::ci::{CiTester, DiscreteData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mark {
    Circle,
    Arrow,
    Tail,
}

/// Partial ancestral graph. `mark(i, j)` is the mark at the `j` end of the
/// edge between `i` and `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pag {
    marks: Vec<Vec<Option<Mark>>>,
}

impl Pag {
    pub fn complete(n: usize) -> Self {
        let marks = (0..n)
            .map(|i| (0..n).map(|j| (i != j).then_some(Mark::Circle)).collect())
            .collect();
        Self { marks }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            marks: vec![vec![None; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.marks[i][j].is_some()
    }

    pub fn mark(&self, i: usize, j: usize) -> Option<Mark> {
        self.marks[i][j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, at_i: Mark, at_j: Mark) {
        self.marks[j][i] = Some(at_i);
        self.marks[i][j] = Some(at_j);
    }

    fn set_mark(&mut self, i: usize, j: usize, at_j: Mark) -> bool {
        if self.marks[i][j] == Some(at_j) {
            return false;
        }
        self.marks[i][j] = Some(at_j);
        true
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.marks[i][j] = None;
        self.marks[j][i] = None;
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.adjacent(i, j)).collect()
    }

    fn is(&self, i: usize, j: usize, at_j: Mark) -> bool {
        self.marks[i][j] == Some(at_j)
    }

    /// i → j.
    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.is(i, j, Mark::Arrow) && self.is(j, i, Mark::Tail)
    }

    fn reset_marks(&mut self) {
        for row in &mut self.marks {
            for m in row.iter_mut().flatten() {
                *m = Mark::Circle;
            }
        }
    }

    /// Edges as (i, j, mark at i, mark at j) with i < j.
    pub fn edges(&self) -> Vec<(usize, usize, Mark, Mark)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if let (Some(a), Some(b)) = (self.marks[j][i], self.marks[i][j]) {
                    out.push((i, j, a, b));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FciConfig {
    pub significance: f64,
    /// Largest conditioning set tried; `None` for no limit.
    pub max_depth: Option<usize>,
}

impl Default for FciConfig {
    fn default() -> Self {
        Self {
            significance: super::ci::DEFAULT_SIGNIFICANCE,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FciResult {
    /// Node `i` is data column `columns[i]`.
    pub pag: Pag,
    pub columns: Vec<usize>,
    pub sepsets: HashMap<(usize, usize), Vec<usize>>,
    pub degenerate_tests: usize,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - current.len() {
                break;
            }
            current.push(items[i]);
            rec(items, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}

struct Search<'a, 'b> {
    tester: &'b mut CiTester<'a>,
    columns: &'b [usize],
}

impl Search<'_, '_> {
    fn independent(&mut self, x: usize, y: usize, s: &[usize]) -> bool {
        let z: Vec<usize> = s.iter().map(|&v| self.columns[v]).collect();
        self.tester.independent(self.columns[x], self.columns[y], &z)
    }
}

/// Runs FCI over the given data columns.
pub fn fci(data: &DiscreteData, columns: &[usize], config: &FciConfig) -> FciResult {
    let n = columns.len();
    let mut tester = CiTester::new(data, config.significance);
    let mut search = Search {
        tester: &mut tester,
        columns,
    };
    let mut pag = Pag::complete(n);
    let mut sepsets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let depth_ok = |d: usize| config.max_depth.is_none_or(|m| d <= m);

    // adjacency search, order-independent within each depth
    let mut depth = 0;
    while depth_ok(depth) {
        let snapshot: Vec<Vec<usize>> = (0..n).map(|i| pag.neighbors(i)).collect();
        let mut any = false;
        for x in 0..n {
            for &y in &snapshot[x] {
                if !pag.adjacent(x, y) {
                    continue;
                }
                let others: Vec<usize> = snapshot[x].iter().copied().filter(|&v| v != y).collect();
                if others.len() < depth {
                    continue;
                }
                any = true;
                for s in combinations(&others, depth) {
                    if search.independent(x, y, &s) {
                        pag.remove_edge(x, y);
                        sepsets.insert(key(x, y), s);
                        break;
                    }
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }

    orient_colliders(&mut pag, &sepsets);

    // possible-d-sep stage
    let pds: Vec<Vec<usize>> = (0..n).map(|x| possible_d_sep(&pag, x)).collect();
    for x in 0..n {
        for y in pag.neighbors(x) {
            if y < x || !pag.adjacent(x, y) {
                continue;
            }
            let mut removed = false;
            for &(a, b) in &[(x, y), (y, x)] {
                if removed {
                    break;
                }
                let pool: Vec<usize> = pds[a].iter().copied().filter(|&v| v != a && v != b).collect();
                let mut size = 1;
                while size <= pool.len() && depth_ok(size) && !removed {
                    for s in combinations(&pool, size) {
                        if search.independent(a, b, &s) {
                            pag.remove_edge(a, b);
                            sepsets.insert(key(a, b), s);
                            removed = true;
                            break;
                        }
                    }
                    size += 1;
                }
            }
        }
    }

    pag.reset_marks();
    orient_colliders(&mut pag, &sepsets);
    apply_rules(&mut pag, &sepsets);

    let degenerate_tests = tester.degenerate_tests;
    if degenerate_tests > 0 {
        log::warn!("{degenerate_tests} CI tests had no populated cells and were read as independence");
    }
    FciResult {
        pag,
        columns: columns.to_vec(),
        sepsets,
        degenerate_tests,
    }
}

fn orient_colliders(pag: &mut Pag, sepsets: &HashMap<(usize, usize), Vec<usize>>) {
    let n = pag.len();
    for b in 0..n {
        let nb = pag.neighbors(b);
        for (ia, &a) in nb.iter().enumerate() {
            for &c in &nb[ia + 1..] {
                if pag.adjacent(a, c) {
                    continue;
                }
                let in_sep = sepsets.get(&key(a, c)).is_some_and(|s| s.contains(&b));
                if !in_sep {
                    pag.set_mark(a, b, Mark::Arrow);
                    pag.set_mark(c, b, Mark::Arrow);
                }
            }
        }
    }
}

/// Nodes reachable from `x` along paths on which every inner node is a
/// collider or sits in a triangle with its path neighbours.
fn possible_d_sep(pag: &Pag, x: usize) -> Vec<usize> {
    let n = pag.len();
    let mut seen_edge = vec![vec![false; n]; n];
    let mut reach = BTreeSet::new();
    let mut queue = VecDeque::new();
    for y in pag.neighbors(x) {
        seen_edge[x][y] = true;
        reach.insert(y);
        queue.push_back((x, y));
    }
    while let Some((a, b)) = queue.pop_front() {
        for c in pag.neighbors(b) {
            if c == a || c == x || seen_edge[b][c] {
                continue;
            }
            let collider = pag.is(a, b, Mark::Arrow) && pag.is(c, b, Mark::Arrow);
            if collider || pag.adjacent(a, c) {
                seen_edge[b][c] = true;
                reach.insert(c);
                queue.push_back((b, c));
            }
        }
    }
    reach.into_iter().collect()
}

fn apply_rules(pag: &mut Pag, sepsets: &HashMap<(usize, usize), Vec<usize>>) {
    loop {
        let mut changed = false;
        changed |= rule1(pag);
        changed |= rule2(pag);
        changed |= rule3(pag);
        changed |= rule4(pag, sepsets);
        changed |= rule8(pag);
        changed |= rule9(pag);
        changed |= rule10(pag);
        if !changed {
            break;
        }
    }
}

/// α *→ β o−* γ, α and γ non-adjacent ⇒ β → γ.
fn rule1(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for b in 0..n {
        for a in pag.neighbors(b) {
            if !pag.is(a, b, Mark::Arrow) {
                continue;
            }
            for c in pag.neighbors(b) {
                if c == a || pag.adjacent(a, c) || !pag.is(c, b, Mark::Circle) {
                    continue;
                }
                changed |= pag.set_mark(b, c, Mark::Arrow);
                changed |= pag.set_mark(c, b, Mark::Tail);
            }
        }
    }
    changed
}

/// α → β *→ γ or α *→ β → γ, with α *−o γ ⇒ α *→ γ.
fn rule2(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for a in 0..n {
        for c in pag.neighbors(a) {
            if !pag.is(a, c, Mark::Circle) {
                continue;
            }
            let fire = pag.neighbors(a).into_iter().any(|b| {
                b != c
                    && pag.adjacent(b, c)
                    && ((pag.is_directed(a, b) && pag.is(b, c, Mark::Arrow))
                        || (pag.is(a, b, Mark::Arrow) && pag.is_directed(b, c)))
            });
            if fire {
                changed |= pag.set_mark(a, c, Mark::Arrow);
            }
        }
    }
    changed
}

/// α *→ β ←* γ, α *−o θ o−* γ, α and γ non-adjacent, θ *−o β ⇒ θ *→ β.
fn rule3(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for b in 0..n {
        for t in pag.neighbors(b) {
            if !pag.is(t, b, Mark::Circle) {
                continue;
            }
            let parents: Vec<usize> = pag
                .neighbors(b)
                .into_iter()
                .filter(|&v| v != t && pag.is(v, b, Mark::Arrow) && pag.adjacent(v, t) && pag.is(v, t, Mark::Circle))
                .collect();
            let mut fire = false;
            for (i, &a) in parents.iter().enumerate() {
                for &c in &parents[i + 1..] {
                    if !pag.adjacent(a, c) {
                        fire = true;
                    }
                }
            }
            if fire {
                changed |= pag.set_mark(t, b, Mark::Arrow);
            }
        }
    }
    changed
}

/// Discriminating-path rule.
fn rule4(pag: &mut Pag, sepsets: &HashMap<(usize, usize), Vec<usize>>) -> bool {
    let n = pag.len();
    for g in 0..n {
        for b in pag.neighbors(g) {
            if !pag.is(g, b, Mark::Circle) {
                continue;
            }
            for a in pag.neighbors(b) {
                if a == g || !pag.adjacent(a, g) || !pag.is_directed(a, g) || !pag.is(b, a, Mark::Arrow) {
                    continue;
                }
                if let Some(theta) = discriminating_start(pag, a, b, g) {
                    let in_sep = sepsets.get(&key(theta, g)).is_some_and(|s| s.contains(&b));
                    if in_sep {
                        pag.set_mark(b, g, Mark::Arrow);
                        pag.set_mark(g, b, Mark::Tail);
                    } else {
                        pag.set_mark(a, b, Mark::Arrow);
                        pag.set_mark(b, a, Mark::Arrow);
                        pag.set_mark(g, b, Mark::Arrow);
                        pag.set_mark(b, g, Mark::Arrow);
                    }
                    return true;
                }
            }
        }
    }
    false
}

/// Walks back from α looking for θ, non-adjacent to γ, that closes a
/// discriminating path ⟨θ, …, α, β, γ⟩.
fn discriminating_start(pag: &Pag, a: usize, b: usize, g: usize) -> Option<usize> {
    let n = pag.len();
    let mut visited = vec![false; n];
    visited[a] = true;
    visited[b] = true;
    visited[g] = true;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        for t in pag.neighbors(v) {
            if visited[t] || !pag.is(t, v, Mark::Arrow) {
                continue;
            }
            if !pag.adjacent(t, g) {
                return Some(t);
            }
            if pag.is_directed(t, g) && pag.is(v, t, Mark::Arrow) {
                visited[t] = true;
                queue.push_back(t);
            }
        }
    }
    None
}

/// α → β → γ or α −o β → γ, with α o→ γ ⇒ α → γ.
fn rule8(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for a in 0..n {
        for c in pag.neighbors(a) {
            if !(pag.is(a, c, Mark::Arrow) && pag.is(c, a, Mark::Circle)) {
                continue;
            }
            let fire = pag.neighbors(a).into_iter().any(|b| {
                b != c
                    && pag.is_directed(b, c)
                    && pag.is(b, a, Mark::Tail)
                    && (pag.is(a, b, Mark::Arrow) || pag.is(a, b, Mark::Circle))
            });
            if fire {
                changed |= pag.set_mark(c, a, Mark::Tail);
            }
        }
    }
    changed
}

/// Edge u → v may lie on a potentially directed path.
fn potentially_directed(pag: &Pag, u: usize, v: usize) -> bool {
    pag.adjacent(u, v) && !pag.is(v, u, Mark::Arrow) && !pag.is(u, v, Mark::Tail)
}

/// First steps μ of uncovered potentially directed paths from `start` to
/// `end` that avoid `banned`.
fn uncovered_pd_first_steps(pag: &Pag, start: usize, end: usize, banned: usize) -> BTreeSet<usize> {
    let n = pag.len();
    let mut out = BTreeSet::new();
    for mu in pag.neighbors(start) {
        if mu == banned || !potentially_directed(pag, start, mu) {
            continue;
        }
        if mu == end {
            out.insert(mu);
            continue;
        }
        let mut on_path = vec![false; n];
        on_path[start] = true;
        on_path[mu] = true;
        if extend_uncovered(pag, start, mu, end, banned, &mut on_path) {
            out.insert(mu);
        }
    }
    out
}

fn extend_uncovered(pag: &Pag, prev: usize, cur: usize, end: usize, banned: usize, on_path: &mut [bool]) -> bool {
    for next in pag.neighbors(cur) {
        if on_path[next] || next == banned || !potentially_directed(pag, cur, next) || pag.adjacent(prev, next) {
            continue;
        }
        if next == end {
            return true;
        }
        on_path[next] = true;
        let found = extend_uncovered(pag, cur, next, end, banned, on_path);
        on_path[next] = false;
        if found {
            return true;
        }
    }
    false
}

/// α o→ γ with an uncovered p.d. path ⟨α, β, θ, …, γ⟩, β and γ non-adjacent ⇒ α → γ.
fn rule9(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for a in 0..n {
        for c in pag.neighbors(a) {
            if !(pag.is(a, c, Mark::Arrow) && pag.is(c, a, Mark::Circle)) {
                continue;
            }
            let mut fire = false;
            for b in pag.neighbors(a) {
                if b == c || pag.adjacent(b, c) || !potentially_directed(pag, a, b) {
                    continue;
                }
                let mut on_path = vec![false; n];
                on_path[a] = true;
                on_path[b] = true;
                if extend_uncovered(pag, a, b, c, usize::MAX, &mut on_path) {
                    fire = true;
                    break;
                }
            }
            if fire {
                changed |= pag.set_mark(c, a, Mark::Tail);
            }
        }
    }
    changed
}

/// α o→ γ, β → γ ← θ, uncovered p.d. paths from α to β and θ whose first
/// steps are distinct and non-adjacent ⇒ α → γ.
fn rule10(pag: &mut Pag) -> bool {
    let n = pag.len();
    let mut changed = false;
    for a in 0..n {
        for c in pag.neighbors(a) {
            if !(pag.is(a, c, Mark::Arrow) && pag.is(c, a, Mark::Circle)) {
                continue;
            }
            let parents: Vec<usize> = pag
                .neighbors(c)
                .into_iter()
                .filter(|&v| v != a && pag.is_directed(v, c))
                .collect();
            let mut fire = false;
            'pairs: for (i, &b) in parents.iter().enumerate() {
                for &t in &parents[i + 1..] {
                    let mus = uncovered_pd_first_steps(pag, a, b, c);
                    let omegas = uncovered_pd_first_steps(pag, a, t, c);
                    for &mu in &mus {
                        for &om in &omegas {
                            if mu != om && !pag.adjacent(mu, om) {
                                fire = true;
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            if fire {
                changed |= pag.set_mark(c, a, Mark::Tail);
            }
        }
    }
    changed
}

/// Neighbours of `y` plus, for every neighbour `c` with an arrowhead at `c`
/// and none at `y`, the other nodes with an arrowhead into `c`.
pub fn markov_blanket(pag: &Pag, y: usize) -> Vec<usize> {
    let mut out: BTreeSet<usize> = pag.neighbors(y).into_iter().collect();
    for c in pag.neighbors(y) {
        let child = pag.is(y, c, Mark::Arrow) && !pag.is(c, y, Mark::Arrow);
        if !child {
            continue;
        }
        for s in pag.neighbors(c) {
            if s != y && pag.is(s, c, Mark::Arrow) {
                out.insert(s);
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn noisy_copy(rng: &mut ChaCha8Rng, v: u8, p: f64) -> u8 {
        if rng.random_bool(p) {
            v
        } else {
            1 - v
        }
    }

    #[test]
    fn single_edge_stays_unoriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<u8> = (0..5000).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<u8> = x.iter().map(|&v| noisy_copy(&mut rng, v, 0.85)).collect();
        let data = DiscreteData::new(vec![x, y]).unwrap();
        let r = fci(&data, &[0, 1], &FciConfig::default());
        assert_eq!(r.pag.edges(), vec![(0, 1, Mark::Circle, Mark::Circle)]);
    }

    #[test]
    fn collider_is_oriented_into_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let x1: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let x2: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let base = (x1[i] + x2[i] >= 1) as u8;
                noisy_copy(&mut rng, base, 0.9)
            })
            .collect();
        let data = DiscreteData::new(vec![x1, x2, y]).unwrap();
        let r = fci(&data, &[0, 1, 2], &FciConfig::default());
        assert!(!r.pag.adjacent(0, 1));
        assert_eq!(r.pag.mark(0, 2), Some(Mark::Arrow));
        assert_eq!(r.pag.mark(1, 2), Some(Mark::Arrow));
        assert_eq!(markov_blanket(&r.pag, 2), vec![0, 1]);
    }

    #[test]
    fn markov_blanket_on_oriented_graph() {
        // X1 → Y, Y → X3, X4 → X3 ; nodes 0 = X1, 1 = Y, 2 = X3, 3 = X4
        let mut pag = Pag::empty(4);
        pag.set_edge(0, 1, Mark::Tail, Mark::Arrow);
        pag.set_edge(1, 2, Mark::Tail, Mark::Arrow);
        pag.set_edge(3, 2, Mark::Tail, Mark::Arrow);
        assert_eq!(markov_blanket(&pag, 1), vec![0, 2, 3]);

        let mut chain = Pag::empty(2);
        chain.set_edge(0, 1, Mark::Tail, Mark::Arrow);
        assert_eq!(markov_blanket(&chain, 1), vec![0]);
        assert!(markov_blanket(&Pag::empty(3), 0).is_empty());
    }

    #[test]
    fn rule1_propagates_away_from_collider() {
        // a *→ b o−o c with a, c non-adjacent
        let mut pag = Pag::empty(3);
        pag.set_edge(0, 1, Mark::Circle, Mark::Arrow);
        pag.set_edge(1, 2, Mark::Circle, Mark::Circle);
        assert!(rule1(&mut pag));
        assert!(pag.is_directed(1, 2));
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }
}
