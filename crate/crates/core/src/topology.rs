//! Combinatorial description of finitely ramified self-similar sets.
//!
//! A fractal is given by `k` maps acting on a boundary of `N` points. Each map
//! is described by the labels of the images of `P1..PN` in the first-level
//! vertex set. Everything else (the vertex sets of deeper levels, cell
//! addressing, restrictions and traces) is derived from that label table.
//!
//! Addresses at level `n` are pairs `(word, j)` with `|word| = n`, stored as the
//! flat index `word_index * N + j` where the word index reads the word as a
//! base-`k` number with the first letter most significant. Canonical vertex ids
//! are assigned in order of the smallest address of each vertex.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw label table, as read from a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub boundary_size: usize,
    pub maps: Vec<Vec<String>>,
}

fn table(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

impl FractalSpec {
    pub fn interval() -> Self {
        FractalSpec {
            name: Some("interval".into()),
            boundary_size: 2,
            maps: table(&[&["P1", "m"], &["m", "P2"]]),
        }
    }

    pub fn gasket() -> Self {
        FractalSpec {
            name: Some("gasket".into()),
            boundary_size: 3,
            maps: table(&[
                &["P1", "m12", "m13"],
                &["m12", "P2", "m23"],
                &["m13", "m23", "P3"],
            ]),
        }
    }

    /// Vicsek set: four corner cells and a central cell touching each corner cell once.
    /// Interior labels encode coordinates in thirds of the unit square.
    pub fn vicsek() -> Self {
        FractalSpec {
            name: Some("vicsek".into()),
            boundary_size: 4,
            maps: table(&[
                &["P1", "q10", "q11", "q01"],
                &["q20", "P2", "q31", "q21"],
                &["q22", "q32", "P3", "q23"],
                &["q02", "q12", "q13", "P4"],
                &["q11", "q21", "q22", "q12"],
            ]),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "interval" => Some(Self::interval()),
            "gasket" => Some(Self::gasket()),
            "vicsek" => Some(Self::vicsek()),
            _ => None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::MalformedSpec(e.to_string()))
    }
}

/// Parses `P<j>`; returns `Some(j)` (1-based) for boundary labels.
fn boundary_label(label: &str) -> Option<usize> {
    let rest = label.strip_prefix('P')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// A sequence of map indices (zero-based), possibly empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<usize>, maps: usize) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&i| i >= maps) {
            return Err(Error::InvalidWord { index: bad, maps });
        }
        Ok(Word(letters))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    /// Base-`k` index of the word among all words of the same length.
    pub fn index(&self, maps: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * maps + i)
    }

    pub fn from_index(mut index: usize, len: usize, maps: usize) -> Self {
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = index % maps;
            index /= maps;
        }
        Word(letters)
    }

    pub fn child(&self, letter: usize) -> Self {
        let mut letters = self.0.clone();
        letters.push(letter);
        Word(letters)
    }
}

/// One-based, dot separated; the empty word prints as `-`.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

/// Edge of the breadth-first spanning tree over overlapping level-1 cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellLink {
    pub cell: usize,
    pub parent: Option<usize>,
    pub shared_label: Option<String>,
}

/// Identified vertex set `V(n)` with its address table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelVertexSet {
    level: usize,
    boundary_size: usize,
    maps: usize,
    addr_to_id: Vec<usize>,
    rep_addr: Vec<usize>,
    birth: Vec<usize>,
    boundary: Vec<usize>,
    embed_prev: Vec<usize>,
}

impl LevelVertexSet {
    fn base(boundary_size: usize, maps: usize) -> Self {
        let ids: Vec<usize> = (0..boundary_size).collect();
        LevelVertexSet {
            level: 0,
            boundary_size,
            maps,
            addr_to_id: ids.clone(),
            rep_addr: ids.clone(),
            birth: vec![0; boundary_size],
            boundary: ids,
            embed_prev: Vec::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.rep_addr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep_addr.is_empty()
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    pub fn maps(&self) -> usize {
        self.maps
    }

    pub fn word_count(&self) -> usize {
        self.addr_to_id.len() / self.boundary_size
    }

    pub fn address_count(&self) -> usize {
        self.addr_to_id.len()
    }

    /// Ids of `P1..PN`.
    pub fn boundary_ids(&self) -> &[usize] {
        &self.boundary
    }

    /// Id of the point `psi_w(P_j)`.
    pub fn id_at(&self, word: &Word, j: usize) -> Result<usize> {
        if word.len() != self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                got: word.len(),
            });
        }
        if j >= self.boundary_size {
            return Err(Error::DimensionMismatch {
                expected: self.boundary_size,
                got: j + 1,
            });
        }
        Ok(self.addr_to_id[word.index(self.maps) * self.boundary_size + j])
    }

    /// Ids of the boundary points of the cell with the given word index.
    pub fn cell_ids(&self, word_index: usize) -> &[usize] {
        let n = self.boundary_size;
        &self.addr_to_id[word_index * n..(word_index + 1) * n]
    }

    /// Smallest address of a vertex, as `(word, j)`.
    pub fn address(&self, id: usize) -> (Word, usize) {
        let a = self.rep_addr[id];
        (
            Word::from_index(a / self.boundary_size, self.level, self.maps),
            a % self.boundary_size,
        )
    }

    pub fn representative_address(&self, id: usize) -> usize {
        self.rep_addr[id]
    }

    pub fn id_of_address(&self, addr: usize) -> usize {
        self.addr_to_id[addr]
    }

    /// First level at which the vertex appears.
    pub fn birth_level(&self, id: usize) -> usize {
        self.birth[id]
    }

    /// Maps ids of `V(n-1)` to their ids in `V(n)`. Empty at level 0.
    pub fn previous_embedding(&self) -> &[usize] {
        &self.embed_prev
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Real values on the vertices of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFunction {
    vertices: Arc<LevelVertexSet>,
    values: Vec<f64>,
}

impl LevelFunction {
    pub fn new(vertices: Arc<LevelVertexSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("level function value {bad}")));
        }
        Ok(LevelFunction { vertices, values })
    }

    pub fn constant(vertices: Arc<LevelVertexSet>, c: f64) -> Self {
        let values = vec![c; vertices.len()];
        LevelFunction { vertices, values }
    }

    pub fn vertices(&self) -> &Arc<LevelVertexSet> {
        &self.vertices
    }

    pub fn level(&self) -> usize {
        self.vertices.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary_values(&self) -> Vec<f64> {
        self.vertices.boundary.iter().map(|&id| self.values[id]).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// max - min over a slice; zero for an empty slice.
pub fn osc(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// A label table that passed validation, with a lazily grown cache of levels.
#[derive(Debug)]
pub struct Fractal {
    spec: FractalSpec,
    boundary_size: usize,
    maps: usize,
    cell_labels: Vec<Vec<usize>>,
    labels: Vec<String>,
    certificate: Vec<CellLink>,
    chain_constant: usize,
    levels: Mutex<Vec<Arc<LevelVertexSet>>>,
}

impl Fractal {
    pub fn builtin(name: &str) -> Result<Self> {
        let spec = FractalSpec::builtin(name)
            .ok_or_else(|| Error::Config(format!("unknown built-in fractal `{name}`")))?;
        Fractal::validate(spec)
    }

    /// Checks the label table and computes the connectivity certificate and
    /// the chain constant of the first level.
    pub fn validate(spec: FractalSpec) -> Result<Self> {
        let n = spec.boundary_size;
        let k = spec.maps.len();
        if n < 2 {
            return Err(Error::MalformedSpec(format!(
                "boundary_size must be at least 2, got {n}"
            )));
        }
        if k < n {
            return Err(Error::MalformedSpec(format!(
                "need at least as many maps as boundary points ({k} < {n})"
            )));
        }

        let mut labels: Vec<String> = (1..=n).map(|j| format!("P{j}")).collect();
        let mut index: HashMap<String, usize> =
            labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let mut cell_labels = Vec::with_capacity(k);
        for (i, row) in spec.maps.iter().enumerate() {
            if row.len() != n {
                return Err(Error::MalformedSpec(format!(
                    "map {} lists {} images, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            let mut ids = Vec::with_capacity(n);
            for label in row {
                if label.is_empty() {
                    return Err(Error::MalformedSpec(format!("empty label in map {}", i + 1)));
                }
                if let Some(j) = boundary_label(label) {
                    if j == 0 || j > n {
                        return Err(Error::MalformedSpec(format!(
                            "label `{label}` names a boundary point outside P1..P{n}"
                        )));
                    }
                }
                let next = labels.len();
                let id = *index.entry(label.clone()).or_insert(next);
                if id == next {
                    labels.push(label.clone());
                }
                ids.push(id);
            }
            cell_labels.push(ids);
        }

        for (i, row) in cell_labels.iter().enumerate() {
            for a in 0..n {
                if row[a + 1..].contains(&row[a]) {
                    return Err(Error::NonInjectiveMap {
                        map: i + 1,
                        label: labels[row[a]].clone(),
                    });
                }
            }
        }
        for j in 0..n {
            if cell_labels[j][j] != j {
                return Err(Error::FixedPointViolation {
                    map: j + 1,
                    point: j + 1,
                    got: labels[cell_labels[j][j]].clone(),
                });
            }
        }
        for (i, row) in cell_labels.iter().enumerate() {
            for &id in row {
                if id < n && id != i {
                    return Err(Error::BoundaryCollision { point: id + 1, map: i + 1 });
                }
            }
        }

        let shares = |a: usize, b: usize| -> Option<usize> {
            cell_labels[a]
                .iter()
                .copied()
                .find(|l| cell_labels[b].contains(l))
        };
        let mut dist = vec![vec![usize::MAX; k]; k];
        let mut certificate = Vec::with_capacity(k);
        for (start, row) in dist.iter_mut().enumerate() {
            let mut queue = VecDeque::from([start]);
            row[start] = 0;
            if start == 0 {
                certificate.push(CellLink { cell: 0, parent: None, shared_label: None });
            }
            while let Some(c) = queue.pop_front() {
                for next in 0..k {
                    if row[next] != usize::MAX {
                        continue;
                    }
                    if let Some(l) = shares(c, next) {
                        row[next] = row[c] + 1;
                        queue.push_back(next);
                        if start == 0 {
                            certificate.push(CellLink {
                                cell: next,
                                parent: Some(c),
                                shared_label: Some(labels[l].clone()),
                            });
                        }
                    }
                }
            }
        }
        if let Some(unreachable) = (0..k).find(|&c| dist[0][c] == usize::MAX) {
            return Err(Error::Disconnected { unreachable: unreachable + 1 });
        }

        // Longest shortest chain of overlapping cells between two level-1 points.
        let mut containing: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
        for (c, row) in cell_labels.iter().enumerate() {
            for &l in row {
                containing[l].push(c);
            }
        }
        let mut chain_constant = 1;
        for q in 0..labels.len() {
            for r in q + 1..labels.len() {
                let best = containing[q]
                    .iter()
                    .flat_map(|&a| containing[r].iter().map(move |&b| (a, b)))
                    .map(|(a, b)| dist[a][b] + 1)
                    .min()
                    .unwrap_or(1);
                chain_constant = chain_constant.max(best);
            }
        }

        Ok(Fractal {
            spec,
            boundary_size: n,
            maps: k,
            cell_labels,
            labels,
            certificate,
            chain_constant,
            levels: Mutex::new(vec![Arc::new(LevelVertexSet::base(n, k))]),
        })
    }

    pub fn spec(&self) -> &FractalSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        self.spec.name.as_deref().unwrap_or("custom")
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    pub fn maps(&self) -> usize {
        self.maps
    }

    /// Spanning sequence of overlapping cells rooted at cell 1.
    pub fn connectivity_certificate(&self) -> &[CellLink] {
        &self.certificate
    }

    /// Every pair of first-level points is joined by a chain of at most this
    /// many overlapping cells.
    pub fn chain_constant(&self) -> usize {
        self.chain_constant
    }

    pub fn level_one_labels(&self) -> &[String] {
        &self.labels
    }

    /// The vertex set `V(n)`, built incrementally and cached.
    pub fn level(&self, n: usize) -> Arc<LevelVertexSet> {
        let mut levels = self.levels.lock().expect("level cache poisoned");
        while levels.len() <= n {
            let next = self.glue_next(levels.last().expect("level 0 is always present"));
            levels.push(Arc::new(next));
        }
        Arc::clone(&levels[n])
    }

    /// One gluing step: `V(n)` as `k` copies of `V(n-1)` identified where the
    /// boundary images of two copies carry the same first-level label.
    pub fn glue_next(&self, prev: &LevelVertexSet) -> LevelVertexSet {
        let (n, k) = (self.boundary_size, self.maps);
        let prev_len = prev.len();
        let prev_addrs = prev.addr_to_id.len();
        let total = prev_addrs
            .checked_mul(k)
            .expect("level too deep: address table overflows usize");

        let mut uf = UnionFind::new(k * prev_len);
        for i in 0..k {
            for a in 0..n {
                for i2 in i + 1..k {
                    for b in 0..n {
                        if self.cell_labels[i][a] == self.cell_labels[i2][b] {
                            uf.union(i * prev_len + prev.boundary[a], i2 * prev_len + prev.boundary[b]);
                        }
                    }
                }
            }
        }

        let mut class_id = vec![usize::MAX; k * prev_len];
        let mut addr_to_id = Vec::with_capacity(total);
        let mut rep_addr = Vec::new();
        for i in 0..k {
            for (a, &x) in prev.addr_to_id.iter().enumerate() {
                let root = uf.find(i * prev_len + x);
                if class_id[root] == usize::MAX {
                    class_id[root] = rep_addr.len();
                    rep_addr.push(i * prev_addrs + a);
                }
                addr_to_id.push(class_id[root]);
            }
        }

        let level = prev.level + 1;
        let mut birth = vec![level; rep_addr.len()];
        let embed_prev: Vec<usize> = (0..prev_len)
            .map(|y| {
                let rep = prev.rep_addr[y];
                let (w, j) = (rep / n, rep % n);
                let id = addr_to_id[(w * k + j) * n + j];
                birth[id] = prev.birth[y];
                id
            })
            .collect();
        let boundary = prev.boundary.iter().map(|&b| embed_prev[b]).collect();

        LevelVertexSet {
            level,
            boundary_size: n,
            maps: k,
            addr_to_id,
            rep_addr,
            birth,
            boundary,
            embed_prev,
        }
    }

    fn check_level(&self, v: &LevelFunction) -> Result<Arc<LevelVertexSet>> {
        let set = self.level(v.level());
        if set.len() != v.values.len() || set.maps != self.maps {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                got: v.values.len(),
            });
        }
        Ok(set)
    }

    /// `v o psi_w` as a function on `V(n - |w|)`.
    pub fn cell_trace(&self, v: &LevelFunction, word: &Word) -> Result<LevelFunction> {
        let set = self.check_level(v)?;
        let (n, m) = (v.level(), word.len());
        if m > n {
            return Err(Error::WordTooLong { word: m, level: n });
        }
        if let Some(&bad) = word.letters().iter().find(|&&i| i >= self.maps) {
            return Err(Error::InvalidWord { index: bad, maps: self.maps });
        }
        let target = self.level(n - m);
        let offset = word.index(self.maps) * target.address_count();
        let values = target
            .rep_addr
            .iter()
            .map(|&a| v.values[set.addr_to_id[offset + a]])
            .collect();
        Ok(LevelFunction { vertices: target, values })
    }

    /// Oscillation over all vertices, or over the sub-cell named by `scope`.
    pub fn oscillation(&self, v: &LevelFunction, scope: Option<&Word>) -> Result<f64> {
        match scope {
            None => Ok(osc(&v.values)),
            Some(w) => Ok(osc(&self.cell_trace(v, w)?.values)),
        }
    }

    /// Restriction of `v` from its level to the coarser level `m`.
    pub fn restrict(&self, v: &LevelFunction, m: usize) -> Result<LevelFunction> {
        let set = self.check_level(v)?;
        let n = v.level();
        if m > n {
            return Err(Error::LevelMismatch { expected: n, got: m });
        }
        let target = self.level(m);
        let values = (0..target.len())
            .map(|y| v.values[set.addr_to_id[self.lift_address(target.rep_addr[y], m, n)]])
            .collect();
        Ok(LevelFunction { vertices: target, values })
    }

    /// Address at level `n` of the point with address `addr` at level `m <= n`:
    /// `(w, j)` becomes `(w j...j, j)`.
    fn lift_address(&self, addr: usize, m: usize, n: usize) -> usize {
        let (nb, k) = (self.boundary_size, self.maps);
        let (mut w, j) = (addr / nb, addr % nb);
        for _ in m..n {
            w = w * k + j;
        }
        w * nb + j
    }

    /// Values of `v` (on level `n >= m`) at the boundary points of the `m`-cell
    /// with word index `word_index`.
    pub fn cell_boundary_values(
        &self,
        v: &LevelFunction,
        m: usize,
        word_index: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let set = self.check_level(v)?;
        let n = v.level();
        if m > n {
            return Err(Error::WordTooLong { word: m, level: n });
        }
        if out.len() != self.boundary_size {
            return Err(Error::DimensionMismatch { expected: self.boundary_size, got: out.len() });
        }
        for (j, slot) in out.iter_mut().enumerate() {
            let addr = self.lift_address(word_index * self.boundary_size + j, m, n);
            *slot = v.values[set.addr_to_id[addr]];
        }
        Ok(())
    }

    pub fn boundary_function(&self, u: &[f64]) -> Result<LevelFunction> {
        LevelFunction::new(self.level(0), u.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_and_gasket_validate() {
        let interval = Fractal::builtin("interval").unwrap();
        assert_eq!(interval.chain_constant(), 2);
        let gasket = Fractal::builtin("gasket").unwrap();
        assert_eq!(gasket.chain_constant(), 2);
        assert_eq!(gasket.connectivity_certificate().len(), 3);
        let vicsek = Fractal::builtin("vicsek").unwrap();
        assert_eq!(vicsek.chain_constant(), 3);
    }

    #[test]
    fn broken_fixed_point_is_rejected() {
        let mut spec = FractalSpec::gasket();
        spec.maps[0][0] = "P2".into();
        assert!(matches!(
            Fractal::validate(spec),
            Err(Error::FixedPointViolation { map: 1, point: 1, .. })
        ));
    }

    #[test]
    fn other_structural_errors() {
        let mut spec = FractalSpec::gasket();
        spec.maps[1][0] = "P1".into();
        assert!(matches!(Fractal::validate(spec), Err(Error::BoundaryCollision { point: 1, map: 2 })));

        let mut spec = FractalSpec::gasket();
        spec.maps[0][2] = "m12".into();
        assert!(matches!(Fractal::validate(spec), Err(Error::NonInjectiveMap { map: 1, .. })));

        let spec = FractalSpec {
            name: None,
            boundary_size: 2,
            maps: vec![vec!["P1".into(), "a".into()], vec!["b".into(), "P2".into()]],
        };
        assert!(matches!(Fractal::validate(spec), Err(Error::Disconnected { unreachable: 2 })));

        let spec = FractalSpec { name: None, boundary_size: 3, maps: FractalSpec::interval().maps };
        assert!(matches!(Fractal::validate(spec), Err(Error::MalformedSpec(_))));

        let mut spec = FractalSpec::interval();
        spec.maps[0][1] = "P7".into();
        assert!(matches!(Fractal::validate(spec), Err(Error::MalformedSpec(_))));
    }

    #[test]
    fn vertex_counts() {
        let interval = Fractal::builtin("interval").unwrap();
        assert_eq!(interval.level(3).len(), 9);
        let gasket = Fractal::builtin("gasket").unwrap();
        let counts: Vec<usize> = (0..4).map(|n| gasket.level(n).len()).collect();
        assert_eq!(counts, vec![3, 6, 15, 42]);
        let vicsek = Fractal::builtin("vicsek").unwrap();
        assert_eq!(vicsek.level(1).len(), 16);
    }

    #[test]
    fn interval_ids_are_left_to_right() {
        let interval = Fractal::builtin("interval").unwrap();
        let l2 = interval.level(2);
        // Addresses of the left endpoint of each 2-cell are increasing ids.
        let lefts: Vec<usize> = (0..4).map(|w| l2.cell_ids(w)[0]).collect();
        assert_eq!(lefts, vec![0, 1, 2, 3]);
        assert_eq!(l2.boundary_ids(), &[0, 4]);
    }

    #[test]
    fn trace_and_oscillation() {
        let interval = Fractal::builtin("interval").unwrap();
        let v = LevelFunction::new(interval.level(1), vec![0.0, 0.5, 1.0]).unwrap();
        let right = interval.cell_trace(&v, &Word::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(right.values(), &[0.5, 1.0]);
        assert_eq!(interval.cell_trace(&v, &Word::empty()).unwrap(), v);
        assert_eq!(interval.oscillation(&v, None).unwrap(), 1.0);
        let too_long = Word::new(vec![0, 0], 2).unwrap();
        assert!(matches!(interval.cell_trace(&v, &too_long), Err(Error::WordTooLong { .. })));
        let c = LevelFunction::constant(interval.level(2), 3.0);
        assert_eq!(interval.oscillation(&c, None).unwrap(), 0.0);
    }

    #[test]
    fn word_display_and_index() {
        let w = Word::new(vec![0, 2, 1], 3).unwrap();
        assert_eq!(w.to_string(), "1.3.2");
        assert_eq!(Word::from_index(w.index(3), 3, 3), w);
        assert_eq!(Word::empty().to_string(), "-");
        assert!(Word::new(vec![3], 3).is_err());
    }
}
