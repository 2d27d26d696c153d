//! Geometry of the L×L toric code and its embedding into a cubic lattice.
//!
//! Link numbering is row-major with horizontal links first:
//! `h(r,c) = r·L + c` joins vertices `(r,c)` and `(r,c+1)`,
//! `v(r,c) = L² + r·L + c` joins `(r,c)` and `(r+1,c)`, indices mod L.
//! Vertex and plaquette `(r,c)` both have index `r·L + c`; plaquette `(r,c)`
//! has corners `(r,c)` and `(r+1,c+1)`.
//!
//! Neighborhood link order is fixed because the gate sequences act on
//! consecutive links:
//! - vertex `(r,c)`: `[h(r,c), v(r,c), h(r,c−1), v(r−1,c)]`
//! - plaquette `(r,c)`: `[h(r,c), v(r,c+1), h(r+1,c), v(r,c)]`

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{Pauli, PauliError, PauliString};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("lattice size L={0} must be at least 2")]
    TooSmall(usize),
    #[error("2L² = {0} links exceeds the 64-qubit limit")]
    TooLarge(usize),
    #[error("{kind} index {index} out of range (count {count})")]
    OutOfRange { kind: &'static str, index: usize, count: usize },
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Which link pairs carry the `σˣ_i σʸ_j` perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSet {
    /// Links 2 and 3 of every vertex and plaquette neighborhood, the pair on
    /// which the echoed sequence leaves its `IXYI` residual. `L²·2` pairs.
    SequenceDerived,
    /// Every pair of links sharing a vertex, `σˣ` on the link earlier in
    /// the vertex's neighborhood order. `6L²` pairs for `L ≥ 3`.
    AllNearestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLattice {
    l: usize,
    vertex_links: Vec<[usize; 4]>,
    plaquette_links: Vec<[usize; 4]>,
}

impl TorusLattice {
    pub fn build(l: usize) -> Result<Self, LatticeError> {
        if l < 2 {
            return Err(LatticeError::TooSmall(l));
        }
        if 2 * l * l > crate::pauli::MAX_QUBITS {
            return Err(LatticeError::TooLarge(2 * l * l));
        }
        let m = |k: usize| k % l;
        let h = |r: usize, c: usize| m(r) * l + m(c);
        let v = |r: usize, c: usize| l * l + m(r) * l + m(c);
        let mut vertex_links = Vec::with_capacity(l * l);
        let mut plaquette_links = Vec::with_capacity(l * l);
        for r in 0..l {
            for c in 0..l {
                vertex_links.push([h(r, c), v(r, c), h(r, c + l - 1), v(r + l - 1, c)]);
                plaquette_links.push([h(r, c), v(r, c + 1), h(r + 1, c), v(r, c)]);
            }
        }
        Ok(Self {
            l,
            vertex_links,
            plaquette_links,
        })
    }

    pub fn size(&self) -> usize {
        self.l
    }
    pub fn n_links(&self) -> usize {
        2 * self.l * self.l
    }
    pub fn n_vertices(&self) -> usize {
        self.l * self.l
    }
    pub fn n_plaquettes(&self) -> usize {
        self.l * self.l
    }

    pub fn horizontal_link(&self, r: usize, c: usize) -> usize {
        (r % self.l) * self.l + c % self.l
    }

    pub fn vertical_link(&self, r: usize, c: usize) -> usize {
        self.l * self.l + (r % self.l) * self.l + c % self.l
    }

    /// `(is_vertical, r, c)` of a link.
    pub fn link_coords(&self, link: usize) -> (bool, usize, usize) {
        let ll = self.l * self.l;
        let k = link % ll;
        (link >= ll, k / self.l, k % self.l)
    }

    fn check(&self, kind: &'static str, index: usize, count: usize) -> Result<(), LatticeError> {
        if index >= count {
            return Err(LatticeError::OutOfRange { kind, index, count });
        }
        Ok(())
    }

    pub fn vertex_links(&self, v: usize) -> Result<[usize; 4], LatticeError> {
        self.check("vertex", v, self.n_vertices())?;
        Ok(self.vertex_links[v])
    }

    pub fn plaquette_links(&self, p: usize) -> Result<[usize; 4], LatticeError> {
        self.check("plaquette", p, self.n_plaquettes())?;
        Ok(self.plaquette_links[p])
    }

    /// The two vertices and two plaquettes containing `link`, each sorted.
    pub fn link_neighborhoods(&self, link: usize) -> Result<([usize; 2], [usize; 2]), LatticeError> {
        self.check("link", link, self.n_links())?;
        let find = |sets: &[[usize; 4]]| {
            let mut out = [0usize; 2];
            let mut k = 0;
            for (i, s) in sets.iter().enumerate() {
                if s.contains(&link) {
                    out[k] = i;
                    k += 1;
                }
            }
            debug_assert_eq!(k, 2);
            out
        };
        Ok((find(&self.vertex_links), find(&self.plaquette_links)))
    }

    /// `h_v = Π_{j∈v} σᶻ_j`.
    pub fn vertex_stabilizer(&self, v: usize) -> Result<PauliString, LatticeError> {
        Ok(PauliString::uniform(self.n_links(), &self.vertex_links(v)?, Pauli::Z)?)
    }

    /// `h_p = Π_{j∈p} σˣ_j`.
    pub fn plaquette_stabilizer(&self, p: usize) -> Result<PauliString, LatticeError> {
        Ok(PauliString::uniform(self.n_links(), &self.plaquette_links(p)?, Pauli::X)?)
    }

    pub fn vertex_stabilizers(&self) -> Vec<PauliString> {
        (0..self.n_vertices()).map(|v| self.vertex_stabilizer(v).expect("valid index")).collect()
    }

    pub fn plaquette_stabilizers(&self) -> Vec<PauliString> {
        (0..self.n_plaquettes()).map(|p| self.plaquette_stabilizer(p).expect("valid index")).collect()
    }

    /// `[Z̄₁, Z̄₂, X̄₁, X̄₂]`, with `X̄_k` anticommuting with `Z̄_k` only.
    ///
    /// `Z̄₁`: Z on `h(r,0)` for all r. `Z̄₂`: Z on `v(0,c)` for all c.
    /// `X̄₁`: X on `h(0,c)` for all c. `X̄₂`: X on `v(r,0)` for all r.
    pub fn logical_operators(&self) -> [PauliString; 4] {
        let n = self.n_links();
        let l = self.l;
        let col_h: Vec<usize> = (0..l).map(|r| self.horizontal_link(r, 0)).collect();
        let row_v: Vec<usize> = (0..l).map(|c| self.vertical_link(0, c)).collect();
        let row_h: Vec<usize> = (0..l).map(|c| self.horizontal_link(0, c)).collect();
        let col_v: Vec<usize> = (0..l).map(|r| self.vertical_link(r, 0)).collect();
        let mk = |links: &[usize], p| PauliString::uniform(n, links, p).expect("links in range");
        [mk(&col_h, Pauli::Z), mk(&row_v, Pauli::Z), mk(&row_h, Pauli::X), mk(&col_v, Pauli::X)]
    }

    /// Image of every link under a shift of the lattice by `dr` rows and
    /// `dc` columns.
    pub fn translation(&self, dr: usize, dc: usize) -> Vec<usize> {
        (0..self.n_links())
            .map(|k| {
                let (vert, r, c) = self.link_coords(k);
                if vert {
                    self.vertical_link(r + dr, c + dc)
                } else {
                    self.horizontal_link(r + dr, c + dc)
                }
            })
            .collect()
    }

    /// Link pairs `(i, j)` for the `σˣ_i σʸ_j` perturbation, deduplicated.
    pub fn perturbation_pairs(&self, set: PairSet) -> Vec<(usize, usize)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |a: usize, b: usize| {
            if seen.insert((a, b)) {
                out.push((a, b));
            }
        };
        match set {
            PairSet::SequenceDerived => {
                for nb in self.vertex_links.iter().chain(&self.plaquette_links) {
                    push(nb[1], nb[2]);
                }
            }
            PairSet::AllNearestNeighbor => {
                for nb in &self.vertex_links {
                    for i in 0..4 {
                        for j in i + 1..4 {
                            push(nb[i], nb[j]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Consecutive link pairs (1-2, 2-3, 3-4) of every neighborhood, the
    /// pairs the two-body gates act on. Sorted, deduplicated.
    pub fn interaction_pairs(&self) -> Vec<(usize, usize)> {
        let mut s = BTreeSet::new();
        for nb in self.vertex_links.iter().chain(&self.plaquette_links) {
            for k in 0..3 {
                s.insert((nb[k].min(nb[k + 1]), nb[k].max(nb[k + 1])));
            }
        }
        s.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LatticeError> {
        #[derive(Deserialize)]
        struct Raw {
            l: usize,
        }
        // Rebuild from L so a hand-edited file cannot smuggle in bad geometry.
        let raw: Raw = serde_json::from_str(s).map_err(|_| LatticeError::TooSmall(0))?;
        Self::build(raw.l)
    }
}

pub type Coord = [i64; 3];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapPath {
    pub a: usize,
    pub b: usize,
    /// Sites visited by link `a`'s state, starting at its home site and
    /// ending next to `b`'s home site. Empty when the pair is already adjacent.
    pub path: Vec<Coord>,
}

impl SwapPath {
    pub fn swaps(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

/// Placement of the links in a cubic lattice.
///
/// The logical plane `z = 0` uses rotated medial coordinates:
/// `h(r,c) → (r+c, c−r+L)`, `v(r,c) → (r+c, c−r−1+L)`. Consecutive links of
/// every neighborhood then sit on adjacent sites, except where the
/// neighborhood wraps the torus. Those pairs are shuttled by SWAPs through an
/// empty auxiliary layer, `z = +1` for pairs that wrap the column index and
/// `z = −1` for pairs that wrap only the row index. Seen in the plane, the
/// wrapped boundary identifies diagonal edges of the rotated square, which is
/// the twisted appearance of the periodic boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubicEmbedding {
    pub l: usize,
    pub logical_to_physical: Vec<Coord>,
    pub swap_paths: Vec<SwapPath>,
}

fn adjacent(a: &Coord, b: &Coord) -> bool {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<i64>() == 1
}

pub fn plan_cubic_embedding(lat: &TorusLattice) -> CubicEmbedding {
    let l = lat.size() as i64;
    let logical_to_physical: Vec<Coord> = (0..lat.n_links())
        .map(|k| {
            let (vert, r, c) = lat.link_coords(k);
            let (r, c) = (r as i64, c as i64);
            [r + c, c - r - i64::from(vert) + l, 0]
        })
        .collect();
    let swap_paths = lat
        .interaction_pairs()
        .into_iter()
        .map(|(a, b)| {
            let (pa, pb) = (logical_to_physical[a], logical_to_physical[b]);
            let path = if adjacent(&pa, &pb) {
                Vec::new()
            } else {
                let z = if wraps_columns(lat, a, b) { 1 } else { -1 };
                route(pa, pb, z)
            };
            SwapPath { a, b, path }
        })
        .collect();
    CubicEmbedding {
        l: lat.size(),
        logical_to_physical,
        swap_paths,
    }
}

/// Whether the shortest torus displacement between the link midpoints
/// crosses the column seam.
fn wraps_columns(lat: &TorusLattice, a: usize, b: usize) -> bool {
    let mid = |k: usize| {
        let (vert, r, c) = lat.link_coords(k);
        if vert {
            (r as f64 + 0.5, c as f64)
        } else {
            (r as f64, c as f64 + 0.5)
        }
    };
    let (_, ca) = mid(a);
    let (_, cb) = mid(b);
    (ca - cb).abs() > 1.0
}

/// `A, A+ẑ, …, B+ẑ` moving along x first, then y.
fn route(a: Coord, b: Coord, z: i64) -> Vec<Coord> {
    let mut cur = a;
    let mut out = vec![cur];
    cur[2] = z;
    out.push(cur);
    for axis in 0..2 {
        while cur[axis] != b[axis] {
            cur[axis] += (b[axis] - cur[axis]).signum();
            out.push(cur);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Two links share a site.
    NotInjective { links: (usize, usize), coord: Coord },
    /// Link count differs from the lattice.
    WrongLinkCount { got: usize, expected: usize },
    /// A path step is not a unit move.
    NonAdjacentStep { pair: (usize, usize), step: usize },
    /// A path does not start at `a`'s home site.
    BadStart { pair: (usize, usize) },
    /// A path's last site is not next to `b`'s home site.
    BadEnd { pair: (usize, usize) },
    /// A path passes through a site holding a logical link.
    ThroughOccupied { pair: (usize, usize), coord: Coord },
    /// An empty path for a pair that is not adjacent.
    NotAdjacent { pair: (usize, usize) },
    /// A required interaction pair has no path entry.
    MissingPair { pair: (usize, usize) },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EmbeddingReport {
    pub violations: Vec<Violation>,
    pub swap_count: usize,
}

impl EmbeddingReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl CubicEmbedding {
    /// Total SWAPs for one pass: each shuttle out and back.
    pub fn swap_count(&self) -> usize {
        self.swap_paths.iter().map(|p| 2 * p.swaps()).sum()
    }

    /// One row per SWAP: `step,a,b,direction,from_x,from_y,from_z,to_x,to_y,to_z`.
    pub fn schedule_csv(&self) -> String {
        let mut out = String::from("# SWAP schedule; coordinates are cubic-lattice sites, logical plane z=0\n");
        out.push_str("step,a,b,direction,from_x,from_y,from_z,to_x,to_y,to_z\n");
        let mut step = 0;
        let mut row = |out: &mut String, p: &SwapPath, dir: &str, f: &Coord, t: &Coord| {
            let _ = writeln!(
                out,
                "{step},{},{},{dir},{},{},{},{},{},{}",
                p.a, p.b, f[0], f[1], f[2], t[0], t[1], t[2]
            );
            step += 1;
        };
        for p in &self.swap_paths {
            for w in p.path.windows(2) {
                row(&mut out, p, "out", &w[0], &w[1]);
            }
            for w in p.path.windows(2).rev() {
                row(&mut out, p, "back", &w[1], &w[0]);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("embedding serializes")
    }
}

/// Itemized check of an embedding; never fails early.
pub fn validate_embedding(e: &CubicEmbedding, lat: &TorusLattice) -> EmbeddingReport {
    let mut v = Vec::new();
    let sites = &e.logical_to_physical;
    if sites.len() != lat.n_links() {
        v.push(Violation::WrongLinkCount {
            got: sites.len(),
            expected: lat.n_links(),
        });
    }
    let mut first_at = std::collections::BTreeMap::new();
    for (k, c) in sites.iter().enumerate() {
        if let Some(&j) = first_at.get(c) {
            v.push(Violation::NotInjective { links: (j, k), coord: *c });
        } else {
            first_at.insert(*c, k);
        }
    }
    let mut covered = BTreeSet::new();
    for p in &e.swap_paths {
        let pair = (p.a, p.b);
        let (Some(pa), Some(pb)) = (sites.get(p.a), sites.get(p.b)) else {
            v.push(Violation::MissingPair { pair });
            continue;
        };
        covered.insert((p.a.min(p.b), p.a.max(p.b)));
        if p.path.is_empty() {
            if !adjacent(pa, pb) {
                v.push(Violation::NotAdjacent { pair });
            }
            continue;
        }
        if p.path[0] != *pa {
            v.push(Violation::BadStart { pair });
        }
        for (i, w) in p.path.windows(2).enumerate() {
            if !adjacent(&w[0], &w[1]) {
                v.push(Violation::NonAdjacentStep { pair, step: i });
            }
        }
        for c in &p.path[1..] {
            if first_at.contains_key(c) {
                v.push(Violation::ThroughOccupied { pair, coord: *c });
            }
        }
        if !adjacent(p.path.last().expect("nonempty"), pb) {
            v.push(Violation::BadEnd { pair });
        }
    }
    for pair in lat.interaction_pairs() {
        if !covered.contains(&pair) {
            v.push(Violation::MissingPair { pair });
        }
    }
    EmbeddingReport {
        violations: v,
        swap_count: e.swap_count(),
    }
}
