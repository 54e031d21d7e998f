//! Boundary node pairing and resolution into master–slave pairs.
//!
//! Every relation whose source patch holds a boundary node `Â` yields a
//! directed edge to the node `A = T(Â − o)`. Connected nodes form classes;
//! each class is chained to its lexicographically smallest node by composing
//! the relation maps along a spanning tree. Remaining edges close cycles: a
//! cycle whose composed map is the identity is redundant, one that fixes a
//! node through a genuine symmetry becomes a self-pair constraint.

mod dsu;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cellspec::{point_vec, BBox, CellSpec};
use crate::equivalence::{AffineMap, Dim, Point, Transform};
use crate::mesh::Mesh;

pub use dsu::Dsu;

/// Pairing tolerance relative to the bounding-box diagonal.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Linear-part tolerance of the cycle closure test.
const CLOSURE_LIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnmatchedNode {
    pub node: usize,
    pub relation: String,
    pub image: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("mesh is {mesh}, cell is {cell}")]
    DimMismatch { mesh: Dim, cell: Dim },
    #[error(
        "{} node(s) have no partner within tolerance; first: node {} under relation {} (image {:?})",
        .0.len(), .0[0].node, .0[0].relation, .0[0].image
    )]
    UnmatchedNode(Vec<UnmatchedNode>),
    #[error("node {node} under relation {relation}: several nodes {candidates:?} within tolerance")]
    AmbiguousMatch {
        node: usize,
        relation: String,
        candidates: Vec<usize>,
    },
    #[error(
        "relation {relation} pairs node {master} (materials {master_tags:?}) with node {slave} (materials {slave_tags:?})"
    )]
    MaterialMismatch {
        slave: usize,
        master: usize,
        relation: String,
        slave_tags: Vec<u32>,
        master_tags: Vec<u32>,
    },
    #[error("{} boundary node(s) not reached by any relation; first: node {}", .0.len(), .0[0])]
    UncoveredNode(Vec<usize>),
    #[error("relations {relations:?} close an inconsistent cycle at node {node} (residual {residual:e})")]
    InconsistentCycle {
        node: usize,
        relations: Vec<String>,
        residual: f64,
    },
}

/// One relation application: the forward map `T(x̂ − o)` or its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChainStep {
    pub relation: String,
    pub inverse: bool,
}

impl fmt::Display for ChainStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "{}^-1", self.relation)
        } else {
            f.write_str(&self.relation)
        }
    }
}

/// Directed pairing edge: `slave = map(master)` under `relation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub slave: usize,
    pub master: usize,
    pub relation: usize,
}

#[derive(Debug, Clone)]
pub struct PairingGraph {
    pub dim: Dim,
    pub tol: f64,
    pub bbox: BBox,
    pub labels: Vec<String>,
    pub maps: Vec<AffineMap>,
    pub edges: Vec<Edge>,
    pub coords: Vec<Point>,
    /// Boundary nodes and the relations whose source holds them.
    pub node_relations: BTreeMap<usize, Vec<String>>,
    /// Pairs whose nodes touch different material tags inside the cell.
    pub material_mismatches: Vec<MaterialNote>,
}

/// Paired nodes with different incident material tags.
///
/// Only the elements inside the cell are seen, so an interface lying on the
/// boundary (a layer ending at a periodic face) shows up here although the
/// pair is physically sound; [`PairingGraph::require_matching_materials`]
/// turns these notes into an error for meshes where that cannot happen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialNote {
    pub slave: usize,
    pub master: usize,
    pub relation: String,
    pub slave_tags: Vec<u32>,
    pub master_tags: Vec<u32>,
}

impl PairingGraph {
    pub fn require_matching_materials(&self) -> Result<(), PairingError> {
        match self.material_mismatches.first() {
            None => Ok(()),
            Some(m) => Err(PairingError::MaterialMismatch {
                slave: m.slave,
                master: m.master,
                relation: m.relation.clone(),
                slave_tags: m.slave_tags.clone(),
                master_tags: m.master_tags.clone(),
            }),
        }
    }
}

/// Retained pair: `x_slave = T (x_master − o)`, composed along `chain`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePair {
    pub slave: usize,
    pub master: usize,
    /// Steps applied to the master's position, first to last.
    pub chain: Vec<ChainStep>,
    pub transform: Transform,
    pub offset: Point,
    /// Slave equals master: a node fixed by a non-trivial composed symmetry.
    pub self_pair: bool,
}

impl NodePair {
    pub fn affine(&self) -> AffineMap {
        AffineMap {
            linear: self.transform,
            shift: -self.transform.apply(&self.offset),
        }
    }
}

#[derive(Serialize)]
struct NodePairJson {
    slave: usize,
    master: usize,
    relation_chain: Vec<String>,
    #[serde(rename = "T_composed")]
    t_composed: Vec<Vec<f64>>,
    offset_composed: Vec<f64>,
    self_pair: bool,
}

/// `pairs.json` payload.
pub fn pairs_to_json(pairs: &[NodePair]) -> String {
    let rows: Vec<NodePairJson> = pairs
        .iter()
        .map(|p| NodePairJson {
            slave: p.slave,
            master: p.master,
            relation_chain: p.chain.iter().map(|s| s.to_string()).collect(),
            t_composed: p.transform.rows(),
            offset_composed: point_vec(p.transform.dim(), &p.offset),
            self_pair: p.self_pair,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("pair serialization cannot fail")
}

struct NodeGrid {
    cell: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
}

impl NodeGrid {
    fn new(points: &[Point], tol: f64) -> Self {
        let cell = (4.0 * tol).max(f64::MIN_POSITIVE);
        let mut map: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(cell, p)).or_default().push(i);
        }
        NodeGrid { cell, map }
    }

    fn key(cell: f64, p: &Point) -> [i64; 3] {
        [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ]
    }

    fn within(&self, points: &[Point], q: &Point, tol: f64) -> Vec<usize> {
        let k = Self::key(self.cell, q);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        out.extend(ids.iter().copied().filter(|&i| (points[i] - q).norm() <= tol));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Finds, for every boundary node in a relation's source, the node at its image.
pub fn pair_boundary_nodes(mesh: &Mesh, spec: &CellSpec, tol: Option<f64>) -> Result<PairingGraph, PairingError> {
    if mesh.dim != spec.dim {
        return Err(PairingError::DimMismatch {
            mesh: mesh.dim,
            cell: spec.dim,
        });
    }
    let tol = tol.unwrap_or(DEFAULT_REL_TOL * spec.bbox.diagonal());
    let boundary = mesh.boundary_nodes(&spec.bbox, tol);
    let grid = NodeGrid::new(&mesh.nodes, tol);
    let tags = mesh.node_tags();

    type PerRelation = (Vec<Edge>, Vec<UnmatchedNode>, Vec<MaterialNote>);
    let per_relation: Vec<Result<PerRelation, PairingError>> = spec
        .relations
        .par_iter()
        .enumerate()
        .map(|(ri, rel)| {
            let mut edges = Vec::new();
            let mut unmatched = Vec::new();
            let mut mismatches = Vec::new();
            for &n in &boundary {
                let x = mesh.nodes[n];
                if !rel.source.contains(&x, tol) {
                    continue;
                }
                let image = rel.map_point(&x);
                let hits = grid.within(&mesh.nodes, &image, tol);
                match hits.as_slice() {
                    [] => unmatched.push(UnmatchedNode {
                        node: n,
                        relation: rel.label.clone(),
                        image: point_vec(spec.dim, &image),
                    }),
                    [m] => {
                        if tags[*m] != tags[n] {
                            mismatches.push(MaterialNote {
                                slave: *m,
                                master: n,
                                relation: rel.label.clone(),
                                slave_tags: tags[*m].iter().copied().collect(),
                                master_tags: tags[n].iter().copied().collect(),
                            });
                        }
                        edges.push(Edge {
                            slave: *m,
                            master: n,
                            relation: ri,
                        });
                    }
                    many => {
                        return Err(PairingError::AmbiguousMatch {
                            node: n,
                            relation: rel.label.clone(),
                            candidates: many.to_vec(),
                        })
                    }
                }
            }
            Ok((edges, unmatched, mismatches))
        })
        .collect();

    let mut edges = Vec::new();
    let mut unmatched = Vec::new();
    let mut material_mismatches = Vec::new();
    for r in per_relation {
        let (e, u, m) = r?;
        edges.extend(e);
        unmatched.extend(u);
        material_mismatches.extend(m);
    }
    if !unmatched.is_empty() {
        return Err(PairingError::UnmatchedNode(unmatched));
    }

    let mut touched = vec![false; mesh.nodes.len()];
    for e in &edges {
        touched[e.slave] = true;
        touched[e.master] = true;
    }
    let uncovered: Vec<usize> = boundary
        .iter()
        .copied()
        .filter(|&n| !touched[n] && !spec.is_free(&mesh.nodes[n], tol))
        .collect();
    if !uncovered.is_empty() {
        return Err(PairingError::UncoveredNode(uncovered));
    }

    let mut node_relations: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &n in &boundary {
        let rels: Vec<String> = spec
            .relations
            .iter()
            .filter(|r| r.source.contains(&mesh.nodes[n], tol))
            .map(|r| r.label.clone())
            .collect();
        node_relations.insert(n, rels);
    }

    Ok(PairingGraph {
        dim: spec.dim,
        tol,
        bbox: spec.bbox,
        labels: spec.labels(),
        maps: spec.relations.iter().map(|r| r.affine()).collect(),
        edges,
        coords: mesh.nodes.clone(),
        node_relations,
        material_mismatches,
    })
}

fn lex_less(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Spanning-tree resolution of a pairing graph with cycle closure checks.
pub fn resolve(graph: &PairingGraph) -> Result<Vec<NodePair>, PairingError> {
    let n = graph.coords.len();
    let mut dsu = Dsu::new(n);
    // adjacency: node -> (neighbour, edge index, traversed forward?)
    let mut adj: BTreeMap<usize, Vec<(usize, usize, bool)>> = BTreeMap::new();
    for (k, e) in graph.edges.iter().enumerate() {
        dsu.union(e.slave, e.master);
        adj.entry(e.master).or_default().push((e.slave, k, true));
        adj.entry(e.slave).or_default().push((e.master, k, false));
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in adj.keys() {
        classes.entry(dsu.find(v)).or_default().push(v);
    }

    let dim = graph.dim;
    let tol = graph.tol;
    let mut pairs = Vec::new();
    let mut self_pairs: Vec<NodePair> = Vec::new();

    for members in classes.values() {
        let root = *members
            .iter()
            .min_by(|a, b| lex_less(&graph.coords[**a], &graph.coords[**b]).then(a.cmp(b)))
            .expect("classes are non-empty");
        // A non-identity cycle is a point symmetry fixing the class. That is
        // legitimate where a relation maps a node onto itself or where
        // relations of different faces meet (edges, corners); inside a face
        // it means two relations claim the same patch.
        let has_self_loop = members
            .iter()
            .any(|v| adj[v].iter().any(|&(w, _, _)| w == *v));
        let on_faces = graph
            .bbox
            .faces()
            .into_iter()
            .filter(|f| (graph.coords[root][f.axis] - graph.bbox.face_coord(*f)).abs() <= tol)
            .count();
        let fixed_point_allowed = has_self_loop || on_faces >= 2;
        // x_v = map[v](x_root)
        let mut map: HashMap<usize, (AffineMap, Vec<ChainStep>)> = HashMap::new();
        map.insert(root, (AffineMap::identity(dim), Vec::new()));
        let mut tree_edge = BTreeSet::new();
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let (mv, chain) = map[&v].clone();
            for &(w, k, forward) in &adj[&v] {
                if map.contains_key(&w) {
                    continue;
                }
                let e = graph.edges[k];
                let step_map = if forward {
                    graph.maps[e.relation]
                } else {
                    graph.maps[e.relation].inverse()
                };
                let mut c = chain.clone();
                c.push(ChainStep {
                    relation: graph.labels[e.relation].clone(),
                    inverse: !forward,
                });
                map.insert(w, (step_map.after(&mv), c));
                tree_edge.insert(k);
                queue.push_back(w);
            }
        }
        for (k, e) in graph.edges.iter().enumerate() {
            if tree_edge.contains(&k) || !map.contains_key(&e.master) {
                continue;
            }
            let (ms, cs) = &map[&e.slave];
            let (mm, cm) = &map[&e.master];
            let composite = ms.inverse().after(&graph.maps[e.relation]).after(mm);
            if composite.is_identity(CLOSURE_LIN_TOL, tol) {
                continue;
            }
            let mut relations: Vec<String> = cm.iter().map(|s| s.relation.clone()).collect();
            relations.push(graph.labels[e.relation].clone());
            relations.extend(cs.iter().rev().map(|s| s.relation.clone()));
            let fixed = (composite.apply(&graph.coords[root]) - graph.coords[root]).norm();
            if fixed > tol || !fixed_point_allowed {
                return Err(PairingError::InconsistentCycle {
                    node: root,
                    relations,
                    residual: fixed.max((composite.linear.matrix() - nalgebra::Matrix3::identity()).amax()),
                });
            }
            let mut chain = cm.clone();
            chain.push(ChainStep {
                relation: graph.labels[e.relation].clone(),
                inverse: false,
            });
            chain.extend(cs.iter().rev().map(|s| ChainStep {
                relation: s.relation.clone(),
                inverse: !s.inverse,
            }));
            let candidate = NodePair {
                slave: root,
                master: root,
                chain,
                transform: composite.linear,
                offset: composite.origin(),
                self_pair: true,
            };
            let duplicate = self_pairs.iter().any(|p| {
                p.master == root
                    && p.transform.distance(&candidate.transform) <= CLOSURE_LIN_TOL
                    && (p.offset - candidate.offset).amax() <= tol
            });
            if !duplicate {
                self_pairs.push(candidate);
            }
        }

        let mut slaves: Vec<usize> = members.iter().copied().filter(|&v| v != root).collect();
        slaves.sort_unstable();
        for s in slaves {
            let (m, chain) = &map[&s];
            pairs.push(NodePair {
                slave: s,
                master: root,
                chain: chain.clone(),
                transform: m.linear,
                offset: m.origin(),
                self_pair: false,
            });
        }
    }
    pairs.sort_by_key(|p| (p.master, p.slave));
    self_pairs.sort_by(|a, b| {
        a.master
            .cmp(&b.master)
            .then_with(|| chain_key(&a.chain).cmp(&chain_key(&b.chain)))
    });
    pairs.extend(self_pairs);
    Ok(pairs)
}

fn chain_key(chain: &[ChainStep]) -> String {
    chain.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

/// Pairs and resolves in one call.
pub fn pair_mesh(mesh: &Mesh, spec: &CellSpec, tol: Option<f64>) -> Result<Vec<NodePair>, PairingError> {
    resolve(&pair_boundary_nodes(mesh, spec, tol)?)
}
