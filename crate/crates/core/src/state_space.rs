//! Floor plans and the lattice graph that discretizes their walkable area.
//!
//! A [`FloorPlan`] lists rooms and corridors as simple polygons together with
//! the anchor-node registry. [`build_grid`] places nodes on a square lattice
//! anchored at the origin, keeps the ones inside a walkable polygon and joins
//! 4-connected lattice neighbours whenever the segment between them stays
//! inside the walkable union.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_within_union, Point2, Polygon, BOUNDARY_EPS};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Region<T> {
    pub id: String,
    #[serde(with = "polygon_as_pairs")]
    pub polygon: Polygon<T>,
}

impl<T: Real> Region<T> {
    pub fn new(id: impl Into<String>, polygon: Polygon<T>) -> Self {
        Self {
            id: id.into(),
            polygon,
        }
    }
}

/// An anchor node; position is `None` for anchors used only as fingerprint sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Anchor<T> {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<T>,
}

impl<T: Real> Anchor<T> {
    pub fn known(id: impl Into<String>, x: T, y: T) -> Self {
        Self {
            id: id.into(),
            x: Some(x),
            y: Some(y),
        }
    }

    pub fn unknown(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            x: None,
            y: None,
        }
    }

    pub fn position(&self) -> Option<Point2<T>> {
        match (self.x, self.y) {
            (Some(x), Some(y)) => Some(Point2::new(x, y)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FloorPlan<T> {
    /// `[width, height]` in meters; the lattice spans `[0, width] x [0, height]`.
    pub bounds: [T; 2],
    pub rooms: Vec<Region<T>>,
    #[serde(default)]
    pub corridors: Vec<Region<T>>,
    #[serde(default)]
    pub anchors: Vec<Anchor<T>>,
    #[serde(default = "default_spacing")]
    pub grid_spacing_m: T,
}

fn default_spacing<T: Real>() -> T {
    lit(0.25)
}

impl<T: Real> FloorPlan<T> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Walkable regions in assignment order: rooms first, then corridors.
    pub fn walkable(&self) -> impl Iterator<Item = &Region<T>> {
        self.rooms.iter().chain(self.corridors.iter())
    }

    pub fn room_ids(&self) -> Vec<String> {
        self.walkable().map(|r| r.id.clone()).collect()
    }

    /// Id of the first walkable region containing `p`.
    pub fn region_at(&self, p: Point2<T>) -> Option<&str> {
        self.walkable()
            .find(|r| r.polygon.contains(p))
            .map(|r| r.id.as_str())
    }

    pub fn region(&self, id: &str) -> Option<&Region<T>> {
        self.walkable().find(|r| r.id == id)
    }

    pub fn is_walkable(&self, p: Point2<T>) -> bool {
        self.region_at(p).is_some()
    }

    /// Anchors with a registered position.
    pub fn anchor_positions(&self) -> BTreeMap<String, Point2<T>> {
        self.anchors
            .iter()
            .filter_map(|a| a.position().map(|p| (a.id.clone(), p)))
            .collect()
    }

    pub fn anchor_ids(&self) -> Vec<String> {
        self.anchors.iter().map(|a| a.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bounds[0] > T::zero() && self.bounds[1] > T::zero()) {
            return Err(Error::InvalidParameter(
                "bounds must be positive".to_string(),
            ));
        }
        let mut seen = HashSet::new();
        for region in self.walkable() {
            if !seen.insert(region.id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate region id `{}`",
                    region.id
                )));
            }
            region.polygon.validate(&region.id)?;
        }
        for (i, a) in self.rooms.iter().enumerate() {
            for b in &self.rooms[i + 1..] {
                if a.polygon.overlaps(&b.polygon) {
                    return Err(Error::InvalidPolygon {
                        name: b.id.clone(),
                        reason: format!("overlaps room `{}`", a.id),
                    });
                }
            }
        }
        let mut anchor_ids = HashSet::new();
        for anchor in &self.anchors {
            if !anchor_ids.insert(anchor.id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate anchor id `{}`",
                    anchor.id
                )));
            }
            if anchor.x.is_some() != anchor.y.is_some() {
                return Err(Error::InvalidParameter(format!(
                    "anchor `{}` has only one coordinate",
                    anchor.id
                )));
            }
        }
        Ok(())
    }
}

mod polygon_as_pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<T: Real, S: Serializer>(p: &Polygon<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[T; 2]> = p.vertices.iter().map(|v| [v.x, v.y]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Polygon<T>, D::Error> {
        let pairs: Vec<[T; 2]> = Vec::deserialize(d)?;
        Ok(Polygon::new(
            pairs.into_iter().map(|[x, y]| Point2::new(x, y)).collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode<T> {
    pub x: T,
    pub y: T,
    /// Index into [`FloorPlanGraph::room_ids`].
    pub room: usize,
}

impl<T: Real> GridNode<T> {
    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

/// Immutable lattice graph over the walkable area.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlanGraph<T> {
    nodes: Vec<GridNode<T>>,
    adjacency: Vec<Vec<usize>>,
    room_ids: Vec<String>,
    spacing: T,
}

impl<T: Real> FloorPlanGraph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn nodes(&self) -> &[GridNode<T>] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Result<&GridNode<T>> {
        self.nodes.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.nodes.len(),
        })
    }

    /// Adjacency list of `index`, ascending.
    pub fn neighbors(&self, index: usize) -> Result<&[usize]> {
        self.adjacency
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.nodes.len(),
            })
    }

    pub fn node_room(&self, index: usize) -> Result<&str> {
        Ok(&self.room_ids[self.node(index)?.room])
    }

    /// Region ids in plan order; a node's `room` indexes this list.
    pub fn room_ids(&self) -> &[String] {
        &self.room_ids
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.room_ids.iter().position(|r| r == id)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes_in_room(&self, room: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.room == room)
            .map(|(i, _)| i)
    }

    /// Unweighted mean of node coordinates.
    pub fn centroid(&self) -> Point2<T> {
        let n = lit::<T>(self.nodes.len() as f64);
        let sx: T = self.nodes.iter().map(|v| v.x).sum();
        let sy: T = self.nodes.iter().map(|v| v.y).sum();
        Point2::new(sx / n, sy / n)
    }
}

/// Builds the lattice graph of `plan` with pitch `spacing` meters.
pub fn build_grid<T: Real>(plan: &FloorPlan<T>, spacing: T) -> Result<FloorPlanGraph<T>> {
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    plan.validate()?;

    let eps = lit::<T>(BOUNDARY_EPS);
    let nx = to_f64((plan.bounds[0] / spacing + eps).floor()) as usize + 1;
    let ny = to_f64((plan.bounds[1] / spacing + eps).floor()) as usize + 1;

    let regions: Vec<&Region<T>> = plan.walkable().collect();
    let polys: Vec<&Polygon<T>> = regions.iter().map(|r| &r.polygon).collect();
    let room_ids: Vec<String> = regions.iter().map(|r| r.id.clone()).collect();

    let mut index = vec![usize::MAX; nx * ny];
    let mut nodes = Vec::new();
    for j in 0..ny {
        let y = lit::<T>(j as f64) * spacing;
        for i in 0..nx {
            let x = lit::<T>(i as f64) * spacing;
            let p = Point2::new(x, y);
            if let Some(room) = polys.iter().position(|poly| poly.contains(p)) {
                index[j * nx + i] = nodes.len();
                nodes.push(GridNode { x, y, room });
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::NoNodes);
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for j in 0..ny {
        for i in 0..nx {
            let a = index[j * nx + i];
            if a == usize::MAX {
                continue;
            }
            let right = (i + 1 < nx).then(|| index[j * nx + i + 1]);
            let up = (j + 1 < ny).then(|| index[(j + 1) * nx + i]);
            for b in [right, up].into_iter().flatten() {
                if b == usize::MAX {
                    continue;
                }
                let pa = nodes[a].position();
                let pb = nodes[b].position();
                let same_convex_region = nodes[a].room == nodes[b].room
                    && polys[nodes[a].room].vertices.len() == 4
                    && is_axis_rect(polys[nodes[a].room]);
                if same_convex_region || segment_within_union(pa, pb, &polys) {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    Ok(FloorPlanGraph {
        nodes,
        adjacency,
        room_ids,
        spacing,
    })
}

fn is_axis_rect<T: Real>(p: &Polygon<T>) -> bool {
    p.edges().all(|(a, b)| a.x == b.x || a.y == b.y)
}
