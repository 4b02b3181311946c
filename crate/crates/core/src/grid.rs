//! Uniform grids, the minimum-time value field, and the target set.

use crate::convexset::ConvexBody;
use crate::error::{Error, Result};
use crate::space::{BoundsBox, VecN};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Uniform tensor grid on a box; `cells` counts intervals per axis, so each
/// axis carries `cells + 1` nodes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub cells: [usize; 3],
}

impl GridSpec {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        let mut g = GridSpec {
            dim,
            lo: [0.0; 3],
            hi: [0.0; 3],
            cells: [1; 3],
        };
        g.lo[..dim].copy_from_slice(lo);
        g.hi[..dim].copy_from_slice(hi);
        g.cells[..dim].copy_from_slice(cells);
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("grid dimension {} outside 1..=3", self.dim)));
        }
        for i in 0..self.dim {
            if !(self.lo[i] < self.hi[i]) {
                return Err(Error::Config(format!(
                    "grid bounds on axis {i} not strictly ordered"
                )));
            }
            if self.cells[i] < 8 {
                return Err(Error::Config(format!(
                    "axis {i} has {} cells, need at least 8",
                    self.cells[i]
                )));
            }
        }
        Ok(())
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    /// Largest axis spacing; the scale for rasterization and tolerances.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.spacing(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nodes(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        (0..self.dim).map(|i| self.nodes(i)).product()
    }

    pub fn node_pos(&self, idx: &[usize; 3]) -> VecN {
        let mut p = VecN::zeros();
        for i in 0..self.dim {
            p[i] = self.lo[i] + idx[i] as f64 * self.spacing(i);
        }
        p
    }

    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        let mut flat = 0;
        for i in (0..self.dim).rev() {
            flat = flat * self.nodes(i) + idx[i];
        }
        flat
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for i in 0..self.dim {
            idx[i] = flat % self.nodes(i);
            flat /= self.nodes(i);
        }
        idx
    }

    pub fn contains(&self, x: &VecN) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] - 1e-12 && x[i] <= self.hi[i] + 1e-12)
    }

    pub fn bounds(&self) -> BoundsBox {
        BoundsBox {
            dim: self.dim,
            lo: self.lo,
            hi: self.hi,
        }
    }

    /// Node nearest to `x`, or None when outside.
    pub fn nearest_node(&self, x: &VecN) -> Option<[usize; 3]> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = [0usize; 3];
        for i in 0..self.dim {
            let t = ((x[i] - self.lo[i]) / self.spacing(i)).round();
            idx[i] = (t.max(0.0) as usize).min(self.cells[i]);
        }
        Some(idx)
    }
}

/// Closed target set: a finite union of convex bodies.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TargetSet {
    pub bodies: Vec<ConvexBody>,
    /// Membership tolerance used for rasterization checks.
    pub tol: f64,
}

impl TargetSet {
    pub fn single(body: ConvexBody, tol: f64) -> Self {
        TargetSet {
            bodies: vec![body],
            tol,
        }
    }

    pub fn distance(&self, x: &VecN) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &VecN) -> bool {
        self.distance(x) <= self.tol
    }

    pub fn project(&self, x: &VecN) -> VecN {
        let mut best = self.bodies[0].project(x);
        let mut best_d = best.dist(x);
        for b in &self.bodies[1..] {
            let p = b.project(x);
            let d = p.dist(x);
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        best
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.bodies.is_empty() {
            return Err(Error::Config("target set needs at least one body".into()));
        }
        for b in &self.bodies {
            b.validate(dim)?;
        }
        Ok(())
    }
}

/// The minimum-time function sampled on a grid; `+∞` marks unreached nodes.
#[derive(Clone, Debug)]
pub struct ValueField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub target_mask: Vec<bool>,
    pub residual: f64,
    pub sweeps: usize,
}

/// Nodes of a sublevel set with boundary flags.
#[derive(Clone, Debug)]
pub struct SublevelCloud {
    pub points: Vec<VecN>,
    pub boundary: Vec<bool>,
    pub node_indices: Vec<usize>,
}

impl ValueField {
    /// Multilinear interpolation; any non-finite stencil corner makes the
    /// result `+∞`. Out-of-domain points are an error.
    pub fn eval(&self, x: &VecN) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::OutOfDomain {
                point: x.to_vec(self.grid.dim),
            });
        }
        let g = &self.grid;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for i in 0..g.dim {
            let t = (x[i] - g.lo[i]) / g.spacing(i);
            let cell = (t.floor().max(0.0) as usize).min(g.cells[i] - 1);
            base[i] = cell;
            frac[i] = (t - cell as f64).clamp(0.0, 1.0);
        }
        let corners = 1usize << g.dim;
        let mut acc = 0.0;
        for corner in 0..corners {
            let mut idx = base;
            let mut w = 1.0;
            for i in 0..g.dim {
                if corner >> i & 1 == 1 {
                    idx[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            let v = self.values[g.flat_index(&idx)];
            if !v.is_finite() {
                if w > 1e-14 {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// All grid nodes with `T <= t`; a node is boundary-flagged when some
    /// axis neighbor exceeds the level or is unreached.
    pub fn sublevel_points(&self, t: f64) -> SublevelCloud {
        let g = &self.grid;
        let mut points = Vec::new();
        let mut boundary = Vec::new();
        let mut node_indices = Vec::new();
        for flat in 0..g.node_count() {
            let v = self.values[flat];
            if !(v <= t) {
                continue;
            }
            let idx = g.multi_index(flat);
            let mut is_boundary = false;
            for axis in 0..g.dim {
                for dir in [-1isize, 1isize] {
                    let ni = idx[axis] as isize + dir;
                    if ni < 0 || ni as usize >= g.nodes(axis) {
                        continue;
                    }
                    let mut nidx = idx;
                    nidx[axis] = ni as usize;
                    let nv = self.values[g.flat_index(&nidx)];
                    if !(nv <= t) {
                        is_boundary = true;
                    }
                }
            }
            points.push(g.node_pos(&idx));
            boundary.push(is_boundary);
            node_indices.push(flat);
        }
        SublevelCloud {
            points,
            boundary,
            node_indices,
        }
    }

    /// Sub-pixel points on the level curve `{T = t}`: linear-interpolated
    /// crossings along grid edges, thinned to a minimum separation.
    pub fn level_crossings(&self, t: f64, min_separation: f64) -> Vec<VecN> {
        let g = &self.grid;
        let mut raw = Vec::new();
        for flat in 0..g.node_count() {
            let v0 = self.values[flat];
            if !v0.is_finite() {
                continue;
            }
            let idx = g.multi_index(flat);
            for axis in 0..g.dim {
                if idx[axis] + 1 >= g.nodes(axis) {
                    continue;
                }
                let mut nidx = idx;
                nidx[axis] += 1;
                let v1 = self.values[g.flat_index(&nidx)];
                if !v1.is_finite() {
                    continue;
                }
                if (v0 - t) * (v1 - t) < 0.0 {
                    let frac = (t - v0) / (v1 - v0);
                    let mut p = g.node_pos(&idx);
                    p[axis] += frac * g.spacing(axis);
                    raw.push(p);
                }
            }
        }
        let mut kept: Vec<VecN> = Vec::new();
        for p in raw {
            if kept.iter().all(|q| q.dist(&p) >= min_separation) {
                kept.push(p);
            }
        }
        kept
    }

    /// Local Lipschitz estimate: max finite neighbor difference ratio over
    /// nodes within `radius` of `x`.
    pub fn lipschitz_estimate(&self, x: &VecN, radius: f64) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for (flat, idx, _) in self.nodes_near(x, radius) {
            let v = self.values[flat];
            if !v.is_finite() {
                continue;
            }
            for axis in 0..g.dim {
                if idx[axis] + 1 < g.nodes(axis) {
                    let mut nidx = idx;
                    nidx[axis] += 1;
                    let nv = self.values[g.flat_index(&nidx)];
                    if nv.is_finite() {
                        worst = worst.max((nv - v).abs() / g.spacing(axis));
                    }
                }
            }
        }
        worst
    }

    /// Nodes within `radius` of `x` as (flat index, multi-index, position).
    pub fn nodes_near(&self, x: &VecN, radius: f64) -> Vec<(usize, [usize; 3], VecN)> {
        let g = &self.grid;
        let mut lo_idx = [0usize; 3];
        let mut hi_idx = [0usize; 3];
        for i in 0..g.dim {
            let lo = ((x[i] - radius - g.lo[i]) / g.spacing(i)).floor().max(0.0) as usize;
            let hi = (((x[i] + radius - g.lo[i]) / g.spacing(i)).ceil().max(0.0) as usize)
                .min(g.cells[i]);
            lo_idx[i] = lo.min(g.cells[i]);
            hi_idx[i] = hi;
        }
        let mut out = Vec::new();
        let mut idx = lo_idx;
        loop {
            let p = g.node_pos(&idx);
            if p.dist(x) <= radius {
                out.push((g.flat_index(&idx), idx, p));
            }
            // Odometer increment over the box of indices.
            let mut axis = 0;
            loop {
                if axis >= g.dim {
                    return out;
                }
                if idx[axis] < hi_idx[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = lo_idx[axis];
                axis += 1;
            }
        }
    }

    /// Jump filter: true when a neighbor is unreached or the neighbor value
    /// ratio exceeds `ratio_cap` (interpolating across a discontinuity of T
    /// fabricates normals, so such nodes are excluded from claims).
    pub fn near_jump(&self, flat: usize, ratio_cap: f64) -> bool {
        let g = &self.grid;
        let idx = g.multi_index(flat);
        let v = self.values[flat];
        if !v.is_finite() {
            return true;
        }
        for axis in 0..g.dim {
            for dir in [-1isize, 1isize] {
                let ni = idx[axis] as isize + dir;
                if ni < 0 || ni as usize >= g.nodes(axis) {
                    return true;
                }
                let mut nidx = idx;
                nidx[axis] = ni as usize;
                let nv = self.values[g.flat_index(&nidx)];
                if !nv.is_finite() {
                    return true;
                }
                let lo = v.min(nv).max(1e-12);
                let hi = v.max(nv);
                if hi / lo > ratio_cap && hi - lo > 4.0 * g.max_spacing() {
                    return true;
                }
            }
        }
        false
    }

    /// CSV serialization: header then one row per node (coordinates, value);
    /// unreached nodes carry the token `inf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let mut header: Vec<String> = (0..g.dim).map(|i| format!("x{}", i + 1)).collect();
        header.push("value".to_string());
        writeln!(w, "{}", header.join(","))?;
        for flat in 0..g.node_count() {
            let idx = g.multi_index(flat);
            let p = g.node_pos(&idx);
            let mut row: Vec<String> = (0..g.dim).map(|i| format!("{}", p[i])).collect();
            let v = self.values[flat];
            row.push(if v.is_finite() {
                format!("{v}")
            } else {
                "inf".to_string()
            });
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON header accompanying the CSV artifact.
    pub fn meta_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "grid": self.grid,
            "residual": self.residual,
            "sweeps": self.sweeps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_field() -> ValueField {
        let grid = GridSpec::new(2, &[0.0, 0.0], &[1.0, 1.0], &[10, 10]).unwrap();
        let mut values = vec![0.0; grid.node_count()];
        for flat in 0..grid.node_count() {
            let p = grid.node_pos(&grid.multi_index(flat));
            values[flat] = p[0] + 2.0 * p[1];
        }
        ValueField {
            grid,
            values,
            target_mask: vec![false; 121],
            residual: 0.0,
            sweeps: 0,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, &[0.0, 0.0], &[1.0, 1.0], &[4, 10]).is_err());
        assert!(GridSpec::new(2, &[1.0, 0.0], &[0.0, 1.0], &[10, 10]).is_err());
        assert!(GridSpec::new(4, &[0.0; 3], &[1.0; 3], &[10; 3]).is_err());
    }

    #[test]
    fn interpolation_matches_linear_function() {
        let f = small_field();
        let x = VecN::new2(0.33, 0.57);
        assert!((f.eval(&x).unwrap() - (0.33 + 2.0 * 0.57)).abs() < 1e-12);
        // Node values are reproduced exactly.
        let node = f.grid.node_pos(&[3, 4, 0]);
        assert_eq!(f.eval(&node).unwrap(), f.values[f.grid.flat_index(&[3, 4, 0])]);
        assert!(f.eval(&VecN::new2(1.5, 0.0)).is_err());
    }

    #[test]
    fn infinity_propagates_through_interpolation() {
        let mut f = small_field();
        let flat = f.grid.flat_index(&[5, 5, 0]);
        f.values[flat] = f64::INFINITY;
        let inside_cell = VecN::new2(0.45, 0.45);
        assert!(f.eval(&inside_cell).unwrap().is_infinite());
        // A point exactly on a far node is unaffected.
        assert!(f.eval(&VecN::new2(0.1, 0.1)).unwrap().is_finite());
    }

    #[test]
    fn sublevel_flags_boundary() {
        let f = small_field();
        let cloud = f.sublevel_points(1.0);
        assert!(!cloud.points.is_empty());
        for (p, b) in cloud.points.iter().zip(cloud.boundary.iter()) {
            let v = p[0] + 2.0 * p[1];
            assert!(v <= 1.0 + 1e-12);
            // Nodes well inside are not flagged.
            if v < 0.7 {
                assert!(!b, "interior node flagged at {p:?}");
            }
        }
    }

    #[test]
    fn level_crossings_lie_on_level() {
        let f = small_field();
        for p in f.level_crossings(1.0, 0.05) {
            assert!((p[0] + 2.0 * p[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_has_header_and_inf_token() {
        let mut f = small_field();
        f.values[0] = f64::INFINITY;
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,value");
        assert!(lines.next().unwrap().ends_with(",inf"));
    }

    #[test]
    fn target_union_distance() {
        let t = TargetSet {
            bodies: vec![
                ConvexBody::ball(&[0.0, 0.0], 0.1),
                ConvexBody::ball(&[1.0, 0.0], 0.1),
            ],
            tol: 1e-9,
        };
        assert!((t.distance(&VecN::new2(0.5, 0.0)) - 0.4).abs() < 1e-12);
        assert!(t.contains(&VecN::new2(1.05, 0.0)));
    }
}
