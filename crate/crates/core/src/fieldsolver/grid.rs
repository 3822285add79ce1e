//! Graded tensor-product grids.

use super::geometry::{CrossSection, Meshing};

/// Node spacing as a function of distance to the nearest feature line.
#[derive(Debug, Clone, Copy)]
struct Spacing {
    edge: f64,
    growth: f64,
    far: f64,
}

impl Spacing {
    fn from_meshing(m: &Meshing) -> Self {
        Self {
            edge: m.edge_spacing(),
            growth: m.growth_rate(),
            far: m.far_spacing().max(m.edge_spacing()),
        }
    }

    /// Distance at which the graded spacing reaches the far-field cap.
    fn cap_distance(&self) -> f64 {
        (self.far - self.edge) / self.growth
    }

    /// Number of cells needed to cover distance `d` from a feature: `∫₀ᵈ 1/h`.
    fn density(&self, d: f64) -> f64 {
        let dc = self.cap_distance();
        if d <= dc {
            (self.growth * d / self.edge).ln_1p() / self.growth
        } else {
            (self.growth * dc / self.edge).ln_1p() / self.growth + (d - dc) / self.far
        }
    }

    fn inverse_density(&self, s: f64) -> f64 {
        let dc = self.cap_distance();
        let sc = self.density(dc);
        if s <= sc {
            self.edge * (self.growth * s).exp_m1() / self.growth
        } else {
            dc + (s - sc) * self.far
        }
    }
}

/// Nodes on `[a, b]` where `a` and `b` are consecutive breakpoints and
/// `left`/`right` are the nearest attracting features at or beyond them.
fn segment_nodes(a: f64, b: f64, left: Option<f64>, right: Option<f64>, sp: &Spacing) -> Vec<f64> {
    // Cumulative cell count along the segment, split at the point equidistant
    // from both features.
    let mid = match (left, right) {
        (Some(l), Some(r)) => (0.5 * (l + r)).clamp(a, b),
        (Some(_), None) => b,
        (None, Some(_)) => a,
        (None, None) => b,
    };
    let s_left = |x: f64| match left {
        Some(l) => sp.density(x - l) - sp.density(a - l),
        None => (x - a) / sp.far,
    };
    let s_mid = s_left(mid);
    let s_right = |x: f64| match right {
        Some(r) => s_mid + sp.density(r - mid) - sp.density(r - x),
        None => s_mid + (x - mid) / sp.far,
    };
    let total = s_right(b);
    let n = (total - 1e-9).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(a);
    for k in 1..n {
        let s = total * k as f64 / n as f64;
        let x = if s <= s_mid {
            match left {
                Some(l) => l + sp.inverse_density(s + sp.density(a - l)),
                None => a + s * sp.far,
            }
        } else {
            match right {
                Some(r) => r - sp.inverse_density(sp.density(r - mid) - (s - s_mid)),
                None => mid + (s - s_mid) * sp.far,
            }
        };
        nodes.push(x.clamp(a, b));
    }
    nodes.push(b);
    nodes
}

/// Node coordinates on `[lo, hi]` with every breakpoint a node and spacing
/// graded away from the attractors.
pub(crate) fn graded_axis(lo: f64, hi: f64, attractors: &[f64], breakpoints: &[f64], m: &Meshing) -> Vec<f64> {
    let sp = Spacing::from_meshing(m);
    let mut breaks: Vec<f64> = breakpoints
        .iter()
        .chain(attractors)
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .chain([lo, hi])
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut nodes = vec![lo];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let left = attractors.iter().copied().filter(|f| *f <= a).max_by(f64::total_cmp);
        let right = attractors.iter().copied().filter(|f| *f >= b).min_by(f64::total_cmp);
        nodes.extend(segment_nodes(a, b, left, right, &sp).into_iter().skip(1));
    }
    nodes
}

/// Axis mirrored about `m`: built on `[m, hi]` and reflected.
fn mirrored_axis(lo: f64, hi: f64, m: f64, attractors: &[f64], meshing: &Meshing) -> Vec<f64> {
    debug_assert!(((m - lo) - (hi - m)).abs() <= 1e-12 * (hi - lo));
    let half = graded_axis(m, hi, attractors, &[], meshing);
    let mut nodes: Vec<f64> = half.iter().skip(1).rev().map(|x| 2.0 * m - x).collect();
    nodes.push(m);
    nodes.extend(half.into_iter().skip(1));
    nodes[0] = lo;
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellKind {
    Dielectric(f64),
    Conductor(usize),
}

/// Structured grid with material map. Node `(i, j)` sits at `(xs[i], ys[j])`;
/// cell `(i, j)` spans `[xs[i], xs[i+1]] × [ys[j], ys[j+1]]`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<CellKind>,
}

impl Grid {
    pub fn build(cs: &CrossSection) -> Self {
        let d = &cs.domain;
        let fx = cs.features_x();
        let fy = cs.features_y();
        let xs = match cs.mirror_x {
            Some(m) => mirrored_axis(d.x0, d.x1, m, &fx, &cs.meshing),
            None => graded_axis(d.x0, d.x1, &fx, &[], &cs.meshing),
        };
        let ys = graded_axis(d.y0, d.y1, &fy, &[], &cs.meshing);
        let mut cells = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
        for j in 0..ys.len() - 1 {
            let yc = 0.5 * (ys[j] + ys[j + 1]);
            for i in 0..xs.len() - 1 {
                let xc = 0.5 * (xs[i] + xs[i + 1]);
                let kind = match cs.conductor_at(xc, yc) {
                    Some(c) => CellKind::Conductor(c),
                    None if cs.is_substrate(yc) => CellKind::Dielectric(cs.substrate_epsilon),
                    None => CellKind::Dielectric(1.0),
                };
                cells.push(kind);
            }
        }
        Self { xs, ys, cells }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    /// Cell lookup; `None` outside the grid.
    pub fn cell(&self, i: isize, j: isize) -> Option<CellKind> {
        if i < 0 || j < 0 || i as usize >= self.nx() - 1 || j as usize >= self.ny() - 1 {
            return None;
        }
        Some(self.cells[j as usize * (self.nx() - 1) + i as usize])
    }

    pub fn permittivity(&self, i: isize, j: isize) -> Option<f64> {
        match self.cell(i, j) {
            Some(CellKind::Dielectric(e)) => Some(e),
            _ => None,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        self.xs
            .windows(2)
            .chain(self.ys.windows(2))
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Index of the node coordinate closest to `v`.
pub(crate) fn nearest(coords: &[f64], v: f64) -> usize {
    match coords.binary_search_by(|c| c.total_cmp(&v)) {
        Ok(k) => k,
        Err(0) => 0,
        Err(k) if k == coords.len() => coords.len() - 1,
        Err(k) => {
            if v - coords[k - 1] <= coords[k] - v {
                k - 1
            } else {
                k
            }
        }
    }
}

/// Index of an exact node coordinate.
pub(crate) fn exact(coords: &[f64], v: f64) -> Option<usize> {
    coords.binary_search_by(|c| c.total_cmp(&v)).ok()
}
