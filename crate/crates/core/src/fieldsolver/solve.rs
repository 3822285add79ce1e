//! Finite-volume Laplace solve and field post-processing.

use serde::Serialize;

use super::geometry::{ConductorRole, CrossSection, InterfaceKind, LateralBoundary, Rect};
use super::grid::{exact, nearest, CellKind, Grid};
use crate::error::{Error, Result};

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;

/// Which region's field a boundary sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Substrate,
    Vacuum,
}

/// Field one cell away from a boundary segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySample {
    pub kind: InterfaceKind,
    /// Conductor the segment is attributed to.
    pub conductor: usize,
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub e_parallel: f64,
    pub e_perpendicular: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-12,
            max_iterations: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub cross_section: CrossSection,
    pub grid: Grid,
    pub v_signal: f64,
    /// Node potentials, x fastest.
    pub potential: Vec<f64>,
    /// Cell-centre field `(E_x, E_y)`, V/m; zero inside conductors.
    pub e_field: Vec<(f64, f64)>,
    /// Stored energy per unit length, J/m.
    pub total_energy: f64,
    /// Signal-conductor charge per unit length from a Gauss contour, C/m.
    pub signal_charge: f64,
    pub samples: Vec<BoundarySample>,
    pub unknowns: usize,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl FieldSolution {
    /// `2W / V²`.
    pub fn energy_capacitance(&self) -> f64 {
        2.0 * self.total_energy / (self.v_signal * self.v_signal)
    }

    /// `Q / V`.
    pub fn charge_capacitance(&self) -> f64 {
        self.signal_charge / self.v_signal
    }

    /// `Σ ε_r ∫|E|² dA`, the energy without the `½ε0` prefactor.
    pub fn energy_integral(&self) -> f64 {
        2.0 * self.total_energy / EPSILON_0
    }

    pub fn potential_at(&self, i: usize, j: usize) -> f64 {
        self.potential[self.grid.node(i, j)]
    }

    /// `(min, max)` over free nodes and over fixed nodes.
    pub fn potential_ranges(&self, fixed: &[bool]) -> ((f64, f64), (f64, f64)) {
        let mut free = (f64::INFINITY, f64::NEG_INFINITY);
        let mut bound = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, f) in self.potential.iter().zip(fixed) {
            let r = if *f { &mut bound } else { &mut free };
            r.0 = r.0.min(*v);
            r.1 = r.1.max(*v);
        }
        (free, bound)
    }

    /// True when every free node lies within the range of fixed values.
    pub fn satisfies_maximum_principle(&self) -> bool {
        let fixed = fixed_nodes(&self.cross_section, &self.grid)
            .iter()
            .map(Option::is_some)
            .collect::<Vec<_>>();
        let ((lo, hi), (blo, bhi)) = self.potential_ranges(&fixed);
        let slack = 1e-9 * (bhi - blo).abs().max(f64::MIN_POSITIVE);
        lo >= blo - slack && hi <= bhi + slack
    }

    pub fn cell_field(&self, i: usize, j: usize) -> (f64, f64) {
        self.e_field[j * (self.grid.nx() - 1) + i]
    }
}

/// Fixed potential for every node, or `None` for unknowns. Conductor
/// values take precedence over the outer boundary.
pub(crate) fn fixed_nodes(cs: &CrossSection, grid: &Grid) -> Vec<Option<f64>> {
    fixed_nodes_with(cs, grid, 1.0)
}

fn fixed_nodes_with(cs: &CrossSection, grid: &Grid, v: f64) -> Vec<Option<f64>> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (grid.xs[i], grid.ys[j]);
            let value = match cs.conductor_at(x, y) {
                Some(c) => Some(match cs.conductors[c].role {
                    ConductorRole::Signal => v,
                    ConductorRole::Ground => 0.0,
                }),
                None => {
                    let top_bottom = j == 0 || j == ny - 1;
                    let side = (i == 0 || i == nx - 1) && cs.lateral == LateralBoundary::Grounded;
                    (top_bottom || side).then_some(0.0)
                }
            };
            out[j * nx + i] = value;
        }
    }
    out
}

/// Five-point operator: east and north couplings per node.
struct Operator {
    nx: usize,
    east: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
    free: Vec<bool>,
}

impl Operator {
    fn assemble(grid: &Grid, fixed: &[Option<f64>]) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut east = vec![0.0; nx * ny];
        let mut north = vec![0.0; nx * ny];
        let eps = |i: usize, j: isize, di: isize| grid.permittivity(i as isize + di, j).unwrap_or(0.0);
        for j in 0..ny {
            for i in 0..nx {
                let p = j * nx + i;
                if i + 1 < nx {
                    let dx = grid.xs[i + 1] - grid.xs[i];
                    let below = if j > 0 { eps(i, j as isize - 1, 0) * (grid.ys[j] - grid.ys[j - 1]) } else { 0.0 };
                    let above = if j + 1 < ny { eps(i, j as isize, 0) * (grid.ys[j + 1] - grid.ys[j]) } else { 0.0 };
                    east[p] = 0.5 * (below + above) / dx;
                }
                if j + 1 < ny {
                    let dy = grid.ys[j + 1] - grid.ys[j];
                    let left = if i > 0 { eps(i, j as isize, -1) * (grid.xs[i] - grid.xs[i - 1]) } else { 0.0 };
                    let right = if i + 1 < nx { eps(i, j as isize, 0) * (grid.xs[i + 1] - grid.xs[i]) } else { 0.0 };
                    north[p] = 0.5 * (left + right) / dy;
                }
            }
        }
        let mut diag = vec![0.0; nx * ny];
        for p in 0..nx * ny {
            let i = p % nx;
            let mut d = east[p] + north[p];
            if i > 0 {
                d += east[p - 1];
            }
            if p >= nx {
                d += north[p - nx];
            }
            diag[p] = d;
        }
        let free = fixed.iter().map(Option::is_none).collect();
        Self { nx, east, north, diag, free }
    }

    fn neighbours(&self, p: usize) -> [(usize, f64); 4] {
        let n = self.diag.len();
        let i = p % self.nx;
        let w = if i > 0 { (p - 1, self.east[p - 1]) } else { (p, 0.0) };
        let e = if i + 1 < self.nx { (p + 1, self.east[p]) } else { (p, 0.0) };
        let s = if p >= self.nx { (p - self.nx, self.north[p - self.nx]) } else { (p, 0.0) };
        let nn = if p + self.nx < n { (p + self.nx, self.north[p]) } else { (p, 0.0) };
        [w, e, s, nn]
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for p in 0..x.len() {
            if !self.free[p] {
                y[p] = 0.0;
                continue;
            }
            let mut acc = self.diag[p] * x[p];
            for (q, a) in self.neighbours(p) {
                if q != p && self.free[q] {
                    acc -= a * x[q];
                }
            }
            y[p] = acc;
        }
    }

    fn rhs(&self, fixed: &[Option<f64>]) -> Vec<f64> {
        let mut b = vec![0.0; fixed.len()];
        for (p, bp) in b.iter_mut().enumerate() {
            if !self.free[p] {
                continue;
            }
            for (q, a) in self.neighbours(p) {
                if let (true, Some(v)) = (q != p, fixed[q]) {
                    *bp += a * v;
                }
            }
        }
        b
    }
}

/// Incomplete Cholesky with zero fill, natural ordering.
struct Preconditioner {
    pivots: Vec<f64>,
}

impl Preconditioner {
    fn new(op: &Operator) -> Self {
        let nx = op.nx;
        let mut pivots = vec![1.0; op.diag.len()];
        for p in 0..op.diag.len() {
            if !op.free[p] {
                continue;
            }
            let mut d = op.diag[p];
            if p % nx > 0 && op.free[p - 1] {
                d -= op.east[p - 1] * op.east[p - 1] / pivots[p - 1];
            }
            if p >= nx && op.free[p - nx] {
                d -= op.north[p - nx] * op.north[p - nx] / pivots[p - nx];
            }
            pivots[p] = d;
        }
        Self { pivots }
    }

    fn apply(&self, op: &Operator, r: &[f64], z: &mut [f64]) {
        let nx = op.nx;
        let n = r.len();
        for p in 0..n {
            if !op.free[p] {
                z[p] = 0.0;
                continue;
            }
            let mut acc = r[p];
            if p % nx > 0 && op.free[p - 1] {
                acc += op.east[p - 1] * z[p - 1];
            }
            if p >= nx && op.free[p - nx] {
                acc += op.north[p - nx] * z[p - nx];
            }
            z[p] = acc / self.pivots[p];
        }
        for p in (0..n).rev() {
            if !op.free[p] {
                continue;
            }
            let mut acc = 0.0;
            if p % nx + 1 < nx && op.free[p + 1] {
                acc += op.east[p] * z[p + 1];
            }
            if p + nx < n && op.free[p + nx] {
                acc += op.north[p] * z[p + nx];
            }
            z[p] += acc / self.pivots[p];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients; returns `(iterations, relative residual)`.
fn pcg(op: &Operator, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<(usize, f64)> {
    let n = b.len();
    let pre = Preconditioner::new(op);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((0, 0.0));
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for p in 0..n {
        r[p] = b[p] - r[p];
    }
    let mut z = vec![0.0; n];
    pre.apply(op, &r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    for it in 0..opts.max_iterations {
        if rel <= opts.relative_tolerance {
            return Ok((it, rel));
        }
        op.apply(&d, &mut q);
        let alpha = rz / dot(&d, &q);
        for p in 0..n {
            x[p] += alpha * d[p];
            r[p] -= alpha * q[p];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if !rel.is_finite() {
            break;
        }
        pre.apply(op, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in 0..n {
            d[p] = z[p] + beta * d[p];
        }
    }
    if rel <= opts.relative_tolerance {
        return Ok((opts.max_iterations, rel));
    }
    Err(Error::LinearSolveFailed {
        iterations: opts.max_iterations,
        residual: rel,
    })
}

/// Solve the electrostatic problem with the signal conductors at `v_signal`.
pub fn solve(cs: &CrossSection, v_signal: f64) -> Result<FieldSolution> {
    solve_with(cs, v_signal, &SolverOptions::default())
}

pub fn solve_with(cs: &CrossSection, v_signal: f64, opts: &SolverOptions) -> Result<FieldSolution> {
    if !(v_signal.is_finite() && v_signal != 0.0) {
        return Err(Error::domain(format!("excitation voltage must be finite and nonzero, got {v_signal}")));
    }
    if !cs.conductors.iter().any(|c| c.role == ConductorRole::Signal) {
        return Err(Error::domain("cross-section has no signal conductor"));
    }
    let grid = Grid::build(cs);
    let fixed = fixed_nodes_with(cs, &grid, v_signal);
    let op = Operator::assemble(&grid, &fixed);
    let b = op.rhs(&fixed);
    let mut phi: Vec<f64> = vec![0.0; fixed.len()];
    let (iterations, relative_residual) = pcg(&op, &b, &mut phi, opts)?;
    for (p, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            phi[p] = *v;
        }
    }
    let unknowns = op.free.iter().filter(|f| **f).count();
    let e_field = cell_fields(&grid, &phi);
    let energy = energy_integral(&grid, &phi);
    if !(energy > 0.0) {
        return Err(Error::domain("solution stores no energy"));
    }
    let flux = signal_flux(cs, &grid, &phi);
    let samples = boundary_samples(cs, &grid, &e_field);
    Ok(FieldSolution {
        cross_section: cs.clone(),
        grid,
        v_signal,
        potential: phi,
        e_field,
        total_energy: 0.5 * EPSILON_0 * energy,
        signal_charge: EPSILON_0 * flux,
        samples,
        unknowns,
        iterations,
        relative_residual,
    })
}

/// Differences of the four cell corners: `(bottom, top)` along x and `(left, right)` along y.
fn cell_differences(grid: &Grid, phi: &[f64], i: usize, j: usize) -> ([f64; 2], [f64; 2]) {
    let p00 = phi[grid.node(i, j)];
    let p10 = phi[grid.node(i + 1, j)];
    let p01 = phi[grid.node(i, j + 1)];
    let p11 = phi[grid.node(i + 1, j + 1)];
    ([p10 - p00, p11 - p01], [p01 - p00, p11 - p10])
}

fn cell_fields(grid: &Grid, phi: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(grid.cells.len());
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            if let CellKind::Conductor(_) = grid.cell(i as isize, j as isize).unwrap() {
                out.push((0.0, 0.0));
                continue;
            }
            let dx = grid.xs[i + 1] - grid.xs[i];
            let dy = grid.ys[j + 1] - grid.ys[j];
            let (ax, ay) = cell_differences(grid, phi, i, j);
            out.push((-(ax[0] + ax[1]) / (2.0 * dx), -(ay[0] + ay[1]) / (2.0 * dy)));
        }
    }
    out
}

/// `Σ ε_r ∫|∇φ|² dA` with the bilinear interpolant integrated exactly per cell.
fn energy_integral(grid: &Grid, phi: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let Some(eps) = grid.permittivity(i as isize, j as isize) else {
                continue;
            };
            let dx = grid.xs[i + 1] - grid.xs[i];
            let dy = grid.ys[j + 1] - grid.ys[j];
            let (ax, ay) = cell_differences(grid, phi, i, j);
            let q = |d: [f64; 2]| d[0] * d[0] + d[0] * d[1] + d[1] * d[1];
            total += eps * (dy / (3.0 * dx) * q(ax) + dx / (3.0 * dy) * q(ay));
        }
    }
    total
}

/// Outward flux of `ε_r E` through a rectangle of grid lines around the
/// signal conductors, using the bilinear field of the adjacent cells.
fn signal_flux(cs: &CrossSection, grid: &Grid, phi: &[f64]) -> f64 {
    let signal: Vec<&Rect> = cs
        .conductors
        .iter()
        .filter(|c| c.role == ConductorRole::Signal)
        .map(|c| &c.rect)
        .collect();
    let bbox = signal.iter().skip(1).fold(*signal[0], |a, r| {
        Rect::new(a.x0.min(r.x0), a.x1.max(r.x1), a.y0.min(r.y0), a.y1.max(r.y1))
    });
    let d = &cs.domain;
    let mut clearance = cs
        .conductors
        .iter()
        .filter(|c| c.role == ConductorRole::Ground)
        .map(|c| gap_between(&bbox, &c.rect))
        .fold(f64::INFINITY, f64::min);
    for (edge_gap, touches) in [
        (bbox.x0 - d.x0, bbox.x0 <= d.x0),
        (d.x1 - bbox.x1, bbox.x1 >= d.x1),
        (bbox.y0 - d.y0, bbox.y0 <= d.y0),
        (d.y1 - bbox.y1, bbox.y1 >= d.y1),
    ] {
        if !touches {
            clearance = clearance.min(edge_gap);
        }
    }
    let off = 0.5 * clearance;
    let snap = |coords: &[f64], v: f64, limit: f64, touches: bool| {
        if touches {
            exact(coords, limit).unwrap_or_else(|| nearest(coords, limit))
        } else {
            nearest(coords, v)
        }
    };
    let i0 = snap(&grid.xs, bbox.x0 - off, d.x0, bbox.x0 <= d.x0);
    let i1 = snap(&grid.xs, bbox.x1 + off, d.x1, bbox.x1 >= d.x1);
    let j0 = snap(&grid.ys, bbox.y0 - off, d.y0, bbox.y0 <= d.y0);
    let j1 = snap(&grid.ys, bbox.y1 + off, d.y1, bbox.y1 >= d.y1);

    // ∫ ε E_x dy along a cell's vertical extent, and ∫ ε E_y dx along its horizontal extent.
    let flux_x = |i: isize, j: usize| -> Option<f64> {
        let eps = grid.permittivity(i, j as isize)?;
        let i = i as usize;
        let (ax, _) = cell_differences(grid, phi, i, j);
        let dx = grid.xs[i + 1] - grid.xs[i];
        let dy = grid.ys[j + 1] - grid.ys[j];
        Some(-eps * dy * (ax[0] + ax[1]) / (2.0 * dx))
    };
    let flux_y = |i: usize, j: isize| -> Option<f64> {
        let eps = grid.permittivity(i as isize, j)?;
        let j = j as usize;
        let (_, ay) = cell_differences(grid, phi, i, j);
        let dx = grid.xs[i + 1] - grid.xs[i];
        let dy = grid.ys[j + 1] - grid.ys[j];
        Some(-eps * dx * (ay[0] + ay[1]) / (2.0 * dy))
    };
    let average = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.0,
    };
    let insulating = cs.lateral == LateralBoundary::Insulating;
    let mut total = 0.0;
    for (col, sign) in [(i0, -1.0), (i1, 1.0)] {
        let on_wall = col == 0 || col == grid.nx() - 1;
        if on_wall && insulating {
            continue;
        }
        for j in j0..j1 {
            total += sign * average(flux_x(col as isize - 1, j), flux_x(col as isize, j));
        }
    }
    for (row, sign) in [(j0, -1.0), (j1, 1.0)] {
        for i in i0..i1 {
            total += sign * average(flux_y(i, row as isize - 1), flux_y(i, row as isize));
        }
    }
    total
}

fn gap_between(a: &Rect, b: &Rect) -> f64 {
    let dx = (b.x0 - a.x1).max(a.x0 - b.x1).max(0.0);
    let dy = (b.y0 - a.y1).max(a.y0 - b.y1).max(0.0);
    dx.hypot(dy)
}

fn boundary_samples(cs: &CrossSection, grid: &Grid, e: &[(f64, f64)]) -> Vec<BoundarySample> {
    let ncx = grid.nx() - 1;
    let field = |i: isize, j: isize| e[j as usize * ncx + i as usize];
    let mut out = Vec::new();
    let side_of = |j: isize| {
        let yc = 0.5 * (grid.ys[j as usize] + grid.ys[j as usize + 1]);
        if cs.is_substrate(yc) {
            Side::Substrate
        } else {
            Side::Vacuum
        }
    };
    let kind_for = |side: Side| match side {
        Side::Substrate => InterfaceKind::SubstrateMetal,
        Side::Vacuum => InterfaceKind::MetalVacuum,
    };
    for (ci, c) in cs.conductors.iter().enumerate() {
        let r = &c.rect;
        let (Some(ia), Some(ib)) = (exact(&grid.xs, r.x0.max(cs.domain.x0)), exact(&grid.xs, r.x1.min(cs.domain.x1))) else {
            continue;
        };
        let (Some(ja), Some(jb)) = (exact(&grid.ys, r.y0.max(cs.domain.y0)), exact(&grid.ys, r.y1.min(cs.domain.y1))) else {
            continue;
        };
        // Horizontal faces: bottom looks at row ja-1, top at row jb.
        for (row, face_y) in [(ja as isize - 1, grid.ys[ja]), (jb as isize, grid.ys[jb])] {
            for i in ia..ib {
                if grid.permittivity(i as isize, row).is_none() {
                    continue;
                }
                let side = side_of(row);
                let (ex, ey) = field(i as isize, row);
                out.push(BoundarySample {
                    kind: kind_for(side),
                    conductor: ci,
                    x: 0.5 * (grid.xs[i] + grid.xs[i + 1]),
                    y: face_y,
                    length: grid.xs[i + 1] - grid.xs[i],
                    e_parallel: ex,
                    e_perpendicular: ey,
                    side,
                });
            }
        }
        // Vertical faces: left looks at column ia-1, right at column ib.
        for (col, face_x) in [(ia as isize - 1, grid.xs[ia]), (ib as isize, grid.xs[ib])] {
            for j in ja..jb {
                if grid.permittivity(col, j as isize).is_none() {
                    continue;
                }
                let side = side_of(j as isize);
                let (ex, ey) = field(col, j as isize);
                out.push(BoundarySample {
                    kind: kind_for(side),
                    conductor: ci,
                    x: face_x,
                    y: 0.5 * (grid.ys[j] + grid.ys[j + 1]),
                    length: grid.ys[j + 1] - grid.ys[j],
                    e_parallel: ey,
                    e_perpendicular: ex,
                    side,
                });
            }
        }
    }
    // Exposed substrate surface, sampled on the vacuum side.
    if let Some(js) = exact(&grid.ys, cs.substrate_top) {
        if js > 0 && js + 1 < grid.ny() {
            for i in 0..ncx {
                let below = grid.permittivity(i as isize, js as isize - 1);
                let above = grid.permittivity(i as isize, js as isize);
                if below.is_none() || above.is_none() {
                    continue;
                }
                let x = 0.5 * (grid.xs[i] + grid.xs[i + 1]);
                let y = cs.substrate_top;
                let conductor = cs
                    .conductors
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (k, c.rect.distance(x, y)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map_or(0, |(k, _)| k);
                let (ex, ey) = field(i as isize, js as isize);
                out.push(BoundarySample {
                    kind: InterfaceKind::SubstrateVacuum,
                    conductor,
                    x,
                    y,
                    length: grid.xs[i + 1] - grid.xs[i],
                    e_parallel: ex,
                    e_perpendicular: ey,
                    side: Side::Vacuum,
                });
            }
        }
    }
    out
}
