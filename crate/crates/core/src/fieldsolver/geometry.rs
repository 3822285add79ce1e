//! Cross-section descriptions.
//!
//! Every structure is lowered to a [`CrossSection`]: a rectangular domain
//! with a substrate half-space below `y = substrate_top`, vacuum above, and
//! rectangular perfect conductors held at fixed potentials. Thin interface
//! films are never meshed; they are described by [`Layers`] and evaluated
//! from the fields next to each boundary.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum InterfaceKind {
    /// Substrate–metal, under conductors.
    SubstrateMetal,
    /// Substrate–vacuum, exposed substrate surface.
    SubstrateVacuum,
    /// Metal–vacuum, conductor tops and sidewalls.
    MetalVacuum,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 3] = [
        InterfaceKind::SubstrateMetal,
        InterfaceKind::SubstrateVacuum,
        InterfaceKind::MetalVacuum,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            InterfaceKind::SubstrateMetal => "sm",
            InterfaceKind::SubstrateVacuum => "sv",
            InterfaceKind::MetalVacuum => "mv",
        }
    }
}

/// Thin dielectric film: thickness (m) and relative permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceLayer {
    pub thickness: f64,
    pub epsilon: f64,
}

impl InterfaceLayer {
    pub fn new(thickness: f64, epsilon: f64) -> Result<Self> {
        let l = Self { thickness, epsilon };
        l.validate()?;
        Ok(l)
    }

    fn validate(&self) -> Result<()> {
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::domain(format!(
                "layer thickness must be positive, got {}",
                self.thickness
            )));
        }
        if !(self.epsilon >= 1.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!(
                "layer permittivity must be >= 1, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Which interface films to evaluate. `None` means not requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Layers {
    pub sm: Option<InterfaceLayer>,
    pub sv: Option<InterfaceLayer>,
    pub mv: Option<InterfaceLayer>,
}

impl Default for Layers {
    /// 3 nm films: silicon-like SM (11.6), native oxide SV (4.0), aluminum oxide MV (10.0).
    fn default() -> Self {
        Self {
            sm: Some(InterfaceLayer { thickness: 3e-9, epsilon: 11.6 }),
            sv: Some(InterfaceLayer { thickness: 3e-9, epsilon: 4.0 }),
            mv: Some(InterfaceLayer { thickness: 3e-9, epsilon: 10.0 }),
        }
    }
}

impl Layers {
    pub fn none() -> Self {
        Self { sm: None, sv: None, mv: None }
    }

    pub fn get(&self, kind: InterfaceKind) -> Option<InterfaceLayer> {
        match kind {
            InterfaceKind::SubstrateMetal => self.sm,
            InterfaceKind::SubstrateVacuum => self.sv,
            InterfaceKind::MetalVacuum => self.mv,
        }
    }

    pub fn set(&mut self, kind: InterfaceKind, layer: Option<InterfaceLayer>) {
        match kind {
            InterfaceKind::SubstrateMetal => self.sm = layer,
            InterfaceKind::SubstrateVacuum => self.sv = layer,
            InterfaceKind::MetalVacuum => self.mv = layer,
        }
    }

    /// Thinnest requested film.
    pub fn min_thickness(&self) -> Option<f64> {
        InterfaceKind::ALL
            .iter()
            .filter_map(|k| self.get(*k))
            .map(|l| l.thickness)
            .reduce(f64::min)
    }

    fn validate(&self, max_thickness: f64) -> Result<()> {
        for kind in InterfaceKind::ALL {
            if let Some(l) = self.get(kind) {
                l.validate()?;
                if l.thickness > max_thickness {
                    return Err(Error::domain(format!(
                        "{} layer thickness {:.3e} m is not thin compared with the geometry \
                         (limit {max_thickness:.3e} m)",
                        kind.short_name(),
                        l.thickness
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConductorRole {
    /// Driven at the excitation voltage.
    Signal,
    /// Held at 0 V.
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conductor {
    pub label: String,
    pub role: ConductorRole,
    pub rect: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LateralBoundary {
    /// Left and right domain edges held at 0 V.
    Grounded,
    /// Zero normal field on the left and right edges.
    Insulating,
}

/// Spacing controls for the graded tensor-product grid.
///
/// Local spacing at distance `d` from the nearest feature line is
/// `min(far, edge + growth·d)`. Growth and far spacing scale with
/// `reference_length / cells_per_gap`. The edge spacing does too, but never
/// exceeds `edge_floor`: the field next to a conductor edge is resolved down
/// to the film thickness, below which the unmeshed-film picture stops
/// applying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Meshing {
    pub reference_length: f64,
    pub cells_per_gap: usize,
    /// Edge spacing is `reference_length / (cells_per_gap · edge_refinement)`.
    pub edge_refinement: f64,
    /// Dimensionless growth rate at `cells_per_gap = 1`.
    pub growth: f64,
    /// Far-field spacing is `far_factor · reference_length / cells_per_gap`.
    pub far_factor: f64,
    pub edge_floor: Option<f64>,
}

impl Meshing {
    pub fn new(reference_length: f64, cells_per_gap: usize) -> Self {
        Self {
            reference_length,
            cells_per_gap,
            edge_refinement: 16.0,
            growth: 2.0,
            far_factor: 4.0,
            edge_floor: None,
        }
    }

    pub fn with_edge_floor(mut self, floor: Option<f64>) -> Self {
        self.edge_floor = floor;
        self
    }

    pub fn edge_spacing(&self) -> f64 {
        let h = self.reference_length / (self.cells_per_gap as f64 * self.edge_refinement);
        self.edge_floor.map_or(h, |t| h.min(t))
    }

    pub fn growth_rate(&self) -> f64 {
        self.growth / self.cells_per_gap as f64
    }

    pub fn far_spacing(&self) -> f64 {
        self.far_factor * self.reference_length / self.cells_per_gap as f64
    }
}

/// Fully specified electrostatic problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub domain: Rect,
    pub substrate_top: f64,
    pub substrate_epsilon: f64,
    pub conductors: Vec<Conductor>,
    pub lateral: LateralBoundary,
    pub layers: Layers,
    pub meshing: Meshing,
    /// Mirror the grid about this vertical line, when the structure is symmetric.
    pub mirror_x: Option<f64>,
}

impl CrossSection {
    pub fn is_substrate(&self, y: f64) -> bool {
        y < self.substrate_top
    }

    pub fn conductor_at(&self, x: f64, y: f64) -> Option<usize> {
        self.conductors.iter().position(|c| c.rect.contains(x, y))
    }

    /// x coordinates that must be grid lines.
    pub fn features_x(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .conductors
            .iter()
            .flat_map(|c| [c.rect.x0, c.rect.x1])
            .filter(|x| *x > self.domain.x0 && *x < self.domain.x1)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// y coordinates that must be grid lines.
    pub fn features_y(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .conductors
            .iter()
            .flat_map(|c| [c.rect.y0, c.rect.y1])
            .chain(std::iter::once(self.substrate_top))
            .filter(|y| *y > self.domain.y0 && *y < self.domain.y1)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Anything that can be lowered to a [`CrossSection`] at a chosen resolution.
pub trait Geometry {
    fn cells_per_gap(&self) -> usize;
    fn with_cells_per_gap(&self, cells_per_gap: usize) -> Self
    where
        Self: Sized;
    fn cross_section(&self) -> Result<CrossSection>;
}

/// Coplanar waveguide: a center trace of width `w` flanked by gaps `g`
/// and ground planes that run to the lateral domain edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpwGeometry {
    pub center_width: f64,
    pub gap: f64,
    pub metal_thickness: f64,
    pub substrate_epsilon: f64,
    pub layers: Layers,
    /// Distance from the center line to each lateral domain edge.
    pub half_width: f64,
    /// Depth of substrate below, and height of vacuum above, the substrate surface.
    pub height: f64,
    pub cells_per_gap: usize,
}

impl CpwGeometry {
    /// Default films, 100 nm metal on ε = 11.6 with the minimum domain margin.
    pub fn new(center_width: f64, gap: f64) -> Self {
        let margin = Self::required_margin(center_width, gap);
        Self {
            center_width,
            gap,
            metal_thickness: 100e-9,
            substrate_epsilon: 11.6,
            layers: Layers::default(),
            half_width: 0.5 * center_width + gap + margin,
            height: margin,
            cells_per_gap: 8,
        }
    }

    /// `5 (w + 2g)`.
    pub fn required_margin(center_width: f64, gap: f64) -> f64 {
        5.0 * (center_width + 2.0 * gap)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center width", self.center_width),
            ("gap", self.gap),
            ("metal thickness", self.metal_thickness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.substrate_epsilon >= 1.0) {
            return Err(Error::domain(format!(
                "substrate permittivity must be >= 1, got {}",
                self.substrate_epsilon
            )));
        }
        let margin = Self::required_margin(self.center_width, self.gap);
        let outer = 0.5 * self.center_width + self.gap;
        // Small slack so that the default domain, built from the same sum, passes.
        let slack = 1e-12 * margin;
        if self.half_width - outer < margin - slack || self.height < margin - slack {
            return Err(Error::domain(format!(
                "domain must extend at least {margin:.3e} m beyond the conductors"
            )));
        }
        if self.cells_per_gap < 2 {
            return Err(Error::domain("cells_per_gap must be >= 2"));
        }
        self.layers
            .validate(0.01 * self.center_width.min(self.gap).min(10.0 * self.metal_thickness))
    }
}

impl Geometry for CpwGeometry {
    fn cells_per_gap(&self) -> usize {
        self.cells_per_gap
    }

    fn with_cells_per_gap(&self, cells_per_gap: usize) -> Self {
        Self {
            cells_per_gap,
            ..self.clone()
        }
    }

    fn cross_section(&self) -> Result<CrossSection> {
        self.validate()?;
        let hw = 0.5 * self.center_width;
        let t = self.metal_thickness;
        let edge = hw + self.gap;
        let xmax = self.half_width;
        Ok(CrossSection {
            domain: Rect::new(-xmax, xmax, -self.height, self.height),
            substrate_top: 0.0,
            substrate_epsilon: self.substrate_epsilon,
            conductors: vec![
                Conductor {
                    label: "center".into(),
                    role: ConductorRole::Signal,
                    rect: Rect::new(-hw, hw, 0.0, t),
                },
                Conductor {
                    label: "ground_left".into(),
                    role: ConductorRole::Ground,
                    rect: Rect::new(-xmax, -edge, 0.0, t),
                },
                Conductor {
                    label: "ground_right".into(),
                    role: ConductorRole::Ground,
                    rect: Rect::new(edge, xmax, 0.0, t),
                },
            ],
            lateral: LateralBoundary::Grounded,
            layers: self.layers,
            meshing: Meshing::new(self.gap.min(self.center_width), self.cells_per_gap)
                .with_edge_floor(self.layers.min_thickness()),
            mirror_x: Some(0.0),
        })
    }
}

/// Two plates spanning an insulating-walled domain, separated by a
/// substrate slab of thickness `substrate_gap` and a vacuum slab of
/// thickness `vacuum_gap`. The lower plate is grounded and faces the
/// substrate (SM film); the upper plate is driven and faces vacuum (MV
/// film); the slab boundary carries the SV film. Either slab may be
/// absent (zero thickness).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelPlate {
    pub width: f64,
    pub substrate_gap: f64,
    pub vacuum_gap: f64,
    pub substrate_epsilon: f64,
    pub plate_thickness: f64,
    pub layers: Layers,
    pub cells_per_gap: usize,
}

impl ParallelPlate {
    pub fn new(width: f64, substrate_gap: f64, vacuum_gap: f64, substrate_epsilon: f64) -> Self {
        let d = substrate_gap + vacuum_gap;
        Self {
            width,
            substrate_gap,
            vacuum_gap,
            substrate_epsilon,
            plate_thickness: 0.1 * d,
            layers: Layers::none(),
            cells_per_gap: 4,
        }
    }

    pub fn with_layer(mut self, kind: InterfaceKind, layer: InterfaceLayer) -> Self {
        self.layers.set(kind, Some(layer));
        self
    }

    /// Energy in a film relative to the bulk stack, from the series-capacitor
    /// model with a common displacement field: `(t/ε_film) / (d_s/ε_s + d_v)`.
    pub fn series_participation(&self, kind: InterfaceKind) -> Option<f64> {
        let layer = self.layers.get(kind)?;
        let bulk = self.substrate_gap / self.substrate_epsilon + self.vacuum_gap;
        Some(layer.thickness / layer.epsilon / bulk)
    }
}

impl Geometry for ParallelPlate {
    fn cells_per_gap(&self) -> usize {
        self.cells_per_gap
    }

    fn with_cells_per_gap(&self, cells_per_gap: usize) -> Self {
        Self {
            cells_per_gap,
            ..self.clone()
        }
    }

    fn cross_section(&self) -> Result<CrossSection> {
        let d = self.substrate_gap + self.vacuum_gap;
        if !(self.width > 0.0 && d > 0.0 && self.plate_thickness > 0.0)
            || self.substrate_gap < 0.0
            || self.vacuum_gap < 0.0
        {
            return Err(Error::domain("parallel plate dimensions must be positive"));
        }
        if !(self.substrate_epsilon >= 1.0) {
            return Err(Error::domain("substrate permittivity must be >= 1"));
        }
        if self.cells_per_gap < 2 {
            return Err(Error::domain("cells_per_gap must be >= 2"));
        }
        self.layers.validate(0.01 * d)?;
        let t = self.plate_thickness;
        let bottom = -self.substrate_gap;
        let top = self.vacuum_gap;
        Ok(CrossSection {
            domain: Rect::new(0.0, self.width, bottom - t, top + t),
            substrate_top: 0.0,
            substrate_epsilon: self.substrate_epsilon,
            conductors: vec![
                Conductor {
                    label: "top_plate".into(),
                    role: ConductorRole::Signal,
                    rect: Rect::new(0.0, self.width, top, top + t),
                },
                Conductor {
                    label: "bottom_plate".into(),
                    role: ConductorRole::Ground,
                    rect: Rect::new(0.0, self.width, bottom - t, bottom),
                },
            ],
            lateral: LateralBoundary::Insulating,
            layers: self.layers,
            meshing: Meshing::new(d, self.cells_per_gap).with_edge_floor(self.layers.min_thickness()),
            mirror_x: None,
        })
    }
}

/// Two finite plates of width `plate_width` and separation `separation`
/// in vacuum, inside a grounded box. Used to check field uniformity away
/// from the plate edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitePlates {
    pub plate_width: f64,
    pub separation: f64,
    pub plate_thickness: f64,
    pub margin: f64,
    pub cells_per_gap: usize,
}

impl FinitePlates {
    pub fn new(plate_width: f64, separation: f64) -> Self {
        Self {
            plate_width,
            separation,
            plate_thickness: 0.1 * separation,
            margin: plate_width,
            cells_per_gap: 8,
        }
    }
}

impl Geometry for FinitePlates {
    fn cells_per_gap(&self) -> usize {
        self.cells_per_gap
    }

    fn with_cells_per_gap(&self, cells_per_gap: usize) -> Self {
        Self {
            cells_per_gap,
            ..self.clone()
        }
    }

    fn cross_section(&self) -> Result<CrossSection> {
        if !(self.plate_width > 0.0 && self.separation > 0.0 && self.margin > 0.0) {
            return Err(Error::domain("plate dimensions must be positive"));
        }
        let hw = 0.5 * self.plate_width;
        let hs = 0.5 * self.separation;
        let t = self.plate_thickness;
        let ext = hw + self.margin;
        let yext = hs + t + self.margin;
        Ok(CrossSection {
            domain: Rect::new(-ext, ext, -yext, yext),
            // Entire domain is vacuum.
            substrate_top: -yext,
            substrate_epsilon: 1.0,
            conductors: vec![
                Conductor {
                    label: "top_plate".into(),
                    role: ConductorRole::Signal,
                    rect: Rect::new(-hw, hw, hs, hs + t),
                },
                Conductor {
                    label: "bottom_plate".into(),
                    role: ConductorRole::Ground,
                    rect: Rect::new(-hw, hw, -hs - t, -hs),
                },
            ],
            lateral: LateralBoundary::Grounded,
            layers: Layers::none(),
            meshing: Meshing::new(self.separation, self.cells_per_gap),
            mirror_x: Some(0.0),
        })
    }
}
