use crate::{Error, Result};

use super::UNIT;

const GEOM_TOL: f64 = 1e-12;

/// Axis-aligned polygonal domains built from square quadtree roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `[0, 1]²`
    UnitSquare,
    /// `[0, 1] × [0, 0.5]`
    Rectangle,
    /// `[0, 1]² ∖ [0.5, 1]²`
    LShape,
}

impl Domain {
    pub fn root_level(self) -> u32 {
        match self {
            Domain::UnitSquare => 0,
            Domain::Rectangle | Domain::LShape => 1,
        }
    }

    pub(crate) fn root_corners(self) -> Vec<(i64, i64)> {
        let h = UNIT / 2;
        match self {
            Domain::UnitSquare => vec![(0, 0)],
            Domain::Rectangle => vec![(0, 0), (h, 0)],
            Domain::LShape => vec![(0, 0), (h, 0), (0, h)],
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::Rectangle => 0.5,
            Domain::LShape => 0.75,
        }
    }

    pub fn width(self) -> f64 {
        1.0
    }

    pub fn height(self) -> f64 {
        match self {
            Domain::Rectangle => 0.5,
            _ => 1.0,
        }
    }
}

/// Axis-aligned boundary segment from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl BoundarySegment {
    pub fn horizontal(y: f64, x0: f64, x1: f64) -> Self {
        Self {
            start: [x0.min(x1), y],
            end: [x0.max(x1), y],
        }
    }

    pub fn vertical(x: f64, y0: f64, y1: f64) -> Self {
        Self {
            start: [x, y0.min(y1)],
            end: [x, y0.max(y1)],
        }
    }

    fn is_horizontal(&self) -> bool {
        (self.start[1] - self.end[1]).abs() < GEOM_TOL
    }

    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        if self.is_horizontal() {
            (p[1] - self.start[1]).abs() < GEOM_TOL
                && p[0] >= self.start[0] - GEOM_TOL
                && p[0] <= self.end[0] + GEOM_TOL
        } else {
            (p[0] - self.start[0]).abs() < GEOM_TOL
                && p[1] >= self.start[1] - GEOM_TOL
                && p[1] <= self.end[1] + GEOM_TOL
        }
    }

    /// Parameter interval `[t0, t1] ⊂ [0, 1]` of the edge `a → b` covered by this
    /// segment, if the overlap has positive length.
    pub fn overlap(&self, a: [f64; 2], b: [f64; 2]) -> Option<(f64, f64)> {
        let edge_horizontal = (a[1] - b[1]).abs() < GEOM_TOL;
        if edge_horizontal != self.is_horizontal() {
            return None;
        }
        let (axis, fixed) = if edge_horizontal { (0, 1) } else { (1, 0) };
        if (a[fixed] - self.start[fixed]).abs() > GEOM_TOL {
            return None;
        }
        let (ea, eb) = (a[axis], b[axis]);
        let len = eb - ea;
        let t = |v: f64| ((v - ea) / len).clamp(0.0, 1.0);
        let (t0, t1) = {
            let (u, v) = (t(self.start[axis]), t(self.end[axis]));
            (u.min(v), u.max(v))
        };
        if (t1 - t0) * len.abs() > GEOM_TOL {
            Some((t0, t1))
        } else {
            None
        }
    }

    fn overlap_length(&self, other: &BoundarySegment) -> f64 {
        match self.overlap(other.start, other.end) {
            Some((t0, t1)) => (t1 - t0) * other.length(),
            None => 0.0,
        }
    }
}

/// Homogeneous Dirichlet condition on the components flagged in `fix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub segment: BoundarySegment,
    pub fix: [bool; 2],
}

/// Homogeneous Dirichlet condition at a single boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPin {
    pub point: [f64; 2],
    pub fix: [bool; 2],
}

/// Constant traction (force per length) on a boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load {
    pub segment: BoundarySegment,
    pub traction: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Carrier,
    Cantilever,
    Bridge,
    LShape,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Carrier => "carrier",
            ScenarioKind::Cantilever => "cantilever",
            ScenarioKind::Bridge => "bridge",
            ScenarioKind::LShape => "lshape",
            ScenarioKind::Custom => "custom",
        }
    }
}

/// Domain, boundary conditions, loads and volume budget of a design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub domain: Domain,
    pub dirichlet: Vec<Dirichlet>,
    pub pins: Vec<PointPin>,
    pub loads: Vec<Load>,
    /// Fraction Θ of the domain area filled with hard material.
    pub volume_fraction: f64,
    pub initial_level: u32,
}

/// Default width of localized loads and supports relative to the domain extent.
pub const DEFAULT_SEGMENT_WIDTH: f64 = 0.05;

impl Scenario {
    /// Unit square clamped at the bottom with a uniform tangential load `(1, 0)` on top.
    pub fn carrier() -> Self {
        Self {
            kind: ScenarioKind::Carrier,
            domain: Domain::UnitSquare,
            dirichlet: vec![Dirichlet {
                segment: BoundarySegment::horizontal(0.0, 0.0, 1.0),
                fix: [true, true],
            }],
            pins: vec![],
            loads: vec![Load {
                segment: BoundarySegment::horizontal(1.0, 0.0, 1.0),
                traction: [1.0, 0.0],
            }],
            volume_fraction: 0.67,
            initial_level: 3,
        }
    }

    /// `[0,1]×[0,0.5]` clamped on the left, downward load centered on the right side.
    pub fn cantilever(width_fraction: f64) -> Self {
        let d = Domain::Rectangle;
        let w = width_fraction * d.height();
        let yc = 0.5 * d.height();
        Self {
            kind: ScenarioKind::Cantilever,
            domain: d,
            dirichlet: vec![Dirichlet {
                segment: BoundarySegment::vertical(0.0, 0.0, d.height()),
                fix: [true, true],
            }],
            pins: vec![],
            loads: vec![Load {
                segment: BoundarySegment::vertical(1.0, yc - 0.5 * w, yc + 0.5 * w),
                traction: [0.0, -1.0],
            }],
            volume_fraction: 0.5,
            initial_level: 3,
        }
    }

    /// `[0,1]×[0,0.5]` on vertical rollers at both lower corners with a uniform
    /// downward load on the bottom edge between them. The horizontal rigid
    /// translation is removed by pinning the x-component at the origin.
    pub fn bridge(width_fraction: f64) -> Self {
        let d = Domain::Rectangle;
        let w = width_fraction * d.width();
        Self {
            kind: ScenarioKind::Bridge,
            domain: d,
            dirichlet: vec![
                Dirichlet {
                    segment: BoundarySegment::horizontal(0.0, 0.0, w),
                    fix: [false, true],
                },
                Dirichlet {
                    segment: BoundarySegment::horizontal(0.0, 1.0 - w, 1.0),
                    fix: [false, true],
                },
            ],
            pins: vec![PointPin {
                point: [0.0, 0.0],
                fix: [true, false],
            }],
            loads: vec![Load {
                segment: BoundarySegment::horizontal(0.0, w, 1.0 - w),
                traction: [0.0, -1.0],
            }],
            volume_fraction: 0.67,
            initial_level: 3,
        }
    }

    /// L-shaped domain clamped on top, downward load centered on the lower right side.
    pub fn lshape(width_fraction: f64) -> Self {
        let d = Domain::LShape;
        let w = width_fraction * d.height();
        Self {
            kind: ScenarioKind::LShape,
            domain: d,
            dirichlet: vec![Dirichlet {
                segment: BoundarySegment::horizontal(1.0, 0.0, 0.5),
                fix: [true, true],
            }],
            pins: vec![],
            loads: vec![Load {
                segment: BoundarySegment::vertical(1.0, 0.25 - 0.5 * w, 0.25 + 0.5 * w),
                traction: [0.0, -1.0],
            }],
            volume_fraction: 0.67,
            initial_level: 3,
        }
    }

    pub fn by_name(name: &str, width_fraction: f64) -> Result<Self> {
        match name {
            "carrier" => Ok(Self::carrier()),
            "cantilever" => Ok(Self::cantilever(width_fraction)),
            "bridge" => Ok(Self::bridge(width_fraction)),
            "lshape" => Ok(Self::lshape(width_fraction)),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dirichlet.is_empty() && self.pins.is_empty() {
            return Err(Error::InvalidInput("Dirichlet boundary is empty".into()));
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "volume fraction {} outside (0, 1)",
                self.volume_fraction
            )));
        }
        for d in &self.dirichlet {
            for l in &self.loads {
                if d.segment.overlap_length(&l.segment) > GEOM_TOL {
                    return Err(Error::InvalidInput(
                        "Dirichlet and Neumann load segments overlap".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Components with a homogeneous Dirichlet condition at `p`.
    pub fn fixed_components(&self, p: [f64; 2]) -> [bool; 2] {
        let mut fix = [false; 2];
        for d in &self.dirichlet {
            if d.segment.contains(p) {
                fix[0] |= d.fix[0];
                fix[1] |= d.fix[1];
            }
        }
        for pin in &self.pins {
            if (pin.point[0] - p[0]).abs() < GEOM_TOL && (pin.point[1] - p[1]).abs() < GEOM_TOL {
                fix[0] |= pin.fix[0];
                fix[1] |= pin.fix[1];
            }
        }
        fix
    }

    /// Loaded sub-intervals `(t0, t1, g)` of the boundary edge `a → b`.
    pub fn load_pieces(&self, a: [f64; 2], b: [f64; 2]) -> Vec<(f64, f64, [f64; 2])> {
        self.loads
            .iter()
            .filter_map(|l| l.segment.overlap(a, b).map(|(t0, t1)| (t0, t1, l.traction)))
            .collect()
    }

    /// Traction prescribed at a boundary point (zero off the load segments).
    pub fn traction_at(&self, p: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for l in &self.loads {
            if l.segment.contains(p) {
                g[0] += l.traction[0];
                g[1] += l.traction[1];
            }
        }
        g
    }

    /// Edge parameters in `(0, 1)` where a boundary condition changes along `a → b`.
    pub fn breakpoints(&self, a: [f64; 2], b: [f64; 2]) -> Vec<f64> {
        let mut out = Vec::new();
        let segs = self
            .dirichlet
            .iter()
            .map(|d| d.segment)
            .chain(self.loads.iter().map(|l| l.segment));
        for s in segs {
            if let Some((t0, t1)) = s.overlap(a, b) {
                for t in [t0, t1] {
                    if t > 1e-12 && t < 1.0 - 1e-12 {
                        out.push(t);
                    }
                }
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        out
    }

    /// Total prescribed load `∫ g`.
    pub fn total_force(&self) -> [f64; 2] {
        self.loads.iter().fold([0.0; 2], |acc, l| {
            let len = l.segment.length();
            [acc[0] + len * l.traction[0], acc[1] + len * l.traction[1]]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        for s in [
            Scenario::carrier(),
            Scenario::cantilever(0.05),
            Scenario::bridge(0.05),
            Scenario::lshape(0.05),
        ] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn bridge_is_on_rollers() {
        let s = Scenario::bridge(0.05);
        assert_eq!(s.volume_fraction, 0.67);
        assert_eq!(s.domain, Domain::Rectangle);
        assert_eq!(s.fixed_components([0.02, 0.0]), [false, true]);
        assert_eq!(s.fixed_components([0.99, 0.0]), [false, true]);
        assert_eq!(s.fixed_components([0.0, 0.0]), [true, true]);
        assert_eq!(s.fixed_components([0.5, 0.0]), [false, false]);
    }

    #[test]
    fn load_magnitudes_are_one() {
        for s in [Scenario::carrier(), Scenario::cantilever(0.05), Scenario::lshape(0.05)] {
            for l in &s.loads {
                assert_eq!(l.traction[0].hypot(l.traction[1]), 1.0);
            }
        }
        let f = Scenario::cantilever(0.05).total_force();
        assert!((f[1] + 0.025).abs() < 1e-15);
    }

    #[test]
    fn overlapping_conditions_rejected() {
        let mut s = Scenario::carrier();
        s.loads.push(Load {
            segment: BoundarySegment::horizontal(0.0, 0.2, 0.4),
            traction: [0.0, 1.0],
        });
        assert!(s.validate().is_err());
        let mut s = Scenario::carrier();
        s.dirichlet.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn load_pieces_clip_to_edge() {
        let s = Scenario::cantilever(0.05);
        let p = s.load_pieces([1.0, 0.0], [1.0, 0.25]);
        assert_eq!(p.len(), 1);
        assert!((p[0].0 - 0.95).abs() < 1e-12 && (p[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(s.breakpoints([1.0, 0.0], [1.0, 0.25]), vec![p[0].0]);
    }
}
