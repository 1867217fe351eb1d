//! Antenna positions, moving regions and placement constraints.
//!
//! Positions are in meters. A 1D region is the segment `[0, extent]` along the
//! array axis (`x`); a 2D region is the square `[0, extent]²` in the array
//! plane. 1D layouts keep `y = 0` for every element.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking bounds and spacing, in meters.
pub const GEOMETRY_TOLERANCE_M: f64 = 1e-12;

/// Iteration cap for the 2D pairwise-repulsion projection.
pub const REPULSION_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    One,
    Two,
}

impl TryFrom<u8> for Dim {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        match value {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            other => Err(format!("dimension must be 1 or 2, got {other}")),
        }
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        match d {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D", u8::from(*self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn on_axis(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingRegion {
    pub dim: Dim,
    pub extent_m: f64,
}

impl MovingRegion {
    pub fn new(dim: Dim, extent_m: f64) -> Result<Self> {
        if !(extent_m > 0.0 && extent_m.is_finite()) {
            return Err(Error::invalid(format!(
                "region extent must be positive and finite, got {extent_m}"
            )));
        }
        Ok(MovingRegion { dim, extent_m })
    }

    pub fn contains(&self, p: &Point) -> bool {
        let inside = |v: f64| v >= -GEOMETRY_TOLERANCE_M && v <= self.extent_m + GEOMETRY_TOLERANCE_M;
        match self.dim {
            Dim::One => inside(p.x) && p.y == 0.0,
            Dim::Two => inside(p.x) && inside(p.y),
        }
    }

    fn clip(&self, p: Point) -> Point {
        let c = |v: f64| v.clamp(0.0, self.extent_m);
        match self.dim {
            Dim::One => Point::on_axis(c(p.x)),
            Dim::Two => Point::new(c(p.x), c(p.y)),
        }
    }
}

/// Cross-linked track structure: every element sits at the intersection of a
/// horizontal track (fixed `y`) and a vertical track (fixed `x`), so an
/// `rows × cols` array is driven by `rows + cols` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClmaCoupling {
    /// `y` coordinates of the horizontal tracks.
    pub row_track_coords: Vec<f64>,
    /// `x` coordinates of the vertical tracks.
    pub col_track_coords: Vec<f64>,
}

impl ClmaCoupling {
    pub fn element_count(&self) -> usize {
        self.row_track_coords.len() * self.col_track_coords.len()
    }

    pub fn track_count(&self) -> usize {
        self.row_track_coords.len() + self.col_track_coords.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementConstraints {
    pub region: MovingRegion,
    pub min_spacing_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<ClmaCoupling>,
}

impl PlacementConstraints {
    pub fn new(region: MovingRegion, min_spacing_m: f64) -> Result<Self> {
        if !(min_spacing_m >= 0.0 && min_spacing_m.is_finite()) {
            return Err(Error::invalid(format!(
                "minimum spacing must be non-negative, got {min_spacing_m}"
            )));
        }
        Ok(PlacementConstraints {
            region,
            min_spacing_m,
            coupling: None,
        })
    }

    pub fn with_coupling(mut self, coupling: ClmaCoupling) -> Result<Self> {
        if self.region.dim != Dim::Two {
            return Err(Error::invalid("cross-linked coupling requires a 2D region"));
        }
        let all = coupling
            .row_track_coords
            .iter()
            .chain(&coupling.col_track_coords);
        for &c in all {
            if !(c >= 0.0 && c <= self.region.extent_m) {
                return Err(Error::invalid(format!(
                    "track coordinate {c} lies outside the region [0, {}]",
                    self.region.extent_m
                )));
            }
        }
        self.coupling = Some(coupling);
        Ok(self)
    }

    /// Longest 1D segment a line of `n` elements can need: `(n - 1) · spacing`.
    pub fn fits_on_line(&self, n: usize) -> bool {
        n.saturating_sub(1) as f64 * self.min_spacing_m <= self.region.extent_m + GEOMETRY_TOLERANCE_M
    }
}

/// Ordered element positions; the antenna position vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    dim: Dim,
    positions: Vec<Point>,
}

impl ArrayLayout {
    pub fn new(dim: Dim, positions: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("a layout needs at least one element"));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite position {p:?}")));
        }
        if dim == Dim::One && positions.iter().any(|p| p.y != 0.0) {
            return Err(Error::invalid("1D layouts must have y = 0 for every element"));
        }
        Ok(ArrayLayout { dim, positions })
    }

    pub fn from_axis(xs: &[f64]) -> Result<Self> {
        Self::new(Dim::One, xs.iter().map(|&x| Point::on_axis(x)).collect())
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Axis coordinates of a 1D layout (the `x` of every element).
    pub fn xs(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.x).collect()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> ArrayLayout {
        let dy = if self.dim == Dim::One { 0.0 } else { dy };
        ArrayLayout {
            dim: self.dim,
            positions: self
                .positions
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }
}

// 1D layouts serialize as a flat list of coordinates, 2D layouts as [x, y] pairs.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PositionsRepr {
    Line(Vec<f64>),
    Plane(Vec<[f64; 2]>),
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    dim: Dim,
    positions_m: PositionsRepr,
}

impl Serialize for ArrayLayout {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let positions_m = match self.dim {
            Dim::One => PositionsRepr::Line(self.xs()),
            Dim::Two => PositionsRepr::Plane(self.positions.iter().map(|p| [p.x, p.y]).collect()),
        };
        LayoutRepr {
            dim: self.dim,
            positions_m,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArrayLayout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = LayoutRepr::deserialize(d)?;
        let positions = match (repr.dim, repr.positions_m) {
            (Dim::One, PositionsRepr::Line(xs)) => xs.into_iter().map(Point::on_axis).collect(),
            (Dim::Two, PositionsRepr::Plane(ps)) => {
                ps.into_iter().map(|[x, y]| Point::new(x, y)).collect()
            }
            (dim, _) => {
                return Err(serde::de::Error::custom(format!(
                    "positions do not match a {dim} layout"
                )))
            }
        };
        ArrayLayout::new(repr.dim, positions).map_err(serde::de::Error::custom)
    }
}

fn check_spacing_arg(spacing_m: f64) -> Result<()> {
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(Error::invalid(format!(
            "spacing must be positive, got {spacing_m}"
        )));
    }
    Ok(())
}

/// Uniform linear array: `origin + m · spacing` for `m = 0..n`.
pub fn make_ula(n: usize, spacing_m: f64, origin_m: f64) -> Result<ArrayLayout> {
    if n == 0 {
        return Err(Error::invalid("a ULA needs at least one element"));
    }
    check_spacing_arg(spacing_m)?;
    ArrayLayout::from_axis(
        &(0..n)
            .map(|m| origin_m + m as f64 * spacing_m)
            .collect::<Vec<_>>(),
    )
}

/// Uniform planar array anchored at the origin, row-major (row index drives `y`).
pub fn make_upa(rows: usize, cols: usize, spacing_m: f64) -> Result<ArrayLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("a UPA needs at least one row and one column"));
    }
    check_spacing_arg(spacing_m)?;
    let positions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Point::new(c as f64 * spacing_m, r as f64 * spacing_m)))
        .collect();
    ArrayLayout::new(Dim::Two, positions)
}

/// Cross product of the track coordinates, row-major: element `r · cols + c`
/// sits at `(col_track_coords[c], row_track_coords[r])`.
pub fn clma_layout(coupling: &ClmaCoupling) -> Result<ArrayLayout> {
    if coupling.row_track_coords.is_empty() || coupling.col_track_coords.is_empty() {
        return Err(Error::invalid("cross-linked layout needs at least one row and one column track"));
    }
    let positions = coupling
        .row_track_coords
        .iter()
        .flat_map(|&y| coupling.col_track_coords.iter().map(move |&x| Point::new(x, y)))
        .collect();
    ArrayLayout::new(Dim::Two, positions)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfRegion { index: usize, position: Point },
    Spacing { first: usize, second: usize, distance_m: f64 },
    /// The layout is not the cross product of a shared set of track coordinates.
    Coupling { index: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_dims(layout: &ArrayLayout, constraints: &PlacementConstraints) -> Result<()> {
    if layout.dim != constraints.region.dim {
        return Err(Error::invalid(format!(
            "layout is {} but the region is {}",
            layout.dim, constraints.region.dim
        )));
    }
    Ok(())
}

pub fn validate_layout(layout: &ArrayLayout, constraints: &PlacementConstraints) -> Result<ValidationReport> {
    check_dims(layout, constraints)?;
    let mut violations = Vec::new();
    let ps = &layout.positions;
    for (index, p) in ps.iter().enumerate() {
        if !constraints.region.contains(p) {
            violations.push(Violation::OutOfRegion { index, position: *p });
        }
    }
    let limit = constraints.min_spacing_m - GEOMETRY_TOLERANCE_M;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            let d = ps[i].distance(&ps[j]);
            if d < limit {
                violations.push(Violation::Spacing {
                    first: i,
                    second: j,
                    distance_m: d,
                });
            }
        }
    }
    if let Some(coupling) = &constraints.coupling {
        violations.extend(coupling_violations(layout, coupling));
    }
    Ok(ValidationReport { violations })
}

fn coupling_violations(layout: &ArrayLayout, coupling: &ClmaCoupling) -> Vec<Violation> {
    let rows = coupling.row_track_coords.len();
    let cols = coupling.col_track_coords.len();
    let ps = &layout.positions;
    if ps.len() != rows * cols {
        return vec![Violation::Coupling { index: ps.len().min(rows * cols) }];
    }
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let same_col = (ps[i].x - ps[c].x).abs() <= GEOMETRY_TOLERANCE_M;
            let same_row = (ps[i].y - ps[r * cols].y).abs() <= GEOMETRY_TOLERANCE_M;
            if !(same_col && same_row) {
                out.push(Violation::Coupling { index: i });
            }
        }
    }
    out
}

/// Moves a layout into the feasible set.
///
/// Feasible layouts are returned unchanged. In 1D the elements are clipped to
/// the segment, then pushed apart by a left-to-right sweep followed by a
/// right-to-left sweep; the relative order of elements is kept. This is a
/// minimal-displacement heuristic, not an exact L2 projection. In 2D violating
/// pairs are pushed apart along the line joining them and re-clipped, for at
/// most [`REPULSION_MAX_ITERATIONS`] rounds. With a cross-linked coupling the
/// row and column tracks are projected as two 1D problems instead.
pub fn project_to_feasible(layout: &ArrayLayout, constraints: &PlacementConstraints) -> Result<ArrayLayout> {
    if validate_layout(layout, constraints)?.is_ok() {
        return Ok(layout.clone());
    }
    let projected = match (&constraints.coupling, layout.dim) {
        (Some(coupling), _) => project_clma(layout, coupling, constraints)?,
        (None, Dim::One) => project_line(layout, constraints)?,
        (None, Dim::Two) => project_plane(layout, constraints)?,
    };
    if !validate_layout(&projected, constraints)?.is_ok() {
        return Err(Error::InfeasibleConstraints(
            "projection did not reach a feasible layout".into(),
        ));
    }
    Ok(projected)
}

/// Clip-sort-sweep projection of 1D coordinates onto `[0, extent]` with a
/// minimum gap, returning coordinates in the caller's order.
pub(crate) fn project_coords(xs: &[f64], extent: f64, spacing: f64) -> Result<Vec<f64>> {
    let n = xs.len();
    if n.saturating_sub(1) as f64 * spacing > extent + GEOMETRY_TOLERANCE_M {
        return Err(Error::InfeasibleConstraints(format!(
            "{n} elements at spacing {spacing} m need {} m but the region is {extent} m",
            (n - 1) as f64 * spacing
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut ys: Vec<f64> = order.iter().map(|&i| xs[i].clamp(0.0, extent)).collect();
    for i in 1..n {
        ys[i] = ys[i].max(ys[i - 1] + spacing);
    }
    if ys[n - 1] > extent {
        ys[n - 1] = extent;
        for i in (0..n - 1).rev() {
            ys[i] = ys[i].min(ys[i + 1] - spacing);
        }
    }
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = ys[rank].max(0.0);
    }
    Ok(out)
}

fn project_line(layout: &ArrayLayout, constraints: &PlacementConstraints) -> Result<ArrayLayout> {
    let xs = project_coords(&layout.xs(), constraints.region.extent_m, constraints.min_spacing_m)?;
    ArrayLayout::from_axis(&xs)
}

fn project_plane(layout: &ArrayLayout, constraints: &PlacementConstraints) -> Result<ArrayLayout> {
    let region = constraints.region;
    let s = constraints.min_spacing_m;
    let n = layout.len();
    // Hexagonal packing bound on the region grown by half a spacing on every side.
    let packing_area = n as f64 * s * s * 3f64.sqrt() / 2.0;
    if packing_area > (region.extent_m + s).powi(2) {
        return Err(Error::InfeasibleConstraints(format!(
            "{n} elements at spacing {s} m cannot fit in a {} m square",
            region.extent_m
        )));
    }
    let mut ps: Vec<Point> = layout.positions.iter().map(|&p| region.clip(p)).collect();
    let limit = s - GEOMETRY_TOLERANCE_M;
    for _ in 0..REPULSION_MAX_ITERATIONS {
        let mut moved = false;
        for i in 0..n {
            for j in i + 1..n {
                let d = ps[i].distance(&ps[j]);
                if d >= limit {
                    continue;
                }
                moved = true;
                let (ux, uy) = if d > 1e-15 {
                    ((ps[j].x - ps[i].x) / d, (ps[j].y - ps[i].y) / d)
                } else {
                    // Coincident points: separate along a direction fixed by the pair index.
                    let angle = (i * n + j) as f64 * 2.399_963_229_728_653;
                    (angle.cos(), angle.sin())
                };
                let push = 0.5 * (s - d) * (1.0 + 1e-9);
                ps[i] = region.clip(Point::new(ps[i].x - push * ux, ps[i].y - push * uy));
                ps[j] = region.clip(Point::new(ps[j].x + push * ux, ps[j].y + push * uy));
            }
        }
        if !moved {
            return ArrayLayout::new(Dim::Two, ps);
        }
    }
    Err(Error::InfeasibleConstraints(format!(
        "pairwise repulsion did not converge within {REPULSION_MAX_ITERATIONS} iterations"
    )))
}

fn project_clma(layout: &ArrayLayout, coupling: &ClmaCoupling, constraints: &PlacementConstraints) -> Result<ArrayLayout> {
    let rows = coupling.row_track_coords.len();
    let cols = coupling.col_track_coords.len();
    if layout.len() != rows * cols {
        return Err(Error::invalid(format!(
            "layout has {} elements but the coupling implies {rows} × {cols}",
            layout.len()
        )));
    }
    let ps = &layout.positions;
    // Each track takes the mean coordinate of the elements it carries.
    let col_x: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| ps[r * cols + c].x).sum::<f64>() / rows as f64)
        .collect();
    let row_y: Vec<f64> = (0..rows)
        .map(|r| (0..cols).map(|c| ps[r * cols + c].y).sum::<f64>() / cols as f64)
        .collect();
    let tracks = project_tracks(
        &ClmaCoupling {
            row_track_coords: row_y,
            col_track_coords: col_x,
        },
        constraints,
    )?;
    clma_layout(&tracks)
}

/// Projects track coordinates so that both track families respect the
/// region and the minimum spacing; the implied cross product is then feasible.
pub fn project_tracks(coupling: &ClmaCoupling, constraints: &PlacementConstraints) -> Result<ClmaCoupling> {
    let extent = constraints.region.extent_m;
    let s = constraints.min_spacing_m;
    Ok(ClmaCoupling {
        row_track_coords: project_coords(&coupling.row_track_coords, extent, s)?,
        col_track_coords: project_coords(&coupling.col_track_coords, extent, s)?,
    })
}

/// Largest pairwise distance between elements.
pub fn aperture(layout: &ArrayLayout) -> f64 {
    let ps = &layout.positions;
    let mut best = 0.0f64;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            best = best.max(ps[i].distance(&ps[j]));
        }
    }
    best
}
