//! Stochastic two-phase flow-pattern phantoms: ring, annular, stratified,
//! and 1-3 circular or square bars.
//!
//! All shape parameters are stored as fractions of the bore radius so a
//! sampled spec rasterizes onto any grid size. The low phase is air (eps 1),
//! the high phase plastic (eps 4); pixels outside the bore stay at the base
//! permittivity.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensor::GridMap;

pub const EPS_AIR: f64 = 1.0;
pub const EPS_PLASTIC: f64 = 4.0;

/// Sampling ranges. Annular width and stratified height follow the reported
/// pattern families; ring and bar ranges are artifact defaults.
pub const ANNULAR_WIDTH_RANGE: (f64, f64) = (0.10, 0.95);
pub const STRATIFIED_HEIGHT_RANGE: (f64, f64) = (0.05, 0.95);
pub const RING_MID_RANGE: (f64, f64) = (0.30, 0.80);
pub const RING_THICKNESS_RANGE: (f64, f64) = (0.05, 0.20);
pub const BAR_SIZE_RANGE: (f64, f64) = (0.08, 0.30);
/// Clearance kept between bars and between any bar and the wall, as a
/// fraction of the bore radius.
pub const BAR_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("could not place {bars} non-overlapping bars after {attempts} attempts")]
    PlacementFailure { bars: usize, attempts: usize },
    #[error("pattern spec violates invariants: {0}")]
    InvalidSpec(String),
}

/// The five generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    Ring,
    Annular,
    Stratified,
    CircularBars,
    SquareBars,
}

impl PatternKind {
    pub const ALL: [PatternKind; 5] = [
        PatternKind::Ring,
        PatternKind::Annular,
        PatternKind::Stratified,
        PatternKind::CircularBars,
        PatternKind::SquareBars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Ring => "ring",
            PatternKind::Annular => "annular",
            PatternKind::Stratified => "stratified",
            PatternKind::CircularBars => "circular_bars",
            PatternKind::SquareBars => "square_bars",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleBar {
    /// Bar center, fractions of the bore radius.
    pub cx: f64,
    pub cy: f64,
    /// Bar radius, fraction of the bore radius.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareBar {
    pub cx: f64,
    pub cy: f64,
    /// Side length, fraction of the bore radius.
    pub side: f64,
    /// Rotation in degrees, uniform in [0, 90).
    pub angle_deg: f64,
}

impl SquareBar {
    fn circumradius(&self) -> f64 {
        self.side * std::f64::consts::FRAC_1_SQRT_2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternParams {
    /// Thin plastic annulus, air both inside and outside.
    Ring { mid: f64, thickness: f64 },
    /// Plastic annulus attached to the wall, air core; `width` is the
    /// fraction of the bore radius it covers from the wall inward.
    Annular { width: f64 },
    /// Plastic filling the bore from the bottom up to `height` fraction of
    /// the bore diameter.
    Stratified { height: f64 },
    CircularBars { bars: Vec<CircleBar> },
    SquareBars { bars: Vec<SquareBar> },
}

/// One sampled flow pattern: kind-specific parameters plus the RNG seed that
/// produced them (0 for hand-built specs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub params: PatternParams,
    pub seed: u64,
}

impl PatternSpec {
    pub fn kind(&self) -> PatternKind {
        match self.params {
            PatternParams::Ring { .. } => PatternKind::Ring,
            PatternParams::Annular { .. } => PatternKind::Annular,
            PatternParams::Stratified { .. } => PatternKind::Stratified,
            PatternParams::CircularBars { .. } => PatternKind::CircularBars,
            PatternParams::SquareBars { .. } => PatternKind::SquareBars,
        }
    }

    /// Bar count for bar patterns, 0 otherwise.
    pub fn bar_count(&self) -> usize {
        match &self.params {
            PatternParams::CircularBars { bars } => bars.len(),
            PatternParams::SquareBars { bars } => bars.len(),
            _ => 0,
        }
    }

    /// JSON echo used for sidecar files and dataset records; round-trips
    /// float bit patterns.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pattern spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |msg: String| Err(PhantomError::InvalidSpec(msg));
        match &self.params {
            PatternParams::Ring { mid, thickness } => {
                if !(*thickness > 0.0 && mid - thickness / 2.0 >= 0.0 && mid + thickness / 2.0 <= 1.0)
                {
                    return bad(format!("ring mid {mid} thickness {thickness} leaves the bore"));
                }
            }
            PatternParams::Annular { width } => {
                if !(ANNULAR_WIDTH_RANGE.0..=ANNULAR_WIDTH_RANGE.1).contains(width) {
                    return bad(format!("annular width {width} outside [0.10, 0.95]"));
                }
            }
            PatternParams::Stratified { height } => {
                if !(STRATIFIED_HEIGHT_RANGE.0..=STRATIFIED_HEIGHT_RANGE.1).contains(height) {
                    return bad(format!("stratified height {height} outside [0.05, 0.95]"));
                }
            }
            PatternParams::CircularBars { bars } => {
                validate_bar_layout(
                    bars.len(),
                    &bars.iter().map(|b| (b.cx, b.cy, b.radius)).collect::<Vec<_>>(),
                )?
            }
            PatternParams::SquareBars { bars } => validate_bar_layout(
                bars.len(),
                &bars.iter().map(|b| (b.cx, b.cy, b.circumradius())).collect::<Vec<_>>(),
            )?,
        }
        Ok(())
    }
}

fn validate_bar_layout(count: usize, discs: &[(f64, f64, f64)]) -> Result<(), PhantomError> {
    if !(1..=3).contains(&count) {
        return Err(PhantomError::InvalidSpec(format!("bar count {count} outside 1..=3")));
    }
    for (i, &(x, y, r)) in discs.iter().enumerate() {
        if x.hypot(y) + r > 1.0 {
            return Err(PhantomError::InvalidSpec(format!("bar {i} leaves the bore")));
        }
        for &(x2, y2, r2) in &discs[i + 1..] {
            if (x - x2).hypot(y - y2) < r + r2 {
                return Err(PhantomError::InvalidSpec(format!("bar {i} overlaps a later bar")));
            }
        }
    }
    Ok(())
}

/// Ground-truth permittivity image over the full square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    grid_size: usize,
    eps: Vec<f64>,
    spec: Option<PatternSpec>,
}

impl Phantom {
    /// Phantom with the whole bore at `bore_eps` (calibration distributions).
    pub fn uniform(grid: &GridMap, bore_eps: f64, base_eps: f64) -> Self {
        let mut eps = vec![base_eps; grid.n_pixels()];
        for &p in grid.bore_pixels() {
            eps[p as usize] = bore_eps;
        }
        Self { grid_size: grid.grid_size(), eps, spec: None }
    }

    /// Wraps an arbitrary permittivity image (testing and calibration).
    pub fn from_eps(grid_size: usize, eps: Vec<f64>) -> Self {
        assert_eq!(eps.len(), grid_size * grid_size);
        Self { grid_size, eps, spec: None }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn eps_mut(&mut self) -> &mut [f64] {
        &mut self.eps
    }

    pub fn into_eps(self) -> Vec<f64> {
        self.eps
    }

    pub fn spec(&self) -> Option<&PatternSpec> {
        self.spec.as_ref()
    }

    /// Image on the normalized scale used by reconstructions and metrics:
    /// air -> 0, plastic -> 1.
    pub fn normalized(&self) -> Vec<f64> {
        self.eps.iter().map(|&e| (e - EPS_AIR) / (EPS_PLASTIC - EPS_AIR)).collect()
    }
}

#[inline]
fn inside(params: &PatternParams, fx: f64, fy: f64) -> bool {
    match params {
        PatternParams::Ring { mid, thickness } => {
            let r = fx.hypot(fy);
            (r - mid).abs() <= thickness / 2.0
        }
        PatternParams::Annular { width } => fx.hypot(fy) >= 1.0 - width,
        PatternParams::Stratified { height } => fy <= -1.0 + 2.0 * height,
        PatternParams::CircularBars { bars } => {
            bars.iter().any(|b| (fx - b.cx).hypot(fy - b.cy) <= b.radius)
        }
        PatternParams::SquareBars { bars } => bars.iter().any(|b| {
            let (dx, dy) = (fx - b.cx, fy - b.cy);
            let t = -b.angle_deg.to_radians();
            let (s, c) = t.sin_cos();
            let u = dx * c - dy * s;
            let v = dx * s + dy * c;
            u.abs() <= b.side / 2.0 && v.abs() <= b.side / 2.0
        }),
    }
}

/// Rasterizes a pattern spec onto the grid: bore cells whose centers fall
/// inside a shape get the plastic permittivity, remaining bore cells air,
/// everything else the base permittivity. Pure function of (spec, grid).
pub fn generate_phantom(spec: &PatternSpec, grid: &GridMap) -> Result<Phantom, PhantomError> {
    spec.validate()?;
    let gs = grid.grid_size();
    let r_bore = grid.bore_radius_mm();
    let mut eps = vec![EPS_AIR; grid.n_pixels()];
    for &p in grid.bore_pixels() {
        let idx = p as usize;
        let (x, y) = grid.center_mm(idx / gs, idx % gs);
        if inside(&spec.params, x / r_bore, y / r_bore) {
            eps[idx] = EPS_PLASTIC;
        }
    }
    Ok(Phantom { grid_size: gs, eps, spec: Some(spec.clone()) })
}

fn uniform_in(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

/// Uniform point on the disc of radius `r` centered at the origin.
fn uniform_disc(rng: &mut impl Rng, r: f64) -> (f64, f64) {
    let radius = r * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    (radius * theta.cos(), radius * theta.sin())
}

const BAR_TRIES_PER_BAR: usize = 200;
const BAR_RESTARTS: usize = 50;

fn sample_bar_discs(
    rng: &mut impl Rng,
    outer_radii: &[f64],
) -> Result<Vec<(f64, f64)>, PhantomError> {
    for _ in 0..BAR_RESTARTS {
        let mut centers: Vec<(f64, f64)> = Vec::with_capacity(outer_radii.len());
        let mut ok = true;
        'bars: for (i, &r_out) in outer_radii.iter().enumerate() {
            let reach = 1.0 - r_out - BAR_MARGIN;
            for _ in 0..BAR_TRIES_PER_BAR {
                let (cx, cy) = uniform_disc(rng, reach);
                let clear = centers.iter().zip(outer_radii).all(|(&(x, y), &r2)| {
                    (cx - x).hypot(cy - y) >= r_out + r2 + BAR_MARGIN
                });
                if clear {
                    centers.push((cx, cy));
                    continue 'bars;
                }
            }
            ok = false;
            break;
        }
        if ok {
            return Ok(centers);
        }
    }
    Err(PhantomError::PlacementFailure {
        bars: outer_radii.len(),
        attempts: BAR_RESTARTS * BAR_TRIES_PER_BAR,
    })
}

/// Draws pattern parameters uniformly from the configured ranges.
///
/// Bar counts are uniform over {1, 2, 3}; bar centers are uniform over the
/// placements that keep the bar inside the bore with the standard margin.
pub fn sample_spec(
    kind: PatternKind,
    rng: &mut impl Rng,
    seed: u64,
) -> Result<PatternSpec, PhantomError> {
    let params = match kind {
        PatternKind::Ring => {
            let mid = uniform_in(rng, RING_MID_RANGE);
            let thickness = uniform_in(rng, RING_THICKNESS_RANGE);
            PatternParams::Ring { mid, thickness }
        }
        PatternKind::Annular => PatternParams::Annular { width: uniform_in(rng, ANNULAR_WIDTH_RANGE) },
        PatternKind::Stratified => {
            PatternParams::Stratified { height: uniform_in(rng, STRATIFIED_HEIGHT_RANGE) }
        }
        PatternKind::CircularBars => {
            let count = rng.random_range(1..=3usize);
            let radii: Vec<f64> = (0..count).map(|_| uniform_in(rng, BAR_SIZE_RANGE)).collect();
            let centers = sample_bar_discs(rng, &radii)?;
            let bars = centers
                .into_iter()
                .zip(radii)
                .map(|((cx, cy), radius)| CircleBar { cx, cy, radius })
                .collect();
            PatternParams::CircularBars { bars }
        }
        PatternKind::SquareBars => {
            let count = rng.random_range(1..=3usize);
            let sides: Vec<f64> = (0..count).map(|_| uniform_in(rng, BAR_SIZE_RANGE)).collect();
            let outer: Vec<f64> =
                sides.iter().map(|s| s * std::f64::consts::FRAC_1_SQRT_2).collect();
            let centers = sample_bar_discs(rng, &outer)?;
            let bars = centers
                .into_iter()
                .zip(sides)
                .map(|((cx, cy), side)| SquareBar {
                    cx,
                    cy,
                    side,
                    angle_deg: rng.random_range(0.0..90.0),
                })
                .collect();
            PatternParams::SquareBars { bars }
        }
    };
    Ok(PatternSpec { params, seed })
}

/// Proportions of the five families in the reference dataset mix
/// (ring : annular : stratified : circular bars : square bars).
pub const MIX_WEIGHTS: [usize; 5] = [10, 20, 10, 140, 140];

/// Splits `total` into per-family counts at the reference proportions using
/// largest-remainder rounding. Order follows [`PatternKind::ALL`].
pub fn dataset_mix(total: usize) -> [usize; 5] {
    let weight_sum: usize = MIX_WEIGHTS.iter().sum();
    let mut counts = [0usize; 5];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut assigned = 0usize;
    for (i, &w) in MIX_WEIGHTS.iter().enumerate() {
        let quota = total as f64 * w as f64 / weight_sum as f64;
        counts[i] = quota.floor() as usize;
        assigned += counts[i];
        remainders.push((i, quota - quota.floor()));
    }
    // Ties break toward the earlier family for determinism.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}
