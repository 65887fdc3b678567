use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::budget::LinkBudget;
use super::geometry::{angle_between, offset_direction, tangent_basis, LatLon, Satellite};
use super::pattern::{FeedPattern, DEFAULT_APERTURE_EFFICIENCY};
use crate::error::{Error, Result};

/// Beam centres, feed boresights and the reuse-4 colouring of a coverage.
///
/// Feeds are stored in `K` contiguous groups of `feeds_per_beam`; feed `n`
/// belongs to beam `n / feeds_per_beam`.
#[derive(Debug, Clone)]
pub struct BeamLayout {
    pub beam_centers: Vec<LatLon>,
    pub feeds_per_beam: usize,
    pub feed_boresights: Vec<LatLon>,
    pub beam_radius_3db_deg: f64,
    pub color_of_beam: Vec<u8>,
    satellite: Satellite,
    pattern: FeedPattern,
}

impl BeamLayout {
    pub fn new(
        beam_centers: Vec<LatLon>,
        feeds_per_beam: usize,
        feed_boresights: Vec<LatLon>,
        beam_radius_3db_deg: f64,
        color_of_beam: Vec<u8>,
        budget: &LinkBudget,
    ) -> Result<Self> {
        let k = beam_centers.len();
        if k == 0 {
            return Err(Error::Config("layout needs at least one beam".into()));
        }
        if feeds_per_beam == 0 {
            return Err(Error::Config("feeds_per_beam must be at least 1".into()));
        }
        if feed_boresights.len() != k * feeds_per_beam {
            return Err(Error::Config(format!(
                "{} feed boresights for {k} beams x {feeds_per_beam} feeds",
                feed_boresights.len()
            )));
        }
        if !(beam_radius_3db_deg > 0.0) || !beam_radius_3db_deg.is_finite() {
            return Err(Error::Config(format!(
                "degenerate beam contour: radius {beam_radius_3db_deg} deg"
            )));
        }
        if color_of_beam.len() != k {
            return Err(Error::Config(format!(
                "{} colours for {k} beams",
                color_of_beam.len()
            )));
        }
        let layout = Self {
            beam_centers,
            feeds_per_beam,
            feed_boresights,
            beam_radius_3db_deg,
            color_of_beam,
            satellite: budget.satellite(),
            pattern: FeedPattern::from_half_power_angle(beam_radius_3db_deg, DEFAULT_APERTURE_EFFICIENCY),
        };
        layout.validate_coloring()?;
        Ok(layout)
    }

    pub fn beams(&self) -> usize {
        self.beam_centers.len()
    }

    pub fn feeds(&self) -> usize {
        self.feed_boresights.len()
    }

    pub fn satellite(&self) -> &Satellite {
        &self.satellite
    }

    pub fn pattern(&self) -> &FeedPattern {
        &self.pattern
    }

    pub fn beam_of_feed(&self, feed: usize) -> usize {
        feed / self.feeds_per_beam
    }

    /// Angular separation between two beam centres as seen from the satellite, radians.
    pub fn beam_separation(&self, a: usize, b: usize) -> f64 {
        let s = &self.satellite;
        angle_between(
            &s.direction_to(self.beam_centers[a]),
            &s.direction_to(self.beam_centers[b]),
        )
    }

    /// Beams whose centres are closer than twice the 3 dB radius.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.beam_separation(a, b) < 2.0 * self.beam_radius_3db_deg.to_radians()
    }

    pub fn validate_coloring(&self) -> Result<()> {
        for (k, &c) in self.color_of_beam.iter().enumerate() {
            if c > 3 {
                return Err(Error::Config(format!("beam {k} has colour {c}, expected 0..=3")));
            }
        }
        for a in 0..self.beams() {
            for b in a + 1..self.beams() {
                if self.color_of_beam[a] == self.color_of_beam[b] && self.adjacent(a, b) {
                    return Err(Error::Config(format!(
                        "adjacent beams {a} and {b} share colour {}",
                        self.color_of_beam[a]
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when `user` lies inside the 3 dB contour of `beam`.
    pub fn contains(&self, beam: usize, user: LatLon) -> bool {
        let s = &self.satellite;
        let theta = angle_between(&s.direction_to(self.beam_centers[beam]), &s.direction_to(user));
        theta <= self.beam_radius_3db_deg.to_radians() * (1.0 + 1e-9)
    }
}

/// Parameters of a hexagonal beam lattice clipped to a lat/lon box.
#[derive(Debug, Clone, PartialEq)]
pub struct HexLayoutParams {
    pub beams: usize,
    pub feeds_per_beam: usize,
    pub beam_radius_deg: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for HexLayoutParams {
    fn default() -> Self {
        Self {
            beams: 7,
            feeds_per_beam: 1,
            beam_radius_deg: 0.2,
            lat_min: 35.0,
            lat_max: 60.0,
            lon_min: -10.0,
            lon_max: 30.0,
        }
    }
}

/// Hexagonal lattice of `beams` cells nearest the box centre, seen from the
/// satellite, numbered row by row.
///
/// Centre spacing is √3 times the 3 dB radius so neighbouring contours
/// overlap; colour = (i mod 2) + 2 (j mod 2) in lattice coordinates, which
/// is a proper 4-colouring of the hexagonal grid.
pub fn hex_layout(params: &HexLayoutParams, budget: &LinkBudget) -> Result<BeamLayout> {
    if params.beams == 0 {
        return Err(Error::Config("beams must be at least 1".into()));
    }
    if !(params.lat_min < params.lat_max && params.lon_min < params.lon_max) {
        return Err(Error::Config("layout box is empty".into()));
    }
    if !(params.beam_radius_deg > 0.0) {
        return Err(Error::Config(format!(
            "degenerate beam contour: radius {} deg",
            params.beam_radius_deg
        )));
    }
    let sat = budget.satellite();
    let centre = LatLon::new(
        0.5 * (params.lat_min + params.lat_max),
        0.5 * (params.lon_min + params.lon_max),
    );
    let axis = sat.direction_to(centre);
    let (east, north) = tangent_basis(&axis);
    let r = params.beam_radius_deg.to_radians();
    let spacing = 3f64.sqrt() * r;
    let in_box = |p: &LatLon| {
        (params.lat_min..=params.lat_max).contains(&p.lat_deg)
            && (params.lon_min..=params.lon_max).contains(&p.lon_deg)
    };

    // (i, j, x, y, position)
    let mut cells: Vec<(i64, i64, f64, f64, LatLon)> = Vec::new();
    let extent = (params.beams as f64).sqrt().ceil() as i64 * 2 + 4;
    for j in -extent..=extent {
        for i in -extent..=extent {
            let x = spacing * (i as f64 + 0.5 * j as f64);
            let y = spacing * 3f64.sqrt() / 2.0 * j as f64;
            let dir = (axis + east * x + north * y).normalize();
            if let Ok(p) = sat.ground_hit(&dir) {
                if in_box(&p) {
                    cells.push((i, j, x, y, p));
                }
            }
        }
    }
    if cells.len() < params.beams {
        return Err(Error::Config(format!(
            "box holds only {} beams of radius {} deg, {} requested",
            cells.len(),
            params.beam_radius_deg,
            params.beams
        )));
    }
    cells.sort_by(|a, b| (a.2.hypot(a.3)).partial_cmp(&b.2.hypot(b.3)).unwrap());
    cells.truncate(params.beams);
    cells.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.partial_cmp(&b.2).unwrap()));

    let mut centers = Vec::with_capacity(params.beams);
    let mut colors = Vec::with_capacity(params.beams);
    let mut feeds = Vec::with_capacity(params.beams * params.feeds_per_beam);
    for &(i, j, _, _, p) in &cells {
        centers.push(p);
        colors.push((i.rem_euclid(2) + 2 * j.rem_euclid(2)) as u8);
        feeds.extend(feed_boresights(&sat, p, params.feeds_per_beam, r)?);
    }
    BeamLayout::new(centers, params.feeds_per_beam, feeds, params.beam_radius_deg, colors, budget)
}

/// One feed at the beam centre, or `count` feeds on a small ring (a triangle
/// for three feeds) of radius 0.3·r around it.
fn feed_boresights(sat: &Satellite, centre: LatLon, count: usize, r: f64) -> Result<Vec<LatLon>> {
    if count == 1 {
        return Ok(vec![centre]);
    }
    let axis = sat.direction_to(centre);
    (0..count)
        .map(|f| {
            let phi = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * f as f64 / count as f64;
            sat.ground_hit(&offset_direction(&axis, 0.3 * r, phi))
        })
        .collect()
}

/// User positions grouped per beam (same count in every beam).
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    pub positions: Vec<Vec<LatLon>>,
    /// Size of the scheduled pool these users were drawn from.
    pub pool_size: usize,
}

impl UserSet {
    pub fn beams(&self) -> usize {
        self.positions.len()
    }

    pub fn users_per_beam(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn total(&self) -> usize {
        self.positions.iter().map(Vec::len).sum()
    }

    /// (beam, index within beam, position) in channel row order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, LatLon)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .flat_map(|(k, users)| users.iter().enumerate().map(move |(q, &p)| (k, q, p)))
    }

    /// Keep, for each beam, the users listed in `selection[k]`.
    pub fn select(&self, selection: &[Vec<usize>]) -> Result<UserSet> {
        if selection.len() != self.beams() {
            return Err(Error::Dimension("selection must list every beam".into()));
        }
        let q = selection.first().map_or(0, Vec::len);
        let mut positions = Vec::with_capacity(self.beams());
        for (k, idx) in selection.iter().enumerate() {
            if idx.len() != q {
                return Err(Error::Dimension("every beam must select the same number of users".into()));
            }
            let mut beam = Vec::with_capacity(q);
            for &i in idx {
                beam.push(*self.positions[k].get(i).ok_or_else(|| {
                    Error::Dimension(format!("user {i} not in pool of beam {k}"))
                })?);
            }
            positions.push(beam);
        }
        Ok(UserSet {
            positions,
            pool_size: self.pool_size,
        })
    }
}

/// Draw `q_sched` users per beam uniformly inside each beam's 3 dB contour.
pub fn place_users(layout: &BeamLayout, q_sched: usize, rng_seed: u64) -> Result<UserSet> {
    if q_sched == 0 {
        return Err(Error::Config("pool size must be at least 1".into()));
    }
    let r = layout.beam_radius_3db_deg.to_radians();
    if !(r > 0.0) {
        return Err(Error::Config("degenerate beam contour (zero area)".into()));
    }
    let sat = layout.satellite();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut positions = Vec::with_capacity(layout.beams());
    for centre in &layout.beam_centers {
        let axis = sat.direction_to(*centre);
        let mut beam = Vec::with_capacity(q_sched);
        for _ in 0..q_sched {
            let rho = r * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            beam.push(sat.ground_hit(&offset_direction(&axis, rho, phi))?);
        }
        positions.push(beam);
    }
    Ok(UserSet {
        positions,
        pool_size: q_sched,
    })
}
