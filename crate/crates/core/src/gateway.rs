//! Multi-gateway operation: every gateway drives a consecutive block of feeds
//! and beams, sees a partial view of the channel assembled from whatever CSI
//! the other gateways share, and designs its own block of a block-diagonal
//! precoder.

use std::fmt;
use std::ops::Range;

use rayon::prelude::*;

use crate::channel::{BeamLayout, ChannelMatrix, Vec3};
use crate::error::{Error, Result};
use crate::precoding::{self, InterBeamKind, PowerMode};
use crate::scalar::{cx, CMat, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatewayMode {
    /// Individual cluster processing: no CSI exchanged.
    Icp,
    /// Exact CSI from the `C` nearest gateways.
    Closest(usize),
    /// Exact CSI from every other gateway.
    FullSharing,
    /// Rank-1 (leading singular triple) CSI from every other gateway.
    Msvdgc,
    /// Single gateway with the whole channel.
    Reference,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GatewayMode::Icp => write!(f, "icp"),
            GatewayMode::Closest(c) => write!(f, "closest-{c}"),
            GatewayMode::FullSharing => write!(f, "full"),
            GatewayMode::Msvdgc => write!(f, "msvdgc"),
            GatewayMode::Reference => write!(f, "ref"),
        }
    }
}

impl std::str::FromStr for GatewayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "icp" => Ok(GatewayMode::Icp),
            "full" => Ok(GatewayMode::FullSharing),
            "msvdgc" => Ok(GatewayMode::Msvdgc),
            "ref" | "reference" => Ok(GatewayMode::Reference),
            _ => s
                .strip_prefix("closest-")
                .and_then(|c| c.parse().ok())
                .map(GatewayMode::Closest)
                .ok_or_else(|| Error::Config(format!("unknown gateway mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayPlan {
    pub gateways: usize,
    pub beams: usize,
    pub feeds: usize,
    pub users_per_beam: usize,
    pub beam_ranges: Vec<Range<usize>>,
    pub feed_ranges: Vec<Range<usize>>,
    pub mode: GatewayMode,
    /// Other gateways ordered by increasing centroid distance.
    pub neighbors: Vec<Vec<usize>>,
}

fn near_equal_split(total: usize, parts: usize) -> Vec<Range<usize>> {
    let base = total / parts;
    let extra = total % parts;
    let mut start = 0;
    (0..parts)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Consecutive near-equal partition of beams and feeds. When every beam has
/// the same number of feeds, a gateway gets exactly the feeds of its beams.
/// Neighbours are ranked by the mean beam index of each block; use
/// [`GatewayPlan::with_layout`] for geometric centroids.
pub fn make_plan(beams: usize, feeds: usize, users_per_beam: usize, gateways: usize, mode: GatewayMode) -> Result<GatewayPlan> {
    if gateways == 0 || gateways > beams {
        return Err(Error::Config(format!("{gateways} gateways for {beams} beams")));
    }
    if feeds < gateways {
        return Err(Error::Config(format!("{gateways} gateways for {feeds} feeds")));
    }
    if users_per_beam == 0 {
        return Err(Error::Config("users_per_beam must be at least 1".into()));
    }
    match mode {
        GatewayMode::Reference if gateways != 1 => {
            return Err(Error::Config("the reference mode uses a single gateway".into()));
        }
        GatewayMode::Closest(c) if c == 0 || c >= gateways => {
            return Err(Error::Config(format!(
                "closest-{c} needs between 1 and {} other gateways",
                gateways - 1
            )));
        }
        _ => {}
    }
    let beam_ranges = near_equal_split(beams, gateways);
    let feed_ranges = if feeds.is_multiple_of(beams) {
        let f = feeds / beams;
        beam_ranges.iter().map(|r| r.start * f..r.end * f).collect()
    } else {
        near_equal_split(feeds, gateways)
    };
    let centroids: Vec<Vec3> = beam_ranges
        .iter()
        .map(|r| Vec3::new((r.start + r.end) as f64 / 2.0, 0.0, 0.0))
        .collect();
    let neighbors = rank_neighbors(&centroids);
    Ok(GatewayPlan { gateways, beams, feeds, users_per_beam, beam_ranges, feed_ranges, mode, neighbors })
}

fn rank_neighbors(centroids: &[Vec3]) -> Vec<Vec<usize>> {
    (0..centroids.len())
        .map(|g| {
            let mut others: Vec<usize> = (0..centroids.len()).filter(|&l| l != g).collect();
            others.sort_by(|&a, &b| {
                let da = (centroids[a] - centroids[g]).norm();
                let db = (centroids[b] - centroids[g]).norm();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            others
        })
        .collect()
}

impl GatewayPlan {
    /// Re-rank neighbours by the distance between the mean pointing
    /// directions of each gateway's beams.
    pub fn with_layout(mut self, layout: &BeamLayout) -> Result<Self> {
        if layout.beams() != self.beams {
            return Err(Error::Config(format!(
                "layout has {} beams, plan has {}",
                layout.beams(),
                self.beams
            )));
        }
        let sat = layout.satellite();
        let centroids: Vec<Vec3> = self
            .beam_ranges
            .iter()
            .map(|r| r.clone().map(|k| sat.direction_to(layout.beam_centers[k])).sum::<Vec3>() / r.len() as f64)
            .collect();
        self.neighbors = rank_neighbors(&centroids);
        Ok(self)
    }

    pub fn beams_of(&self, g: usize) -> Range<usize> {
        self.beam_ranges[g].clone()
    }

    pub fn feeds_of(&self, g: usize) -> Range<usize> {
        self.feed_ranges[g].clone()
    }

    pub fn gateway_of_beam(&self, beam: usize) -> usize {
        self.beam_ranges.iter().position(|r| r.contains(&beam)).expect("beam inside the plan")
    }

    /// Rows of H carrying the users served by gateway `g`.
    pub fn user_rows(&self, g: usize) -> Range<usize> {
        let b = self.beams_of(g);
        b.start * self.users_per_beam..b.end * self.users_per_beam
    }

    /// Gateways whose CSI gateway `g` receives exactly.
    pub fn exact_partners(&self, g: usize) -> Vec<usize> {
        match self.mode {
            GatewayMode::Icp | GatewayMode::Reference | GatewayMode::Msvdgc => vec![],
            GatewayMode::Closest(c) => self.neighbors[g].iter().take(c).copied().collect(),
            GatewayMode::FullSharing => self.neighbors[g].clone(),
        }
    }

    /// Complex values delivered to gateway `g` by the others.
    pub fn overhead(&self, g: usize) -> usize {
        let n_g = self.feeds_of(g).len();
        match self.mode {
            GatewayMode::Msvdgc => (self.gateways - 1) * n_g,
            _ => self
                .exact_partners(g)
                .iter()
                .map(|&l| self.users_per_beam * self.beams_of(l).len() * n_g)
                .sum(),
        }
    }

    fn check_channel<T: Real>(&self, h: &ChannelMatrix<T>) -> Result<()> {
        if h.beams() != self.beams || h.feeds() != self.feeds || h.users_per_beam() != self.users_per_beam {
            return Err(Error::Dimension(format!(
                "plan is {}x{}x{}, channel is {}x{}x{}",
                self.beams,
                self.users_per_beam,
                self.feeds,
                h.beams(),
                h.users_per_beam(),
                h.feeds()
            )));
        }
        Ok(())
    }
}

/// H^{g,g}: the gateway's own users towards its own feeds, `QK_g × N_g`.
pub fn local_csi<T: Real>(h: &ChannelMatrix<T>, plan: &GatewayPlan, g: usize) -> Result<CMat<T>> {
    if g >= plan.gateways {
        return Err(Error::Config(format!("gateway {g} out of range")));
    }
    plan.check_channel(h)?;
    let rows = plan.user_rows(g);
    let cols = plan.feeds_of(g);
    Ok(h.matrix().view((rows.start, cols.start), (rows.len(), cols.len())).into_owned())
}

/// Channel as seen by one gateway: all KQ users towards its N_g feeds, with
/// unknown rows zeroed and MSVDGC blocks replaced by rank-1 approximations.
#[derive(Debug, Clone)]
pub struct SharedCsiView<T: Real> {
    pub gateway: usize,
    pub h: ChannelMatrix<T>,
    /// Per beam: whether its rows hold exact CSI.
    pub exact_beams: Vec<bool>,
    pub overhead_complex_count: usize,
}

fn rank_one<T: Real>(block: &CMat<T>) -> CMat<T> {
    if block.is_empty() {
        return block.clone();
    }
    let svd = block.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut best = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] > svd.singular_values[best] {
            best = i;
        }
    }
    u.column(best) * cx(svd.singular_values[best]) * vt.row(best)
}

/// Views for every gateway.
pub fn share_csi<T: Real>(h: &ChannelMatrix<T>, plan: &GatewayPlan) -> Result<Vec<SharedCsiView<T>>> {
    plan.check_channel(h)?;
    (0..plan.gateways)
        .map(|g| {
            let cols = plan.feeds_of(g);
            let full = h.matrix().columns(cols.start, cols.len()).into_owned();
            let mut view = CMat::zeros(full.nrows(), full.ncols());
            let mut exact = vec![false; plan.beams];
            let mut known = plan.exact_partners(g);
            known.push(g);
            for &l in &known {
                let rows = plan.user_rows(l);
                view.rows_mut(rows.start, rows.len()).copy_from(&full.rows(rows.start, rows.len()));
                for k in plan.beams_of(l) {
                    exact[k] = true;
                }
            }
            if plan.mode == GatewayMode::Msvdgc {
                for l in (0..plan.gateways).filter(|&l| l != g) {
                    let rows = plan.user_rows(l);
                    let approx = rank_one(&full.rows(rows.start, rows.len()).into_owned());
                    view.rows_mut(rows.start, rows.len()).copy_from(&approx);
                }
            }
            Ok(SharedCsiView {
                gateway: g,
                h: ChannelMatrix::new(view, plan.beams, plan.users_per_beam)?,
                exact_beams: exact,
                overhead_complex_count: plan.overhead(g),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MultiGatewayPrecoder<T: Real> {
    /// `N × K`, block diagonal over (feeds, beams) of each gateway.
    pub w: CMat<T>,
    pub alpha: T,
    pub power_mode: PowerMode,
    pub overhead_per_gateway: Vec<usize>,
}

/// Each gateway designs its own `N_g × K_g` block on its view; power control
/// is then applied to the whole block-diagonal matrix.
pub fn assemble_multigateway_precoder<T: Real>(
    views: &[SharedCsiView<T>],
    plan: &GatewayPlan,
    total_power: T,
    kind: InterBeamKind,
    mode: PowerMode,
) -> Result<MultiGatewayPrecoder<T>> {
    if views.len() != plan.gateways {
        return Err(Error::Dimension(format!("{} views for {} gateways", views.len(), plan.gateways)));
    }
    let reg = precoding::regularization(plan.beams, plan.users_per_beam, total_power);
    let blocks: Vec<CMat<T>> = views
        .par_iter()
        .map(|v| {
            let beams: Vec<usize> = plan.beams_of(v.gateway).collect();
            precoding::unnormalized_for_beams(&v.h, &beams, reg, kind)
                .map_err(|e| Error::Gateway { gateway: v.gateway, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut w_bar = CMat::zeros(plan.feeds, plan.beams);
    for (g, b) in blocks.iter().enumerate() {
        let (f, k) = (plan.feeds_of(g), plan.beams_of(g));
        w_bar.view_mut((f.start, k.start), (f.len(), k.len())).copy_from(b);
    }
    let alpha = precoding::power_control(&w_bar, total_power, mode)?;
    Ok(MultiGatewayPrecoder {
        w: w_bar.map(|z| z * cx(alpha)),
        alpha,
        power_mode: mode,
        overhead_per_gateway: views.iter().map(|v| v.overhead_complex_count).collect(),
    })
}

/// Share CSI and design in one step.
pub fn multigateway_precoder<T: Real>(
    h: &ChannelMatrix<T>,
    plan: &GatewayPlan,
    total_power: T,
    kind: InterBeamKind,
    mode: PowerMode,
) -> Result<MultiGatewayPrecoder<T>> {
    let views = share_csi(h, plan)?;
    assemble_multigateway_precoder(&views, plan, total_power, kind, mode)
}

/// One overhead CSV row per gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverheadRow {
    pub mode: String,
    pub gateways: usize,
    pub gateway: usize,
    pub beams: usize,
    pub feeds: usize,
    pub complex_values: usize,
}

pub fn overhead_rows(plan: &GatewayPlan) -> Vec<OverheadRow> {
    (0..plan.gateways)
        .map(|g| OverheadRow {
            mode: plan.mode.to_string(),
            gateways: plan.gateways,
            gateway: g,
            beams: plan.beams_of(g).len(),
            feeds: plan.feeds_of(g).len(),
            complex_values: plan.overhead(g),
        })
        .collect()
}

pub const OVERHEAD_CSV_HEADER: &str = "mode,G,gateway,K_g,N_g,complex_values_shared_per_gateway";

pub fn write_overhead_csv<W: std::io::Write>(mut out: W, rows: &[OverheadRow]) -> Result<()> {
    writeln!(out, "{OVERHEAD_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.mode, r.gateways, r.gateway, r.beams, r.feeds, r.complex_values)?;
    }
    Ok(())
}
