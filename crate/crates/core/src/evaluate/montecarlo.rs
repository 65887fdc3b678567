use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{beam_rate, linear_to_db, mean_std, min_sinr_per_beam, sinr_all, ModcodTable};
use crate::channel::{
    hex_layout, perturb_channel, place_users, realize_channel, BeamLayout, ChannelMatrix, Fading, HexLayoutParams,
    LinkBudget, PhaseModel, PhaseVariant,
};
use crate::error::{Error, Result};
use crate::gateway::{make_plan, multigateway_precoder, GatewayMode, GatewayPlan};
use crate::grouping::{group_users, random_groups, robust_group_users, UserGroup};
use crate::linalg::select_rows;
use crate::precoding::{
    baseline_avg_mmse, baseline_four_color, two_stage, InterBeamKind, PowerMode, FOUR_COLOR_BANDWIDTH,
};
use crate::robust::{robust_two_stage, user_bounds, PerturbationBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Mbim,
    Rzf,
    AvgMmse,
    FourColor,
    /// Robust MBIM designed on the estimated channel.
    RobustMbim,
    MultiGateway {
        gateways: usize,
        mode: GatewayMode,
        kind: InterBeamKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupingMode {
    /// The first Q pool users of each beam (pool users are i.i.d., so this
    /// is a random selection that does not consume the grouping stream).
    #[default]
    First,
    /// Uniformly random Q-subset.
    Random,
    /// Nearest neighbours of a random seed user on the estimated channel.
    Nominal,
    /// As `Nominal` with the per-user uncertainty penalty.
    Robust,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub scheme: Scheme,
    pub grouping: GroupingMode,
    /// Overrides the experiment's users per beam.
    pub users_per_beam: Option<usize>,
    /// ‖Δ‖_F / ‖H‖_F of the CSI error seen by the design.
    pub csi_error_ratio: f64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, scheme: Scheme) -> Self {
        Self {
            name: name.into(),
            scheme,
            grouping: GroupingMode::First,
            users_per_beam: None,
            csi_error_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub layout: HexLayoutParams,
    pub budget: LinkBudget,
    pub phase_variant: PhaseVariant,
    pub chi_deg: f64,
    pub fading: Fading,
    /// Scheduled users drawn per beam in every trial.
    pub pool_size: usize,
    pub users_per_beam: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub power_dbw: Vec<f64>,
    pub power_mode: PowerMode,
    /// Cap on the lower perturbation bound used by the robust intra-beam stage.
    pub gamma_lower: f64,
    pub modcod: ModcodTable,
    pub scenarios: Vec<Scenario>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layout: HexLayoutParams::default(),
            budget: LinkBudget::default(),
            phase_variant: PhaseVariant::UltraStable,
            chi_deg: 10.0,
            fading: Fading::ClearSky,
            pool_size: 2,
            users_per_beam: 2,
            trials: 100,
            master_seed: 1,
            power_dbw: vec![10.0, 15.0, 20.0, 25.0],
            power_mode: PowerMode::PerFeed,
            gamma_lower: crate::robust::DEFAULT_GAMMA_LOWER,
            modcod: ModcodTable::dvbs2x(),
            scenarios: vec![Scenario::new("mbim", Scheme::Mbim)],
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn users_for(&self, s: &Scenario) -> usize {
        s.users_per_beam.unwrap_or(self.users_per_beam)
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        PhaseModel { variant: self.phase_variant, chi_deg: self.chi_deg, rng_seed: 0 }.validate()?;
        if self.users_per_beam == 0 {
            return Err(Error::Config("users_per_beam must be at least 1".into()));
        }
        if self.power_dbw.is_empty() || self.power_dbw.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("power sweep must be a nonempty list of finite dBW values".into()));
        }
        if !(self.gamma_lower >= 0.0) {
            return Err(Error::Config("gamma_lower must be >= 0".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let feeds = self.layout.beams * self.layout.feeds_per_beam;
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.name.is_empty() || s.name.contains(',') {
                return Err(Error::Config(format!("scenario {i}: name must be nonempty without commas")));
            }
            if self.scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("duplicate scenario name '{}'", s.name)));
            }
            let q = self.users_for(s);
            if q == 0 {
                return Err(Error::Config(format!("scenario '{}': users_per_beam must be at least 1", s.name)));
            }
            if self.pool_size < q {
                return Err(Error::Config(format!(
                    "scenario '{}': pool_size ({}) is smaller than users_per_beam ({q})",
                    s.name, self.pool_size
                )));
            }
            if !(s.csi_error_ratio >= 0.0) || !s.csi_error_ratio.is_finite() {
                return Err(Error::Config(format!("scenario '{}': csi_error_ratio must be >= 0", s.name)));
            }
            if let Scheme::MultiGateway { gateways, mode, .. } = s.scheme {
                make_plan(self.layout.beams, feeds, q, gateways, mode)
                    .map_err(|e| Error::Config(format!("scenario '{}': {e}", s.name)))?;
            }
        }
        Ok(())
    }
}

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Users = 1,
    Phase = 2,
    Fading = 3,
    Perturbation = 4,
    Grouping = 5,
    RandomSelection = 6,
}

/// Seed of stream `purpose` in `trial`, independent of every other pair.
pub fn derive_seed(master: u64, trial: usize, purpose: SeedPurpose) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((trial as u64) << 8) | purpose as u64);
    rng.next_u64()
}

/// Results of one scenario at one transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub power_dbw: f64,
    /// Linear SINR per user, channel row order.
    pub user_sinr: Vec<f64>,
    pub min_sinr: Vec<f64>,
    /// Spectral efficiency per beam, bit/symbol.
    pub efficiency: Vec<f64>,
    /// Per-beam throughput, bit/s.
    pub throughput: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub scenario: usize,
    /// Seed of the user drop.
    pub rng_seed: u64,
    pub groups: Option<Vec<UserGroup>>,
    pub outcome: std::result::Result<Vec<PowerPoint>, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub scenario: String,
    pub power_dbw: f64,
    /// `None` is the average over beams.
    pub beam: Option<usize>,
    pub mean_throughput_bps: f64,
    pub std: f64,
    pub trials: usize,
    pub skipped: usize,
}

pub const RESULTS_CSV_HEADER: &str = "scenario,P_T_dBW,beam,mean_throughput_bps,std,trials,skipped";

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub scenario_names: Vec<String>,
    pub power_dbw: Vec<f64>,
    pub beams: usize,
    /// Indexed `[trial][scenario]`.
    pub trials: Vec<Vec<TrialResult>>,
}

impl MonteCarloResult {
    pub fn scenario_index(&self, name: &str) -> Option<usize> {
        self.scenario_names.iter().position(|n| n == name)
    }

    pub fn skipped(&self, scenario: usize) -> usize {
        self.trials.iter().filter(|t| t[scenario].outcome.is_err()).count()
    }

    /// Largest fraction of skipped trials over scenarios.
    pub fn max_skip_fraction(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        (0..self.scenario_names.len())
            .map(|s| self.skipped(s) as f64 / self.trials.len() as f64)
            .fold(0.0, f64::max)
    }

    /// Per trial, the mean per-beam throughput (`None` for skipped trials).
    pub fn per_trial_mean(&self, scenario: usize, power: usize) -> Vec<Option<f64>> {
        self.trials
            .iter()
            .map(|t| {
                t[scenario].outcome.as_ref().ok().map(|pts| {
                    let tp = &pts[power].throughput;
                    tp.iter().sum::<f64>() / tp.len() as f64
                })
            })
            .collect()
    }

    /// Mean per-beam throughput over beams and successful trials.
    pub fn mean_throughput(&self, scenario: usize, power: usize) -> f64 {
        let v: Vec<f64> = self.per_trial_mean(scenario, power).into_iter().flatten().collect();
        mean_std(&v).0
    }

    pub fn aggregate(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (s, name) in self.scenario_names.iter().enumerate() {
            let skipped = self.skipped(s);
            for (p, &dbw) in self.power_dbw.iter().enumerate() {
                let ok: Vec<&Vec<PowerPoint>> = self.trials.iter().filter_map(|t| t[s].outcome.as_ref().ok()).collect();
                for b in 0..self.beams {
                    let v: Vec<f64> = ok.iter().map(|pts| pts[p].throughput[b]).collect();
                    let (mean, std) = mean_std(&v);
                    out.push(Aggregate {
                        scenario: name.clone(),
                        power_dbw: dbw,
                        beam: Some(b),
                        mean_throughput_bps: mean,
                        std,
                        trials: v.len(),
                        skipped,
                    });
                }
                let v: Vec<f64> = self.per_trial_mean(s, p).into_iter().flatten().collect();
                let (mean, std) = mean_std(&v);
                out.push(Aggregate {
                    scenario: name.clone(),
                    power_dbw: dbw,
                    beam: None,
                    mean_throughput_bps: mean,
                    std,
                    trials: v.len(),
                    skipped,
                });
            }
        }
        out
    }

    pub fn write_results_csv<W: Write>(&self, mut out: W, rows: &[Aggregate]) -> Result<()> {
        writeln!(out, "{RESULTS_CSV_HEADER}")?;
        for a in rows {
            let beam = a.beam.map_or_else(|| "all".to_string(), |b| b.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.scenario, a.power_dbw, beam, a.mean_throughput_bps, a.std, a.trials, a.skipped
            )?;
        }
        Ok(())
    }
}

struct Prepared {
    layout: BeamLayout,
    plans: Vec<Option<GatewayPlan>>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let layout = hex_layout(&cfg.layout, &cfg.budget)?;
    let plans = cfg
        .scenarios
        .iter()
        .map(|s| match s.scheme {
            Scheme::MultiGateway { gateways, mode, .. } => {
                make_plan(layout.beams(), layout.feeds(), cfg.users_for(s), gateways, mode)?
                    .with_layout(&layout)
                    .map(Some)
            }
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    Ok(Prepared { layout, plans })
}

/// Run every trial of every scenario. Scenarios of a trial share the user
/// pool, the channel and the CSI error direction, so they are paired.
/// Results are stored in trial order whatever the thread count.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let run = || -> Vec<Vec<TrialResult>> { (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &prep, t)).collect() };
    let trials = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(MonteCarloResult {
        scenario_names: cfg.scenarios.iter().map(|s| s.name.clone()).collect(),
        power_dbw: cfg.power_dbw.clone(),
        beams: prep.layout.beams(),
        trials,
    })
}

fn run_trial(cfg: &ExperimentConfig, prep: &Prepared, trial: usize) -> Vec<TrialResult> {
    let seed = |p| derive_seed(cfg.master_seed, trial, p);
    let user_seed = seed(SeedPurpose::Users);
    let pool = draw_pool(cfg, prep, trial);
    cfg.scenarios
        .iter()
        .enumerate()
        .map(|(s, scenario)| {
            let (groups, outcome) = match &pool {
                Ok(h_pool) => match run_scenario(cfg, prep, s, scenario, h_pool, trial) {
                    Ok((g, pts)) => (g, Ok(pts)),
                    Err(e) => (None, Err(e)),
                },
                Err(e) => (None, Err(e.clone())),
            };
            if let Err(e) = &outcome {
                log::debug!("trial {trial}, scenario '{}' skipped: {e}", scenario.name);
            }
            TrialResult { trial, scenario: s, rng_seed: user_seed, groups, outcome }
        })
        .collect()
}

fn draw_pool(cfg: &ExperimentConfig, prep: &Prepared, trial: usize) -> Result<ChannelMatrix<f64>> {
    let seed = |p| derive_seed(cfg.master_seed, trial, p);
    let users = place_users(&prep.layout, cfg.pool_size, seed(SeedPurpose::Users))?;
    let fading = cfg.fading.draw(users.total(), seed(SeedPurpose::Fading))?;
    let phase = PhaseModel { variant: cfg.phase_variant, chi_deg: cfg.chi_deg, rng_seed: seed(SeedPurpose::Phase) };
    realize_channel(&prep.layout, &users, &cfg.budget, &fading, &phase)
}

type ScenarioOutput = (Option<Vec<UserGroup>>, Vec<PowerPoint>);

fn run_scenario(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    index: usize,
    s: &Scenario,
    h_pool: &ChannelMatrix<f64>,
    trial: usize,
) -> Result<ScenarioOutput> {
    let seed = |p| derive_seed(cfg.master_seed, trial, p);
    let q = cfg.users_for(s);
    let (h_hat_pool, delta_pool, _) = perturb_channel(h_pool, s.csi_error_ratio, seed(SeedPurpose::Perturbation))?;
    let groups = match s.grouping {
        GroupingMode::First => None,
        GroupingMode::Random => Some(random_groups(&h_hat_pool, q, seed(SeedPurpose::RandomSelection))?),
        GroupingMode::Nominal => Some(group_users(&h_hat_pool, q, seed(SeedPurpose::Grouping))?),
        GroupingMode::Robust => Some(robust_group_users(
            &h_hat_pool,
            &user_bounds(&delta_pool),
            q,
            seed(SeedPurpose::Grouping),
        )?),
    };
    let selection: Vec<Vec<usize>> = match &groups {
        Some(g) => crate::grouping::selection(g),
        None => vec![(0..q).collect(); h_pool.beams()],
    };
    let h = h_pool.select_users(&selection)?;
    let h_hat = h_hat_pool.select_users(&selection)?;
    let rows: Vec<usize> = selection
        .iter()
        .enumerate()
        .flat_map(|(k, sel)| sel.iter().map(move |&u| h_pool.row_index(k, u)))
        .collect();
    let delta = select_rows(&delta_pool, &rows);
    let bounds = PerturbationBounds::from_delta(&delta, h.beams(), q).with_lower_bound(cfg.gamma_lower)?;

    let mut points = Vec::with_capacity(cfg.power_dbw.len());
    for &dbw in &cfg.power_dbw {
        let p = 10f64.powf(dbw / 10.0);
        let (sinrs, share) = match s.scheme {
            Scheme::FourColor => (
                baseline_four_color(&h, &prep.layout.color_of_beam, prep.layout.feeds_per_beam, p)?,
                FOUR_COLOR_BANDWIDTH,
            ),
            scheme => {
                let w = match scheme {
                    Scheme::Mbim => two_stage(&h_hat, p, InterBeamKind::Mbim, cfg.power_mode)?.w,
                    Scheme::Rzf => two_stage(&h_hat, p, InterBeamKind::Rzf, cfg.power_mode)?.w,
                    Scheme::AvgMmse => baseline_avg_mmse(&h_hat, p, cfg.power_mode)?,
                    Scheme::RobustMbim => robust_two_stage(&h_hat, &bounds, p, cfg.power_mode)?.precoder.w,
                    Scheme::MultiGateway { kind, .. } => {
                        let plan = prep.plans[index].as_ref().expect("plan prepared for gateway scenarios");
                        multigateway_precoder(&h_hat, plan, p, kind, cfg.power_mode)?.w
                    }
                    Scheme::FourColor => unreachable!(),
                };
                (sinr_all(&h, &w), 1.0)
            }
        };
        let min_sinr = min_sinr_per_beam(&sinrs, q);
        let efficiency: Vec<f64> = min_sinr.iter().map(|&m| cfg.modcod.lookup(linear_to_db(m))).collect();
        let throughput = sinrs.chunks(q).map(|c| beam_rate(c, &cfg.modcod, &cfg.budget, share)).collect();
        points.push(PowerPoint { power_dbw: dbw, user_sinr: sinrs, min_sinr, efficiency, throughput });
    }
    Ok((groups, points))
}
