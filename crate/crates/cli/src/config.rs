//! Experiment files: TOML with every key optional except the scenario list.
//! Unknown keys are rejected; resolved values (defaults included) are echoed
//! back by [`FileConfig::resolved_toml`].

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mbprecode::channel::{Fading, HexLayoutParams, LinkBudget, PhaseVariant};
use mbprecode::evaluate::{ExperimentConfig, GroupingMode, ModcodTable, Scenario, Scheme};
use mbprecode::gateway::GatewayMode;
use mbprecode::precoding::{InterBeamKind, PowerMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub threads: Option<usize>,
    pub channel: ChannelSection,
    pub link: LinkSection,
    pub power: PowerSection,
    pub evaluation: EvaluationSection,
    pub sweep: Option<SweepSection>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioSection>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 1,
            trials: 100,
            threads: None,
            channel: ChannelSection::default(),
            link: LinkSection::default(),
            power: PowerSection::default(),
            evaluation: EvaluationSection::default(),
            sweep: None,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub beams: usize,
    pub feeds_per_beam: usize,
    pub users_per_beam: usize,
    pub pool_size: usize,
    pub beam_radius_deg: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// "ultra-stable" or "uniform".
    pub phase: String,
    pub chi_deg: f64,
    /// "clear-sky" or "rain".
    pub fading: String,
    pub rain_mu: f64,
    pub rain_sigma: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let l = HexLayoutParams::default();
        Self {
            beams: l.beams,
            feeds_per_beam: l.feeds_per_beam,
            users_per_beam: 2,
            pool_size: 2,
            beam_radius_deg: l.beam_radius_deg,
            lat_min: l.lat_min,
            lat_max: l.lat_max,
            lon_min: l.lon_min,
            lon_max: l.lon_max,
            phase: "ultra-stable".into(),
            chi_deg: 10.0,
            fading: "clear-sky".into(),
            rain_mu: 0.0,
            rain_sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub satellite_longitude_deg: f64,
    pub satellite_height_m: f64,
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub rolloff: f64,
    pub user_antenna_gain_db: f64,
    pub g_over_t_db: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let b = LinkBudget::default();
        Self {
            satellite_longitude_deg: b.satellite_longitude_deg,
            satellite_height_m: b.satellite_height_m,
            carrier_freq_hz: b.carrier_freq_hz,
            bandwidth_hz: b.bandwidth_hz,
            rolloff: b.rolloff,
            user_antenna_gain_db: b.user_antenna_gain_db,
            g_over_t_db: b.g_over_t_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    /// Total transmit power points, dBW.
    pub sweep_dbw: Vec<f64>,
    /// "per-feed" or "total".
    pub mode: String,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { sweep_dbw: vec![10.0, 15.0, 20.0, 25.0], mode: "per-feed".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// "dvbs2x", "coarse" or a path to a two-column table.
    pub modcod: String,
    pub gamma_lower: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { modcod: "dvbs2x".into(), gamma_lower: mbprecode::robust::DEFAULT_GAMMA_LOWER }
    }
}

/// Repeats the experiment once per value of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    UsersPerBeam,
    PoolSize,
    Beams,
    ChiDeg,
    CsiErrorRatio,
    GammaLower,
}

impl SweepParameter {
    pub fn key(self) -> &'static str {
        match self {
            SweepParameter::UsersPerBeam => "users_per_beam",
            SweepParameter::PoolSize => "pool_size",
            SweepParameter::Beams => "beams",
            SweepParameter::ChiDeg => "chi_deg",
            SweepParameter::CsiErrorRatio => "csi_error_ratio",
            SweepParameter::GammaLower => "gamma_lower",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParameter::UsersPerBeam | SweepParameter::PoolSize | SweepParameter::Beams)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// "mbim", "rzf", "avg-mmse", "four-color" or "robust-mbim".
    pub precoder: String,
    #[serde(default = "default_grouping")]
    pub grouping: String,
    #[serde(default)]
    pub users_per_beam: Option<usize>,
    #[serde(default)]
    pub csi_error_ratio: f64,
    /// Multi-gateway operation when set; `precoder` must then be "mbim" or "rzf".
    #[serde(default)]
    pub gateways: Option<usize>,
    /// "icp", "closest-C", "full", "msvdgc" or "ref".
    #[serde(default)]
    pub gateway_mode: Option<String>,
}

fn default_grouping() -> String {
    "first".into()
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: FileConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Key-level checks; the simulator validates the rest.
    pub fn check(&self, base_dir: &Path) -> Result<()> {
        let c = &self.channel;
        if self.scenarios.is_empty() {
            bail!("at least one [[scenario]] table is required");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        if c.beams == 0 {
            bail!("channel.beams must be at least 1");
        }
        if c.feeds_per_beam == 0 {
            bail!("channel.feeds_per_beam must be at least 1");
        }
        if c.users_per_beam == 0 {
            bail!("channel.users_per_beam must be at least 1");
        }
        if self.power.sweep_dbw.is_empty() {
            bail!("power.sweep_dbw must list at least one value");
        }
        for s in &self.scenarios {
            let q = s.users_per_beam.unwrap_or(c.users_per_beam);
            if c.pool_size < q {
                let key = if s.users_per_beam.is_some() {
                    format!("scenario '{}' users_per_beam", s.name)
                } else {
                    "channel.users_per_beam".to_string()
                };
                bail!("channel.pool_size ({}) must be >= {key} ({q})", c.pool_size);
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                bail!("sweep.values must list at least one value");
            }
            for v in &sw.values {
                if !v.is_finite() || *v < 0.0 || (sw.parameter.integral() && v.fract() != 0.0) {
                    bail!("sweep.values: {v} is not a valid {}", sw.parameter.key());
                }
            }
        }
        if !matches!(self.evaluation.modcod.as_str(), "dvbs2x" | "coarse") {
            let path = self.modcod_path(base_dir);
            if !path.is_file() {
                bail!("evaluation.modcod: file {} does not exist", path.display());
            }
        }
        let exp = self.to_experiment(base_dir)?;
        exp.validate()?;
        mbprecode::channel::hex_layout(&exp.layout, &exp.budget).context("channel layout")?;
        Ok(())
    }

    fn modcod_path(&self, base_dir: &Path) -> PathBuf {
        let p = Path::new(&self.evaluation.modcod);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }

    pub fn has_gateways(&self) -> bool {
        self.scenarios.iter().any(|s| s.gateways.is_some())
    }

    pub fn to_experiment(&self, base_dir: &Path) -> Result<ExperimentConfig> {
        let c = &self.channel;
        let l = &self.link;
        let phase_variant = match c.phase.as_str() {
            "ultra-stable" => PhaseVariant::UltraStable,
            "uniform" => PhaseVariant::Uniform,
            other => bail!("channel.phase: expected \"ultra-stable\" or \"uniform\", got \"{other}\""),
        };
        let fading = match c.fading.as_str() {
            "clear-sky" => Fading::ClearSky,
            "rain" => Fading::LogNormalRain { mu: c.rain_mu, sigma: c.rain_sigma },
            other => bail!("channel.fading: expected \"clear-sky\" or \"rain\", got \"{other}\""),
        };
        let power_mode = match self.power.mode.as_str() {
            "per-feed" => PowerMode::PerFeed,
            "total" => PowerMode::Total,
            other => bail!("power.mode: expected \"per-feed\" or \"total\", got \"{other}\""),
        };
        let modcod = match self.evaluation.modcod.as_str() {
            "dvbs2x" => ModcodTable::dvbs2x(),
            "coarse" => ModcodTable::coarse(),
            _ => {
                let path = self.modcod_path(base_dir);
                ModcodTable::from_file(&path).with_context(|| format!("evaluation.modcod: {}", path.display()))?
            }
        };
        let defaults = LinkBudget::default();
        let budget = LinkBudget {
            satellite_longitude_deg: l.satellite_longitude_deg,
            satellite_height_m: l.satellite_height_m,
            carrier_freq_hz: l.carrier_freq_hz,
            bandwidth_hz: l.bandwidth_hz,
            rolloff: l.rolloff,
            user_antenna_gain_db: l.user_antenna_gain_db,
            g_over_t_db: l.g_over_t_db,
            receiver_noise_temp_k: mbprecode::channel::noise_temperature_from_g_over_t(
                l.user_antenna_gain_db,
                l.g_over_t_db,
            ),
            ..defaults
        };
        let scenarios = self.scenarios.iter().map(scenario).collect::<Result<Vec<_>>>()?;
        Ok(ExperimentConfig {
            layout: HexLayoutParams {
                beams: c.beams,
                feeds_per_beam: c.feeds_per_beam,
                beam_radius_deg: c.beam_radius_deg,
                lat_min: c.lat_min,
                lat_max: c.lat_max,
                lon_min: c.lon_min,
                lon_max: c.lon_max,
            },
            budget,
            phase_variant,
            chi_deg: c.chi_deg,
            fading,
            pool_size: c.pool_size,
            users_per_beam: c.users_per_beam,
            trials: self.trials,
            master_seed: self.seed,
            power_dbw: self.power.sweep_dbw.clone(),
            power_mode,
            gamma_lower: self.evaluation.gamma_lower,
            modcod,
            scenarios,
            threads: self.threads,
        })
    }

    /// Copy with one swept parameter set to `value`.
    pub fn with_sweep_value(&self, parameter: SweepParameter, value: f64) -> FileConfig {
        let mut cfg = self.clone();
        cfg.sweep = None;
        match parameter {
            SweepParameter::UsersPerBeam => {
                cfg.channel.users_per_beam = value as usize;
                cfg.channel.pool_size = cfg.channel.pool_size.max(value as usize);
                for s in &mut cfg.scenarios {
                    s.users_per_beam = None;
                }
            }
            SweepParameter::PoolSize => cfg.channel.pool_size = value as usize,
            SweepParameter::Beams => cfg.channel.beams = value as usize,
            SweepParameter::ChiDeg => cfg.channel.chi_deg = value,
            SweepParameter::CsiErrorRatio => {
                for s in &mut cfg.scenarios {
                    s.csi_error_ratio = value;
                }
            }
            SweepParameter::GammaLower => cfg.evaluation.gamma_lower = value,
        }
        cfg
    }

    /// The configuration with every default filled in, as TOML.
    pub fn resolved_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

fn scenario(s: &ScenarioSection) -> Result<Scenario> {
    let ctx = |key: &str| format!("scenario '{}' {key}", s.name);
    let grouping = match s.grouping.as_str() {
        "first" => GroupingMode::First,
        "random" => GroupingMode::Random,
        "nominal" => GroupingMode::Nominal,
        "robust" => GroupingMode::Robust,
        other => bail!("{}: expected first, random, nominal or robust, got \"{other}\"", ctx("grouping")),
    };
    let kind = |what: &str| match what {
        "mbim" => Ok(InterBeamKind::Mbim),
        "rzf" => Ok(InterBeamKind::Rzf),
        other => bail!("{}: gateway scenarios need \"mbim\" or \"rzf\", got \"{other}\"", ctx("precoder")),
    };
    let scheme = match (s.gateways, &s.gateway_mode) {
        (Some(gateways), Some(mode)) => Scheme::MultiGateway {
            gateways,
            mode: mode.parse::<GatewayMode>().with_context(|| ctx("gateway_mode"))?,
            kind: kind(&s.precoder)?,
        },
        (Some(_), None) => bail!("{} is required when gateways is set", ctx("gateway_mode")),
        (None, Some(_)) => bail!("{} is required when gateway_mode is set", ctx("gateways")),
        (None, None) => match s.precoder.as_str() {
            "mbim" => Scheme::Mbim,
            "rzf" => Scheme::Rzf,
            "avg-mmse" => Scheme::AvgMmse,
            "four-color" => Scheme::FourColor,
            "robust-mbim" => Scheme::RobustMbim,
            other => bail!(
                "{}: expected mbim, rzf, avg-mmse, four-color or robust-mbim, got \"{other}\"",
                ctx("precoder")
            ),
        },
    };
    Ok(Scenario {
        name: s.name.clone(),
        scheme,
        grouping,
        users_per_beam: s.users_per_beam,
        csi_error_ratio: s.csi_error_ratio,
    })
}
