//! The four verbs and the files they write.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use mbprecode::channel::hex_layout;
use mbprecode::evaluate::{run_monte_carlo, ExperimentConfig, MonteCarloResult, Scheme};
use mbprecode::gateway::{make_plan, overhead_rows, OverheadRow, OVERHEAD_CSV_HEADER};
use mbprecode::io::write_layout_table;

use crate::config::FileConfig;

/// Runs with more skipped trials than this fraction fail.
pub const MAX_SKIP_FRACTION: f64 = 0.1;

pub struct Job {
    pub cfg: FileConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub dry_run: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn validate(job: &Job) -> Result<()> {
    job.cfg.check(&job.base_dir)?;
    println!("{}", plan_text(&job.cfg, &job.base_dir)?);
    println!("config OK");
    Ok(())
}

/// What a run would compute.
pub fn plan_text(cfg: &FileConfig, base_dir: &Path) -> Result<String> {
    let exp = cfg.to_experiment(base_dir)?;
    let mut s = String::new();
    writeln!(s, "experiment '{}': seed {}, {} trials", cfg.name, exp.master_seed, exp.trials)?;
    writeln!(
        s,
        "channel: K={} beams, N={} feeds, pool {} users per beam, P_T sweep {:?} dBW ({:?})",
        exp.layout.beams,
        exp.layout.beams * exp.layout.feeds_per_beam,
        exp.pool_size,
        exp.power_dbw,
        exp.power_mode
    )?;
    for sc in &exp.scenarios {
        writeln!(
            s,
            "  scenario '{}': {:?}, grouping {:?}, Q={}, CSI error ratio {}",
            sc.name,
            sc.scheme,
            sc.grouping,
            exp.users_for(sc),
            sc.csi_error_ratio
        )?;
    }
    if let Some(sw) = &cfg.sweep {
        writeln!(s, "sweep over {} = {:?}", sw.parameter.key(), sw.values)?;
    }
    let designs = exp.trials * exp.scenarios.len() * exp.power_dbw.len();
    write!(s, "total: {designs} precoder designs per run")?;
    Ok(s)
}

pub fn run(job: &Job) -> Result<()> {
    job.cfg.check(&job.base_dir)?;
    if job.dry_run {
        println!("{}", plan_text(&job.cfg, &job.base_dir)?);
        println!("dry run: nothing computed");
        return Ok(());
    }
    let res = run_into(&job.cfg, &job.base_dir, &job.out_dir)?;
    finish(&res)
}

fn finish(res: &MonteCarloResult) -> Result<()> {
    let frac = res.max_skip_fraction();
    if frac > MAX_SKIP_FRACTION {
        bail!(
            "{:.1}% of trials were skipped in at least one scenario (limit {:.0}%); see summary.txt",
            frac * 100.0,
            MAX_SKIP_FRACTION * 100.0
        );
    }
    Ok(())
}

/// One Monte Carlo run with all of its output files.
fn run_into(cfg: &FileConfig, base_dir: &Path, out: &Path) -> Result<MonteCarloResult> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let exp = cfg.to_experiment(base_dir)?;
    let start = Instant::now();
    let res = run_monte_carlo(&exp)?;
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{} trials in {elapsed:.2} s", exp.trials);

    let mut w = create(&out.join("results.csv"))?;
    res.write_results_csv(&mut w, &res.aggregate())?;
    w.flush()?;
    write_curves(&res, out)?;
    let layout = hex_layout(&exp.layout, &exp.budget)?;
    let mut w = create(&out.join("layout.csv"))?;
    write_layout_table(&mut w, &layout)?;
    w.flush()?;
    if cfg.has_gateways() {
        write_overhead(&exp, &out.join("overhead.csv"))?;
    }
    write_summary(cfg, &exp, &res, &out.join("summary.txt"))?;
    println!(
        "wrote {} ({} scenarios x {} powers x {} trials)",
        out.display(),
        res.scenario_names.len(),
        res.power_dbw.len(),
        exp.trials
    );
    Ok(res)
}

/// `curves.csv` (one column per scenario, Mbps) and `curves/<scenario>.csv`.
fn write_curves(res: &MonteCarloResult, out: &Path) -> Result<()> {
    let dir = out.join("curves");
    fs::create_dir_all(&dir)?;
    let mut wide = create(&out.join("curves.csv"))?;
    writeln!(wide, "P_T_dBW,{}", res.scenario_names.join(","))?;
    for (p, dbw) in res.power_dbw.iter().enumerate() {
        let cols: Vec<String> = (0..res.scenario_names.len())
            .map(|s| (res.mean_throughput(s, p) / 1e6).to_string())
            .collect();
        writeln!(wide, "{dbw},{}", cols.join(","))?;
    }
    wide.flush()?;
    let rows = res.aggregate();
    for name in &res.scenario_names {
        let mut w = create(&dir.join(format!("{}.csv", file_stem(name))))?;
        writeln!(w, "P_T_dBW,mean_throughput_bps,std,trials,skipped")?;
        for a in rows.iter().filter(|a| &a.scenario == name && a.beam.is_none()) {
            writeln!(w, "{},{},{},{},{}", a.power_dbw, a.mean_throughput_bps, a.std, a.trials, a.skipped)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn gateway_rows(exp: &ExperimentConfig) -> Result<Vec<(String, OverheadRow)>> {
    let layout = hex_layout(&exp.layout, &exp.budget)?;
    let mut rows = Vec::new();
    for s in &exp.scenarios {
        if let Scheme::MultiGateway { gateways, mode, .. } = s.scheme {
            let plan = make_plan(layout.beams(), layout.feeds(), exp.users_for(s), gateways, mode)?.with_layout(&layout)?;
            rows.extend(overhead_rows(&plan).into_iter().map(|r| (s.name.clone(), r)));
        }
    }
    Ok(rows)
}

fn write_overhead(exp: &ExperimentConfig, path: &Path) -> Result<()> {
    let rows = gateway_rows(exp)?;
    let mut w = create(path)?;
    writeln!(w, "scenario,{OVERHEAD_CSV_HEADER}")?;
    for (name, r) in rows {
        writeln!(
            w,
            "{name},{},{},{},{},{},{}",
            r.mode, r.gateways, r.gateway, r.beams, r.feeds, r.complex_values
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(cfg: &FileConfig, exp: &ExperimentConfig, res: &MonteCarloResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(w, "# generated_at_unix_s {now}")?;
    writeln!(w, "mbprecode {} / mbprecode-cli {}", mbprecode::VERSION, env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "experiment: {}", cfg.name)?;
    writeln!(w, "master seed: {}", exp.master_seed)?;
    writeln!(w, "trials: {}", exp.trials)?;
    writeln!(
        w,
        "throughput: per-beam symbol rate B/(1+rolloff) = {} Bd times the MODCOD efficiency at the worst member SINR; \
         4-colour beams use a quarter of the band; means are over beams and successful trials",
        exp.budget.symbol_rate()
    )?;
    writeln!(w, "noise: SINR uses unit noise power after receiver-noise normalization of the channel")?;
    writeln!(w)?;
    writeln!(w, "mean throughput per beam, Mbps")?;
    writeln!(w, "{:>10} {}", "P_T_dBW", res.scenario_names.iter().map(|n| format!("{n:>14}")).collect::<String>())?;
    for (p, dbw) in res.power_dbw.iter().enumerate() {
        let cols: String = (0..res.scenario_names.len())
            .map(|s| format!("{:>14.2}", res.mean_throughput(s, p) / 1e6))
            .collect();
        writeln!(w, "{dbw:>10} {cols}")?;
    }
    writeln!(w)?;
    writeln!(w, "skipped trials")?;
    for (s, name) in res.scenario_names.iter().enumerate() {
        writeln!(w, "  {name}: {} of {}", res.skipped(s), res.trials.len())?;
        let failures: Vec<String> = res
            .trials
            .iter()
            .filter_map(|t| t[s].outcome.as_ref().err().map(|e| format!("trial {}: {e}", t[s].trial)))
            .take(5)
            .collect();
        for f in failures {
            writeln!(w, "    {f}")?;
        }
    }
    writeln!(w)?;
    writeln!(w, "resolved configuration")?;
    writeln!(w, "{}", cfg.resolved_toml()?)?;
    w.flush()?;
    Ok(())
}

pub fn sweep(job: &Job) -> Result<()> {
    job.cfg.check(&job.base_dir)?;
    let Some(sw) = job.cfg.sweep.clone() else {
        bail!("the sweep verb needs a [sweep] table with parameter and values");
    };
    let variants: Vec<(f64, FileConfig)> =
        sw.values.iter().map(|&v| (v, job.cfg.with_sweep_value(sw.parameter, v))).collect();
    for (v, cfg) in &variants {
        cfg.check(&job.base_dir).with_context(|| format!("sweep.values: {} = {v}", sw.parameter.key()))?;
    }
    if job.dry_run {
        for (v, cfg) in &variants {
            println!("[{} = {v}]\n{}", sw.parameter.key(), plan_text(cfg, &job.base_dir)?);
        }
        println!("dry run: nothing computed");
        return Ok(());
    }
    fs::create_dir_all(&job.out_dir).with_context(|| format!("creating output directory {}", job.out_dir.display()))?;
    let mut combined = create(&job.out_dir.join("sweep.csv"))?;
    writeln!(combined, "parameter,value,scenario,P_T_dBW,mean_throughput_bps,std,trials,skipped")?;
    let mut worst: Option<MonteCarloResult> = None;
    for (v, cfg) in &variants {
        let dir = job.out_dir.join(format!("{}_{v}", sw.parameter.key()));
        let res = run_into(cfg, &job.base_dir, &dir)?;
        for a in res.aggregate().iter().filter(|a| a.beam.is_none()) {
            writeln!(
                combined,
                "{},{v},{},{},{},{},{},{}",
                sw.parameter.key(),
                a.scenario,
                a.power_dbw,
                a.mean_throughput_bps,
                a.std,
                a.trials,
                a.skipped
            )?;
        }
        if worst.as_ref().is_none_or(|w| res.max_skip_fraction() > w.max_skip_fraction()) {
            worst = Some(res);
        }
    }
    combined.flush()?;
    match worst {
        Some(res) => finish(&res),
        None => Ok(()),
    }
}

pub fn overhead(job: &Job) -> Result<()> {
    job.cfg.check(&job.base_dir)?;
    if !job.cfg.has_gateways() {
        bail!("no scenario sets gateways; nothing to account");
    }
    let exp = job.cfg.to_experiment(&job.base_dir)?;
    if job.dry_run {
        println!("{}", plan_text(&job.cfg, &job.base_dir)?);
        println!("dry run: nothing written");
        return Ok(());
    }
    fs::create_dir_all(&job.out_dir).with_context(|| format!("creating output directory {}", job.out_dir.display()))?;
    let path = job.out_dir.join("overhead.csv");
    write_overhead(&exp, &path)?;
    for (name, r) in gateway_rows(&exp)? {
        println!(
            "{name}: {} G={} gateway {} K_g={} N_g={} shares {} complex values",
            r.mode, r.gateways, r.gateway, r.beams, r.feeds, r.complex_values
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
