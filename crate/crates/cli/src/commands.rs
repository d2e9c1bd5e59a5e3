//! Subcommand runners. Each resolves its options (flags over `SMOGE_SEED`
//! over the config file over defaults), runs, writes its outputs into the
//! output directory and returns what goes into the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

use smoge::contraction::{
    hellinger_voronoi_ratio_scan, rate_experiment, Estimator, EstimatorConfig, RateSchedule, RatioScanConfig, SlopeFit,
    Target,
};
use smoge::divergences::hellinger_sq_mc;
use smoge::identifiability::strong_identifiability_test;
use smoge::io::{fmt_f64, measure_to_toml, read_dataset, read_measure, to_toml, write_dataset, FitRecord};
use smoge::model::sample_dgp;
use smoge::selection::{
    default_candidates, default_n_grid, emit_table, run_selection, FitSchedule, LrRule, Scale, SelectionConfig,
    SelectionResult, TableRow,
};
use smoge::vi::{FitConfig, LearningRate, PriorConfig};
use smoge::voronoi::{loss_l1, loss_l2, VoronoiLossReport};
use smoge::{seed, DgpSpec, Error, ExpertFamily};

use crate::options::*;
use crate::svg;
use crate::Context;

pub const SEED_ENV: &str = "SMOGE_SEED";

pub struct Outcome {
    pub subcommand: &'static str,
    pub seed: u64,
    pub config: toml::Table,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
    /// Set when the run hit a numerical failure; the process exits with 2.
    pub numerical_failure: Option<String>,
}

impl Outcome {
    fn new<T: Serialize>(subcommand: &'static str, seed: u64, resolved: &T, out: Outputs) -> Result<Self> {
        Ok(Self {
            subcommand,
            seed,
            config: toml::Table::try_from(resolved).context("serializing resolved options")?,
            outputs: out.files,
            notes: Vec::new(),
            numerical_failure: None,
        })
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(p.clone());
        Ok(p)
    }
}

/// Config file, then the seed environment variable, then flags.
fn layered<T: Layered + DeserializeOwned + Default>(ctx: &Context, flags: T) -> Result<T> {
    let mut lower = match &ctx.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config file {}", p.display()))?;
            toml::from_str::<T>(&text).with_context(|| format!("config file {}", p.display()))?
        }
        None => T::default(),
    };
    if let Ok(s) = std::env::var(SEED_ENV) {
        let v: u64 = s
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))?;
        *lower.seed_mut() = Some(v);
    }
    Ok(flags.over(&lower))
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required option `{name}`"))
}

fn reject<T>(v: &Option<T>, name: &str, why: &str) -> Result<()> {
    if v.is_some() {
        bail!("option `{name}` {why}");
    }
    Ok(())
}

fn positive(v: usize, name: &str) -> Result<usize> {
    if v == 0 {
        bail!("option `{name}` must be at least 1");
    }
    Ok(v)
}

fn family_of(kind: FamilyKind, level: &mut Option<f64>) -> Result<ExpertFamily<f64>> {
    Ok(match kind {
        FamilyKind::Linear => {
            reject(level, "level", "applies only to the constant family")?;
            ExpertFamily::Linear
        }
        FamilyKind::Sigmoid => {
            reject(level, "level", "applies only to the constant family")?;
            ExpertFamily::Sigmoid
        }
        FamilyKind::Constant => ExpertFamily::Constant {
            level: *level.get_or_insert(0.0),
        },
    })
}

/// Fills the b4 shape defaults and rejects shape options on other generators.
fn resolve_dgp(
    kind: DgpKind,
    sep: &mut Option<f64>,
    d: &mut Option<usize>,
    kstar: &mut Option<usize>,
    measure: Option<&str>,
) -> Result<DgpSpec> {
    if kind == DgpKind::B4 {
        let spec = DgpSpec::B4 {
            separation: *sep.get_or_insert(5.0),
            d: *d.get_or_insert(2),
            k_star: *kstar.get_or_insert(2),
        };
        spec.validate()?;
        return Ok(spec);
    }
    for (v, name) in [(sep.is_some(), "sep"), (d.is_some(), "d"), (kstar.is_some(), "kstar")] {
        if v {
            bail!("option `{name}` applies only to --dgp b4");
        }
    }
    Ok(match kind {
        DgpKind::B2 => DgpSpec::B2,
        DgpKind::B3 => DgpSpec::B3,
        DgpKind::Smoge => {
            let path = measure.ok_or_else(|| anyhow!("--dgp smoge needs `measure` (a mixing-measure file)"))?;
            DgpSpec::Smoge {
                measure: read_measure(Path::new(path))?,
            }
        }
        DgpKind::B4 => unreachable!(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_num(v: Option<f64>, round: Option<usize>) -> String {
    v.map(|x| fmt_f64(x, round)).unwrap_or_default()
}

pub fn simulate(ctx: &Context, flags: SimulateOpts) -> Result<Outcome> {
    let mut o = layered(ctx, flags)?;
    let kind = required(o.dgp, "dgp")?;
    if kind != DgpKind::Smoge {
        reject(&o.measure, "measure", "applies only to --dgp smoge")?;
    }
    let spec = resolve_dgp(kind, &mut o.sep, &mut o.d, &mut o.kstar, o.measure.as_deref())?;
    let n = positive(
        *o.n.get_or_insert(match kind {
            DgpKind::B2 => 100,
            DgpKind::B3 => 1000,
            DgpKind::B4 | DgpKind::Smoge => 500,
        }),
        "n",
    )?;
    let s = *o.seed.get_or_insert(0);

    let data = sample_dgp(&spec, n, s)?;
    let mut out = Outputs::new(&ctx.out)?;
    let path = ctx.out.join("data.csv");
    let side = write_dataset(&path, &data, ctx.round)?;
    out.files.push(path.clone());
    out.files.push(side);
    println!(
        "wrote {n} rows ({}, d = {}) to {}",
        spec.id(),
        spec.dim(),
        path.display()
    );
    Outcome::new("simulate", s, &o, out)
}

pub fn fit(ctx: &Context, flags: FitOpts) -> Result<Outcome> {
    let mut o = layered(ctx, flags)?;
    let data_path = required(o.data.clone(), "data")?;
    let k = positive(*o.k.get_or_insert(2), "k")?;
    let family = family_of(*o.family.get_or_insert(FamilyKind::Linear), &mut o.level)?;
    let iterations = *o.iterations.get_or_insert(4000);
    let lr = *o.lr.get_or_insert(0.01);
    let mc = *o.mc_samples.get_or_insert(1);
    let final_samples = *o.final_elbo_samples.get_or_insert(200);
    let s = *o.seed.get_or_insert(0);

    let data = read_dataset(Path::new(&data_path)).with_context(|| format!("reading dataset {data_path}"))?;
    let learning_rate = match o.lr_final {
        Some(last) => LearningRate::Exponential { initial: lr, last },
        None => LearningRate::constant(lr),
    };
    let cfg = FitConfig {
        family,
        mc_samples_per_step: mc,
        final_elbo_samples: final_samples,
        ..FitConfig::new(iterations, learning_rate, s)
    };
    let prior = PriorConfig::default();
    let mut out = Outputs::new(&ctx.out)?;
    let result = match smoge::vi::fit(&data, k, &prior, &cfg) {
        Ok(r) => r,
        Err(e @ Error::NonFinite { .. }) => {
            let mut outcome = Outcome::new("fit", s, &o, out)?;
            outcome.numerical_failure = Some(e.to_string());
            return Ok(outcome);
        }
        Err(e) => return Err(e.into()),
    };
    out.write("fit.toml", to_toml(&FitRecord::new(&result, &cfg, &prior))?)?;
    out.write("point_estimate.toml", measure_to_toml(&result.point_estimate)?)?;
    let mut trace = String::from("iteration,elbo\n");
    for (i, v) in result.elbo_trace.iter().enumerate() {
        trace += &format!("{i},{}\n", fmt_f64(*v, ctx.round));
    }
    out.write("trace.csv", trace)?;
    println!(
        "K = {k}: final ELBO {} (std error {})",
        fmt_f64(result.final_elbo, Some(4)),
        fmt_f64(result.final_elbo_std_error, Some(4))
    );
    Outcome::new("fit", s, &o, out)
}

pub fn select(ctx: &Context, mut flags: SelectOpts) -> Result<Outcome> {
    // a single-n flag beats a file grid and vice versa
    let file_only_grid = flags.n.is_none() && flags.n_grid.is_none();
    if flags.n_grid.is_some() {
        flags.n = None;
    }
    let mut o = layered(ctx, flags.clone())?;
    if flags.n_grid.is_some() {
        o.n = None;
    } else if flags.n.is_some() {
        o.n_grid = None;
    } else if file_only_grid && o.n.is_some() {
        o.n_grid = None;
    }
    if flags.lr.is_some() {
        o.lr_rule = None;
    }

    let kind = required(o.dgp, "dgp")?;
    if kind == DgpKind::Smoge {
        bail!("select supports --dgp b2, b3 and b4");
    }
    let spec = resolve_dgp(kind, &mut o.sep, &mut o.d, &mut o.kstar, None)?;
    let mut schedule = FitSchedule::for_dgp(&spec);

    let n_grid = match (o.n.take(), o.n_grid.take()) {
        (Some(n), _) => vec![n],
        (None, Some(g)) => g,
        (None, None) => match kind {
            DgpKind::B4 => vec![500],
            _ => default_n_grid(&spec),
        },
    };
    if n_grid.is_empty() || n_grid.contains(&0) {
        bail!("option `n_grid` needs positive sample sizes");
    }
    o.n_grid = Some(n_grid.clone());
    let candidates = o.candidates.get_or_insert_with(|| default_candidates(&spec)).clone();
    let scale = match *o.scale.get_or_insert(ScaleKind::Desk) {
        ScaleKind::Desk => Scale::Desk,
        ScaleKind::Paper => Scale::Paper,
    };
    let full_reps = if kind == DgpKind::B4 { 100 } else { 50 };
    let reps = positive(*o.reps.get_or_insert(scale.default_replications(full_reps)), "reps")?;
    schedule.iterations = positive(*o.iterations.get_or_insert(schedule.iterations), "iterations")?;
    if let Some(rate) = o.lr.take() {
        o.lr_rule = Some(LrRule::Constant { rate });
    }
    schedule.learning_rate = *o.lr_rule.get_or_insert(schedule.learning_rate);
    schedule.final_elbo_samples = *o.final_elbo_samples.get_or_insert(schedule.final_elbo_samples);
    let budget = *o.failure_budget.get_or_insert(0);
    let s = *o.seed.get_or_insert(0);

    let mut results: Vec<(usize, SelectionResult)> = Vec::new();
    for &n in &n_grid {
        let cfg = SelectionConfig {
            schedule,
            scale,
            ..SelectionConfig::new(spec.clone(), n, candidates.clone(), reps, seed::derive(s, &[n as u64]))
        };
        let r = run_selection(&cfg)?;
        eprintln!("n = {n}: {} replications in {:.1}s", reps, r.runtime_secs);
        results.push((n, r));
    }

    let rows: Vec<TableRow<'_>> = results
        .iter()
        .map(|(n, r)| TableRow {
            label: spec.id().into(),
            d: spec.dim(),
            k_star: spec.k_star(),
            n: *n,
            result: r,
        })
        .collect();
    let (csv, text) = emit_table(&rows);
    let mut out = Outputs::new(&ctx.out)?;
    out.write("table.csv", csv)?;
    out.write("table.txt", &text)?;
    print!("{text}");

    let mut reps_csv = String::from("n,replication,winner");
    for k in &candidates {
        reps_csv += &format!(",elbo_K{k}");
    }
    for k in &candidates {
        reps_csv += &format!(",elbo_se_K{k}");
    }
    reps_csv.push('\n');
    let mut failed_csv = String::from("n,replication,k,message\n");
    let mut n_failed = 0;
    for (n, r) in &results {
        for rep in &r.replications {
            reps_csv += &format!("{n},{},{}", rep.replication, rep.winner);
            for v in rep.final_elbos.iter().chain(&rep.final_elbo_std_errors) {
                reps_csv += &format!(",{}", fmt_f64(*v, ctx.round));
            }
            reps_csv.push('\n');
        }
        for f in &r.failed {
            failed_csv += &format!("{n},{},{},{}\n", f.replication, f.k, csv_field(&f.message));
            n_failed += 1;
        }
    }
    out.write("replications.csv", reps_csv)?;
    if n_failed > 0 {
        out.write("failed.csv", failed_csv)?;
    }
    if n_grid.len() > 1 {
        let props: Vec<Vec<f64>> = results.iter().map(|(_, r)| r.win_proportions.clone()).collect();
        let title = format!("{}: proportion of replications won by each K", spec.id());
        out.write("sweep.svg", svg::sweep_chart(&title, &n_grid, &candidates, &props))?;
    }

    let mut outcome = Outcome::new("select", s, &o, out)?;
    if n_failed > 0 {
        let msg = format!("{n_failed} replication(s) had a failed fit (budget {budget})");
        eprintln!("{msg}");
        outcome.notes.push(msg.clone());
        if n_failed > budget {
            outcome.numerical_failure = Some(msg);
        }
    }
    Ok(outcome)
}

fn slope_row(name: &str, f: &SlopeFit, round: Option<usize>) -> String {
    format!(
        "{name},{},{},{}\n",
        fmt_f64(f.slope, round),
        fmt_f64(f.std_error, round),
        fmt_f64(f.intercept, round)
    )
}

pub fn rates(ctx: &Context, flags: RatesOpts) -> Result<Outcome> {
    let mut o = layered(ctx, flags)?;
    let path = required(o.dgp_file.clone(), "dgp_file")?;
    let gstar = read_measure(Path::new(&path))?;
    if !gstar.is_gating_normalized() {
        bail!("{path}: the last component must carry zero gating parameters (alpha0 = 0, alpha1 = 0)");
    }
    let n_mc = positive(*o.n_mc.get_or_insert(smoge::divergences::DEFAULT_N_MC), "n_mc")?;
    let s = *o.seed.get_or_insert(0);
    let mut out = Outputs::new(&ctx.out)?;

    if *o.mode.get_or_insert(RatesMode::Slope) == RatesMode::Scan {
        for (set, name) in [
            (o.fit_k.is_some(), "fit_k"),
            (o.n_grid.is_some(), "n_grid"),
            (o.reps.is_some(), "reps"),
            (o.estimator.is_some(), "estimator"),
            (o.iterations.is_some(), "iterations"),
            (o.lr.is_some(), "lr"),
            (o.lr_final.is_some(), "lr_final"),
            (o.restarts.is_some(), "restarts"),
            (o.mh_steps.is_some(), "mh_steps"),
        ] {
            if set {
                bail!("option `{name}` does not apply to --mode scan");
            }
        }
        let cfg = RatioScanConfig {
            eps_list: o.eps.get_or_insert_with(|| vec![0.1, 0.01]).clone(),
            trials_per_eps: positive(*o.trials.get_or_insert(50), "trials")?,
            n_mc,
            seed: s,
        };
        let rows = hellinger_voronoi_ratio_scan(&gstar, &cfg)?;
        let mut trials = String::from("eps,trial,loss,ratio,flagged\n");
        let mut summary = String::from("eps,min_ratio,median_ratio,flagged_trials\n");
        for r in &rows {
            for (t, (loss, ratio)) in r.losses.iter().zip(&r.ratios).enumerate() {
                trials += &format!(
                    "{},{t},{},{},{}\n",
                    fmt_f64(r.eps, ctx.round),
                    fmt_f64(*loss, ctx.round),
                    fmt_f64(*ratio, ctx.round),
                    r.flagged_trials.contains(&t)
                );
            }
            summary += &format!(
                "{},{},{},{}\n",
                fmt_f64(r.eps, ctx.round),
                fmt_f64(r.min_ratio, ctx.round),
                fmt_f64(r.median_ratio, ctx.round),
                r.flagged_trials.len()
            );
            println!(
                "eps {:>8}: min ratio {:.4}, median {:.4}, {} flagged",
                r.eps,
                r.min_ratio,
                r.median_ratio,
                r.flagged_trials.len()
            );
        }
        out.write("ratio_trials.csv", trials)?;
        out.write("ratio_summary.csv", summary)?;
        return Outcome::new("rates", s, &o, out);
    }

    for (set, name) in [(o.eps.is_some(), "eps"), (o.trials.is_some(), "trials")] {
        if set {
            bail!("option `{name}` applies only to --mode scan");
        }
    }
    let k_star = gstar.k();
    let k_fit = *o.fit_k.get_or_insert(k_star);
    if k_fit < k_star {
        bail!("fit_k = {k_fit} is below the true number of experts {k_star}");
    }
    let target = if k_fit == k_star {
        Target::ExactSpecified
    } else {
        Target::OverSpecified
    };
    let estimator = match *o.estimator.get_or_insert(EstimatorKind::ViMean) {
        EstimatorKind::ViMean => Estimator::ViMean,
        EstimatorKind::MhPosteriorMean => Estimator::MhPosteriorMean,
    };
    let lr = *o.lr.get_or_insert(0.05);
    let learning_rate = match *o.lr_final.get_or_insert(0.0005) {
        last if last == lr => LearningRate::constant(lr),
        last => LearningRate::Exponential { initial: lr, last },
    };
    let fit_cfg = FitConfig {
        family: *gstar.family(),
        ..FitConfig::new(*o.iterations.get_or_insert(3000), learning_rate, s)
    };
    let schedule = RateSchedule {
        n_grid: o.n_grid.get_or_insert_with(|| vec![200, 800, 3200]).clone(),
        replications_per_n: *o.reps.get_or_insert(10),
        target,
        estimator,
        k_fit: Some(k_fit),
        estimator_cfg: EstimatorConfig {
            mh_steps: *o.mh_steps.get_or_insert(20_000),
            restarts: positive(*o.restarts.get_or_insert(4), "restarts")?,
            ..EstimatorConfig::new(fit_cfg)
        },
        n_mc,
        tail_radius_m: 10.0,
        prior: PriorConfig::default(),
    };
    let result = match rate_experiment(&schedule, &gstar, s) {
        Ok(r) => r,
        Err(e @ Error::NonFinite { .. }) => {
            let mut outcome = Outcome::new("rates", s, &o, out)?;
            outcome.numerical_failure = Some(e.to_string());
            return Ok(outcome);
        }
        Err(e) => return Err(e.into()),
    };

    let r = ctx.round;
    let mut points = String::from(
        "n,replication,hellinger,hellinger_sq_std_error,voronoi,singleton_part,multi_part,tail_fraction,acceptance_rate\n",
    );
    for p in &result.points {
        points += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.n,
            p.replication,
            fmt_f64(p.hellinger, r),
            fmt_f64(p.hellinger_sq_std_error, r),
            fmt_f64(p.voronoi, r),
            fmt_f64(p.singleton_part, r),
            fmt_f64(p.multi_part, r),
            opt_num(p.tail_fraction, r),
            opt_num(p.acceptance_rate, r)
        );
    }
    let mut medians = String::from("n,hellinger,voronoi,singleton_part,multi_part\n");
    for m in &result.medians {
        medians += &format!(
            "{},{},{},{},{}\n",
            m.n,
            fmt_f64(m.hellinger, r),
            fmt_f64(m.voronoi, r),
            fmt_f64(m.singleton_part, r),
            fmt_f64(m.multi_part, r)
        );
    }
    let loss_name = if target == Target::ExactSpecified {
        "voronoi_l1"
    } else {
        "voronoi_l2"
    };
    let mut slopes = String::from("quantity,slope,std_error,intercept\n");
    slopes += &slope_row("hellinger", &result.hellinger_slope, r);
    slopes += &slope_row(loss_name, &result.voronoi_slope, r);
    if let Some(f) = &result.singleton_slope {
        slopes += &slope_row("singleton_part", f, r);
    }
    if let Some(f) = &result.multi_slope {
        slopes += &slope_row("multi_part", f, r);
    }
    out.write("points.csv", points)?;
    out.write("medians.csv", medians)?;
    out.write("slopes.csv", slopes)?;
    println!(
        "hellinger slope {:.3} (se {:.3}); {loss_name} slope {:.3} (se {:.3})",
        result.hellinger_slope.slope,
        result.hellinger_slope.std_error,
        result.voronoi_slope.slope,
        result.voronoi_slope.std_error
    );
    Outcome::new("rates", s, &o, out)
}

fn loss_row(name: &str, rep: &VoronoiLossReport<f64>, round: Option<usize>) -> String {
    let empty: Vec<String> = rep.empty_cells.iter().map(|j| j.to_string()).collect();
    format!(
        "{name},{},{},{},{},{}\n",
        fmt_f64(rep.total, round),
        fmt_f64(rep.weight_term, round),
        fmt_f64(rep.singleton_part(), round),
        fmt_f64(rep.multi_part(), round),
        empty.join(";")
    )
}

pub fn losses(ctx: &Context, flags: LossesOpts) -> Result<Outcome> {
    let mut o = layered(ctx, flags)?;
    let g = read_measure(Path::new(&required(o.g.clone(), "g")?))?;
    let gstar = read_measure(Path::new(&required(o.gstar.clone(), "gstar")?))?;
    let hellinger = *o.hellinger.get_or_insert(false);
    let s = *o.seed.get_or_insert(0);
    let l1 = loss_l1(&g, &gstar)?;
    let l2 = loss_l2(&g, &gstar)?;
    println!("L1 total: {}", fmt_f64(l1.total, ctx.round));
    println!("L2 total: {}", fmt_f64(l2.total, ctx.round));

    let mut out = Outputs::new(&ctx.out)?;
    let mut csv = String::from("loss,total,weight_term,singleton_part,multi_part,empty_cells\n");
    csv += &loss_row("l1", &l1, ctx.round);
    csv += &loss_row("l2", &l2, ctx.round);
    out.write("losses.csv", csv)?;
    if hellinger {
        let n_mc = positive(*o.n_mc.get_or_insert(smoge::divergences::DEFAULT_N_MC), "n_mc")?;
        let h = hellinger_sq_mc(&g, &gstar, n_mc, s)?;
        let d = h.value.max(0.0).sqrt();
        println!(
            "Hellinger: {} (d_H^2 std error {})",
            fmt_f64(d, ctx.round),
            fmt_f64(h.std_error, ctx.round)
        );
        out.write(
            "hellinger.csv",
            format!(
                "hellinger,hellinger_sq,std_error,n_mc\n{},{},{},{n_mc}\n",
                fmt_f64(d, ctx.round),
                fmt_f64(h.value, ctx.round),
                fmt_f64(h.std_error, ctx.round)
            ),
        )?;
    }
    Outcome::new("losses", s, &o, out)
}

pub fn identifiability(ctx: &Context, flags: IdentOpts) -> Result<Outcome> {
    let mut o = layered(ctx, flags)?;
    let family = family_of(*o.family.get_or_insert(FamilyKind::Linear), &mut o.level)?;
    let order = *o.order.get_or_insert(1);
    let d = positive(*o.d.get_or_insert(2), "d")?;
    let n_x = *o.n_x.get_or_insert(200);
    let s = *o.seed.get_or_insert(0);
    let beta = o
        .beta
        .get_or_insert_with(|| {
            let mut rng = seed::rng(s);
            (0..family.param_dim(d))
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .clone();
    let rep = strong_identifiability_test(&family, d, &beta, order, n_x, seed::derive(s, &[1]))?;
    let verdict = format!("{:?}", rep.verdict).to_lowercase();
    println!(
        "{} family, order {order}, d = {d}: {verdict} (sigma_min / sigma_max = {:.3e})",
        family.name(),
        rep.min_singular_value / rep.max_singular_value
    );
    let mut out = Outputs::new(&ctx.out)?;
    out.write(
        "identifiability.csv",
        format!(
            "family,order,d,n_x,feature_count,min_singular_value,max_singular_value,threshold,verdict\n{},{order},{d},{n_x},{},{},{},{},{verdict}\n",
            family.name(),
            rep.feature_count,
            fmt_f64(rep.min_singular_value, ctx.round),
            fmt_f64(rep.max_singular_value, ctx.round),
            fmt_f64(rep.threshold, None)
        ),
    )?;
    Outcome::new("identifiability", s, &o, out)
}
