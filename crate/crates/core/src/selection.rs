//! ELBO-based selection of the number of experts over simulated replications.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_dgp, Dataset, DgpSpec, ExpertFamily};
use crate::seed::{self, tag};
use crate::vi::{fit, FitConfig, LearningRate, PriorConfig};

/// Iteration budget scale. `Desk` divides the configured budgets by 5.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl Scale {
    pub fn iterations(self, base: usize) -> usize {
        match self {
            Self::Desk => (base / 5).max(1),
            Self::Paper => base,
        }
    }

    pub fn default_replications(self, full: usize) -> usize {
        match self {
            Self::Desk => 20,
            Self::Paper => full,
        }
    }
}

/// How the Adam learning rate depends on `(n, K)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LrRule {
    Constant {
        rate: f64,
    },
    /// Geometric grid over `n ∈ {10, 25, 50, 100}` and `K ∈ {1..4}` spanning
    /// `[0.0036, 0.015]`, smaller for larger `n` and `K`.
    B2Table,
    /// `base · n / 100`.
    Linear {
        base: f64,
    },
    /// `0.1 + 0.000015 n + 0.001 K`.
    B4Formula,
}

impl LrRule {
    pub fn rate(&self, n: usize, k: usize) -> f64 {
        match *self {
            Self::Constant { rate } => rate,
            Self::B2Table => {
                const N_GRID: [usize; 4] = [10, 25, 50, 100];
                let i_n = N_GRID.iter().rposition(|&g| g <= n).unwrap_or(0);
                let steps = (i_n + k.clamp(1, 4) - 1) as f64;
                0.015 * (0.0036f64 / 0.015).powf(steps / 6.0)
            }
            Self::Linear { base } => base * n as f64 / 100.0,
            Self::B4Formula => 0.1 + 0.000015 * n as f64 + 0.001 * k as f64,
        }
    }
}

/// Per-`(n, K)` fit settings shared by all candidates of a selection run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSchedule {
    pub family: ExpertFamily<f64>,
    /// Full budget; [`Scale::Desk`] divides it by 5.
    pub iterations: usize,
    pub learning_rate: LrRule,
    pub mc_samples_per_step: usize,
    pub final_elbo_samples: usize,
}

impl FitSchedule {
    /// Default schedule for each generator.
    pub fn for_dgp(dgp: &DgpSpec) -> Self {
        let (iterations, learning_rate) = match dgp {
            DgpSpec::B2 => (50_000, LrRule::B2Table),
            DgpSpec::B3 => (10_000, LrRule::Linear { base: 0.01 }),
            DgpSpec::B4 { k_star: 1, .. } => (10_000, LrRule::Constant { rate: 0.06 }),
            DgpSpec::B4 { .. } => (4_000, LrRule::B4Formula),
            DgpSpec::Smoge { .. } => (4_000, LrRule::Constant { rate: 0.01 }),
        };
        Self {
            family: ExpertFamily::Linear,
            iterations,
            learning_rate,
            mc_samples_per_step: 1,
            final_elbo_samples: 200,
        }
    }

    pub fn fit_config(&self, n: usize, k: usize, scale: Scale, seed: u64) -> FitConfig {
        FitConfig {
            family: self.family,
            iterations: scale.iterations(self.iterations),
            learning_rate: LearningRate::constant(self.learning_rate.rate(n, k)),
            mc_samples_per_step: self.mc_samples_per_step,
            final_elbo_samples: self.final_elbo_samples,
            ..FitConfig::new(1, LearningRate::constant(1.0), seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub dgp: DgpSpec,
    pub n: usize,
    pub candidates: Vec<usize>,
    pub replications: usize,
    pub schedule: FitSchedule,
    pub scale: Scale,
    pub master_seed: u64,
    #[serde(default)]
    pub prior: PriorConfig,
}

impl SelectionConfig {
    pub fn new(dgp: DgpSpec, n: usize, candidates: Vec<usize>, replications: usize, master_seed: u64) -> Self {
        Self {
            schedule: FitSchedule::for_dgp(&dgp),
            dgp,
            n,
            candidates,
            replications,
            scale: Scale::Desk,
            master_seed,
            prior: PriorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.candidates.is_empty() || self.candidates[0] == 0 {
            return Err(Error::Config("candidates must be non-empty and at least 1".into()));
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("candidates must be strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        self.prior.validate()?;
        self.schedule.fit_config(self.n, 1, self.scale, 0).validate()
    }

    pub fn data_seed(&self, replication: usize) -> u64 {
        seed::derive(self.master_seed, &[tag::DATA, replication as u64])
    }

    pub fn fit_seed(&self, replication: usize, k: usize) -> u64 {
        seed::derive(self.master_seed, &[tag::FIT, replication as u64, k as u64])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub winner: usize,
    /// Final ELBO per candidate, in candidate order.
    pub final_elbos: Vec<f64>,
    pub final_elbo_std_errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub replication: usize,
    pub k: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionResult {
    pub candidates: Vec<usize>,
    /// Wins per candidate over the completed replications.
    pub win_counts: Vec<usize>,
    pub win_proportions: Vec<f64>,
    pub replications: Vec<ReplicationOutcome>,
    pub failed: Vec<FailedReplication>,
    pub runtime_secs: f64,
}

impl SelectionResult {
    pub fn proportion_of(&self, k: usize) -> Option<f64> {
        self.candidates
            .iter()
            .position(|&c| c == k)
            .map(|i| self.win_proportions[i])
    }

    /// Candidate with the largest win proportion, ties to the smaller `K`;
    /// `None` when no replication completed.
    pub fn modal_winner(&self) -> Option<usize> {
        if self.win_counts.iter().all(|&c| c == 0) {
            return None;
        }
        argmax_first(&self.win_proportions).map(|i| self.candidates[i])
    }
}

fn argmax_first(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|b| *x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Fits every candidate `K` on every replication and tallies argmax-ELBO
/// winners. Work is spread over the rayon pool; the fold is ordered by
/// `(replication, K)` so the result does not depend on scheduling.
pub fn run_selection(cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let start = Instant::now();
    let datasets: Vec<Result<Dataset<f64>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| sample_dgp(&cfg.dgp, cfg.n, cfg.data_seed(r)))
        .collect();
    let datasets: Vec<Dataset<f64>> = datasets.into_iter().collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.replications)
        .flat_map(|r| cfg.candidates.iter().map(move |&k| (r, k)))
        .collect();
    let fits: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(r, k)| {
            let fc = cfg.schedule.fit_config(cfg.n, k, cfg.scale, cfg.fit_seed(r, k));
            fit(&datasets[r], k, &cfg.prior, &fc).map(|f| (f.final_elbo, f.final_elbo_std_error))
        })
        .collect();

    let nk = cfg.candidates.len();
    let mut replications = Vec::new();
    let mut failed = Vec::new();
    let mut win_counts = vec![0usize; nk];
    for r in 0..cfg.replications {
        let chunk = &fits[r * nk..(r + 1) * nk];
        if let Some((i, Err(e))) = chunk.iter().enumerate().find(|(_, f)| f.is_err()) {
            failed.push(FailedReplication {
                replication: r,
                k: cfg.candidates[i],
                message: e.to_string(),
            });
            continue;
        }
        let (elbos, ses): (Vec<f64>, Vec<f64>) = chunk.iter().map(|f| *f.as_ref().unwrap()).unzip();
        let w = argmax_first(&elbos).expect("non-empty candidates");
        win_counts[w] += 1;
        replications.push(ReplicationOutcome {
            replication: r,
            winner: cfg.candidates[w],
            final_elbos: elbos,
            final_elbo_std_errors: ses,
        });
    }
    let done = replications.len();
    let win_proportions = win_counts
        .iter()
        .map(|&c| if done == 0 { 0.0 } else { c as f64 / done as f64 })
        .collect();
    Ok(SelectionResult {
        candidates: cfg.candidates.clone(),
        win_counts,
        win_proportions,
        replications,
        failed,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn default_n_grid(dgp: &DgpSpec) -> Vec<usize> {
    match dgp {
        DgpSpec::B3 => vec![100, 500, 1000, 2000],
        _ => vec![10, 25, 50, 100],
    }
}

pub fn default_candidates(dgp: &DgpSpec) -> Vec<usize> {
    match dgp {
        DgpSpec::B2 => (1..=4).collect(),
        DgpSpec::B3 => (1..=6).collect(),
        _ => (1..=7).collect(),
    }
}

/// One selection run per sample size; the run at `n` uses master seed
/// `derive(master_seed, [n])`.
pub fn run_sweep(
    dgp: &DgpSpec,
    n_grid: &[usize],
    candidates: &[usize],
    replications: usize,
    master_seed: u64,
    scale: Scale,
) -> Result<Vec<(usize, SelectionResult)>> {
    if !matches!(dgp, DgpSpec::B2 | DgpSpec::B3) {
        return Err(Error::Config(format!(
            "sweeps are defined for b2 and b3, not {}",
            dgp.id()
        )));
    }
    n_grid
        .iter()
        .map(|&n| {
            let mut cfg = SelectionConfig::new(
                dgp.clone(),
                n,
                candidates.to_vec(),
                replications,
                seed::derive(master_seed, &[n as u64]),
            );
            cfg.scale = scale;
            run_selection(&cfg).map(|r| (n, r))
        })
        .collect()
}

/// One row of a win-proportion table.
#[derive(Clone, Debug)]
pub struct TableRow<'a> {
    pub label: String,
    pub d: usize,
    pub k_star: usize,
    pub n: usize,
    pub result: &'a SelectionResult,
}

/// Renders rows as CSV and as an aligned text table. Columns are the union
/// of candidates, values are win proportions to two decimals, and the text
/// table marks each row's argmax with `*`.
pub fn emit_table(rows: &[TableRow<'_>]) -> (String, String) {
    let mut ks: Vec<usize> = rows.iter().flat_map(|r| r.result.candidates.iter().copied()).collect();
    ks.sort_unstable();
    ks.dedup();

    let mut header: Vec<String> = ["dgp", "d", "k_star", "n"].iter().map(|s| s.to_string()).collect();
    header.extend(ks.iter().map(|k| format!("K={k}")));
    header.push("argmax".into());

    let mut table: Vec<Vec<String>> = vec![header.clone()];
    let mut csv = header.join(",") + "\n";
    for row in rows {
        let winner = row.result.modal_winner();
        let mut cells = vec![
            row.label.clone(),
            row.d.to_string(),
            row.k_star.to_string(),
            row.n.to_string(),
        ];
        let mut text_cells = cells.clone();
        for k in &ks {
            match row.result.proportion_of(*k) {
                Some(p) => {
                    cells.push(format!("{p:.2}"));
                    text_cells.push(if Some(*k) == winner {
                        format!("*{p:.2}")
                    } else {
                        format!("{p:.2}")
                    });
                }
                None => {
                    cells.push(String::new());
                    text_cells.push("-".into());
                }
            }
        }
        let w = winner.map(|k| k.to_string()).unwrap_or_default();
        cells.push(w.clone());
        text_cells.push(w);
        csv += &(cells.join(",") + "\n");
        table.push(text_cells);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for r in &table {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        text += line.join("  ").trim_end();
        text.push('\n');
    }
    (csv, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(dgp: DgpSpec, n: usize, candidates: Vec<usize>, reps: usize) -> SelectionConfig {
        let mut cfg = SelectionConfig::new(dgp, n, candidates, reps, 42);
        cfg.schedule.iterations = 250;
        cfg.schedule.final_elbo_samples = 20;
        cfg
    }

    #[test]
    fn b2_table_spans_documented_range() {
        let r = LrRule::B2Table;
        assert!((r.rate(10, 1) - 0.015).abs() < 1e-15);
        assert!((r.rate(100, 4) - 0.0036).abs() < 1e-15);
        assert!(r.rate(50, 2) < r.rate(25, 2));
        assert!(r.rate(50, 3) < r.rate(50, 2));
    }

    #[test]
    fn b4_formula_and_baseline() {
        assert!((LrRule::B4Formula.rate(500, 2) - (0.1 + 0.0075 + 0.002)).abs() < 1e-15);
        let s = FitSchedule::for_dgp(&DgpSpec::B4 {
            separation: 5.0,
            d: 2,
            k_star: 1,
        });
        assert_eq!(s.iterations, 10_000);
        assert_eq!(s.learning_rate.rate(500, 3), 0.06);
        let s = FitSchedule::for_dgp(&DgpSpec::B4 {
            separation: 5.0,
            d: 2,
            k_star: 2,
        });
        assert_eq!(Scale::Desk.iterations(s.iterations), 800);
    }

    #[test]
    fn single_candidate_always_wins() {
        let r = run_selection(&quick(DgpSpec::B2, 30, vec![3], 3)).unwrap();
        assert_eq!(r.win_proportions, vec![1.0]);
        assert_eq!(r.win_counts, vec![3]);
    }

    #[test]
    fn one_replication_gives_zero_one_proportions() {
        let r = run_selection(&quick(DgpSpec::B2, 30, vec![1, 2], 1)).unwrap();
        assert!(r.win_proportions.iter().all(|p| *p == 0.0 || *p == 1.0));
        assert!((r.win_proportions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reproducible_and_seed_isolated() {
        let cfg = quick(DgpSpec::B2, 25, vec![1, 2], 3);
        let a = run_selection(&cfg).unwrap();
        let b = run_selection(&cfg).unwrap();
        assert_eq!(a.replications, b.replications);
        assert_eq!(a.win_counts, b.win_counts);
        assert_ne!(cfg.data_seed(0), cfg.data_seed(1));
        assert_ne!(cfg.fit_seed(0, 1), cfg.fit_seed(0, 2));
        assert_ne!(cfg.fit_seed(0, 1), cfg.fit_seed(1, 1));
    }

    #[test]
    fn invalid_candidates_rejected() {
        for c in [vec![], vec![0, 1], vec![2, 2], vec![3, 1]] {
            assert!(run_selection(&quick(DgpSpec::B2, 10, c, 1)).is_err());
        }
        assert!(run_selection(&quick(DgpSpec::B2, 10, vec![1], 0)).is_err());
    }

    #[test]
    fn table_shapes() {
        let (csv, _) = emit_table(&[]);
        assert_eq!(csv, "dgp,d,k_star,n,argmax\n");

        let single = SelectionResult {
            candidates: vec![3],
            win_counts: vec![2],
            win_proportions: vec![1.0],
            replications: vec![],
            failed: vec![],
            runtime_secs: 0.0,
        };
        let (csv, text) = emit_table(&[TableRow {
            label: "b2".into(),
            d: 2,
            k_star: 2,
            n: 10,
            result: &single,
        }]);
        assert_eq!(csv.lines().nth(1).unwrap(), "b2,2,2,10,1.00,3");
        assert!(text.contains("*1.00"));

        let seven = SelectionResult {
            candidates: (1..=7).collect(),
            win_counts: vec![0, 3, 1, 0, 0, 0, 0],
            win_proportions: vec![0.0, 0.75, 0.25, 0.0, 0.0, 0.0, 0.0],
            replications: vec![],
            failed: vec![],
            runtime_secs: 0.0,
        };
        let rows: Vec<TableRow<'_>> = (0..3)
            .map(|i| TableRow {
                label: "b4".into(),
                d: 2,
                k_star: i + 1,
                n: 500,
                result: &seven,
            })
            .collect();
        let (csv, _) = emit_table(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 4 + 7 + 1));
        assert!(lines[1].ends_with(",2"));
    }
}
