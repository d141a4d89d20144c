//! Monte Carlo risk experiments, comparative demonstrations, and CSV/JSON
//! emission.

use crate::estimators::{
    estimate_known_q, estimate_unknown_q, estimate_unknown_q_origin_only, mle_known_q,
    mle_unknown_q, EstimatorConfig,
};
use crate::prob::{
    l1_exact, near, point_mass_mix, sample_multinomial, sample_poissonized, uniform, zipf,
    CountVector, Distribution,
};
use crate::rng::RngSeed;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Estimators the experiment runner can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MleKnownQ,
    OptKnownQ,
    MleUnknownQ,
    OptUnknownQ,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::MleKnownQ => "mle_known_q",
            EstimatorKind::OptKnownQ => "opt_known_q",
            EstimatorKind::MleUnknownQ => "mle_unknown_q",
            EstimatorKind::OptUnknownQ => "opt_unknown_q",
        }
    }

    fn needs_y(self) -> bool {
        matches!(
            self,
            EstimatorKind::MleUnknownQ | EstimatorKind::OptUnknownQ
        )
    }

    /// Fixed stream tag, so adding estimators to a spec never shifts the
    /// randomness of the others.
    fn stream_tag(self) -> u64 {
        match self {
            EstimatorKind::MleKnownQ => 10,
            EstimatorKind::OptKnownQ => 11,
            EstimatorKind::MleUnknownQ => 12,
            EstimatorKind::OptUnknownQ => 13,
        }
    }
}

/// Distribution families for experiment fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilySpec {
    Uniform,
    Zipf {
        exponent: f64,
    },
    PointMassMix {
        gamma: f64,
    },
    /// `P` at exact L1 distance `delta` from the cell's `Q`; valid only for
    /// the `P` side of a spec.
    NearQ {
        delta: f64,
    },
}

impl FamilySpec {
    pub fn build(&self, s: usize, q: Option<&Distribution>) -> Result<Distribution> {
        match *self {
            FamilySpec::Uniform => uniform(s),
            FamilySpec::Zipf { exponent } => zipf(s, exponent),
            FamilySpec::PointMassMix { gamma } => point_mass_mix(s, gamma),
            FamilySpec::NearQ { delta } => {
                let q = q.ok_or_else(|| {
                    Error::InvalidParameter("near_q is only valid for the P side".into())
                })?;
                near(q, delta)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingModel {
    Poissonized,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub s: usize,
    pub n: f64,
}

/// A full experiment: estimators × grid cells × trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub estimators: Vec<EstimatorKind>,
    pub p_family: FamilySpec,
    pub q_family: FamilySpec,
    pub grid: Vec<GridCell>,
    pub trials: usize,
    pub seed: u64,
    pub sampling: SamplingModel,
    pub config: EstimatorConfig,
    #[serde(default)]
    pub keep_estimates: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("grid must be non-empty".into()));
        }
        self.config.validate()
    }
}

/// Per-(estimator, cell) risk summary. `mse` is the empirical mean squared
/// error around the true distance; `variance` uses the population divisor,
/// so `mse = bias² + variance` holds as an identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub estimator: String,
    pub s: usize,
    pub n: f64,
    pub trials: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub mse_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<f64>>,
}

impl RiskRow {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }

    /// Standard error of the RMSE, propagated from the MSE standard error.
    pub fn rmse_se(&self) -> f64 {
        if self.mse > 0.0 {
            self.mse_se / (2.0 * self.mse.sqrt())
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
}

pub(crate) fn summarize(
    name: &str,
    cell: GridCell,
    truth: f64,
    estimates: &[f64],
    keep: bool,
) -> RiskRow {
    let t = estimates.len();
    let mean = crate::estimators::pairwise_sum(estimates) / t as f64;
    let sq_errs: Vec<f64> = estimates
        .iter()
        .map(|e| (e - truth) * (e - truth))
        .collect();
    let mse = crate::estimators::pairwise_sum(&sq_errs) / t as f64;
    let bias = mean - truth;
    let centered: Vec<f64> = estimates.iter().map(|e| (e - mean) * (e - mean)).collect();
    let variance = crate::estimators::pairwise_sum(&centered) / t as f64;
    let mse_se = if t > 1 {
        let dev: Vec<f64> = sq_errs.iter().map(|v| (v - mse) * (v - mse)).collect();
        (crate::estimators::pairwise_sum(&dev) / (t as f64 - 1.0)).sqrt() / (t as f64).sqrt()
    } else {
        0.0
    };
    RiskRow {
        estimator: name.to_string(),
        s: cell.s,
        n: cell.n,
        trials: t,
        truth,
        mean,
        bias,
        variance,
        mse,
        mse_se,
        estimates: if keep { Some(estimates.to_vec()) } else { None },
    }
}

fn sample(model: SamplingModel, dist: &Distribution, n: f64, seed: RngSeed) -> Result<CountVector> {
    match model {
        SamplingModel::Poissonized => sample_poissonized(dist, n, seed),
        SamplingModel::Multinomial => {
            let rounded = n.round();
            if rounded < 1.0 {
                return Err(Error::InvalidParameter("multinomial needs n >= 1".into()));
            }
            sample_multinomial(dist, rounded as u64, seed)
        }
    }
}

/// Runs the experiment grid. Per-trial streams are derived from
/// `(seed, cell index, trial index)`, and trial results are reduced in
/// index order, so reports are identical across runs and thread counts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RiskReport> {
    spec.validate()?;
    let root = RngSeed::new(spec.seed);
    let need_y = spec.estimators.iter().any(|e| e.needs_y());
    let mut rows = Vec::new();
    for (ci, &cell) in spec.grid.iter().enumerate() {
        let wrap = |e: Error| Error::CellFailure {
            s: cell.s,
            n: cell.n,
            source: Box::new(e),
        };
        let q = spec.q_family.build(cell.s, None).map_err(wrap)?;
        let p = spec.p_family.build(cell.s, Some(&q)).map_err(wrap)?;
        let truth = l1_exact(&p, &q).map_err(wrap)?;
        let cell_seed = root.child(ci as u64);

        let per_trial: Vec<Result<Vec<f64>>> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                let trial_seed = cell_seed.child(trial as u64);
                let x = sample(spec.sampling, &p, cell.n, trial_seed.child(0))?;
                let y = if need_y {
                    Some(sample(spec.sampling, &q, cell.n, trial_seed.child(1))?)
                } else {
                    None
                };
                spec.estimators
                    .iter()
                    .map(|&kind| {
                        let split_seed = trial_seed.child(kind.stream_tag());
                        match kind {
                            EstimatorKind::MleKnownQ => mle_known_q(&x, &q),
                            EstimatorKind::OptKnownQ => {
                                estimate_known_q(&x, &q, &spec.config, split_seed)
                                    .map(|o| o.estimate)
                            }
                            EstimatorKind::MleUnknownQ => {
                                mle_unknown_q(&x, y.as_ref().expect("sampled"))
                            }
                            EstimatorKind::OptUnknownQ => estimate_unknown_q(
                                &x,
                                y.as_ref().expect("sampled"),
                                &spec.config,
                                split_seed,
                            )
                            .map(|o| o.estimate),
                        }
                    })
                    .collect()
            })
            .collect();

        let mut columns: Vec<Vec<f64>> =
            vec![Vec::with_capacity(spec.trials); spec.estimators.len()];
        for trial in per_trial {
            let values = trial.map_err(wrap)?;
            for (col, v) in columns.iter_mut().zip(values) {
                col.push(v);
            }
        }
        for (kind, estimates) in spec.estimators.iter().zip(&columns) {
            rows.push(summarize(
                kind.name(),
                cell,
                truth,
                estimates,
                spec.keep_estimates,
            ));
        }
    }
    Ok(RiskReport { rows })
}

/// Output of the effective-sample-size-enlargement comparison: the optimal
/// estimator at budget `n` against the MLE at `n` and at `n ⌈ln n⌉`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnlargementRecord {
    pub s: usize,
    pub n: f64,
    pub n_enlarged: f64,
    pub trials: usize,
    pub rmse_opt_at_n: f64,
    pub rmse_opt_se: f64,
    pub rmse_mle_at_n: f64,
    pub rmse_mle_se: f64,
    pub rmse_mle_enlarged: f64,
    pub rmse_mle_enlarged_se: f64,
    /// RMSE(opt @ n) / RMSE(MLE @ n ⌈ln n⌉).
    pub ratio_opt_vs_enlarged_mle: f64,
}

/// Which estimator pair an enlargement or failure demo compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoMode {
    KnownQ,
    UnknownQ,
}

/// RMSE of the optimal estimator at budget `n` versus the MLE at budgets
/// `n` and `n ⌈ln n⌉`, all at `P = Q = uniform(S)`.
pub fn demo_enlargement(
    s: usize,
    n: f64,
    trials: usize,
    cfg: &EstimatorConfig,
    mode: DemoMode,
    seed: u64,
) -> Result<EnlargementRecord> {
    let n_enlarged = n * n.ln().ceil();
    let (opt, mle) = match mode {
        DemoMode::KnownQ => (EstimatorKind::OptKnownQ, EstimatorKind::MleKnownQ),
        DemoMode::UnknownQ => (EstimatorKind::OptUnknownQ, EstimatorKind::MleUnknownQ),
    };
    let spec = ExperimentSpec {
        estimators: vec![opt, mle],
        p_family: FamilySpec::Uniform,
        q_family: FamilySpec::Uniform,
        grid: vec![GridCell { s, n }, GridCell { s, n: n_enlarged }],
        trials,
        seed,
        sampling: SamplingModel::Poissonized,
        config: *cfg,
        keep_estimates: false,
    };
    let report = run_experiment(&spec)?;
    let find = |name: &str, budget: f64| {
        report
            .rows
            .iter()
            .find(|r| r.estimator == name && r.n == budget)
            .expect("row present")
            .clone()
    };
    let opt_row = find(opt.name(), n);
    let mle_row = find(mle.name(), n);
    let mle_big = find(mle.name(), n_enlarged);
    Ok(EnlargementRecord {
        s,
        n,
        n_enlarged,
        trials,
        rmse_opt_at_n: opt_row.rmse(),
        rmse_opt_se: opt_row.rmse_se(),
        rmse_mle_at_n: mle_row.rmse(),
        rmse_mle_se: mle_row.rmse_se(),
        rmse_mle_enlarged: mle_big.rmse(),
        rmse_mle_enlarged_se: mle_big.rmse_se(),
        ratio_opt_vs_enlarged_mle: opt_row.rmse() / mle_big.rmse(),
    })
}

/// One row of the plug-in comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PluginRow {
    pub name: String,
    pub instance: String,
    pub rmse: f64,
    pub rmse_se: f64,
}

/// Plug-in variants `L1(g(P_n), Q)` against the optimal known-`Q`
/// estimator, scored per instance and in the worst case over instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PluginFailureRecord {
    pub s: usize,
    pub n: f64,
    pub trials: usize,
    pub rows: Vec<PluginRow>,
    /// Per estimator, the row of its worst instance. Plug-in suboptimality
    /// is a worst-case statement: a rule that smooths toward uniform wins
    /// the uniform instance and loses the point-mass one.
    pub worst_case: Vec<PluginRow>,
    /// The `sqrt(S/n)` rate every plug-in is stuck at.
    pub reference_rate: f64,
}

fn l1_against(probs: &[f64], q: &Distribution) -> f64 {
    let terms: Vec<f64> = probs
        .iter()
        .zip(q.probs())
        .map(|(g, qi)| (g - qi).abs())
        .collect();
    crate::estimators::pairwise_sum(&terms)
}

/// Identity, add-one smoothing, and a Good-Turing-style missing-mass shift,
/// against the optimal known-`Q` estimator on three instances: `P = Q =
/// uniform`, `P = Q = point mass`, and the adversarial `alternating_zero`
/// (P puts `2/S` on even symbols and nothing on odd ones, Q uniform).
/// Smoothing rules win the instances that match their prior and lose the
/// adversarial one; the optimal estimator holds up everywhere because it
/// reacts to `Q`.
pub fn demo_plugin_failure(
    s: usize,
    n: f64,
    trials: usize,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<PluginFailureRecord> {
    let alternating: Vec<f64> = (0..s).map(|i| if i % 2 == 0 { 2.0 } else { 0.0 }).collect();
    let instances = [
        ("uniform", uniform(s)?, uniform(s)?),
        (
            "point_mass",
            point_mass_mix(s, 1.0)?,
            point_mass_mix(s, 1.0)?,
        ),
        (
            "alternating_zero",
            Distribution::from_weights(&alternating)?,
            uniform(s)?,
        ),
    ];
    let cell = GridCell { s, n };
    let names = [
        "plugin_identity",
        "plugin_add_one",
        "plugin_good_turing",
        "opt_known_q",
    ];

    let mut rows: Vec<PluginRow> = Vec::new();
    for (ci, (instance, p, q)) in instances.iter().enumerate() {
        let truth = l1_exact(p, q)?;
        // Stream layout mirrors run_experiment's per-cell derivation, so
        // the identity plug-in reproduces an mle_known_q run bit for bit.
        let cell_seed = RngSeed::new(seed).child(ci as u64);
        let mut estimates: [Vec<f64>; 4] = Default::default();
        for trial in 0..trials {
            let trial_seed = cell_seed.child(trial as u64);
            let x = sample_poissonized(p, n, trial_seed.child(0))?;
            let emp: Vec<f64> = (0..s).map(|i| x.empirical(i)).collect();
            estimates[0].push(l1_against(&emp, q));

            let total: u64 = x.counts.iter().sum();
            let smooth: Vec<f64> = x
                .counts
                .iter()
                .map(|&c| (c as f64 + 1.0) / (total as f64 + s as f64))
                .collect();
            estimates[1].push(l1_against(&smooth, q));

            // Good-Turing-style: scale seen mass by (1 - N1/n), spread the
            // missing-mass estimate N1/n uniformly over unseen symbols.
            let singletons = x.counts.iter().filter(|&&c| c == 1).count() as f64;
            let unseen = x.counts.iter().filter(|&&c| c == 0).count();
            let missing = (singletons / n).min(1.0);
            let gt: Vec<f64> = if unseen == 0 {
                emp.clone()
            } else {
                x.counts
                    .iter()
                    .map(|&c| {
                        if c == 0 {
                            missing / unseen as f64
                        } else {
                            (1.0 - missing) * c as f64 / n
                        }
                    })
                    .collect()
            };
            estimates[2].push(l1_against(&gt, q));

            estimates[3].push(
                estimate_known_q(
                    &x,
                    q,
                    cfg,
                    trial_seed.child(EstimatorKind::OptKnownQ.stream_tag()),
                )?
                .estimate,
            );
        }
        for (name, series) in names.iter().zip(&estimates) {
            let row = summarize(name, cell, truth, series, false);
            rows.push(PluginRow {
                name: name.to_string(),
                instance: instance.to_string(),
                rmse: row.rmse(),
                rmse_se: row.rmse_se(),
            });
        }
    }

    let worst_case = names
        .iter()
        .map(|name| {
            rows.iter()
                .filter(|r| &r.name == name)
                .max_by(|a, b| a.rmse.total_cmp(&b.rmse))
                .expect("instance rows present")
                .clone()
        })
        .collect();

    Ok(PluginFailureRecord {
        s,
        n,
        trials,
        rows,
        worst_case,
        reference_rate: (s as f64 / n).sqrt(),
    })
}

/// Comparison of the full unknown-`Q` construction against the crippled
/// variant that only approximates on the origin square.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OriginOnlyRecord {
    pub s: usize,
    pub n: f64,
    pub trials: usize,
    /// Per-symbol mass of the hard instance, `c ln n / n`.
    pub symbol_mass: f64,
    pub heavy_symbols: usize,
    pub rmse_full: f64,
    pub rmse_full_se: f64,
    pub rmse_origin_only: f64,
    pub rmse_origin_only_se: f64,
}

/// The hard instance: as many symbols of mass `c ln n / n` as fit, the
/// remainder on one extra symbol, zero-padded to support `s`.
pub fn hard_instance(s: usize, n: f64, c: f64) -> Result<Distribution> {
    if !(n > 1.0) {
        return Err(Error::RateTooSmall(n, 1.0));
    }
    let mass = c * n.ln() / n;
    if mass >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "symbol mass {mass} >= 1; raise n"
        )));
    }
    let heavy = (1.0 / mass).floor() as usize;
    let remainder = 1.0 - heavy as f64 * mass;
    let mut weights = vec![mass; heavy];
    if remainder > 1e-12 {
        weights.push(remainder);
    }
    if weights.len() > s {
        return Err(Error::InvalidParameter(format!(
            "support {s} too small for the hard instance ({} symbols)",
            weights.len()
        )));
    }
    weights.resize(s, 0.0);
    Distribution::from_weights(&weights)
}

/// Runs a crippled unknown-`Q` construction (plug-in everywhere outside the
/// origin square, no stripe case) against the full construction on the hard
/// instance `P = Q = hard_instance(s, n, c)`.
pub fn demo_origin_only(
    s: usize,
    n: f64,
    trials: usize,
    cfg: &EstimatorConfig,
    c: Option<f64>,
    seed: u64,
) -> Result<OriginOnlyRecord> {
    let c = c.unwrap_or(3.0 * cfg.c1);
    let p = hard_instance(s, n, c)?;
    let root = RngSeed::new(seed);
    let cell = GridCell { s, n };
    let mut full = Vec::with_capacity(trials);
    let mut crippled = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = root.child(trial as u64);
        let x = sample_poissonized(&p, n, trial_seed.child(0))?;
        let y = sample_poissonized(&p, n, trial_seed.child(1))?;
        let split_seed = trial_seed.child(EstimatorKind::OptUnknownQ.stream_tag());
        full.push(estimate_unknown_q(&x, &y, cfg, split_seed)?.estimate);
        crippled.push(estimate_unknown_q_origin_only(&x, &y, cfg, split_seed)?.estimate);
    }
    let full_row = summarize("opt_unknown_q", cell, 0.0, &full, false);
    let crippled_row = summarize("origin_only", cell, 0.0, &crippled, false);
    Ok(OriginOnlyRecord {
        s,
        n,
        trials,
        symbol_mass: c * n.ln() / n,
        heavy_symbols: (n / (c * n.ln())).floor() as usize,
        rmse_full: full_row.rmse(),
        rmse_full_se: full_row.rmse_se(),
        rmse_origin_only: crippled_row.rmse(),
        rmse_origin_only_se: crippled_row.rmse_se(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

/// Writes a report. CSV columns:
/// `estimator,S,n,trials,mean,bias,variance,mse,mse_se`; floats carry 17
/// significant digits so the file round-trips. JSON mirrors the report.
pub fn emit(report: &RiskReport, format: EmitFormat, path: &Path) -> Result<()> {
    match format {
        EmitFormat::Json => {
            std::fs::write(path, serde_json::to_string_pretty(report)?)?;
        }
        EmitFormat::Csv => {
            let mut out = String::from("estimator,S,n,trials,mean,bias,variance,mse,mse_se\n");
            for r in &report.rows {
                out.push_str(&format!(
                    "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    r.estimator, r.s, r.n, r.trials, r.mean, r.bias, r.variance, r.mse, r.mse_se
                ));
            }
            std::fs::write(path, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            estimators: vec![EstimatorKind::MleKnownQ, EstimatorKind::OptKnownQ],
            p_family: FamilySpec::Uniform,
            q_family: FamilySpec::Uniform,
            grid: vec![GridCell { s: 20, n: 60.0 }, GridCell { s: 20, n: 240.0 }],
            trials: 24,
            seed: 9,
            sampling: SamplingModel::Poissonized,
            config: EstimatorConfig::default(),
            keep_estimates: false,
        }
    }

    #[test]
    fn report_rows_and_decomposition() {
        let report = run_experiment(&tiny_spec()).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert!((row.mse - (row.bias * row.bias + row.variance)).abs() < 1e-9);
            assert!(row.mse >= 0.0 && row.mse_se >= 0.0);
        }
    }

    #[test]
    fn truth_constant_has_zero_mse() {
        let row = summarize("const", GridCell { s: 3, n: 5.0 }, 0.75, &[0.75], false);
        assert_eq!(row.mse, 0.0);
        assert_eq!(row.bias, 0.0);
    }

    #[test]
    fn mse_is_nonincreasing_in_n_for_every_estimator() {
        let report = run_experiment(&tiny_spec()).unwrap();
        for name in ["mle_known_q", "opt_known_q"] {
            let at = |n: f64| {
                report
                    .rows
                    .iter()
                    .find(|r| r.estimator == name && r.n == n)
                    .unwrap()
                    .clone()
            };
            let small = at(60.0);
            let large = at(240.0);
            assert!(
                large.mse <= small.mse + 3.0 * (small.mse_se + large.mse_se),
                "{name} mse did not shrink: {} -> {}",
                small.mse,
                large.mse
            );
        }
    }

    #[test]
    fn reports_are_deterministic_across_thread_counts() {
        let spec = tiny_spec();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec).unwrap());
        let again = run_experiment(&spec).unwrap();
        assert_eq!(single, four);
        assert_eq!(single, again);
    }

    #[test]
    fn multinomial_model_runs() {
        let mut spec = tiny_spec();
        spec.sampling = SamplingModel::Multinomial;
        spec.estimators = vec![EstimatorKind::MleUnknownQ, EstimatorKind::OptUnknownQ];
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert!(row.mse.is_finite());
        }
    }

    #[test]
    fn emit_csv_and_json_round_trip() {
        let report = run_experiment(&tiny_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json_path = dir.path().join("report.json");
        emit(&report, EmitFormat::Json, &json_path).unwrap();
        let back: RiskReport =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(report, back);

        let csv_path = dir.path().join("report.csv");
        emit(&report, EmitFormat::Csv, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + report.rows.len());
        assert_eq!(
            lines[0],
            "estimator,S,n,trials,mean,bias,variance,mse,mse_se"
        );

        // Empty grid -> header-only CSV.
        let empty = RiskReport { rows: vec![] };
        emit(&empty, EmitFormat::Csv, &csv_path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&csv_path).unwrap().lines().count(),
            1
        );
    }

    #[test]
    fn validation_rejects_degenerate_specs() {
        let mut spec = tiny_spec();
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = tiny_spec();
        spec.grid.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn hard_instance_shapes() {
        let n = 3000.0;
        let c = 6.0;
        let p = hard_instance(64, n, c).unwrap();
        let mass = c * n.ln() / n;
        assert_eq!(p.support_size(), 64);
        assert!((p.probs()[0] - mass).abs() < 1e-12);
        let sum: f64 = p.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(hard_instance(2, n, c).is_err());
    }

    #[test]
    fn enlargement_demo_shape() {
        let cfg = EstimatorConfig::default();
        let record = demo_enlargement(50, 40.0, 16, &cfg, DemoMode::KnownQ, 3).unwrap();
        assert!(record.rmse_opt_at_n >= 0.0);
        assert!(record.rmse_mle_at_n >= 0.0);
        assert!(record.rmse_mle_enlarged >= 0.0);
        // More data can only help the MLE here.
        assert!(record.rmse_mle_enlarged < record.rmse_mle_at_n);
        assert!((record.n_enlarged - 40.0 * 40f64.ln().ceil()).abs() < 1e-12);
    }

    #[test]
    fn plugin_demo_identity_equals_mle() {
        // The identity plug-in IS the MLE; cross-check through the runner.
        let cfg = EstimatorConfig::default();
        let record = demo_plugin_failure(30, 30.0, 12, &cfg, 4).unwrap();
        let spec = ExperimentSpec {
            estimators: vec![EstimatorKind::MleKnownQ],
            p_family: FamilySpec::Uniform,
            q_family: FamilySpec::Uniform,
            grid: vec![GridCell { s: 30, n: 30.0 }],
            trials: 12,
            seed: 4,
            sampling: SamplingModel::Poissonized,
            config: cfg,
            keep_estimates: false,
        };
        let report = run_experiment(&spec).unwrap();
        let identity = record
            .rows
            .iter()
            .find(|r| r.name == "plugin_identity" && r.instance == "uniform")
            .unwrap();
        assert!((identity.rmse - report.rows[0].rmse()).abs() < 1e-12);
    }
}
