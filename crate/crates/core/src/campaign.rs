//! Batch runs over random inputs with JSON-lines and CSV reports.
//!
//! Each trial draws its inputs from a ChaCha stream selected by `(mode, trial)`
//! under the master seed, so reports are byte-identical across runs and
//! independent of the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cz::{cz_decompose, weak11_certify, Weak11Operator};
use crate::domination::{
    dominate_avg, dominate_oscillation, dominate_square, dominate_weighted, lerner_decompose,
    DominationCertificate, StoppingParams,
};
use crate::dyadic::{DyadicInterval, Signal};
use crate::error::{invalid, Result};
use crate::generate::{
    random_multiplier, random_sparse_collection, weight_with_a2, SignalKind, WeightKind,
};
use crate::hardy::{atomic_decompose, hardy_uniformity};
use crate::maximal::{maximal, MaximalKind};
use crate::sparse::{carleson_constant, sparse_vs_carleson};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignMode {
    Avg,
    Square,
    Weighted,
    Osc,
    Atoms,
    Cz,
    Weak11,
    Spmodel,
    Lerner,
}

impl CampaignMode {
    pub const ALL: [CampaignMode; 9] = [
        CampaignMode::Avg,
        CampaignMode::Square,
        CampaignMode::Weighted,
        CampaignMode::Osc,
        CampaignMode::Atoms,
        CampaignMode::Cz,
        CampaignMode::Weak11,
        CampaignMode::Spmodel,
        CampaignMode::Lerner,
    ];

    fn stream(self) -> u64 {
        CampaignMode::ALL
            .iter()
            .position(|&m| m == self)
            .expect("listed") as u64
    }
}

impl fmt::Display for CampaignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    pub p: f64,
    pub q: f64,
    /// Defaults to `p / 2`.
    pub r: Option<f64>,
    pub chi_m: u32,
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// Probability that a Haar mode belongs to the random multiplier family.
    pub density: f64,
    /// Random weights get `[ω]_{A_2}` log-uniform in `[1, a2_max]`.
    pub a2_max: f64,
    /// CZ level as a multiple of `‖f‖₁`.
    pub alpha: f64,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            p: 1.0,
            q: 1.0,
            r: None,
            chi_m: crate::dyadic::DEFAULT_CHI_M,
            c: crate::domination::DEFAULT_STOPPING_C,
            lambda: crate::domination::DEFAULT_LAMBDA,
            k: 4.0,
            density: 0.5,
            a2_max: 100.0,
            alpha: 2.0,
        }
    }
}

impl CampaignParams {
    pub fn r(&self) -> f64 {
        self.r.unwrap_or(self.p / 2.0)
    }

    fn stopping(&self) -> StoppingParams {
        StoppingParams {
            c: self.c,
            chi_m: self.chi_m,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(alias = "depth_J", default = "default_depth")]
    pub depth: u32,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub modes: Vec<CampaignMode>,
    #[serde(default)]
    pub params: CampaignParams,
    /// Signal family for `f` (and `g`); random Gaussian noise when absent.
    #[serde(default)]
    pub signal: Option<SignalKind>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_depth() -> u32 {
    10
}

fn default_trials() -> usize {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("campaign-out")
}

impl CampaignConfig {
    pub fn new(depth: u32, trials: usize, seed: u64, modes: Vec<CampaignMode>) -> Self {
        CampaignConfig {
            depth,
            trials,
            seed,
            modes,
            params: CampaignParams::default(),
            signal: None,
            out: default_out(),
        }
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: CampaignConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| crate::error::Error::Parse {
                line: e
                    .span()
                    .map_or(0, |s| text[..s.start].lines().count().max(1)),
                reason: e.message().to_string(),
            })?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(3..=16).contains(&self.depth) {
            return Err(invalid(
                "depth_J",
                format!("must lie in [3, 16], got {}", self.depth),
            ));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "at least one trial is required"));
        }
        if self.modes.is_empty() {
            return Err(invalid("modes", "at least one mode is required"));
        }
        if !(p.p > 0.0 && p.p <= 1.0)
            && self
                .modes
                .iter()
                .any(|m| matches!(m, CampaignMode::Weighted | CampaignMode::Atoms))
        {
            return Err(invalid(
                "p",
                format!("weighted and atoms modes need p in (0, 1], got {}", p.p),
            ));
        }
        if !(p.p > 0.0 && p.p.is_finite()) {
            return Err(invalid("p", format!("must be positive, got {}", p.p)));
        }
        if !(p.q > 0.0 && p.q.is_finite()) {
            return Err(invalid("q", format!("must be positive, got {}", p.q)));
        }
        if !(p.r() > 0.0 && p.r() < p.p) {
            return Err(invalid("r", format!("must lie in (0, p), got {}", p.r())));
        }
        if p.chi_m == 0 {
            return Err(invalid("chi_m", "must be at least 1"));
        }
        if !(p.c >= 1.0 && p.c.is_finite()) {
            return Err(invalid("C", format!("must be at least 1, got {}", p.c)));
        }
        if !(p.lambda > 0.0 && p.lambda < 0.5) {
            return Err(invalid(
                "lambda",
                format!("must lie in (0, 1/2), got {}", p.lambda),
            ));
        }
        if !(p.k > 1.0 && p.k.is_finite()) {
            return Err(invalid("K", format!("must exceed 1, got {}", p.k)));
        }
        if !(0.0..=1.0).contains(&p.density) {
            return Err(invalid(
                "density",
                format!("must lie in [0, 1], got {}", p.density),
            ));
        }
        if !(p.a2_max >= 1.0 && p.a2_max.is_finite()) {
            return Err(invalid(
                "a2_max",
                format!("must be at least 1, got {}", p.a2_max),
            ));
        }
        if !(p.alpha > 0.0 && p.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be positive, got {}", p.alpha),
            ));
        }
        if let Some(SignalKind::SingleMode(i)) = self.signal {
            if i.depth() >= self.depth {
                return Err(invalid(
                    "signal",
                    format!("{i} carries no Haar mode at depth {}", self.depth),
                ));
            }
        }
        Ok(())
    }
}

/// One trial of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mode: CampaignMode,
    pub trial: usize,
    pub passed: bool,
    pub failures: Vec<String>,
    /// The realized constant this mode reports.
    pub constant: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DominationCertificate>,
}

impl TrialRecord {
    fn new(mode: CampaignMode, trial: usize) -> Self {
        TrialRecord {
            mode,
            trial,
            passed: true,
            failures: Vec::new(),
            constant: None,
            metrics: BTreeMap::new(),
            certificate: None,
        }
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.passed = false;
        self.failures.push(msg.into());
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: CampaignMode,
    pub trials: usize,
    pub failures: usize,
    pub max_constant: Option<f64>,
    pub median_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub depth: u32,
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<ModeSummary>,
    pub hard_failures: usize,
}

impl CampaignSummary {
    pub fn passed(&self) -> bool {
        self.hard_failures == 0
    }

    pub fn mode(&self, mode: CampaignMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

fn trial_rng(seed: u64, mode: CampaignMode, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((mode.stream() << 40) | trial as u64);
    rng
}

fn draw_signal(config: &CampaignConfig, rng: &mut ChaCha8Rng) -> Result<Signal> {
    config
        .signal
        .unwrap_or(SignalKind::GaussianNoise)
        .generate(config.depth, rng)
}

fn mean_zero(f: Signal) -> Signal {
    let m = f.integral();
    f.map(|v| v - m)
}

fn check_certificate(
    rec: &mut TrialRecord,
    cert: DominationCertificate,
    family: &[DyadicInterval],
) {
    if !cert.check_partition(family) {
        rec.fail("selected sub-families do not partition the family");
    }
    for e in cert.validate() {
        rec.fail(e);
    }
    let share = cert.max_child_share();
    if share > 0.5 {
        rec.fail(format!("child budget {share} exceeds 1/2"));
    }
    match serde_json::to_string(&cert)
        .and_then(|s| serde_json::from_str::<DominationCertificate>(&s))
    {
        Ok(back) if back.validate() == cert.validate() => {}
        _ => rec.fail("certificate verdict changes after a JSON round trip"),
    }
    rec.constant = cert.realized_constant;
    rec.metric("stopping_C", cert.stopping_constant);
    rec.metric("carleson", cert.carleson);
    rec.metric("child_share", share);
    rec.metric("n_stopping", cert.per_q.len() as f64);
    if let Some(k) = cert.max_local_constant() {
        rec.metric("local_constant", k);
    }
    if let Some(s) = cert.max_size_ratio() {
        rec.metric("size_ratio", s);
    }
    rec.certificate = Some(cert);
}

/// Runs one trial; errors from the library are recorded as hard failures.
pub fn run_trial(config: &CampaignConfig, mode: CampaignMode, trial: usize) -> TrialRecord {
    let mut rec = TrialRecord::new(mode, trial);
    if let Err(e) = trial_body(config, mode, trial, &mut rec) {
        rec.fail(e.to_string());
    }
    rec
}

fn trial_body(
    config: &CampaignConfig,
    mode: CampaignMode,
    trial: usize,
    rec: &mut TrialRecord,
) -> Result<()> {
    let mut rng = trial_rng(config.seed, mode, trial);
    let depth = config.depth;
    let p = &config.params;
    let stopping = p.stopping();
    match mode {
        CampaignMode::Avg | CampaignMode::Square | CampaignMode::Osc => {
            let t = random_multiplier(depth, p.density, &mut rng);
            let (mut f, mut g) = (
                draw_signal(config, &mut rng)?,
                draw_signal(config, &mut rng)?,
            );
            let cert = match mode {
                CampaignMode::Avg => dominate_avg(&t, &f, &g, &stopping)?,
                CampaignMode::Square => dominate_square(&t, &f, &g, p.p, p.q, &stopping)?,
                _ => {
                    f = mean_zero(f);
                    g = mean_zero(g);
                    let (mf, mg) = (
                        maximal(&f, MaximalKind::Sharp)?,
                        maximal(&g, MaximalKind::Sharp)?,
                    );
                    let rhs = mf.inner(&mg)?;
                    if let Some(k) = crate::domination::certificate::ratio(f.inner(&g)?.abs(), rhs)
                    {
                        rec.metric("fefferman_stein", k);
                    }
                    dominate_oscillation(&t, &f, &g, &stopping)?
                }
            };
            check_certificate(rec, cert, &t.family());
        }
        CampaignMode::Weighted => {
            let kinds = [
                WeightKind::TwoLevel(1.0),
                WeightKind::DyadicDoubling(1.0),
                WeightKind::PowerLike(0.0),
            ];
            let kind = kinds[rng.random_range(0..kinds.len())];
            let target = p.a2_max.powf(rng.random::<f64>());
            let (w, _, a2) = weight_with_a2(kind, target, depth, &mut rng)?;
            let t = random_multiplier(depth, p.density, &mut rng);
            let f = draw_signal(config, &mut rng)?;
            let g = draw_signal(config, &mut rng)?;
            let u = hardy_uniformity(&t, &f, p.p, &w)?;
            if !u.holds() {
                rec.fail("S(Tf) exceeds S(f) somewhere");
            }
            let cert = dominate_weighted(&t, &f, &g, p.p, p.r(), &w, &stopping)?;
            rec.metric("a2", a2);
            let pairing = cert.pairing.as_ref().and_then(|b| b.constant);
            check_certificate(rec, cert, &t.family());
            rec.constant = pairing;
        }
        CampaignMode::Atoms => {
            let f = draw_signal(config, &mut rng)?;
            let dec = atomic_decompose(&f, p.p, p.r(), &stopping)?;
            let checks = dec.check(&f);
            if !checks.passed() {
                rec.fail(format!("atom checks failed: {checks:?}"));
            }
            rec.constant = dec.budget_constant;
            rec.metric("reconstruction_error", checks.reconstruction_error);
            rec.metric("max_norm_ratio", checks.max_norm_ratio);
            rec.metric("n_atoms", dec.atoms.len() as f64);
            if let [a] = dec.atoms.as_slice() {
                rec.metric("c_Q", a.c_q);
            }
        }
        CampaignMode::Cz => {
            let f = draw_signal(config, &mut rng)?;
            let alpha = p.alpha * f.abs().integral().max(f64::MIN_POSITIVE);
            let cz = cz_decompose(&f, alpha)?;
            let checks = cz.check(&f);
            if !checks.passed() {
                rec.fail(format!("CZ checks failed: {checks:?}"));
            }
            rec.metric("exact", checks.exact() as u8 as f64);
            rec.metric("bad_cubes", cz.bad.len() as f64);
            rec.constant = Some(checks.max_reconstruction_error);
        }
        CampaignMode::Weak11 => {
            let s = random_sparse_collection(depth, &mut rng);
            let f = draw_signal(config, &mut rng)?;
            let report = weak11_certify(Weak11Operator::Sparse(&s), &f, p.k, &mut rng)?;
            if !report.passed() {
                rec.fail(format!(
                    "weak-(1,1) test failed: major subsets {} consistent {}",
                    report.major_ok, report.consistent
                ));
            }
            rec.constant = Some(report.exact_weak);
            rec.metric("report", report.report);
            rec.metric("carleson", carleson_constant(&s));
        }
        CampaignMode::Spmodel => {
            let s = random_sparse_collection(depth, &mut rng);
            let report = sparse_vs_carleson(&s)?;
            if s.max_child_share() <= 0.5 && report.carleson > 2.0 {
                rec.fail(format!(
                    "Carleson constant {} exceeds 2 under the 1/2 budget",
                    report.carleson
                ));
            }
            if !(0.25..=4.0).contains(&report.eta_times_carleson) {
                rec.fail(format!(
                    "η·Λ = {} outside [1/4, 4]",
                    report.eta_times_carleson
                ));
            }
            rec.constant = Some(report.carleson);
            rec.metric("eta_times_carleson", report.eta_times_carleson);
        }
        CampaignMode::Lerner => {
            let phi = draw_signal(config, &mut rng)?;
            let d = lerner_decompose(&phi, DyadicInterval::ROOT, p.lambda)?;
            if p.lambda <= 0.125 && !(d.bound_holds && d.sparse_at_half) {
                rec.fail("pointwise bound or sparsity failed");
            }
            rec.constant = d.realized_constant;
            rec.metric("child_share", d.max_child_share);
            rec.metric("n_stopping", d.records.len() as f64);
        }
    }
    Ok(())
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    })
}

/// All trials of all modes, in `(mode, trial)` order.
pub fn run_trials(config: &CampaignConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let jobs: Vec<(CampaignMode, usize)> = config
        .modes
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(m, t)| run_trial(config, m, t))
        .collect())
}

pub fn summarize(config: &CampaignConfig, records: &[TrialRecord]) -> CampaignSummary {
    let modes = config
        .modes
        .iter()
        .map(|&mode| {
            let recs: Vec<&TrialRecord> = records.iter().filter(|r| r.mode == mode).collect();
            let mut constants: Vec<f64> = recs.iter().filter_map(|r| r.constant).collect();
            ModeSummary {
                mode,
                trials: recs.len(),
                failures: recs.iter().filter(|r| !r.passed).count(),
                max_constant: constants.iter().copied().reduce(f64::max),
                median_constant: median(&mut constants),
            }
        })
        .collect::<Vec<_>>();
    CampaignSummary {
        depth: config.depth,
        trials: config.trials,
        seed: config.seed,
        hard_failures: modes.iter().map(|m| m.failures).sum(),
        modes,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs the campaign and writes `trials.jsonl`, `summary.json`, `summary.csv`
/// and `series.csv` into `config.out`.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignSummary> {
    let records = run_trials(config)?;
    let summary = summarize(config, &records);
    fs::create_dir_all(&config.out)?;

    let mut lines = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut lines, r)?;
        lines.push(b'\n');
    }
    fs::write(config.out.join("trials.jsonl"), lines)?;
    fs::write(
        config.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    let mut csv = String::from("mode,trials,failures,max_constant,median_constant\n");
    for m in &summary.modes {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            m.mode,
            m.trials,
            m.failures,
            fmt_opt(m.max_constant),
            fmt_opt(m.median_constant)
        ));
    }
    fs::write(config.out.join("summary.csv"), csv)?;

    let mut series = fs::File::create(config.out.join("series.csv"))?;
    writeln!(series, "mode,trial,x_name,x,y")?;
    for r in &records {
        let (name, x) = match r.mode {
            CampaignMode::Weighted => ("a2", r.metrics.get("a2")),
            CampaignMode::Weak11 => ("carleson", r.metrics.get("carleson")),
            _ => ("trial", None),
        };
        let x = x.copied().unwrap_or(r.trial as f64);
        writeln!(
            series,
            "{},{},{},{},{}",
            r.mode,
            r.trial,
            name,
            x,
            fmt_opt(r.constant)
        )?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_names_fields() {
        let mut c = CampaignConfig::new(10, 0, 1, vec![CampaignMode::Avg]);
        assert!(c.validate().unwrap_err().to_string().contains("trials"));
        c.trials = 1;
        c.depth = 2;
        assert!(c.validate().unwrap_err().to_string().contains("depth_J"));
        c.depth = 5;
        c.params.p = 2.0;
        c.modes = vec![CampaignMode::Atoms];
        assert!(c.validate().unwrap_err().to_string().contains("`p`"));
    }

    #[test]
    fn toml_and_json_configs() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        fs::write(
            &toml_path,
            "depth_J = 6\ntrials = 2\nseed = 3\nmodes = [\"avg\", \"cz\"]\n[params]\nC = 8.0\n",
        )
        .unwrap();
        let c = CampaignConfig::from_path(&toml_path).unwrap();
        assert_eq!((c.depth, c.trials, c.params.c), (6, 2, 8.0));
        let json_path = dir.path().join("c.json");
        fs::write(
            &json_path,
            r#"{"depth": 5, "modes": ["atoms"], "signal": "single_mode:1,0"}"#,
        )
        .unwrap();
        let c = CampaignConfig::from_path(&json_path).unwrap();
        assert_eq!(
            c.signal,
            Some(SignalKind::SingleMode(DyadicInterval::new(1, 0)))
        );
        fs::write(&toml_path, "modes = [\"avg\"]\nbogus = 1\n").unwrap();
        assert!(CampaignConfig::from_path(&toml_path).is_err());
    }

    #[test]
    fn single_mode_atoms_summary() {
        let mut c = CampaignConfig::new(6, 1, 0, vec![CampaignMode::Atoms]);
        c.signal = Some(SignalKind::SingleMode(DyadicInterval::new(1, 0)));
        let recs = run_trials(&c).unwrap();
        assert!(recs[0].passed);
        assert_eq!(recs[0].metrics["c_Q"], 0.5);
        // Σ c_Q / ‖Sf‖₁ = (1/2) / (1/2).
        assert_eq!(recs[0].constant, Some(1.0));
    }

    #[test]
    fn every_mode_passes_small() {
        let c = CampaignConfig::new(6, 3, 11, CampaignMode::ALL.to_vec());
        let recs = run_trials(&c).unwrap();
        for r in &recs {
            assert!(r.passed, "{} trial {}: {:?}", r.mode, r.trial, r.failures);
        }
        assert!(summarize(&c, &recs).passed());
    }
}
