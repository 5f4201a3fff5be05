//! Monte-Carlo robustness studies over disorder realizations.
//!
//! Per realization the single-particle leakage `1 − |U[N+1,0](τ)|²` is the
//! figure of merit, evaluated at the shortest transfer time the infidelity
//! bound allows for the target `ε₀`. Realizations that fail mode selection
//! are kept as flagged records and left out of the leakage summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain::{build_coupling_matrix, sample_disorder, ChainSpec, DisorderKind, DisorderModel};
use crate::error::{Error, Result};
use crate::fermion::{
    analyze_modes, compensate_asymmetry, end_to_end_amplitude, infidelity_bound, max_coupling, ph_spectrum_check,
    pick_resonant_mode, propagator,
};
use crate::format::fmt_f64;
use crate::par::Exec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub base: ChainSpec,
    pub model: DisorderModel,
    pub realizations: usize,
    pub epsilon0: f64,
    pub compensate: bool,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.model.validate()?;
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be >= 1"));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::invalid(format!("epsilon0 {} must lie in (0, 1)", self.epsilon0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    DegenerateResonance,
    DarkMode,
    ResonanceCollision,
    NumericFailure,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::DegenerateResonance => "degenerate-resonance",
            RecordStatus::DarkMode => "dark-mode",
            RecordStatus::ResonanceCollision => "resonance-collision",
            RecordStatus::NumericFailure => "numeric-failure",
        }
    }

    fn from_error(e: &Error) -> Option<Self> {
        match e {
            Error::DegenerateResonance { .. } => Some(RecordStatus::DegenerateResonance),
            Error::DarkMode { .. } => Some(RecordStatus::DarkMode),
            Error::ResonanceCollision { .. } => Some(RecordStatus::ResonanceCollision),
            Error::NumericFailure(_) => Some(RecordStatus::NumericFailure),
            _ => None,
        }
    }
}

/// One disorder realization. Fields are `None` when the stage producing them
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub realization: u64,
    pub status: RecordStatus,
    pub mode_index: Option<usize>,
    pub zero_mode_gap: Option<f64>,
    pub participation_ratio_z: Option<f64>,
    /// `|φ_z[1]| / |φ_z[N]|`.
    pub end_amplitude_ratio: Option<f64>,
    pub g_left: Option<f64>,
    pub g_right: Option<f64>,
    pub tau: Option<f64>,
    pub leakage: Option<f64>,
    pub bound: Option<f64>,
}

impl RealizationRecord {
    fn empty(realization: u64) -> Self {
        RealizationRecord {
            realization,
            status: RecordStatus::Ok,
            mode_index: None,
            zero_mode_gap: None,
            participation_ratio_z: None,
            end_amplitude_ratio: None,
            g_left: None,
            g_right: None,
            tau: None,
            leakage: None,
            bound: None,
        }
    }
}

/// Mean, median and nearest-rank 5th/95th percentiles of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// sample at or below it. `sorted` must be ascending and non-empty.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Summary {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: nearest_rank(&sorted, 50.0),
            p5: nearest_rank(&sorted, 5.0),
            p95: nearest_rank(&sorted, 95.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub zero_mode_gap: Option<Summary>,
    pub participation_ratio_z: Option<Summary>,
    pub end_amplitude_ratio: Option<Summary>,
    pub tau: Option<Summary>,
    pub leakage: Option<Summary>,
    pub bound: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub schema_version: u32,
    pub spec: EnsembleSpec,
    pub records: Vec<RealizationRecord>,
    pub summary: EnsembleSummary,
    pub failures: usize,
    pub failure_rate: f64,
}

pub const CSV_HEADER: &str = "realization,status,mode_index,zero_mode_gap,participation_ratio_z,end_amplitude_ratio,g_left,g_right,tau,leakage,bound";

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl EnsembleStats {
    fn from_records(spec: EnsembleSpec, records: Vec<RealizationRecord>) -> Self {
        let ok: Vec<&RealizationRecord> = records.iter().filter(|r| r.status == RecordStatus::Ok).collect();
        let all = |f: fn(&RealizationRecord) -> Option<f64>| Summary::of(&records.iter().filter_map(f).collect::<Vec<_>>());
        let good = |f: fn(&RealizationRecord) -> Option<f64>| Summary::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        let summary = EnsembleSummary {
            zero_mode_gap: all(|r| r.zero_mode_gap),
            participation_ratio_z: all(|r| r.participation_ratio_z),
            end_amplitude_ratio: all(|r| r.end_amplitude_ratio),
            tau: good(|r| r.tau),
            leakage: good(|r| r.leakage),
            bound: good(|r| r.bound),
        };
        let failures = records.len() - ok.len();
        let failure_rate = failures as f64 / records.len() as f64;
        EnsembleStats { schema_version: SCHEMA_VERSION, spec, records, summary, failures, failure_rate }
    }

    /// One row per realization; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.realization,
                r.status.as_str(),
                r.mode_index.map(|z| z.to_string()).unwrap_or_default(),
                opt(r.zero_mode_gap),
                opt(r.participation_ratio_z),
                opt(r.end_amplitude_ratio),
                opt(r.g_left),
                opt(r.g_right),
                opt(r.tau),
                opt(r.leakage),
                opt(r.bound),
            );
        }
        out
    }

    /// Summary JSON without the per-realization records.
    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "schema_version": self.schema_version,
            "spec": self.spec,
            "realizations": self.records.len(),
            "failures": self.failures,
            "failure_rate": self.failure_rate,
            "summary": self.summary,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    pub fn leakages(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.leakage).collect()
    }
}

/// Unit-scale end couplings of the base spec (`g_L g_R = 1`), or `(1, 1)`
/// when either end is decoupled.
fn base_end_ratio(base: &ChainSpec) -> (f64, f64) {
    let (l, r) = (base.g_left.abs(), base.g_right.abs());
    if l > 0.0 && r > 0.0 {
        let s = (l * r).sqrt();
        (l / s, r / s)
    } else {
        (1.0, 1.0)
    }
}

fn realization(spec: &EnsembleSpec, index: u64, compensate: bool) -> Result<RealizationRecord> {
    let mut rec = RealizationRecord::empty(index);
    let chain = sample_disorder(&spec.base, &spec.model, index)?;
    let (ul, ur) = base_end_ratio(&spec.base);
    let unit = chain.with_ends(ul, ur);
    let modes = analyze_modes(&build_coupling_matrix(&unit)?)?;
    rec.zero_mode_gap = Some(ph_spectrum_check(&modes).zero_mode_gap);

    let flag = |mut rec: RealizationRecord, e: Error| -> Result<RealizationRecord> {
        match RecordStatus::from_error(&e) {
            Some(status) => {
                rec.status = status;
                Ok(rec)
            }
            None => Err(e),
        }
    };

    let z = match pick_resonant_mode(&modes, spec.base.delta) {
        Ok(r) => r.mode_index,
        Err(e) => return flag(rec, e),
    };
    rec.mode_index = Some(z);
    rec.participation_ratio_z = Some(modes.participation[z]);
    let (a, b) = modes.end_amplitudes(z);
    rec.end_amplitude_ratio = Some(a.abs() / b.abs());

    let (unit, modes) = if compensate {
        let (gl, gr) = match compensate_asymmetry(&modes, z, 1.0) {
            Ok(g) => g,
            Err(e) => return flag(rec, e),
        };
        let unit = chain.with_ends(gl, gr);
        let modes = analyze_modes(&build_coupling_matrix(&unit)?)?;
        (unit, modes)
    } else {
        (unit, modes)
    };
    let limit = match max_coupling(&modes, z, spec.epsilon0) {
        Ok(l) => l,
        Err(e) => return flag(rec, e),
    };
    let tuned = chain.with_ends(unit.g_left * limit.g_max, unit.g_right * limit.g_max);
    rec.g_left = Some(tuned.g_left);
    rec.g_right = Some(tuned.g_right);
    rec.tau = Some(limit.tau_min);
    let k = build_coupling_matrix(&tuned)?;
    let result = (|| -> Result<(f64, f64)> {
        let modes = analyze_modes(&k)?;
        let u = propagator(&k, limit.tau_min)?;
        Ok((1.0 - end_to_end_amplitude(&u).norm_sqr(), infidelity_bound(&modes, z)?))
    })();
    match result {
        Ok((leak, bound)) => {
            rec.leakage = Some(leak);
            rec.bound = Some(bound);
            Ok(rec)
        }
        Err(e) => flag(rec, e),
    }
}

fn run_arm(spec: &EnsembleSpec, compensate: bool, exec: Exec) -> Result<EnsembleStats> {
    spec.validate()?;
    let records = exec.map_range(spec.realizations, |i| realization(spec, i as u64, compensate));
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let mut arm = spec.clone();
    arm.compensate = compensate;
    Ok(EnsembleStats::from_records(arm, records))
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleStats> {
    run_ensemble_with(spec, Exec::default())
}

pub fn run_ensemble_with(spec: &EnsembleSpec, exec: Exec) -> Result<EnsembleStats> {
    run_arm(spec, spec.compensate, exec)
}

/// Both arms of a compensation study over the same realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationStudy {
    pub compensated: EnsembleStats,
    pub uncompensated: EnsembleStats,
}

impl CompensationStudy {
    /// Fraction of realizations, among those valid in both arms, where the
    /// compensated leakage does not exceed the uncompensated one.
    pub fn paired_win_rate(&self) -> Option<f64> {
        let pairs: Vec<(f64, f64)> = self
            .compensated
            .records
            .iter()
            .zip(&self.uncompensated.records)
            .filter_map(|(c, u)| Some((c.leakage?, u.leakage?)))
            .collect();
        if pairs.is_empty() {
            return None;
        }
        Some(pairs.iter().filter(|(c, u)| c <= u).count() as f64 / pairs.len() as f64)
    }
}

pub fn compensation_study(spec: &EnsembleSpec) -> Result<CompensationStudy> {
    compensation_study_with(spec, Exec::default())
}

pub fn compensation_study_with(spec: &EnsembleSpec, exec: Exec) -> Result<CompensationStudy> {
    if spec.model.strength > 0.0 && spec.model.kind == DisorderKind::Onsite {
        return Err(Error::invalid("compensation study needs coupling disorder"));
    }
    Ok(CompensationStudy { compensated: run_arm(spec, true, exec)?, uncompensated: run_arm(spec, false, exec)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub mode_index: usize,
    pub median_participation: f64,
}

/// Median participation ratio of each mode (by energy order) over the ensemble.
pub fn localization_profile(spec: &EnsembleSpec) -> Result<Vec<ProfileRow>> {
    localization_profile_with(spec, Exec::default())
}

pub fn localization_profile_with(spec: &EnsembleSpec, exec: Exec) -> Result<Vec<ProfileRow>> {
    spec.validate()?;
    let per = exec.map_range(spec.realizations, |i| -> Result<Vec<f64>> {
        let chain = sample_disorder(&spec.base, &spec.model, i as u64)?;
        Ok(analyze_modes(&build_coupling_matrix(&chain.with_ends(1.0, 1.0))?)?.participation)
    });
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..spec.base.n_chain)
        .map(|k| {
            let mut v: Vec<f64> = per.iter().map(|p| p[k]).collect();
            v.sort_by(f64::total_cmp);
            ProfileRow { mode_index: k, median_participation: nearest_rank(&v, 50.0) }
        })
        .collect())
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("mode_index,median_participation\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.mode_index, fmt_f64(r.median_participation));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{make_uniform_spec, Distribution};

    fn spec(n: usize, kind: DisorderKind, strength: f64, realizations: usize) -> EnsembleSpec {
        EnsembleSpec {
            base: make_uniform_spec(n, 1.0, 0.01, 0.0).unwrap(),
            model: DisorderModel { kind, distribution: Distribution::UniformRelative, strength, seed: 7 },
            realizations,
            epsilon0: 1e-3,
            compensate: false,
        }
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 50.0), 5.0);
        assert_eq!(nearest_rank(&v, 5.0), 1.0);
        assert_eq!(nearest_rank(&v, 95.0), 10.0);
        assert_eq!(nearest_rank(&[3.0], 95.0), 3.0);
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.median, s.mean, s.count), (2.0, 2.5, 4));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn zero_strength_matches_clean_chain() {
        let st = run_ensemble(&spec(7, DisorderKind::Coupling, 0.0, 5)).unwrap();
        let first = &st.records[0];
        for r in &st.records[1..] {
            assert_eq!(RealizationRecord { realization: 0, ..r.clone() }, *first);
        }
        // clean N = 7 at ε₀ = 10⁻³
        assert!((first.g_left.unwrap() - 0.018516401995451).abs() < 1e-9);
        assert!((first.bound.unwrap() - 1e-3).abs() < 1e-12);
        assert!((first.end_amplitude_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(st.failures, 0);
    }

    #[test]
    fn coupling_disorder_keeps_zero_mode() {
        let st = run_ensemble(&spec(9, DisorderKind::Coupling, 0.3, 200)).unwrap();
        assert!(st.records.iter().all(|r| r.zero_mode_gap.unwrap() < 1e-12));
        let onsite = run_ensemble(&spec(9, DisorderKind::Onsite, 0.3, 200)).unwrap();
        assert!(onsite.summary.zero_mode_gap.unwrap().median > 1e-6);
    }

    #[test]
    fn compensation_helps_under_coupling_disorder() {
        let study = compensation_study(&spec(9, DisorderKind::Coupling, 0.3, 200)).unwrap();
        let c = study.compensated.summary.leakage.unwrap().median;
        let u = study.uncompensated.summary.leakage.unwrap().median;
        assert!(c <= 1e-3 && u > c, "{c} {u}");
        assert!(study.paired_win_rate().unwrap() >= 0.95);
        for r in &study.compensated.records {
            let (gl, gr) = (r.g_left.unwrap(), r.g_right.unwrap());
            let ratio = r.end_amplitude_ratio.unwrap();
            // |g_L φ₁| = |g_R φ_N|
            assert!((gl * ratio - gr).abs() < 1e-12);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = spec(9, DisorderKind::Both, 0.2, 64);
        let a = run_ensemble_with(&s, Exec::Sequential).unwrap();
        let b = run_ensemble_with(&s, Exec::Parallel).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary_json(), b.summary_json());
    }

    #[test]
    fn onsite_disorder_flags_instead_of_aborting() {
        // N = 2 at Δ = 0 sits midway between E = ±κ
        let st = run_ensemble(&spec(2, DisorderKind::Coupling, 0.0, 50)).unwrap();
        assert_eq!(st.records.len(), 50);
        assert_eq!((st.failures, st.failure_rate), (50, 1.0));
        assert_eq!(st.records[0].status, RecordStatus::DegenerateResonance);
        assert!(st.summary.leakage.is_none() && st.summary.zero_mode_gap.is_some());
        assert!(st.records.iter().filter(|r| r.status != RecordStatus::Ok).all(|r| r.leakage.is_none()));
        assert_eq!(st.to_csv().lines().count(), 51);
    }

    #[test]
    fn localization_profiles() {
        let clean = localization_profile(&spec(7, DisorderKind::Coupling, 0.0, 3)).unwrap();
        // sine modes: PR = 2(N+1)/3 except the mid mode of odd N
        for row in &clean {
            let want = if row.mode_index == 3 { 4.0 } else { 16.0 / 3.0 };
            assert!((row.median_participation - want).abs() < 1e-9, "{row:?}");
        }
        let pr_z = |kind, st| localization_profile(&spec(41, kind, st, 200)).unwrap()[20].median_participation;
        let coupling: Vec<f64> = [0.3, 0.6, 0.9].map(|st| pr_z(DisorderKind::Coupling, st)).to_vec();
        assert!(coupling.windows(2).all(|w| w[1] < w[0]), "{coupling:?}");
        assert!(pr_z(DisorderKind::Onsite, 5.0) < 0.15 * 41.0);
    }
}
