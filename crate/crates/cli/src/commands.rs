//! The six subcommands. Each reads its keys from [`Settings`], writes its
//! data files through [`OutDir`], and returns.

use std::fmt::Write as _;

use ffst::chain::{
    build_coupling_matrix, make_uniform_spec, sample_disorder, ChainSpec, DisorderKind, DisorderModel, Distribution,
};
use ffst::disorder::{compensation_study, localization_profile, profile_csv, run_ensemble, EnsembleSpec};
use ffst::fermion::{
    analytic_infidelity, analyze_modes, end_to_end_amplitude, infidelity_bound, max_coupling, ph_spectrum_check,
    pick_resonant_mode, plan_transfer, propagator, transfer_time,
};
use ffst::format::fmt_f64;
use ffst::oracle::protocols::{encoded_transfer_with, EncodedLayout, EncodedOptions, Ensemble};
use ffst::oracle::{Evolver, SpinHamiltonian, DEFAULT_SITE_CAP};
use serde_json::{json, Value};

use crate::config::{check_grid, Settings};
use crate::error::CliError;
use crate::output::{OutDir, SCHEMA_VERSION};

const CHAIN_KEYS: [&str; 8] = ["n", "kappa", "kappa_list", "onsite", "g", "g_left", "g_right", "delta"];
const DISORDER_KEYS: [&str; 5] = ["disorder_kind", "distribution", "strength", "seed", "realization"];
pub const JW_TOLERANCE: f64 = 1e-9;

fn keys<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.concat()
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn chain_spec(s: &Settings, n: usize, g: f64) -> Result<ChainSpec, CliError> {
    let n = s.usize_or("n", n)?;
    let kappa = s.f64_or("kappa", 1.0)?;
    let g = s.f64_or("g", g)?;
    let mut spec = make_uniform_spec(n, kappa, g, s.f64_or("delta", 0.0)?)?;
    if let Some(k) = s.opt_f64_list("kappa_list")? {
        spec.kappa = k;
    }
    if let Some(h) = s.opt_f64_list("onsite")? {
        spec.onsite = h;
    }
    spec.g_left = s.f64_or("g_left", g)?;
    spec.g_right = s.f64_or("g_right", g)?;
    spec.validate()?;
    Ok(spec)
}

fn disorder_model(s: &Settings, strength: f64) -> Result<DisorderModel, CliError> {
    let model = DisorderModel {
        kind: s.parsed_or("disorder_kind", DisorderKind::Coupling)?,
        distribution: s.parsed_or("distribution", Distribution::UniformRelative)?,
        strength: s.f64_or("strength", strength)?,
        seed: s.u64_or("seed", 0)?,
    };
    model.validate()?;
    Ok(model)
}

/// Chain spec with one optional disorder realization applied.
fn realized_spec(s: &Settings, n: usize, g: f64) -> Result<ChainSpec, CliError> {
    let base = chain_spec(s, n, g)?;
    let model = disorder_model(s, 0.0)?;
    Ok(sample_disorder(&base, &model, s.u64_or("realization", 0)?)?)
}

fn ensemble_of(s: &Settings) -> Result<Ensemble, CliError> {
    Ok(match s.usize_or("samples", 0)? {
        0 => Ensemble::Exhaustive,
        count => Ensemble::Sampled { count, seed: s.u64_or("seed", 0)? },
    })
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn is_resonance_error(e: &ffst::Error) -> bool {
    matches!(
        e,
        ffst::Error::DegenerateResonance { .. } | ffst::Error::DarkMode { .. } | ffst::Error::ResonanceCollision { .. }
    )
}

pub fn modes(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&keys(&[&CHAIN_KEYS, &DISORDER_KEYS]))?;
    let spec = realized_spec(s, 7, 0.01)?;
    let modes = analyze_modes(&build_coupling_matrix(&spec)?)?;
    let (resonance, resonance_error) = match pick_resonant_mode(&modes, spec.delta) {
        Ok(r) => (Some(r), None),
        Err(e) if is_resonance_error(&e) => {
            warn(&e.to_string());
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let z = resonance.map(|r| r.mode_index);
    let mut csv = String::from("k,energy,t_left,t_right,participation,resonant\n");
    for k in 0..modes.len() {
        let _ = writeln!(
            csv,
            "{k},{},{},{},{},{}",
            fmt_f64(modes.energies[k]),
            fmt_f64(modes.t_left[k]),
            fmt_f64(modes.t_right[k]),
            fmt_f64(modes.participation[k]),
            z == Some(k)
        );
    }
    out.write("modes.csv", &csv)?;
    let tau = match z {
        Some(z) => transfer_time(&modes, z).ok(),
        None => None,
    };
    let ph = ph_spectrum_check(&modes);
    out.write_json(
        "modes.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "spec": spec,
            "resonant_mode": z,
            "detuning": resonance.map(|r| r.detuning),
            "resonance_error": resonance_error,
            "tau": tau,
            "particle_hole_symmetric": ph.is_symmetric,
            "zero_mode_gap": ph.zero_mode_gap,
        }),
    )
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64)).collect()
}

pub fn sweep_g(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&[
        "n", "kappa", "delta", "g_list", "g_min", "g_max", "points", "oracle", "oracle_cap", "samples", "seed",
    ])?;
    let n = s.usize_or("n", 7)?;
    let kappa = s.f64_or("kappa", 1.0)?;
    let delta = s.f64_or("delta", 0.0)?;
    let grid = match s.opt_f64_list("g_list")? {
        Some(g) => g,
        None => {
            let (lo, hi) = (s.f64_or("g_min", 0.005)?, s.f64_or("g_max", 0.1)?);
            let points = s.usize_or("points", 20)?;
            if !(lo > 0.0 && hi >= lo && points > 0) {
                return Err(CliError::Config("need 0 < g_min <= g_max and points >= 1".into()));
            }
            log_grid(lo, hi, points)
        }
    };
    check_grid("g grid", &grid)?;
    let cap = s.usize_or("oracle_cap", DEFAULT_SITE_CAP)?;
    let ensemble = ensemble_of(s)?;
    let mut warnings = Vec::new();
    let mut use_oracle = s.bool_or("oracle", true)?;
    if use_oracle && EncodedLayout::new(n).sites() > cap {
        let msg = format!("oracle skipped: {} sites exceed oracle_cap {cap}", EncodedLayout::new(n).sites());
        warn(&msg);
        warnings.push(msg);
        use_oracle = false;
    }
    let mut csv = String::from("g_over_kappa,tau,analytic,bound,leakage,oracle\n");
    let mut worst_ratio = 0.0f64;
    for &r in &grid {
        let spec = make_uniform_spec(n, kappa, r * kappa, delta)?;
        let (modes, plan) = plan_transfer(&spec)?;
        let analytic = analytic_infidelity(&modes, plan.mode_index, plan.tau)?;
        let bound = infidelity_bound(&modes, plan.mode_index)?;
        let u = propagator(&build_coupling_matrix(&spec)?, plan.tau)?;
        let leakage = 1.0 - end_to_end_amplitude(&u).norm_sqr();
        let oracle = if use_oracle {
            let opts = EncodedOptions { site_cap: cap, ..Default::default() };
            Some(encoded_transfer_with(&spec, plan.tau, ensemble, opts)?.infidelity)
        } else {
            None
        };
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(analytic / bound);
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(r),
            fmt_f64(plan.tau),
            fmt_f64(analytic),
            fmt_f64(bound),
            fmt_f64(leakage),
            opt_cell(oracle)
        );
    }
    out.write("sweep_g.csv", &csv)?;
    out.write_json(
        "sweep_g.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "n": n,
            "kappa": kappa,
            "delta": delta,
            "points": grid.len(),
            "oracle": use_oracle,
            "ensemble": ensemble,
            "max_analytic_over_bound": worst_ratio,
            "warnings": warnings,
        }),
    )
}

/// Least-squares line `y = a + b x`; returns `(a, b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}

pub fn scaling(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&["n_list", "epsilon0", "kappa", "delta", "seed"])?;
    let ns = s.opt_usize_list("n_list")?.unwrap_or_else(|| (5..=41).step_by(2).collect());
    check_grid("n_list", &ns)?;
    let eps0 = s.f64_or("epsilon0", 1e-3)?;
    let kappa = s.f64_or("kappa", 1.0)?;
    let delta = s.f64_or("delta", 0.0)?;
    let mut csv = String::from("n,g_max,tau_min\n");
    let mut taus = Vec::new();
    for &n in &ns {
        let modes = analyze_modes(&build_coupling_matrix(&make_uniform_spec(n, kappa, 1.0, delta)?)?)?;
        let z = pick_resonant_mode(&modes, delta)?.mode_index;
        let lim = max_coupling(&modes, z, eps0)?;
        taus.push(lim.tau_min);
        let _ = writeln!(csv, "{n},{},{}", fmt_f64(lim.g_max), fmt_f64(lim.tau_min));
    }
    out.write("scaling.csv", &csv)?;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (intercept, slope, r2) = linear_fit(&x, &taus);
    out.write_json(
        "scaling.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "epsilon0": eps0,
            "kappa": kappa,
            "delta": delta,
            "fit": { "slope": slope, "intercept": intercept, "r_squared": r2 },
        }),
    )
}

fn parse_json(text: &str) -> Value {
    serde_json::from_str(text).expect("core summaries are valid JSON")
}

pub fn disorder(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&keys(&[
        &CHAIN_KEYS,
        &DISORDER_KEYS,
        &["realizations", "epsilon0", "compensate", "study", "profile"],
    ]))?;
    let spec = EnsembleSpec {
        base: chain_spec(s, 9, 0.01)?,
        model: disorder_model(s, 0.3)?,
        realizations: s.usize_or("realizations", 1000)?,
        epsilon0: s.f64_or("epsilon0", 1e-3)?,
        compensate: s.bool_or("compensate", true)?,
    };
    spec.validate()?;
    if s.bool_or("study", false)? {
        let study = compensation_study(&spec)?;
        out.write("disorder_compensated.csv", &study.compensated.to_csv())?;
        out.write("disorder_uncompensated.csv", &study.uncompensated.to_csv())?;
        out.write_json(
            "disorder.json",
            &json!({
                "schema_version": SCHEMA_VERSION,
                "compensated": parse_json(&study.compensated.summary_json()),
                "uncompensated": parse_json(&study.uncompensated.summary_json()),
                "paired_win_rate": study.paired_win_rate(),
            }),
        )?;
    } else {
        let stats = run_ensemble(&spec)?;
        if stats.failures > 0 {
            warn(&format!("{} of {} realizations flagged", stats.failures, stats.records.len()));
        }
        out.write("disorder.csv", &stats.to_csv())?;
        let mut text = stats.summary_json();
        text.push('\n');
        out.write("disorder.json", &text)?;
    }
    if s.bool_or("profile", false)? {
        out.write("localization.csv", &profile_csv(&localization_profile(&spec)?))?;
    }
    Ok(())
}

pub fn oracle_compare(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&keys(&[&CHAIN_KEYS, &DISORDER_KEYS, &["time", "oracle_cap"]]))?;
    let spec = realized_spec(s, 4, 0.0)?;
    let cap = s.usize_or("oracle_cap", DEFAULT_SITE_CAP)?;
    let k = build_coupling_matrix(&spec)?;
    let inner = k.interior();
    let many = SpinHamiltonian::from_couplings(&inner, cap)?.spectrum()?;
    let single = analyze_modes(&k)?.energies;
    let mut sums: Vec<f64> = (0..1usize << single.len())
        .map(|m| (0..single.len()).filter(|j| m >> j & 1 == 1).map(|j| single[j]).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    let mut csv = String::from("index,many_body,subset_sum,abs_error\n");
    let mut jw_err = 0.0f64;
    for (i, (a, b)) in many.iter().zip(&sums).enumerate() {
        let e = (a - b).abs();
        jw_err = jw_err.max(e);
        let _ = writeln!(csv, "{i},{},{},{}", fmt_f64(*a), fmt_f64(*b), fmt_f64(e));
    }
    out.write("oracle_compare.csv", &csv)?;

    // single excitation from site 0 versus the propagator column
    let time = s.f64_or("time", 5.0)?;
    let mut prop_err = None;
    if spec.total_sites() <= cap && (spec.g_left != 0.0 || spec.g_right != 0.0) {
        let u = propagator(&k, time)?;
        let ham = SpinHamiltonian::from_couplings(&k, cap)?;
        let psi = Evolver::new(&ham).evolve_basis(1, time)?;
        let err = (0..spec.total_sites()).map(|j| (psi[1 << j] - u[(j, 0)]).norm()).fold(0.0, f64::max);
        prop_err = Some(err);
    }
    let pass = jw_err <= JW_TOLERANCE;
    out.write_json(
        "oracle_compare.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "spec": spec,
            "jw_max_error": jw_err,
            "jw_tolerance": JW_TOLERANCE,
            "jw_pass": pass,
            "time": time,
            "propagator_max_error": prop_err,
        }),
    )?;
    if !pass {
        return Err(CliError::Numeric(format!("spectral equivalence error {jw_err:e} exceeds {JW_TOLERANCE:e}")));
    }
    Ok(())
}

pub fn encoded(s: &Settings, out: &mut OutDir) -> Result<(), CliError> {
    s.check_keys(&keys(&[&CHAIN_KEYS, &DISORDER_KEYS, &["tau", "samples", "decode", "oracle_cap"]]))?;
    let spec = realized_spec(s, 5, 0.01)?;
    let (modes, plan) = plan_transfer(&spec)?;
    let tau = s.opt_f64("tau")?.unwrap_or(plan.tau);
    let bound = infidelity_bound(&modes, plan.mode_index)?;
    let opts = EncodedOptions {
        decode: s.bool_or("decode", true)?,
        site_cap: s.usize_or("oracle_cap", DEFAULT_SITE_CAP)?,
        ..Default::default()
    };
    let res = encoded_transfer_with(&spec, tau, ensemble_of(s)?, opts)?;
    let mut v = serde_json::to_value(&res).expect("protocol result serializes");
    let obj = v.as_object_mut().expect("object");
    obj.insert("spec".into(), json!(spec));
    obj.insert("tau".into(), json!(tau));
    obj.insert("mode_index".into(), json!(plan.mode_index));
    obj.insert("infidelity_bound".into(), json!(bound));
    obj.insert("meets_bound".into(), json!(res.average_fidelity >= 1.0 - 2.0 * bound));
    out.write_json("encoded.json", &v)
}
