//! Subcommand implementations.

use std::f64::consts::PI;
use std::io::Write;

use ssh_bell::analytic::{
    bell_condition, bell_residual, entropy_map, linspace, scattering_angles, scattering_probabilities,
    taylor_quantities, MapAxes, MapRequest,
};
use ssh_bell::evolve::{evolve_dense_two_particle, evolve_orbitals};
use ssh_bell::protocol::{bell_curve, entropy_versus_dk, run_decoherence, run_decoherence_dense};
use ssh_bell::schedule::derive_seed;
use ssh_bell::{
    run_noise_sweep, run_scatter, solve_bands, Boundary, HoppingMode, NoiseSweep, OnsiteMode, ScatterRun,
};

use crate::config::RunConfig;
use crate::output::{DerivedSeed, Field, ManifestBuilder, OutputDir};
use crate::Failure;

use Field::{F, S, U};

/// Tolerance of the `--oracle` cross-checks.
const ORACLE_TOL: f64 = 1e-8;
const LINDBLAD_ORACLE_TOL: f64 = 1e-6;

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a mut OutputDir,
    pub manifest: &'a mut ManifestBuilder,
    pub oracle: bool,
}

fn label(pair: (usize, usize)) -> String {
    format!("{}{}", pair.0 + 1, pair.1 + 1)
}

fn require_periodic(cfg: &RunConfig, what: &str) -> Result<(), Failure> {
    if cfg.lattice.boundary != Boundary::Periodic {
        return Err(Failure::config(format!("{what} needs a periodic lattice")));
    }
    Ok(())
}

pub fn bands(ctx: Context) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    require_periodic(cfg, "bands")?;
    let spec = cfg.spec()?;
    let profile = cfg.profile()?;
    let (pre, post) = (profile.initial_snapshot(spec.v), profile.terminal_snapshot(spec.v));
    let initial = solve_bands(&spec, &pre)?;
    ctx.manifest.warn(initial.warnings.iter().cloned());
    initial.write_csv(ctx.out.file("bands_initial.csv")?)?;
    if pre == post {
        return Ok(());
    }
    let terminal = solve_bands(&spec, &post)?;
    ctx.manifest.warn(terminal.warnings.iter().cloned());
    terminal.write_csv(ctx.out.file("bands_final.csv")?)?;
    let incident = cfg.incident_band()?;
    let m = spec.bands;
    let mut header = vec!["k_pi_units".to_string()];
    header.extend((1..=m).map(|a| format!("p_{a}")));
    header.extend((1..=m).map(|a| format!("theta_{a}_deg")));
    header.push("theta_incident_deg".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(spec.cells);
    for &k in &initial.kgrid {
        let mut row = vec![F(k / PI)];
        row.extend(scattering_probabilities(&spec, &pre, &post, k, incident)?.into_iter().map(F));
        row.extend(scattering_angles(&spec, &post, k)?.into_iter().map(F));
        row.push(F(scattering_angles(&spec, &pre, k)?[incident]));
        rows.push(row);
    }
    ctx.out.csv("scattering.csv", &header, rows)
}

fn scatter_run(cfg: &RunConfig, index: usize, pairs: Vec<(usize, usize)>, density: bool) -> Result<ScatterRun, Failure> {
    let profile = cfg.profiles[index].profile();
    profile.validate()?;
    let measure = cfg.lattice.boundary == Boundary::Periodic;
    Ok(ScatterRun {
        spec: cfg.spec()?,
        profile,
        setup: cfg.setup()?,
        evolution: cfg.evolution()?,
        pairs: if measure { pairs } else { Vec::new() },
        noise: None,
        record_density: density,
    })
}

/// Shared by `scatter` and `multiband`: S(t) for every profile and pair, density
/// of the first profile and final projections.
fn time_resolved(ctx: Context, pairs: Vec<(usize, usize)>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    if cfg.lattice.boundary != Boundary::Periodic {
        ctx.manifest.notes.push("open boundary: band projections skipped, density only".into());
    }
    let mut st_rows = Vec::new();
    for (index, profile_cfg) in cfg.profiles.iter().enumerate() {
        let density = index == 0 && (cfg.measure.density || cfg.lattice.boundary == Boundary::Open);
        let run = scatter_run(cfg, index, pairs.clone(), density)?;
        let outcome = run_scatter(&run)?;
        ctx.manifest.warn(outcome.warnings.iter().cloned());
        let name = profile_cfg.label();
        for rec in &outcome.records {
            for p in &rec.projections {
                st_rows.push(vec![
                    U(index as u64),
                    S(name.clone()),
                    F(rec.time),
                    U(p.alpha as u64 + 1),
                    U(p.beta as u64 + 1),
                    F(p.probability),
                    F(p.entropy),
                    U(u64::from(p.null)),
                ]);
            }
        }
        if density {
            let mut rows = Vec::new();
            let m = run.spec.bands;
            for rec in &outcome.records {
                if let Some(d) = &rec.density {
                    for (i, x) in d.iter().enumerate() {
                        rows.push(vec![F(rec.time), U((i / m) as u64 + 1), U((i % m) as u64 + 1), F(*x)]);
                    }
                }
            }
            ctx.out.csv("density.csv", &["time_inv_v", "cell", "site", "density"], rows)?;
        }
        if let Some(last) = outcome.last() {
            let summaries: Vec<_> = last.projections.iter().map(|p| p.summary()).collect();
            ctx.out.json(&format!("projection_{index}.json"), &summaries)?;
            for p in &last.projections {
                p.write_csv(ctx.out.file(&format!("projection_{index}_{}.csv", label((p.alpha, p.beta))))?)?;
            }
        }
        if ctx.oracle {
            dense_oracle(&run, ctx.manifest)?;
        }
    }
    ctx.out.csv(
        "entropy_time.csv",
        &["profile_index", "profile", "time_inv_v", "alpha", "beta", "probability", "entropy", "null"],
        st_rows,
    )
}

/// Cross-checks the orbital fast path against full two-particle evolution.
fn dense_oracle(run: &ScatterRun, manifest: &mut ManifestBuilder) -> Result<(), Failure> {
    let bands = solve_bands(
        &ssh_bell::LatticeSpec { boundary: Boundary::Periodic, ..run.spec },
        &run.profile.snapshot(run.spec.v, run.evolution.t_start),
    )?;
    let (pair, _) = run.setup.build(&bands)?;
    let cfg = run.evolution.clone().with_record_times(vec![run.evolution.t_end]);
    let fast = evolve_orbitals(&pair, &run.spec, &run.profile, None, &cfg)?;
    let dense = evolve_dense_two_particle(&pair, &run.spec, &run.profile, None, &cfg, false)?;
    let defect = 1.0 - fast[0].state.overlap(&dense[0].state).norm();
    manifest.notes.push(format!("oracle: orbital vs dense two-particle 1-|overlap| = {defect:.3e}"));
    if defect > ORACLE_TOL {
        return Err(Failure::numerical(format!("orbital and dense evolution disagree: 1-|overlap| = {defect:.3e}")));
    }
    Ok(())
}

pub fn scatter(ctx: Context) -> Result<(), Failure> {
    let pairs = ctx.cfg.pairs(false)?;
    time_resolved(ctx, pairs)
}

pub fn multiband(ctx: Context) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    if cfg.lattice.bands < 3 {
        return Err(Failure::config(format!("multiband needs at least 3 bands, got {}", cfg.lattice.bands)));
    }
    let pairs = cfg.pairs(true)?;
    if let Some(map) = &cfg.coupling_map {
        require_periodic(cfg, "the coupling map")?;
        let axis = linspace(map.eta_min, map.eta_max, map.eta_points);
        for &pair in &pairs {
            let req = MapRequest {
                spec: cfg.spec()?,
                axes: MapAxes::Coupling,
                x: axis.clone(),
                y: axis.clone(),
                k0: cfg.pair.k0_pi_units * PI,
                dk: cfg.pair.dk_pi_units * PI,
                statistics: cfg.pair.statistics,
                incident: cfg.incident_band()?,
                pair,
            };
            let m = entropy_map(&req)?;
            let name = format!("map_entropy_{}.csv", label(pair));
            m.write_csv(&m.entropy, "eta_f\\eta_i", ctx.out.file(&name)?)?;
        }
    }
    if !cfg.measure.evolve {
        return Ok(());
    }
    time_resolved(ctx, pairs)
}

pub fn decohere(ctx: Context) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    require_periodic(cfg, "decohere")?;
    let dec = cfg.decoherence.as_ref().ok_or_else(|| Failure::config("decohere needs a [decoherence] section"))?;
    let profile = cfg.profile()?;
    let pairs = cfg.pairs(false)?;
    let pair = pairs[0];
    let onset = dec.onset_inv_v.unwrap_or(profile.boundary_time());
    let run = scatter_run(cfg, 0, vec![pair], false)?;
    let curves = run_decoherence(&run, pair, &dec.gamma_v, onset)?;
    let rows = curves.iter().flat_map(|c| {
        (0..c.times.len()).map(move |i| vec![F(c.gamma), F(c.times[i]), F(c.entropy[i]), F(c.probability[i])])
    });
    ctx.out.csv("decoherence.csv", &["gamma_v", "time_inv_v", "entropy", "probability"], rows.collect::<Vec<_>>())?;
    if ctx.oracle {
        let dense = run_decoherence_dense(&run, pair, &dec.gamma_v, onset)?;
        let mut worst: f64 = 0.0;
        for (b, d) in curves.iter().zip(&dense) {
            for i in 0..b.times.len() {
                worst = worst.max((b.probability[i] - d.probability[i]).abs());
                if !b.probability[i].is_nan() && b.probability[i] > 1e-8 {
                    worst = worst.max((b.entropy[i] - d.entropy[i]).abs());
                }
            }
        }
        let rows = dense.iter().flat_map(|c| {
            (0..c.times.len()).map(move |i| vec![F(c.gamma), F(c.times[i]), F(c.entropy[i]), F(c.probability[i])])
        });
        ctx.out.csv(
            "decoherence_dense.csv",
            &["gamma_v", "time_inv_v", "entropy", "probability"],
            rows.collect::<Vec<_>>(),
        )?;
        ctx.manifest.notes.push(format!("oracle: block vs dense Lindblad max deviation {worst:.3e}"));
        if worst > LINDBLAD_ORACLE_TOL {
            return Err(Failure::numerical(format!("block and dense Lindblad disagree by {worst:.3e}")));
        }
    }
    Ok(())
}

const HOPPING_MODES: [HoppingMode; 2] = [HoppingMode::Global, HoppingMode::PerBond];
const ONSITE_MODES: [OnsiteMode; 3] = [OnsiteMode::PerSite, OnsiteMode::Staggered, OnsiteMode::Global];

fn mode_name<T: serde::Serialize>(mode: T) -> String {
    serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn noise_sweep(ctx: Context, seed_override: Option<u64>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    require_periodic(cfg, "noise-sweep")?;
    let noise = cfg.noise.as_ref().ok_or_else(|| Failure::config("noise-sweep needs a [noise] section"))?;
    if noise.zeta_v.iter().chain(&noise.xi_v).any(|x| !(*x >= 0.0)) {
        return Err(Failure::config("noise amplitudes must be non-negative"));
    }
    let seed = seed_override.unwrap_or(noise.seed);
    let pair = cfg.pairs(false)?[0];
    let mut base = scatter_run(cfg, 0, vec![pair], false)?;
    cfg.profile()?;
    base.evolution.record_times = vec![base.evolution.t_end];
    let sweep = NoiseSweep {
        base,
        pair,
        zetas: noise.zeta_v.clone(),
        xis: noise.xi_v.clone(),
        trials: noise.trials,
        seed,
        hopping_mode: noise.hopping_mode,
        onsite_mode: noise.onsite_mode,
    };
    let (_, cells) = run_noise_sweep(&sweep)?;
    ctx.manifest.master_seed = Some(seed);
    ctx.manifest.derived_seeds =
        (0..noise.trials as u64).map(|run_index| DerivedSeed { run_index, seed: derive_seed(seed, run_index) }).collect();
    ctx.manifest.notes.push("trial j uses run index j in every cell (common random numbers)".into());

    let nz = noise.zeta_v.len();
    let grid = |value: fn(&ssh_bell::SweepCell) -> f64| -> Vec<Vec<Field>> {
        noise
            .xi_v
            .iter()
            .enumerate()
            .map(|(iy, &xi)| {
                let mut row = vec![F(xi)];
                row.extend(cells[iy * nz..(iy + 1) * nz].iter().map(|c| F(value(c))));
                row
            })
            .collect()
    };
    let mut header = vec!["xi_v\\zeta_v".to_string()];
    header.extend(noise.zeta_v.iter().map(|z| ssh_bell::io::fmt_f64(*z)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.csv("fidelity_mean.csv", &header, grid(|c| c.stats.mean))?;
    ctx.out.csv("fidelity_std.csv", &header, grid(|c| c.stats.std))?;
    let trials = cells.iter().flat_map(|c| {
        c.fidelities.iter().enumerate().map(move |(j, f)| vec![F(c.zeta), F(c.xi), U(j as u64), F(*f)])
    });
    ctx.out.csv("fidelity_trials.csv", &["zeta_v", "xi_v", "trial", "fidelity"], trials.collect::<Vec<_>>())?;

    if !noise.sensitivity_cells_v.is_empty() {
        let mut rows = Vec::new();
        for hop in HOPPING_MODES {
            for onsite in ONSITE_MODES {
                for &[zeta, xi] in &noise.sensitivity_cells_v {
                    let one = NoiseSweep {
                        zetas: vec![zeta],
                        xis: vec![xi],
                        hopping_mode: hop,
                        onsite_mode: onsite,
                        ..sweep.clone()
                    };
                    let (_, c) = run_noise_sweep(&one)?;
                    rows.push(vec![
                        S(mode_name(hop)),
                        S(mode_name(onsite)),
                        F(zeta),
                        F(xi),
                        F(c[0].stats.mean),
                        F(c[0].stats.std),
                    ]);
                }
            }
        }
        ctx.out.csv(
            "noise_sensitivity.csv",
            &["hopping_mode", "onsite_mode", "zeta_v", "xi_v", "fidelity_mean", "fidelity_std"],
            rows,
        )?;
    }
    Ok(())
}

pub fn bell_map(ctx: Context) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    require_periodic(cfg, "bell-map")?;
    let spec = cfg.spec()?;
    if spec.bands != 2 {
        return Err(Failure::config("bell-map needs two bands"));
    }
    let stats = cfg.pair.statistics;
    let dk = cfg.pair.dk_pi_units * PI;
    if let Some(curve) = &cfg.curve {
        let k0s = linspace(curve.k0_min_pi_units * PI, curve.k0_max_pi_units * PI, curve.points);
        let points = bell_curve(curve.eta_i, &k0s);
        let mut rows = Vec::with_capacity(points.len());
        for &(k0, eta_f) in &points {
            let t = taylor_quantities(k0, curve.eta_i, eta_f)?;
            let s = entropy_versus_dk(&spec, (curve.eta_i, eta_f), k0, &[dk], stats)?[0];
            rows.push(vec![
                F(k0 / PI),
                F(curve.eta_i),
                F(eta_f),
                F(bell_residual(k0, curve.eta_i, eta_f)),
                F(t.xi),
                F(t.z),
                F(s),
            ]);
        }
        ctx.out.csv("bell_curve.csv", &["k0_pi_units", "eta_i", "eta_f", "residual", "xi", "z", "entropy"], rows)?;

        let dks = linspace(curve.dk_min_pi_units * PI, curve.dk_max_pi_units * PI, curve.dk_points);
        let mut rows = Vec::new();
        for marker in &curve.markers {
            let bc = bell_condition(marker.eta_i, marker.eta_f)?;
            let k0 = bc.k0.ok_or_else(|| {
                Failure::config(format!("marker '{}' has no real k0 (residual {})", marker.label, bc.residual))
            })?;
            let s = entropy_versus_dk(&spec, (marker.eta_i, marker.eta_f), k0, &dks, stats)?;
            for (d, e) in dks.iter().zip(s) {
                rows.push(vec![
                    S(marker.label.clone()),
                    F(marker.eta_i),
                    F(marker.eta_f),
                    F(k0 / PI),
                    F(d / PI),
                    F(e),
                ]);
            }
        }
        ctx.out.csv("entropy_dk.csv", &["marker", "eta_i", "eta_f", "k0_pi_units", "dk_pi_units", "entropy"], rows)?;
    }
    let incident = cfg.incident_band()?;
    let base = MapRequest {
        spec,
        axes: MapAxes::Coupling,
        x: Vec::new(),
        y: Vec::new(),
        k0: cfg.pair.k0_pi_units * PI,
        dk,
        statistics: stats,
        incident,
        pair: (0, 1),
    };
    if let Some(map) = &cfg.coupling_map {
        let axis = linspace(map.eta_min, map.eta_max, map.eta_points);
        let m = entropy_map(&MapRequest { x: axis.clone(), y: axis, ..base.clone() })?;
        m.write_csv(&m.entropy, "eta_f\\eta_i", ctx.out.file("map_coupling_entropy.csv")?)?;
        m.write_csv(&m.probability, "eta_f\\eta_i", ctx.out.file("map_coupling_probability.csv")?)?;
    }
    if let Some(map) = &cfg.onsite_map {
        let axis = linspace(map.delta_min_v, map.delta_max_v, map.delta_points);
        let m = entropy_map(&MapRequest { axes: MapAxes::Onsite { eta: map.eta }, x: axis.clone(), y: axis, ..base })?;
        m.write_csv(&m.entropy, "delta_f_v\\delta_i_v", ctx.out.file("map_onsite_entropy.csv")?)?;
        m.write_csv(&m.probability, "delta_f_v\\delta_i_v", ctx.out.file("map_onsite_probability.csv")?)?;
    }
    if cfg.curve.is_none() && cfg.coupling_map.is_none() && cfg.onsite_map.is_none() {
        return Err(Failure::config("bell-map needs [curve], [coupling_map] or [onsite_map]"));
    }
    Ok(())
}

/// Prints the text of a preset.
pub fn show_preset(name: &str, mut w: impl Write) -> Result<(), Failure> {
    w.write_all(crate::config::preset(name)?.as_bytes())?;
    Ok(())
}
