//! The pipelines behind each subcommand.

use halfline::checks::{property_suite, SuiteOptions};
use halfline::estimates::{
    decay_study, default_decay_times, dual_exponent, duhamel_trajectory, fit_power_law, horizon_propagator, lp_norm, mixed_norm, oracle_cross_check,
    random_forcing, strichartz_norm, strichartz_times, AdmissiblePoint, CrossCheck, DecayOptions, DecayReport, MixedNorm,
};
use halfline::io::{self, fmt_f64, StrichartzRow};
use halfline::oracle::{build_hamiltonian, DiscreteHamiltonian, Subspace};
use halfline::profiles::InitialData;
use halfline::propagator::{Mode, Propagator, PropagatorConfig};
use halfline::{Error, Potential, Result, UniformGrid, WaveField};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Route};
use crate::staging::{StagedDir, MARKER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Scattering matrix and bound states.
    Scatter,
    /// Evolve initial data to the configured times.
    Evolve,
    /// Fit L^p -> L^p' decay exponents.
    Decay,
    /// Strichartz and Duhamel mixed norms under doubling of T.
    Strichartz,
    /// Run the property suite.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scatter => "scatter",
            Command::Evolve => "evolve",
            Command::Decay => "decay",
            Command::Strichartz => "strichartz",
            Command::Check => "check",
        }
    }
}

/// Human-readable lines and the properties that failed.
#[derive(Default)]
pub struct Report {
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

impl Report {
    fn line(&mut self, s: String) {
        self.summary.push(s);
    }

    fn require(&mut self, ok: bool, what: String) {
        if !ok {
            self.failures.push(what);
        }
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &StagedDir) -> Result<Report> {
    let potential = cfg.potential()?;
    io::write_sidecar(
        &out.path(MARKER),
        "run",
        &json!({
            "command": cmd.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "potential_id": potential.id(),
            "potential": potential,
            "config": cfg,
        }),
    )?;
    let mut rep = Report::default();
    rep.line(format!("halfline {} on {}", cmd.name(), potential.id()));
    match cmd {
        Command::Scatter => scatter(cfg, &potential, out, &mut rep)?,
        Command::Evolve => evolve(cfg, &potential, out, &mut rep)?,
        Command::Decay => decay(cfg, &potential, out, &mut rep)?,
        Command::Strichartz => strichartz(cfg, &potential, out, &mut rep)?,
        Command::Check => check(cfg, &potential, out, &mut rep)?,
    }
    if rep.failures.is_empty() {
        rep.line("all properties hold".into());
    } else {
        rep.line(format!("{} property failure(s):", rep.failures.len()));
        let f = rep.failures.clone();
        f.into_iter().for_each(|s| rep.line(format!("  FAILED {s}")));
    }
    std::fs::write(out.path("summary.txt"), rep.summary.join("\n") + "\n")?;
    Ok(rep)
}

fn oracle_for(cfg: &ExperimentConfig, p: &Potential) -> Result<Option<DiscreteHamiltonian>> {
    cfg.mode.oracle().then(|| build_hamiltonian(p, &cfg.oracle)).transpose()
}

fn sample(data: &InitialData, cfg: &ExperimentConfig) -> Result<WaveField> {
    data.sample(cfg.step)
}

/// Relative L2 distance on the range both fields cover.
fn relative_l2(u: &WaveField, reference: &WaveField) -> Result<f64> {
    let end = u.grid.end().min(reference.grid.end());
    let g = UniformGrid::covering(0.0, end, u.grid.step)?;
    u.resample(g).relative_l2_error(&reference.resample(g))
}

fn scatter(cfg: &ExperimentConfig, p: &Potential, out: &StagedDir, rep: &mut Report) -> Result<()> {
    let prop = Propagator::new(p, PropagatorConfig::default())?;
    let scat = prop.scattering()?;
    let bs = &prop.bound_states;
    io::write_table_file(&out.path("scattering.csv"), &io::SCATTERING_HEADER, io::scattering_rows(scat))?;
    io::write_table_file(&out.path("bound_states.csv"), &io::BOUND_STATE_HEADER, io::bound_state_rows(bs))?;
    let unimod = scat.unimodularity_defect();
    rep.line(format!("max ||S(k)| - 1| = {unimod:.3e} on {} wavenumbers", scat.k.len()));
    rep.require(unimod < 1e-8, format!("unimodularity defect {unimod:.3e} >= 1e-8"));
    rep.line(format!("bound states: {} (kappa = {:?})", bs.len(), bs.kappas));
    let oracle = oracle_for(cfg, p)?;
    let oracle_count = oracle.as_ref().map(|h| h.negative_count());
    if let Some(n) = oracle_count {
        rep.line(format!("oracle negative eigenvalues: {n}"));
        rep.require(n == bs.len(), format!("bound-state count {} differs from the oracle's {n}", bs.len()));
    }
    io::write_sidecar(
        &out.path("scattering.json"),
        "scattering",
        &json!({
            "potential_id": p.id(),
            "k_grid": scat.k_grid,
            "options": scat.options,
            "unimodularity_defect": unimod,
            "unimodularity_tolerance": 1e-8,
            "conjugation_defect": scat.conjugation_defect(),
            "t_hat_l1": scat.t_hat_l1,
            "t_hat_tail_mass": scat.t_hat_tail_mass,
            "jost_zero_energy": scat.jost_zero_energy,
            "bound_states": {"kappa": bs.kappas, "energy": bs.energies, "options": prop.config.bound_states},
            "oracle": oracle.as_ref().map(|_| json!({"options": cfg.oracle, "negative_count": oracle_count})),
            "files": {"scattering": "scattering.csv", "bound_states": "bound_states.csv"},
        }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FieldEntry {
    t: f64,
    file: String,
    l2_norm: f64,
    trace_ratio: f64,
}

fn field_entry(u: &WaveField, file: String) -> FieldEntry {
    let m = u.max_abs();
    FieldEntry { t: u.time, file, l2_norm: u.norm_l2(), trace_ratio: if m > 0.0 { u.values[0].norm() / m } else { 0.0 } }
}

fn evolve(cfg: &ExperimentConfig, p: &Potential, out: &StagedDir, rep: &mut Report) -> Result<()> {
    let data = cfg.initial_data.clone().unwrap_or_else(|| cfg.cross_check_data.clone());
    let phi = sample(&data, cfg)?;
    let times = cfg.times.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
    let tail = cfg.tolerances.tail_fraction;
    let mut sections = serde_json::Map::new();
    let mut kernel_fields = Vec::new();
    if cfg.mode.kernel() {
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let prop = horizon_propagator(p, &phi, t_max, tail, &PropagatorConfig::default())?;
        kernel_fields = match cfg.route {
            Route::Direct => prop.evolve_many(&phi, &times, !cfg.project, tail)?,
            Route::Assembled => times
                .iter()
                .map(|&t| {
                    let g = prop.auto_grid(&phi, t)?;
                    if cfg.project {
                        prop.evolve(&phi, t, Mode::Assembled, Some(g))
                    } else {
                        prop.evolve_full(&phi, t, Mode::Assembled, Some(g))
                    }
                })
                .collect::<Result<_>>()?,
        };
        let mut entries = Vec::new();
        for (i, u) in kernel_fields.iter().enumerate() {
            let name = format!("field_kernel_{i:02}.csv");
            io::write_field_file(&out.path(&name), u)?;
            entries.push(field_entry(u, name));
        }
        let worst_trace = entries.iter().map(|e| e.trace_ratio).fold(0.0, f64::max);
        rep.line(format!("kernel ({:?} route): {} snapshots, max |u(0)|/max|u| = {worst_trace:.3e}", cfg.route, entries.len()));
        rep.require(worst_trace < 1e-6, format!("Dirichlet trace ratio {worst_trace:.3e} >= 1e-6"));
        sections.insert("kernel".into(), json!({"route": cfg.route, "k_grid": prop.config.k_grid, "snapshots": entries}));
    }
    if let Some(ham) = oracle_for(cfg, p)? {
        let subspace = if cfg.project { Subspace::Continuous } else { Subspace::All };
        let fields = ham.evolve_many(&ham.sample(&phi), &times, subspace)?;
        let mut entries = Vec::new();
        for (i, u) in fields.iter().enumerate() {
            let name = format!("field_oracle_{i:02}.csv");
            io::write_field_file(&out.path(&name), u)?;
            entries.push(field_entry(u, name));
        }
        rep.line(format!("oracle: {} snapshots on {} cells", entries.len(), ham.options.cells));
        let mut cross = Vec::new();
        if !kernel_fields.is_empty() {
            for (u, r) in kernel_fields.iter().zip(&fields) {
                cross.push(CrossCheck { t: u.time, relative_l2: relative_l2(u, r)? });
            }
            report_cross_check(&cross, cfg.tolerances.cross_check, rep);
        }
        sections.insert("oracle".into(), json!({"options": cfg.oracle, "snapshots": entries}));
        sections.insert("cross_check".into(), json!(cross));
    }
    io::write_sidecar(
        &out.path("evolve.json"),
        "evolve",
        &json!({
            "potential_id": p.id(),
            "mode": cfg.mode,
            "projected": cfg.project,
            "initial_data": data,
            "step": cfg.step,
            "times": times,
            "tolerances": {"tail_fraction": tail, "cross_check": cfg.tolerances.cross_check, "trace": 1e-6},
            "sections": sections,
        }),
    )?;
    Ok(())
}

fn report_cross_check(cross: &[CrossCheck], tol: f64, rep: &mut Report) {
    rep.line("cross-check (kernel vs oracle, relative L2):".into());
    for c in cross {
        rep.line(format!("  t = {:>5}: {:.3e}", c.t, c.relative_l2));
    }
    let worst = cross.iter().map(|c| c.relative_l2).fold(0.0, f64::max);
    rep.line(format!("  max kernel-vs-oracle relative L2 error = {worst:.3e} (tolerance {tol:e})"));
    rep.require(worst < tol, format!("kernel-vs-oracle error {worst:.3e} >= {tol:e}"));
}

/// Decay fits from the oracle's spectral evolution.
fn oracle_decay(ham: &DiscreteHamiltonian, p: &Potential, phi: &WaveField, ps: &[f64], times: &[f64], project: bool) -> Result<Vec<DecayReport>> {
    let subspace = if project { Subspace::Continuous } else { Subspace::All };
    let traj = ham.evolve_many(&ham.sample(phi), times, subspace)?;
    ps.iter()
        .map(|&pp| {
            let norms: Vec<f64> = traj.iter().map(|u| lp_norm(u, dual_exponent(pp))).collect();
            Ok(DecayReport {
                potential_id: p.id(),
                p: pp,
                target: 1.0 / pp - 0.5,
                projected: project,
                data_norm: lp_norm(phi, pp),
                times: times.to_vec(),
                fit: fit_power_law(times, &norms)?,
                norms,
                sobolev: None,
                cross_check: Vec::new(),
            })
        })
        .collect()
}

fn decay(cfg: &ExperimentConfig, p: &Potential, out: &StagedDir, rep: &mut Report) -> Result<()> {
    let data = cfg.initial_data.clone().unwrap_or(InitialData::Bump { center: 2.0, half_width: 1.5 });
    let phi = sample(&data, cfg)?;
    let times = cfg.times.clone().unwrap_or_else(default_decay_times);
    let tol = cfg.tolerances.exponent;
    let opts = DecayOptions { times: times.clone(), project: cfg.project, sobolev: cfg.sobolev, tail_fraction: cfg.tolerances.tail_fraction, config: PropagatorConfig::default() };
    let oracle = oracle_for(cfg, p)?;
    let prop = Propagator::new(p, PropagatorConfig::default())?;
    let has_bound = !prop.bound_states.is_empty();
    let main = match (&oracle, cfg.mode.kernel()) {
        (_, true) => decay_study(p, &phi, &cfg.p_list, &opts, None)?,
        (Some(h), false) => oracle_decay(h, p, &phi, &cfg.p_list, &times, cfg.project)?,
        (None, false) => unreachable!("oracle mode always builds the oracle"),
    };
    rep.line(format!("data {data:?}, times {times:?}, {} bound state(s)", prop.bound_states.len()));
    for r in &main {
        let ok = r.exponent_error() <= tol;
        rep.line(format!(
            "p = {:.4}: fitted alpha = {:.4} (target {:.4}, |error| {:.4}, residual {:.2e}){}",
            r.p,
            r.fit.alpha,
            r.target,
            r.exponent_error(),
            r.fit.residual_rms,
            if r.projected { "" } else { " without P_c" }
        ));
        rep.require(ok, format!("p = {:.4}: |alpha - target| = {:.4} > {tol}", r.p, r.exponent_error()));
        if let (Some(s), Some(err)) = (&r.sobolev, r.sobolev_exponent_error()) {
            rep.line(format!("         W^1,p variant: alpha = {:.4} (|error| {err:.4}, |u(0)| = {:.1e})", s.fit.alpha, s.data_norm.trace));
            rep.require(err <= tol, format!("p = {:.4} (W^1,p): |alpha - target| = {err:.4} > {tol}", r.p));
        }
    }
    let mut unprojected = Vec::new();
    if cfg.project && cfg.compare_unprojected && has_bound {
        let o = DecayOptions { project: false, sobolev: false, ..opts.clone() };
        unprojected = match (&oracle, cfg.mode.kernel()) {
            (_, true) => decay_study(p, &phi, &[1.0], &o, None)?,
            (Some(h), false) => oracle_decay(h, p, &phi, &[1.0], &times, false)?,
            (None, false) => unreachable!(),
        };
        for r in &unprojected {
            rep.line(format!(
                "without P_c, p = 1: fitted alpha = {:.4} (|error| {:.4}; expected to miss because bound states do not disperse)",
                r.fit.alpha,
                r.exponent_error()
            ));
        }
    }
    let mut cross = Vec::new();
    if let (Some(h), true) = (&oracle, cfg.mode.kernel()) {
        let cphi = sample(&cfg.cross_check_data, cfg)?;
        let ct: Vec<f64> = [1.0, 2.0, 4.0, 8.0].into_iter().collect();
        cross = oracle_cross_check(&prop, h, &cphi, &ct, cfg.project)?;
        report_cross_check(&cross, cfg.tolerances.cross_check, rep);
    }
    let mut all = main.clone();
    all.extend(unprojected.iter().cloned());
    io::write_table_file(&out.path("decay.csv"), &io::DECAY_HEADER, io::decay_rows(&all))?;
    io::write_sidecar(
        &out.path("decay.json"),
        "decay",
        &json!({
            "potential_id": p.id(),
            "mode": cfg.mode,
            "initial_data": data,
            "step": cfg.step,
            "reports": main,
            "unprojected": unprojected,
            "cross_check": {"data": cfg.cross_check_data, "results": cross},
            "tolerances": {"exponent": tol, "cross_check": cfg.tolerances.cross_check, "tail_fraction": cfg.tolerances.tail_fraction},
            "oracle": oracle.as_ref().map(|_| cfg.oracle),
            "files": {"decay": "decay.csv"},
        }),
    )?;
    Ok(())
}

fn strichartz(cfg: &ExperimentConfig, p: &Potential, out: &StagedDir, rep: &mut Report) -> Result<()> {
    if !cfg.mode.kernel() {
        return Err(Error::Config("strichartz needs the kernel propagator (mode kernel or both)".into()));
    }
    let s = &cfg.strichartz;
    let tail = cfg.tolerances.tail_fraction;
    let tol = cfg.tolerances.strichartz_change;
    let data = cfg.initial_data.clone().unwrap_or(InitialData::Gaussian { center: 4.0, width: 1.5 });
    let phi = sample(&data, cfg)?;
    let half = 0.5 * s.t_max;
    let prop = horizon_propagator(p, &phi, s.t_max, tail, &PropagatorConfig::default())?;
    let times = strichartz_times(s.t_max);
    let traj = prop.evolve_many(&phi, &times, !cfg.project, tail)?;
    let n2 = lp_norm(&phi, 2.0);
    let mut rows = Vec::new();
    let mut changes = Vec::new();
    rep.line(format!("Gamma ratios ||u||_(L^r L^p) / ||phi||_2 at T = {half} and {}:", s.t_max));
    for &inv_p in &s.points {
        let pt = AdmissiblePoint::new(inv_p)?;
        let a = strichartz_norm(&traj, pt, half)?;
        let b = strichartz_norm(&traj, pt, s.t_max)?;
        let change = (b.value / a.value - 1.0).abs();
        rep.line(format!("  1/p = {:.4}, 1/r = {:.4}: {:.6} -> {:.6} (change {:.2e})", pt.inv_p, pt.inv_r, a.value / n2, b.value / n2, change));
        rep.require(change < tol, format!("Strichartz ratio at 1/p = {inv_p} changes by {change:.3e}"));
        warn(&a, rep);
        warn(&b, rep);
        changes.push(json!({"inv_p": pt.inv_p, "inv_r": pt.inv_r, "change": change}));
        for (t_end, m) in [(half, a), (s.t_max, b)] {
            let ratio = m.value / n2;
            rows.push(StrichartzRow { quantity: "gamma".into(), inv_p: pt.inv_p, inv_r: pt.inv_r, t_end, norm: m, ratio });
        }
    }
    let mut duhamel = serde_json::Value::Null;
    if s.duhamel {
        let seed = cfg.seed.unwrap_or(7);
        let forcing = random_forcing(seed, s.forcing_duration, s.forcing_dt, cfg.step)?;
        let mid = &forcing.fields[forcing.fields.len() / 2];
        let dprop = horizon_propagator(p, mid, s.t_max, tail, &PropagatorConfig::default())?;
        let n = forcing.fields.len();
        let mut gt: Vec<f64> = (0..n).map(|j| j as f64 * forcing.dt).collect();
        gt.extend(strichartz_times(s.t_max).into_iter().filter(|&t| t > forcing.end() + 1e-12));
        let g = duhamel_trajectory(&dprop, &forcing, &gt, tail)?;
        let ft = forcing.trajectory();
        let mut pairs = Vec::new();
        rep.line(format!("Duhamel ratios ||G f||_(L(P)) / ||f||_(L(Q')) for random forcing (seed {seed}):"));
        for (pp, q) in [(AdmissiblePoint::c(), AdmissiblePoint::b()), (AdmissiblePoint::b(), AdmissiblePoint::c())] {
            let (ip, ir) = q.dual();
            let fnorm = mixed_norm(&ft, ip, ir, forcing.end())?;
            let a = strichartz_norm(&g, pp, half)?;
            let b = strichartz_norm(&g, pp, s.t_max)?;
            let change = (b.value / a.value - 1.0).abs();
            rep.line(format!(
                "  P = ({:.2}, {:.2}), Q = ({:.2}, {:.2}): {:.6} -> {:.6} (change {:.2e})",
                pp.inv_p,
                pp.inv_r,
                q.inv_p,
                q.inv_r,
                a.value / fnorm.value,
                b.value / fnorm.value,
                change
            ));
            rep.require(change < tol, format!("Duhamel ratio for P = {pp:?}, Q = {q:?} changes by {change:.3e}"));
            warn(&a, rep);
            warn(&b, rep);
            pairs.push(json!({"p_point": pp, "q_point": q, "forcing_norm": fnorm.value, "change": change}));
            for (t_end, m) in [(half, a), (s.t_max, b)] {
                let ratio = m.value / fnorm.value;
                rows.push(StrichartzRow { quantity: "duhamel".into(), inv_p: pp.inv_p, inv_r: pp.inv_r, t_end, norm: m, ratio });
            }
        }
        duhamel = json!({"seed": seed, "duration": s.forcing_duration, "dt": s.forcing_dt, "pairs": pairs});
    }
    io::write_table_file(&out.path("strichartz.csv"), &io::STRICHARTZ_HEADER, io::strichartz_rows(&rows))?;
    io::write_sidecar(
        &out.path("strichartz.json"),
        "strichartz",
        &json!({
            "potential_id": p.id(),
            "initial_data": data,
            "projected": cfg.project,
            "step": cfg.step,
            "t_max": s.t_max,
            "samples": times.len(),
            "gamma": changes,
            "duhamel": duhamel,
            "tolerances": {"change": tol, "tail_fraction": tail, "resolution_warning": halfline::estimates::RESOLUTION_WARNING},
            "files": {"table": "strichartz.csv"},
        }),
    )?;
    Ok(())
}

fn warn(m: &MixedNorm, rep: &mut Report) {
    if let Some(w) = &m.warning {
        rep.line(format!("  warning: {w}"));
    }
}

fn check(cfg: &ExperimentConfig, p: &Potential, out: &StagedDir, rep: &mut Report) -> Result<()> {
    let prop = Propagator::new(p, PropagatorConfig::default())?;
    let oracle = oracle_for(cfg, p)?;
    let opts = SuiteOptions { data: cfg.cross_check_data.clone(), cross_check_tol: cfg.tolerances.cross_check, ..SuiteOptions::default() };
    let results = property_suite(&prop, oracle.as_ref(), &opts)?;
    for c in &results {
        rep.line(format!("{:<28} {:>11.3e}  (limit {:.3e})  {}  {}", c.name, c.measured, c.tolerance, if c.passed { "ok" } else { "FAIL" }, c.detail));
        rep.require(c.passed, format!("{}: {:.3e} against {:.3e}", c.name, c.measured, c.tolerance));
    }
    let rows = results.iter().map(|c| vec![c.name.clone(), fmt_f64(c.measured), fmt_f64(c.tolerance), c.passed.to_string()]);
    io::write_table_file(&out.path("check.csv"), &["name", "measured", "tolerance", "passed"], rows)?;
    io::write_sidecar(&out.path("check.json"), "check", &json!({"potential_id": p.id(), "options": opts, "oracle": oracle.as_ref().map(|_| cfg.oracle), "results": results}))?;
    Ok(())
}
