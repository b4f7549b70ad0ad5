//! The subcommands.  Each takes a resolved configuration and returns its
//! checks, result payloads and CSV tables; writing them is left to the
//! caller.

use super::config::Resolved;
use super::report::{Check, Outcome, Table};
use crate::equilibrium::{
    brin_katok_entropy, conditional_density_check, coordinate_histograms, correlation_decay,
    forward_backward_pressure, gibbs_check, invariance_check, EquilibriumSampler,
};
use crate::error::{Error, Result};
use crate::leaf::export::leaf_summary_json;
use crate::leaf::{
    holonomy_jacobian_check, leaf_measure_with, quasi_invariance_residual, spanning_set_pressure,
    LeafOptions, PressureMethod, PressureReport,
};
use crate::potentials::livsic_obstruction;
use crate::torus::LeafKind;

fn f(v: f64) -> String {
    format!("{v:.12e}")
}

fn method_name(m: PressureMethod) -> &'static str {
    match m {
        PressureMethod::LeafGrowth => "leaf_growth",
        PressureMethod::SpanningSet => "spanning_set",
        PressureMethod::BrinKatokPlusIntegral => "brin_katok_plus_integral",
    }
}

/// Leaf-growth pressure at the anchor (unstable leaves of `f`).
pub fn leaf_growth(r: &Resolved) -> Result<PressureReport> {
    let l = &r.config.leaf;
    let opts = LeafOptions {
        kind: LeafKind::Unstable,
        ..l.options()
    };
    let (_, rep) = leaf_measure_with(
        &r.system,
        &r.potential,
        &r.anchor,
        l.half_width,
        l.depth,
        l.n_atoms,
        &opts,
    )?;
    Ok(rep)
}

/// The pressure the verification checks use: leaf growth plus the
/// configured offset.
fn working_pressure(r: &Resolved) -> Result<f64> {
    Ok(leaf_growth(r)?.value + r.config.pressure_offset)
}

/// The sampler, or the reason this configuration has none.
fn sampler_or_skip(r: &Resolved) -> Result<std::result::Result<EquilibriumSampler, String>> {
    match EquilibriumSampler::build(&r.system, &r.potential, &r.config.sampler) {
        Ok(s) => Ok(Ok(s)),
        Err(Error::Unsupported(m)) => Ok(Err(m)),
        Err(e) => Err(e),
    }
}

/// `pressure`: leaf growth, spanning sets (within budget) and Brin–Katok
/// entropy plus `∫φ`; passes when the estimators agree.
pub fn pressure(r: &Resolved) -> Result<Outcome> {
    let tol = &r.tolerances;
    let mut out = Outcome::default();
    let mut methods: Vec<PressureReport> = vec![leaf_growth(r)?];
    match spanning_set_pressure(&r.system, &r.potential, &r.spanning()) {
        Ok(rep) => methods.push(rep),
        Err(e @ Error::Budget { .. }) => {
            out.checks.push(Check::skipped(
                "spanning_set",
                "P = lim (1/n) log S(ε, n)",
                e.to_string(),
            ));
        }
        Err(e) => return Err(e),
    }
    match sampler_or_skip(r)? {
        Ok(sm) => {
            let e = brin_katok_entropy(&sm, &r.config.entropy)?;
            out.result("entropy", &e)?;
            methods.push(PressureReport {
                method: PressureMethod::BrinKatokPlusIntegral,
                value: e.variational_sum,
                n_used: e.centers,
                params: [
                    ("n".to_string(), e.n as f64),
                    ("n0".to_string(), e.n0 as f64),
                    ("epsilon".to_string(), r.config.entropy.epsilon),
                ]
                .into_iter()
                .collect(),
                error_estimate: e.entropy_stderr.hypot(e.integral_stderr),
                spread: f64::NAN,
                trace: Vec::new(),
            });
        }
        Err(reason) => out.checks.push(Check::skipped(
            "brin_katok_plus_integral",
            "P = h_m + ∫φ dm",
            reason,
        )),
    }
    let lo = methods
        .iter()
        .map(|m| m.value)
        .fold(f64::INFINITY, f64::min);
    let hi = methods
        .iter()
        .map(|m| m.value)
        .fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(
        Check::at_most(
            "estimators_agree",
            "max |P_i − P_j| over the estimators",
            hi - lo,
            tol.pressure_agreement,
        )
        .with_note(format!("{} estimators", methods.len())),
    );
    if let Some(p) = r.config.expected_pressure {
        for m in &methods {
            let t = if m.method == PressureMethod::LeafGrowth {
                tol.leaf_growth_accuracy
            } else {
                tol.pressure_agreement
            };
            out.checks.push(Check::at_most(
                &format!("{}_vs_expected", method_name(m.method)),
                "|P − P_expected|",
                (m.value - p).abs(),
                t,
            ));
        }
    }
    let mut table = Table::new(
        "pressure.csv",
        &["method", "value", "error_estimate", "spread"],
    );
    let mut trace = Table::new("pressure_trace.csv", &["method", "index", "value"]);
    for m in &methods {
        table.push([
            method_name(m.method).to_string(),
            f(m.value),
            f(m.error_estimate),
            f(m.spread),
        ]);
        for (i, v) in m.trace.iter().enumerate() {
            trace.push([
                method_name(m.method).to_string(),
                (i + 1).to_string(),
                f(*v),
            ]);
        }
    }
    out.tables.push(table);
    out.tables.push(trace);
    out.result("methods", &methods)?;
    Ok(out)
}

/// `leaf-measure`: the leaf measure at the anchor with its invariants.
pub fn leaf_measure_cmd(r: &Resolved) -> Result<Outcome> {
    let l = &r.config.leaf;
    let (m, rep) = leaf_measure_with(
        &r.system,
        &r.potential,
        &r.anchor,
        l.half_width,
        l.depth,
        l.n_atoms,
        &l.options(),
    )?;
    let mut out = Outcome::default();
    out.checks.push(match m.check_invariants() {
        Ok(()) => Check::holds(
            "invariants",
            "positive mass on every dyadic subwindow, atoms inside the window",
            true,
        ),
        Err(e) => Check::holds(
            "invariants",
            "positive mass on every dyadic subwindow, atoms inside the window",
            false,
        )
        .with_note(e.to_string()),
    });
    out.checks.push(Check::at_most(
        "pressure_trace_spread",
        "max − min of the final log-mass increments",
        rep.spread,
        r.tolerances.trace_spread,
    ));
    out.results
        .insert("leaf_measure".into(), leaf_summary_json(&m, &rep));
    let mut table = Table::new("leaf.csv", &["t", "weight", "density"]);
    for ((a, p), d) in m.atoms.iter().zip(m.probabilities()).zip(m.densities()) {
        table.push([f(a.t), f(p), f(d)]);
    }
    out.tables.push(table);
    let mut trace = Table::new("pressure_trace.csv", &["generation", "increment"]);
    for (i, v) in rep.trace.iter().enumerate() {
        trace.push([(i + 1).to_string(), f(*v)]);
    }
    out.tables.push(trace);
    Ok(out)
}

fn require_sampler(r: &Resolved) -> Result<EquilibriumSampler> {
    EquilibriumSampler::build(&r.system, &r.potential, &r.config.sampler)
}

/// `sample`: points of the equilibrium state, with the Lebesgue histogram
/// check when the config declares that oracle.
pub fn sample(r: &Resolved) -> Result<Outcome> {
    let sm = require_sampler(r)?;
    let mut out = Outcome::default();
    let pts = sm.sample(r.config.sample.count)?;
    let d = r.system.dim();
    let header: Vec<String> = ["x1", "x2"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=d - 2).map(|i| format!("theta{i}")))
        .collect();
    let mut table = Table {
        file: "samples.csv".into(),
        header,
        rows: Vec::new(),
    };
    for p in &pts {
        table.push(p.coords().iter().map(|&v| f(v)));
    }
    out.tables.push(table);
    out.result("boxes", &sm.boxes.len())?;
    out.result("log_normalization", &sm.log_total)?;
    if r.config.sample.lebesgue_oracle {
        let c = histogram_check(r, &sm, &mut out)?;
        out.checks.push(c);
    }
    Ok(out)
}

fn histogram_check(r: &Resolved, sm: &EquilibriumSampler, out: &mut Outcome) -> Result<Check> {
    let s = &r.config.sample;
    let h = coordinate_histograms(
        sm,
        s.histogram_bins,
        s.histogram_samples,
        r.config.seed.wrapping_add(4),
    )?;
    out.result("histogram", &h)?;
    Ok(Check::at_most(
        "lebesgue_histogram",
        "sup |count/expected − 1| of coordinate histograms",
        h.sup_rel,
        r.tolerances.histogram,
    ))
}

/// `gibbs`: the ratio ladder at the anchor.
pub fn gibbs(r: &Resolved) -> Result<Outcome> {
    let sm = require_sampler(r)?;
    let mut out = Outcome::default();
    let p = working_pressure(r)?;
    gibbs_into(r, &sm, p, &mut out)?;
    Ok(out)
}

fn gibbs_into(r: &Resolved, sm: &EquilibriumSampler, p: f64, out: &mut Outcome) -> Result<()> {
    let g = gibbs_check(sm, &r.anchor, p, &r.config.gibbs)?;
    out.checks.push(
        Check::at_most(
            "gibbs_rate",
            "|κ̂| for R_n = m(D(x, ε, n)) e^{nP − S_nφ(x)}",
            g.kappa.abs(),
            r.tolerances.gibbs_rate,
        )
        .with_note(format!(
            "κ̂ = {:.4} ± {:.4}, max(R, 1/R) = {:.3e}",
            g.kappa, g.kappa_stderr, g.bound
        )),
    );
    let mut table = Table::new(
        "gibbs.csv",
        &[
            "n",
            "samples",
            "hits",
            "mass",
            "birkhoff",
            "ratio",
            "stderr_log",
            "oscillation",
        ],
    );
    for row in &g.rows {
        table.push([
            row.n.to_string(),
            row.samples.to_string(),
            row.hits.to_string(),
            f(row.mass),
            f(row.birkhoff),
            f(row.ratio),
            f(row.stderr_log),
            f(row.oscillation),
        ]);
    }
    out.tables.push(table);
    out.result("gibbs", &g)
}

/// `correlation`: `C_n` for the configured observables.
pub fn correlation(r: &Resolved) -> Result<Outcome> {
    let sm = require_sampler(r)?;
    let mut out = Outcome::default();
    correlation_into(r, &sm, &mut out)?;
    Ok(out)
}

fn correlation_into(r: &Resolved, sm: &EquilibriumSampler, out: &mut Outcome) -> Result<()> {
    let (g, h) = r.observables();
    let c = &r.config.correlation;
    let rows = correlation_decay(
        sm,
        &g,
        &h,
        c.n_max,
        c.samples,
        r.config.seed.wrapping_add(5),
    )?;
    let last = rows.last().expect("n_max + 1 rows");
    out.checks.push(
        Check::at_most(
            "correlation_decay",
            "|C_n| = |⟨g·h∘fⁿ⟩ − ⟨g⟩⟨h⟩| at the last lag",
            last.correlation.abs(),
            r.tolerances.correlation,
        )
        .with_note(format!(
            "n = {}, standard error {:.1e}",
            last.n, last.stderr
        )),
    );
    let mut table = Table::new("correlation.csv", &["n", "correlation", "stderr"]);
    for row in &rows {
        table.push([row.n.to_string(), f(row.correlation), f(row.stderr)]);
    }
    out.tables.push(table);
    out.result("correlation", &rows)
}

/// `livsic`: periodic-orbit sums against `period × constant`.
pub fn livsic(r: &Resolved) -> Result<Outcome> {
    let l = &r.config.livsic;
    let sums = livsic_obstruction(&r.potential, &r.system, l.max_period, l.candidate)?;
    let worst = sums.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    let mut out = Outcome::default();
    out.checks.push(
        Check::at_most(
            "livsic_sums",
            "max over periodic orbits |S_pφ − expected|",
            worst,
            r.tolerances.livsic,
        )
        .with_note(format!(
            "{} orbit sums, periods ≤ {}",
            sums.len(),
            l.max_period
        )),
    );
    out.tables.push(orbit_table("livsic.csv", &sums));
    out.result("orbit_sums", &sums.len())?;
    out.result("max_abs_residual", &worst)?;
    Ok(out)
}

fn orbit_table(file: &str, sums: &[crate::potentials::OrbitSum]) -> Table {
    let mut t = Table::new(
        file,
        &[
            "period",
            "x1",
            "x2",
            "truncation",
            "sum",
            "expected",
            "residual",
        ],
    );
    for s in sums {
        t.push([
            s.period.to_string(),
            f(s.orbit[0][0]),
            f(s.orbit[0][1]),
            s.truncation.to_string(),
            f(s.sum),
            f(s.expected),
            f(s.value),
        ]);
    }
    t
}

/// `appendix-d`: the truncated coboundary series — vanishing orbit sums,
/// the cocycle identity of its terms, and the growing oscillation of the
/// truncated transfer functions.
pub fn appendix_d(r: &Resolved) -> Result<Outcome> {
    let ap = r.potential.appendix().ok_or_else(|| {
        Error::InvalidInput("appendix-d needs a potential of kind \"appendix_d\"".into())
    })?;
    let a = &r.config.appendix;
    let mut out = Outcome::default();
    let sums = livsic_obstruction(&r.potential, &r.system, a.max_period, None)?;
    let worst = sums.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    out.checks.push(
        Check::at_most(
            "livsic_truncations",
            "max |S_pφ_N − boundary term| over orbits and N",
            worst,
            r.tolerances.livsic,
        )
        .with_note(format!(
            "{} sums, periods ≤ {}, N ≤ {}",
            sums.len(),
            a.max_period,
            ap.n_trunc()
        )),
    );
    let cocycle =
        ap.cocycle_residual(&r.system, a.cocycle_points, r.config.seed.wrapping_add(6))?;
    out.checks.push(Check::at_most(
        "cocycle_identity",
        "max |d_n(f(x, θ)) − e^{2πi k(x)⟨α, m_n⟩} d_n(x, θ)|",
        cocycle,
        r.tolerances.cocycle,
    ));
    let rows = ap.oscillation();
    let increasing = rows.windows(2).all(|w| w[1].oscillation > w[0].oscillation);
    out.checks.push(Check::holds(
        "oscillation_growth",
        "oscillation of Σ_{n≤N} d_n strictly increasing in N",
        increasing,
    ));
    let mut t = Table::new(
        "oscillation.csv",
        &["n", "witness_h", "oscillation", "sup_norm", "scale"],
    );
    for row in &rows {
        t.push([
            row.n.to_string(),
            f(row.h),
            f(row.oscillation),
            f(row.sup_norm),
            f(row.scale),
        ]);
    }
    out.tables.push(t);
    out.tables.push(orbit_table("livsic.csv", &sums));
    out.result("oscillation", &rows)?;
    out.result("cocycle_residual", &cocycle)?;
    out.result("livsic_max_residual", &worst)?;
    Ok(out)
}

/// `verify`: quasi-invariance, holonomy, invariance and `P = P′`, Gibbs,
/// entropy, conditional densities and correlation decay.  Checks that do
/// not apply to the configuration are reported as skipped.
pub fn verify(r: &Resolved) -> Result<Outcome> {
    let tol = &r.tolerances;
    let v = &r.config.verify;
    let mut out = Outcome::default();
    let p = working_pressure(r)?;
    out.result("pressure_used", &p)?;
    // Quasi-invariance along the depth ladder.
    const QI: &str = "f⁻¹μ^u_{fx} = e^{P−φ} μ^u_x";
    if r.system.is_linear_base() {
        let mut reports = Vec::new();
        for &n in &v.quasi_invariance_depths {
            reports.push(quasi_invariance_residual(
                &r.system,
                &r.potential,
                &r.anchor,
                p,
                v.quasi_invariance_half_width,
                n,
                v.quasi_invariance_atoms,
            )?);
        }
        let last = reports.last().expect("non-empty ladder");
        let decreasing = reports.windows(2).all(|w| w[1].tv < w[0].tv) || last.tv < 1e-12;
        out.checks.push(
            Check::at_most("quasi_invariance", QI, last.worst(), tol.quasi_invariance).with_note(
                format!("TV {:.2e}, mass defect {:.2e}", last.tv, last.mass_defect),
            ),
        );
        out.checks.push(Check::holds(
            "quasi_invariance_monotone",
            "TV residual decreasing along the depth ladder",
            decreasing,
        ));
        let mut t = Table::new("quasi_invariance.csv", &["depth", "tv", "mass_defect"]);
        for q in &reports {
            t.push([q.depth.to_string(), f(q.tv), f(q.mass_defect)]);
        }
        out.tables.push(t);
        out.result("quasi_invariance", &reports)?;
        let hol = holonomy_jacobian_check(
            &r.system,
            &r.potential,
            &r.anchor,
            v.holonomy_distance,
            v.holonomy_half_width,
            v.holonomy_depth,
            v.holonomy_atoms,
        );
        match hol {
            Ok(h) => {
                out.checks.push(Check::at_most(
                    "holonomy_jacobian",
                    "(h^s)⁻¹μ_y = Jac^s · μ_x",
                    h.sup_rel_error,
                    tol.holonomy,
                ));
                out.result("holonomy", &h)?;
            }
            Err(Error::Unsupported(m)) => out.checks.push(Check::skipped(
                "holonomy_jacobian",
                "(h^s)⁻¹μ_y = Jac^s · μ_x",
                m,
            )),
            Err(e) => return Err(e),
        }
    } else {
        out.checks.push(Check::skipped(
            "quasi_invariance",
            QI,
            "implemented for linear bases".into(),
        ));
    }
    // Checks on the assembled measure.
    let sm = match sampler_or_skip(r)? {
        Ok(sm) => sm,
        Err(reason) => {
            for (name, prop) in [
                ("invariance", "m(f⁻¹U) = m(U)"),
                ("pressure_forward_backward", "P = P′"),
                ("gibbs_rate", "bounded R_n"),
                ("variational", "h + ∫φ = P"),
                ("conditional_density", "conditionals ∝ Δ^u_w μ^u_w"),
                ("correlation_decay", "C_n → 0"),
            ] {
                out.checks.push(Check::skipped(name, prop, reason.clone()));
            }
            return Ok(out);
        }
    };
    let (pf, pb) = forward_backward_pressure(
        &r.system,
        &r.potential,
        &r.anchor,
        r.config.leaf.half_width,
        r.config.leaf.depth,
        r.config.leaf.n_atoms,
    )?;
    let inv = invariance_check(
        &sm,
        v.invariance_sets,
        r.config.seed.wrapping_add(7),
        (pf.value, pb.value),
    )?;
    out.checks.push(Check::at_most(
        "invariance",
        "max |m(f⁻¹U)/m(U) − 1|",
        inv.max_rel,
        tol.invariance,
    ));
    out.checks.push(Check::at_most(
        "pressure_forward_backward",
        "|P − P′|",
        inv.pressure_gap,
        tol.pressure_gap,
    ));
    out.result("invariance", &inv)?;
    gibbs_into(r, &sm, p, &mut out)?;
    let e = brin_katok_entropy(&sm, &r.config.entropy)?;
    out.checks.push(
        Check::at_most(
            "variational",
            "|h + ∫φ dm − P| / max(|P|, h)",
            e.relative_gap(p),
            tol.entropy_relative,
        )
        .with_note(format!("h = {:.4}, ∫φ = {:.4}", e.entropy, e.integral_phi)),
    );
    out.checks
        .push(Check::holds("entropy_positive", "h_m > 0", e.entropy > 0.0));
    out.result("entropy", &e)?;
    let bx = nearest_box(&sm, r);
    let cd = conditional_density_check(&sm, bx, &r.config.conditional)?;
    out.checks.push(
        Check::at_most(
            "conditional_density",
            "sup over fibers and bins |empirical / (Δ^u_w μ^u_w / L(w)) − 1|",
            cd.worst_sup_rel,
            tol.conditional,
        )
        .with_note(format!(
            "coverage {:.2}, mean over fibers {:.3}",
            cd.coverage, cd.sup_rel
        )),
    );
    out.result("conditional_density", &cd)?;
    correlation_into(r, &sm, &mut out)?;
    if r.config.sample.lebesgue_oracle {
        let c = histogram_check(r, &sm, &mut out)?;
        out.checks.push(c);
    }
    Ok(out)
}

/// The sampler box whose center is closest to the anchor.
fn nearest_box<'a>(
    sm: &'a EquilibriumSampler,
    r: &Resolved,
) -> &'a crate::equilibrium::DynamicalBox {
    let a = r.anchor.base();
    sm.boxes
        .iter()
        .min_by(|x, y| {
            let dx = crate::torus::base_distance(x.center.base(), a);
            let dy = crate::torus::base_distance(y.center.base(), a);
            dx.partial_cmp(&dy).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("the partition has boxes")
}
