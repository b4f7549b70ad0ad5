//! Acceptance suite: the thirteen criteria at their stated tolerances, one
//! pass/fail line each.  Runs under `cargo test` (release-level
//! optimization is set for the test profile); exits non-zero when any
//! criterion fails.
//!
//! Reference values come from oracles computed here, independently of the
//! code under test: log λ from the characteristic polynomial of A,
//! Lebesgue histograms and correlations from raw samples, and constant
//! shifts from the variational principle.

use std::path::Path;
use std::time::{Duration, Instant};

use centeriso::cli::config::{Overrides, Resolved, RunConfig};
use centeriso::equilibrium::{
    brin_katok_entropy, conditional_density_check, correlation_decay, forward_backward_pressure,
    gibbs_check, EquilibriumSampler,
};
use centeriso::leaf::{
    holonomy_jacobian_check, leaf_measure_with, quasi_invariance_residual, smooth_seed,
    spanning_set_pressure, total_variation, LeafOptions, PressureReport,
};
use centeriso::potentials::{livsic_obstruction, PotentialKind, PotentialSpec};
use centeriso::torus::{LeafKind, TrigPolynomial};

/// log of the Perron root of `[[2,1],[1,1]]`: the larger root of
/// `t² − 3t + 1`.
fn log_lambda_oracle() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

fn config(name: &str) -> Resolved {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = std::env::temp_dir().join("centeriso-acceptance").join(name);
    let o = Overrides {
        output_dir: Some(out),
        ..Overrides::default()
    };
    RunConfig::from_path(&dir.join(format!("{name}.json")))
        .and_then(|c| c.resolve(&o, Some(&dir)))
        .unwrap_or_else(|e| panic!("config {name}: {e}"))
}

fn leaf_growth(r: &Resolved) -> PressureReport {
    let l = &r.config.leaf;
    let opts = LeafOptions {
        kind: LeafKind::Unstable,
        ..l.options()
    };
    leaf_measure_with(
        &r.system,
        &r.potential,
        &r.anchor,
        l.half_width,
        l.depth,
        l.n_atoms,
        &opts,
    )
    .expect("leaf measure")
    .1
}

fn sampler(r: &Resolved) -> EquilibriumSampler {
    EquilibriumSampler::build(&r.system, &r.potential, &r.config.sampler).expect("sampler")
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: usize, title: &str, ok: bool, detail: String, elapsed: Duration) {
        if !ok {
            self.failures += 1;
        }
        println!(
            "[{}] {id:2}. {title}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }

    /// Runs one criterion; a panic inside counts as a failure.
    fn run(&mut self, id: usize, title: &str, f: impl FnOnce() -> (bool, String)) {
        let t = Instant::now();
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
            Ok((ok, detail)) => self.report(id, title, ok, detail, t.elapsed()),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                self.report(
                    id,
                    title,
                    false,
                    format!("panicked: {}", msg.unwrap_or_default()),
                    t.elapsed(),
                )
            }
        }
    }
}

fn pressure_maximal_entropy() -> (bool, String) {
    let target = log_lambda_oracle();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in 0..3 {
        let t = Instant::now();
        let r = config(&format!("margulis-cat-c{c}"));
        let leaf = leaf_growth(&r).value;
        let span = spanning_set_pressure(&r.system, &r.potential, &r.spanning())
            .expect("spanning")
            .value;
        let bk = brin_katok_entropy(&sampler(&r), &r.config.entropy)
            .expect("entropy")
            .variational_sum;
        let secs = t.elapsed().as_secs_f64();
        ok &= (leaf - target).abs() < 0.01
            && (span - target).abs() < 0.1
            && (bk - target).abs() < 0.1
            && secs < 120.0;
        parts.push(format!(
            "c={c}: leaf {leaf:.6}, spanning {span:.4}, BK+∫φ {bk:.4} in {secs:.0} s"
        ));
    }
    (ok, format!("target {target:.6}; {}", parts.join("; ")))
}

fn srb_pressure() -> (bool, String) {
    let r = config("srb-cat");
    let l = &r.config.leaf;
    let opts = LeafOptions {
        kind: LeafKind::Unstable,
        ..l.options()
    };
    let (mu, rep) = leaf_measure_with(
        &r.system,
        &r.potential,
        &r.anchor,
        l.half_width,
        l.depth,
        l.n_atoms,
        &opts,
    )
    .expect("leaf");
    // Uniform density on a window of length 2r is 1/(2r) per unit arclength.
    let uniform = 1.0 / (mu.cell_width * mu.atoms.len() as f64);
    let dev = mu
        .densities()
        .iter()
        .map(|d| (d / uniform - 1.0).abs())
        .fold(0.0, f64::max);
    (
        rep.value.abs() < 1e-3 && dev < 1e-10,
        format!("P = {:.2e}, density deviation {dev:.1e}", rep.value),
    )
}

fn constant_shift() -> (bool, String) {
    let base = config("margulis-cat-c1");
    let shifted = config("constant-shift");
    let PotentialKind::Constant { value: shift } = shifted.config.potential else {
        panic!("constant-shift must be constant")
    };
    let leaf = leaf_growth(&shifted).value - leaf_growth(&base).value;
    let span = spanning_set_pressure(&shifted.system, &shifted.potential, &shifted.spanning())
        .expect("spanning")
        .value
        - spanning_set_pressure(&base.system, &base.potential, &base.spanning())
            .expect("spanning")
            .value;
    let bk = brin_katok_entropy(&sampler(&shifted), &shifted.config.entropy)
        .expect("entropy")
        .variational_sum
        - brin_katok_entropy(&sampler(&base), &base.config.entropy)
            .expect("entropy")
            .variational_sum;
    let worst = [leaf, span, bk]
        .iter()
        .map(|d| (d - shift).abs())
        .fold(0.0, f64::max);
    (
        worst < 1e-6,
        format!("shift {shift}: differences {leaf:.9}, {span:.9}, {bk:.9}; max error {worst:.1e}"),
    )
}

fn quasi_invariance() -> (bool, String) {
    let r = config("trig-cconstant");
    let p = leaf_growth(&r).value;
    let tvs: Vec<f64> = [10, 15, 20, 25]
        .iter()
        .map(|&n| {
            quasi_invariance_residual(&r.system, &r.potential, &r.anchor, p, 0.1, n, 20_000)
                .expect("qi")
                .tv
        })
        .collect();
    let monotone = tvs.windows(2).all(|w| w[1] < w[0]);
    (
        tvs[3] < 1e-2 && monotone,
        format!(
            "TV at n = 10, 15, 20, 25: {:.1e}, {:.1e}, {:.1e}, {:.1e}",
            tvs[0], tvs[1], tvs[2], tvs[3]
        ),
    )
}

fn holonomy() -> (bool, String) {
    let r = config("trig-cconstant");
    let h = holonomy_jacobian_check(&r.system, &r.potential, &r.anchor, 0.05, 0.1, 25, 4000)
        .expect("holonomy");
    (
        h.sup_rel_error < 1e-2,
        format!(
            "sup relative error {:.2e} over {} cells",
            h.sup_rel_error, h.compared
        ),
    )
}

fn forward_backward() -> (bool, String) {
    let r = config("trig-cconstant");
    let l = &r.config.leaf;
    let (pf, pb) = forward_backward_pressure(
        &r.system,
        &r.potential,
        &r.anchor,
        l.half_width,
        l.depth,
        l.n_atoms,
    )
    .expect("pressures");
    let gap = (pf.value - pb.value).abs();
    (
        gap < 1e-2,
        format!("P = {:.5}, P′ = {:.5}, gap {gap:.1e}", pf.value, pb.value),
    )
}

fn gibbs() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["trig-cconstant", "margulis-cat-c2"] {
        let t = Instant::now();
        let r = config(name);
        let p = leaf_growth(&r).value;
        let g = gibbs_check(&sampler(&r), &r.anchor, p, &r.config.gibbs).expect("gibbs");
        let secs = t.elapsed().as_secs_f64();
        let (lo, hi) = g
            .rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), row| {
                (lo.min(row.ratio), hi.max(row.ratio))
            });
        ok &= g.kappa.abs() < 0.05
            && lo > 0.0
            && hi.is_finite()
            && g.total_samples <= 1_000_000
            && secs < 300.0;
        parts.push(format!(
            "{name}: κ̂ = {:+.4} ± {:.4}, R_n ∈ [{lo:.3e}, {hi:.3e}], {secs:.0} s",
            g.kappa, g.kappa_stderr
        ));
    }
    (ok, parts.join("; "))
}

/// The shipped configs with an equilibrium-state sampler.  The
/// truncated coboundary series of the appendix config is a finite sum of
/// coboundaries d − d∘f of continuous functions, so its equilibrium state is
/// that of φ = 0 on the same system and ∫φ_N = 0.
fn variational() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in [
        "margulis-cat-c0",
        "margulis-cat-c1",
        "margulis-cat-c2",
        "srb-cat",
        "trig-cconstant",
        "constant-shift",
        "appendix-d",
    ] {
        let r = config(name);
        let (potential, p) = if name == "appendix-d" {
            (
                PotentialSpec::new(PotentialKind::zero(), &r.system).expect("zero"),
                log_lambda_oracle(),
            )
        } else {
            (r.potential.clone(), leaf_growth(&r).value)
        };
        let sm =
            EquilibriumSampler::build(&r.system, &potential, &r.config.sampler).expect("sampler");
        let e = brin_katok_entropy(&sm, &r.config.entropy).expect("entropy");
        let gap = e.relative_gap(p);
        ok &= gap < 0.05 && e.entropy > 0.0;
        parts.push(format!(
            "{name}: h {:.3}, gap {:.1}%",
            e.entropy,
            100.0 * gap
        ));
    }
    (ok, parts.join("; "))
}

fn conditionals() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["trig-cconstant", "margulis-cat-c1"] {
        let r = config(name);
        let sm = sampler(&r);
        let a = r.anchor.base();
        let bx = sm
            .boxes
            .iter()
            .min_by(|x, y| {
                centeriso::torus::base_distance(x.center.base(), a)
                    .total_cmp(&centeriso::torus::base_distance(y.center.base(), a))
            })
            .expect("boxes");
        let mut opts = r.config.conditional.clone();
        opts.samples = 1_000_000;
        let c = conditional_density_check(&sm, bx, &opts).expect("conditionals");
        ok &= c.worst_sup_rel < 0.05 && !c.fibers.is_empty();
        parts.push(format!(
            "{name}: sup {:.2}% over {} fibers (coverage {:.2})",
            100.0 * c.worst_sup_rel,
            c.fibers.len(),
            c.coverage
        ));
    }
    (ok, parts.join("; "))
}

fn uniqueness() -> (bool, String) {
    let r = config("trig-cconstant");
    let lebesgue = LeafOptions::default();
    let smooth = LeafOptions {
        seed: smooth_seed(0.5),
        ..LeafOptions::default()
    };
    let (a, _) = leaf_measure_with(&r.system, &r.potential, &r.anchor, 0.1, 30, 4000, &lebesgue)
        .expect("leaf");
    let (b, _) = leaf_measure_with(&r.system, &r.potential, &r.anchor, 0.1, 30, 4000, &smooth)
        .expect("leaf");
    let tv = total_variation(&a, &b).expect("tv");
    (
        tv < 1e-3,
        format!("TV between Lebesgue and 1 + ½cos 2π(x₁+x₂) seeds at n = 30: {tv:.1e}"),
    )
}

fn appendix_d() -> (bool, String) {
    let r = config("appendix-d");
    let ap = r.potential.appendix().expect("appendix potential");
    let sums = livsic_obstruction(&r.potential, &r.system, 8, None).expect("livsic");
    let livsic = sums.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    let cocycle = ap.cocycle_residual(&r.system, 10_000, 11).expect("cocycle");
    let osc: Vec<f64> = ap.oscillation().iter().map(|o| o.oscillation).collect();
    let increasing = osc.windows(2).all(|w| w[1] > w[0]);
    (
        livsic < 1e-8 && cocycle < 1e-10 && increasing && osc.len() >= 2,
        format!(
            "{} orbit sums, max {livsic:.1e}; cocycle {cocycle:.1e}; oscillation {osc:.3?}",
            sums.len()
        ),
    )
}

fn lebesgue_oracle() -> (bool, String) {
    let r = config("margulis-cat-c0");
    let sm = sampler(&r);
    const N: usize = 1_000_000;
    const BINS: usize = 20;
    let pts = sm.sample_seeded(N, 12).expect("samples");
    let mut counts = [[0usize; BINS]; 2];
    for p in &pts {
        for (k, &v) in p.coords().iter().enumerate() {
            counts[k][((v * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
    }
    let expected = N as f64 / BINS as f64;
    let sup = counts
        .iter()
        .flatten()
        .map(|&c| (c as f64 / expected - 1.0).abs())
        .fold(0.0, f64::max);
    (
        sup < 0.02,
        format!(
            "sup relative histogram error {:.2}% ({BINS} bins × 2 coordinates, {N} samples)",
            100.0 * sup
        ),
    )
}

fn mixing() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["margulis-cat-c0", "margulis-cat-c1"] {
        let r = config(name);
        let sm = sampler(&r);
        // Direct estimate from raw samples and orbits.
        const N: usize = 1_000_000;
        let pts = sm.sample_seeded(N, 13).expect("samples");
        let g = |x: f64| (2.0 * std::f64::consts::PI * x).cos();
        let (mut sg, mut sh, mut sgh) = (0.0, 0.0, 0.0);
        for p in &pts {
            let a = g(p.coords()[0]);
            let b = g(r.system.apply(p, 20).expect("orbit").coords()[0]);
            sg += a;
            sh += b;
            sgh += a * b;
        }
        let n = N as f64;
        let direct = sgh / n - (sg / n) * (sh / n);
        let mut mode = vec![0; r.system.dim()];
        mode[0] = 1;
        let obs = TrigPolynomial::cosine(mode, 1.0);
        let lib = correlation_decay(&sm, &obs, &obs, 20, N, 14).expect("correlation");
        let c20 = lib.last().expect("rows").correlation;
        ok &= direct.abs() < 0.05 && c20.abs() < 0.05;
        parts.push(format!(
            "{name}: C_20 = {direct:+.1e} (direct), {c20:+.1e} (correlation_decay)"
        ));
    }
    (ok, parts.join("; "))
}

fn main() {
    let t = Instant::now();
    let mut s = Suite { failures: 0 };
    s.run(
        1,
        "pressure of the measure of maximal entropy",
        pressure_maximal_entropy,
    );
    s.run(2, "SRB pressure and uniform unstable density", srb_pressure);
    s.run(3, "constant-shift exactness", constant_shift);
    s.run(4, "quasi-invariance of leaf measures", quasi_invariance);
    s.run(5, "stable holonomy Jacobian", holonomy);
    s.run(6, "forward and backward pressures agree", forward_backward);
    s.run(7, "Gibbs boundedness", gibbs);
    s.run(
        8,
        "variational consistency and positive entropy",
        variational,
    );
    s.run(9, "conditional densities on unstable plaques", conditionals);
    s.run(10, "seed-independence of leaf measures", uniqueness);
    s.run(
        11,
        "coboundary series with Liouville frequencies",
        appendix_d,
    );
    s.run(12, "Lebesgue oracle for c = 0, φ = 0", lebesgue_oracle);
    s.run(13, "decay of correlations", mixing);
    println!(
        "acceptance: {} of 13 criteria passed in {:.0} s",
        13 - s.failures,
        t.elapsed().as_secs_f64()
    );
    if s.failures > 0 {
        std::process::exit(1);
    }
}
