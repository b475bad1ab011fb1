use std::time::{Duration, Instant};

use nozzleflow::grid::lift_symmetric;
use nozzleflow::linop::assemble_linearized;
use nozzleflow::pde2d::{BoundaryData, PotentialProblem};
use nozzleflow::symmetric::{acceleration_at, build_symmetric_flow, exit_acceleration, speed_at};
use nozzleflow::{GasModel, NozzleProfile, StripGrid};
use nozzleflow_cli::{hopf_gallery, perturb_sweep, sign_checks, solve, EntryShape, RunConfig};

fn defaults() -> (GasModel, NozzleProfile) {
    (GasModel::new(1.4, 1.2).unwrap(), NozzleProfile::new(0.25, 2.0).unwrap())
}

fn report(n: u32, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let within = elapsed <= limit;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} ({detail}; {:.2}s of {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64());
    assert!(pass, "criterion {n}: {detail}");
    assert!(within, "criterion {n}: runtime {elapsed:?} over {limit:?}");
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mass flux `n·ρ·q` with `ρ = (c²/γ)^(1/(γ−1))`, from scratch.
fn flux(gamma: f64, c0: f64, n: f64, q: f64) -> f64 {
    let c2 = c0 - 0.5 * (gamma - 1.0) * q * q;
    n * (c2 / gamma).powf(1.0 / (gamma - 1.0)) * q
}

fn criterion_1_critical_speed_identities() {
    let t = Instant::now();
    let (gas, _) = defaults();
    let b1 = gas.sonic_speed().b1;
    let qmax = gas.limit_speed();
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let q = qmax * k as f64 / 1000.0;
        let c2 = gas.sound_speed_squared(q).unwrap();
        worst = worst.max((c2 + 0.2 * q * q - 1.2).abs());
    }
    let pass = b1 == 1.0 && worst <= 1e-14;
    report(1, pass, t.elapsed(), Duration::from_secs(1), format!("b1 = {b1}, Bernoulli error {worst:.1e}"));
}

fn criterion_2_entry_speed() {
    let t = Instant::now();
    let (gas, _) = defaults();
    let b0 = gas.entry_speed(1.25).unwrap();
    let b0n = gas.entry_speed_newton(1.25).unwrap();
    let residual = gas.entry_relation_residual(b0, 1.25).abs();
    let target = flux(1.4, 1.2, 1.0, 1.0);
    let oracle = bisect(|b| flux(1.4, 1.2, 1.25, b) - target, 0.0, 1.0);
    let pass = residual <= 1e-12 && (b0 - b0n).abs() <= 1e-10 && (b0 - oracle).abs() <= 1e-10 && (b0 - 0.588).abs() < 5e-4;
    report(
        2,
        pass,
        t.elapsed(),
        Duration::from_secs(1),
        format!("b0 = {b0:.13}, oracle {oracle:.13}, residual {residual:.1e}, root-finder gap {:.1e}", (b0 - b0n).abs()),
    );
}

fn criterion_3_symmetric_flow() {
    let t = Instant::now();
    let (gas, prof) = defaults();
    let flow = build_symmetric_flow(&gas, &prof, 1001).unwrap();
    let m0 = flux(1.4, 1.2, prof.n(0.0), flow.u[0]);
    let flux_err = flow
        .xs
        .iter()
        .zip(&flow.u)
        .map(|(&x, &u)| (flux(1.4, 1.2, prof.n(x), u) / m0 - 1.0).abs())
        .fold(0.0, f64::max);
    let increasing = flow.u.windows(2).all(|w| w[1] > w[0]);
    let u1 = flow.u[1000];
    let mach1 = u1 / (1.2 - 0.2 * u1 * u1).sqrt();
    let b0 = gas.entry_speed(1.25).unwrap();
    let pass = flux_err <= 1e-10 && increasing && (mach1 - 1.0).abs() <= 1e-6 && (flow.u[0] - b0).abs() <= 1e-10;
    report(
        3,
        pass,
        t.elapsed(),
        Duration::from_secs(5),
        format!("flux error {flux_err:.1e}, increasing {increasing}, Mach(1) - 1 = {:.1e}", mach1 - 1.0),
    );
}

fn criterion_4_discretization_consistency() {
    let t = Instant::now();
    let (gas, prof) = defaults();
    let mut identity = 0.0f64;
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        let u = speed_at(&gas, &prof, x).unwrap();
        let du = acceleration_at(&gas, &prof, x).unwrap();
        let c2 = 1.2 - 0.2 * u * u;
        let (n, dn) = (prof.n(x), prof.dn(x));
        identity = identity.max((n * dn * c2 * u + n * n * (c2 - u * u) * du).abs());
    }
    let residual = |nx: usize, ny: usize| {
        let grid = StripGrid::new(nx, ny).unwrap();
        let flow = build_symmetric_flow(&gas, &prof, 16 * (nx - 1) + 1).unwrap();
        let data = BoundaryData::symmetric(&gas, &prof).unwrap();
        let p = PotentialProblem::new(gas, prof, grid, data).unwrap();
        p.interior_residual(&lift_symmetric(&flow, grid)).unwrap().inf_norm()
    };
    let (rc, rf) = (residual(33, 16), residual(65, 32));
    let ratio = rc / rf;
    let pass = (ratio - 4.0).abs() <= 0.8 && identity <= 1e-12;
    report(
        4,
        pass,
        t.elapsed(),
        Duration::from_secs(10),
        format!("residuals {rc:.3e} / {rf:.3e}, ratio {ratio:.3}, 1D identity {identity:.1e}"),
    );
}

fn criterion_5_uniqueness_experiment() {
    let t = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.solver.eps_min = 1e-3;
    let (_, base, _) = solve(&cfg).unwrap();
    cfg.experiment.init_noise = 1e-2;
    cfg.experiment.seed = 7;
    let (_, perturbed, _) = solve(&cfg).unwrap();
    let residual = perturbed.residual_history.last().copied().unwrap_or(f64::INFINITY);
    let dist = perturbed.solution.distance_modulo_constant(&base.solution).unwrap();
    let pass = base.converged && perturbed.converged && residual <= 1e-9 && dist <= 1e-7;
    report(
        5,
        pass,
        t.elapsed(),
        Duration::from_secs(120),
        format!("converged {}, residual {residual:.1e}, distance {dist:.1e}", perturbed.converged),
    );
}

fn criterion_6_sign_conditions() {
    let t = Instant::now();
    let cfg = RunConfig::default();
    let (m, r, lift) = solve(&cfg).unwrap();
    let s = sign_checks(&m, &r.solution, &lift).unwrap();
    let coeffs = assemble_linearized(&r.solution, &m.gas, &m.profile).unwrap();
    let last = m.grid.nx() - 1;
    let mut key_min = f64::INFINITY;
    let mut b1_max = f64::NEG_INFINITY;
    for j in 0..m.grid.ny() {
        let key = 1.2 * r.solution.dxx(last, j).unwrap() + 0.2 * r.solution.dyy(last, j).unwrap();
        key_min = key_min.min(key);
        b1_max = b1_max.max(coeffs.b1.get(last, j).unwrap());
    }
    let analytic = -2.4 * exit_acceleration(&m.gas, &m.profile);
    let pass = r.converged
        && s.a12_max_abs == 0.0
        && b1_max < 0.0
        && s.exit_drift.pass
        && s.exit_drift_closed_form_rel_error <= 0.1
        && key_min > 0.0
        && s.key.key.pass;
    report(
        6,
        pass,
        t.elapsed(),
        Duration::from_secs(10),
        format!(
            "max exit b1 {b1_max:.4}, closed form {:.4} (rel error {:.3}; with the exact u'(1): {analytic:.4}), min key {key_min:.4}",
            s.exit_drift_closed_form, s.exit_drift_closed_form_rel_error
        ),
    );
}

fn criterion_7_hopf_toolkit() {
    let t = Instant::now();
    let cfg = RunConfig::default();
    let entries = hopf_gallery(&cfg.model().unwrap()).unwrap();
    let mut worst_gap = 0.0f64;
    let mut postcondition = true;
    for e in &entries {
        worst_gap = worst_gap.max((e.report.condition_value - e.flatten_beta_n).abs());
        if let Some(mu) = e.report.mu {
            postcondition &= -2.0 * e.report.alpha_trace + mu * e.report.beta_n >= 2.0;
        }
    }
    let heat = entries.iter().find(|e| e.name == "heat-like exit").unwrap();
    let heat_ok = heat.report.barrier_ok == Some(true) && heat.report.shrink_retries.is_some_and(|r| r <= 20);
    let matches = entries.iter().all(|e| e.matches);
    let pass = worst_gap <= 1e-12 && postcondition && heat_ok && matches;
    report(
        7,
        pass,
        t.elapsed(),
        Duration::from_secs(5),
        format!("condition gap {worst_gap:.1e}, mu postcondition {postcondition}, heat-like barrier {heat_ok}, gallery matches {matches}"),
    );
}

fn criterion_8_instability_diagnostics() {
    let t = Instant::now();
    let mut details = vec![];
    let mut pass = true;
    for (nx, ny) in [(33, 16), (65, 32)] {
        let mut cfg = RunConfig::default();
        cfg.grid.nx = nx;
        cfg.grid.ny = ny;
        cfg.experiment.delta = 0.05;
        cfg.experiment.entry_shape = EntryShape::Sine;
        let a = perturb_sweep(&cfg).unwrap();
        let b = perturb_sweep(&cfg).unwrap();
        let deterministic = serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
        let case = a.cases.iter().find(|c| c.delta == 0.05).unwrap();
        let flagged = (!case.converged && case.stall_reason.is_some()) || case.max_interior_mach >= 1.0;
        pass &= flagged && deterministic;
        details.push(format!(
            "{nx}x{ny}: converged {}, max Mach {:.4}, entry shift {:.2e}, deterministic {deterministic}",
            case.converged, case.max_interior_mach, case.entry_shift
        ));
    }
    report(8, pass, t.elapsed(), Duration::from_secs(300), details.join("; "));
}

fn main() {
    let criteria: [(u32, fn()); 8] = [
        (1, criterion_1_critical_speed_identities),
        (2, criterion_2_entry_speed),
        (3, criterion_3_symmetric_flow),
        (4, criterion_4_discretization_consistency),
        (5, criterion_5_uniqueness_experiment),
        (6, criterion_6_sign_conditions),
        (7, criterion_7_hopf_toolkit),
        (8, criterion_8_instability_diagnostics),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let failed: Vec<u32> = criteria
        .iter()
        .filter(|(_, f)| std::panic::catch_unwind(f).is_err())
        .map(|(n, _)| *n)
        .collect();
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
