//! End-to-end acceptance checks. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits non-zero if any fails.

use std::time::Instant;

use fve_core::assembly::{
    assemble_fve, assemble_fve_unreduced, interpolate, solve_fem, solve_fve, DiscreteField,
};
use fve_core::dualscheme::{
    gaussian_duality, preset, preset_names, preset_printed, verify_dual_quadrature,
    DirectionStrategy, DualStrategy, PRESETS,
};
use fve_core::errnorms::{
    global_norms, order_between, FieldDifference, H1X_SUPER, H1X_ULTRA, L2_SUPER,
};
use fve_core::harness::{run_study, ReferenceTable, StudyConfig, StudyResult};
use fve_core::meshgen::{perturbed_mesh, uniform_mesh};
use fve_core::pdemodel::{bvp_dqr, bvp_dr, polynomial_problem};
use fve_core::refbasis::{gauss_lobatto_nodes, gauss_rule, mfunction_eval};
use fve_core::superstruct::{build_superclose, super_points, Mode};
use fve_core::Result;

const ORDER_BAND: f64 = 0.3;
const VALUE_FACTOR: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn study(problem: &str, scheme: &str, ns: &[usize], norm: &str) -> Result<StudyResult> {
    run_study(&StudyConfig::new(problem, scheme, ns, &[norm]))
}

fn orders(r: &StudyResult, norm: &str) -> Vec<f64> {
    r.orders.get(norm).unwrap_or(&[]).iter().flatten().copied().collect()
}

fn value_at(r: &StudyResult, n: usize, norm: &str) -> f64 {
    let row = r.mesh_sizes.iter().position(|&m| m == Some(n)).expect("mesh in study");
    r.reports[row].norms[norm]
}

fn within_factor(computed: f64, reference: f64) -> bool {
    let ratio = computed / reference;
    ratio <= VALUE_FACTOR && ratio >= 1.0 / VALUE_FACTOR
}

fn all_within(os: &[f64], target: f64) -> bool {
    !os.is_empty() && os.iter().all(|o| (o - target).abs() <= ORDER_BAND)
}

fn fmt_orders(os: &[f64]) -> String {
    let v: Vec<String> = os.iter().map(|o| format!("{o:.3}")).collect();
    format!("[{}]", v.join(", "))
}

fn published(scheme: &str, problem: &str, n: usize, norm: &str) -> f64 {
    ReferenceTable::embedded()
        .lookup(scheme, problem, n, norm)
        .expect("published cell")
        .value()
}

const N3: [usize; 4] = [12, 16, 20, 24];
const N4: [usize; 4] = [8, 12, 16, 20];

fn ultraconvergence() -> Result<Outcome> {
    let t = Instant::now();
    let r = study("BVP-DR", "FVE-3-3", &N3, H1X_ULTRA)?;
    let secs = t.elapsed().as_secs_f64();
    let os = orders(&r, H1X_ULTRA);
    let e16 = value_at(&r, 16, H1X_ULTRA);
    let reference = published("FVE-3-3", "BVP-DR", 16, H1X_ULTRA);
    outcome(
        all_within(&os, 5.0) && within_factor(e16, reference) && secs < 60.0,
        format!("orders {} e(1/16) {e16:.4e} vs {reference:.4e}, {secs:.1} s", fmt_orders(&os)),
    )
}

fn negative_control() -> Result<Outcome> {
    let r = study("BVP-D", "FVE-3-2", &N3, H1X_ULTRA)?;
    let os = orders(&r, H1X_ULTRA);
    let last = *os.last().unwrap_or(&f64::NAN);
    outcome(
        all_within(&os, 4.0) && last < 4.7,
        format!("orders {}", fmt_orders(&os)),
    )
}

fn saturation() -> Result<Outcome> {
    let r = study("BVP-D", "FVE-3-4", &N3, H1X_ULTRA)?;
    let os = orders(&r, H1X_ULTRA);
    outcome(
        all_within(&os, 5.0) && os.iter().all(|&o| o < 5.7),
        format!("orders {}", fmt_orders(&os)),
    )
}

fn fem_contrast() -> Result<Outcome> {
    let r3 = study("BVP-D", "FE-3", &N3, H1X_ULTRA)?;
    let r4 = study("BVP-D", "FE-4", &N4, H1X_ULTRA)?;
    let o3 = orders(&r3, H1X_ULTRA);
    let o4 = orders(&r4, H1X_ULTRA);
    let l3 = *o3.last().unwrap_or(&f64::NAN);
    let l4 = *o4.last().unwrap_or(&f64::NAN);
    outcome(
        l3 <= 4.4 && l4 <= 5.4,
        format!("FE-3 orders {} FE-4 orders {}", fmt_orders(&o3), fmt_orders(&o4)),
    )
}

fn k4_ultra() -> Result<Outcome> {
    let t = Instant::now();
    let r = study("BVP-DR", "FVE-4-4", &N4, H1X_ULTRA)?;
    let secs = t.elapsed().as_secs_f64();
    let os = orders(&r, H1X_ULTRA);
    let e12 = value_at(&r, 12, H1X_ULTRA);
    let reference = published("FVE-4-4", "BVP-DR", 12, H1X_ULTRA);
    outcome(
        all_within(&os, 6.0) && within_factor(e12, reference) && secs < 180.0,
        format!("orders {} e(1/12) {e12:.4e} vs {reference:.4e}, {secs:.1} s", fmt_orders(&os)),
    )
}

fn derivative_super() -> Result<Outcome> {
    let a = study("BVP-DQR", "FVE-3-2", &N3, H1X_SUPER)?;
    let b = study("BVP-DQR", "FVE-4-3", &N3, H1X_SUPER)?;
    let oa = orders(&a, H1X_SUPER);
    let ob = orders(&b, H1X_SUPER);
    let e16 = value_at(&a, 16, H1X_SUPER);
    let reference = published("FVE-3-2", "BVP-DQR", 16, H1X_SUPER);
    outcome(
        all_within(&oa, 4.0) && within_factor(e16, reference) && all_within(&ob, 5.0),
        format!(
            "FVE-3-2 orders {} e(1/16) {e16:.4e} vs {reference:.4e}; FVE-4-3 orders {}",
            fmt_orders(&oa),
            fmt_orders(&ob)
        ),
    )
}

fn value_super() -> Result<Outcome> {
    let a = study("BVP-DQR", "FVE-3-3", &N3, L2_SUPER)?;
    let b = study("BVP-DQR", "FVE-4-4", &N3, L2_SUPER)?;
    let oa = orders(&a, L2_SUPER);
    let ob = orders(&b, L2_SUPER);
    let e16 = value_at(&a, 16, L2_SUPER);
    let reference = published("FVE-3-3", "BVP-DQR", 16, L2_SUPER);
    outcome(
        all_within(&oa, 5.0) && within_factor(e16, reference) && all_within(&ob, 6.0),
        format!(
            "FVE-3-3 orders {} e(1/16) {e16:.4e} vs {reference:.4e}; FVE-4-4 orders {}",
            fmt_orders(&oa),
            fmt_orders(&ob)
        ),
    )
}

fn max_residual(s: &DualStrategy) -> f64 {
    s.x.max_residual().max(s.y.max_residual())
}

fn strategy_fidelity() -> Result<Outcome> {
    let mut worst_solved: f64 = 0.0;
    let mut worst_digits: f64 = 0.0;
    let mut worst_printed: f64 = 0.0;
    for def in PRESETS {
        let solved = preset(def.name)?;
        let printed = preset_printed(def.name)?;
        worst_solved = worst_solved.max(max_residual(&solved));
        worst_printed = worst_printed.max(max_residual(&printed));
        for (a, b) in [(&solved.x, &printed.x), (&solved.y, &printed.y)] {
            for (u, v) in a.alpha.iter().zip(&b.alpha) {
                worst_digits = worst_digits.max((u - v).abs());
            }
        }
    }
    // printed alphas carry four decimals: half a unit in the last place
    let digits_ok = worst_digits <= 5e-5 + 1e-12;
    outcome(
        PRESETS.len() == 6 && worst_solved <= 1e-12 && digits_ok && worst_printed <= 5e-4,
        format!(
            "{} presets: re-solved residual {worst_solved:.1e}, |alpha - printed| {worst_digits:.1e}, printed residual {worst_printed:.1e}",
            preset_names().len()
        ),
    )
}

fn property_suite() -> Result<Outcome> {
    let mut failures = Vec::new();

    // M-functions vanish at both ends and are orthogonal unless |i - j| in {0, 2}
    let rule = gauss_rule(12)?;
    let mut m_err: f64 = 0.0;
    for i in 2..9 {
        m_err = m_err.max(mfunction_eval(i, -1.0).abs()).max(mfunction_eval(i, 1.0).abs());
        for j in 2..9 {
            if i.abs_diff(j) != 0 && i.abs_diff(j) != 2 {
                m_err = m_err.max(rule.integrate(|x| mfunction_eval(i, x) * mfunction_eval(j, x)).abs());
            }
        }
    }
    if m_err > 1e-13 {
        failures.push(format!("M-functions {m_err:.1e}"));
    }

    let mut quad: f64 = 0.0;
    for name in preset_names() {
        let s = preset(name)?;
        quad = quad.max(verify_dual_quadrature(&s.x)).max(verify_dual_quadrature(&s.y));
    }
    if quad > 1e-12 {
        failures.push(format!("dual quadrature {quad:.1e}"));
    }

    let mut patch: f64 = 0.0;
    for k in [2usize, 3] {
        let p = polynomial_problem(k, 1.3, 0.25, 0.8)?;
        let mesh = perturbed_mesh(4, 5, 0.2, 11)?;
        let exact = interpolate(&mesh, k, |x, y| (p.exact.u)(x, y), true)?;
        let strategies = if k == 2 {
            vec![DualStrategy::isotropic(gaussian_duality(2)?)]
        } else {
            vec![preset("FVE-3-2")?, preset("FVE-3-3")?, preset("FVE-3-4")?]
        };
        for st in strategies {
            patch = patch.max(solve_fve(&mesh, &st, &p)?.max_nodal_difference(&exact));
        }
        patch = patch.max(solve_fem(&mesh, k, &p)?.max_nodal_difference(&exact));
    }
    if patch > 1e-9 {
        failures.push(format!("patch test {patch:.1e}"));
    }

    let base = preset("FVE-3-3")?;
    let other = DualStrategy::new(
        DirectionStrategy::new(3, 3, base.x.alpha.clone(), vec![-1.0, -0.2, 0.1, 1.0])?,
        DirectionStrategy::new(3, 3, base.y.alpha.clone(), vec![-1.0, 0.0, 0.5, 1.0])?,
    )?;
    let mesh = uniform_mesh(4, 4)?;
    let a = assemble_fve(&mesh, &base, &bvp_dqr())?;
    let b = assemble_fve(&mesh, &other, &bvp_dqr())?;
    let indep = if a.col_idx == b.col_idx {
        a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    } else {
        f64::INFINITY
    };
    if indep > 1e-13 {
        failures.push(format!("interpolation parameters {indep:.1e}"));
    }

    let mut lob: f64 = 0.0;
    for k in 2..=5 {
        let ps = super_points(&gaussian_duality(k)?)?;
        let gl = gauss_lobatto_nodes(k);
        if ps.len() != gl.len() {
            lob = f64::INFINITY;
            continue;
        }
        for (p, g) in ps.iter().zip(&gl) {
            lob = lob.max((p - g).abs());
        }
    }
    if lob > 1e-12 {
        failures.push(format!("Gauss-Lobatto super points {lob:.1e}"));
    }

    let mesh = perturbed_mesh(5, 4, 0.2, 3)?;
    let p = polynomial_problem(3, 2.0, 0.4, 1.5)?;
    let mut kernel: f64 = 0.0;
    for name in ["FVE-3-2", "FVE-3-3", "FVE-3-4"] {
        let full = assemble_fve_unreduced(&mesh, &preset(name)?, &p)?;
        let ones = vec![1.0; full.dimension];
        kernel = kernel.max(full.matvec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    if kernel > 1e-12 {
        failures.push(format!("constant kernel {kernel:.1e}"));
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("M {m_err:.0e}, quad {quad:.0e}, patch {patch:.0e}, a-indep {indep:.0e}, lobatto {lob:.0e}, kernel {kernel:.0e}")
        } else {
            failures.join("; ")
        },
    )
}

fn broken_h1(a: &DiscreteField, b: &DiscreteField) -> Result<(f64, f64)> {
    let d = FieldDifference { a, b };
    let q = 2 * a.k() + 3;
    let (l2, h1) = global_norms(&|e, x, y| d.value(e, x, y), &|e, x, y| d.gradient(e, x, y), a.mesh(), q)?;
    Ok((l2, (l2 * l2 + h1 * h1).sqrt()))
}

fn superclose_bridge() -> Result<Outcome> {
    let problem = bvp_dr();
    let strategy = preset("FVE-3-3")?;
    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    for n in N3 {
        let mesh = uniform_mesh(n, n)?;
        let uh = solve_fve(&mesh, &strategy, &problem)?;
        let sup = build_superclose(&problem, &mesh, &strategy, Mode::Super)?;
        let ult = build_superclose(&problem, &mesh, &strategy, Mode::Ultra)?;
        l2.push(broken_h1(&uh, &sup)?.0);
        h1.push(broken_h1(&uh, &ult)?.1);
    }
    let rate = |e: &[f64]| -> Result<Vec<f64>> {
        (1..e.len())
            .map(|i| order_between(e[i - 1], 1.0 / N3[i - 1] as f64, e[i], 1.0 / N3[i] as f64, "bridge"))
            .collect()
    };
    let ol = rate(&l2)?;
    let oh = rate(&h1)?;
    let finest = |o: &[f64]| o[o.len() - 2..].iter().all(|&v| v >= 4.7);
    outcome(
        finest(&ol) && finest(&oh),
        format!("L2 (Super) orders {} broken H1 (Ultra) orders {}", fmt_orders(&ol), fmt_orders(&oh)),
    )
}

fn quasi_uniform() -> Result<Outcome> {
    let mut cfg = StudyConfig::new("BVP-DR", "FVE-3-3", &N3, &[H1X_ULTRA]);
    cfg.perturb = 0.3;
    cfg.seed = 1;
    let r = run_study(&cfg)?;
    let os = orders(&r, H1X_ULTRA);
    // informational only; the verdict uses the pairwise orders
    let x: Vec<f64> = r.reports.iter().map(|p| p.h.ln()).collect();
    let y: Vec<f64> = r.reports.iter().map(|p| p.norms[H1X_ULTRA].ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / x.len() as f64, y.iter().sum::<f64>() / y.len() as f64);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    let hs: Vec<String> = r.reports.iter().map(|p| format!("{:.4}", p.h)).collect();
    outcome(
        all_within(&os, 5.0),
        format!("orders {} (h = {}; least-squares slope {slope:.3})", fmt_orders(&os), hs.join(", ")),
    )
}

fn main() {
    fve_core::harness::init_thread_pool();
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("ultraconvergence FVE-3-3 on BVP-DR", ultraconvergence),
        ("negative control FVE-3-2 on BVP-D", negative_control),
        ("saturation FVE-3-4 on BVP-D", saturation),
        ("Galerkin contrast FE-3 and FE-4 on BVP-D", fem_contrast),
        ("k=4 ultraconvergence FVE-4-4 on BVP-DR", k4_ultra),
        ("derivative superconvergence on BVP-DQR", derivative_super),
        ("function-value superconvergence on BVP-DQR", value_super),
        ("dual strategy fidelity", strategy_fidelity),
        ("property suite", property_suite),
        ("superclose bridge FVE-3-3 on BVP-DR", superclose_bridge),
        ("perturbed-mesh ultraconvergence", quasi_uniform),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("[{}] {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
