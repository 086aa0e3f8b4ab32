//! One line per acceptance criterion; the test fails if any criterion does.

use std::time::Instant;

use num_complex::Complex64;

use growthlab::bounds::order_of_bound;
use growthlab::config::ConfigFile;
use growthlab::funcs::{build_tower, parse_expr, TowerSpec};
use growthlab::growth::{order_estimate, type_estimate};
use growthlab::harness::{build_default, build_thm21, build_thm22, run, run_suite, ScenarioName, ScenarioReport};
use growthlab::lognum::{LogComplex, EXP_LIMIT};
use growthlab::ode::{eval_series, manufacture, residual, solve_series, OdeProblem};
use growthlab::scale::{check_admissible, SampleSpec};
use growthlab::{Expr, GrowthMode, GrowthOptions, RadialGrid, ScaleTriple};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn canon() -> ScaleTriple {
    ScaleTriple::canonical()
}

fn grid_for(spec: &TowerSpec) -> RadialGrid {
    let g = RadialGrid::default();
    if spec.level < 3 {
        return g;
    }
    g.trimmed(spec.max_radius(EXP_LIMIT)).unwrap().0
}

fn scenario(name: ScenarioName) -> Result<ScenarioReport, String> {
    let rep = run(&build_default(name).map_err(|e| e.to_string())?);
    if rep.pass() {
        Ok(rep)
    } else {
        Err(rep.text())
    }
}

fn c1_scale_admissibility() -> Outcome {
    let start = Instant::now();
    let spec = SampleSpec::default();
    let good = check_admissible(&canon(), 3, &spec).map_err(|e| e.to_string())?;
    let id: ScaleTriple = "id,id,id".parse().unwrap();
    let bad = check_admissible(&id, 3, &spec).map_err(|e| e.to_string())?;
    let inverse_check = bad
        .conditions
        .checks
        .iter()
        .find(|c| c.label.starts_with("(c)"))
        .ok_or("no inverse check")?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        good.pass() && !inverse_check.pass && secs < 1.0,
        format!("canonical passes: {}, id fails (c): {}, {secs:.2} s", good.pass(), !inverse_check.pass),
    )
}

fn c2_order_recovery() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (c, mu) in [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)] {
        let start = Instant::now();
        let f = build_tower(&TowerSpec::new(2, c, mu).unwrap());
        let est = order_estimate(&f, &canon(), &RadialGrid::default(), GrowthMode::MOrder, &GrowthOptions::default())
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ok &= (est.value - mu).abs() <= 0.05 && secs < 10.0;
        parts.push(format!("tower(2,{c},{mu}) -> {:.4} ({secs:.1} s)", est.value));
    }
    ensure(ok, parts.join(", "))
}

fn c3_log_order_recovery() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for mu in [0.5, 1.0] {
        let spec = TowerSpec::new(3, 1.0, mu).unwrap();
        let est = order_estimate(&build_tower(&spec), &canon(), &grid_for(&spec), GrowthMode::MLogOrder, &GrowthOptions::default())
            .map_err(|e| e.to_string())?;
        ok &= (est.value - mu).abs() <= 0.05;
        parts.push(format!("tower(3,1,{mu}) -> {:.4}", est.value));
    }
    ensure(ok, parts.join(", "))
}

fn c4_type_recovery() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for c in [0.5, 1.0, 2.0] {
        let f = build_tower(&TowerSpec::new(2, c, 1.0).unwrap());
        let t = type_estimate(&f, &canon(), &RadialGrid::default(), GrowthMode::MOrder, 1.0, &GrowthOptions::default())
            .map_err(|e| e.to_string())?;
        ok &= (t.value / c - 1.0).abs() <= 0.1;
        parts.push(format!("c = {c} -> {:.4}", t.value));
    }
    ensure(ok, parts.join(", "))
}

fn c5_inequality_sandwich() -> Outcome {
    let rep = scenario(ScenarioName::Ineq12)?;
    Ok(format!("{} catalog functions, all margins >= 0", rep.relations.len() - 1))
}

fn c6_proposition() -> Outcome {
    let rep = scenario(ScenarioName::Prop11)?;
    Ok(rep.relations.last().unwrap().measured.clone())
}

fn c7_derivative_orders() -> Outcome {
    let rep = scenario(ScenarioName::Lemma35)?;
    let n = rep.relations.iter().filter(|r| r.name.contains("derivative")).count();
    ensure(n >= 6, format!("{n} order comparisons within 0.05"))
}

fn c8_series_solver() -> Outcome {
    let one = LogComplex::ONE;
    let ez = OdeProblem::new(vec![parse_expr("-1").unwrap(), Expr::real(0.0)], Some(vec![one, one])).unwrap();
    let s = solve_series(&ez, 64).map_err(|e| e.to_string())?;
    let mut fact = 1.0f64;
    let mut worst: f64 = 0.0;
    for (n, c) in s.coeffs.iter().enumerate().take(30) {
        if n > 0 {
            fact *= n as f64;
        }
        worst = worst.max((c.to_complex().re * fact - 1.0).abs());
    }
    let v = eval_series(&s, Complex64::new(0.5, 0.0)).map_err(|e| e.to_string())?;
    worst = worst.max((v.logmag - 0.5).abs());

    let pole = manufacture(&parse_expr("exp(pow1mz(1))").unwrap(), &[Expr::real(0.0)], 2).unwrap();
    let s = solve_series(&pole, 512).map_err(|e| e.to_string())?;
    let mut closed: f64 = 0.0;
    for i in 0..16 {
        let z = Complex64::from_polar(0.3, std::f64::consts::TAU * i as f64 / 16.0);
        let exact = (Complex64::new(1.0, 0.0) / (1.0 - z)).exp();
        let got = eval_series(&s, z).map_err(|e| e.to_string())?.to_complex();
        closed = closed.max(((got - exact) / exact).norm());
    }
    let res = residual(&pole, &s, 0.3, 64).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-12 && closed <= 1e-9 && res <= 1e-9,
        format!("e^z error {worst:.1e}, exp(1/(1-z)) error {closed:.1e}, residual {res:.1e}"),
    )
}

fn c9_bound_domination() -> Outcome {
    let dom = scenario(ScenarioName::Lemma38)?;
    scenario(ScenarioName::Lemma39)?;
    let spec = TowerSpec::new(3, 1.0, 0.5).unwrap();
    let p = manufacture(&build_tower(&spec), &[Expr::real(0.0)], 2).map_err(|e| e.to_string())?;
    let g = grid_for(&spec);
    let b = order_of_bound(&p, &canon(), &g, &Default::default(), &GrowthOptions::default()).map_err(|e| e.to_string())?;
    let checks = dom.relations.iter().filter(|r| r.name.starts_with("series")).count();
    ensure(
        (b.value - 0.5).abs() <= 0.1,
        format!("{checks} dominated series solutions; bound orders within 0.1; mu = 0.5 bound order {:.4}", b.value),
    )
}

fn c10_theorem_scenarios() -> Outcome {
    let mut parts = Vec::new();
    let g = RadialGrid::default();
    let builds = [
        ("thm21 k=2", build_thm21(&canon(), 2, 1.0, 1.0, &[Some((1.0, 0.5))], &g)),
        ("thm21 k=3", build_thm21(&canon(), 3, 1.0, 1.0, &[None, None], &g)),
        ("thm22", build_thm22(&canon(), 2, 1.0, 2.0, &[Some(1.0)], &g)),
    ];
    for (label, s) in builds {
        let start = Instant::now();
        let rep = run(&s.map_err(|e| e.to_string())?);
        let secs = start.elapsed().as_secs_f64();
        if !rep.pass() || secs >= 60.0 {
            return Err(format!("{label} ({secs:.1} s):\n{}", rep.text()));
        }
        parts.push(format!("{label}: {} ({secs:.1} s)", rep.relation("|rho_log(f) - rho(A_0)|").unwrap().measured));
    }
    Ok(parts.join("; "))
}

fn c11_lower_sets() -> Outcome {
    let a = scenario(ScenarioName::Lemma36)?;
    let b = scenario(ScenarioName::Lemma37)?;
    Ok(format!(
        "untyped {}; typed {}",
        a.relations.last().unwrap().measured,
        b.relations.last().unwrap().measured
    ))
}

fn c12_performance() -> Outcome {
    let p = manufacture(&parse_expr("exp(pow1mz(1))").unwrap(), &[parse_expr("z").unwrap()], 2).unwrap();
    let start = Instant::now();
    let s = solve_series(&p, 4096).map_err(|e| e.to_string())?;
    let solve = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let suite = run_suite(&ConfigFile::default());
    let total = start.elapsed().as_secs_f64();
    let failing: Vec<String> = suite
        .iter()
        .filter(|(_, r)| !matches!(r, Ok(rep) if rep.pass()))
        .map(|(n, _)| n.to_string())
        .collect();
    ensure(
        s.len() == 4096 && solve < 2.0 && total < 300.0 && failing.is_empty(),
        format!("N = 4096 solve {solve:.2} s; default suite {total:.1} s, failing {failing:?}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("scale admissibility", c1_scale_admissibility),
        ("order recovery", c2_order_recovery),
        ("log-order recovery", c3_log_order_recovery),
        ("type recovery", c4_type_recovery),
        ("T / log M sandwich", c5_inequality_sandwich),
        ("M-based vs T-based log-order", c6_proposition),
        ("orders of f and f'", c7_derivative_orders),
        ("series solver", c8_series_solver),
        ("growth bound domination and order", c9_bound_domination),
        ("theorem scenarios", c10_theorem_scenarios),
        ("lower-bound set measure", c11_lower_sets),
        ("performance", c12_performance),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1} s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
