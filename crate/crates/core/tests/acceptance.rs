//! Acceptance suite. Runs each criterion at its stated tolerance and wall-clock
//! budget, prints one line per criterion and exits non-zero on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rendezkit::confopt::{cheb_limits_via_games, cheb_n, nth_diameter, SearchOptions};
use rendezkit::game::{q_lower, q_value, GameStatus};
use rendezkit::rendezvous::{
    average_interval, compare_R_A, rendezvous_interval, rendezvous_report, singleton_tol,
};
use rendezkit::space::{
    build_circle_grid, build_interval_grid, discrete_two_point, CircleMetric, Kernel,
};
use rendezkit::verify::{
    check_oracle, gen_instance, run_suite, InstanceSpec, KernelFamily, SubsetPolicy, SuiteConfig,
};
use rendezkit::{ExtendedValue, SubsetRef};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn two_point() -> Outcome {
    let s = discrete_two_point();
    let all = s.all();
    let q = q_value(&s, &all, &all).map_err(err)?;
    let a = SubsetRef::singleton(0, 2).map_err(err)?;
    let qa = q_value(&s, &a, &a).map_err(err)?;
    ensure((q.value.to_f64() - 0.5).abs() <= 1e-12, || {
        format!("q(X,X) = {}", q.value)
    })?;
    ensure(q.gap <= 1e-12, || format!("gap {}", q.gap))?;
    ensure(qa.value == ExtendedValue::ZERO, || {
        format!("q({{a}},{{a}}) = {}", qa.value)
    })?;
    Ok(format!(
        "q(X,X) = {} (gap {:.1e}), q({{a}},{{a}}) = {}",
        q.value, q.gap, qa.value
    ))
}

fn euclid_interval() -> Outcome {
    let g = build_interval_grid(0.0, 1.0, 101, Kernel::Euclid).map_err(err)?;
    let r = rendezvous_interval(&g, &g.all(), &g.all()).map_err(err)?;
    let (lo, hi) = (r.lo().to_f64(), r.hi().to_f64());
    ensure(
        !r.is_empty() && (lo - 0.5).abs() <= 0.01 && (hi - 0.5).abs() <= 0.01,
        || format!("R = {r}"),
    )?;
    Ok(format!("R(I) = [{lo:.12}, {hi:.12}]"))
}

fn circle_singletons() -> Outcome {
    let mut last = 0.0;
    let mut worst: f64 = 0.0;
    for n in 8..=128 {
        let c = build_circle_grid(n, CircleMetric::Chordal).map_err(err)?;
        let a = average_interval(&c, &c.all(), &c.all()).map_err(err)?;
        let want = 2.0 / n as f64 / (PI / (2.0 * n as f64)).tan();
        ensure(a.is_singleton_tol(singleton_tol(&a)), || {
            format!("N = {n}: A = {a} is not a singleton")
        })?;
        let dev = (a.lo().to_f64() - want)
            .abs()
            .max((a.hi().to_f64() - want).abs());
        ensure(dev <= 1e-8, || {
            format!("N = {n}: A = {a}, closed form {want}")
        })?;
        worst = worst.max(dev);
        last = a.hi().to_f64();
    }
    let gap = (last - 4.0 / PI).abs();
    ensure(gap <= 5e-4, || {
        format!("N = 128: {last} vs 4/pi off by {gap}")
    })?;
    Ok(format!("N = 8..=128 singletons, max deviation {worst:.1e}; N = 128 gives {last:.8} (4/pi - {gap:.1e})"))
}

fn neglog_diameters() -> Outcome {
    let g = build_interval_grid(0.0, 1.0, 257, Kernel::NegLog).map_err(err)?;
    let all = g.all();
    let log4 = 4f64.ln();
    let d2 = nth_diameter(&g, &all, 2, &SearchOptions::exact()).map_err(err)?;
    ensure(d2.value == ExtendedValue::ZERO, || {
        format!("D_2 = {}", d2.value)
    })?;
    let exact3 = SearchOptions {
        budget: 3_000_000,
        ..SearchOptions::exact()
    };
    let d3 = nth_diameter(&g, &all, 3, &exact3).map_err(err)?;
    ensure((d3.value.to_f64() - log4 / 3.0).abs() <= 1e-3, || {
        format!("D_3 = {}", d3.value)
    })?;
    let mut prev = d2.value.to_f64();
    let mut values = Vec::new();
    for n in 2..=16 {
        let d = nth_diameter(&g, &all, n, &SearchOptions::local(2024))
            .map_err(err)?
            .value
            .to_f64();
        ensure(d >= prev - 1e-9, || {
            format!("D_{n} = {d} < D_{} = {prev}", n - 1)
        })?;
        ensure(d <= log4 + 1e-3, || format!("D_{n} = {d} exceeds log 4"))?;
        values.push(d);
        prev = d;
    }
    Ok(format!(
        "D_2 = 0, D_3 = {:.6} (log4/3 = {:.6}), local D_16 = {:.6} <= log 4 = {:.6}",
        d3.value.to_f64(),
        log4 / 3.0,
        values.last().unwrap(),
        log4
    ))
}

fn finite_schedule() -> Vec<InstanceSpec> {
    SuiteConfig {
        seed: 1,
        trials: 200,
        infinite_trials: 0,
        sizes: (2, 8),
        ..SuiteConfig::default()
    }
    .schedule()
}

fn minimax_duality() -> Outcome {
    let mut worst: f64 = 0.0;
    let schedule = finite_schedule();
    for spec in &schedule {
        let inst = gen_instance(spec).map_err(err)?;
        let p = q_value(&inst.space, &inst.h, &inst.l).map_err(err)?.value;
        let d = q_lower(&inst.space, &inst.l, &inst.h).map_err(err)?.value;
        ensure(p.is_finite() && d.is_finite(), || {
            format!("{spec:?}: {p} vs {d}")
        })?;
        let gap = (p.to_f64() - d.to_f64()).abs();
        ensure(gap <= 1e-8, || format!("{spec:?}: |q - qlower| = {gap}"))?;
        worst = worst.max(gap);
    }
    Ok(format!(
        "{} instances, max |q(H,L) - qlower(L,H)| = {worst:.1e}",
        schedule.len()
    ))
}

fn inequality_lattice() -> Outcome {
    let cfg = SuiteConfig {
        seed: 1,
        trials: 200,
        infinite_trials: 50,
        sizes: (2, 8),
        exhaustive_n: 4,
        oracle: false,
        properties: Some(
            ["chain", "D_vs_M", "energy_chain", "monotone", "M_vs_qlower"]
                .map(String::from)
                .to_vec(),
        ),
        ..SuiteConfig::default()
    };
    let out = run_suite(&cfg).map_err(err)?;
    let comparisons: usize = out.reports.iter().map(|r| r.trials).sum();
    if let Some(bad) = out.reports.iter().find(|r| !r.passed()) {
        return Err(format!(
            "{}: {} failures, first {:?}",
            bad.property_id,
            bad.failures.len(),
            bad.failures[0]
        ));
    }
    let worst = out
        .reports
        .iter()
        .map(|r| r.worst_slack)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "250 instances, {} property runs, 0 violations, worst relative slack {worst:.1e}",
        comparisons
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut count = 0;
    for size in 2..=4 {
        for family in KernelFamily::ALL {
            for policy in SubsetPolicy::ALL {
                for seed in 0..4 {
                    let spec = InstanceSpec {
                        seed: 100 * size as u64 + seed,
                        size,
                        kernel_family: family,
                        subset_policy: policy,
                    };
                    let inst = gen_instance(&spec).map_err(err)?;
                    let rep = check_oracle(&inst.space, &inst.h, &inst.l, 3);
                    ensure(rep.passed(), || format!("{spec:?}: {:?}", rep.failures))?;
                    count += 1;
                }
            }
        }
    }
    Ok(format!(
        "{count} spaces with |X| <= 4, n <= 3: fast paths within the oracle bracket"
    ))
}

fn infinity_semantics() -> Outcome {
    let g = build_interval_grid(0.0, 1.0, 257, Kernel::NegLog).map_err(err)?;
    let all = g.all();
    let q = q_value(&g, &all, &all).map_err(err)?;
    ensure(
        q.value.is_infinite() && q.status == GameStatus::Infinite,
        || format!("q = {}", q.value),
    )?;
    ensure(!q.infinity_witness.is_empty(), || {
        "no infinity witness".into()
    })?;
    let (m, mbar) = cheb_limits_via_games(&g, &all, &all).map_err(err)?;
    ensure(mbar.is_infinite(), || format!("Mbar = {mbar}"))?;
    ensure(m.is_infinite(), || format!("M = {m} on a finite grid"))?;
    for n in 1..=2 {
        let mn = cheb_n(&g, &all, &all, n, &SearchOptions::exact())
            .map_err(err)?
            .value;
        ensure(mn.is_finite(), || format!("M_{n} = {mn}"))?;
    }
    let small = build_interval_grid(0.0, 1.0, 17, Kernel::NegLog).map_err(err)?;
    for n in 1..=4 {
        let mn = cheb_n(
            &small,
            &small.all(),
            &small.all(),
            n,
            &SearchOptions::exact(),
        )
        .map_err(err)?
        .value;
        ensure(mn.is_finite(), || format!("N = 17: M_{n} = {mn}"))?;
    }

    let cmp = compare_R_A(&g, &all, &all).map_err(err)?;
    ensure(
        cmp.infinite_upper && cmp.A.hi().is_infinite() && cmp.R.hi().is_infinite(),
        || format!("R = {}, A = {}", cmp.R, cmp.A),
    )?;
    let report = rendezvous_report(
        &small,
        &small.all(),
        &small.all(),
        3,
        &SearchOptions::exact(),
    )
    .map_err(err)?;
    let json = serde_json::to_string(&report).map_err(err)?;
    let doc: serde_json::Value = serde_json::from_str(&json).map_err(err)?;
    for e in doc["R_n"].as_array().unwrap() {
        ensure(e["hi"] == "inf", || {
            format!("R_n upper endpoint written as {}", e["hi"])
        })?;
        ensure(e["lo"].is_number(), || {
            format!("R_n lower endpoint written as {}", e["lo"])
        })?;
    }
    ensure(doc["A"]["hi"] == "inf" && doc["R"]["hi"] == "inf", || {
        json.clone()
    })?;
    ensure(!json.contains("null") && !json.contains("e308"), || {
        format!("capped value in {json}")
    })?;
    let qjson = serde_json::to_value(&q).map_err(err)?;
    ensure(qjson["value"] == "inf", || {
        format!("q written as {}", qjson["value"])
    })?;
    Ok(format!(
        "q = q# = Mbar = inf, M_n finite (n <= 2 at N = 257, n <= 4 at N = 17), R = {}, A = {}",
        cmp.R, cmp.A
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "two-point energies",
            budget: Duration::from_millis(1),
            run: two_point,
        },
        Criterion {
            id: 2,
            name: "unit interval rendezvous",
            budget: Duration::from_secs(5),
            run: euclid_interval,
        },
        Criterion {
            id: 3,
            name: "circle average singletons",
            budget: Duration::from_secs(10),
            run: circle_singletons,
        },
        Criterion {
            id: 4,
            name: "neglog diameters",
            budget: Duration::from_secs(60),
            run: neglog_diameters,
        },
        Criterion {
            id: 5,
            name: "minimax duality",
            budget: Duration::from_secs(30),
            run: minimax_duality,
        },
        Criterion {
            id: 6,
            name: "inequality lattice",
            budget: Duration::MAX,
            run: inequality_lattice,
        },
        Criterion {
            id: 7,
            name: "oracle equivalence",
            budget: Duration::from_secs(120),
            run: oracle_equivalence,
        },
        Criterion {
            id: 8,
            name: "infinity semantics",
            budget: Duration::MAX,
            run: infinity_semantics,
        },
    ];
    // warm up allocator and thread pool so the 1 ms budget measures the solve
    let _ = two_point();

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let over = elapsed > c.budget;
        let (tag, detail) = match (&result, over) {
            (Ok(msg), false) => ("PASS", msg.clone()),
            (Ok(msg), true) => ("FAIL", format!("{msg}; over budget {:?}", c.budget)),
            (Err(msg), _) => ("FAIL", msg.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} [{tag}] {} ({:.3?}): {detail}",
            c.id, c.name, elapsed
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
