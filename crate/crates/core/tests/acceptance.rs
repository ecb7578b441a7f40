//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Simulation criteria run full-size scenarios and take a
//! few minutes on one core.

use std::time::Instant;

use transmed::data::EffectSpec;
use transmed::estimate::EstimatorKind;
use transmed::nuisance::{Component, MisspecSet, Nuisance, NuisanceEstimates};
use transmed::sim::oracle::{intercept_only_limit, limit_suite, population_eif_mean};
use transmed::sim::{
    cells, oracle_for, run_scenario, DgmParams, EffectKind, MetricsRow, OracleNuisance, Population,
    ScenarioSpec,
};

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id:>4}  {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn bern(p: f64, x: usize) -> f64 {
    if x == 1 {
        p
    } else {
        1.0 - p
    }
}

/// Joint law of (w1, w2, delta, s, a, z, m, y), written out from the model
/// equations with literal coefficients. `y_m` is the M coefficient of the
/// outcome model.
fn joint(y_m: f64) -> Vec<([usize; 8], f64)> {
    let l = f64::ln;
    let mut out = Vec::with_capacity(256);
    for k in 0..256usize {
        let v: [usize; 8] = std::array::from_fn(|j| (k >> j) & 1);
        let [w1, w2, d, s, a, z, m, y] = v;
        let f = |x: usize| x as f64;
        let p = bern(0.5, w1)
            * bern(0.4 + 0.2 * f(w1), w2)
            * bern(expit(-1.0 + l(4.0) * f(w1) + l(4.0) * f(w2)), d)
            * bern(
                expit(l(1.2) * f(w1) + l(1.2) * f(w2) + l(1.2) * f(w1) * f(w2)),
                s,
            )
            * 0.5
            * bern(
                expit(
                    -l(2.0) + l(4.0) * f(a) - l(2.0) * f(w2)
                        + l(1.4) * f(s)
                        + l(1.43) * f(a) * f(s),
                ),
                z,
            )
            * bern(
                expit(-l(2.0) + l(4.0) * f(z) - l(1.4) * f(w2) + l(1.4) * f(s)),
                m,
            )
            * bern(
                expit(
                    -l(5.0) + l(8.0) * f(z) + y_m * f(m) - l(1.2) * f(w2) + l(1.2) * f(w2) * f(z),
                ),
                y,
            );
        out.push((v, p));
    }
    out
}

/// theta(a', a*) by brute-force summation over the joint table. With
/// `sampled` every probability is taken within delta = 1.
fn brute_theta(table: &[([usize; 8], f64)], sampled: bool, ap: usize, ast: usize) -> f64 {
    const W1: usize = 0;
    const W2: usize = 1;
    const D: usize = 2;
    const S: usize = 3;
    const A: usize = 4;
    const Z: usize = 5;
    const M: usize = 6;
    const Y: usize = 7;
    let mass = |fixed: &[(usize, usize)]| -> f64 {
        table
            .iter()
            .filter(|(v, _)| !sampled || v[D] == 1)
            .filter(|(v, _)| fixed.iter().all(|&(i, x)| v[i] == x))
            .map(|(_, p)| p)
            .sum()
    };
    let mut theta = 0.0;
    let target = mass(&[(S, 0)]);
    for w1 in 0..2 {
        for w2 in 0..2 {
            let w = [(W1, w1), (W2, w2)];
            let pw = mass(&[w[0], w[1], (S, 0)]) / target;
            for z in 0..2 {
                let q = mass(&[w[0], w[1], (S, 0), (A, ap), (Z, z)])
                    / mass(&[w[0], w[1], (S, 0), (A, ap)]);
                for m in 0..2 {
                    let pm = mass(&[w[0], w[1], (S, 0), (A, ast), (M, m)])
                        / mass(&[w[0], w[1], (S, 0), (A, ast)]);
                    let src = [w[0], w[1], (S, 1), (A, ap), (Z, z), (M, m)];
                    let mut with_y = src.to_vec();
                    with_y.push((Y, 1));
                    let b = mass(&with_y) / mass(&src);
                    theta += b * q * pm * pw;
                }
            }
        }
    }
    theta
}

fn spec(a: u8, b: u8) -> EffectSpec {
    EffectSpec::new(a, b).unwrap()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.json");
    let mut worst: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    for (y_m, set) in [(4f64.ln(), None), (0.0, Some("y.m=0"))] {
        let mut args = vec!["transmed", "oracle", "--format", "json", "--output"];
        args.push(path.to_str().unwrap());
        if let Some(s) = set {
            args.extend(["--set", s]);
        }
        assert_eq!(transmed::cli::main_with_args(args), 0);
        let rows: Vec<serde_json::Value> =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        let table = joint(y_m);
        for row in &rows {
            let sampled = row["population"] == "sampled";
            let th = |ap, ast| brute_theta(&table, sampled, ap, ast);
            let (pp, ps, ss) = (th(1, 1), th(1, 0), th(0, 0));
            for (key, want) in [
                ("theta_pp", pp),
                ("theta_ps", ps),
                ("theta_ss", ss),
                ("sde", ps - ss),
                ("sie", pp - ps),
            ] {
                worst = worst.max((row[key].as_f64().unwrap() - want).abs());
            }
            if set.is_none() {
                ratio = ratio.min(row["sde"].as_f64().unwrap() / row["sie"].as_f64().unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "1",
        worst < 1e-10 && ratio > 5.0 && secs < 1.0,
        format!(
            "oracle vs brute-force enumeration: max |diff| {worst:.1e}; sde/sie {ratio:.2}; {secs:.3}s"
        ),
    );
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let p = DgmParams::default();
    let mut worst: f64 = 0.0;
    for pop in [Population::Full, Population::Sampled] {
        let cs = cells(&p, pop);
        let truths = oracle_for(&p, pop, spec(1, 0));
        for (sp, th) in [
            (spec(1, 1), truths.theta_pp),
            (spec(1, 0), truths.theta_ps),
            (spec(0, 0), truths.theta_ss),
        ] {
            let eta = OracleNuisance::new(p, pop, sp);
            worst = worst.max(population_eif_mean(&cs, &eta, th).unwrap().abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "2",
        worst < 1e-10 && secs < 1.0,
        format!("EIF mean at the truth: max |mean| {worst:.1e}; {secs:.3}s"),
    );
}

/// True nuisance functions except for the components in `wrong`, which
/// come from the intercept-only population fits.
struct Mixed {
    truth: OracleNuisance,
    flat: NuisanceEstimates,
    wrong: MisspecSet,
}

impl Mixed {
    fn pick(&self, c: Component) -> &dyn Nuisance {
        if self.wrong.contains(c) {
            &self.flat
        } else {
            &self.truth
        }
    }
}

impl Nuisance for Mixed {
    fn effect(&self) -> EffectSpec {
        self.truth.effect()
    }
    fn t(&self) -> f64 {
        self.truth.t()
    }
    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::C).c(a, z, m, w)
    }
    fn g(&self, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::G).g(a, w)
    }
    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::E).e(a, m, w)
    }
    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::Q).q(z, a, w)
    }
    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::R).r(z, a, m, w)
    }
    fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::B).b(a, z, m, w)
    }
    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::U).u(z, a, w)
    }
    fn v(&self, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::V).v(a, w)
    }
}

fn criterion_3(r: &mut Report) {
    use Component::*;
    let start = Instant::now();
    let p = DgmParams::default();
    let cases: [&[Component]; 6] = [
        &[B, U, G],
        &[C, E, R, U, G],
        &[C, E, R, Q, G],
        &[B, U, V],
        &[C, E, R, U, V],
        &[C, E, R, Q, V],
    ];
    let mut worst: f64 = 0.0;
    let mut q_sde = 0.0;
    for pop in [Population::Full, Population::Sampled] {
        let cs = cells(&p, pop);
        let truths = oracle_for(&p, pop, spec(1, 0));
        let corners = [
            (spec(1, 1), truths.theta_pp),
            (spec(1, 0), truths.theta_ps),
            (spec(0, 0), truths.theta_ss),
        ];
        let mean = |mis: &MisspecSet, k: usize| {
            let suite = limit_suite(&p, pop, corners[k].0, mis).unwrap();
            population_eif_mean(&cs, &suite, corners[k].1).unwrap()
        };
        for case in cases {
            for (sp, th) in corners {
                let eta = Mixed {
                    truth: OracleNuisance::new(p, pop, sp),
                    flat: intercept_only_limit(&p, pop, sp).unwrap(),
                    wrong: MisspecSet::of(case),
                };
                worst = worst.max(population_eif_mean(&cs, &eta, th).unwrap().abs());
            }
        }
        if pop == Population::Full {
            let mis = MisspecSet::of(&[Q]);
            q_sde = mean(&mis, 1) - mean(&mis, 2);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "3",
        worst < 1e-8 && q_sde.abs() > 0.05 && secs < 5.0,
        format!(
            "six robust configurations: max |EIF mean| {worst:.1e}; q wrong, sde EIF mean {q_sde:.4}; {secs:.2}s"
        ),
    );
}

fn find<'a>(rows: &'a [MetricsRow], est: &str, effect: &str) -> &'a MetricsRow {
    rows.iter()
        .find(|r| r.estimator == est && r.effect == effect)
        .expect("row present")
}

fn describe(m: &MetricsRow) -> String {
    format!(
        "{}/{}: bias {:+.4} cover {:.3} relse {:.3}",
        m.estimator,
        m.effect,
        m.mean_estimate - m.truth,
        m.coverage,
        m.relse.unwrap_or(f64::NAN)
    )
}

struct Runs {
    rows: Vec<MetricsRow>,
}

fn scenario(label: &str, mis: MisspecSet, weighted: bool) -> ScenarioSpec {
    ScenarioSpec {
        label: label.into(),
        mis,
        weighted,
        seed: 20_240_601,
        ..ScenarioSpec::default()
    }
}

fn timed_run(spec: &ScenarioSpec, all: &mut Runs) -> (Vec<MetricsRow>, f64) {
    let start = Instant::now();
    let rows = run_scenario(spec).expect("scenario runs");
    all.rows.extend(rows.iter().cloned());
    (rows, start.elapsed().as_secs_f64())
}

fn criteria_4_to_6(r: &mut Report, all: &mut Runs) {
    for weighted in [true, false] {
        let tag = if weighted { "weighted" } else { "unweighted" };
        let (none, t1) = timed_run(
            &scenario(&format!("none-{tag}"), MisspecSet::none(), weighted),
            all,
        );
        let mut ok4 = true;
        let mut d4 = Vec::new();
        for est in ["os", "tmle"] {
            let m = find(&none, est, "sde");
            let relse = m.relse.unwrap();
            ok4 &= (m.mean_estimate - m.truth).abs() <= 0.003
                && (0.91..=0.98).contains(&m.coverage)
                && (0.85..=1.15).contains(&relse);
            d4.push(describe(m));
        }
        r.check(
            &format!("4{}", &tag[..1]),
            ok4,
            format!("{tag} none, n=10000 reps=200: {}; {t1:.0}s", d4.join("; ")),
        );

        let mut ok6 = true;
        let mut d6 = Vec::new();
        for est in ["os", "tmle"] {
            let m = find(&none, est, "sie");
            ok6 &=
                (m.mean_estimate - m.truth).abs() <= 0.002 && (0.90..=0.98).contains(&m.coverage);
            d6.push(describe(m));
        }
        r.check(
            &format!("6{}", &tag[..1]),
            ok6,
            format!("{tag} none: {}", d6.join("; ")),
        );

        let mut q_spec = scenario(
            &format!("q-{tag}"),
            MisspecSet::of(&[Component::Q]),
            weighted,
        );
        q_spec.effects = vec![EffectKind::Sde];
        let (q, t5) = timed_run(&q_spec, all);
        let (os, tm) = (find(&q, "os", "sde"), find(&q, "tmle", "sde"));
        let (b_os, b_tm) = (os.abs_bias, tm.abs_bias);
        r.check(
            &format!("5{}", &tag[..1]),
            b_os >= 0.05 && os.coverage <= 0.30 && b_tm < b_os,
            format!(
                "{tag} q wrong: {}; {}; {t5:.0}s",
                describe(os),
                describe(tm)
            ),
        );
    }
}

fn criterion_7(r: &mut Report, all: &Runs) {
    let tmle: Vec<&MetricsRow> = all.rows.iter().filter(|m| m.estimator == "tmle").collect();
    let ratio = tmle
        .iter()
        .filter_map(|m| m.tmle_max_score_ratio)
        .fold(0.0, f64::max);
    let mw = tmle
        .iter()
        .filter_map(|m| m.tmle_max_mw_score)
        .fold(0.0, f64::max);
    let unconverged: usize = tmle
        .iter()
        .filter(|m| m.effect == "sde")
        .map(|m| m.tmle_unconverged)
        .sum();
    r.check(
        "7",
        !tmle.is_empty() && ratio <= 1.0 && mw <= 1e-10,
        format!(
            "TMLE certificates over {} result rows: max score/bound {ratio:.3}; max |mean(D_M + D_W)| {mw:.1e}; unconverged corners {unconverged}",
            tmle.len()
        ),
    );
}

fn criterion_8(r: &mut Report, all: &mut Runs) {
    let start = Instant::now();
    let rate = |mis: MisspecSet, n: usize, all: &mut Runs| {
        let s = ScenarioSpec {
            label: format!("rate-{mis}-{n}"),
            n,
            reps: 500,
            mis,
            estimators: vec![EstimatorKind::OneStep],
            effects: vec![EffectKind::Sde],
            seed: 77,
            ..ScenarioSpec::default()
        };
        let row = timed_run(&s, all).0.remove(0);
        // Monte Carlo SE of sqrt(n) * bias is sqrt(n) SD_MC / sqrt(R).
        let mc_se = row.relsd.unwrap() * row.sigma2.sqrt() / (row.reps as f64).sqrt();
        (row.sqrt_n_abs_bias, mc_se)
    };
    let (c1, s1) = rate(MisspecSet::none(), 1_000, all);
    let (c2, s2) = rate(MisspecSet::none(), 10_000, all);
    let (q1, _) = rate(MisspecSet::of(&[Component::Q]), 1_000, all);
    let (q2, _) = rate(MisspecSet::of(&[Component::Q]), 10_000, all);
    let slack = 2.0 * (s1 * s1 + s2 * s2).sqrt();
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "8",
        c2 - c1 <= slack && q2 > q1,
        format!(
            "sqrt(n)|bias| correct {c1:.3} -> {c2:.3} (slack {slack:.3}); q wrong {q1:.2} -> {q2:.2}; {secs:.0}s"
        ),
    );
}

fn criterion_9(r: &mut Report, all: &Runs) {
    let worst = all
        .rows
        .iter()
        .map(|m| {
            (m.relrmse.unwrap() - m.relsd.unwrap().powi(2) - m.sqrt_n_abs_bias.powi(2) / m.sigma2)
                .abs()
        })
        .fold(0.0, f64::max);
    r.check(
        "9",
        worst <= 1e-12,
        format!(
            "metric identity over {} rows: max gap {worst:.1e}",
            all.rows.len()
        ),
    );
}

fn criterion_10(r: &mut Report) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    std::fs::write(
        &grid,
        "[defaults]\nn = 2000\nreps = 12\nseed = 5\n\n[[scenario]]\nmis = \"none\"\n\n\
         [[scenario]]\nmis = \"c,e,r,u,v\"\nweighted = false\n",
    )
    .unwrap();
    let run = |threads: &str, format: &str| {
        let out = dir.path().join(format!("out-{threads}.{format}"));
        let code = transmed::cli::main_with_args([
            "transmed",
            "simulate",
            "--scenarios",
            grid.to_str().unwrap(),
            "--threads",
            threads,
            "--format",
            format,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        std::fs::read(out).unwrap()
    };
    let mut same = true;
    for format in ["csv", "json"] {
        let one = run("1", format);
        same &= one == run("4", format) && one == run("3", format);
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "10",
        same,
        format!("simulate output byte-identical for 1, 3 and 4 threads (csv, json); {secs:.0}s"),
    );
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; a name filter
    // that is not ours means another target was selected.
    if std::env::args()
        .skip(1)
        .any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str()))
    {
        return;
    }
    let mut r = Report { failed: 0 };
    let mut all = Runs { rows: Vec::new() };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criteria_4_to_6(&mut r, &mut all);
    criterion_7(&mut r, &all);
    criterion_8(&mut r, &mut all);
    criterion_9(&mut r, &all);
    criterion_10(&mut r);
    if r.failed > 0 {
        println!("{} criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
