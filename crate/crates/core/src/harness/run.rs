use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Mode};
use super::fit::{fit_points, RateRow, RateSeries};
use super::svg::loglog_svg;
use crate::composite::{make_synthetic_truth, CompositeFunction};
use crate::error::{Error, Result};
use crate::estimators::{
    default_sigma_tilde, evaluate_estimator, gan_fit, mle_fit, oracle_audit, write_trace, AuditInput, Critic,
    GeneratorArch,
};
use crate::fano::{
    fano_bound, grid_exponent, gv_packing, kl_pair, rate_exponents, w1_excess_check, FanoConfig, FanoConstants,
};
use crate::generator::Generator;
use crate::ipm::{build_constructed_discriminator, NET_LATENTS};
use crate::measures::{noisy_sample, EmpiricalMeasure, NoisyModel};
use crate::netgen::{size_for, SparseReluNet};
use crate::ot::{rate_cell, w1_bruteforce, w1_exact, PROXY_FACTOR};
use crate::par;
use crate::rng::Seed;

/// Files written by [`run`] and the JSON summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// CSV file that is flushed after every row, so an interrupted run keeps
/// everything written so far.
struct CsvSink {
    wr: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut wr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        wr.write_record(header)?;
        wr.flush()?;
        Ok(CsvSink { wr })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.wr.write_record(fields)?;
        self.wr.flush()?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seed: Seed,
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn sink(&mut self, name: &str, header: &[&str]) -> Result<CsvSink> {
        let p = self.out.join(name);
        let s = CsvSink::create(&p, header)?;
        self.files.push(p);
        Ok(s)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.out.join(name);
        std::fs::write(&p, text)?;
        self.files.push(p);
        Ok(())
    }

    fn plot(&mut self, name: &str, title: &str, series: &RateSeries) -> Result<()> {
        if self.cfg.plot {
            let svg = loglog_svg(title, &series.means(), series.fit.as_ref());
            self.write(name, &svg)?;
        }
        Ok(())
    }
}

/// Runs one experiment into `out`, creating the directory if needed.
///
/// CSV and SVG outputs depend only on `(cfg, seed)`; the wall-clock time is
/// confined to `summary.json`'s `metadata` block.
pub fn run(cfg: &ExperimentConfig, seed: Seed, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut ctx = Ctx {
        cfg,
        seed,
        out,
        files: Vec::new(),
    };
    let results = match cfg.mode {
        Mode::Rates => run_rates(&mut ctx)?,
        Mode::Gan | Mode::Mle => run_estimator(&mut ctx)?,
        Mode::Fano => run_fano(&mut ctx)?,
        Mode::OtBench => run_ot_bench(&mut ctx)?,
        Mode::Audit => run_audit(&mut ctx)?,
    };
    let (beta, t) = cfg.truth.indices();
    let theory = rate_exponents(beta, t, cfg.truth.spec.latent_dim())?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let summary = json!({
        "metadata": {"created_unix": created, "version": env!("CARGO_PKG_VERSION")},
        "mode": cfg.mode.name(),
        "seed": seed.0,
        "config": cfg,
        "theory": {"beta_star": beta, "t_star": t, "exponents": theory},
        "results": results,
    });
    ctx.write("summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutput {
        files: ctx.files,
        summary,
    })
}

fn series_json(series: &RateSeries) -> Value {
    let means: Vec<Value> = series.means().iter().map(|(n, v)| json!({"n": n, "mean": v})).collect();
    json!({"means": means, "fit": series.summary_json()})
}

fn run_rates(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let big = PROXY_FACTOR * cfg.n_grid[cfg.n_grid.len() - 1];
    let mut sink = ctx.sink("rates.csv", &["n", "rep", "value"])?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let vals = par::try_map_range(cfg.replicates, |r| {
            rate_cell(
                cfg.rates.dim,
                n,
                big,
                cfg.rates.law,
                ctx.seed.child(n as u64).child(r as u64),
            )
        })?;
        for (rep, value) in vals.into_iter().enumerate() {
            sink.row(&[n.to_string(), rep.to_string(), num(value)])?;
            rows.push(RateRow { n, rep, value });
        }
    }
    let series = RateSeries::new(rows);
    ctx.plot("rates.svg", &format!("E W1(P_n, P), D = {}", cfg.rates.dim), &series)?;
    let d = cfg.rates.dim as f64;
    Ok(json!({"series": series_json(&series), "reference_exponent": -1.0 / d.max(2.0)}))
}

/// Architecture for sample size `n`: sized from `(β*, t*)` when sizing
/// constants are given, else the configured one.
fn arch_for(cfg: &ExperimentConfig, base: &GeneratorArch, n: usize) -> GeneratorArch {
    match cfg.sizing {
        Some(c) => {
            let (beta, t) = cfg.truth.indices();
            let size = size_for(n as f64, beta, t, c);
            GeneratorArch {
                widths: size.widths(cfg.truth.spec.latent_dim(), cfg.truth.spec.output_dim()),
                sparsity: size.sparsity,
                sup_bound: cfg.sup_bound,
            }
        }
        None => base.clone(),
    }
}

struct Cell {
    w1: f64,
    objective: f64,
    extra: Vec<f64>,
    nonzeros: usize,
}

fn run_estimator(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let gan = cfg.mode == Mode::Gan;
    let truth = cfg.truth.build()?;
    let (beta, t) = cfg.truth.indices();
    let name = cfg.mode.name();
    let header: &[&str] = if gan {
        &["n", "rep", "w1", "objective", "eps_opt", "nonzeros"]
    } else {
        &["n", "rep", "w1", "objective", "sigma_fit", "sigma_tilde", "nonzeros"]
    };
    let mut sink = ctx.sink(&format!("{name}.csv"), header)?;
    if cfg.traces && gan {
        std::fs::create_dir_all(ctx.out.join("traces"))?;
    }
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for &n in &cfg.n_grid {
        let base = if gan { &cfg.gan.arch } else { &cfg.mle.arch };
        let arch = arch_for(cfg, base, n);
        sizes.push(json!({"n": n, "widths": arch.widths, "sparsity": arch.sparsity}));
        let cells = par::try_map_range(cfg.replicates, |r| {
            let s = ctx.seed.child(n as u64).child(r as u64);
            let data = noisy_sample(&truth, n, s.named("data"))?;
            if gan {
                let mut g = cfg.gan.clone();
                g.arch = arch.clone();
                if cfg.sizing.is_some() {
                    g.m_latent = g.m_latent.max(n);
                    g.m_eval = g.m_eval.max(4 * g.m_latent);
                }
                let fit = gan_fit(&data, &g, s.named("gan"))?;
                if cfg.traces && r == 0 {
                    if let Some(Some(tr)) = fit.traces.get(fit.best_restart) {
                        let p = ctx.out.join("traces").join(format!("gan_n{n}.csv"));
                        write_trace(tr, BufWriter::new(File::create(p)?))?;
                    }
                }
                Ok::<_, Error>(Cell {
                    w1: evaluate_estimator(&fit.net, &truth, cfg.n_eval, s.named("eval"))?,
                    objective: fit.objective,
                    extra: vec![fit.eps_opt],
                    nonzeros: fit.net.nonzeros(),
                })
            } else {
                let mut m = cfg.mle.clone();
                m.arch = arch.clone();
                let sigma = cfg.sigma_tilde.unwrap_or_else(|| default_sigma_tilde(n, beta, t));
                let fit = mle_fit(&data, sigma, &m, s.named("mle"))?;
                Ok(Cell {
                    w1: evaluate_estimator(&fit.net, &truth, cfg.n_eval, s.named("eval"))?,
                    objective: fit.objective,
                    extra: vec![fit.sigma_fit, sigma],
                    nonzeros: fit.net.nonzeros(),
                })
            }
        })?;
        for (rep, c) in cells.into_iter().enumerate() {
            let mut f = vec![n.to_string(), rep.to_string(), num(c.w1), num(c.objective)];
            f.extend(c.extra.iter().map(|v| num(*v)));
            f.push(c.nonzeros.to_string());
            sink.row(&f)?;
            rows.push(RateRow { n, rep, value: c.w1 });
        }
    }
    if cfg.traces && gan {
        for &n in &cfg.n_grid {
            let p = ctx.out.join("traces").join(format!("gan_n{n}.csv"));
            if p.exists() {
                ctx.files.push(p);
            }
        }
    }
    let series = RateSeries::new(rows);
    ctx.plot(&format!("{name}.svg"), &format!("{name}: E W1(Q_hat, Q0)"), &series)?;
    Ok(json!({"series": series_json(&series), "sizes": sizes}))
}

fn run_fano(ctx: &mut Ctx) -> Result<Value> {
    let f = ctx.cfg.fano.clone();
    let seed = ctx.seed;
    let k = FanoConstants::calibrate(f.beta, f.d, f.n_mc, seed.named("calibrate"))?;

    let mut kl_sink = ctx.sink("fano_kl.csv", &["m", "hamming", "kl", "hellinger2", "kl_bound"])?;
    let mut w1_sink = ctx.sink("fano_w1.csv", &["m", "hamming", "lhs", "rhs", "stderr"])?;
    let mut kl_rows = Vec::new();
    let mut w1_rows = Vec::new();
    for (mi, &m) in f.m_grid.iter().enumerate() {
        let cfg = FanoConfig::new(m, f.d, f.beta, k.c1)?;
        let cells = cfg.cells();
        let plus = vec![1i8; cells];
        let mut rng = seed.named("signs").child(mi as u64).rng();
        let random: Vec<i8> = (0..cells).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let mut single = plus.clone();
        single[0] = -1;
        let pairs = [single, random, vec![-1i8; cells]];
        let bound = k.kl_const * k.c1 * k.c1 * (m as f64).powf(-2.0 * (f.beta - 1.0));
        for (pi, other) in pairs.iter().enumerate() {
            let dv = kl_pair(&cfg, &plus, other)?;
            let h = crate::fano::hamming(&plus, other);
            kl_sink.row(&[m.to_string(), h.to_string(), num(dv.kl), num(dv.hellinger2), num(bound)])?;
            kl_rows.push(json!({"m": m, "hamming": h, "kl": dv.kl, "hellinger2": dv.hellinger2, "kl_bound": bound}));
            let chk = w1_excess_check(
                &cfg,
                &plus,
                other,
                f.n_mc,
                k.c3,
                seed.named("w1").child(mi as u64).child(pi as u64),
            )?;
            w1_sink.row(&[
                m.to_string(),
                h.to_string(),
                num(chk.lhs),
                num(chk.rhs),
                num(chk.stderr),
            ])?;
            w1_rows.push(json!({"m": m, "hamming": h, "lhs": chk.lhs, "rhs": chk.rhs, "stderr": chk.stderr}));
        }
    }

    let mut pack_sink = ctx.sink("fano_packing.csv", &["j_size", "codewords", "min_distance", "target"])?;
    let mut packs = Vec::new();
    for (i, &j) in f.packing_sizes.iter().enumerate() {
        let p = gv_packing(j, seed.named("packing").child(i as u64))?;
        let min = p.pairwise_min().unwrap_or(j);
        let target = crate::fano::packing_target(j);
        pack_sink.row(&[j.to_string(), p.len().to_string(), min.to_string(), target.to_string()])?;
        packs.push(json!({"j_size": j, "codewords": p.len(), "min_distance": min, "target": target}));
    }

    let mut bound_sink = ctx.sink("fano_bound.csv", &["n", "m", "bound"])?;
    let e = grid_exponent(f.beta, f.d)?;
    let mut curve = Vec::new();
    for &n in &f.bound_n {
        let b = fano_bound(n, &k)?;
        let m = n.powf(e).ceil();
        bound_sink.row(&[num(n), num(m), num(b)])?;
        if b > 0.0 {
            curve.push((n as usize, b));
        }
    }
    let fit = fit_points(&curve).ok();
    Ok(json!({
        "constants": k,
        "kl": kl_rows,
        "w1": w1_rows,
        "packing": packs,
        "bound_fit": fit,
        "bound_exponent": crate::fano::fano_bound_exponent(f.beta, f.d)?,
    }))
}

fn run_ot_bench(ctx: &mut Ctx) -> Result<Value> {
    let o = ctx.cfg.ot_bench.clone();
    let seed = ctx.seed;
    let mut sink = ctx.sink(
        "ot_bench.csv",
        &["instance", "atoms", "dim", "exact", "brute", "abs_diff"],
    )?;
    let mut worst: f64 = 0.0;
    for i in 0..o.instances {
        let mut rng = seed.named("oracle").child(i as u64).rng();
        let n = rng.random_range(1..=o.max_atoms);
        let dim = rng.random_range(1..=o.max_dim);
        let mut draw = || EmpiricalMeasure::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect());
        let (mu, nu) = (draw()?, draw()?);
        let exact = w1_exact(&mu, &nu)?.cost;
        let brute = w1_bruteforce(&mu, &nu)?;
        worst = worst.max((exact - brute).abs());
        sink.row(&[
            i.to_string(),
            n.to_string(),
            dim.to_string(),
            num(exact),
            num(brute),
            num((exact - brute).abs()),
        ])?;
    }
    let mut dual_sink = ctx.sink(
        "ot_dual.csv",
        &["atoms", "dim", "primal", "dual", "gap", "marginal_error"],
    )?;
    let mut worst_gap: f64 = 0.0;
    let mut worst_marg: f64 = 0.0;
    for (k, &size) in o.dual_sizes.iter().enumerate() {
        let mut rng = seed.named("dual").child(k as u64).rng();
        let dim = 2;
        let m = size + size / 3;
        let mut weighted = |n: usize| {
            let pts = (0..n * dim).map(|_| rng.random::<f64>()).collect();
            let w = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            EmpiricalMeasure::with_weights(dim, pts, w)
        };
        let (mu, nu) = (weighted(size)?, weighted(m)?);
        let plan = w1_exact(&mu, &nu)?;
        let dual = plan.dual_value(&mu, &nu);
        let gap = plan.cost - dual;
        let marg = plan
            .row_sums()
            .iter()
            .zip(mu.weights())
            .chain(plan.col_sums().iter().zip(nu.weights()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap.abs());
        worst_marg = worst_marg.max(marg);
        dual_sink.row(&[
            size.to_string(),
            dim.to_string(),
            num(plan.cost),
            num(dual),
            num(gap),
            num(marg),
        ])?;
    }
    Ok(json!({"max_abs_diff": worst, "max_dual_gap": worst_gap, "max_marginal_error": worst_marg}))
}

fn run_audit(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let a = &cfg.audit;
    let seed = ctx.seed;
    let mut sink = ctx.sink(
        "audit.csv",
        &[
            "instance",
            "lhs",
            "base",
            "eps1",
            "eps2",
            "eps3",
            "eps4",
            "eps4_covered",
            "rhs",
            "stderr",
            "verdict",
            "eps4_within",
        ],
    )?;
    let limit = 5.0 * a.eps + 1e-3;
    let (mut holds, mut within) = (0usize, 0usize);
    for i in 0..a.instances {
        let s = seed.child(i as u64);
        let g0 = make_synthetic_truth(cfg.truth.seed.wrapping_add(i as u64), &cfg.truth.spec)?;
        let truth = NoisyModel::new(g0.clone(), cfg.truth.noise_sd)?;
        let mut cands: Vec<Box<dyn Generator>> = (0..a.candidates)
            .map(|k| {
                let net = SparseReluNet::random(
                    a.candidate_widths.clone(),
                    a.candidate_sparsity,
                    cfg.sup_bound,
                    s.named("candidate").child(k as u64),
                )?;
                Ok(Box::new(net) as Box<dyn Generator>)
            })
            .collect::<Result<_>>()?;
        if a.include_truth {
            cands.push(Box::new(g0.clone()));
        }
        // the constructed class always covers G ∪ {g₀}
        let members: Vec<&dyn Generator> = cands
            .iter()
            .map(|c| c.as_ref())
            .chain((!a.include_truth).then_some(&g0 as &dyn Generator))
            .collect();
        let built = build_constructed_discriminator(&members, a.m_atoms, a.eps, s.named("class"))?;
        let data = noisy_sample(&truth, a.n, s.named("data"))?;
        let mut g = cfg.gan.clone();
        g.arch = GeneratorArch {
            widths: a.candidate_widths.clone(),
            sparsity: a.candidate_sparsity,
            sup_bound: cfg.sup_bound,
        };
        g.critic = Critic::Class {
            class: built.class.clone(),
        };
        let fit = gan_fit(&data, &g, s.named("gan"))?;
        let pair_rows = NET_LATENTS.min(built.latents.len() / built.latent_dim);
        let input = AuditInput::<CompositeFunction, Box<dyn Generator>> {
            truth: &truth,
            candidates: &cands,
            class: &built.class,
            pair_latents: &built.latents[..pair_rows * built.latent_dim],
            data: &data,
            fit: &fit,
        };
        let t = oracle_audit(&input, &a.audit, s.named("audit"))?;
        let ok4 = t.eps4_covered <= limit;
        holds += t.verdict as usize;
        within += ok4 as usize;
        sink.row(&[
            i.to_string(),
            num(t.lhs.value),
            num(t.base.value),
            num(t.eps1.value),
            num(t.eps2.value),
            num(t.eps3.value),
            num(t.eps4.value),
            num(t.eps4_covered),
            num(t.rhs),
            num(t.combined_stderr),
            (t.verdict as u8).to_string(),
            (ok4 as u8).to_string(),
        ])?;
    }
    let n = a.instances as f64;
    Ok(json!({
        "instances": a.instances,
        "verdict_rate": holds as f64 / n,
        "eps4_within_rate": within as f64 / n,
        "eps4_limit": limit,
    }))
}
