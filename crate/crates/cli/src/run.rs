use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use centroid_sec::attack::{greedy_step, greedy_step_normalized, GreedyAttackState, GreedyConfig};
use centroid_sec::bounds::{
    bound_infinite, displacement_finite, limited_moments, nu_crit, protected_moments, voronoi_slope, MixModel,
};
use centroid_sec::io::{fmt_f64, read_corpus, read_csv, write_corpus, CsvWriter};
use centroid_sec::kernel::{kernel_matrix, kernel_pca, synth_corpus, CorpusParams, KernelConfig, KernelMatrix, PcaOptions};
use centroid_sec::learner::{radius_from_quantile, Cooldown};
use centroid_sec::linalg;
use centroid_sec::rng::{gaussian_vec, unit_vector};
use centroid_sec::sim::{
    gaussian_radius, run_axiom6, run_axiom7, run_fp_sensitivity, run_greedy_gaussian, run_nu_sweep, DominanceReport,
    InnocuousSource, SimConfig, SimModel,
};
use centroid_sec::{AttackContext, CentroidState, Error, Execution, Point, RandomSource};
use serde_json::json;

use crate::cli::{
    AttackArgs, BoundVariant, BoundsArgs, Command, CorpusAction, CorpusInput, DimArgs, EmbedArgs, GenerateArgs,
    ModelArg, SimulateArgs, SourceArg,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::NonPositiveRadius(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

/// Target of an optional `--out`: the file, or stdout.
fn sink(path: Option<&PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish<W: Write>(mut w: W, path: Option<&Path>) -> Res<()> {
    w.flush().map_err(|e| match path {
        Some(p) => io_err(p, e),
        None => CliError::Runtime(format!("stdout: {e}")),
    })
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn dispatch(cmd: &Command, exec: Execution) -> Res<()> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Simulate(a) => cmd_simulate(a, exec),
        Command::Corpus { action } => match action {
            CorpusAction::Generate(a) => cmd_generate(a),
            CorpusAction::Embed(a) => cmd_embed(a, exec),
            CorpusAction::Dim(a) => cmd_dim(a, exec),
        },
        Command::Attack(a) => cmd_attack(a),
    }
}

fn cmd_bounds(a: &BoundsArgs) -> Res<()> {
    let fmt = |v: f64| match a.precision {
        Some(p) if v.is_finite() => format!("{v:.p$}"),
        _ => fmt_f64(v),
    };
    let (key, cols): (&[&str], &[&str]) = match a.variant {
        BoundVariant::Infinite => (&["i"], &["bound"]),
        BoundVariant::Finite => (&["i"], &["displacement"]),
        BoundVariant::Limited => (&["i"], &["expectation", "variance_bound"]),
        BoundVariant::Protected => (&["i"], &["expectation_upper", "expectation_lower", "variance_bound"]),
        BoundVariant::NuCrit => (&["displacement"], &["nu_crit"]),
        BoundVariant::Voronoi => (&["n", "d"], &["slope"]),
    };
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let mix = || -> Res<MixModel> { Ok(MixModel::new(a.nu, a.alpha, a.n)?.with_eps_second_moment(a.eps2)?) };
    let eval = |i: u64| -> Res<Vec<f64>> {
        Ok(match a.variant {
            BoundVariant::Infinite => vec![bound_infinite(i, a.n)],
            BoundVariant::Finite => vec![displacement_finite(i, a.n)],
            BoundVariant::Limited => {
                let m = limited_moments(i, &mix()?)?;
                vec![m.expectation, m.variance_bound]
            }
            BoundVariant::Protected => {
                let m = protected_moments(i, &mix()?)?;
                vec![m.expectation_upper, m.expectation_lower, m.variance_bound]
            }
            BoundVariant::NuCrit | BoundVariant::Voronoi => unreachable!(),
        })
    };

    // each row is (key fields, value fields)
    let rows: Vec<(Vec<String>, Vec<f64>)> = match a.variant {
        BoundVariant::NuCrit => {
            let d = a.displacement.ok_or_else(|| usage("--variant nu-crit requires --displacement"))?;
            vec![(vec![fmt(d)], vec![nu_crit(d)?])]
        }
        BoundVariant::Voronoi => {
            if a.d == 0 {
                return Err(usage("--d must be at least 1"));
            }
            vec![(vec![a.n.to_string(), a.d.to_string()], vec![voronoi_slope(a.n, a.d)])]
        }
        _ if a.out.is_none() => vec![(vec![a.i.to_string()], eval(a.i)?)],
        _ => {
            let stride = a.stride.unwrap_or(a.i.div_ceil(1000).max(1));
            if stride == 0 {
                return Err(usage("--stride must be at least 1"));
            }
            let mut steps: Vec<u64> = (0..=a.i).step_by(stride as usize).collect();
            if steps.last() != Some(&a.i) {
                steps.push(a.i);
            }
            steps
                .into_iter()
                .map(|i| Ok((vec![i.to_string()], eval(i)?)))
                .collect::<Res<_>>()?
        }
    };

    match &a.out {
        Some(path) => {
            let header: Vec<&str> = key.iter().chain(cols).copied().collect();
            let mut w = CsvWriter::new(create(path)?, &header)?;
            for (k, v) in &rows {
                let mut fields = k.clone();
                fields.extend(v.iter().map(|x| fmt(*x)));
                w.row(&fields)?;
            }
            finish(w.into_inner()?, Some(path))
        }
        None => {
            let vals: Vec<String> = rows[0].1.iter().map(|x| fmt(*x)).collect();
            println!("{}", vals.join(","));
            Ok(())
        }
    }
}

fn parse_grid(s: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--grid: `{t}` is not a number")))
        })
        .collect()
}

/// Numeric matrix from a CSV with a header row.
pub fn read_matrix(path: &Path) -> Res<Vec<Vec<f64>>> {
    let (header, rows) = read_csv(open(path)?).map_err(|e| io_err(path, e))?;
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != header.len() {
                return Err(io_err(path, format!("row {} has {} fields, header has {}", r + 2, row.len(), header.len())));
            }
            row.iter()
                .map(|f| f.parse::<f64>().map_err(|_| io_err(path, format!("row {}: `{f}` is not a number", r + 2))))
                .collect()
        })
        .collect::<Res<_>>()?;
    if rows.is_empty() {
        return Err(io_err(path, "no data rows"));
    }
    Ok(rows)
}

fn sim_config(a: &SimulateArgs, exec: Execution) -> Res<SimConfig> {
    let (model, n, iters) = match a.model {
        ModelArg::Axiom6 => (SimModel::Axiom6, 1000, 50_000),
        ModelArg::Axiom7 => (SimModel::Axiom7, 1000, 50_000),
        ModelArg::Greedy => (SimModel::GreedyGaussian, 100, 500),
        ModelArg::FpSensitivity => (SimModel::FpSensitivity, 1000, 50_000),
        ModelArg::NuSweep => (SimModel::NuSweep, 20_000, 100_000),
    };
    let base = SimConfig::default();
    let source = a.source.unwrap_or(match a.model {
        ModelArg::FpSensitivity => SourceArg::Ball,
        _ => SourceArg::Circle,
    });
    let mut cfg = SimConfig {
        model,
        nu: a.nu.unwrap_or(base.nu),
        alpha: a.alpha.unwrap_or(base.alpha),
        n: a.n.unwrap_or(n),
        iterations: a.iters.unwrap_or(iters),
        repetitions: a.reps.unwrap_or(base.repetitions),
        dim: a.d.unwrap_or(base.dim),
        seed: a.seed.unwrap_or(base.seed),
        innocuous: match source {
            SourceArg::Ball => InnocuousSource::UniformBall,
            SourceArg::Circle => InnocuousSource::UniformCircle,
            SourceArg::Corpus => InnocuousSource::CorpusEmbedding,
        },
        innocuous_radius: a
            .source_radius
            .unwrap_or(if a.model == ModelArg::Axiom7 { 0.8 } else { 1.0 }),
        eps_second_moment: a.eps2.unwrap_or(base.eps_second_moment),
        holdout_size: a.holdout.unwrap_or(base.holdout_size),
        cooldown: match a.cooldown {
            None | Some(0) => Cooldown::Permanent,
            Some(s) => Cooldown::Steps(s),
        },
        fp_target: a.fp_target.unwrap_or(base.fp_target),
        nu_grid: match &a.grid {
            Some(g) => parse_grid(g)?,
            None => base.nu_grid,
        },
        d_crit: a.dcrit.unwrap_or(base.d_crit),
        empirical_points: Vec::new(),
        execution: exec,
    };
    match (&a.embedding, source) {
        (Some(path), SourceArg::Corpus) => {
            let pts = read_matrix(path)?;
            let cols = pts[0].len();
            if a.d.is_some_and(|d| d != cols) {
                return Err(usage(format!("--d {} differs from the {cols} embedding columns", cfg.dim)));
            }
            cfg.dim = cols;
            cfg.empirical_points = pts;
        }
        (None, SourceArg::Corpus) => return Err(usage("--source corpus requires --embedding")),
        (Some(_), _) => return Err(usage("--embedding is only used with --source corpus")),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Res<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    finish(w, Some(path))
}

fn cmd_simulate(a: &SimulateArgs, exec: Execution) -> Res<()> {
    let cfg = sim_config(a, exec)?;
    let mut checks: Vec<(&str, bool, String)> = Vec::new();
    let mut extra = serde_json::Map::new();

    match cfg.model {
        SimModel::Axiom6 | SimModel::Axiom7 => {
            let trace = if cfg.model == SimModel::Axiom6 {
                run_axiom6(&cfg)?
            } else {
                run_axiom7(&cfg)?
            };
            finish(trace.write_csv(create(&a.out)?)?, Some(&a.out))?;
            let rep = DominanceReport::of(&trace);
            let last = trace.len() - 1;
            if cfg.model == SimModel::Axiom6 {
                // plateau: average over the second half of the run
                let plateau = cfg.nu / (1.0 - cfg.nu);
                let tail = trace.tail_mean(cfg.iterations / 2);
                let rel = (tail - plateau).abs() / plateau;
                checks.push(("mean_within_3se", rep.mean_outside_3se == 0, format!("{}/{} steps outside", rep.mean_outside_3se, rep.logged)));
                checks.push(("plateau_within_5pct", rel <= 0.05, format!("tail mean {tail:.5} vs {plateau:.5}")));
                extra.insert("tail_mean_d".into(), json!(tail));
            } else {
                checks.push(("mean_below_upper", rep.mean_above_bound == 0, format!("{}/{} steps above", rep.mean_above_bound, rep.logged)));
                checks.push(("mean_above_lower_3se", rep.mean_below_lower_3se == 0, format!("{}/{} steps below", rep.mean_below_lower_3se, rep.logged)));
                extra.insert("resets_at_end".into(), json!(trace.reset_flag[last]));
            }
            checks.push(("variance_within_bound_3se", rep.variance_violations == 0, format!("{}/{} steps above", rep.variance_violations, rep.logged)));
            extra.insert("final_mean_d".into(), json!(trace.mean_d[last]));
            extra.insert("final_bound_e".into(), json!(trace.bound_e[last]));
            extra.insert("dominance".into(), serde_json::to_value(&rep).map_err(|e| CliError::Runtime(e.to_string()))?);
        }
        SimModel::GreedyGaussian => {
            let gcfg = GreedyConfig {
                prune: !a.no_prune,
                check_representer: true,
                ..GreedyConfig::default()
            };
            let run = run_greedy_gaussian(&cfg, &gcfg)?;
            finish(run.trace.write_csv(create(&a.out)?)?, Some(&a.out))?;
            let heuristic = voronoi_slope(cfg.n, cfg.dim as u64) / cfg.n as f64;
            checks.push(("linear_fit_r2", run.fit.r_squared >= 0.99, format!("R2 {:.5}", run.fit.r_squared)));
            checks.push((
                "representer_residual",
                run.max_representer_residual <= 1e-6,
                format!("max {:.3e}", run.max_representer_residual),
            ));
            println!("slope={}", fmt_f64(run.fit.slope));
            extra.insert("slope".into(), json!(run.fit.slope));
            extra.insert("intercept".into(), json!(run.fit.intercept));
            extra.insert("r_squared".into(), json!(run.fit.r_squared));
            extra.insert("min_rep_r_squared".into(), json!(run.min_rep_r_squared));
            extra.insert("voronoi_slope".into(), json!(heuristic));
            extra.insert("radius".into(), json!(run.radius));
            extra.insert("max_representer_residual".into(), json!(run.max_representer_residual));
            extra.insert("overrides".into(), json!(run.overrides));
            extra.insert("stalled_repetitions".into(), json!(run.stalled_repetitions));
            extra.insert("final_mean_d".into(), json!(run.mean_d[run.mean_d.len() - 1]));
        }
        SimModel::FpSensitivity => {
            let pts = run_fp_sensitivity(&cfg)?;
            let mut w = CsvWriter::new(create(&a.out)?, &["nu", "max_fp"])?;
            for p in &pts {
                w.row(&[fmt_f64(p.nu), fmt_f64(p.max_fp)])?;
                println!("nu={} max_fp={}", fmt_f64(p.nu), fmt_f64(p.max_fp));
            }
            finish(w.into_inner()?, Some(&a.out))?;
            extra.insert("curve".into(), json!(pts));
        }
        SimModel::NuSweep => {
            let out = run_nu_sweep(&cfg)?;
            let mut w = CsvWriter::new(create(&a.out)?, &["nu", "reached", "first_reached", "final_d", "rep_fraction"])?;
            for o in &out {
                w.row(&[
                    fmt_f64(o.nu),
                    o.reached.to_string(),
                    o.first_reached.map(|v| v.to_string()).unwrap_or_default(),
                    fmt_f64(o.final_d),
                    fmt_f64(o.rep_fraction),
                ])?;
            }
            finish(w.into_inner()?, Some(&a.out))?;
            let flags: Vec<String> = out.iter().map(|o| o.reached.to_string()).collect();
            println!("reached={}", flags.join(","));
            extra.insert("outcomes".into(), json!(out));
        }
    }

    for (name, ok, detail) in &checks {
        println!("check {name}: {} ({detail})", pass(*ok));
    }
    let summary = json!({
        "model": cfg.model,
        "config": cfg,
        "checks": checks.iter().map(|(n, ok, _)| (n.to_string(), json!(ok))).collect::<serde_json::Map<_, _>>(),
        "results": extra,
    });
    write_json(&a.summary, &summary)
}

fn cmd_generate(a: &GenerateArgs) -> Res<()> {
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let params = CorpusParams {
        diversity: a.diversity,
        max_path_depth: a.max_depth,
        max_params: a.max_params,
    };
    let records = synth_corpus(RandomSource::new(a.seed), a.size, params)?;
    let mut w = sink(a.out.as_ref())?;
    write_corpus(&mut w, a.k, &records)?;
    finish(w, a.out.as_deref())
}

fn load_kernel(c: &CorpusInput, exec: Execution) -> Res<KernelMatrix> {
    let (k, records) = match &c.input {
        Some(path) => {
            let (k, recs) = read_corpus(open(path)?).map_err(|e| io_err(path, e))?;
            (c.k.unwrap_or(k), recs)
        }
        None => {
            let params = CorpusParams {
                diversity: c.diversity,
                ..CorpusParams::default()
            };
            (c.k.unwrap_or(3), synth_corpus(RandomSource::new(c.seed), c.size, params)?)
        }
    };
    let cfg = KernelConfig {
        k,
        sigma: c.sigma,
        normalize: !c.raw,
    };
    cfg.validate()?;
    Ok(kernel_matrix(&records, &cfg, exec)?)
}

fn pca_options(c: &CorpusInput) -> PcaOptions {
    PcaOptions {
        center: !c.no_center,
        ..PcaOptions::default()
    }
}

fn cmd_embed(a: &EmbedArgs, exec: Execution) -> Res<()> {
    if a.pca == Some(0) {
        return Err(usage("--pca must be at least 1"));
    }
    let km = load_kernel(&a.corpus, exec)?;
    let mut pca = kernel_pca(&km, a.variance, pca_options(&a.corpus))?;
    let cols = match a.pca {
        Some(m) => {
            if m > pca.rank {
                eprintln!("warning: kernel rank is {}; columns {}..{m} are zero", pca.rank, pca.rank + 1);
            }
            pca = pca.with_components(m);
            m
        }
        None => pca.components,
    };
    let coords = pca.training_coordinates(&km)?;
    let header: Vec<String> = (1..=cols).map(|c| format!("c{c}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::new(sink(a.out.as_ref())?, &header)?;
    for row in coords {
        let mut fields: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        fields.resize(cols, "0".to_string());
        w.row(&fields)?;
    }
    finish(w.into_inner()?, a.out.as_deref())
}

fn cmd_dim(a: &DimArgs, exec: Execution) -> Res<()> {
    let km = load_kernel(&a.corpus, exec)?;
    let pca = kernel_pca(&km, a.variance, pca_options(&a.corpus))?;
    println!("{}", pca.components);
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut w = CsvWriter::new(out, &["component", "eigenvalue", "cumulative_variance"])?;
    for (c, (l, f)) in pca.eigenvalues.iter().zip(&pca.variance_fraction).enumerate() {
        w.row(&[(c + 1).to_string(), fmt_f64(*l), fmt_f64(*f)])?;
    }
    finish(w.into_inner()?, a.out.as_deref())
}

fn cmd_attack(a: &AttackArgs) -> Res<()> {
    if !(a.fp_target > 0.0 && a.fp_target < 1.0) {
        return Err(usage("--fp-target must lie in (0, 1)"));
    }
    let mut rng = RandomSource::new(a.seed).stream(0).rng();
    let mut rows: Vec<Vec<f64>> = match &a.embedding {
        Some(path) => read_matrix(path)?,
        None => {
            if a.n == 0 || a.d < 2 {
                return Err(usage("Gaussian data needs --n >= 1 and --d >= 2"));
            }
            (0..a.n).map(|_| gaussian_vec(&mut rng, a.d)).collect()
        }
    };
    if a.normalized {
        for (r, row) in rows.iter_mut().enumerate() {
            let len = linalg::norm(row);
            if len == 0.0 {
                return Err(CliError::Runtime(format!("row {} is zero and cannot be normalized", r + 1)));
            }
            row.iter_mut().for_each(|v| *v /= len);
        }
    }
    let dim = rows[0].len();
    let points: Vec<Point> = rows.into_iter().map(Point::new).collect::<Result<_, _>>()?;
    let radius = if a.embedding.is_none() && !a.normalized {
        gaussian_radius(dim, a.fp_target)?
    } else {
        let probe = CentroidState::with_working_set(points.clone(), 1.0)?;
        radius_from_quantile(&points, &probe.center, a.fp_target)?
    };
    let mut state = CentroidState::with_working_set(points, radius)?;
    let ctx = AttackContext::from_direction(Point::new(unit_vector(&mut rng, dim))?, state.center.clone())?;
    let gcfg = GreedyConfig {
        prune: !a.no_prune,
        immune_safeguard: !a.no_safeguard,
        check_representer: a.representer,
        ..GreedyConfig::default()
    };
    let mut gs = GreedyAttackState::new();
    let mut stalled = None;
    for _ in 0..a.iters {
        let r = if a.normalized {
            greedy_step_normalized(&mut state, &ctx, &mut gs, &gcfg)
        } else {
            greedy_step(&mut state, &ctx, &mut gs, &gcfg)
        };
        if let Err(e) = r {
            stalled = Some(e);
            break;
        }
    }
    finish(gs.write_trace_csv(sink(a.out.as_ref())?)?, a.out.as_deref())?;
    if let Some(e) = stalled {
        return Err(CliError::Runtime(format!("stopped after {} iterations: {e}", gs.iterations())));
    }
    if a.out.is_some() {
        let last = gs.trace.last().map(|t| t.displacement).unwrap_or(0.0);
        println!("iterations={} final_displacement={} radius={}", gs.iterations(), fmt_f64(last), fmt_f64(radius));
    }
    Ok(())
}
