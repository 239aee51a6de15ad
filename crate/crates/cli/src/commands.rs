use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aida::analysis::{hidden_subspace_probability, SubspaceQuery};
use aida::bench::{
    cross_experiment, growth_factors, refinement_experiment, runtime_sweep, CrossConfig,
    ExplainMode, TimingPoint,
};
use aida::dataset::{generate, load_csv, Dataset, GeneratorSpec};
use aida::detector::{auc, fit, Aggregation, Bagging, Model, ModelParams};
use aida::explain::{
    dpp, refine, tix, Explanation, OffsetMode, RefineParams, Temperature, TixParams,
};
use aida::isolation::{AlphaMode, ScoreConfig, ScoreFn};

use crate::args::*;
use crate::Failure;

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen(a) => gen(a, cli.seed),
        Command::Fit(a) => fit_cmd(a, cli.seed),
        Command::Score(a) => score(a),
        Command::Explain(a) => explain(a, cli.seed),
        Command::Dpp(a) => dpp_cmd(a, cli.seed),
        Command::Bench(a) => bench(a, cli.seed),
        Command::Isoprob(a) => isoprob(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", path.display())))
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("cannot write {}: {e}", path.display()))
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Data(format!("CSV output: {e}"))
}

/// Header of a CSV file, for resolving column names.
fn read_header(path: &Path) -> Result<Vec<String>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(header.iter().map(str::to_string).collect())
}

fn resolve_column(header: &[String], key: &str) -> Result<usize, Failure> {
    if let Some(i) = header.iter().position(|h| h == key) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < header.len() => Ok(i),
        _ => Err(Failure::Usage(format!(
            "no column {key:?} (columns: {})",
            header.join(", ")
        ))),
    }
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    let header = read_header(&args.data)?;
    let label = match &args.label {
        Some(key) => Some(resolve_column(&header, key)?),
        None => header.iter().position(|h| h == "label"),
    };
    let nominal = args
        .nominal
        .iter()
        .map(|k| resolve_column(&header, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(load_csv(&args.data, &nominal, label)?)
}

fn model_params(a: &ModelArgs, seed: u64) -> ModelParams {
    let alpha_mode = match (a.alpha_min, a.alpha_max) {
        (Some(min), Some(max)) => AlphaMode::Uniform { min, max },
        _ => AlphaMode::Fixed(a.alpha),
    };
    ModelParams {
        n_subsamples: a.n_subsamples,
        psi_min: a.psi_min,
        psi_max: a.psi_max,
        bagging: match a.bagging {
            BaggingKind::Auto => Bagging::Auto,
            BaggingKind::On => Bagging::On,
            BaggingKind::Off => Bagging::Off,
        },
        p: a.p,
        weights: (!a.weights.is_empty()).then(|| a.weights.clone()),
        score: ScoreConfig {
            score_fn: score_fn(a.score),
            alpha_mode,
        },
        aggregation: match a.aggregation {
            AggregationKind::Average => Aggregation::Average,
            AggregationKind::Max => Aggregation::Max,
            AggregationKind::Aom => Aggregation::Aom(a.q),
        },
        standardize: a.standardize,
        seed,
    }
}

fn score_fn(k: ScoreKind) -> ScoreFn {
    match k {
        ScoreKind::Variance => ScoreFn::Variance,
        ScoreKind::Expectation => ScoreFn::Expectation,
    }
}

fn tix_params(a: &TixArgs, seed: u64) -> TixParams {
    TixParams {
        repetitions: a.repetitions,
        max_iterations: a.max_iterations,
        temperature: match a.temperature {
            Some(t) => Temperature::Fixed(t),
            None => Temperature::DeltaUniform {
                min: a.delta_min,
                max: a.delta_max,
            },
        },
        greedy: a.greedy,
        seed,
        ..Default::default()
    }
}

fn refine_params(a: &TixArgs) -> RefineParams {
    RefineParams {
        beta: a.beta,
        k_min: a.kmin,
        offset: match a.offset {
            OffsetKind::Additive => OffsetMode::Additive,
            OffsetKind::Rank => OffsetMode::Rank,
        },
    }
}

fn gen(a: &GenArgs, seed: u64) -> Result<(), Failure> {
    let spec = match a.kind {
        GenKind::Cross => GeneratorSpec::cross(a.n, a.d, seed),
        GenKind::HiddenSubspace => GeneratorSpec::hidden_subspace(a.n, a.d, seed),
        GenKind::TwoClusters => GeneratorSpec::two_clusters(a.n, seed),
    };
    let g = generate(&spec)?;
    g.data.save_csv(&a.out)?;
    let truth_path = truth_path(&a.out);
    let mut w = csv::Writer::from_writer(create(&truth_path)?);
    w.write_record(["row", "features"]).map_err(csv_failure)?;
    for t in &g.truth {
        let features: Vec<String> = t.features.iter().map(|f| f.to_string()).collect();
        w.write_record([t.row.to_string(), features.join(" ")])
            .map_err(csv_failure)?;
    }
    w.flush().map_err(io_failure(&truth_path))?;
    log::info!(
        "wrote {} rows, {} outliers to {}",
        g.data.n(),
        g.truth.len(),
        a.out.display()
    );
    Ok(())
}

/// `data.csv` -> `data.truth.csv`.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.csv")
}

fn fit_cmd(a: &FitArgs, seed: u64) -> Result<(), Failure> {
    let data = load(&a.data)?;
    let mut model = fit(&data, &model_params(&a.model, seed))?;
    if a.calibrate {
        model.calibrate(&data)?;
    }
    model.save(&a.out)?;
    log::info!(
        "fitted {} members (bagging {}) on {} rows",
        model.n_members(),
        if model.bagging { "on" } else { "off" },
        data.n()
    );
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<(), Failure> {
    let model = Model::load(&a.model)?;
    let data = load(&a.data)?;
    let sv = if a.calibrated {
        model.score_calibrated(&data)?
    } else {
        model.score_all(&data)?
    };
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let mut header = vec!["row".to_string()];
    header.extend((0..sv.n_members).map(|j| format!("raw_{j}")));
    header.extend((0..sv.n_members).map(|j| format!("z_{j}")));
    header.push("score".into());
    if data.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_failure)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..sv.n_rows {
        record.clear();
        record.push(i.to_string());
        record.extend(sv.raw_row(i).iter().map(|v| v.to_string()));
        record.extend(sv.normalized_row(i).iter().map(|v| v.to_string()));
        record.push(sv.scores[i].to_string());
        if let Some(l) = data.labels() {
            record.push(l[i].to_string());
        }
        w.write_record(&record).map_err(csv_failure)?;
    }
    w.flush().map_err(io_failure(&a.out))?;
    if let Some(labels) = data.labels() {
        match auc(&sv.scores, labels) {
            Ok(v) => println!("AUC {v}"),
            Err(aida::Error::SingleClass) => log::warn!("labels hold one class; no AUC"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn row_of(data: &Dataset, row: usize) -> Result<(), Failure> {
    if row >= data.n() {
        return Err(Failure::Usage(format!(
            "row {row} out of range ({} rows)",
            data.n()
        )));
    }
    Ok(())
}

fn explanation(
    model: &Model,
    data: &Dataset,
    row: usize,
    a: &TixArgs,
    seed: u64,
) -> Result<Explanation, Failure> {
    let x = data.row(row);
    let tp = tix_params(a, seed);
    Ok(if a.refine {
        refine(model, x, &tp, &refine_params(a))?
    } else {
        Explanation::from_table(tix(model, x, &tp)?)
    })
}

fn explain(a: &ExplainArgs, seed: u64) -> Result<(), Failure> {
    let model = Model::load(&a.model)?;
    let data = model.prepare(&load(&a.data)?)?;
    row_of(&data, a.row)?;
    let e = explanation(&model, &data, a.row, &a.tix, seed)?;
    write_explanation(&e, &model.feature_names, &a.out)
}

fn write_explanation(e: &Explanation, names: &[String], out: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record([
        "rank",
        "feature",
        "index",
        "score",
        "path_length",
        "stage",
        "offset",
    ])
    .map_err(csv_failure)?;
    for (rank, &f) in e.ranking.iter().enumerate() {
        let table = &e.stages[e.stage_of[f]].table;
        let pos = table.features.iter().position(|&g| g == f).unwrap_or(0);
        w.write_record([
            (rank + 1).to_string(),
            names[f].clone(),
            f.to_string(),
            e.scores[f].to_string(),
            table.aggregate[pos].to_string(),
            e.stage_of[f].to_string(),
            e.offsets[f].to_string(),
        ])
        .map_err(csv_failure)?;
    }
    w.flush().map_err(io_failure(out))
}

fn dpp_cmd(a: &DppArgs, seed: u64) -> Result<(), Failure> {
    let model = Model::load(&a.model)?;
    let data = model.prepare(&load(&a.data)?)?;
    row_of(&data, a.row)?;
    let order: Vec<usize> = if a.order.is_empty() {
        explanation(&model, &data, a.row, &a.tix, seed)?.ranking
    } else {
        a.order
            .iter()
            .map(|k| resolve_column(&model.feature_names, k))
            .collect::<Result<_, _>>()?
    };
    let m_max = a.m_max.unwrap_or(order.len());
    let member = model.subsamples.get(a.member).ok_or_else(|| {
        Failure::Usage(format!(
            "member {} out of range ({} members)",
            a.member,
            model.n_members()
        ))
    })?;
    let metric = model.metric_on((0..model.d()).collect())?;
    let summary = dpp(
        &member.data,
        data.row(a.row),
        &model.frequencies,
        &metric,
        &order,
        m_max,
    )?;
    let names = Some(model.feature_names.as_slice());
    let mut w = create(&a.out)?;
    summary.write_csv(&mut w, names)?;
    w.flush().map_err(io_failure(&a.out))?;
    if let Some(svg) = &a.svg {
        let mut w = create(svg)?;
        w.write_all(summary.to_svg(names).as_bytes())
            .and_then(|_| w.flush())
            .map_err(io_failure(svg))?;
    }
    Ok(())
}

/// Writes one bench table to `<prefix>-<name>.csv`, or to stdout.
fn emit(prefix: Option<&Path>, name: &str, rows: Vec<Vec<String>>) -> Result<(), Failure> {
    match prefix {
        Some(p) => {
            let mut file_name = p.file_name().unwrap_or_default().to_os_string();
            file_name.push(format!("-{name}.csv"));
            let path = p.with_file_name(file_name);
            let mut w = csv::Writer::from_writer(create(&path)?);
            for r in rows {
                w.write_record(r).map_err(csv_failure)?;
            }
            w.flush().map_err(io_failure(&path))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = csv::Writer::from_writer(stdout.lock());
            for r in rows {
                w.write_record(r).map_err(csv_failure)?;
            }
            w.flush()
                .map_err(|e| Failure::Internal(format!("stdout: {e}")))
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn bench(a: &BenchArgs, seed: u64) -> Result<(), Failure> {
    if !(a.cross || a.refinement || a.runtime) {
        return Err(Failure::Usage(
            "choose at least one of --cross, --refinement, --runtime".into(),
        ));
    }
    let mut model = model_params(&a.model, seed);
    let prefix = a.out.as_deref();
    if a.cross || a.refinement {
        model.bagging = Bagging::Off;
        let cfg = CrossConfig {
            n: a.n,
            executions: a.executions,
            model: model.clone(),
            tix: tix_params(&a.tix, seed),
            seed,
        };
        if a.cross {
            let modes: &[ExplainMode] = match a.mode {
                BenchMode::Sa => &[ExplainMode::Annealing],
                BenchMode::Greedy => &[ExplainMode::Greedy],
                BenchMode::Both => &[ExplainMode::Annealing, ExplainMode::Greedy],
            };
            let mut rows = vec![["d", "mode", "mean", "std", "at_two", "sizes"]
                .map(String::from)
                .to_vec()];
            for &d in &a.d {
                for &mode in modes {
                    let c = cross_experiment(&cfg, d, mode)?;
                    log::info!("cross d={d} {}: {:.1}", mode.name(), c.mean());
                    rows.push(vec![
                        d.to_string(),
                        mode.name().into(),
                        format!("{:.2}", c.mean()),
                        format!("{:.2}", c.std()),
                        c.count_equal(2).to_string(),
                        join(&c.sizes),
                    ]);
                }
            }
            emit(prefix, "cross", rows)?;
        }
        if a.refinement {
            let rp = refine_params(&a.tix);
            let mut rows = vec![[
                "d",
                "stages",
                "plain_M",
                "refined_M",
                "plain",
                "refined",
                "refined_not_worse",
            ]
            .map(String::from)
            .to_vec()];
            for &d in &a.d {
                let c = refinement_experiment(&cfg, d, &rp)?;
                rows.push(vec![
                    d.to_string(),
                    join(&c.stage_sizes),
                    c.plain_repetitions.to_string(),
                    c.refined_repetitions.to_string(),
                    join(&c.plain),
                    join(&c.refined),
                    c.refined_not_worse().to_string(),
                ]);
            }
            emit(prefix, "refinement", rows)?;
        }
    }
    if a.runtime {
        let params = ModelParams {
            bagging: Bagging::Off,
            ..model_params(&a.model, seed)
        };
        let (by_n, by_d) = runtime_sweep(
            &a.sweep_n,
            a.sweep_d,
            &a.sweep_dims,
            a.sweep_fixed_n,
            &params,
            a.repeats,
            seed,
        )?;
        let mut rows = vec![["sweep", "n", "d", "seconds", "growth"]
            .map(String::from)
            .to_vec()];
        let mut push = |name: &str, pts: &[TimingPoint]| {
            let g = growth_factors(pts);
            for (i, p) in pts.iter().enumerate() {
                rows.push(vec![
                    name.into(),
                    p.n.to_string(),
                    p.d.to_string(),
                    format!("{:.6}", p.seconds),
                    if i == 0 {
                        String::new()
                    } else {
                        format!("{:.3}", g[i - 1])
                    },
                ]);
            }
        };
        push("n", &by_n);
        push("d", &by_d);
        emit(prefix, "runtime", rows)?;
    }
    Ok(())
}

fn isoprob(a: &IsoprobArgs) -> Result<(), Failure> {
    let mut rows = vec![["d", "r", "h_max", "p", "p_scaled"].map(String::from).to_vec()];
    for &d in &a.d {
        for &r in &a.r {
            for &h in &a.h {
                if r > d {
                    log::warn!("skipping r={r} > d={d}");
                    continue;
                }
                let p = hidden_subspace_probability(&SubspaceQuery::new(d, r, h)?)?;
                let scaled = p * (d as f64).powi(r as i32);
                rows.push(vec![
                    d.to_string(),
                    r.to_string(),
                    h.to_string(),
                    p.to_string(),
                    scaled.to_string(),
                ]);
            }
        }
    }
    match &a.out {
        Some(path) => {
            let mut w = csv::Writer::from_writer(create(path)?);
            for r in rows {
                w.write_record(r).map_err(csv_failure)?;
            }
            w.flush().map_err(io_failure(path))
        }
        None => emit(None, "isoprob", rows),
    }
}
