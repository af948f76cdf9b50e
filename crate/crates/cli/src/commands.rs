use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use itemrank::derivability::mine_andi;
use itemrank::experiment::{run_experiment, ExperimentConfig, Measure, DESK_ATTRS, DESK_ROWS, FULL_ATTRS, FULL_ROWS};
use itemrank::rank::rank_normalized;
use itemrank::synth::{GenConfig, Generator};
use itemrank::table::{Table, Value};
use itemrank::{parse_dense, parse_fimi, Dataset, Itemset, ItemsetFamily, MaxentError, ModelKind, RankError, SolverConfig};

use crate::{ExperimentArgs, InputArgs, InputFormat, MineArgs, OutFormat, OutputArgs, RankArgs, SolverArgs, SynthArgs};

/// Largest dataset width for which `--all-itemsets` enumerates subsets.
const MAX_ENUM_ATTRS: usize = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0} cell(s) did not converge")]
    NotConverged(usize),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Usage(_) => 4,
            CliError::Compute(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::NotConverged(_) => "not-converged",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Compute(_) => "compute",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn load_dataset(path: &Path, format: Option<InputFormat>) -> Result<Dataset, CliError> {
    let text = read(path)?;
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "dense") {
        InputFormat::Dense
    } else {
        InputFormat::Fimi
    });
    let parsed = match format {
        InputFormat::Fimi => parse_fimi(&text),
        InputFormat::Dense => parse_dense(&text),
    };
    parsed.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn cap(d: Dataset, max_rows: Option<usize>, max_cols: Option<usize>) -> Result<Dataset, CliError> {
    let mut d = d;
    if let Some(r) = max_rows {
        if r == 0 {
            return Err(CliError::Usage("--max-rows must be positive".into()));
        }
        d = d.truncate_rows(r);
    }
    if let Some(c) = max_cols {
        d = d.top_columns(c);
    }
    Ok(d)
}

fn load(a: &InputArgs) -> Result<Dataset, CliError> {
    cap(load_dataset(&a.input, a.format)?, a.max_rows, a.max_cols)
}

fn solver(a: &SolverArgs) -> Result<SolverConfig, CliError> {
    if !(a.tol > 0.0 && a.tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", a.tol)));
    }
    if a.max_sweeps == 0 {
        return Err(CliError::Usage("--max-sweeps must be positive".into()));
    }
    Ok(SolverConfig {
        tol: a.tol,
        max_sweeps: a.max_sweeps,
    })
}

fn render(t: &Table, f: OutFormat) -> String {
    match f {
        OutFormat::Csv => t.to_csv(),
        OutFormat::Json => t.to_json(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn emit_table(t: &Table, out: &OutputArgs) -> Result<(), CliError> {
    emit(&render(t, out.out_format), out.out.as_deref())
}

/// Parses an inline itemset of raw item IDs separated by spaces or commas.
fn parse_itemset(s: &str, d: &Dataset) -> Result<Itemset, CliError> {
    let index = d.id_index();
    let mut attrs = Vec::new();
    for tok in s.split([' ', ',', '\t']).filter(|t| !t.is_empty()) {
        let id: u64 = tok
            .parse()
            .map_err(|_| CliError::Parse(format!("itemset {s:?}: invalid item id {tok:?}")))?;
        let a = index
            .get(&id)
            .ok_or_else(|| CliError::Parse(format!("itemset {s:?}: unknown item id {id}")))?;
        attrs.push(*a);
    }
    if attrs.is_empty() {
        return Err(CliError::Parse(format!("itemset {s:?} is empty")));
    }
    Ok(Itemset::new(attrs))
}

fn all_itemsets(d: &Dataset, max_size: usize) -> Result<Vec<Itemset>, CliError> {
    if d.n_attrs() > MAX_ENUM_ATTRS {
        return Err(CliError::Usage(format!(
            "--all-itemsets needs at most {MAX_ENUM_ATTRS} attributes, dataset has {}",
            d.n_attrs()
        )));
    }
    let family: ItemsetFamily = (1u64..1 << d.n_attrs())
        .map(Itemset::from_mask)
        .filter(|x| x.len() <= max_size)
        .collect();
    Ok(family.iter().cloned().collect())
}

fn is_nonconvergence(e: &RankError) -> bool {
    matches!(e, RankError::Maxent(MaxentError::NotConverged { .. }))
}

pub fn rank(a: RankArgs) -> Result<(), CliError> {
    let models = a
        .model
        .iter()
        .map(|m| m.trim().parse::<ModelKind>().map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = solver(&a.solver)?;
    let d = load(&a.input)?;

    let mut queries = Vec::new();
    for s in &a.itemset {
        queries.push(parse_itemset(s, &d)?);
    }
    if let Some(p) = &a.queries {
        let fam = ItemsetFamily::parse(&read(p)?, &d).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
        if fam.iter().any(Itemset::is_empty) {
            return Err(CliError::Parse(format!("{}: empty query itemset", p.display())));
        }
        queries.extend(fam.iter().cloned());
    }
    if a.all_itemsets {
        queries.extend(all_itemsets(&d, a.max_size)?);
    }

    let jobs: Vec<(&Itemset, ModelKind)> = queries.iter().flat_map(|g| models.iter().map(move |&m| (g, m))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(g, m)| rank_normalized(g, m, &d, &cfg)).collect();

    let mut t = Table::new("rank", ["itemset", "size", "frequency", "model", "raw_nats", "dof", "normalized"]);
    let mut nonconverged = 0;
    let mut first_failure = None;
    for (&(g, m), res) in jobs.iter().zip(results) {
        let mut row: Vec<Value> = vec![d.render(g).into(), g.len().into(), d.frequency(g).into(), m.name().into()];
        match res {
            Ok(r) => row.extend([r.raw.into(), r.dof.into(), r.normalized.into()]),
            Err(e) => {
                let marker = Value::Marker(format!("error: {e}"));
                row.extend([marker.clone(), marker.clone(), marker]);
                if is_nonconvergence(&e) {
                    nonconverged += 1;
                } else if first_failure.is_none() {
                    first_failure = Some(format!("{} under {}: {e}", d.render(g), m.name()));
                }
            }
        }
        t.push(row);
    }
    emit_table(&t, &a.output)?;
    if nonconverged > 0 {
        return Err(CliError::NotConverged(nonconverged));
    }
    first_failure.map_or(Ok(()), |msg| Err(CliError::Compute(msg)))
}

pub fn mine(a: MineArgs) -> Result<(), CliError> {
    let d = load(&a.input)?;
    let family = mine_andi(&d, a.n, a.max_size);
    match a.output.out_format {
        OutFormat::Csv => emit(&family.to_text(&d), a.output.out.as_deref()),
        OutFormat::Json => {
            let mut t = Table::new("family", ["itemset", "size", "frequency"]);
            for x in family.iter() {
                t.push(vec![d.render(x).into(), x.len().into(), family.frequency(x).into()]);
            }
            emit_table(&t, &a.output)
        }
    }
}

fn generator(name: &str) -> Result<Generator, CliError> {
    name.parse().map_err(CliError::Usage)
}

fn gen_config(attrs: usize, rows: usize, seed: u64) -> Result<GenConfig, CliError> {
    if attrs == 0 || rows == 0 {
        return Err(CliError::Usage("--attrs and --rows must be positive".into()));
    }
    Ok(GenConfig::new(attrs, rows, seed))
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let g = generator(&a.gen.generator)?;
    let cfg = gen_config(a.gen.attrs.unwrap_or(DESK_ATTRS), a.gen.rows.unwrap_or(DESK_ROWS), a.gen.seed)?;
    let d = g.generate(&cfg);
    let text = match a.format {
        InputFormat::Dense => d.to_dense(),
        InputFormat::Fimi => d.to_fimi(),
    };
    emit(&text, a.out.as_deref())
}

pub fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let solver = solver(&a.solver)?;
    let measures = if a.measures.is_empty() {
        Measure::ALL.to_vec()
    } else {
        a.measures
            .iter()
            .map(|m| m.trim().parse::<Measure>().map_err(CliError::Usage))
            .collect::<Result<Vec<_>, _>>()?
    };
    let (d, default_n) = match &a.input {
        Some(p) => (cap(load_dataset(p, a.format)?, a.max_rows, a.max_cols)?, 5),
        None => {
            let g = generator(a.generator.as_deref().unwrap_or("ind"))?;
            let (k, m) = if a.full_scale { (FULL_ATTRS, FULL_ROWS) } else { (DESK_ATTRS, DESK_ROWS) };
            let cfg = gen_config(a.attrs.unwrap_or(k), a.rows.unwrap_or(m), a.seed.unwrap_or(0))?;
            let n = if g == Generator::Copy { 100 } else { 5 };
            (cap(g.generate(&cfg), a.max_rows, a.max_cols)?, n)
        }
    };
    let cfg = ExperimentConfig {
        n: a.n.unwrap_or(default_n),
        max_size: a.max_size,
        alpha: a.alpha,
        solver,
        measures,
    };
    let report = run_experiment(&d, &cfg);
    let tables = report.tables(&d);
    let ext = match a.output.out_format {
        OutFormat::Csv => "csv",
        OutFormat::Json => "json",
    };
    match &a.output.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            for t in &tables {
                let p = dir.join(format!("{}.{ext}", t.name));
                fs::write(&p, render(t, a.output.out_format)).map_err(io_err(&p))?;
            }
        }
        None => {
            let mut text = String::new();
            for (i, t) in tables.iter().enumerate() {
                if a.output.out_format == OutFormat::Csv {
                    if i > 0 {
                        text.push('\n');
                    }
                    text.push_str(&format!("# {}\n", t.name));
                }
                text.push_str(&render(t, a.output.out_format));
            }
            emit(&text, None)?;
        }
    }
    if report.matrix.nonconverged > 0 {
        return Err(CliError::NotConverged(report.matrix.nonconverged));
    }
    Ok(())
}
