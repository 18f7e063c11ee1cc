use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use teamstab_core::ingest::{
    build_cohort, parse_scores, parse_team_list, write_course_order, write_scores, write_team_list,
    Activity, Cohort, ParseOptions,
};
use teamstab_core::network::{cooperation_counts, write_edge_list};
use teamstab_core::stability::{
    audit_report, final_results, read_final_results, write_final_results, DampingConfig, Precision,
    StabilityMetrics,
};
use teamstab_core::stats::{ols_fit, Column, RegressionInput};
use teamstab_core::synth::{
    generate_cohort, generate_scores, noise_sd_for_r_squared, PolicyKind, ScoreModel, TeamingPolicy,
};

use crate::{
    ComputeArgs, CourseArgs, Format, IngestArgs, Policy, RegressArgs, ReportArgs, SimulateArgs,
};

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn damping(delta: Option<f64>) -> Result<DampingConfig> {
    Ok(match delta {
        Some(d) => DampingConfig::new(d)?,
        None => DampingConfig::default(),
    })
}

fn load_cohort(path: &Path) -> Result<Cohort> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Cohort::from_json(&text).with_context(|| format!("invalid cohort file {}", path.display()))
}

fn course_order(args: &CourseArgs) -> Result<Vec<String>> {
    let courses: Vec<String> = match &args.courses_file {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => args.courses.iter().map(|c| c.trim().to_string()).collect(),
    };
    if courses.is_empty() {
        bail!("course order is empty");
    }
    Ok(courses)
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let activities = Activity::sequence(&course_order(&args.courses)?)?;
    let opts = ParseOptions {
        delimiter: args.delimiter,
    };
    let list = parse_team_list(open(&args.teams)?, &activities, &opts)
        .with_context(|| format!("in {}", args.teams.display()))?;
    let scores = parse_scores(open(&args.scores)?, &opts)
        .with_context(|| format!("in {}", args.scores.display()))?;
    for d in &list.diagnostics {
        eprintln!("{}: {d}", args.teams.display());
    }
    let out = build_cohort(list.teams, scores, activities)?;
    for d in &out.diagnostics {
        eprintln!("{d}");
    }
    let mut w = sink(args.output.as_deref())?;
    writeln!(w, "{}", out.cohort.to_json()?)?;
    w.flush()?;
    Ok(())
}

pub fn compute(args: ComputeArgs) -> Result<()> {
    let config = damping(args.delta)?;
    let cohort = load_cohort(&args.cohort)?;
    let rows = final_results(&cohort, &config);
    let mut w = sink(args.output.as_deref())?;
    match args.format {
        Format::Csv => {
            let precision = if args.full_precision {
                Precision::Full
            } else {
                Precision::Fixed(args.precision)
            };
            write_final_results(&mut w, &rows, precision, args.delimiter)?;
        }
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?,
        Format::Table => bail!("compute writes csv or json"),
    }
    w.flush()?;
    Ok(())
}

/// Feature names in file column order, and each student's values.
type FeatureTable = (Vec<String>, HashMap<String, Vec<f64>>);

fn read_features(path: &Path, delimiter: u8) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header = rdr
        .headers()
        .with_context(|| format!("in {}", path.display()))?
        .clone();
    if header.get(0) != Some("StudentNo") || header.len() < 2 {
        bail!(
            "{}: header must be StudentNo followed by feature names",
            path.display()
        );
    }
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("in {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| {
                format!("{}: line {line}: non-numeric feature value", path.display())
            })?;
        if rows.insert(rec[0].to_string(), values).is_some() {
            bail!(
                "{}: line {line}: duplicate StudentNo {}",
                path.display(),
                &rec[0]
            );
        }
    }
    Ok((names, rows))
}

pub fn regress(args: RegressArgs) -> Result<()> {
    let rows = read_final_results(open(&args.final_results)?, args.delimiter)
        .with_context(|| format!("in {}", args.final_results.display()))?;
    let scored: Vec<_> = rows.iter().filter(|r| r.mean_score.is_some()).collect();
    if scored.len() < rows.len() {
        eprintln!(
            "warning: {} students without a mean score left out",
            rows.len() - scored.len()
        );
    }
    let y: Vec<f64> = scored.iter().filter_map(|r| r.mean_score).collect();
    let mut columns = vec![Column::new("S", scored.iter().map(|r| r.s).collect())];
    for path in &args.features {
        let (names, table) = read_features(path, args.delimiter)?;
        let mut values = vec![Vec::with_capacity(scored.len()); names.len()];
        for r in &scored {
            let row = table
                .get(r.student.as_str())
                .with_context(|| format!("{}: no row for student {}", path.display(), r.student))?;
            for (col, v) in values.iter_mut().zip(row) {
                col.push(*v);
            }
        }
        columns.extend(
            names
                .into_iter()
                .zip(values)
                .map(|(n, v)| Column::new(n, v)),
        );
    }
    let mut input = RegressionInput::new(y, columns);
    if args.no_intercept {
        input = input.without_intercept();
    }
    let fit = ols_fit(&input)?;
    let mut w = sink(args.output.as_deref())?;
    match args.format {
        Format::Table => write!(w, "{}", fit.to_table())?,
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&fit)?)?,
        Format::Csv => fit.write_csv(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

struct Replicate {
    policy_seed: u64,
    mean: f64,
    min: f64,
    max: f64,
    clamped: usize,
    noise_sd: f64,
    fit: Option<(f64, f64, f64)>,
}

fn write_cohort_files(dir: &Path, cohort: &Cohort) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let file = |name: &str| -> Result<BufWriter<File>> {
        let p: PathBuf = dir.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| {
            format!("cannot create {}", p.display())
        })?))
    };
    write_team_list(file("teams.csv")?, cohort, b',')?;
    write_scores(file("scores.csv")?, cohort, b',')?;
    let mut courses = file("courses.txt")?;
    write_course_order(&mut courses, cohort)?;
    courses.flush()?;
    let mut json = file("cohort.json")?;
    writeln!(json, "{}", cohort.to_json()?)?;
    json.flush()?;
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let config = damping(args.delta)?;
    let kind = match args.policy {
        Policy::FullyStable => PolicyKind::FullyStable,
        Policy::Random => PolicyKind::RandomEachActivity,
        Policy::Churn => PolicyKind::Churn {
            rate: args.churn_rate,
        },
    };
    let (min, max) = match args.team_size {
        Some(k) => (k, k),
        None => (args.min_team_size, args.max_team_size),
    };
    if args.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    if let Some(r2) = args.target_r2 {
        if !(r2 > 0.0 && r2 < 1.0) {
            bail!("--target-r2 must lie in (0, 1), got {r2}");
        }
    }

    let mut master = ChaCha8Rng::seed_from_u64(args.seed);
    let mut summary = Vec::with_capacity(args.replicates);
    for r in 0..args.replicates {
        let (policy_seed, score_seed): (u64, u64) = (master.random(), master.random());
        let policy = TeamingPolicy::new(kind, policy_seed)
            .with_size(args.students, args.activities)
            .with_team_size(min, max);
        let cohort = generate_cohort(&policy)?;
        let s = StabilityMetrics::from_cohort(&cohort, &config).stability;
        let noise_sd = match args.target_r2 {
            Some(r2) => {
                noise_sd_for_r_squared(args.coeff, sample_variance(&s), args.activities, r2)
            }
            None => args.noise_sd,
        };
        let model = ScoreModel {
            base: args.base,
            stability_coeff: args.coeff,
            noise_sd,
            seed: score_seed,
        };
        let scores = generate_scores(&cohort, &model, &s)?;
        let cohort = cohort.with_scores(scores.records)?;
        if r == 0 {
            if let Some(dir) = &args.output_dir {
                write_cohort_files(dir, &cohort)?;
            }
        }
        let fit = if args.fit {
            let y: Vec<f64> = cohort.mean_scores().into_values().collect();
            // a policy that gives every student the same S has nothing to fit
            match ols_fit(&RegressionInput::simple(y, s.clone())) {
                Ok(fit) => Some((fit.coefficients["S"], fit.p_values["S"], fit.r_squared)),
                Err(e) => {
                    eprintln!("warning: replicate {}: no fit: {e}", r + 1);
                    None
                }
            }
        } else {
            None
        };
        summary.push(Replicate {
            policy_seed,
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s.iter().copied().fold(f64::INFINITY, f64::min),
            max: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            clamped: scores.clamped,
            noise_sd,
            fit,
        });
    }
    print_summary(&summary, args.format)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn print_summary(summary: &[Replicate], format: Format) -> Result<()> {
    let mut w = sink(None)?;
    match format {
        Format::Json => {
            let rows: Vec<_> = summary
                .iter()
                .map(|r| {
                    let mut v = json!({
                        "policy_seed": r.policy_seed,
                        "mean_S": r.mean,
                        "min_S": r.min,
                        "max_S": r.max,
                        "clamped": r.clamped,
                        "noise_sd": r.noise_sd,
                    });
                    if let Some((slope, p, r2)) = r.fit {
                        v["slope"] = json!(slope);
                        v["p"] = json!(p);
                        v["r_squared"] = json!(r2);
                    }
                    v
                })
                .collect();
            writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            let fit = summary.iter().any(|r| r.fit.is_some());
            let mut header = vec![
                "replicate",
                "policy_seed",
                "mean_S",
                "min_S",
                "max_S",
                "clamped",
                "noise_sd",
            ];
            if fit {
                header.extend(["slope", "p", "r_squared"]);
            }
            csv.write_record(&header)?;
            for (k, r) in summary.iter().enumerate() {
                let mut rec = vec![
                    (k + 1).to_string(),
                    r.policy_seed.to_string(),
                    r.mean.to_string(),
                    r.min.to_string(),
                    r.max.to_string(),
                    r.clamped.to_string(),
                    r.noise_sd.to_string(),
                ];
                match r.fit {
                    Some((slope, p, r2)) => {
                        rec.extend([slope.to_string(), p.to_string(), r2.to_string()])
                    }
                    None if fit => rec.extend([String::new(), String::new(), String::new()]),
                    None => {}
                }
                csv.write_record(&rec)?;
            }
            csv.flush()?;
        }
        Format::Table => {
            for (k, r) in summary.iter().enumerate() {
                write!(
                    w,
                    "replicate {}: mean S {:.3}, min S {:.3}, max S {:.3}, clamped {}",
                    k + 1,
                    r.mean,
                    r.min,
                    r.max,
                    r.clamped
                )?;
                if let Some((slope, p, r2)) = r.fit {
                    write!(w, ", slope {slope:.3}, Sig {p:.3}, R² {r2:.3}")?;
                }
                writeln!(w)?;
            }
            if summary.len() > 1 {
                let n = summary.len() as f64;
                let mean = summary.iter().map(|r| r.mean).sum::<f64>() / n;
                write!(w, "overall: mean S {mean:.3}")?;
                if summary.iter().any(|r| r.fit.is_some()) {
                    let hits = summary
                        .iter()
                        .filter(|r| r.fit.is_some_and(|(slope, p, _)| slope > 0.0 && p < 0.05))
                        .count();
                    write!(w, ", positive and significant {hits}/{}", summary.len())?;
                }
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let config = damping(args.delta)?;
    let cohort = load_cohort(&args.cohort)?;
    if let Some(path) = &args.edges {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        write_edge_list(
            BufWriter::new(file),
            &cooperation_counts(&cohort),
            args.delimiter,
        )?;
    }
    let report = audit_report(&cohort, &config);
    let mut w = sink(args.output.as_deref())?;
    match args.format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?,
        Format::Csv => {
            let mut csv = csv::WriterBuilder::new()
                .delimiter(args.delimiter)
                .from_writer(&mut w);
            csv.write_record(["StudentNo", "c_i", "R", "C", "C_damped", "S", "MeanScore"])?;
            for s in &report.students {
                csv.write_record([
                    s.student.as_str(),
                    &s.participation.to_string(),
                    &s.total_relation_strength.to_string(),
                    &s.degree_centrality.to_string(),
                    &s.damped_centrality.to_string(),
                    &s.s.to_string(),
                    &s.mean_score.map(|m| m.to_string()).unwrap_or_default(),
                ])?;
            }
            csv.flush()?;
        }
        Format::Table => bail!("report writes json or csv"),
    }
    w.flush()?;
    Ok(())
}
