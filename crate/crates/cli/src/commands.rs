use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use pdm_core::analysis::{
    dominance_report, embedding_report, sector_pressure, window_count, EntityLabel, LabelTable,
    Sector,
};
use pdm_core::metrics::adjusted_rand_index;
use pdm_core::panel::{
    clean_extremes, filter_missing, load_prices, log_returns, normalize_rows, PriceFormat,
    SeriesPanel,
};
use pdm_core::pdm::{
    decompose as run_decompose, generate_pdnm, partition_tree, reconstruct as run_reconstruct,
    DecompositionRecord, PdnmSpec,
};
use pdm_core::spectral::NullModel;

use crate::config::Settings;

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn write_json<T: Serialize>(settings: &Settings, path: &Path, body: &T) -> Result<()> {
    let mut value = serde_json::to_value(body)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("provenance".into(), settings.provenance());
        }
        None => {
            value = serde_json::json!({ "provenance": settings.provenance(), "value": value });
        }
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(settings: &Settings, path: &Path, body: &str) -> Result<()> {
    let mut text = String::new();
    for line in settings.header() {
        writeln!(text, "# {line}")?;
    }
    text.push_str(body);
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_panel(settings: &Settings, panel: &SeriesPanel, path: &Path) -> Result<()> {
    panel
        .write_csv(path, &settings.header())
        .with_context(|| format!("writing {}", path.display()))
}

fn read_panel(path: &Path) -> Result<SeriesPanel> {
    SeriesPanel::read_csv(path).with_context(|| format!("reading panel {}", path.display()))
}

fn read_record(path: &Path) -> Result<DecompositionRecord> {
    DecompositionRecord::load(path).with_context(|| format!("reading record {}", path.display()))
}

#[derive(Serialize)]
struct IngestSummary {
    entities: usize,
    times: usize,
    report: pdm_core::panel::CleaningReport,
    means: Vec<f64>,
    sds: Vec<f64>,
}

pub fn ingest(settings: &Settings, prices: &Path, out: &Path) -> Result<()> {
    let raw = load_prices(prices, PriceFormat::WideCsv)
        .with_context(|| format!("loading prices {}", prices.display()))?;
    let (kept, mut report) = filter_missing(&raw, settings.max_missing)?;
    let returns = log_returns(&kept)?;
    let (cleaned, excised) = clean_extremes(&returns, settings.extreme)?;
    report.merge(excised);
    let (normalized, means, sds) = normalize_rows(&cleaned)?;

    create_dir(out)?;
    write_panel(settings, &cleaned, &out.join("returns.csv"))?;
    write_panel(settings, &normalized, &out.join("panel.csv"))?;
    write_json(
        settings,
        &out.join("cleaning.json"),
        &IngestSummary {
            entities: normalized.n_entities(),
            times: normalized.n_times(),
            report: report.clone(),
            means,
            sds,
        },
    )?;
    println!(
        "ingested {} entities x {} returns; dropped {}, excised {}, filled {}",
        normalized.n_entities(),
        normalized.n_times(),
        report.dropped_entities.len(),
        report.excised_events.len(),
        report.fill_count
    );
    Ok(())
}

fn describe(record: &DecompositionRecord) -> String {
    let sizes: Vec<String> = record
        .iterations
        .iter()
        .map(|it| it.num_clusters().to_string())
        .collect();
    format!(
        "pv {}: clusters per iteration [{}], termination {:?} at iteration {}",
        record.partition_vector,
        sizes.join(", "),
        record.termination.kind,
        record.termination.iteration
    )
}

pub fn decompose(settings: &Settings, panel: &Path, out: &Path) -> Result<()> {
    let pv = settings.partition_vector()?;
    let panel = read_panel(panel)?;
    let null = NullModel::new(settings.ge());
    let record = run_decompose(&panel, &pv, &null, &settings.kmeans())?;
    create_dir(out)?;
    write_json(settings, &out.join("record.json"), &record)?;
    println!("{}", describe(&record));
    Ok(())
}

pub fn reconstruct(settings: &Settings, record: &Path, out: &Path) -> Result<()> {
    let record = read_record(record)?;
    let panel = run_reconstruct(&record)?;
    create_dir(out)?;
    write_panel(settings, &panel, &out.join("reconstructed.csv"))?;
    println!(
        "reconstructed {} x {} panel",
        panel.n_entities(),
        panel.n_times()
    );
    Ok(())
}

#[derive(Serialize)]
struct IterationRecovery {
    alpha: usize,
    planted_clusters: usize,
    recovered_clusters: Option<usize>,
    ari: Option<f64>,
}

#[derive(Serialize)]
struct Recovery {
    partition_vector: String,
    iterations: Vec<IterationRecovery>,
    termination: pdm_core::pdm::Termination,
}

pub fn pdnm(settings: &Settings, record: &Path, out: &Path, recover: bool) -> Result<()> {
    let record = read_record(record)?;
    let synthetic = generate_pdnm(&PdnmSpec {
        record: record.clone(),
        noise_seed: settings.noise_seed,
    })?;
    create_dir(out)?;
    write_panel(settings, &synthetic, &out.join("synthetic.csv"))?;
    println!(
        "synthesized {} x {} panel (noise seed {})",
        synthetic.n_entities(),
        synthetic.n_times(),
        settings.noise_seed
    );
    if !recover {
        return Ok(());
    }
    let null = NullModel::new(record.ge);
    let again = run_decompose(&synthetic, &record.partition_vector, &null, &record.kmeans)?;
    let iterations: Vec<IterationRecovery> = record
        .iterations
        .iter()
        .map(|planted| {
            let found = again.iterations.get(planted.alpha);
            IterationRecovery {
                alpha: planted.alpha,
                planted_clusters: planted.num_clusters(),
                recovered_clusters: found.map(|f| f.num_clusters()),
                ari: found.map(|f| adjusted_rand_index(planted.partition(), f.partition())),
            }
        })
        .collect();
    for it in &iterations {
        match it.ari {
            Some(ari) => println!(
                "iteration {}: planted {} clusters, recovered {}, ARI {ari:.6}",
                it.alpha,
                it.planted_clusters,
                it.recovered_clusters.unwrap_or(0)
            ),
            None => println!(
                "iteration {}: planted {} clusters, not recovered",
                it.alpha, it.planted_clusters
            ),
        }
    }
    write_json(
        settings,
        &out.join("recovery.json"),
        &Recovery {
            partition_vector: record.partition_vector.to_string(),
            iterations,
            termination: again.termination,
        },
    )
}

pub struct ReportInputs {
    pub record: PathBuf,
    pub labels: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub iteration: Option<usize>,
}

#[derive(Serialize)]
struct IterationSummary {
    alpha: usize,
    level: Option<usize>,
    clusters: usize,
    sizes: Vec<usize>,
    condition_estimate: f64,
}

#[derive(Serialize)]
struct ReportSummary {
    partition_vector: String,
    termination: pdm_core::pdm::Termination,
    parameters_per_entity: usize,
    iterations: Vec<IterationSummary>,
    report_iteration: usize,
    dominated_clusters: usize,
    embedding_eigenvalues: Vec<f64>,
    edges: usize,
    pressure_windows: usize,
    pressure_normalization: Option<String>,
    warnings: Vec<String>,
}

fn fmt_sector(s: Option<Sector>) -> String {
    s.map(|s| s.code().to_string()).unwrap_or_default()
}

pub fn report(settings: &Settings, inputs: &ReportInputs, out: &Path) -> Result<()> {
    let record = read_record(&inputs.record)?;
    let labels: Vec<EntityLabel> = match &inputs.labels {
        Some(path) => LabelTable::load(path)
            .with_context(|| format!("reading labels {}", path.display()))?
            .for_entities(&record.entities),
        None => vec![EntityLabel::default(); record.entities.len()],
    };
    let alpha = match inputs.iteration {
        Some(a) if a < record.iterations.len() => a,
        Some(a) => bail!(
            "iteration {a} not in record (it has {} iterations)",
            record.iterations.len()
        ),
        None => record.iterations.len().saturating_sub(1),
    };
    let Some(chosen) = record.iterations.get(alpha) else {
        bail!("record has no successful iteration to report on");
    };
    let mut warnings = Vec::new();
    create_dir(out)?;

    let dominance = dominance_report(chosen.partition(), &labels);
    let mut csv = String::from("cluster,size,dominant,nasdaq_fraction");
    for s in Sector::ALL {
        write!(csv, ",{}", s.code())?;
    }
    csv.push('\n');
    for c in &dominance {
        write!(
            csv,
            "{},{},{},{:?}",
            c.cluster,
            c.size,
            fmt_sector(c.dominant),
            c.nasdaq_fraction()
        )?;
        for s in Sector::ALL {
            write!(
                csv,
                ",{:?}",
                c.sector_fractions.get(&s).copied().unwrap_or(0.0)
            )?;
        }
        csv.push('\n');
    }
    write_text(settings, &out.join("dominance.csv"), &csv)?;

    let embedding = embedding_report(&chosen.characteristic, &labels, settings.edge_fraction)?;
    let mut csv = String::from("cluster,x,y,size,dominant\n");
    for k in 0..embedding.sizes.len() {
        writeln!(
            csv,
            "{k},{:?},{:?},{},{}",
            embedding.embedding.coords[(k, 0)],
            embedding.embedding.coords[(k, 1)],
            embedding.sizes[k],
            fmt_sector(embedding.dominant[k])
        )?;
    }
    write_text(settings, &out.join("embedding.csv"), &csv)?;
    let mut csv = String::from("a,b,distance\n");
    for e in &embedding.edges {
        writeln!(csv, "{},{},{:?}", e.a, e.b, e.distance)?;
    }
    write_text(settings, &out.join("edges.csv"), &csv)?;

    let panel = match &inputs.panel {
        Some(p) => read_panel(p)?,
        None => run_reconstruct(&record)?,
    };
    if panel.entities != record.entities {
        bail!("pressure panel entities do not match the record");
    }
    let mut csv = String::from("window,start,end,sector,members,raw,normalized\n");
    let mut pressure_windows = 0;
    let mut pressure_normalization = None;
    if window_count(panel.n_times(), settings.window, settings.step) == 0 {
        warnings.push(format!(
            "panel has {} observations, fewer than the {}-observation window; no pressure series",
            panel.n_times(),
            settings.window
        ));
    } else {
        let pressure = sector_pressure(&panel, &labels, settings.window, settings.step)?;
        pressure_windows = pressure.windows.len();
        pressure_normalization = Some(pressure.normalization.clone());
        warnings.extend(pressure.warnings.iter().cloned());
        for (sector, series) in &pressure.sectors {
            for (w, (start, end)) in pressure.windows.iter().enumerate() {
                writeln!(
                    csv,
                    "{w},{start},{end},{},{},{:?},{:?}",
                    sector.code(),
                    series.members,
                    series.raw[w],
                    series.normalized[w]
                )?;
            }
        }
    }
    write_text(settings, &out.join("pressure.csv"), &csv)?;

    let summary = ReportSummary {
        partition_vector: record.partition_vector.to_string(),
        termination: record.termination.clone(),
        parameters_per_entity: record.parameters_per_entity(),
        iterations: record
            .iterations
            .iter()
            .map(|it| IterationSummary {
                alpha: it.alpha,
                level: it.level,
                clusters: it.num_clusters(),
                sizes: it.partition().sizes(),
                condition_estimate: it.condition_estimate,
            })
            .collect(),
        report_iteration: alpha,
        dominated_clusters: dominance.iter().filter(|c| c.dominant.is_some()).count(),
        embedding_eigenvalues: embedding.embedding.eigenvalues.clone(),
        edges: embedding.edges.len(),
        pressure_windows,
        pressure_normalization,
        warnings,
    };
    write_json(settings, &out.join("summary.json"), &summary)?;
    println!(
        "report on iteration {alpha}: {} clusters, {} dominated, {} edges, {} pressure windows",
        dominance.len(),
        summary.dominated_clusters,
        summary.edges,
        pressure_windows
    );
    Ok(())
}

pub fn tree(settings: &Settings, panel: &Path, out: &Path) -> Result<()> {
    let panel = read_panel(panel)?;
    let null = NullModel::new(settings.ge());
    let root = partition_tree(&panel, settings.depth, &null, &settings.kmeans())?;
    create_dir(out)?;
    write_json(settings, &out.join("tree.json"), &root)?;
    let leaves = root.leaves();
    println!("{} partition vectors at the leaves", leaves.len());
    for leaf in leaves {
        let status = match &leaf.termination {
            Some(t) => format!("{:?}", t.kind),
            None => "ok".into(),
        };
        println!(
            "{} clusters={} {status}",
            leaf.partition_vector,
            leaf.clusters
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}
