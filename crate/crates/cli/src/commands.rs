use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mvdis::config::TrainConfig;
use mvdis::data::{
    apply_missing, generate_synthetic, load_viewset, read_labels_csv, read_matrix_csv, save_viewset,
    write_matrix_csv, MissingSpec, SyntheticSpec, ViewSet,
};
use mvdis::experiment::{
    code_version, inclusive_range, prepare, resolve_k, run, run_cells, score, ResultRecord, RunManifest,
    SweepCell, SweepGrid,
};
use mvdis::networks::{load_checkpoint, save_checkpoint};
use mvdis::projection::pca_2d;
use mvdis::trainer::{embed, EpochRecord};

use crate::error::{io, CliError};
use crate::{Common, OUT_DIR_ENV};

fn out_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("mvdis-runs"), PathBuf::from)
}

fn out_dir(given: Option<PathBuf>, default_name: &str) -> PathBuf {
    given.unwrap_or_else(|| out_root().join(default_name))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn load_config(common: &Common) -> Result<TrainConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            TrainConfig::from_toml_str(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut TrainConfig, k: Option<usize>, missing_ratio: Option<f64>) -> Result<(), CliError> {
    if k.is_some() {
        cfg.k = k;
    }
    if let Some(r) = missing_ratio {
        cfg.missing_ratio = r;
    }
    cfg.validate()?;
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn progress_printer(total: usize) -> impl FnMut(&EpochRecord) {
    move |r: &EpochRecord| {
        if r.epoch == 1 || r.epoch % 50 == 0 || r.epoch == total {
            eprintln!("epoch {}/{total}  J {:.6}", r.epoch, r.losses.total);
        }
    }
}

struct TrainedRun {
    record: ResultRecord,
    manifest: RunManifest,
}

/// Trains one configuration and writes its run directory.
fn train_into(data: &ViewSet, cfg: &TrainConfig, dir: &Path, verbose: bool) -> Result<TrainedRun, CliError> {
    create_dir(dir)?;
    let started = Instant::now();
    let log_path = dir.join("train_log.jsonl");
    let mut log = std::io::BufWriter::new(fs::File::create(&log_path).map_err(|e| io(&log_path, e))?);
    let mut log_err = None;
    let mut printer = progress_printer(cfg.epochs);
    let out = run(data, cfg, |r| {
        if verbose {
            printer(r);
        }
        let line = serde_json::to_string(r).expect("serializable");
        if let Err(e) = writeln!(log, "{line}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(io(&log_path, e));
    }
    log.flush().map_err(|e| io(&log_path, e))?;

    let ckpt = dir.join("checkpoint.bin");
    save_checkpoint(&ckpt, &out.fit.params, cfg)?;
    write_matrix_csv(&dir.join("embeddings.csv"), &out.fit.embeddings.q, "q")?;
    write_file(&dir.join("result.json"), &json(&out.record))?;
    let outputs: BTreeMap<String, String> = [
        ("checkpoint", "checkpoint.bin"),
        ("training_log", "train_log.jsonl"),
        ("embeddings", "embeddings.csv"),
        ("result", "result.json"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let manifest = RunManifest {
        config: cfg.clone(),
        dataset: data.name.clone(),
        dataset_hash: data.content_hash(),
        code_version: code_version(),
        outputs,
        duration_secs: started.elapsed().as_secs_f64(),
        metrics: out.record.clone(),
    };
    write_file(&dir.join("manifest.json"), &json(&manifest))?;
    Ok(TrainedRun {
        record: out.record,
        manifest,
    })
}

pub fn train(dataset: &Path, common: &Common, k: Option<usize>, missing_ratio: Option<f64>) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    apply_overrides(&mut cfg, k, missing_ratio)?;
    let data = load_viewset(dataset)?;
    let dir = out_dir(common.out.clone(), &format!("train-{}", data.name));
    let trained = train_into(&data, &cfg, &dir, true)?;
    println!("{}", serde_json::to_string(&trained.record).expect("serializable"));
    eprintln!(
        "wrote {} in {:.1}s",
        dir.display(),
        trained.manifest.duration_secs
    );
    Ok(())
}

pub fn eval(
    dataset: &Path,
    embeddings: Option<&Path>,
    checkpoint: Option<&Path>,
    common: &Common,
    k: Option<usize>,
) -> Result<(), CliError> {
    let data = load_viewset(dataset)?;
    let labels = data
        .labels()
        .ok_or_else(|| CliError::Input(format!("{} has no labels.csv", dataset.display())))?
        .to_vec();
    let (q, mut cfg) = match (embeddings, checkpoint) {
        (Some(path), _) => (read_matrix_csv(path)?, load_config(common)?),
        (None, Some(path)) => {
            let (params, saved) = load_checkpoint(path)?;
            let mut cfg = if common.config.is_some() { load_config(common)? } else { saved };
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let prepared = prepare(&data, &cfg)?;
            (embed(&params, &prepared)?.q, cfg)
        }
        (None, None) => return Err(CliError::Config("give --embeddings or --checkpoint".into())),
    };
    if q.rows() != labels.len() {
        return Err(CliError::Input(format!(
            "embeddings have {} rows but the dataset has {} samples",
            q.rows(),
            labels.len()
        )));
    }
    if k.is_some() {
        cfg.k = k;
    }
    let k = resolve_k(&data, &cfg)?;
    let classes = data.num_clusters().unwrap_or(0);
    if k != classes {
        eprintln!(
            "{}",
            serde_json::json!({ "warning": format!("k = {k} but the labels have {classes} classes") })
        );
    }
    let result = score(&q, &labels, k, &cfg)?;
    let record = ResultRecord::new(&data.name, &cfg, k, &result);
    println!("{}", serde_json::to_string(&record).expect("serializable"));
    Ok(())
}

pub struct GridArgs {
    pub alphas: Option<String>,
    pub betas: Option<String>,
    pub dims: Option<String>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("--{flag}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_reals(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let v: Vec<f64> = parse_list(flag, &format!("{start},{end},{step}"))?;
            Ok(inclusive_range(v[0], v[1], v[2]))
        }
        [_] => parse_list(flag, text),
        _ => Err(CliError::Config(format!("--{flag}: expected a list or start:end:step"))),
    }
}

impl GridArgs {
    fn grid(&self, base: &TrainConfig) -> Result<SweepGrid, CliError> {
        let grid = match (&self.dims, &self.alphas, &self.betas) {
            (Some(d), _, _) => SweepGrid::Dims(parse_list("dims", d)?),
            (None, None, None) => SweepGrid::Dims(Vec::new()),
            (None, a, b) => SweepGrid::Weights {
                alphas: a.as_deref().map_or(Ok(vec![base.alpha]), |t| parse_reals("alphas", t))?,
                betas: b.as_deref().map_or(Ok(vec![base.beta]), |t| parse_reals("betas", t))?,
            },
        };
        if grid.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        Ok(grid)
    }
}

pub fn sweep(
    dataset: &Path,
    common: &Common,
    grid: GridArgs,
    jobs: usize,
    k: Option<usize>,
    missing_ratio: Option<f64>,
) -> Result<(), CliError> {
    let mut base = load_config(common)?;
    apply_overrides(&mut base, k, missing_ratio)?;
    let grid = grid.grid(&base)?;
    let cells = grid.cells(&base);
    for c in &cells {
        c.config.validate()?;
    }
    let data = load_viewset(dataset)?;
    let dir = out_dir(common.out.clone(), &format!("sweep-{}", data.name));
    create_dir(&dir)?;
    let total = cells.len();
    let results = run_cells(&cells, jobs, |cell: &SweepCell| {
        let r = train_into(&data, &cell.config, &dir.join(&cell.name), false);
        match &r {
            Ok(t) => eprintln!("{}: acc {:.2} nmi {:.2} pur {:.2}", cell.name, t.record.acc, t.record.nmi, t.record.pur),
            Err(e) => eprintln!("{}: failed: {e}", cell.name),
        }
        r
    });
    let mut summary = String::from("cell,alpha,beta,dz,dc,status,acc,nmi,pur,inertia,error\n");
    let mut failed = 0;
    for (cell, r) in cells.iter().zip(&results) {
        let c = &cell.config;
        let _ = write!(summary, "{},{},{},{},{},", cell.name, c.alpha, c.beta, c.dz, c.dc);
        match r {
            Ok(t) => {
                let m = &t.record;
                let _ = writeln!(summary, "ok,{},{},{},{},", m.acc, m.nmi, m.pur, m.inertia);
            }
            Err(e) => {
                failed += 1;
                let msg = e.to_string().replace(['"', '\n'], " ");
                let _ = writeln!(summary, "failed,,,,,\"{msg}\"");
            }
        }
    }
    write_file(&dir.join("summary.csv"), &summary)?;
    eprintln!("{} of {total} cells succeeded; summary in {}", total - failed, dir.join("summary.csv").display());
    if failed > 0 {
        return Err(CliError::Training(format!("{failed} of {total} sweep cells failed")));
    }
    Ok(())
}

pub fn project(embeddings: &Path, labels: Option<&Path>, out: Option<PathBuf>) -> Result<(), CliError> {
    let q = read_matrix_csv(embeddings)?;
    let labels = labels.map(read_labels_csv).transpose()?;
    if let Some(l) = &labels {
        if l.len() != q.rows() {
            return Err(CliError::Input(format!("{} labels for {} rows", l.len(), q.rows())));
        }
    }
    let p = pca_2d(&q)?;
    let path = out.unwrap_or_else(|| out_root().join("projection.csv"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut text = String::from("x,y,label\n");
    for i in 0..p.rows() {
        let label = labels.as_ref().map_or(String::new(), |l| l[i].to_string());
        let _ = writeln!(text, "{:.16e},{:.16e},{label}", p.get(i, 0), p.get(i, 1));
    }
    write_file(&path, &text)
}

pub fn synth(out: Option<PathBuf>, seed: u64, samples: usize) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        samples,
        ..SyntheticSpec::default()
    };
    if samples < spec.clusters {
        return Err(CliError::Config(format!("--samples must be at least {}", spec.clusters)));
    }
    let data = generate_synthetic(&spec, seed).with_name("synthetic3d");
    let dir = out_dir(out, "synthetic3d");
    save_viewset(&data, &dir)?;
    eprintln!("wrote {} samples to {}", data.n_samples(), dir.display());
    Ok(())
}

pub fn mask(dataset: &Path, ratio: f64, seed: u64, out: Option<PathBuf>) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(CliError::Config(format!("--missing-ratio {ratio} outside [0, 1)")));
    }
    let data = load_viewset(dataset)?;
    let masked = apply_missing(&data, MissingSpec { ratio, seed })?;
    let dir = out_dir(out, &format!("{}-masked", data.name));
    save_viewset(&masked, &dir)?;
    eprintln!("{} incomplete samples written to {}", masked.incomplete_count(), dir.display());
    Ok(())
}
