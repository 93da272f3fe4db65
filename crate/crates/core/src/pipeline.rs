//! File-level steps behind the command-line tool: loading inputs, running
//! each stage and writing machine-readable outputs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{
    class_index, load_dataset_blocks, read_factor_csv, read_matrix_csv, DatasetPaths, IngestConfig,
    MixedDataset, SurvivalOutcome,
};
use crate::error::{Error, Result};
use crate::mcmc::write_coassign;
use crate::partition::{
    assign_test_subjects, fit_motifs, motif_vector_from_rows, subject_motif_vector, FitConfig,
    MotifFit,
};
use crate::regression::{
    fit_omps, predict_matrix, FitSpec, LambdaChoice, OmpsModel, Penalty, PredictorCodec,
};
use crate::survival::{
    bkme, bootstrap_survival, survival_percentile, SurvivalBands, SurvivalCurve, VarianceForm,
};
use crate::weighting::{asb_table, compute_weights, AsbRow, Memberships, Method, OMPS_FLOOR};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The ingest config: the explicit file, else `ingest.json` in `dir`.
pub fn ingest_config(dir: &Path, explicit: Option<&Path>) -> Result<IngestConfig> {
    match explicit {
        Some(p) => IngestConfig::from_json_file(p),
        None if dir.join("ingest.json").exists() => IngestConfig::from_json_file(&dir.join("ingest.json")),
        None => Ok(IngestConfig::default()),
    }
}

fn existing_factor_paths(paths: &DatasetPaths) -> Vec<PathBuf> {
    paths.factors.iter().filter(|p| p.exists()).cloned().collect()
}

/// Load `continuous.csv`, `factor*.csv` and `labels.csv` from a directory.
pub fn load_dataset_dir(dir: &Path, ingest: Option<&Path>) -> Result<MixedDataset> {
    let cfg = ingest_config(dir, ingest)?;
    let paths = DatasetPaths::in_dir(dir);
    let cont = paths.continuous.exists().then_some(paths.continuous.as_path());
    load_dataset_blocks(cont, &existing_factor_paths(&paths), &paths.labels, &cfg)
}

/// Load covariates for prediction; labels are optional. Returns whether
/// labels were present.
pub fn load_covariates_dir(dir: &Path, ingest: Option<&Path>) -> Result<(MixedDataset, bool)> {
    let paths = DatasetPaths::in_dir(dir);
    if paths.labels.exists() {
        return Ok((load_dataset_dir(dir, ingest)?, true));
    }
    let cfg = ingest_config(dir, ingest)?;
    let (names, cont) = if paths.continuous.exists() {
        read_matrix_csv(&paths.continuous)?
    } else {
        (Vec::new(), None)
    };
    let mut factors = Vec::new();
    for (b, p) in existing_factor_paths(&paths).iter().enumerate() {
        let spec = cfg.factor_blocks.get(b).cloned().unwrap_or_default();
        if let Some(block) = read_factor_csv(p, &spec)? {
            factors.push(block);
        }
    }
    let n = cont
        .as_ref()
        .map(|m| m.nrows())
        .or_else(|| factors.first().map(|b| b.levels.nrows()))
        .ok_or_else(|| Error::invalid(format!("{} holds no covariates", dir.display())))?;
    let continuous = cont.unwrap_or_else(|| DMatrix::zeros(n, 0));
    let ds = MixedDataset::new(names, continuous, factors, vec![1; n], vec![1; n], 1, 1, None)?;
    Ok((ds, false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub n_cliques: usize,
    pub n_clusters: usize,
    pub n_levels: Option<usize>,
    pub samples: usize,
}

/// Fit motifs, write the fit file and optional per-block trace diagnostics.
pub fn run_fit_motifs(
    ds: &MixedDataset,
    config: &FitConfig,
    out: &Path,
    trace_dir: Option<&Path>,
) -> Result<(MotifFit, Vec<BlockSummary>)> {
    let mut config = config.clone();
    config.mcmc.trace_hyperparams = trace_dir.is_some();
    let (fit, traces) = fit_motifs(ds, &config)?;
    write_json(out, &fit)?;
    let summary: Vec<BlockSummary> = fit
        .blocks
        .iter()
        .zip(&traces)
        .map(|(b, t)| BlockSummary {
            n_cliques: b.n_cliques(),
            n_clusters: b.n_clusters(),
            n_levels: b.n_levels(),
            samples: t.n_samples,
        })
        .collect();
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, t) in traces.iter().enumerate() {
            t.write_hyper_csv(&dir.join(format!("block{}_hyper.csv", k + 1)))?;
            write_coassign(&t.row_coassign, &dir.join(format!("block{}_rows.bin", k + 1)))?;
            write_coassign(&t.col_coassign, &dir.join(format!("block{}_cols.bin", k + 1)))?;
        }
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok((fit, summary))
}

/// Expanded motif predictors of the training subjects.
pub fn training_design(fit: &MotifFit) -> Result<(PredictorCodec, DMatrix<f64>)> {
    let n = fit.n_subjects();
    if n == 0 {
        return Err(Error::invalid("motif fit has no subjects"));
    }
    let rows = (0..n)
        .map(|i| subject_motif_vector(fit, i))
        .collect::<Result<Vec<_>>>()?;
    let codec = PredictorCodec::for_motif(&rows[0]);
    let x = codec.expand_rows(&rows)?;
    Ok((codec, x))
}

/// Penalized multinomial o-MPS model on the motif predictors.
pub fn run_estimate_mps(
    fit: &MotifFit,
    classes: &[usize],
    n_classes: usize,
    penalty: Penalty,
    lambda: LambdaChoice,
) -> Result<(OmpsModel, DMatrix<f64>)> {
    let (codec, x) = training_design(fit)?;
    if classes.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} subjects in the motif fit",
            classes.len(),
            x.nrows()
        )));
    }
    let spec = FitSpec {
        penalty,
        lambda,
        groups: (penalty == Penalty::GroupLasso).then(|| codec.groups()),
        solver: Default::default(),
    };
    let mut model = fit_omps(&x, classes, n_classes, &spec)?;
    model.codec = Some(codec);
    let pred = predict_matrix(&model, &x)?;
    Ok((model, pred))
}

/// o-MPS of new subjects through test-clique assignment.
pub fn predict_new_subjects(
    fit: &MotifFit,
    model: &OmpsModel,
    test: &MixedDataset,
    allow_new: bool,
) -> Result<DMatrix<f64>> {
    let codec = model
        .codec
        .as_ref()
        .ok_or_else(|| Error::invalid("o-MPS model has no motif codec"))?;
    let assignments = assign_test_subjects(fit, test, allow_new)?;
    let rows: Vec<_> = assignments
        .iter()
        .map(|a| {
            let r: Vec<Vec<f64>> = a.iter().map(|x| x.motif_row.clone()).collect();
            motif_vector_from_rows(fit, &r)
        })
        .collect();
    let x = codec.expand_rows(&rows)?;
    predict_matrix(model, &x)
}

/// Per-subject o-MPS with optional study-group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpsTable {
    pub study: Vec<Option<usize>>,
    pub group: Vec<Option<usize>>,
    pub n_studies: usize,
    pub n_groups: usize,
    pub omps: DMatrix<f64>,
}

fn omps_header(j: usize, k: usize) -> Vec<String> {
    (1..=j)
        .flat_map(|s| (1..=k).map(move |z| format!("omps_s{s}_z{z}")))
        .collect()
}

fn parse_omps_header(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("omps_s")?;
    let (s, z) = rest.split_once("_z")?;
    Some((s.parse().ok()?, z.parse().ok()?))
}

fn label_cell(v: Option<usize>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::csv(path, e)
}

impl OmpsTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        let mut header = vec!["subject".to_string(), "study".into(), "group".into()];
        header.extend(omps_header(self.n_studies, self.n_groups));
        w.write_record(&header).map_err(csv_err(path))?;
        for i in 0..self.omps.nrows() {
            let mut r = vec![(i + 1).to_string(), label_cell(self.study[i]), label_cell(self.group[i])];
            r.extend(self.omps.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&r).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = read_wide(path)?;
        Ok(Self {
            study: t.study,
            group: t.group,
            n_studies: t.n_studies,
            n_groups: t.n_groups,
            omps: t.omps,
        })
    }

    /// Labels of every subject, failing when any are missing.
    pub fn memberships(&self) -> Result<Memberships> {
        let study: Option<Vec<usize>> = self.study.iter().copied().collect();
        let group: Option<Vec<usize>> = self.group.iter().copied().collect();
        match (study, group) {
            (Some(study), Some(group)) => Ok(Memberships {
                study,
                group,
                n_studies: self.n_studies,
                n_groups: self.n_groups,
            }),
            _ => Err(Error::invalid("predictions lack study/group labels")),
        }
    }
}

struct WideTable {
    study: Vec<Option<usize>>,
    group: Vec<Option<usize>>,
    n_studies: usize,
    n_groups: usize,
    omps: DMatrix<f64>,
    extra: Vec<(String, Vec<f64>)>,
}

fn read_wide(path: &Path) -> Result<WideTable> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let pos = |name: &str| header.iter().position(|h| h == name);
    let (si, zi) = (pos("study"), pos("group"));
    let omps_cols: Vec<(usize, (usize, usize))> = header
        .iter()
        .enumerate()
        .filter_map(|(j, h)| parse_omps_header(h).map(|sz| (j, sz)))
        .collect();
    let n_studies = omps_cols.iter().map(|c| c.1 .0).max().unwrap_or(0);
    let n_groups = omps_cols.iter().map(|c| c.1 .1).max().unwrap_or(0);
    if omps_cols.is_empty() || omps_cols.len() != n_studies * n_groups {
        return Err(Error::Dimension(format!(
            "{}: o-MPS columns do not cover every study-group combination",
            path.display()
        )));
    }
    let extra_cols: Vec<usize> = (0..header.len())
        .filter(|j| {
            Some(*j) != si
                && Some(*j) != zi
                && header[*j] != "subject"
                && parse_omps_header(&header[*j]).is_none()
        })
        .collect();
    let mut study = Vec::new();
    let mut group = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut extra: Vec<(String, Vec<f64>)> = extra_cols.iter().map(|&j| (header[j].clone(), Vec::new())).collect();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: i + 1,
                column: header[j].clone(),
                value: rec[j].to_string(),
            })
        };
        let label = |j: Option<usize>| -> Result<Option<usize>> {
            match j.map(|j| &rec[j]) {
                None | Some("") => Ok(None),
                Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                    Error::LabelOutOfRange(format!("{}: row {}: label {v}", path.display(), i + 1))
                }),
            }
        };
        study.push(label(si)?);
        group.push(label(zi)?);
        let mut row = vec![0.0; n_studies * n_groups];
        for &(j, (s, z)) in &omps_cols {
            row[class_index(s, z, n_groups)] = num(j)?;
        }
        rows.push(row);
        for (k, &j) in extra_cols.iter().enumerate() {
            extra[k].1.push(num(j)?);
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let omps = DMatrix::from_row_slice(rows.len(), n_studies * n_groups, &flat);
    Ok(WideTable {
        study,
        group,
        n_studies,
        n_groups,
        omps,
        extra,
    })
}

/// o-MPS and normalized weights per method, one row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsTable {
    pub memberships: Memberships,
    pub omps: DMatrix<f64>,
    pub weights: Vec<(Method, Vec<f64>)>,
}

impl WeightsTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = &self.memberships;
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        let mut header = vec!["subject".to_string(), "study".into(), "group".into()];
        header.extend(omps_header(m.n_studies, m.n_groups));
        header.extend(self.weights.iter().map(|(k, _)| k.to_string()));
        w.write_record(&header).map_err(csv_err(path))?;
        for i in 0..m.len() {
            let mut r = vec![(i + 1).to_string(), m.study[i].to_string(), m.group[i].to_string()];
            r.extend(self.omps.row(i).iter().map(|v| format!("{v}")));
            r.extend(self.weights.iter().map(|(_, v)| format!("{}", v[i])));
            w.write_record(&r).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = read_wide(path)?;
        let table = OmpsTable {
            study: t.study,
            group: t.group,
            n_studies: t.n_studies,
            n_groups: t.n_groups,
            omps: t.omps,
        };
        let memberships = table.memberships()?;
        let weights = t
            .extra
            .into_iter()
            .map(|(name, v)| Ok((name.parse::<Method>()?, v)))
            .collect::<Result<Vec<_>>>()?;
        if weights.is_empty() {
            return Err(Error::invalid(format!("{} has no weight columns", path.display())));
        }
        Ok(Self {
            memberships,
            omps: table.omps,
            weights,
        })
    }

    pub fn column(&self, method: Method) -> Option<&[f64]> {
        self.weights
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub ess_percent: f64,
    pub ess_subjects: f64,
    pub theta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub clipped: usize,
    pub weight_sum: f64,
    /// Share of the total weight in each group.
    pub group_share: Vec<f64>,
    pub asb: Option<Vec<AsbRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsReport {
    pub n_subjects: usize,
    pub methods: Vec<MethodReport>,
}

/// Weights for each method; the ASB table is added when covariates are given.
pub fn run_weights(
    table: &OmpsTable,
    methods: &[Method],
    theta: Option<&[f64]>,
    covariates: Option<&MixedDataset>,
    asb_groups: (usize, usize),
) -> Result<(WeightsTable, WeightsReport)> {
    let m = table.memberships()?;
    if let Some(ds) = covariates {
        if ds.n_subjects() != m.len() {
            return Err(Error::Dimension(format!(
                "{} subjects in the covariates, {} in the predictions",
                ds.n_subjects(),
                m.len()
            )));
        }
    }
    let mut weights = Vec::new();
    let mut reports = Vec::new();
    for &method in methods {
        let w = compute_weights(method, &table.omps, &m, theta)?;
        let total: f64 = w.normalized.iter().sum();
        let group_share = (1..=m.n_groups)
            .map(|z| {
                (0..m.len())
                    .filter(|&i| m.group[i] == z)
                    .map(|i| w.normalized[i])
                    .sum::<f64>()
                    / total
            })
            .collect();
        let asb = covariates
            .map(|ds| {
                let mut ds = ds.clone();
                ds.group = m.group.clone();
                asb_table(&ds, &w.normalized, asb_groups.0, asb_groups.1)
            })
            .transpose()?;
        reports.push(MethodReport {
            method,
            ess_percent: w.ess_percent,
            ess_subjects: w.ess_percent / 100.0 * m.len() as f64,
            theta: w.theta.clone(),
            gamma: w.gamma.clone(),
            clipped: w.clipped,
            weight_sum: total,
            group_share,
            asb,
        });
        weights.push((method, w.normalized));
    }
    Ok((
        WeightsTable {
            memberships: m.clone(),
            omps: table.omps.clone(),
            weights,
        },
        WeightsReport {
            n_subjects: m.len(),
            methods: reports,
        },
    ))
}

/// Refit the o-MPS regression on each bootstrap resample.
#[derive(Debug, Clone)]
pub struct RefitBootstrap {
    pub fit: MotifFit,
    pub model: OmpsModel,
}

#[derive(Debug, Clone)]
pub struct KmOptions {
    /// Bootstrap replicates; 0 disables the bootstrap.
    pub bootstrap: usize,
    pub seed: u64,
    pub variance: VarianceForm,
    pub theta: Option<Vec<f64>>,
    pub refit: Option<RefitBootstrap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    pub method: Method,
    pub curve: SurvivalCurve,
    pub bands: Option<SurvivalBands>,
}

impl KmCurve {
    /// Plotting band: bootstrap percentiles when available, else the
    /// normal approximation from the analytic variance.
    pub fn band(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.bands {
            Some(b) => (b.percentile_lower.clone(), b.percentile_upper.clone()),
            None => self
                .curve
                .survival
                .iter()
                .zip(&self.curve.variance)
                .map(|(s, v)| {
                    let h = 1.96 * v.max(0.0).sqrt();
                    ((s - h).clamp(0.0, 1.0), (s + h).clamp(0.0, 1.0))
                })
                .unzip(),
        }
    }
}

fn refit_omps(r: &RefitBootstrap, idx: &[usize], classes: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    let (_, x) = training_design(&r.fit)?;
    let xs = x.select_rows(idx);
    let ys: Vec<usize> = idx.iter().map(|&i| classes[i]).collect();
    let mut present = ys.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::invalid("resample holds a single study-group combination"));
    }
    let remap: Vec<usize> = ys.iter().map(|c| present.binary_search(c).expect("present")).collect();
    let spec = FitSpec {
        penalty: r.model.penalty,
        lambda: LambdaChoice::Fixed(r.model.lambda),
        groups: Some(r.model.groups.clone()),
        solver: Default::default(),
    };
    let model = fit_omps(&xs, &remap, present.len(), &spec)?;
    let p = predict_matrix(&model, &xs)?;
    let mut out = DMatrix::from_element(idx.len(), n_classes, OMPS_FLOOR);
    for (k, &c) in present.iter().enumerate() {
        out.set_column(c, &p.column(k));
    }
    Ok(out)
}

/// Weighted Kaplan–Meier curves per method and group.
pub fn run_km(table: &WeightsTable, survival: &SurvivalOutcome, opts: &KmOptions) -> Result<Vec<KmCurve>> {
    let m = &table.memberships;
    if survival.time.len() != m.len() {
        return Err(Error::Dimension(format!(
            "{} survival outcomes for {} weighted subjects",
            survival.time.len(),
            m.len()
        )));
    }
    if opts.bootstrap == 1 {
        return Err(Error::invalid("the bootstrap needs at least 2 replicates"));
    }
    let classes: Vec<usize> = (0..m.len()).map(|i| class_index(m.study[i], m.group[i], m.n_groups)).collect();
    let n_classes = m.n_studies * m.n_groups;
    let mut out = Vec::new();
    for (method, w) in &table.weights {
        for z in 1..=m.n_groups {
            let curve = bkme(&survival.time, &survival.event, &m.group, w, z, opts.variance)?;
            let bands = if opts.bootstrap >= 2 {
                let recipe = |idx: &[usize]| -> Result<Vec<f64>> {
                    let sub = Memberships {
                        study: idx.iter().map(|&i| m.study[i]).collect(),
                        group: idx.iter().map(|&i| m.group[i]).collect(),
                        n_studies: m.n_studies,
                        n_groups: m.n_groups,
                    };
                    let omps = match &opts.refit {
                        Some(r) => refit_omps(r, idx, &classes, n_classes)?,
                        None => table.omps.select_rows(idx),
                    };
                    Ok(compute_weights(*method, &omps, &sub, opts.theta.as_deref())?.normalized)
                };
                Some(bootstrap_survival(
                    &survival.time,
                    &survival.event,
                    &m.group,
                    w,
                    z,
                    recipe,
                    opts.bootstrap,
                    opts.seed,
                )?)
            } else {
                None
            };
            out.push(KmCurve {
                method: *method,
                curve,
                bands,
            });
        }
    }
    Ok(out)
}

/// One row of the curves file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub time: f64,
    pub survival: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub group: usize,
    pub method: Method,
    pub se: Option<f64>,
    pub weighted_deaths: f64,
    pub weighted_at_risk: f64,
}

pub fn curve_rows(curves: &[KmCurve]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for c in curves {
        let (lo, hi) = c.band();
        for j in 0..c.curve.times.len() {
            rows.push(CurveRow {
                time: c.curve.times[j],
                survival: c.curve.survival[j],
                variance: c.curve.variance[j],
                lower: lo[j],
                upper: hi[j],
                group: c.curve.group,
                method: c.method,
                se: c.bands.as_ref().map(|b| b.se[j]),
                weighted_deaths: c.curve.weighted_deaths[j],
                weighted_at_risk: c.curve.weighted_at_risk[j],
            });
        }
    }
    rows
}

pub fn write_curves_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    if rows.is_empty() {
        w.write_record([
            "time", "survival", "variance", "lower", "upper", "group", "method", "se",
            "weighted_deaths", "weighted_at_risk",
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: Method,
    pub group: usize,
    /// `None` when the curve never drops to the level.
    pub median: Option<f64>,
    pub percentile_10: Option<f64>,
    pub bootstrap_redraws: Option<usize>,
}

pub fn curve_summaries(curves: &[KmCurve]) -> Result<Vec<CurveSummary>> {
    curves
        .iter()
        .map(|c| {
            Ok(CurveSummary {
                method: c.method,
                group: c.curve.group,
                median: survival_percentile(&c.curve, 0.5)?,
                percentile_10: survival_percentile(&c.curve, 0.1)?,
                bootstrap_redraws: c.bands.as_ref().map(|b| b.redraws),
            })
        })
        .collect()
}

const COLORS: [&str; 6] = ["#d62728", "#17becf", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Step plots with shaded bands, one panel per weighting method.
pub fn survival_svg(curves: &[KmCurve]) -> String {
    let mut methods: Vec<Method> = Vec::new();
    for c in curves {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
    }
    let (pw, ph, pad) = (360.0, 280.0, 40.0);
    let t_max = curves
        .iter()
        .flat_map(|c| c.curve.times.last().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let width = pw * methods.len().max(1) as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{ph}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for (k, method) in methods.iter().enumerate() {
        let x0 = k as f64 * pw + pad;
        let (w, h) = (pw - 1.5 * pad, ph - 2.0 * pad);
        let px = |t: f64| x0 + w * t / t_max;
        let py = |v: f64| pad + h * (1.0 - v);
        s.push_str(&format!(
            "<rect x=\"{x0:.1}\" y=\"{pad:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"#444\"/>\n"
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x0 + w / 2.0,
            pad - 10.0,
            method.to_string().to_uppercase()
        ));
        for v in [0.0, 0.5, 1.0] {
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v}</text>\n",
                x0 - 4.0,
                py(v) + 4.0
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            x0 + w,
            pad + h + 14.0,
            format_args!("{t_max:.1}")
        ));
        for c in curves.iter().filter(|c| c.method == *method) {
            let color = COLORS[(c.curve.group - 1) % COLORS.len()];
            let (lo, hi) = c.band();
            let step = |vals: &[f64]| {
                let mut pts = vec![(0.0, 1.0)];
                let mut prev = 1.0;
                for (t, v) in c.curve.times.iter().zip(vals) {
                    pts.push((*t, prev));
                    pts.push((*t, *v));
                    prev = *v;
                }
                pts.push((t_max, prev));
                pts
            };
            let upper = step(&hi);
            let mut lower = step(&lo);
            lower.reverse();
            let poly: Vec<String> = upper
                .iter()
                .chain(&lower)
                .map(|(t, v)| format!("{:.2},{:.2}", px(*t), py(*v)))
                .collect();
            s.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                poly.join(" ")
            ));
            let line: Vec<String> = step(&c.curve.survival)
                .iter()
                .map(|(t, v)| format!("{:.2},{:.2}", px(*t), py(*v)))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                line.join(" ")
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}
