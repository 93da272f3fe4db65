//! Mixed-type multi-study cohort data: ingestion, validation, standardization
//! and coarsening of raw measurements into factor levels.
//!
//! On disk a dataset is three CSV files with a header row and one row per
//! subject: a continuous covariate file, a factor covariate file (levels
//! `1..=A`) and a labels file with columns `study,group[,time,event]`.
//! Study and group labels are one-based.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One submatrix of factor covariates sharing a level count `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlock {
    pub names: Vec<String>,
    /// Levels in `1..=n_levels`.
    pub levels: DMatrix<u8>,
    pub n_levels: usize,
}

impl FactorBlock {
    pub fn new(names: Vec<String>, levels: DMatrix<u8>, n_levels: usize) -> Result<Self> {
        if n_levels < 2 || n_levels > u8::MAX as usize {
            return Err(Error::invalid(format!(
                "factor level count must be in 2..=255, got {n_levels}"
            )));
        }
        if names.len() != levels.ncols() {
            return Err(Error::Dimension(format!(
                "{} factor names for {} columns",
                names.len(),
                levels.ncols()
            )));
        }
        if let Some(bad) = levels
            .iter()
            .find(|&&l| l == 0 || l as usize > n_levels)
        {
            return Err(Error::LabelOutOfRange(format!(
                "factor level {bad} outside 1..={n_levels}"
            )));
        }
        Ok(Self {
            names,
            levels,
            n_levels,
        })
    }

    pub fn ncols(&self) -> usize {
        self.levels.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOutcome {
    /// Observed times `Y_i >= 0`.
    pub time: Vec<f64>,
    /// `true` when the time is an observed event, `false` when censored.
    pub event: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    pub continuous_names: Vec<String>,
    /// `N x p1` continuous covariates.
    pub continuous: DMatrix<f64>,
    pub factors: Vec<FactorBlock>,
    /// One-based study labels in `1..=n_studies`.
    pub study: Vec<usize>,
    /// One-based group labels in `1..=n_groups`.
    pub group: Vec<usize>,
    pub n_studies: usize,
    pub n_groups: usize,
    pub survival: Option<SurvivalOutcome>,
}

impl MixedDataset {
    /// Assemble and validate a dataset.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        continuous_names: Vec<String>,
        continuous: DMatrix<f64>,
        factors: Vec<FactorBlock>,
        study: Vec<usize>,
        group: Vec<usize>,
        n_studies: usize,
        n_groups: usize,
        survival: Option<SurvivalOutcome>,
    ) -> Result<Self> {
        let ds = Self {
            continuous_names,
            continuous,
            factors,
            study,
            group,
            n_studies,
            n_groups,
            survival,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_subjects(&self) -> usize {
        self.study.len()
    }

    pub fn p1(&self) -> usize {
        self.continuous.ncols()
    }

    pub fn p2(&self) -> usize {
        self.factors.iter().map(FactorBlock::ncols).sum()
    }

    /// Number of study-group combinations `J * K`.
    pub fn n_classes(&self) -> usize {
        self.n_studies * self.n_groups
    }

    /// Zero-based flattened class of subject `i`: `(s - 1) * K + (z - 1)`.
    pub fn class_of(&self, i: usize) -> usize {
        class_index(self.study[i], self.group[i], self.n_groups)
    }

    pub fn classes(&self) -> Vec<usize> {
        (0..self.n_subjects()).map(|i| self.class_of(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.study.len();
        if self.group.len() != n {
            return Err(Error::Dimension(format!(
                "{} study labels but {} group labels",
                n,
                self.group.len()
            )));
        }
        if self.continuous.nrows() != n && !(self.continuous.ncols() == 0) {
            return Err(Error::Dimension(format!(
                "continuous matrix has {} rows, labels have {}",
                self.continuous.nrows(),
                n
            )));
        }
        if self.continuous_names.len() != self.continuous.ncols() {
            return Err(Error::Dimension(format!(
                "{} continuous names for {} columns",
                self.continuous_names.len(),
                self.continuous.ncols()
            )));
        }
        for (b, block) in self.factors.iter().enumerate() {
            if block.levels.nrows() != n {
                return Err(Error::Dimension(format!(
                    "factor block {b} has {} rows, labels have {}",
                    block.levels.nrows(),
                    n
                )));
            }
        }
        if self.n_studies == 0 || self.n_groups == 0 {
            return Err(Error::invalid("study and group counts must be positive"));
        }
        for i in 0..n {
            if self.study[i] == 0 || self.study[i] > self.n_studies {
                return Err(Error::LabelOutOfRange(format!(
                    "subject {}: study {} outside 1..={}",
                    i + 1,
                    self.study[i],
                    self.n_studies
                )));
            }
            if self.group[i] == 0 || self.group[i] > self.n_groups {
                return Err(Error::LabelOutOfRange(format!(
                    "subject {}: group {} outside 1..={}",
                    i + 1,
                    self.group[i],
                    self.n_groups
                )));
            }
        }
        if let Some(surv) = &self.survival {
            if surv.time.len() != n || surv.event.len() != n {
                return Err(Error::Dimension(format!(
                    "survival outcome length {} / {} for {} subjects",
                    surv.time.len(),
                    surv.event.len(),
                    n
                )));
            }
            if let Some(t) = surv.time.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(Error::invalid(format!("invalid survival time {t}")));
            }
        }
        if self.continuous.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite continuous covariate"));
        }
        Ok(())
    }

    /// Rows `idx` (in order, repeats allowed) as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> MixedDataset {
        let continuous = if self.continuous.ncols() == 0 {
            DMatrix::zeros(idx.len(), 0)
        } else {
            self.continuous.select_rows(idx)
        };
        MixedDataset {
            continuous_names: self.continuous_names.clone(),
            continuous,
            factors: self
                .factors
                .iter()
                .map(|b| FactorBlock {
                    names: b.names.clone(),
                    levels: b.levels.select_rows(idx),
                    n_levels: b.n_levels,
                })
                .collect(),
            study: idx.iter().map(|&i| self.study[i]).collect(),
            group: idx.iter().map(|&i| self.group[i]).collect(),
            n_studies: self.n_studies,
            n_groups: self.n_groups,
            survival: self.survival.as_ref().map(|s| SurvivalOutcome {
                time: idx.iter().map(|&i| s.time[i]).collect(),
                event: idx.iter().map(|&i| s.event[i]).collect(),
            }),
        }
    }
}

/// Zero-based flattened class index for one-based `(study, group)`.
pub fn class_index(study: usize, group: usize, n_groups: usize) -> usize {
    (study - 1) * n_groups + (group - 1)
}

/// Inverse of [`class_index`], returning one-based `(study, group)`.
pub fn class_labels(class: usize, n_groups: usize) -> (usize, usize) {
    (class / n_groups + 1, class % n_groups + 1)
}

/// Rule mapping a raw real measurement to a factor level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CutRule {
    /// Zero maps to level 1, anything else to level 2.
    Nonzero,
    /// Strictly increasing cut points; level is `1 + #{k : x > cuts[k]}`.
    Cuts { cuts: Vec<f64> },
}

impl CutRule {
    pub fn n_levels(&self) -> usize {
        match self {
            CutRule::Nonzero => 2,
            CutRule::Cuts { cuts } => cuts.len() + 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if let CutRule::Cuts { cuts } = self {
            if cuts.is_empty() {
                return Err(Error::invalid("cut rule needs at least one cut point"));
            }
            if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("cut points must be finite and strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn level(&self, x: f64) -> u8 {
        match self {
            CutRule::Nonzero => {
                if x == 0.0 {
                    1
                } else {
                    2
                }
            }
            CutRule::Cuts { cuts } => 1 + cuts.iter().filter(|&&c| x > c).count() as u8,
        }
    }
}

/// Coarsen a raw real matrix into factor levels. `rules` holds either one rule
/// applied to every column or one rule per column.
pub fn coarsen_factor(raw: &DMatrix<f64>, rules: &[CutRule]) -> Result<DMatrix<u8>> {
    if rules.len() != 1 && rules.len() != raw.ncols() {
        return Err(Error::Dimension(format!(
            "{} cut rules for {} columns",
            rules.len(),
            raw.ncols()
        )));
    }
    for r in rules {
        r.validate()?;
        if r.n_levels() > u8::MAX as usize {
            return Err(Error::invalid("too many levels"));
        }
    }
    if raw.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN in raw factor measurements"));
    }
    Ok(DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| {
        let rule = if rules.len() == 1 { &rules[0] } else { &rules[j] };
        rule.level(raw[(i, j)])
    }))
}

/// Per-column mean and sample standard deviation used to standardize the
/// continuous submatrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl StandardizationParams {
    pub fn fit(names: &[String], x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let m = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
            let s = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            if !(s > 0.0) || !s.is_finite() {
                let name = names.get(j).cloned().unwrap_or_else(|| format!("#{}", j + 1));
                return Err(Error::ConstantColumn(name));
            }
            mean.push(m);
            sd.push(s);
        }
        Ok(Self { mean, sd })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardization fitted on {} columns, applied to {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.sd[j]
        }))
    }
}

/// Standardize continuous columns to mean 0 and unit sample standard deviation.
pub fn standardize_continuous(
    data: &MixedDataset,
) -> Result<(MixedDataset, StandardizationParams)> {
    let params = StandardizationParams::fit(&data.continuous_names, &data.continuous)?;
    let mut out = data.clone();
    out.continuous = params.apply(&data.continuous)?;
    Ok((out, params))
}

fn default_levels() -> usize {
    2
}

/// How one factor file is turned into levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorBlockSpec {
    #[serde(default = "default_levels")]
    pub n_levels: usize,
    /// Raw reals are coarsened with these rules (one, or one per column).
    #[serde(default)]
    pub coarsen: Option<Vec<CutRule>>,
    /// Levels in the file are `0..A-1` and are shifted to `1..A`.
    #[serde(default)]
    pub zero_based: bool,
}

impl Default for FactorBlockSpec {
    fn default() -> Self {
        Self {
            n_levels: 2,
            coarsen: None,
            zero_based: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Declared `J`; inferred from the largest label when absent.
    #[serde(default)]
    pub n_studies: Option<usize>,
    /// Declared `K`; inferred from the largest label when absent.
    #[serde(default)]
    pub n_groups: Option<usize>,
    /// One spec per factor file; missing entries use the default (binary).
    #[serde(default)]
    pub factor_blocks: Vec<FactorBlockSpec>,
}

impl IngestConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

/// A table of raw string cells with a header.
struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let text = read_to_string(path)?;
    if text.trim().is_empty() {
        return Ok(RawTable {
            header: Vec::new(),
            rows: Vec::new(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(RawTable { header, rows })
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "?"
    )
}

fn parse_real(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    if is_missing(cell) {
        return Err(Error::MissingValue {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
        });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Read a numeric CSV matrix with a header row. An empty file is a matrix with
/// no columns and `None` rows.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Option<DMatrix<f64>>)> {
    let table = read_table(path)?;
    if table.header.is_empty() || (table.header.len() == 1 && table.header[0].is_empty()) {
        return Ok((Vec::new(), None));
    }
    let n = table.rows.len();
    let p = table.header.len();
    let mut m = DMatrix::zeros(n, p);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            m[(i, j)] = parse_real(path, i + 1, &table.header[j], cell)?;
        }
    }
    Ok((table.header, Some(m)))
}

/// Read a factor CSV and turn it into a validated block. `Ok(None)` for an
/// empty file.
pub fn read_factor_csv(path: &Path, spec: &FactorBlockSpec) -> Result<Option<FactorBlock>> {
    let (names, raw) = read_matrix_csv(path)?;
    let Some(raw) = raw else { return Ok(None) };
    let (levels, n_levels) = match &spec.coarsen {
        Some(rules) => {
            let n_levels = rules.iter().map(CutRule::n_levels).max().unwrap_or(2);
            (coarsen_factor(&raw, rules)?, n_levels.max(spec.n_levels))
        }
        None => {
            let shift = if spec.zero_based { 1.0 } else { 0.0 };
            let mut levels = DMatrix::zeros(raw.nrows(), raw.ncols());
            for i in 0..raw.nrows() {
                for j in 0..raw.ncols() {
                    let v = raw[(i, j)] + shift;
                    if v.fract() != 0.0 || v < 1.0 || v > spec.n_levels as f64 {
                        return Err(Error::LabelOutOfRange(format!(
                            "{}: row {}, column '{}': factor level {} outside 1..={}",
                            path.display(),
                            i + 1,
                            names[j],
                            raw[(i, j)],
                            spec.n_levels
                        )));
                    }
                    levels[(i, j)] = v as u8;
                }
            }
            (levels, spec.n_levels)
        }
    };
    FactorBlock::new(names, levels, n_levels).map(Some)
}

/// Contents of a labels file.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub study: Vec<usize>,
    pub group: Vec<usize>,
    pub survival: Option<SurvivalOutcome>,
}

pub fn read_labels_csv(path: &Path) -> Result<Labels> {
    let table = read_table(path)?;
    let col = |name: &str| table.header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(si), Some(zi)) = (col("study"), col("group")) else {
        return Err(Error::invalid(format!(
            "{}: labels file needs 'study' and 'group' columns",
            path.display()
        )));
    };
    let (ti, ei) = (col("time"), col("event"));
    if ti.is_some() != ei.is_some() {
        return Err(Error::invalid(format!(
            "{}: 'time' and 'event' must appear together",
            path.display()
        )));
    }
    let parse_label = |row: usize, name: &str, cell: &str| -> Result<usize> {
        let v = parse_real(path, row, name, cell)?;
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::LabelOutOfRange(format!(
                "{}: row {row}: {name} label {cell}",
                path.display()
            )));
        }
        Ok(v as usize)
    };
    let mut study = Vec::with_capacity(table.rows.len());
    let mut group = Vec::with_capacity(table.rows.len());
    let mut time = Vec::new();
    let mut event = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        study.push(parse_label(i + 1, "study", &row[si])?);
        group.push(parse_label(i + 1, "group", &row[zi])?);
        if let (Some(ti), Some(ei)) = (ti, ei) {
            time.push(parse_real(path, i + 1, "time", &row[ti])?);
            let e = parse_real(path, i + 1, "event", &row[ei])?;
            if e != 0.0 && e != 1.0 {
                return Err(Error::LabelOutOfRange(format!(
                    "{}: row {}: event indicator {} not 0/1",
                    path.display(),
                    i + 1,
                    row[ei]
                )));
            }
            event.push(e == 1.0);
        }
    }
    let survival = ti.map(|_| SurvivalOutcome { time, event });
    Ok(Labels {
        study,
        group,
        survival,
    })
}

/// Load a dataset with a single (possibly empty) factor file.
pub fn load_dataset(
    continuous_path: &Path,
    factor_path: &Path,
    labels_path: &Path,
    config: &IngestConfig,
) -> Result<MixedDataset> {
    load_dataset_blocks(
        Some(continuous_path),
        &[factor_path.to_path_buf()],
        labels_path,
        config,
    )
}

/// Load a dataset with any number of factor files, each with its own level
/// count taken from `config.factor_blocks`.
pub fn load_dataset_blocks(
    continuous_path: Option<&Path>,
    factor_paths: &[PathBuf],
    labels_path: &Path,
    config: &IngestConfig,
) -> Result<MixedDataset> {
    let labels = read_labels_csv(labels_path)?;
    let n = labels.study.len();
    let (continuous_names, continuous) = match continuous_path {
        Some(p) => {
            let (names, m) = read_matrix_csv(p)?;
            let m = m.unwrap_or_else(|| DMatrix::zeros(n, 0));
            if m.nrows() != n {
                return Err(Error::Dimension(format!(
                    "{} has {} rows, {} has {}",
                    p.display(),
                    m.nrows(),
                    labels_path.display(),
                    n
                )));
            }
            (names, m)
        }
        None => (Vec::new(), DMatrix::zeros(n, 0)),
    };
    let mut factors = Vec::new();
    for (b, path) in factor_paths.iter().enumerate() {
        let spec = config.factor_blocks.get(b).cloned().unwrap_or_default();
        if let Some(block) = read_factor_csv(path, &spec)? {
            if block.levels.nrows() != n {
                return Err(Error::Dimension(format!(
                    "{} has {} rows, {} has {}",
                    path.display(),
                    block.levels.nrows(),
                    labels_path.display(),
                    n
                )));
            }
            factors.push(block);
        }
    }
    let n_studies = config
        .n_studies
        .unwrap_or_else(|| labels.study.iter().copied().max().unwrap_or(1));
    let n_groups = config
        .n_groups
        .unwrap_or_else(|| labels.group.iter().copied().max().unwrap_or(1));
    MixedDataset::new(
        continuous_names,
        continuous,
        factors,
        labels.study,
        labels.group,
        n_studies,
        n_groups,
        labels.survival,
    )
}

fn write_csv<F>(path: &Path, header: &[String], n: usize, mut row: F) -> Result<()>
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    if !header.is_empty() {
        w.write_record(header).map_err(|e| Error::csv(path, e))?;
        for i in 0..n {
            w.write_record(row(i)).map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write a numeric matrix as CSV using shortest round-trip float formatting.
pub fn write_matrix_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    write_csv(path, names, m.nrows(), |i| {
        (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect()
    })
}

/// Paths of the canonical files inside a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub continuous: PathBuf,
    pub factors: Vec<PathBuf>,
    pub labels: PathBuf,
}

impl DatasetPaths {
    /// `continuous.csv`, `factor.csv` (plus `factor2.csv`, ... when present)
    /// and `labels.csv` under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let mut factors = vec![dir.join("factor.csv")];
        let mut b = 2;
        while dir.join(format!("factor{b}.csv")).exists() {
            factors.push(dir.join(format!("factor{b}.csv")));
            b += 1;
        }
        Self {
            continuous: dir.join("continuous.csv"),
            factors,
            labels: dir.join("labels.csv"),
        }
    }
}

/// Write `data` into `dir` using the canonical file names.
pub fn write_dataset(data: &MixedDataset, dir: &Path) -> Result<DatasetPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths {
        continuous: dir.join("continuous.csv"),
        factors: (0..data.factors.len().max(1))
            .map(|b| {
                if b == 0 {
                    dir.join("factor.csv")
                } else {
                    dir.join(format!("factor{}.csv", b + 1))
                }
            })
            .collect(),
        labels: dir.join("labels.csv"),
    };
    write_matrix_csv(&paths.continuous, &data.continuous_names, &data.continuous)?;
    if data.factors.is_empty() {
        write_csv(&paths.factors[0], &[], 0, |_| Vec::new())?;
    }
    for (block, path) in data.factors.iter().zip(&paths.factors) {
        write_csv(path, &block.names, block.levels.nrows(), |i| {
            (0..block.ncols())
                .map(|j| block.levels[(i, j)].to_string())
                .collect()
        })?;
    }
    let mut header = vec!["study".to_string(), "group".to_string()];
    if data.survival.is_some() {
        header.push("time".into());
        header.push("event".into());
    }
    write_csv(&paths.labels, &header, data.n_subjects(), |i| {
        let mut r = vec![data.study[i].to_string(), data.group[i].to_string()];
        if let Some(s) = &data.survival {
            r.push(format!("{}", s.time[i]));
            r.push(if s.event[i] { "1" } else { "0" }.into());
        }
        r
    })?;
    Ok(paths)
}
