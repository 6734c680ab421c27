//! Precision/recall accounting and the experiment sweeps.
//!
//! Register-level accounting looks at every register independently: a test
//! instance is a true positive for its own class register if accepted there,
//! a false negative if rejected there, and a false positive for every other
//! register that accepts it. System-level accounting looks only at the
//! filtered decision: correct class is a TP, wrong class is one FP plus one
//! FN, rejection by every register is one FN.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{self, split_for_fold, take_fraction, Dataset, Instance, Role};
use crate::error::{Error, Result};
use crate::function::DiscreteFunction;
use crate::quantizer::Quantizer;
use crate::system::MemorySystem;

/// A quantized, labelled instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Labelled {
    pub label: usize,
    pub function: DiscreteFunction,
}

/// A ratio with an explicit flag for an empty denominator, in which case the
/// value is reported as 1.0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio {
                value: 1.0,
                undefined: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fn_)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub counts: Counts,
    pub precision: Ratio,
    pub recall: Ratio,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterMetrics {
    pub per_class: Vec<ClassMetrics>,
}

impl RegisterMetrics {
    /// Uniform mean over classes with defined precision; undefined (1.0) if
    /// no class has one.
    pub fn mean_precision(&self) -> Ratio {
        mean_defined(self.per_class.iter().map(|c| c.precision))
    }

    pub fn mean_recall(&self) -> Ratio {
        mean_defined(self.per_class.iter().map(|c| c.recall))
    }

    pub fn mean_entropy(&self) -> f64 {
        mean(self.per_class.iter().map(|c| c.entropy))
    }

    /// Number of registers whose precision is undefined.
    pub fn undefined_precision(&self) -> usize {
        self.per_class
            .iter()
            .filter(|c| c.precision.undefined)
            .count()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn mean_defined(ratios: impl Iterator<Item = Ratio>) -> Ratio {
    let defined: Vec<f64> = ratios.filter(|r| !r.undefined).map(|r| r.value).collect();
    if defined.is_empty() {
        Ratio {
            value: 1.0,
            undefined: true,
        }
    } else {
        Ratio {
            value: mean(defined.into_iter()),
            undefined: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemMetrics {
    pub counts: Counts,
    pub precision: Ratio,
    pub recall: Ratio,
    pub accepting_avg: f64,
    pub entropy: f64,
}

/// Both accountings from a single recognition pass over the test set.
pub fn evaluate(
    sys: &MemorySystem,
    test: &[Labelled],
    tolerance: usize,
) -> Result<(RegisterMetrics, SystemMetrics)> {
    let classes = sys.classes();
    let mut per_class = vec![Counts::default(); classes];
    let mut system = Counts::default();
    let mut accepted_total = 0usize;

    for inst in test {
        if inst.label >= classes {
            return Err(Error::ClassOutOfRange {
                class: inst.label,
                classes,
            });
        }
        let decision = sys.recognize(&inst.function, tolerance)?;
        accepted_total += decision.accepting.len();

        if decision.accepting.binary_search(&inst.label).is_err() {
            per_class[inst.label].fn_ += 1;
        }
        for &c in &decision.accepting {
            if c == inst.label {
                per_class[c].tp += 1;
            } else {
                per_class[c].fp += 1;
            }
        }

        match decision.class() {
            Some(c) if c == inst.label => system.tp += 1,
            Some(_) => {
                system.fp += 1;
                system.fn_ += 1;
            }
            None => system.fn_ += 1,
        }
    }

    let registers = RegisterMetrics {
        per_class: per_class
            .iter()
            .zip(sys.entropies())
            .map(|(counts, &entropy)| ClassMetrics {
                counts: *counts,
                precision: counts.precision(),
                recall: counts.recall(),
                entropy,
            })
            .collect(),
    };
    let system = SystemMetrics {
        counts: system,
        precision: system.precision(),
        recall: system.recall(),
        accepting_avg: if test.is_empty() {
            0.0
        } else {
            accepted_total as f64 / test.len() as f64
        },
        entropy: mean(sys.entropies().iter().copied()),
    };
    Ok((registers, system))
}

pub fn eval_register_metrics(
    sys: &MemorySystem,
    test: &[Labelled],
    tolerance: usize,
) -> Result<RegisterMetrics> {
    evaluate(sys, test, tolerance).map(|(r, _)| r)
}

pub fn eval_system_metrics(
    sys: &MemorySystem,
    test: &[Labelled],
    tolerance: usize,
) -> Result<SystemMetrics> {
    evaluate(sys, test, tolerance).map(|(_, s)| s)
}

pub fn quantize_all(q: &Quantizer, instances: &[&Instance], rows: usize) -> Result<Vec<Labelled>> {
    instances
        .iter()
        .map(|inst| {
            Ok(Labelled {
                label: inst.label,
                function: q.quantize(&inst.features, rows)?,
            })
        })
        .collect()
}

pub fn build_system(
    classes: usize,
    n: usize,
    rows: usize,
    remembered: &[Labelled],
) -> Result<MemorySystem> {
    let mut sys = MemorySystem::new(classes, n, rows)?;
    for inst in remembered {
        sys.register_instance(inst.label, &inst.function)?;
    }
    Ok(sys)
}

/// The three corpora of one fold with a quantizer calibrated on training data.
pub struct FoldData<'a> {
    pub fold: usize,
    pub quantizer: Quantizer,
    pub remember: Vec<&'a Instance>,
    pub test: Vec<&'a Instance>,
}

impl<'a> FoldData<'a> {
    pub fn new(ds: &'a Dataset, fold: usize) -> Result<Self> {
        let split = split_for_fold(ds, fold)?;
        let train = split.select(ds, Role::Train);
        let quantizer = Quantizer::fit(train.iter().map(|i| i.features.as_slice()))
            .map_err(|_| Error::Domain(format!("fold {fold} has an empty training corpus")))?;
        Ok(FoldData {
            fold,
            quantizer,
            remember: split.select(ds, Role::Remember),
            test: split.select(ds, Role::Test),
        })
    }

    /// Builds the system from `fill` percent of the remembered corpus and
    /// evaluates it on the test corpus.
    pub fn run(
        &self,
        classes: usize,
        rows: usize,
        fill: u32,
        tolerance: usize,
    ) -> Result<(RegisterMetrics, SystemMetrics)> {
        let remember = take_fraction(&self.remember, fill)?;
        let remember = quantize_all(&self.quantizer, &remember, rows)?;
        let test = quantize_all(&self.quantizer, &self.test, rows)?;
        let sys = build_system(classes, self.quantizer.n(), rows, &remember)?;
        evaluate(&sys, &test, tolerance)
    }
}

/// One line of a sweep table; `fold` is `None` for the across-fold mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub fold: Option<usize>,
    pub key: u32,
    pub entropy: f64,
    pub reg_precision: f64,
    pub reg_recall: f64,
    pub sys_precision: f64,
    pub sys_recall: f64,
    pub accepting_avg: f64,
    /// Registers with undefined precision (mean across folds in mean rows).
    pub reg_precision_undefined: f64,
    /// 1 if system precision is undefined (fraction of folds in mean rows).
    pub sys_precision_undefined: f64,
}

impl SweepRow {
    fn from_metrics(fold: usize, key: u32, reg: &RegisterMetrics, sys: &SystemMetrics) -> Self {
        SweepRow {
            fold: Some(fold),
            key,
            entropy: reg.mean_entropy(),
            reg_precision: reg.mean_precision().value,
            reg_recall: reg.mean_recall().value,
            sys_precision: sys.precision.value,
            sys_recall: sys.recall.value,
            accepting_avg: sys.accepting_avg,
            reg_precision_undefined: reg.undefined_precision() as f64,
            sys_precision_undefined: if sys.precision.undefined { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    /// Name of the swept parameter column, `m` or `fill_pct`.
    pub key_name: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Sorts per-fold rows by `(fold, key)` and appends unweighted means per key.
    fn assemble(key_name: &'static str, mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(|r| (r.fold, r.key));
        let mut by_key: BTreeMap<u32, Vec<&SweepRow>> = BTreeMap::new();
        for r in &rows {
            by_key.entry(r.key).or_default().push(r);
        }
        let means: Vec<SweepRow> = by_key
            .into_iter()
            .map(|(key, group)| {
                let avg = |f: fn(&SweepRow) -> f64| mean(group.iter().map(|r| f(r)));
                SweepRow {
                    fold: None,
                    key,
                    entropy: avg(|r| r.entropy),
                    reg_precision: avg(|r| r.reg_precision),
                    reg_recall: avg(|r| r.reg_recall),
                    sys_precision: avg(|r| r.sys_precision),
                    sys_recall: avg(|r| r.sys_recall),
                    accepting_avg: avg(|r| r.accepting_avg),
                    reg_precision_undefined: avg(|r| r.reg_precision_undefined),
                    sys_precision_undefined: avg(|r| r.sys_precision_undefined),
                }
            })
            .collect();
        rows.extend(means);
        SweepTable { key_name, rows }
    }

    pub fn means(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.fold.is_none())
    }

    pub fn mean_for(&self, key: u32) -> Option<&SweepRow> {
        self.means().find(|r| r.key == key)
    }

    pub fn to_csv(&self, params: &[(String, String)]) -> String {
        let mut out = param_header(params);
        writeln!(
            out,
            "fold,{},entropy,reg_precision,reg_recall,sys_precision,sys_recall,accepting_avg,\
             reg_precision_undefined,sys_precision_undefined",
            self.key_name
        )
        .unwrap();
        for r in &self.rows {
            let fold = r.fold.map_or_else(|| "mean".to_string(), |f| f.to_string());
            writeln!(
                out,
                "{fold},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.key,
                r.entropy,
                r.reg_precision,
                r.reg_recall,
                r.sys_precision,
                r.sys_recall,
                r.accepting_avg,
                r.reg_precision_undefined,
                r.sys_precision_undefined
            )
            .unwrap();
        }
        out
    }
}

/// `# key: value` lines echoing the run parameters.
fn param_header(params: &[(String, String)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("# {k}: {v}\n"))
        .collect()
}

fn prepare_folds<'a>(ds: &'a Dataset, folds: &[usize]) -> Result<Vec<FoldData<'a>>> {
    if folds.is_empty() {
        return Err(Error::Domain("no folds selected".into()));
    }
    folds.iter().map(|&f| FoldData::new(ds, f)).collect()
}

/// Register size sweep: full remembered corpus, `rows = 2^m` for each `m`.
pub fn experiment_rows_sweep(
    ds: &Dataset,
    folds: &[usize],
    m_values: &[u32],
    tolerance: usize,
) -> Result<SweepTable> {
    let data = prepare_folds(ds, folds)?;
    let cells: Vec<(&FoldData, u32)> = data
        .iter()
        .flat_map(|d| m_values.iter().map(move |&m| (d, m)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(d, m)| {
            let (reg, sys) = d.run(ds.classes(), rows_for(m)?, 100, tolerance)?;
            Ok(SweepRow::from_metrics(d.fold, m, &reg, &sys))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::assemble("m", rows))
}

/// Fill sweep at a fixed register size.
pub fn experiment_fill_sweep(
    ds: &Dataset,
    folds: &[usize],
    m: u32,
    fills: &[u32],
    tolerance: usize,
) -> Result<SweepTable> {
    let rows_count = rows_for(m)?;
    for &p in fills {
        dataset::check_fill(p)?;
    }
    let data = prepare_folds(ds, folds)?;
    let cells: Vec<(&FoldData, u32)> = data
        .iter()
        .flat_map(|d| fills.iter().map(move |&p| (d, p)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(d, p)| {
            let (reg, sys) = d.run(ds.classes(), rows_count, p, tolerance)?;
            Ok(SweepRow::from_metrics(d.fold, p, &reg, &sys))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::assemble("fill_pct", rows))
}

pub const MAX_M: u32 = 16;

pub fn rows_for(m: u32) -> Result<usize> {
    if m > MAX_M {
        return Err(Error::Domain(format!("m = {m} exceeds {MAX_M}")));
    }
    Ok(1usize << m)
}

/// Indices into `cues` of the first `per_class` test-role instances of each
/// class for `fold`, in file order.
pub fn select_cues(cues: &Dataset, fold: usize, per_class: usize) -> Result<Vec<usize>> {
    let split = split_for_fold(cues, fold)?;
    let mut taken = vec![0usize; cues.classes()];
    Ok(split
        .indices(Role::Test)
        .into_iter()
        .filter(|&i| {
            let t = &mut taken[cues.instances[i].label];
            *t += 1;
            *t <= per_class
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalRow {
    pub cue_id: usize,
    pub true_label: usize,
    pub fill_pct: u32,
    pub tolerance: usize,
    pub selected: Option<usize>,
    /// Retrieved function mapped back to feature space; `None` when rejected.
    pub features: Option<Vec<f64>>,
}

impl RetrievalRow {
    pub fn accepted(&self) -> bool {
        self.selected.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct RetrievalConfig {
    pub fold: usize,
    pub m: u32,
    pub fills: Vec<u32>,
    pub tolerances: Vec<usize>,
    pub seed: u64,
}

fn cell_rng(seed: u64, cue_id: usize, fill: u32, tolerance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cue_id as u64) << 24) | ((fill as u64) << 12) | tolerance as u64);
    rng
}

/// Retrieval sweep over fills and tolerances.
///
/// The memory is filled from the fold's remembered corpus of `memory`; cues
/// are the instances of `cues` at `cue_ids` (which may come from a different,
/// e.g. occluded, feature file with the same shape). Each `(cue, fill,
/// tolerance)` cell draws from its own RNG stream derived from the seed.
pub fn experiment_retrieval(
    memory: &Dataset,
    cues: &Dataset,
    cue_ids: &[usize],
    cfg: &RetrievalConfig,
) -> Result<Vec<RetrievalRow>> {
    if cues.n() != memory.n() || cues.classes() != memory.classes() {
        return Err(Error::Domain(format!(
            "cue file shape ({} features, {} classes) does not match memory data ({}, {})",
            cues.n(),
            cues.classes(),
            memory.n(),
            memory.classes()
        )));
    }
    let rows = rows_for(cfg.m)?;
    for &p in &cfg.fills {
        dataset::check_fill(p)?;
    }
    let fold = FoldData::new(memory, cfg.fold)?;
    let q = &fold.quantizer;
    let cue_fns = cue_ids
        .iter()
        .map(|&id| {
            let inst = cues
                .instances
                .get(id)
                .ok_or_else(|| Error::Domain(format!("cue id {id} out of range")))?;
            Ok((id, inst.label, q.quantize(&inst.features, rows)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_fill = cfg
        .fills
        .par_iter()
        .map(|&fill| {
            let remember = take_fraction(&fold.remember, fill)?;
            let remember = quantize_all(q, &remember, rows)?;
            let sys = build_system(memory.classes(), memory.n(), rows, &remember)?;
            let mut out = Vec::new();
            for (id, label, cue) in &cue_fns {
                for &tol in &cfg.tolerances {
                    let mut rng = cell_rng(cfg.seed, *id, fill, tol);
                    let decision = sys.retrieve(cue, tol, &mut rng)?;
                    let features = decision
                        .retrieved()
                        .map(|f| q.dequantize(f, rows))
                        .transpose()?;
                    out.push(RetrievalRow {
                        cue_id: *id,
                        true_label: *label,
                        fill_pct: fill,
                        tolerance: tol,
                        selected: decision.class(),
                        features,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<RetrievalRow> = per_fill.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.cue_id, r.fill_pct, r.tolerance));
    Ok(rows)
}

/// Accepted cues per `(fill, tolerance)`.
pub fn acceptance_counts(rows: &[RetrievalRow]) -> BTreeMap<(u32, usize), usize> {
    let mut counts = BTreeMap::new();
    for r in rows {
        *counts.entry((r.fill_pct, r.tolerance)).or_default() += usize::from(r.accepted());
    }
    counts
}

pub fn retrieval_csv(rows: &[RetrievalRow], n: usize, params: &[(String, String)]) -> String {
    let mut out = param_header(params);
    out.push_str("cue_id,true_label,fill_pct,tolerance,selected_label,accepted");
    for i in 0..n {
        write!(out, ",f{i}").unwrap();
    }
    out.push('\n');
    for r in rows {
        let selected = r.selected.map(|c| c.to_string()).unwrap_or_default();
        write!(
            out,
            "{},{},{},{},{},{}",
            r.cue_id,
            r.true_label,
            r.fill_pct,
            r.tolerance,
            selected,
            u8::from(r.accepted())
        )
        .unwrap();
        match &r.features {
            Some(xs) => {
                for &x in xs {
                    write!(out, ",{}", dataset::format_feature(x)).unwrap();
                }
            }
            None => out.push_str(&",".repeat(n)),
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
