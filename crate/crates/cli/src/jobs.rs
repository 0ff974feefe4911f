use serde::{Deserialize, Serialize};

use lorenz_renorm::attractor::{
    birkhoff_averages, box_dimension, empirical_measure, escape_fraction, generations, generations_csv,
    length_decay, ratio_stats, transfer_times, uniform_starts, RatioStats,
};
use lorenz_renorm::bounds::{bounds_report, default_pi, invariance_scan, BoundsReport, InvarianceScanConfig};
use lorenz_renorm::combinatorics::{admissible, detect_monotone_with, kneading, DetectConfig, MonotoneType};
use lorenz_renorm::corpus::{build_corpus, CorpusConfig};
use lorenz_renorm::fixed_point::{find_fixed_point, verify_fixed_point, FixedPointConfig};
use lorenz_renorm::interval::Interval;
use lorenz_renorm::io::{CoefficientSpec, MapSpec};
use lorenz_renorm::island::{island_map, nested_island_search, type_scan, IslandResult, SliceConfig};
use lorenz_renorm::map::LorenzMap;
use lorenz_renorm::renorm::{renormalize_step, STEP_TOL};

use crate::{Artifacts, Failure};

type JobResult = Result<(), Failure>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Eval(EvalJob),
    Kneading(KneadingJob),
    Detect(DetectJob),
    Renormalize(RenormalizeJob),
    FixedPoint(FixedPointJob),
    Bounds(BoundsJob),
    Attractor(AttractorJob),
    Scan(ScanJob),
}

/// One type or a sequence of types.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TypeSpec {
    One(MonotoneType),
    Many(Vec<MonotoneType>),
}

impl TypeSpec {
    fn list(&self) -> Vec<MonotoneType> {
        match self {
            TypeSpec::One(t) => vec![*t],
            TypeSpec::Many(v) => v.clone(),
        }
    }

    /// The sequence repeated periodically to `len` entries.
    fn cycled(&self, len: usize) -> Vec<MonotoneType> {
        self.list().into_iter().cycle().take(len).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slice {
    pub c0: f64,
    pub grid: [usize; 2],
}

impl Default for Slice {
    fn default() -> Self {
        Slice { c0: 0.5, grid: [32, 32] }
    }
}

impl Slice {
    fn config(&self, rho: f64) -> SliceConfig {
        SliceConfig { c0: self.c0, rho, grid: self.grid }
    }
}

fn default_rho() -> f64 {
    2.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalJob {
    pub map: MapSpec,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KneadingJob {
    pub map: MapSpec,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectJob {
    pub map: MapSpec,
    #[serde(rename = "type")]
    pub kind: MonotoneType,
    #[serde(default)]
    pub detect: DetectConfig,
}

/// Maps come from the spec or from a nested island search on a slice.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormalizeJob {
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(rename = "type")]
    pub types: TypeSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub slice: Slice,
    #[serde(default)]
    pub detect: DetectConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointJob {
    #[serde(rename = "type")]
    pub types: TypeSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub slice: Slice,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Depth of the island search for the seed, in periods.
    #[serde(default = "default_seed_periods")]
    pub seed_periods: usize,
    /// Seed map; replaces the island search.
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub detect: DetectConfig,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_budget() -> usize {
    100
}

fn default_seed_periods() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsJob {
    /// Single map; without it the corpus is used.
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default, rename = "type")]
    pub kind: Option<MonotoneType>,
    /// Distortion budget; measured per map when absent.
    #[serde(default)]
    pub pi: Option<f64>,
    #[serde(default = "default_ks")]
    pub k: Vec<f64>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    /// Also run the invariance scan.
    #[serde(default)]
    pub invariance: Option<InvarianceScanConfig>,
    #[serde(default)]
    pub detect: DetectConfig,
}

fn default_ks() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorJob {
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(rename = "type")]
    pub types: TypeSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub slice: Slice,
    #[serde(default = "default_attractor_depth")]
    pub depth: usize,
    #[serde(default = "default_burn")]
    pub burn: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_starts")]
    pub transfer_starts: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Generation whose window is the target of the transfer map.
    #[serde(default = "default_transfer_level")]
    pub transfer_level: usize,
    #[serde(default = "default_birkhoff_starts")]
    pub birkhoff_starts: usize,
    #[serde(default)]
    pub detect: DetectConfig,
}

fn default_attractor_depth() -> usize {
    5
}
fn default_burn() -> usize {
    1000
}
fn default_samples() -> usize {
    1_000_000
}
fn default_bins() -> usize {
    256
}
fn default_starts() -> usize {
    10_000
}
fn default_cap() -> usize {
    100_000
}
fn default_transfer_level() -> usize {
    1
}
fn default_birkhoff_starts() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanJob {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_scan_slice")]
    pub slice: Slice,
    #[serde(default = "identity")]
    pub phi: CoefficientSpec,
    #[serde(default = "identity")]
    pub psi: CoefficientSpec,
    #[serde(default)]
    pub detect: DetectConfig,
}

fn default_scan_slice() -> Slice {
    Slice { c0: 0.5, grid: [256, 256] }
}

fn identity() -> CoefficientSpec {
    CoefficientSpec::Named("id".into())
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Job::Eval(_) => "eval",
            Job::Kneading(_) => "kneading",
            Job::Detect(_) => "detect",
            Job::Renormalize(_) => "renormalize",
            Job::FixedPoint(_) => "fixed-point",
            Job::Bounds(_) => "bounds",
            Job::Attractor(_) => "attractor",
            Job::Scan(_) => "scan",
        }
    }

    /// Checks that need no computation.
    pub fn validate(&self) -> Result<(), Failure> {
        let map = match self {
            Job::Eval(j) => Some(&j.map),
            Job::Kneading(j) => Some(&j.map),
            Job::Detect(j) => Some(&j.map),
            Job::Renormalize(j) => j.map.as_ref(),
            Job::FixedPoint(j) => j.map.as_ref(),
            Job::Bounds(j) => j.map.as_ref(),
            Job::Attractor(j) => j.map.as_ref(),
            Job::Scan(_) => None,
        };
        if let Some(m) = map {
            m.build()?;
        }
        let types = match self {
            Job::Renormalize(j) => Some(&j.types),
            Job::FixedPoint(j) => Some(&j.types),
            Job::Attractor(j) => Some(&j.types),
            _ => None,
        };
        if types.is_some_and(|t| t.list().is_empty()) {
            return Err(usage("type sequence is empty"));
        }
        match self {
            Job::Kneading(j) if j.depth == 0 => Err(usage("depth must be positive")),
            Job::Bounds(j) if j.map.is_some() != j.kind.is_some() => {
                Err(usage("bounds needs both map and type, or neither"))
            }
            Job::Attractor(j) if j.samples == 0 || j.bins == 0 || j.depth == 0 => {
                Err(usage("depth, samples and bins must be positive"))
            }
            Job::Attractor(j) if j.transfer_level > j.depth => Err(usage("transfer_level exceeds depth")),
            Job::Renormalize(j) if j.map.is_none() => Ok(j.slice.config(j.rho).validate()?),
            Job::FixedPoint(j) if j.map.is_none() => Ok(j.slice.config(j.rho).validate()?),
            Job::Attractor(j) if j.map.is_none() => Ok(j.slice.config(j.rho).validate()?),
            Job::Scan(j) => Ok(j.slice.config(j.rho).validate()?),
            _ => Ok(()),
        }
    }

    pub fn run(&self, seed: u64, out: &mut Artifacts) -> JobResult {
        match self {
            Job::Eval(j) => j.run(out),
            Job::Kneading(j) => j.run(out),
            Job::Detect(j) => j.run(out),
            Job::Renormalize(j) => j.run(out),
            Job::FixedPoint(j) => j.run(out),
            Job::Bounds(j) => j.run(out),
            Job::Attractor(j) => j.run(seed, out),
            Job::Scan(j) => j.run(out),
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// The spec map, or the center of a nested island on the slice.
fn locate(
    map: &Option<MapSpec>,
    slice: &Slice,
    rho: f64,
    types: &[MonotoneType],
    detect: &DetectConfig,
) -> Result<(LorenzMap, Option<IslandResult>), Failure> {
    if let Some(m) = map {
        return Ok((m.build()?, None));
    }
    let cfg = slice.config(rho);
    let island = nested_island_search(types, &cfg, types.len(), detect)?;
    let f = island_map(&cfg.base()?, &island)?;
    Ok((f, Some(island)))
}

impl EvalJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let f = self.map.build()?;
        let rows = self.x.iter().map(|&x| {
            let fx = f.eval(x).map(fmt).unwrap_or_default();
            vec![fmt(x), fx]
        });
        out.csv("eval.csv", &["x", "fx"], rows);
        Ok(())
    }
}

#[derive(Serialize)]
struct KneadingOut {
    kneading: lorenz_renorm::combinatorics::KneadingInvariant,
    admissible: bool,
    candidate_type: Option<MonotoneType>,
}

impl KneadingJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let f = self.map.build()?;
        let k = kneading(&f, self.depth)?;
        out.json(
            "kneading.json",
            &KneadingOut { admissible: admissible(&k), candidate_type: k.candidate_type(), kneading: k },
        );
        Ok(())
    }
}

impl DetectJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let f = self.map.build()?;
        let data = detect_monotone_with(&f, self.kind, &self.detect)?;
        out.json("detect.json", &serde_json::json!({ "data": data }));
        Ok(())
    }
}

#[derive(Serialize)]
struct StepOut {
    data: lorenz_renorm::combinatorics::RenormalizationData,
    residual: f64,
    output: LorenzMap,
}

impl RenormalizeJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let types = self.types.list();
        let (f, island) = locate(&self.map, &self.slice, self.rho, &types, &self.detect)?;
        let mut steps = Vec::with_capacity(types.len());
        let mut g = f.clone();
        for &kind in &types {
            let step = renormalize_step(&g, kind, &self.detect, None, STEP_TOL)?;
            g = step.output.clone();
            steps.push(StepOut { data: step.data, residual: step.residual, output: step.output });
        }
        out.json("renormalize.json", &serde_json::json!({ "input": f, "island": island, "steps": steps }));
        Ok(())
    }
}

impl FixedPointJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let types = self.types.list();
        let seed_types = self.types.cycled(types.len() * self.seed_periods.max(1));
        let (seed, island) = locate(&self.map, &self.slice, self.rho, &seed_types, &self.detect)?;
        let cfg = FixedPointConfig { tol: self.tol, budget: self.budget, detect: self.detect, ..Default::default() };
        let r = find_fixed_point(&types, &seed, &cfg)?;
        let check = verify_fixed_point(&r, &self.detect, cfg.grid)?;
        out.json(
            "fixed_point.json",
            &serde_json::json!({
                "seed": seed,
                "island": island,
                "map": r.map,
                "types": r.types,
                "distance": r.distance,
                "iterations": r.iterations,
                "verification_distance": check,
                "windows": r.windows,
            }),
        );
        let rows = r.trace.iter().enumerate().map(|(k, d)| vec![(k + 1).to_string(), fmt(*d)]);
        out.csv("trace.csv", &["iteration", "distance"], rows);
        Ok(())
    }
}

#[derive(Serialize)]
struct BoundsRow {
    rho: f64,
    c: f64,
    k: f64,
    report: BoundsReport,
}

impl BoundsJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let mut cases = Vec::new();
        let mut misses = Vec::new();
        match (&self.map, self.kind) {
            (Some(m), Some(kind)) => {
                let f = m.build()?;
                let d = detect_monotone_with(&f, kind, &self.detect)?;
                cases.push((f, d));
            }
            _ => {
                let corpus = build_corpus(&self.corpus, &self.detect);
                cases.extend(corpus.entries.into_iter().map(|e| (e.map, e.data)));
                misses = corpus.misses;
            }
        }
        let mut rows = Vec::with_capacity(cases.len() * self.k.len());
        for (f, d) in &cases {
            let pi = self.pi.unwrap_or_else(|| default_pi(f));
            for &k in &self.k {
                let report = bounds_report(f, d, pi, k)?;
                rows.push(BoundsRow { rho: f.rho(), c: f.c(), k, report });
            }
        }
        let violations: usize = rows.iter().map(|r| r.report.violations().len()).sum();
        let invariance = match &self.invariance {
            Some(cfg) => Some(invariance_scan(cfg, &self.detect)?),
            None => None,
        };
        let mut header: Vec<String> = vec!["rho".into(), "c".into(), "k".into()];
        header.extend(BoundsReport::csv_header().split(',').map(String::from));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let csv_rows = rows.iter().map(|r| {
            let mut row = vec![fmt(r.rho), fmt(r.c), fmt(r.k)];
            row.extend(r.report.csv_row().split(',').map(String::from));
            row
        });
        out.csv("bounds.csv", &header_refs, csv_rows.collect::<Vec<_>>());
        out.json(
            "bounds.json",
            &serde_json::json!({
                "maps": cases.len(),
                "violations": violations,
                "misses": misses,
                "reports": rows,
                "invariance": invariance,
            }),
        );
        Ok(())
    }
}

#[derive(Serialize)]
struct LevelOut {
    level: usize,
    count: usize,
    total_length: f64,
    ratios: Option<RatioStats>,
}

impl AttractorJob {
    fn run(&self, seed: u64, out: &mut Artifacts) -> JobResult {
        let types = self.types.cycled(self.depth);
        let (f, island) = locate(&self.map, &self.slice, self.rho, &types, &self.detect)?;
        let gens = generations(&f, &types, self.depth, &self.detect)?;
        let fams = &gens.families;
        let levels: Vec<LevelOut> = fams
            .iter()
            .enumerate()
            .map(|(k, fam)| LevelOut {
                level: fam.level,
                count: fam.intervals.len(),
                total_length: fam.total_length,
                ratios: (k > 0).then(|| ratio_stats(fam, &fams[k - 1])),
            })
            .collect();
        let dimension = box_dimension(&fams[1..]).ok();
        let decay = length_decay(fams).ok();
        let support = fams.last();
        let measure = empirical_measure(&f, self.burn, self.samples, self.bins, seed, support)?;
        let birkhoff = birkhoff_averages(&f, self.birkhoff_starts, self.burn, self.samples / 10, seed);
        let transfer = match fams.get(self.transfer_level) {
            Some(fam) => {
                let starts = uniform_starts(self.transfer_starts, seed);
                let samples = transfer_times(&f, fam.window, &starts, self.cap)?;
                Some(serde_json::json!({
                    "window": fam.window,
                    "escape_fraction": escape_fraction(&samples),
                    "max_tau": samples.iter().filter_map(|s| s.tau).max(),
                    "mean_tau": mean_tau(&samples),
                }))
            }
            None => None,
        };
        out.json(
            "attractor.json",
            &serde_json::json!({
                "map": f,
                "island": island,
                "diagnostic": gens.diagnostic,
                "levels": levels,
                "box_dimension": dimension.map(|(d, s)| serde_json::json!({ "estimate": d, "stderr": s })),
                "length_decay": decay,
                "measure": {
                    "tv": measure.tv,
                    "restarts": measure.restarts,
                    "inside": measure.inside,
                },
                "birkhoff": birkhoff,
                "transfer": transfer,
                "families": fams,
            }),
        );
        let csv = generations_csv(fams);
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        out.csv("generations.csv", &header, rows);
        let bins = self.bins as f64;
        let rows = (0..self.bins).map(|b| {
            let cell = Interval { lo: b as f64 / bins, hi: (b + 1) as f64 / bins };
            vec![b.to_string(), fmt(cell.lo), fmt(cell.hi), fmt(measure.minus[b]), fmt(measure.plus[b])]
        });
        out.csv("histogram.csv", &["bin", "lo", "hi", "minus", "plus"], rows);
        Ok(())
    }
}

fn mean_tau(samples: &[lorenz_renorm::attractor::TransferSample]) -> Option<f64> {
    let taus: Vec<usize> = samples.iter().filter_map(|s| s.tau).collect();
    (!taus.is_empty()).then(|| taus.iter().sum::<usize>() as f64 / taus.len() as f64)
}

impl ScanJob {
    fn run(&self, out: &mut Artifacts) -> JobResult {
        let cells = type_scan(&self.slice.config(self.rho), &self.detect, &self.phi.build()?, &self.psi.build()?)?;
        let mut counts = std::collections::BTreeMap::<String, usize>::new();
        for c in &cells {
            let key = c.kind.map_or_else(|| "none".to_string(), |k| format!("{},{}", k.n, k.m));
            *counts.entry(key).or_default() += 1;
        }
        let rows = cells.iter().map(|c| {
            let (n, m) = c.kind.map_or((String::new(), String::new()), |k| (k.n.to_string(), k.m.to_string()));
            vec![c.i.to_string(), c.j.to_string(), fmt(c.u), fmt(c.v), n, m]
        });
        out.csv("scan.csv", &["i", "j", "u", "v", "n", "m"], rows.collect::<Vec<_>>());
        out.json("scan.json", &serde_json::json!({ "cells": cells.len(), "counts": counts }));
        Ok(())
    }
}
