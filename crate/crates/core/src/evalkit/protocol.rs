use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, decide, roc_auc};
use super::report::{FoldResult, ReportRow};
use crate::datakit::{kfold_split, FoldPlan, FoldSplit};
use crate::error::{KinError, Result};
use crate::kinmodels::{
    check_dims, permute_roles, train, ModelKind, ModelParams, TriadForm, TripleSample,
};
use crate::optim::SolverConfig;
use crate::seeds::substream_seed;
use crate::select::{fit_selection, group_map_for, GroupMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: ModelKind,
    pub block_level: bool,
    pub selection: Option<SelectionConfig>,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub form: TriadForm,
    pub seed: u64,
    /// Folds evaluated at once.
    pub jobs: usize,
}

impl ProtocolConfig {
    pub fn new(
        kind: ModelKind,
        block_level: bool,
        selection: Option<SelectionConfig>,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            block_level,
            selection,
            params: ModelParams::defaults(block_level),
            solver: SolverConfig::default(),
            form: TriadForm::ParentsChild,
            seed,
            jobs: 1,
        }
    }

    /// Row label such as `RSBM-block-FS`.
    pub fn method_name(&self) -> String {
        let mut name = match self.kind {
            ModelKind::ConcatBaseline => "Concat-baseline".to_string(),
            k => k.to_string().to_uppercase(),
        };
        if self.block_level {
            name.push_str("-block");
        }
        if self.selection.is_some() {
            name.push_str("-FS");
        }
        name
    }
}

/// Called with the fold number and every triple handed to a fit.
pub type FitAudit<'a> = &'a (dyn Fn(usize, &[TripleSample]) + Sync);

fn check_config(
    cfg: &ProtocolConfig,
    families: &[TripleSample],
    plan: &FoldPlan,
) -> Result<Option<GroupMap>> {
    cfg.solver.validate()?;
    if cfg.jobs == 0 {
        return Err(KinError::param("jobs", "must be at least 1"));
    }
    let p = &cfg.params;
    if !(p.lambda.is_finite() && p.lambda > 0.0) {
        return Err(KinError::param("lambda", "must be finite and > 0"));
    }
    if cfg.kind == ModelKind::Rsbm {
        if !(0.0..=1.0).contains(&p.alpha) {
            return Err(KinError::param("alpha", "must lie in [0, 1]"));
        }
        if p.iterations == 0 {
            return Err(KinError::param("iterations", "must be at least 1"));
        }
    }
    if cfg.kind == ModelKind::ConcatBaseline && cfg.block_level {
        return Err(KinError::Unsupported(
            "the concatenation baseline has no block form".into(),
        ));
    }
    plan.validate(families.len())?;
    for &(s, e) in &plan.ranges {
        let (test, train) = (e + 1 - s, families.len() - (e + 1 - s));
        if test < 2 || train < 2 {
            return Err(KinError::FoldPlan(format!(
                "fold [{s},{e}] leaves {train} training and {test} test families; each side needs 2"
            )));
        }
    }
    check_dims(families)?;
    let Some(sel) = cfg.selection else {
        return Ok(None);
    };
    if !(sel.gamma.is_finite() && sel.gamma > 0.0) {
        return Err(KinError::param("gamma", "must be finite and > 0"));
    }
    let gmap = group_map_for(families)?;
    if sel.k == 0 || sel.k > gmap.patches() {
        return Err(KinError::param(
            "K",
            format!("{} not in 1..={}", sel.k, gmap.patches()),
        ));
    }
    Ok(Some(gmap))
}

fn run_fold(
    cfg: &ProtocolConfig,
    split: &FoldSplit,
    gmap: Option<&GroupMap>,
    audit: Option<FitAudit>,
) -> Result<FoldResult> {
    if let Some(a) = audit {
        a(split.fold, &split.train);
    }
    let selection = match (cfg.selection, gmap) {
        (Some(sel), Some(gmap)) => Some(fit_selection(
            &split.train,
            sel.gamma,
            sel.k,
            gmap,
            &cfg.solver,
        )?),
        _ => None,
    };
    let verifier = train(
        cfg.kind,
        cfg.block_level,
        selection.as_ref(),
        &split.train,
        &cfg.params,
        &cfg.solver,
    )?;
    let scores = split
        .test
        .iter()
        .map(|t| verifier.predict(&t.father, &t.mother, &t.child))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<_> = split.test.iter().map(|t| t.label).collect();
    let decisions: Vec<_> = scores.iter().map(|&p| decide(p)).collect();
    let roc = roc_auc(&scores, &labels)?;
    Ok(FoldResult {
        fold: split.fold,
        accuracy: accuracy(&decisions, &labels)?,
        auc: roc.auc,
        roc_points: roc.points,
        n_train: split.train.len(),
        n_test: split.test.len(),
        test_scores: scores,
        test_labels: labels,
    })
}

/// Cross-validates one configuration on the positive `families` of one
/// relation. Selection and model are fit on each fold's training side only;
/// test triples are used for prediction alone. The whole configuration is
/// checked before the first fit.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    families: &[TripleSample],
    plan: &FoldPlan,
    relation: &str,
    audit: Option<FitAudit>,
) -> Result<ReportRow> {
    let gmap = check_config(cfg, families, plan)?;
    let families = permute_roles(families, cfg.form);
    let splits = kfold_split(&families, plan, substream_seed(cfg.seed, "negatives"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| KinError::Solver(format!("thread pool: {e}")))?;
    let folds = pool.install(|| {
        splits
            .par_iter()
            .map(|s| {
                run_fold(cfg, s, gmap.as_ref(), audit).map_err(|e| match e {
                    KinError::Solver(m) => KinError::Solver(format!("fold {}: {m}", s.fold)),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let relation = match cfg.form {
        TriadForm::ParentsChild => relation.to_string(),
        form => format!("{relation}/{form}"),
    };
    Ok(ReportRow::new(cfg.method_name(), relation, folds))
}
