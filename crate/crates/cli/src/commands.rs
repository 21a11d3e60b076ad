use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kinverify::datakit::{
    face_features, generate_negatives, load_families, load_manifest, member_key, write_manifest,
    FamilyRecord, FeatureStore, FoldPlan, MemberRef, Relation, SynthConfig, SynthGenerator,
    SynthMode, DEFAULT_FOLDS,
};
use kinverify::evalkit::{decide, run_protocol, ProtocolConfig, ProtocolReport, SelectionConfig};
use kinverify::kinmodels::{
    decode_model, encode_model, permute_roles, train, ModelKind, ModelParams, ModelSidecar,
    ParentRole, TripleSample, MODEL_FORMAT_VERSION,
};
use kinverify::optim::SolverConfig;
use kinverify::select::{fit_selection, group_map_for};
use kinverify::substream_seed;
use serde_json::json;

use crate::{Cli, Command, ModelArgs, PredictMode};

pub fn run(cli: Cli) -> Result<()> {
    let store = FeatureStore::new(&cli.cache);
    match cli.command {
        Command::Extract { manifest } => extract(&store, &manifest),
        Command::Train {
            manifest,
            out,
            model,
        } => train_cmd(&store, &manifest, &out, &model),
        Command::Eval {
            manifest,
            out_dir,
            plan,
            roc,
            jobs,
            model,
        } => eval(
            &store,
            &manifest,
            &out_dir,
            plan.as_deref(),
            roc.as_deref(),
            jobs as usize,
            &model,
        ),
        Command::Predict {
            model,
            father,
            mother,
            child,
            mode,
        } => predict(
            &store,
            &model,
            father.as_deref(),
            mother.as_deref(),
            &child,
            mode,
        ),
        Command::Synth {
            out,
            mode,
            dim,
            n_pos,
            rank,
            noise,
            patches,
            informative,
            relation,
            seed,
        } => {
            let mode = match mode.as_str() {
                "symmetric" => SynthMode::Symmetric,
                "stacked" => SynthMode::Stacked,
                "resemblance" => SynthMode::Resemblance {
                    favored: 0.8,
                    other: 0.2,
                },
                "patches" => SynthMode::Patches {
                    patches,
                    informative,
                    shift: 0.6,
                },
                other => {
                    bail!("unknown synth mode `{other}` (symmetric, stacked, resemblance, patches)")
                }
            };
            let cfg = SynthConfig::symmetric(dim, rank, noise).with_mode(mode);
            synth(&store, &out, cfg, n_pos, relation, seed)
        }
    }
}

fn manifest_base(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn extract(store: &FeatureStore, manifest: &Path) -> Result<()> {
    let records = load_manifest(manifest)?;
    let base = manifest_base(manifest);
    let mut seen = BTreeSet::new();
    let (mut fresh, mut cached) = (0usize, 0usize);
    for r in &records {
        for member in [&r.father, &r.mother, &r.child] {
            let mref = MemberRef::parse(member, &base);
            if !seen.insert(member_key(&mref)) {
                continue;
            }
            let (_, hit) = face_features(Some(store), &mref, true)
                .with_context(|| format!("family `{}`", r.family_id))?;
            if hit {
                cached += 1;
            } else {
                fresh += 1;
            }
        }
    }
    println!(
        "{} feature records for {} families ({fresh} extracted, {cached} already cached) in {}",
        fresh + cached,
        records.len(),
        store.dir().display()
    );
    Ok(())
}

struct RelationData {
    relation: Relation,
    records: Vec<FamilyRecord>,
    families: Vec<TripleSample>,
}

fn load_by_relation(
    store: &FeatureStore,
    manifest: &Path,
    only: Option<Relation>,
) -> Result<Vec<RelationData>> {
    let records = load_manifest(manifest)?;
    let base = manifest_base(manifest);
    let mut out = Vec::new();
    for relation in Relation::ALL {
        if only.is_some_and(|r| r != relation) {
            continue;
        }
        let recs: Vec<&FamilyRecord> = records.iter().filter(|r| r.relation == relation).collect();
        if recs.is_empty() {
            continue;
        }
        let families = load_families(&recs, &base, Some(store))?;
        out.push(RelationData {
            relation,
            records: recs.into_iter().cloned().collect(),
            families,
        });
    }
    if out.is_empty() {
        bail!("{} has no families to use", manifest.display());
    }
    Ok(out)
}

fn params_of(m: &ModelArgs) -> ModelParams {
    let mut p = ModelParams::defaults(m.block_level);
    if let Some(l) = m.lambda {
        p.lambda = l;
    }
    p.alpha = m.alpha;
    p.iterations = m.iterations as usize;
    p
}

fn solver_of(m: &ModelArgs) -> SolverConfig {
    SolverConfig {
        seed: substream_seed(m.seed, "solver"),
        ..SolverConfig::default()
    }
}

fn check_combination(m: &ModelArgs) -> Result<()> {
    if m.model == ModelKind::ConcatBaseline && m.block_level {
        bail!("--block-level is not available for concat-baseline");
    }
    Ok(())
}

fn train_cmd(store: &FeatureStore, manifest: &Path, out: &Path, m: &ModelArgs) -> Result<()> {
    check_combination(m)?;
    let data = load_by_relation(store, manifest, m.relation)?;
    let negative_seed = substream_seed(m.seed, "negatives");
    let mut triples = Vec::new();
    for d in &data {
        let families = permute_roles(&d.families, m.form);
        let negatives = generate_negatives(
            &families,
            substream_seed(negative_seed, d.relation.as_str()),
        )
        .with_context(|| format!("relation {}", d.relation))?;
        triples.extend(families);
        triples.extend(negatives);
    }
    let solver = solver_of(m);
    let selection = if m.feature_selection {
        let gmap = group_map_for(&triples)?;
        let sel = fit_selection(&triples, m.gamma, m.k as usize, &gmap, &solver)?;
        if sel.degenerate {
            log::warn!("feature selection found no informative patches");
        }
        Some(sel)
    } else {
        None
    };
    let params = params_of(m);
    let verifier = train(
        m.model,
        m.block_level,
        selection.as_ref(),
        &triples,
        &params,
        &solver,
    )?;
    fs::write(out, encode_model(&verifier))
        .with_context(|| format!("writing {}", out.display()))?;
    let sidecar = ModelSidecar {
        format_version: MODEL_FORMAT_VERSION,
        kind: m.model,
        block_level: m.block_level,
        feature_selection: m.feature_selection,
        params,
        k: m.feature_selection.then_some(m.k as usize),
        gamma: m.feature_selection.then_some(m.gamma),
        seed: m.seed,
        selection,
    };
    let sidecar_path = sidecar_path(out);
    fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )
    .with_context(|| format!("writing {}", sidecar_path.display()))?;
    let method = protocol_config(m, 1).method_name();
    println!(
        "trained {method} on {} triples -> {}",
        triples.len(),
        out.display()
    );
    Ok(())
}

fn sidecar_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn protocol_config(m: &ModelArgs, jobs: usize) -> ProtocolConfig {
    let selection = m.feature_selection.then_some(SelectionConfig {
        k: m.k as usize,
        gamma: m.gamma,
    });
    let mut cfg = ProtocolConfig::new(m.model, m.block_level, selection, m.seed);
    cfg.params = params_of(m);
    cfg.solver = solver_of(m);
    cfg.form = m.form;
    cfg.jobs = jobs;
    cfg
}

fn eval(
    store: &FeatureStore,
    manifest: &Path,
    out_dir: &Path,
    plan: Option<&Path>,
    roc: Option<&Path>,
    jobs: usize,
    m: &ModelArgs,
) -> Result<()> {
    check_combination(m)?;
    let data = load_by_relation(store, manifest, m.relation)?;
    let cfg = protocol_config(m, jobs);
    let mut report = ProtocolReport::default();
    for d in &data {
        let n = d.families.len();
        let fold_plan = match plan {
            Some(p) => FoldPlan::load(p, d.relation)?,
            None => match FoldPlan::from_records(&d.records.iter().collect::<Vec<_>>())? {
                Some(p) => p,
                None => FoldPlan::even(n, DEFAULT_FOLDS)?,
            },
        };
        let row = run_protocol(&cfg, &d.families, &fold_plan, d.relation.as_str(), None)
            .with_context(|| format!("evaluating {} on {}", cfg.method_name(), d.relation))?;
        report.rows.push(row);
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let table = report.to_text_table();
    fs::write(out_dir.join("report.json"), report.to_json()?)?;
    fs::write(out_dir.join("report.txt"), &table)?;
    if let Some(path) = roc {
        report.write_roc_csv(path)?;
    }
    print!("{table}");
    Ok(())
}

fn predict(
    store: &FeatureStore,
    model: &Path,
    father: Option<&str>,
    mother: Option<&str>,
    child: &str,
    mode: PredictMode,
) -> Result<()> {
    let bytes = fs::read(model).with_context(|| format!("reading {}", model.display()))?;
    let verifier = decode_model(&bytes).with_context(|| format!("loading {}", model.display()))?;
    let here = PathBuf::new();
    let load = |s: &str| -> Result<_> {
        Ok(face_features(Some(store), &MemberRef::parse(s, &here), false)?.0)
    };
    let c = load(child)?;
    let (probability, mode_name) = match mode {
        PredictMode::Triple => {
            let f = load(need(father, "father")?)?;
            let m = load(need(mother, "mother")?)?;
            (verifier.predict(&f, &m, &c)?, "triple")
        }
        PredictMode::PairFather => {
            let f = load(need(father, "father")?)?;
            (
                verifier.predict_pair(&f, &c, ParentRole::Father)?,
                "pair:father",
            )
        }
        PredictMode::PairMother => {
            let m = load(need(mother, "mother")?)?;
            (
                verifier.predict_pair(&m, &c, ParentRole::Mother)?,
                "pair:mother",
            )
        }
    };
    let out = json!({
        "mode": mode_name,
        "probability": probability,
        "decision": decide(probability),
    });
    println!("{out}");
    Ok(())
}

fn need<'a>(v: Option<&'a str>, flag: &str) -> Result<&'a str> {
    v.with_context(|| format!("this mode needs --{flag}"))
}

fn synth(
    store: &FeatureStore,
    out: &Path,
    cfg: SynthConfig,
    n_pos: usize,
    relation: Relation,
    seed: u64,
) -> Result<()> {
    let generator = SynthGenerator::new(cfg, seed)?;
    let data = generator.sample(n_pos, substream_seed(seed, "synth"))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    // Distinct configurations never share cache keys.
    let tag = format!(
        "{:016x}",
        substream_seed(seed, &serde_json::to_string(&cfg)?)
    );
    let mut records = Vec::with_capacity(data.positives.len());
    for t in &data.positives {
        let key = |role: &str| format!("synth/{tag}/{}/{role}", t.family_id);
        for (role, v) in [
            ("father", &t.father),
            ("mother", &t.mother),
            ("child", &t.child),
        ] {
            store.write(&key(role), v)?;
        }
        records.push(FamilyRecord {
            family_id: t.family_id.clone(),
            relation,
            father: format!("feature:{}", key("father")),
            mother: format!("feature:{}", key("mother")),
            child: format!("feature:{}", key("child")),
            fold: None,
        });
    }
    let manifest = out.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    let truth = json!({
        "config": cfg,
        "seed": seed,
        "n_pos": n_pos,
        "planted_patches": data.truth.planted,
    });
    fs::write(
        out.join("truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;
    println!(
        "{} families -> {} (features in {})",
        records.len(),
        manifest.display(),
        store.dir().display()
    );
    Ok(())
}
