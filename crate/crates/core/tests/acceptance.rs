//! The ten acceptance criteria, one pass/fail line each.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use common::{fixture, json, name_index, records, str_of, toy_kb};
use lfprobe::fl_ast::{normalize_ws, FormalProgram, KoplOp, KoplProgram, Language};
use lfprobe::harness::{
    build_gateway, exact_match, gold_outputs, render_json, render_markdown, run_generation, run_sweep,
    run_understanding, sample_seed, seed_set, CanonicalRecord, DatasetKind, EntityMention, LfField, RunConfig,
    RunContext, SweepGrid,
};
use lfprobe::kb_link::{build_name_index, link, link_program, vocab_from_kb, NameKind};
use lfprobe::kopl_engine::{evaluate, execute, KbStats, NodeValue, ToyKB};
use lfprobe::prompt::{build_generation_prompt, build_understanding_prompt, PromptTemplates, Task};
use lfprobe::retrieval::{skeleton_edit_distance, tokenize_nlq, Bm25Index, Bm25Params, CoverCandidate, GreedyCover};
use lfprobe::skeleton::{mask_nlq, skeleton_of, Skeleton};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn c1_prompt_fidelity() -> Outcome {
    let start = Instant::now();
    for name in ["sk1", "sk2", "sk3"] {
        let fx = json(&format!("prompts/{name}.json"));
        let language: Language = str_of(&fx, "language").parse()?;
        let parse = |t: &str| FormalProgram::parse(language, t).map_err(|e| format!("{name}: {e}"));
        let demos = fx["demos"]
            .as_array()
            .expect("demos")
            .iter()
            .map(|d| {
                Ok((
                    parse(str_of(d, "program"))?.understanding_text(),
                    str_of(d, "question").to_string(),
                ))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let target = parse(str_of(&fx, "target_program"))?.understanding_text();
        let built = build_understanding_prompt(&target, &demos, language);
        ensure(
            normalize_ws(&built.text) == normalize_ws(str_of(&fx, "expected_prompt")),
            || format!("{name} differs:\n{}", built.text),
        )?;
    }
    let fx = json("prompts/sk4.json");
    let demos = fx["demos"]
        .as_array()
        .expect("demos")
        .iter()
        .map(|d| {
            let p = FormalProgram::parse(Language::Kopl, str_of(d, "program")).map_err(|e| e.to_string())?;
            Ok((str_of(d, "question").to_string(), p.generation_text()))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let built = build_generation_prompt(str_of(&fx, "target_input"), &demos, Language::Kopl);
    ensure(
        normalize_ws(&built.text) == normalize_ws(str_of(&fx, "expected_prompt")),
        || format!("sk4 differs:\n{}", built.text),
    )?;
    within(Duration::from_secs(1), start)?;
    Ok("4/4 prompts match after whitespace normalization".into())
}

fn c2_skeleton_fidelity() -> Outcome {
    let fx = json("skeletons.json");
    let k = &fx["kopl"];
    let kp = FormalProgram::parse(Language::Kopl, str_of(k, "program")).map_err(|e| e.to_string())?;
    let s = &fx["sparql"];
    let sp =
        FormalProgram::parse_sparql_with_sexpr(str_of(s, "program"), str_of(s, "sexpr")).map_err(|e| e.to_string())?;
    let l = &fx["lambda_dcs"];
    let lp = FormalProgram::parse(Language::LambdaDcs, str_of(l, "program")).map_err(|e| e.to_string())?;
    let mut hits = 0;
    for (label, program, want) in [("kopl", &kp, k), ("sparql", &sp, s), ("lambda_dcs", &lp, l)] {
        let got = skeleton_of(program).map_err(|e| e.to_string())?.text;
        ensure(got == str_of(want, "skeleton"), || format!("{label}: got {got:?}"))?;
        hits += 1;
    }
    let n = &fx["nlq"];
    let mentions: Vec<String> = serde_json::from_value(n["mentions"].clone()).map_err(|e| e.to_string())?;
    let masked = mask_nlq(str_of(n, "question"), &mentions);
    ensure(masked.text == str_of(n, "skeleton"), || {
        format!("nlq: got {:?}", masked.text)
    })?;
    hits += 1;
    Ok(format!("{hits}/4 skeletons match"))
}

const OPS: [&str; 10] = [
    "FindAll",
    "Find",
    "FilterConcept",
    "FilterNum",
    "Relate",
    "And",
    "Or",
    "What",
    "Count",
    "QueryAttr",
];

fn random_skeleton(rng: &mut ChaCha8Rng) -> Skeleton {
    let len = rng.random_range(0..12);
    let tokens = (0..len)
        .map(|_| OPS[rng.random_range(0..OPS.len())].to_string())
        .collect();
    Skeleton::from_tokens(Language::Kopl, tokens)
}

fn c3_edit_distance_metric() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = |a: &Skeleton, b: &Skeleton| skeleton_edit_distance(a, b).expect("same language");
    let mut violations = Vec::new();
    let pairs = 2000;
    for i in 0..pairs {
        let (a, b, c) = (
            random_skeleton(&mut rng),
            random_skeleton(&mut rng),
            random_skeleton(&mut rng),
        );
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        if d(&a, &a) != 0 {
            violations.push(format!("{i}: identity"));
        }
        if (ab == 0) != (a.tokens == b.tokens) {
            violations.push(format!("{i}: zero iff equal"));
        }
        if ab != ba {
            violations.push(format!("{i}: symmetry"));
        }
        if ac > ab + bc {
            violations.push(format!("{i}: triangle"));
        }
        if ab < a.tokens.len().abs_diff(b.tokens.len()) {
            violations.push(format!("{i}: length bound"));
        }
    }
    ensure(violations.is_empty(), || {
        format!(
            "{} violations: {:?}",
            violations.len(),
            &violations[..violations.len().min(5)]
        )
    })?;
    within(Duration::from_secs(5), start)?;
    Ok(format!("{pairs} pairs, 0 violations"))
}

/// Independent greedy: repeatedly sort the open candidates by
/// (-gain, distance, key) and take the head.
fn oracle_greedy(target: &BTreeSet<String>, pool: &[CoverCandidate], k: usize) -> Vec<(String, usize)> {
    let mut covered: BTreeSet<String> = BTreeSet::new();
    let mut open: Vec<CoverCandidate> = pool.to_vec();
    let mut out = Vec::new();
    for _ in 0..k {
        if open.is_empty() {
            break;
        }
        open.sort_by_key(|c| {
            let gain = c
                .labels
                .iter()
                .filter(|l| target.contains(*l) && !covered.contains(*l))
                .count();
            (usize::MAX - gain, c.distance, c.key.clone())
        });
        let head = open.remove(0);
        let gain = head
            .labels
            .iter()
            .filter(|l| target.contains(*l) && !covered.contains(*l))
            .count();
        covered.extend(head.labels.iter().cloned());
        out.push((head.key, gain));
    }
    out
}

fn optimum(target: &BTreeSet<String>, pool: &[CoverCandidate], k: usize) -> usize {
    let n = pool.len();
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| {
            let mut u = BTreeSet::new();
            for (i, c) in pool.iter().enumerate() {
                if m & (1 << i) != 0 {
                    u.extend(c.labels.intersection(target).cloned());
                }
            }
            u.len()
        })
        .max()
        .unwrap_or(0)
}

fn check_cover_instance(target: &BTreeSet<String>, pool: &[CoverCandidate], k: usize) -> Result<(), String> {
    let steps = GreedyCover::new(target).select(pool, k);
    let trace: Vec<(String, usize)> = steps.iter().map(|s| (s.key.clone(), s.gain)).collect();
    let oracle = oracle_greedy(target, pool, k);
    if trace != oracle {
        return Err(format!("trace {trace:?} != oracle {oracle:?}"));
    }
    let got: usize = steps.iter().map(|s| s.gain).sum();
    let opt = optimum(target, pool, k);
    if (got as f64) < (1.0 - (-1f64).exp()) * opt as f64 - 1e-12 {
        return Err(format!("coverage {got} below bound for optimum {opt}"));
    }
    Ok(())
}

fn label_set(mask: u32) -> BTreeSet<String> {
    (0..8)
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| format!("L{b}"))
        .collect()
}

fn c4_greedy_cover() -> Outcome {
    let mut instances = 0usize;
    // exhaustive over every pool of up to 3 candidates drawn from 3 labels
    let target3 = label_set(0b111);
    for n in 1..=3u32 {
        for code in 0..(8u32.pow(n)) {
            let pool: Vec<CoverCandidate> = (0..n)
                .map(|i| CoverCandidate {
                    key: format!("k{i}"),
                    labels: label_set((code >> (3 * i)) & 0b111),
                    distance: ((code >> i) & 1) as usize,
                })
                .collect();
            for k in 1..=n as usize {
                check_cover_instance(&target3, &pool, k).map_err(|e| format!("exhaustive instance: {e}"))?;
                instances += 1;
            }
        }
    }
    // random pools up to 6 candidates over 8 labels
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20000 {
        let n = rng.random_range(1..=6);
        let target = label_set(rng.random_range(1..256));
        let pool: Vec<CoverCandidate> = (0..n)
            .map(|i| CoverCandidate {
                key: format!("k{}", rng.random_range(0..100) * 10 + i),
                labels: label_set(rng.random_range(0..256)),
                distance: rng.random_range(0..3),
            })
            .collect();
        let k = rng.random_range(1..=n);
        check_cover_instance(&target, &pool, k)?;
        instances += 1;
    }
    Ok(format!("{instances} instances, 0 violations"))
}

fn entity_ids(v: &NodeValue) -> Option<BTreeSet<usize>> {
    match v {
        NodeValue::Entities(s) => Some(s.ids()),
        _ => None,
    }
}

/// Small generator of entity-set programs over the toy KB, in (op, args)
/// post-order.
fn random_set_program(rng: &mut ChaCha8Rng, kb: &ToyKB, depth: usize, out: &mut Vec<(KoplOp, Vec<String>)>) {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        if rng.random_bool(0.5) {
            out.push((KoplOp::FindAll, vec![]));
        } else {
            let e = &kb.entities[rng.random_range(0..kb.entities.len())];
            out.push((KoplOp::Find, vec![e.name.clone()]));
        }
        return;
    }
    match rng.random_range(0..5) {
        0 | 1 => {
            random_set_program(rng, kb, depth - 1, out);
            random_set_program(rng, kb, depth - 1, out);
            let op = if rng.random_bool(0.5) { KoplOp::And } else { KoplOp::Or };
            out.push((op, vec![]));
        }
        2 => {
            random_set_program(rng, kb, depth - 1, out);
            let c = &kb.concepts[rng.random_range(0..kb.concepts.len())];
            out.push((KoplOp::FilterConcept, vec![c.name.clone()]));
        }
        3 => {
            random_set_program(rng, kb, depth - 1, out);
            let (key, value, op) = [
                ("population", "2000000", ">"),
                ("population", "60000000", "<"),
                ("duration", "120 minute", "<"),
            ][rng.random_range(0..3)];
            out.push((KoplOp::FilterNum, vec![key.into(), value.into(), op.into()]));
        }
        _ => {
            random_set_program(rng, kb, depth - 1, out);
            let preds: Vec<&str> = kb.predicates().into_iter().collect();
            let p = preds[rng.random_range(0..preds.len())];
            let dir = if rng.random_bool(0.5) { "forward" } else { "backward" };
            out.push((KoplOp::Relate, vec![p.into(), dir.into()]));
        }
    }
}

fn c5_executor_oracle() -> Outcome {
    let start = Instant::now();
    let kb = toy_kb();
    let manifest: KbStats = serde_json::from_value(json("kb/manifest.json")).map_err(|e| e.to_string())?;
    ensure(kb.stats() == manifest, || {
        format!("stats {:?} != manifest {manifest:?}", kb.stats())
    })?;
    let programs = json("kb/programs.json");
    let programs = programs.as_array().expect("program list");
    let mut correct = 0;
    let mut covered = BTreeSet::new();
    let mut wrong = Vec::new();
    for p in programs {
        let text = str_of(p, "program");
        let program = lfprobe::fl_ast::parse_kopl(text).map_err(|e| format!("{text}: {e}"))?;
        covered.extend(program.functions().iter().map(|f| f.op));
        match execute(&program, &kb) {
            Ok(a) if a.matches_text(str_of(p, "answer")) => correct += 1,
            Ok(a) => wrong.push(format!("{text} -> {}", a.to_text())),
            Err(e) => wrong.push(format!("{text} -> error {e}")),
        }
    }
    ensure(wrong.is_empty(), || format!("wrong answers: {wrong:?}"))?;
    ensure(covered.len() == 27, || {
        format!("only {} functions covered", covered.len())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut violations = Vec::new();
    while checked < 500 {
        let mut ops = Vec::new();
        random_set_program(&mut rng, &kb, 4, &mut ops);
        let program = KoplProgram::from_ops(ops).map_err(|e| e.to_string())?;
        let exec = match evaluate(&program, &kb) {
            Ok(x) => x,
            Err(_) => continue,
        };
        checked += 1;
        for (i, f) in program.functions().iter().enumerate() {
            let out = entity_ids(&exec.nodes[i]).expect("set program");
            let ins: Vec<BTreeSet<usize>> = f
                .deps
                .iter()
                .map(|&d| entity_ids(&exec.nodes[d]).expect("set input"))
                .collect();
            let ok = match f.op {
                KoplOp::And => out.is_subset(&ins[0]) && out.is_subset(&ins[1]),
                KoplOp::Or => out.is_superset(&ins[0]) && out.is_superset(&ins[1]),
                KoplOp::FilterConcept | KoplOp::FilterNum => out.is_subset(&ins[0]),
                _ => true,
            };
            if !ok {
                violations.push(format!("{} at {i}", f.op));
            }
        }
    }
    ensure(violations.is_empty(), || {
        format!("set invariant violations: {violations:?}")
    })?;
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "{correct}/{} oracle programs, {checked} random programs, 0 violations",
        programs.len()
    ))
}

fn kqa_context_inputs() -> (Vec<CanonicalRecord>, lfprobe::retrieval::SeedSet) {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_100.json");
    let seeds = seed_set(&records(DatasetKind::KqaPro, "datasets/kqa_pro_seed_50.json")).expect("seed set");
    (targets, seeds)
}

fn c6_end_to_end_identity() -> Outcome {
    let (targets, seeds) = kqa_context_inputs();
    ensure(targets.len() == 100, || format!("{} targets", targets.len()))?;
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    let ctx = |config: &RunConfig| -> Result<_, String> {
        let gw = build_gateway(config, gold_outputs(config.task, &targets), 0).map_err(|e| e.to_string())?;
        Ok(gw)
    };
    fn run_ctx<'a>(
        config: &'a RunConfig,
        seeds: &'a lfprobe::retrieval::SeedSet,
        targets: &'a [CanonicalRecord],
        templates: &'a PromptTemplates,
    ) -> RunContext<'a> {
        RunContext {
            config,
            seeds,
            targets,
            kb: None,
            vocab: None,
            templates,
        }
    }
    let em = |config: &RunConfig| -> Result<f64, String> {
        let report =
            run_generation(&run_ctx(config, &seeds, &targets, &templates), &ctx(config)?).map_err(|e| e.to_string())?;
        ensure(report.rows.len() == 100, || "row count".into())?;
        Ok(report.aggregates["exact_match"])
    };
    let echo = em(&config)?;
    ensure(echo == 1.0, || format!("echo_gold exact match {echo}"))?;
    config.backend = "mock:corrupt:1.0".into();
    let corrupt = em(&config)?;
    ensure(corrupt == 0.0, || format!("corrupt(1.0) exact match {corrupt}"))?;

    let config = RunConfig::new(Task::Understanding, Language::Kopl);
    let (pseudo, report) = run_understanding(&run_ctx(&config, &seeds, &targets, &templates), &ctx(&config)?)
        .map_err(|e| e.to_string())?;
    let equal = pseudo
        .iter()
        .zip(&targets)
        .filter(|(p, t)| p.question.as_deref() == Some(t.question.as_str()))
        .count();
    ensure(equal == 100 && report.aggregates["question_match"] == 1.0, || {
        format!("{equal}/100 questions equal")
    })?;
    Ok(format!(
        "generation EM {echo:.3} (echo), {corrupt:.3} (corrupt 1.0); understanding {equal}/100"
    ))
}

fn c7_bm25() -> Outcome {
    let fx = json("bm25_table.json");
    let docs: Vec<(String, Vec<String>)> = fx["docs"]
        .as_array()
        .expect("docs")
        .iter()
        .map(|d| {
            let tokens = tokenize_nlq(str_of(d, "text"));
            let want: Vec<String> = serde_json::from_value(d["tokens"].clone()).expect("tokens");
            (str_of(d, "id").to_string(), tokens, want)
        })
        .map(|(id, got, want)| {
            assert_eq!(got, want, "tokenization of {id}");
            (id, got)
        })
        .collect();
    let params = Bm25Params {
        k1: fx["k1"].as_f64().expect("k1"),
        b: fx["b"].as_f64().expect("b"),
    };
    let index = Bm25Index::build(docs.clone(), params).map_err(|e| e.to_string())?;
    let mut cells = 0;
    let mut worst = 0f64;
    for row in fx["table"].as_array().expect("table") {
        let q = tokenize_nlq(str_of(row, "query"));
        let got = index.scores(&q);
        for (g, w) in got.iter().zip(row["scores"].as_array().expect("scores")) {
            worst = worst.max((g - w.as_f64().expect("score")).abs());
            cells += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    for (i, (id, tokens)) in docs.iter().enumerate() {
        let top = index.query(tokens, 1);
        ensure(top.first().map(|t| t.0) == Some(i), || {
            format!("{id} does not retrieve itself")
        })?;
    }
    Ok(format!("{cells} cells within {worst:.1e}; 5/5 self-retrieval"))
}

fn c8_entity_linking() -> Outcome {
    let vocab = lfprobe::kb_link::load_vocab(&fixture("link/vocab_200.jsonl")).map_err(|e| e.to_string())?;
    ensure(vocab.len() == 200, || format!("{} vocab entries", vocab.len()))?;
    let index = build_name_index(vocab.clone()).map_err(|e| e.to_string())?;
    let misses: Vec<&str> = vocab
        .iter()
        .filter(|e| link(&index, &e.name, None).map(|h| h.id != e.id).unwrap_or(true))
        .map(|e| e.name.as_str())
        .collect();
    ensure(misses.is_empty(), || format!("not self-linked: {misses:?}"))?;

    let fx = json("link/err_flg_s.json");
    let relations = name_index("link/relations_30.jsonl");
    let hit = link(&relations, str_of(&fx, "hallucinated"), Some(NameKind::Relation)).map_err(|e| e.to_string())?;
    ensure(hit.id == str_of(&fx, "expected_link"), || {
        format!("linked to {}", hit.id)
    })?;
    let output = FormalProgram::parse(Language::Sparql, str_of(&fx, "output")).map_err(|e| e.to_string())?;
    let (linked, _) = link_program(&output, &relations);
    let text = linked.canonical();
    FormalProgram::parse(Language::Sparql, &text).map_err(|e| format!("post-link query does not parse: {e}"))?;
    ensure(exact_match(&text, str_of(&fx, "gold"), Language::Sparql) == 1, || {
        format!("post-link {text}")
    })?;
    Ok("200/200 self-links; hallucinated relation -> industry, post-link SPARQL parses".into())
}

fn c9_determinism() -> Outcome {
    let (targets, seeds) = kqa_context_inputs();
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    config.backend = "mock:corrupt:0.3:11".into();
    let render = || -> Result<(String, String), String> {
        let gw = build_gateway(&config, gold_outputs(Task::Generation, &targets), 0).map_err(|e| e.to_string())?;
        let ctx = RunContext {
            config: &config,
            seeds: &seeds,
            targets: &targets,
            kb: None,
            vocab: None,
            templates: &templates,
        };
        let r = run_generation(&ctx, &gw).map_err(|e| e.to_string())?;
        Ok((render_json(&r), render_markdown(&r)))
    };
    let (a, b) = (render()?, render()?);
    ensure(a == b, || "reports differ between identical runs".into())?;

    let synthetic: Vec<CanonicalRecord> = (0..20000)
        .map(|i| CanonicalRecord {
            id: format!("s{i:05}"),
            question: format!("how many things are there {i}"),
            lf: LfField {
                language: Language::Kopl,
                text: "FindAll().Count()".into(),
                sexpr: None,
                tagged: None,
            },
            entities: Vec::<EntityMention>::new(),
            answer: None,
            qtype: None,
        })
        .collect();
    let first = sample_seed(&synthetic, 0.01, 42).map_err(|e| e.to_string())?;
    let second = sample_seed(&synthetic, 0.01, 42).map_err(|e| e.to_string())?;
    ensure(first.len() == 200, || format!("sample has {} records", first.len()))?;
    let ids = |s: &lfprobe::retrieval::SeedSet| s.examples().iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    ensure(ids(&first) == ids(&second), || "seed samples differ".into())?;
    Ok("byte-identical reports; 1% of 20000 = 200, reproducible".into())
}

fn c10_sweep_shape() -> Outcome {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    let seeds = seed_set(&records(DatasetKind::KqaPro, "datasets/kqa_pro_seed_50.json")).map_err(|e| e.to_string())?;
    let kb = toy_kb();
    let vocab = build_name_index(vocab_from_kb(&kb)).map_err(|e| e.to_string())?;
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    config.backend = "mock:fixed:FindAll [func] Count".into();
    let grid = SweepGrid::standard();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: Some(&kb),
        vocab: Some(&vocab),
        templates: &templates,
    };
    let report = run_sweep(&ctx, &grid).map_err(|e| e.to_string())?;
    ensure(report.sweep.len() == 8 * 2 * 3, || {
        format!("{} cells", report.sweep.len())
    })?;
    let md = render_markdown(&report);
    let header = md
        .lines()
        .find(|l| l.starts_with("| Demonstrations"))
        .ok_or("no grid header")?;
    ensure(
        header.matches("w/o e.l.").count() == 3 && header.matches("w/ e.l.").count() == 3,
        || header.to_string(),
    )?;
    let rows: Vec<&str> = md
        .lines()
        .skip_while(|l| !l.starts_with("| Demonstrations"))
        .skip(2)
        .take_while(|l| l.starts_with('|'))
        .collect();
    let counts: Vec<String> = rows
        .iter()
        .map(|r| r.split('|').nth(1).unwrap_or("").trim().to_string())
        .collect();
    ensure(counts == ["0", "5", "10", "15", "20", "25", "30", "35"], || {
        format!("rows {counts:?}")
    })?;
    let zero = rows[0]
        .split('|')
        .skip(2)
        .filter(|c| !c.trim().is_empty())
        .collect::<Vec<_>>();
    ensure(zero.len() == 6 && zero.iter().all(|c| c.trim() == "0.0"), || {
        format!("0-demo row {:?}", rows[0])
    })?;
    Ok("8 rows x 2 strategy groups x 3 runs; 0-demo row all 0.0".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("1 prompt fidelity", c1_prompt_fidelity),
        ("2 skeleton fidelity", c2_skeleton_fidelity),
        ("3 edit-distance metric", c3_edit_distance_metric),
        ("4 greedy cover vs enumeration", c4_greedy_cover),
        ("5 KoPL executor oracle", c5_executor_oracle),
        ("6 end-to-end identity", c6_end_to_end_identity),
        ("7 BM25 correctness", c7_bm25),
        ("8 entity linking", c8_entity_linking),
        ("9 determinism", c9_determinism),
        ("10 sweep harness shape", c10_sweep_shape),
    ];
    let mut failed = Vec::new();
    // written to the raw stdout handle so the lines show even when the test passes
    let mut out = std::io::stdout().lock();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => {
                let _ = writeln!(out, "criterion {name}: PASS ({detail})");
            }
            Err(why) => {
                let _ = writeln!(out, "criterion {name}: FAIL ({why})");
                failed.push(name);
            }
        }
    }
    let _ = out.flush();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
