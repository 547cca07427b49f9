use std::collections::BTreeSet;
use std::time::Duration;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radstruct::adherence::{check_adherence, NegativeFindingPatterns};
use radstruct::cost::{compare_costs, measure_run, reference_records, CostMode, RateConfig, RunCostRecord};
use radstruct::eval::{aggregate_results, score_findings, AveragingMode, Dataset, EvalConfig, Evaluator, NativeMetric, SampleInput};
use radstruct::lexical::{
    bleu, compute_label_f1, lcs_len, rouge_l, tokenize, BleuConfig, F1Averaging, LabelPrediction, LabelStatus, MetricId,
};
use radstruct::prompt::{build_icl_prompt, build_prefix_prompt, IclExample, PromptTemplate};
use radstruct::report::{parse_structured_report, serialize_report, LineRole, ParseError};
use radstruct::scorer::{ClientConfig, MockScorer, ScoreRequest, ScorerClient, TextPair};
use radstruct::synthetic::ReportGenerator;
use radstruct::template::{TemplateSpec, ORGAN_HEADERS};

fn spec() -> TemplateSpec {
    TemplateSpec::chest_xray()
}

fn report_line() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["Findings:", "Impression:", "History:", "EXAM TYPE:", "technique:", "Comparison: none"])
            .prop_map(str::to_string),
        prop::sample::select(ORGAN_HEADERS.to_vec()).prop_map(|h| format!("{h}:")),
        prop::sample::select(vec!["Lungs:", "PLEURA:", "Cardiovasculr:", "Heart:", "Other:"]).prop_map(str::to_string),
        "[a-z ]{1,20}".prop_map(|t| format!("- {t}")),
        (0u64..6, "[a-z ]{0,15}").prop_map(|(n, t)| format!("{n}. {t}")),
        "[a-zA-Z0-9 ,.:;()_-]{0,25}",
        Just(String::new()),
    ]
}

fn report_text() -> impl Strategy<Value = String> {
    prop::collection::vec(report_line(), 0..25).prop_map(|lines| lines.join("\n"))
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["no", "acute", "small", "left", "effusion", "clear", "heart", "tube"]), 1..10)
        .prop_map(|w| w.join(" "))
}

fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parsing_is_total(text in report_text()) {
        match parse_structured_report(&text, &spec()) {
            Err(ParseError::EmptyInput) => prop_assert!(text.trim().is_empty()),
            Ok(report) => {
                prop_assert_eq!(report.lines.len(), text.split('\n').count());
                let blanks = text.split('\n').filter(|l| l.trim().is_empty()).count();
                prop_assert_eq!(report.lines.iter().filter(|r| matches!(r, LineRole::Blank)).count(), blanks);
                let canon: Vec<_> = report.recognized_systems().map(|(c, _)| c).collect();
                let unique: BTreeSet<_> = canon.iter().collect();
                prop_assert_eq!(unique.len(), canon.len());
                for item in &report.impression {
                    prop_assert!(!item.text.trim().is_empty());
                }
            }
        }
    }

    #[test]
    fn serialization_reaches_a_fixed_point(text in report_text()) {
        let spec = spec();
        if let Ok(first) = parse_structured_report(&text, &spec) {
            let once = serialize_report(&first, &spec);
            if let Ok(second) = parse_structured_report(&once, &spec) {
                prop_assert_eq!(serialize_report(&second, &spec), once);
            }
        }
    }

    #[test]
    fn findings_ignore_system_order(seed in any::<u64>(), perm in any::<u64>()) {
        let mut g = ReportGenerator::new(seed);
        let reference = g.report();
        let hyp = g.hypothesis(&reference);
        let mut hyp_shuffled = hyp.clone();
        hyp_shuffled.findings = shuffled(&hyp.findings, perm);
        let mut ref_shuffled = reference.clone();
        ref_shuffled.findings = shuffled(&reference.findings, perm ^ 1);
        let p = |r: &radstruct::synthetic::SyntheticReport| parse_structured_report(&r.render(), &spec()).unwrap();
        for averaging in [AveragingMode::Union, AveragingMode::Reference] {
            for metric in [NativeMetric::bleu(), NativeMetric::rouge_l()] {
                let a = score_findings(&p(&hyp), &p(&reference), &metric, averaging).unwrap();
                let b = score_findings(&p(&hyp_shuffled), &p(&ref_shuffled), &metric, averaging).unwrap();
                prop_assert!((a.value - b.value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn renaming_never_helps(seed in any::<u64>(), pick in any::<prop::sample::Index>(), name in "[A-Z][a-z]{2,9}") {
        let mut g = ReportGenerator::new(seed);
        let reference = g.report();
        let hyp = g.hypothesis(&reference);
        prop_assume!(!hyp.findings.is_empty());
        let i = pick.index(hyp.findings.len());
        let mut renamed = hyp.clone();
        renamed.findings[i].header = format!("Zz{name}");
        let spec = spec();
        let r = parse_structured_report(&reference.render(), &spec).unwrap();
        let h = parse_structured_report(&hyp.render(), &spec).unwrap();
        let h2 = parse_structured_report(&renamed.render(), &spec).unwrap();
        let metric = NativeMetric::rouge_l();
        let before = score_findings(&h, &r, &metric, AveragingMode::Union).unwrap();
        let after = score_findings(&h2, &r, &metric, AveragingMode::Union).unwrap();
        prop_assert!(after.value <= before.value + 1e-12);
        let key = h.findings[i].header_canonical.clone();
        if let Some(system_score) = key.and_then(|k| before.per_system.get(&k).map(|s| s.value)) {
            if system_score > 0.0 {
                prop_assert!(after.value < before.value);
            }
        }
    }

    #[test]
    fn rouge_is_symmetric_and_bounded(a in words(), b in words()) {
        let (x, y) = (tokenize(&a), tokenize(&b));
        let ab = rouge_l(&x, &y, 1.0).unwrap().value;
        let ba = rouge_l(&y, &x, 1.0).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(lcs_len(x.tokens(), y.tokens()) <= x.len().min(y.len()));
        prop_assert_eq!(rouge_l(&x, &x, 1.0).unwrap().value, 1.0);
    }

    #[test]
    fn bleu_is_bounded(a in words(), b in words()) {
        let (x, y) = (tokenize(&a), tokenize(&b));
        let v = bleu(&x, &y, BleuConfig::default()).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((bleu(&x, &x, BleuConfig::default()).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_f1_identity_and_symmetry(
        a in prop::collection::btree_set((0usize..6, 0usize..3), 0..6),
        b in prop::collection::btree_set((0usize..6, 0usize..3), 0..6),
    ) {
        let statuses = [LabelStatus::Present, LabelStatus::Absent, LabelStatus::Uncertain];
        let to_set = |s: &BTreeSet<(usize, usize)>| -> BTreeSet<LabelPrediction> {
            s.iter().map(|&(l, st)| LabelPrediction::new(format!("L{l}"), statuses[st])).collect()
        };
        let (x, y) = (to_set(&a), to_set(&b));
        prop_assert_eq!(compute_label_f1(&x, &x, None, F1Averaging::Micro).unwrap().value, 1.0);
        let xy = compute_label_f1(&x, &y, None, F1Averaging::Micro).unwrap().value;
        let yx = compute_label_f1(&y, &x, None, F1Averaging::Micro).unwrap().value;
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&xy));
        let m = compute_label_f1(&x, &y, None, F1Averaging::Macro).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn cost_ratios_compose(scale in prop::collection::vec(0.01f64..100.0, 9)) {
        let base = reference_records();
        let scaled = |r: &RunCostRecord, k: &[f64]| RunCostRecord {
            inference_seconds_per_sample: r.inference_seconds_per_sample * k[0],
            inference_cost_per_sample: r.inference_cost_per_sample * k[1],
            inference_co2_g_per_sample: r.inference_co2_g_per_sample * k[2],
            ..r.clone()
        };
        let a = scaled(&base[0], &scale[0..3]);
        let b = scaled(&base[1], &scale[3..6]);
        let c = scaled(&base[2], &scale[6..9]);
        let ab = compare_costs(&a, &b, CostMode::SingleSample).unwrap();
        let bc = compare_costs(&b, &c, CostMode::SingleSample).unwrap();
        let ac = compare_costs(&a, &c, CostMode::SingleSample).unwrap();
        let close = |x: f64, y: f64| ((x - y) / y).abs() < 1e-9;
        prop_assert!(close(ac.ratio_time, ab.ratio_time * bc.ratio_time));
        prop_assert!(close(ac.ratio_cost, ab.ratio_cost * bc.ratio_cost));
        prop_assert!(close(ac.ratio_co2, ab.ratio_co2 * bc.ratio_co2));
        let aa = compare_costs(&a, &a, CostMode::Batch).unwrap();
        prop_assert_eq!((aa.ratio_time, aa.ratio_cost, aa.ratio_co2), (1.0, 1.0, 1.0));
    }

    #[test]
    fn measurement_scales_with_durations(durations in prop::collection::vec(0.0f64..50.0, 1..20), gpus in 1u32..8) {
        let rates = RateConfig { currency_per_gpu_hour: Some(4.2), grams_co2_per_kwh: Some(350.0), watts_per_gpu: Some(300.0) };
        let once = measure_run("m", &durations, None, &rates, gpus).unwrap();
        let doubled: Vec<f64> = durations.iter().map(|d| d * 2.0).collect();
        let twice = measure_run("m", &doubled, None, &rates, gpus).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        prop_assert!(close(twice.inference_seconds_per_sample, 2.0 * once.inference_seconds_per_sample));
        prop_assert!(close(twice.inference_cost_per_sample, 2.0 * once.inference_cost_per_sample));
        prop_assert!(close(twice.inference_co2_g_per_sample, 2.0 * once.inference_co2_g_per_sample));
    }

    #[test]
    fn adherence_split_adds_up(seed in any::<u64>()) {
        let mut g = ReportGenerator::new(seed);
        let reference = g.report();
        let hyp = g.hypothesis(&reference);
        let spec = spec();
        let h = parse_structured_report(&hyp.render(), &spec).unwrap();
        let r = parse_structured_report(&reference.render(), &spec).unwrap();
        let negatives = NegativeFindingPatterns::default();
        let report = check_adherence(&h, Some(&r), &spec, &negatives).unwrap();
        prop_assert_eq!(report.organ_mismatch_total, report.organ_mismatch_irrelevant + report.organ_mismatch_relevant);
        prop_assert!(check_adherence(&r, Some(&r), &spec, &negatives).unwrap().is_clean());
    }

    #[test]
    fn aggregation_is_linear(seed in any::<u64>(), n in 2usize..12, cut in any::<prop::sample::Index>()) {
        let corpus = radstruct::synthetic::synthetic_corpus(seed, n, 0);
        let cfg = EvalConfig::default();
        let ev = Evaluator::new(&cfg, None);
        let results: Vec<_> = corpus
            .iter()
            .map(|p| {
                ev.evaluate_sample(
                    SampleInput {
                        sample_id: &p.id,
                        dataset: p.source,
                        hypothesis: p.structured_hypothesis.as_deref().unwrap(),
                        reference: &p.structured_reference,
                    },
                    &[MetricId::RougeL],
                )
                .unwrap()
            })
            .collect();
        let k = 1 + cut.index(n - 1);
        let all = aggregate_results(&results).unwrap();
        let left = aggregate_results(&results[..k]).unwrap();
        let right = aggregate_results(&results[k..]).unwrap();
        for (whole, (l, r)) in all.pooled.iter().zip(left.pooled.iter().zip(&right.pooled)) {
            let weighted = (l.mean * l.samples as f64 + r.mean * r.samples as f64) / (l.samples + r.samples) as f64;
            prop_assert!((whole.mean - weighted).abs() < 1e-12);
        }
        let row = all.get(Some(Dataset::Mimic), radstruct::eval::EvalSection::Findings, MetricId::RougeL).unwrap();
        prop_assert_eq!(row.samples, n);
    }

    #[test]
    fn batching_does_not_change_responses(n in 1usize..60, batch in 1usize..40) {
        let pairs: Vec<TextPair> = (0..n)
            .map(|i| TextPair::new(format!("p{i}"), format!("small effusion {i}"), format!("effusion {}", i % 7)))
            .collect();
        let request = ScoreRequest::new("F1_SRR_BERT", pairs);
        let cfg = |max_batch| ClientConfig { max_batch, backoff_base: Duration::ZERO, ..ClientConfig::default() };
        let whole = ScorerClient::new(MockScorer::new(), cfg(n)).score_batch(&request).unwrap();
        let split_client = ScorerClient::new(MockScorer::new(), cfg(batch));
        let split = split_client.score_batch(&request).unwrap();
        prop_assert_eq!(&whole, &split);
        prop_assert_eq!(split_client.wire_calls(), n.div_ceil(batch));
    }

    #[test]
    fn prefix_prompt_is_injective(a in "[ -~]{1,40}", b in "[ -~]{1,40}") {
        prop_assume!(a.trim() != "" && b.trim() != "" && a != b);
        let t = PromptTemplate::structuring();
        prop_assert_ne!(build_prefix_prompt(&a, &t).unwrap(), build_prefix_prompt(&b, &t).unwrap());
        prop_assert_eq!(build_prefix_prompt(&a, &t).unwrap(), build_prefix_prompt(&a, &t).unwrap());
    }

    #[test]
    fn icl_prompt_grows_linearly(k in 1usize..6, report in "[a-z ]{1,30}") {
        prop_assume!(!report.trim().is_empty());
        let spec = spec();
        let examples: Vec<IclExample> = (0..6)
            .map(|i| IclExample::new(format!("e{i}"), format!("free text {i}"), format!("Findings:\nPleura:\n- obs {i}"), &spec).unwrap())
            .collect();
        let block = |e: &IclExample| "Input:\n\n\nOutput:\n\n\n".len() + e.free_text.len() + e.structured_text.len();
        let base = build_icl_prompt(&report, &examples, 1, None).unwrap().len() - block(&examples[0]);
        let out = build_icl_prompt(&report, &examples, k, None).unwrap();
        prop_assert_eq!(out.len(), base + examples[..k].iter().map(block).sum::<usize>());
    }
}
