mod parse_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/parse_report.rs"));

    #[test]
    fn runs() {
        main().expect("parse_report example should run");
    }
}

mod validate_adherence {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/validate_adherence.rs"));

    #[test]
    fn runs() {
        main().expect("validate_adherence example should run");
    }
}

mod score_sample {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/score_sample.rs"));

    #[test]
    fn runs() {
        main().expect("score_sample example should run");
    }
}

mod build_prompts {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/build_prompts.rs"));

    #[test]
    fn runs() {
        main().expect("build_prompts example should run");
    }
}

mod cost_tradeoff {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cost_tradeoff.rs"));

    #[test]
    fn runs() {
        main().expect("cost_tradeoff example should run");
    }
}

mod mock_scorer {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mock_scorer.rs"));

    #[test]
    fn runs() {
        main().expect("mock_scorer example should run");
    }
}

mod evaluate_corpus {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/evaluate_corpus.rs"));

    #[test]
    fn runs() {
        main().expect("evaluate_corpus example should run");
    }
}
