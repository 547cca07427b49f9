use std::fs;

use radstruct::corpus::{ingest_corpus, CorpusError, CorpusFormat, CorpusReader, Split, DEFAULT_MAX_REJECT_RATIO};
use radstruct::eval::Dataset;
use radstruct::synthetic::synthetic_corpus;

fn jsonl_line(id: &str) -> String {
    serde_json::json!({
        "id": id,
        "source": "MIMIC",
        "split": "test",
        "free_text": "Heart size normal. Lungs clear.",
        "structured_reference": "Findings:\nLungs and Airways:\n- Clear.\n\nImpression:\nNo acute process.",
    })
    .to_string()
}

#[test]
fn jsonl_file_with_one_bad_line_in_ten() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let mut lines: Vec<String> = (0..10).map(|i| jsonl_line(&format!("s{i}"))).collect();
    lines[6] = "{\"id\": \"s6\", \"source\": ".into();
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let ingested = ingest_corpus(&path, CorpusFormat::from_path(&path), DEFAULT_MAX_REJECT_RATIO).unwrap();
    assert_eq!(ingested.pairs.len(), 9);
    assert_eq!(ingested.rejects.len(), 1);
    assert_eq!(ingested.rejects[0].line, 7);
    assert!(ingested.pairs.iter().all(|p| p.source == Dataset::Mimic && p.split == Split::Test));
}

#[test]
fn too_many_rejects_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let mut lines: Vec<String> = (0..10).map(|i| jsonl_line(&format!("s{i}"))).collect();
    lines[2] = "not json".into();
    lines[5] = "[]".into();
    fs::write(&path, lines.join("\n")).unwrap();
    assert!(ingest_corpus(&path, CorpusFormat::Jsonl, DEFAULT_MAX_REJECT_RATIO).is_err());
    assert_eq!(ingest_corpus(&path, CorpusFormat::Jsonl, 0.25).unwrap().pairs.len(), 8);
}

#[test]
fn duplicate_ids_stop_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    fs::write(&path, [jsonl_line("a"), jsonl_line("b"), jsonl_line("a")].join("\n")).unwrap();
    match ingest_corpus(&path, CorpusFormat::Jsonl, 1.0) {
        Err(CorpusError::SchemaViolation(msg)) => assert!(msg.contains("'a' at line 3"), "{msg}"),
        other => panic!("expected a schema violation, got {other:?}"),
    }
}

#[test]
fn missing_file_is_unreadable() {
    let err = ingest_corpus("/nonexistent/corpus.jsonl".as_ref(), CorpusFormat::Jsonl, 0.1).unwrap_err();
    assert!(matches!(err, CorpusError::UnreadableFile { .. }));
}

#[test]
fn csv_with_multiline_reports() {
    let pairs = synthetic_corpus(3, 4, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(["split", "structured_hypothesis", "id", "free_text", "structured_reference", "source"]).unwrap();
    for p in &pairs {
        let split = serde_json::to_value(p.split).unwrap();
        w.write_record([
            split.as_str().unwrap(),
            p.structured_hypothesis.as_deref().unwrap_or(""),
            &p.id,
            &p.free_text,
            &p.structured_reference,
            p.source.as_str(),
        ])
        .unwrap();
    }
    w.flush().unwrap();

    let mut reader = CorpusReader::open(&path, CorpusFormat::from_path(&path)).unwrap();
    let read: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
    assert!(reader.rejects().is_empty());
    assert_eq!(reader.accepted(), 7);
    for (got, want) in read.iter().zip(&pairs) {
        assert_eq!(got.id, want.id);
        assert_eq!(got.structured_reference, want.structured_reference);
        assert!(got.structured_reference.contains('\n'));
        assert_eq!(got.structured_hypothesis, want.structured_hypothesis);
    }
}
