//! Backbone outputs against reference values computed with the Python
//! `transformers` implementation on the same stand-in weights (seed 11).

use aggrobench_core::evaluation::ModelKind;
use aggrobench_models::{write_stand_in_checkpoint, StandInFamily, TransformerClassifier};
use candle_core::IndexOp;
use serde_json::Value;

const ORACLE: &str = include_str!("fixtures/backbone_oracle.json");

fn rows(v: &Value) -> Vec<Vec<f64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

fn ids(v: &Value) -> Vec<u32> {
    v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as u32).collect()
}

fn assert_close(got: &[Vec<f32>], want: &[Vec<f64>], what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: positions");
    let mut worst = 0.0f64;
    for (g, w) in got.iter().zip(want) {
        for (a, b) in g.iter().zip(w) {
            worst = worst.max((*a as f64 - b).abs());
        }
    }
    assert!(worst < 1e-4, "{what}: max abs diff {worst}");
}

fn stand_in(family: StandInFamily, kind: ModelKind) -> (tempfile::TempDir, TransformerClassifier) {
    let tmp = tempfile::tempdir().unwrap();
    write_stand_in_checkpoint(tmp.path(), family, 11).unwrap();
    let model = TransformerClassifier::from_checkpoint(kind, tmp.path(), 64, 0).unwrap();
    (tmp, model)
}

#[test]
fn bert_matches_reference() {
    let oracle: Value = serde_json::from_str(ORACLE).unwrap();
    let o = &oracle["bert"];
    let (_tmp, model) = stand_in(StandInFamily::Bert, ModelKind::BertBase);
    let texts: Vec<&str> = o["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    let batch = model.encode(&texts).unwrap();
    let hidden = model.hidden_states(&batch).unwrap();
    for (r, want) in o["hidden"].as_array().unwrap().iter().enumerate() {
        let n = batch.lengths[r];
        let expected_ids: Vec<u32> = ids(&o["input_ids"][r]).into_iter().take(n).collect();
        assert_eq!(batch.row(r), expected_ids.as_slice());
        let got = hidden.i(r).unwrap().narrow(0, 0, n).unwrap().to_vec2::<f32>().unwrap();
        assert_close(&got, &rows(want), &format!("bert row {r}"));
    }
}

#[test]
fn gpt2_matches_reference() {
    let oracle: Value = serde_json::from_str(ORACLE).unwrap();
    let o = &oracle["gpt2"];
    let (_tmp, model) = stand_in(StandInFamily::Gpt2, ModelKind::Gpt2Medium);
    let texts: Vec<&str> = o["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    // Encoded together, so the shorter row is padded and must be unaffected.
    let batch = model.encode(&texts).unwrap();
    let hidden = model.hidden_states(&batch).unwrap();
    for (r, row) in o["rows"].as_array().unwrap().iter().enumerate() {
        let n = batch.lengths[r];
        assert_eq!(batch.row(r), ids(&row["input_ids"]).as_slice());
        let got = hidden.i(r).unwrap().narrow(0, 0, n).unwrap().to_vec2::<f32>().unwrap();
        assert_close(&got, &rows(&row["hidden"]), &format!("gpt2 row {r}"));
    }
}
