use crepair::diagnostics::Diagnostic;
use crepair::model::{
    encode_examples, prepare_program, read_loss_csv, write_loss_csv, EncodedExample, EncoderInput, HyperParams,
    LineSequence, Model, ModelCheckpoint, ModelError, Trainer, TrainingExample, Vocabulary,
};
use crepair::program::tokenize;

const SOURCE: &str = "int main ( ) {
int n = 4 ;
int s = 0 ;
s = s + n
return s ;
}
";

fn example(hp: &HyperParams) -> TrainingExample {
    let p = tokenize("t", SOURCE).unwrap();
    let d = Diagnostic::new(5, Some(1), "expected ';' before 'return'");
    TrainingExample {
        program: prepare_program(&p, &d, hp).unwrap(),
        target_line: 4,
        target: ["s", "=", "s", "+", "n", ";"].map(String::from).to_vec(),
    }
}

fn setup() -> (Model, EncodedExample) {
    let hp = HyperParams::tiny();
    let ex = example(&hp);
    let vocab = Vocabulary::build(ex.token_stream()).unwrap();
    let model = Model::new(hp.clone(), vocab, 5).unwrap();
    let enc = EncodedExample::new(&ex, &model.vocab, &hp).unwrap();
    (model, enc)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn padding_does_not_change_outputs() {
    let (model, enc) = setup();
    let base = model.line_probabilities(&enc.inputs);
    let states = model.encode_values(&enc.inputs);
    let mut padded = enc.inputs.clone();
    let len = padded[1].len();
    padded[1] = padded[1].clone().padded(len + 5);
    let p = model.line_probabilities(&padded);
    assert!(max_diff(&base, &p) < 1e-12);
    let s = model.encode_values(&padded);
    assert_eq!(s[1].nrows(), len + 5);
    for (a, b) in states.iter().zip(&s) {
        let rows = a.nrows();
        let sliced: Vec<f64> = b.rows().into_iter().take(rows).flatten().copied().collect();
        let orig: Vec<f64> = a.iter().copied().collect();
        assert!(max_diff(&orig, &sliced) < 1e-12);
    }
}

#[test]
fn offset_embedding_is_live() {
    let (model, enc) = setup();
    let mut moved = enc.inputs.clone();
    moved[2].offset += 1;
    let a = model.encode_values(&enc.inputs);
    let b = model.encode_values(&moved);
    let diff = max_diff(&a[2].iter().copied().collect::<Vec<_>>(), &b[2].iter().copied().collect::<Vec<_>>());
    assert!(diff > 1e-6, "offset change left line states unchanged");
    assert!(model.line_logits(&enc.inputs) != model.line_logits(&moved));
}

#[test]
fn offsets_are_clamped_to_radius() {
    let hp = HyperParams::tiny();
    let vocab = Vocabulary::build(["x"]).unwrap();
    let far = LineSequence {
        tokens: vec!["x".into()],
        offset: 1000,
    };
    let input = EncoderInput::new(&far, &vocab, &hp).unwrap();
    assert_eq!(input.offset, hp.offset_radius as i64);
}

#[test]
fn copy_only_tokens_are_reachable() {
    let hp = HyperParams::tiny();
    let ex = example(&hp);
    // `n` left out of the vocabulary is reachable only by copying it from
    // the target line
    let vocab = Vocabulary::build(ex.token_stream().filter(|t| *t != "n")).unwrap();
    assert!(vocab.get("n").is_none());
    let enc = EncodedExample::new(&ex, &vocab, &hp).unwrap();
    assert!(!enc.has_unreachable_target());
    let n_id = enc.inputs[3].ext_id("n", &vocab).unwrap();
    assert!(n_id >= vocab.len());
    assert!(enc.target_ext.contains(&Some(n_id)));

    let mut unseen = ex;
    unseen.target.push("zzz".into());
    assert!(EncodedExample::new(&unseen, &vocab, &hp).unwrap().has_unreachable_target());
}

#[test]
fn overlong_target_is_rejected() {
    let hp = HyperParams::tiny();
    let mut ex = example(&hp);
    ex.target = vec!["s".to_string(); hp.max_target_len];
    let vocab = Vocabulary::build(ex.token_stream()).unwrap();
    assert!(matches!(
        EncodedExample::new(&ex, &vocab, &hp),
        Err(ModelError::TargetTooLong { .. })
    ));
}

#[test]
fn training_lowers_loss_on_one_example() {
    let (model, _) = setup();
    let hp = model.hp.clone();
    let encoded = encode_examples(&[example(&hp)], &model.vocab, &hp).unwrap();
    let before = model.loss_values(&encoded[0]).0;
    let mut trainer = Trainer::new(model, 6);
    for _ in 0..30 {
        trainer.train_epoch(&encoded).unwrap();
    }
    let after = trainer.model.loss_values(&encoded[0]).0;
    assert!(after < 0.5 * before, "{before} -> {after}");
}

#[test]
fn loss_csv_round_trip_and_version() {
    let (model, _) = setup();
    let hp = model.hp.clone();
    let encoded = encode_examples(&[example(&hp)], &model.vocab, &hp).unwrap();
    let mut trainer = Trainer::new(model, 6);
    trainer.train_epoch(&encoded).unwrap();
    trainer.train_epoch(&encoded).unwrap();
    let mut buf = Vec::new();
    write_loss_csv(&trainer.trace, &mut buf).unwrap();
    assert_eq!(read_loss_csv(&buf[..]).unwrap(), trainer.trace);
    let text = String::from_utf8(buf).unwrap().replace("format_version: 1", "format_version: 9");
    assert!(read_loss_csv(text.as_bytes()).is_err());
}

#[test]
fn checkpoint_rejects_other_versions_and_garbage() {
    let (model, _) = setup();
    let bytes = ModelCheckpoint::from_trainer(&Trainer::new(model, 1)).to_bytes().unwrap();
    assert!(ModelCheckpoint::from_bytes(&bytes).is_ok());
    assert!(ModelCheckpoint::from_bytes(&bytes[..bytes.len() / 2]).is_err());
    assert!(ModelCheckpoint::from_bytes(b"nope").is_err());
    let key = b"\"format_version\":1";
    let at = bytes.windows(key.len()).position(|w| w == key).expect("version in header");
    let mut bumped = bytes.clone();
    bumped[at + "\"format_version\":".len()] = b'8';
    assert!(matches!(
        ModelCheckpoint::from_bytes(&bumped),
        Err(ModelError::UnsupportedVersion(8))
    ));
}
