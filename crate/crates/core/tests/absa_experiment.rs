use movesense_core::absa::synthetic::two_aspect_corpus;
use movesense_core::absa::{run_experiment, InfusionVariant, TrainConfig};
use movesense_core::corpus::split_corpus;

#[test]
fn aspect_phrase_separates_opposed_aspects() {
    let records = two_aspect_corpus(300, 2024);
    let split = split_corpus(&records, 42).unwrap();
    let seeds = [1, 2, 3, 4, 5];
    let config = TrainConfig::default();
    let move_only = run_experiment(&records, &split, InfusionVariant::MoveOnly, &seeds, config).unwrap();
    let phrase = run_experiment(&records, &split, InfusionVariant::MoveActionPhrase, &seeds, config).unwrap();
    println!("move-only {:.4} move-action {:.4}", move_only.mean_f1, phrase.mean_f1);
    assert!(phrase.mean_f1 >= move_only.mean_f1);
    assert!(phrase.mean_f1 > 0.9);
}
