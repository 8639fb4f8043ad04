mod common;

use common::fidelity::{check_corpus, check_prompts, disk_digest, CORPUS_SHA256};
use storyloom_core::template::TemplateCorpus;

#[test]
fn corpus_matches_files_on_disk() {
    check_corpus().unwrap();
}

#[test]
fn corpus_checksum_is_pinned() {
    assert_eq!(disk_digest(), TemplateCorpus::builtin().checksum());
    assert_eq!(disk_digest(), CORPUS_SHA256);
}

#[test]
fn every_pipeline_prompt_strips_back_to_its_template() {
    check_prompts().unwrap();
}
