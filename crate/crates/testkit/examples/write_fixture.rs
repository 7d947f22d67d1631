fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus.jsonl");
    std::fs::write(path, citegen_testkit::fixtures::corpus_jsonl()).expect("write fixture");
    println!("wrote {path}");
}
