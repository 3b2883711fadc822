use distress_core::textprep::stem_word;

#[test]
fn agrees_with_reference_vocabulary() {
    let vectors = include_str!("../data/porter_vectors.txt");
    let mut mismatches = Vec::new();
    let mut total = 0;
    for line in vectors.lines().filter(|l| !l.trim().is_empty()) {
        let (word, expected) = line.split_once(' ').expect("two columns");
        total += 1;
        let got = stem_word(word);
        if got != expected {
            mismatches.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    assert!(total > 5000, "vector file too small: {total}");
    assert!(mismatches.is_empty(), "{} of {total} mismatched:\n{}", mismatches.len(), mismatches.join("\n"));
}
