use mafia::compiler::TargetModel;
use mafia::corpus::{check, CORPUS};

#[test]
fn every_corpus_program_passes_its_checks() {
    let target = TargetModel::default();
    let mut failed = Vec::new();
    for e in CORPUS {
        let row = check(e, &target, 2000, 11);
        for c in &row.checks {
            println!(
                "{:<24} {:<12} {:<4} {}",
                e.name,
                c.name,
                if c.ok { "ok" } else { "FAIL" },
                c.detail
            );
            if !c.ok {
                failed.push(format!("{}:{}", e.name, c.name));
            }
        }
    }
    assert!(failed.is_empty(), "{failed:?}");
}
