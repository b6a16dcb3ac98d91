mod common;

use mafia::corpus::CORPUS;
use mafia::frontend::{parse, parse_with, print_program};
use proptest::prelude::*;

#[test]
fn corpus_survives_printing() {
    for e in CORPUS {
        let p = e.parse().unwrap();
        let text = print_program(&p);
        let again = parse_with(&text, &e.options()).unwrap_or_else(|err| panic!("{}: {err}\n{text}", e.name));
        assert_eq!(p, again, "{}", e.name);
        assert_eq!(text, print_program(&again), "{}", e.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_programs_reparse(src in common::program()) {
        let p = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let text = print_program(&p);
        let again = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(p, again);
    }

    #[test]
    fn arbitrary_input_never_panics(src in "\\PC{0,200}") {
        let _ = parse(&src);
    }

    #[test]
    fn mangled_programs_never_panic(src in common::program(), cut in 0usize..400, junk in "[(){}>+.=,@\"a-z0-9 ]{0,6}") {
        let mut s: String = src.chars().take(cut).collect();
        s.push_str(&junk);
        s.extend(src.chars().skip(cut));
        let _ = parse(&s);
    }
}
