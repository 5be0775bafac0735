use wonderchar::acceptance;

#[test]
fn acceptance_suite() {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert_eq!(outcomes.len(), 9);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
