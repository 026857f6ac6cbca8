mod common;

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let a = common::run_outputs(8);
    let b = common::run_outputs(8);
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!(x == y, "output {i} differs");
    }
}

#[test]
fn different_seed_changes_outputs() {
    assert_ne!(common::run_outputs(8), common::run_outputs(9));
}
