mod common;

#[test]
fn assembled_sizes_follow_the_contact_census() {
    let cases = common::dimension_matrix();
    assert!(cases.len() >= 4 * 16);
    for c in &cases {
        assert_eq!(c.assembled, c.expected, "{} with {:?}", c.model, c.enabled);
    }
}

#[test]
fn two_foot_biped_is_36_by_18_by_108() {
    let cases = common::dimension_matrix();
    let c = cases
        .iter()
        .find(|c| c.model == "biped18" && c.enabled == ["left_foot", "right_foot"])
        .unwrap();
    assert_eq!(c.assembled, (36, 18, 108));
}
