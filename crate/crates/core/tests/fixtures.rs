mod common;

use common::criteria;

#[test]
fn fig4_structure_and_anchors() {
    criteria::fig4();
}

#[test]
fn fig4_stem_heights_follow_data() {
    criteria::fig4_stem_heights();
}

#[test]
fn table1_rows() {
    criteria::table1();
}

#[test]
fn snowflake_six_fold_symmetry() {
    criteria::snowflake();
}

#[test]
fn protein_scales_anchors_and_reproducibility() {
    criteria::protein();
}
