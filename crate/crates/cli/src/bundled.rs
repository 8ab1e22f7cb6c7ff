//! Scenarios shipped with the binary.

const BUNDLED: &[(&str, &str)] = &[
    ("p3_midpoint", include_str!("../scenarios/p3_midpoint.toml")),
    (
        "usv_uav_feasible",
        include_str!("../scenarios/usv_uav_feasible.toml"),
    ),
    (
        "uav_usv_infeasible",
        include_str!("../scenarios/uav_usv_infeasible.toml"),
    ),
    (
        "linear_decay",
        include_str!("../scenarios/linear_decay.toml"),
    ),
    (
        "disturbed_ultimate_bound",
        include_str!("../scenarios/disturbed_ultimate_bound.toml"),
    ),
    (
        "tetrahedron_formation",
        include_str!("../scenarios/tetrahedron_formation.toml"),
    ),
];

pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Source text of a bundled scenario.
pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
