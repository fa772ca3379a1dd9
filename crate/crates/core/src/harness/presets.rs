//! Built-in desk-scale experiment configurations, usable wherever a config
//! path is accepted.

const DESK: &str = r#"
[env]
name = "point_mass_reach"

[ene]
noise_fraction = 0.9

[agent]
hidden_dims = [64, 64]
buffer_capacity = 100000
initial_collect = 2000

[run]
total_steps = 60000
eval_interval = 1000
eval_episodes = 10
"#;

pub const PRESET_NAMES: &[&str] = &[
    "toy_anf_td3",
    "toy_dense_td3",
    "toy_static_anf_td3",
    "toy_sparser_anf_td3",
    "toy_pene_anf_td3",
    "toy_anf_sac",
    "toy_dense_sac",
];

/// TOML text of a preset.
pub fn preset(name: &str) -> Option<String> {
    let (algorithm, mode, extra) = match name {
        "toy_anf_td3" => ("td3", "anf", ""),
        "toy_dense_td3" => ("td3", "dense", ""),
        "toy_static_anf_td3" => ("td3", "static_anf", ""),
        "toy_sparser_anf_td3" => ("td3", "sparser_anf", "global_sparsity = 0.9\n"),
        "toy_pene_anf_td3" => ("td3", "anf", ""),
        "toy_anf_sac" => ("sac", "anf", ""),
        "toy_dense_sac" => ("sac", "dense", ""),
        _ => return None,
    };
    let mut text = DESK.replace("[agent]\n", &format!("[agent]\nalgorithm = \"{algorithm}\"\n"));
    text.push_str(&format!("\n[sparsity]\nmode = \"{mode}\"\n{extra}"));
    if name == "toy_pene_anf_td3" {
        text.push_str("\n[pene]\npermutation_period = 15000\n");
    }
    Some(text)
}
