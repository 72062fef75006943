//! Builds a scenario in code, writes it as JSON, reads it back, and
//! shows the field-path errors the parser produces for bad documents.

use nalgebra::Vector3;

use stepup_planner::cli::{parse_scenario_str, scenario_to_doc, write_scenario_file};
use stepup_planner::{CoMState, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Start from the shipped step-up and lower the platform a little.
    let mut scenario = Scenario::canonical_step_up();
    scenario.initial = CoMState::new(Vector3::new(0.0, 0.0, 0.98), Vector3::zeros());
    scenario.target.position.z = 0.98 + 0.31;

    let path = std::env::temp_dir().join("stepup_custom_scenario.json");
    write_scenario_file(&scenario, &path)?;
    println!("wrote {}", path.display());

    let text = std::fs::read_to_string(&path)?;
    let parsed = parse_scenario_str(&text)?;
    assert_eq!(parsed, scenario);
    println!(
        "round trip ok: {} phases, {} knots per phase, {:.2} kg",
        parsed.num_phases(),
        parsed.knots_per_phase,
        parsed.mass
    );

    // Validation errors carry the offending field path.
    let mut broken = scenario_to_doc(&scenario);
    broken.phases[2].t_min = 99.0;
    let err = stepup_planner::cli::scenario_from_doc(&broken).unwrap_err();
    println!("broken duration bounds -> {err}");

    let mut broken = scenario_to_doc(&scenario);
    broken.phases[0].left_foot.as_mut().unwrap().polygon.truncate(2);
    let err = stepup_planner::cli::scenario_from_doc(&broken).unwrap_err();
    println!("degenerate polygon      -> {err}");

    std::fs::remove_file(&path).ok();
    Ok(())
}
