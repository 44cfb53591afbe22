//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, UnwindSafe};
use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{dijkstra, fixture, fixtures_dir, octile, random_cell, random_map, run_fixture};
use socioplan::cost_assessment::llm::ScriptedTransport;
use socioplan::cost_assessment::{
    llm_assess, parse_assessment, CostClearance, FixtureStore, LlmError, ParseError, RetryPolicy,
};
use socioplan::cost_field::{falloff_value, point_cost, Costmap, Falloff};
use socioplan::geometry::{Rect, Vec2};
use socioplan::human_augmentation::{derive_condition_variant, insert_human, Condition, VariantOptions};
use socioplan::planner::{path_cost, plan, PlanRequest};
use socioplan::scenario::svg::render_report;
use socioplan::scenario::{Comparison, RunReport, Scenario};
use socioplan::scene_graph::{load_scene, to_json, LoadOptions, SceneGraph};
use socioplan::trajectory_context::{induce_partial_graph, Trajectory};

fn cc(cost: f64, clearance: f64) -> CostClearance {
    CostClearance::new(cost, clearance).unwrap()
}

fn table_one() -> Vec<(Condition, &'static str, Option<CostClearance>)> {
    use Condition::*;
    vec![
        (NoHuman, "bed", Some(cc(1.0, 0.5))),
        (NoHuman, "human_1", None),
        (NoHuman, "armchair", Some(cc(2.0, 1.5))),
        (HumanNoRelations, "bed", Some(cc(2.0, 0.5))),
        (HumanNoRelations, "human_1", Some(cc(10.0, 2.0))),
        (HumanNoRelations, "armchair", Some(cc(3.0, 1.0))),
        (HumanWithRelations, "bed", Some(cc(3.0, 1.5))),
        (HumanWithRelations, "human_1", Some(cc(5.0, 2.0))),
        (HumanWithRelations, "armchair", Some(cc(1.0, 0.0))),
    ]
}

fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_socioplan"))
        .args(args)
        .output()
        .expect("socioplan binary runs");
    assert!(
        out.status.success(),
        "socioplan {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn table_one_replay() {
    let scenario = fixture("bedroom_tv.scenario.json");
    let scenario = scenario.to_str().unwrap();
    let table = Comparison::from_json(&cli(&["--format", "json", "compare", scenario])).unwrap();
    for (condition, id, expected) in table_one() {
        let got = table.cell(condition, id);
        assert_eq!(got, expected, "{} / {id}", condition.key());
        if let Some(e) = expected {
            assert_eq!(got.unwrap().cost.to_bits(), e.cost.to_bits());
            assert_eq!(got.unwrap().clearance.to_bits(), e.clearance.to_bits());
        }
    }
    let text = cli(&["compare", scenario]);
    let expected = "                       bed      human   armchair\n\
                    No Human               1 (0.5)  -       2 (1.5)\n\
                    Human w/out relations  2 (0.5)  10 (2)  3 (1)\n\
                    Human w/ relations     3 (1.5)  5 (2)   1 (0)\n";
    assert_eq!(text, expected);
}

fn rule_orderings() {
    let report = run_fixture("bedroom_tv_rules.scenario.json");
    let cost = |c: Condition, id: &str| {
        report
            .condition(c)
            .unwrap()
            .assessment
            .get(id)
            .unwrap_or_else(|| panic!("{id} not assessed under {}", c.key()))
            .cost
    };
    assert!(
        cost(Condition::HumanWithRelations, "armchair") < cost(Condition::HumanNoRelations, "armchair"),
        "(a) armchair"
    );
    for c in [Condition::HumanNoRelations, Condition::HumanWithRelations] {
        let a = &report.condition(c).unwrap().assessment;
        let human = a.get("human_1").unwrap().cost;
        for (id, v) in &a.entries {
            if !report.scene.is_human(id) {
                assert!(human >= v.cost, "(b) human vs {id} under {}", c.key());
            }
        }
    }
    assert!(
        cost(Condition::HumanWithRelations, "bed") > cost(Condition::NoHuman, "bed"),
        "(c) bed"
    );
}

fn cost_field_law() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Footprint with its right edge on x = 0, so a point (d, -0.5) lies at distance d.
    let footprint = Rect::new(Vec2::new(-1.0, -1.0), Vec2::new(0.0, 0.0));
    let at = |d: f64, cost: f64, clearance: f64| point_cost(&Vec2::new(d, -0.5), &footprint, cost, clearance);
    for _ in 0..1000 {
        let cost = rng.gen_range(1.0..=10.0);
        let clearance = rng.gen_range(0.0..=5.0);
        let mut ds: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..=10.0)).collect();
        ds.extend([0.0, clearance]);
        ds.sort_by(f64::total_cmp);

        assert!((at(0.0, cost, clearance) - cost).abs() <= TOL);
        let values: Vec<f64> = ds.iter().map(|&d| at(d, cost, clearance)).collect();
        for (&d, &v) in ds.iter().zip(&values) {
            assert!(v >= 1.0 - TOL && v <= cost + TOL, "range at d={d}");
            if d >= clearance {
                assert!((v - 1.0).abs() <= TOL, "beyond clearance at d={d}");
            }
            let g = falloff_value(Falloff::Gaussian, d, cost, clearance);
            assert!(g >= 1.0 - TOL && g <= cost + TOL, "gaussian range at d={d}");
        }
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + TOL, "linear not monotone");
        }
        let gauss: Vec<f64> = ds
            .iter()
            .map(|&d| falloff_value(Falloff::Gaussian, d, cost, clearance))
            .collect();
        for w in gauss.windows(2) {
            assert!(w[1] <= w[0] + TOL, "gaussian not monotone");
        }
    }
}

fn planner_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..200 {
        let map = random_map(&mut rng, 20);
        let (s, g) = (random_cell(&mut rng, &map), random_cell(&mut rng, &map));
        let path = plan(&PlanRequest {
            start: map.cell_center(s),
            goal: map.cell_center(g),
            costmap: &map,
        })
        .unwrap();
        let oracle = dijkstra(&map, s, g);
        assert_eq!(path.total_cost.to_bits(), oracle.to_bits(), "map {k}: {} vs {oracle}", path.total_cost);
        assert_eq!(path_cost(&path, &map).unwrap().to_bits(), path.total_cost.to_bits());
        assert_eq!((path.cells[0], *path.cells.last().unwrap()), (s, g));
    }
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let res = [0.05, 0.1, 0.25, 1.0][rng.gen_range(0..4)];
        let map = Costmap::uniform(Vec2::new(0.0, 0.0), res, w, h, 1.0).unwrap();
        let (s, g) = (random_cell(&mut rng, &map), random_cell(&mut rng, &map));
        let path = plan(&PlanRequest {
            start: map.cell_center(s),
            goal: map.cell_center(g),
            costmap: &map,
        })
        .unwrap();
        let geodesic = octile(s, g) * res;
        assert!((path.total_cost - geodesic).abs() <= 1e-9, "{} vs {geodesic}", path.total_cost);
    }
}

fn raising_a_cell_never_helps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..50 {
        let mut map = random_map(&mut rng, 20);
        let (s, g) = (random_cell(&mut rng, &map), random_cell(&mut rng, &map));
        let request = |m: &Costmap| {
            plan(&PlanRequest {
                start: m.cell_center(s),
                goal: m.cell_center(g),
                costmap: m,
            })
            .unwrap()
            .total_cost
        };
        let before = request(&map);
        let cell = random_cell(&mut rng, &map);
        let raised = map.get(cell) + rng.gen_range(0.1..=5.0);
        map.set(cell, raised);
        let after = request(&map);
        assert!(after >= before, "map {k}: {after} < {before}");
    }
}

fn end_to_end_behaviour() {
    let report = run_fixture("bedroom_tv.scenario.json");
    let stats = |c: Condition| &report.condition(c).unwrap().stats;
    let armchair = |c: Condition| stats(c).min_distance_m["armchair"];
    let human = |c: Condition| stats(c).min_distance_to_human_m.unwrap();
    assert!(
        armchair(Condition::HumanWithRelations) < armchair(Condition::HumanNoRelations),
        "armchair: with {} vs without {}",
        armchair(Condition::HumanWithRelations),
        armchair(Condition::HumanNoRelations)
    );
    for c in [Condition::HumanNoRelations, Condition::HumanWithRelations] {
        assert!(human(c) >= human(Condition::NoHuman), "human distance under {}", c.key());
    }
}

fn llm_contract() {
    let bytes = std::fs::read(fixture("bedroom.scene.json")).unwrap();
    let scenario = Scenario::load(&fixture("bedroom_tv.scenario.json")).unwrap();
    let scene = load_scene(&bytes, LoadOptions::default()).unwrap().graph;
    let full = insert_human(&scene, scenario.human.as_ref().unwrap()).unwrap();
    let graph = derive_condition_variant(&full, Condition::HumanWithRelations, VariantOptions::default());
    let relevant: Vec<String> = ["bed", "human_1", "armchair"].map(String::from).to_vec();
    let partial = induce_partial_graph(&graph, &relevant).unwrap();
    let trajectory = Trajectory::straight(scenario.start, scenario.goal, scenario.waypoint_z);

    let valid = r#"{"assessments": [
        {"object_id": "bed", "cost": 3, "clearance": 1.5},
        {"object_id": "human_1", "cost": 5, "clearance": 2},
        {"object_id": "armchair", "cost": 1, "clearance": 0}]}"#;
    let parsed = parse_assessment(valid, &relevant).unwrap();
    let expected: BTreeMap<String, CostClearance> = [
        ("bed".to_string(), cc(3.0, 1.5)),
        ("human_1".to_string(), cc(5.0, 2.0)),
        ("armchair".to_string(), cc(1.0, 0.0)),
    ]
    .into();
    assert_eq!(parsed.entries, expected);

    let low = valid.replace(r#""cost": 3,"#, r#""cost": 0.5,"#);
    match parse_assessment(&low, &relevant) {
        Err(ParseError::OutOfRange(v)) => {
            assert_eq!(v.len(), 1);
            assert_eq!((v[0].object_id.as_str(), v[0].field.as_str()), ("bed", "cost"));
        }
        other => panic!("out-of-range response gave {other:?}"),
    }
    let missing = r#"{"assessments": [
        {"object_id": "bed", "cost": 3, "clearance": 1.5},
        {"object_id": "human_1", "cost": 5, "clearance": 2}]}"#;
    match parse_assessment(missing, &relevant) {
        Err(ParseError::Coverage { missing, extra }) => {
            assert_eq!(missing, ["armchair"]);
            assert!(extra.is_empty());
        }
        other => panic!("coverage response gave {other:?}"),
    }

    let policy = RetryPolicy::default();
    let run = |t: &ScriptedTransport| llm_assess(t, &partial, &trajectory, &relevant, &scenario.preferences, policy);

    let first = ScriptedTransport::new([valid]);
    let a = run(&first).unwrap();
    assert_eq!((a.provenance.attempts, a.entries.clone()), (1, expected.clone()));

    let second = ScriptedTransport::new(["The bed looks expensive.", valid]);
    let a = run(&second).unwrap();
    assert_eq!(a.provenance.attempts, 2);
    assert_eq!(a.provenance.transcript.len(), 2);
    assert_eq!(a.entries, expected);
    assert!(second.prompts()[1].contains("YOUR PREVIOUS RESPONSE WAS REJECTED"));

    let never = ScriptedTransport::new(["no", "still no", "{not json"]);
    match run(&never) {
        Err(LlmError::Exhausted { attempts, last, .. }) => {
            assert_eq!(attempts, 3);
            assert_eq!(last.code(), "syntax");
        }
        other => panic!("garbage x3 gave {other:?}"),
    }
}

fn determinism() {
    for name in ["bedroom_tv.scenario.json", "bedroom_tv_rules.scenario.json"] {
        let (a, b) = (run_fixture(name), run_fixture(name));
        assert_eq!(a.to_json(), b.to_json(), "{name} report");
        assert_eq!(render_report(&a, None).unwrap(), render_report(&b, None).unwrap(), "{name} svg");
    }
}

fn schema_roundtrip() {
    let mut seen = BTreeMap::<&str, usize>::new();
    let mut names: Vec<_> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        if name.ends_with(".scene.json") {
            let load = |t: &str| -> SceneGraph { load_scene(t.as_bytes(), LoadOptions { strict: true }).unwrap().graph };
            let first = load(&text);
            let again = load(&to_json(&first));
            assert_eq!(first, again, "{name}");
            assert_eq!(to_json(&first), to_json(&again), "{name}");
            *seen.entry("scene").or_default() += 1;
        } else if name.ends_with(".scenario.json") {
            let first = Scenario::from_json(&text).unwrap();
            assert_eq!(Scenario::from_json(&first.to_json()).unwrap(), first, "{name}");
            *seen.entry("scenario").or_default() += 1;

            let report = run_fixture(name);
            let json = report.to_json();
            let back = RunReport::from_json(&json).unwrap();
            assert_eq!(back, report, "{name} report");
            assert_eq!(back.to_json(), json, "{name} report bytes");
            *seen.entry("report").or_default() += 1;
        } else if name.ends_with(".fixtures.json") {
            let first = FixtureStore::from_json(&text).unwrap();
            assert_eq!(FixtureStore::from_json(&first.to_json()).unwrap(), first, "{name}");
            *seen.entry("fixture").or_default() += 1;
        }
    }
    for kind in ["scene", "scenario", "fixture", "report"] {
        assert!(seen.get(kind).copied().unwrap_or(0) > 0, "no {kind} files checked");
    }
}

fn check(number: u32, title: &str, f: impl FnOnce() + UnwindSafe) -> bool {
    match catch_unwind(f) {
        Ok(()) => {
            println!("criterion {number} PASS  {title}");
            true
        }
        Err(payload) => {
            let reason = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            println!("criterion {number} FAIL  {title}: {reason}");
            false
        }
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|_| {}));
    let results = [
        check(1, "comparison table reproduces the recorded cost (clearance) values", table_one_replay),
        check(2, "rule model orders armchair, human and bed costs", rule_orderings),
        check(3, "point cost stays in range, hits both ends and decreases with distance", cost_field_law),
        check(4, "planner matches the Dijkstra oracle and the uniform-map geodesic", planner_optimality),
        check(5, "raising one cell never lowers the planned cost", raising_a_cell_never_helps),
        check(6, "relations let the path use the armchair while keeping clear of the human", end_to_end_behaviour),
        check(7, "LLM responses: valid, out of range, wrong coverage, retry, exhaustion", llm_contract),
        check(8, "reports and SVG are byte-identical across runs", determinism),
        check(9, "scene, scenario, fixture and report files survive load/save/load", schema_roundtrip),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
