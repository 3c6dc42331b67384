use qif_lang::cfg::{build_cfg, NodeKind};
use qif_lang::parser::parse_source;
use qif_lang::preprocess::preprocess;
use qif_lang::ranges::estimate_ranges;

fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn random_walk_annotations() {
    let mut src = fixture("random_walk.hyleak");
    // place the cut where the decomposer would
    src = src.replace("for time in", "simulate-abs;\nfor time in");
    let p = preprocess(&parse_source(&src).unwrap()).unwrap();
    let c = build_cfg(&p).unwrap();
    let r = estimate_ranges(&c);
    let sim = (0..c.nodes.len())
        .find(|&n| c.nodes[n].kind == NodeKind::SimulateAbs)
        .unwrap();
    assert_eq!(r.tot_obs_before(sim), 1);
    assert_eq!(r.tot_int_before(sim), 601);
    let obs_assign = c.stmt_entry[c.stmt_entry.len() - 3];
    assert_eq!(c.nodes[obs_assign].text, "obs := loc");
    assert_eq!(r.tot_obs_before(obs_assign), 1);
    assert_eq!(r.tot_int_before(obs_assign), 9010);
    assert_eq!(r.tot_obs_after(obs_assign), 901);
    assert_eq!(r.tot_int_after(obs_assign), 9010);
    assert_eq!(c.predecessors()[sim].len(), 7);
}
