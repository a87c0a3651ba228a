//! Solves one observation set of a bundled model:
//! `cargo run --example solve_one -- traingate safe,pos1ge2,pos2ge2,ylt2`

use minobs_cli::model_text::parse_model;
use minobs_cli::models;
use minobs_core::knowledge::{build_knowledge_game, solve, BuildOptions};
use minobs_core::observation::ObsMask;
use minobs_core::tga::ZoneGame;

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "traingate".into());
    let obs_arg = std::env::args().nth(2).unwrap_or_else(|| "safe".into());
    let text = match arg.as_str() {
        "traingate" => models::TRAINGATE.to_string(),
        "lightheavy" => models::lightheavy(
            std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(2),
        ),
        path => std::fs::read_to_string(path).expect("readable model file"),
    };
    let mf = parse_model(&text).unwrap_or_else(|e| panic!("{e}"));
    let mut obs = ObsMask::EMPTY;
    for name in obs_arg.split(',') {
        obs.insert(mf.catalog.id_of(name).unwrap_or_else(|| panic!("unknown predicate {name}")));
    }
    eprintln!("parsed: {} locations", mf.model.locations.len());
    let t = std::time::Instant::now();
    let zg = ZoneGame::new(&mf.model, &mf.catalog, obs).unwrap();
    eprintln!("zone game built in {:?}", t.elapsed());
    let kg = build_knowledge_game(&zg, mf.catalog.safety, BuildOptions::default()).unwrap();
    let win = solve(&kg).winning;
    println!(
        "{}: {} — beliefs {} states {} in {:?}",
        obs_arg,
        if win { "WIN" } else { "lose" },
        kg.stats.beliefs,
        kg.stats.arena_states,
        t.elapsed()
    );
}
