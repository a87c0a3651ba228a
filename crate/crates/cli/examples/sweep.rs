//! Exhaustively solves every observation subset of a bundled model and
//! prints the verdict table: `cargo run --example sweep -- traingate`.

use std::time::Instant;

use minobs_cli::model_text::parse_model;
use minobs_cli::models;
use minobs_core::knowledge::{build_knowledge_game, solve, BuildOptions};
use minobs_core::observation::ObsMask;
use minobs_core::tga::ZoneGame;

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "traingate".into());
    let text = match arg.as_str() {
        "traingate" => models::TRAINGATE.to_string(),
        "lightheavy" => {
            let n = std::env::args()
                .nth(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(2);
            models::lightheavy(n)
        }
        path => std::fs::read_to_string(path).expect("readable model file"),
    };
    let mf = parse_model(&text).unwrap_or_else(|e| panic!("{e}"));
    let (model, catalog) = (&mf.model, &mf.catalog);
    println!(
        "{}: {} product locations, {} edges",
        mf.name,
        model.locations.len(),
        model.edges.len()
    );
    let n = catalog.predicates.len();
    let mut winners: Vec<(u64, String)> = Vec::new();
    let t0 = Instant::now();
    for pick in 0u64..(1 << (n - 1)) {
        let mut obs = ObsMask::singleton(catalog.safety);
        let mut bit = 0;
        for id in 0..n {
            if id == catalog.safety {
                continue;
            }
            if pick >> bit & 1 == 1 {
                obs.insert(id);
            }
            bit += 1;
        }
        let t = Instant::now();
        let zg = ZoneGame::new(model, catalog, obs).unwrap();
        let kg = build_knowledge_game(&zg, catalog.safety, BuildOptions::default()).unwrap();
        let win = solve(&kg).winning;
        let names: Vec<&str> = obs.ids().map(|i| catalog.name_of(i)).collect();
        println!(
            "  {:>4} cost {:>4} beliefs {:>6} states {:>6} {:>6}ms  {{{}}}",
            if win { "WIN" } else { "lose" },
            catalog.cost_millis(obs) / 1000,
            kg.stats.beliefs,
            kg.stats.arena_states,
            t.elapsed().as_millis(),
            names.join(",")
        );
        if win {
            winners.push((catalog.cost_millis(obs), names.join(",")));
        }
    }
    winners.sort();
    println!("cheapest winners: {:?}", winners.iter().take(4).collect::<Vec<_>>());
    println!("swept in {:?}", t0.elapsed());
}
