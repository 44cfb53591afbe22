#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use socioplan::cost_field::{Cell, Costmap};
use socioplan::geometry::Vec2;
use socioplan::scenario::{run_scenario, RunOptions, RunReport, Scenario};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

pub fn run_fixture(name: &str) -> RunReport {
    let path = fixture(name);
    let scenario = Scenario::load(&path).unwrap();
    run_scenario(&scenario, &fixtures_dir(), &RunOptions::default()).unwrap()
}

/// Plain Dijkstra over the 8-connected grid with a linear scan for the next
/// node. Step weight is `len * resolution * (a + b) / 2`.
pub fn dijkstra(map: &Costmap, start: Cell, goal: Cell) -> f64 {
    let (w, h) = (map.width, map.height);
    let n = w * h;
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[start.1 * w + start.0] = 0.0;
    loop {
        let mut best = None;
        for k in 0..n {
            if !done[k] && dist[k].is_finite() && best.map_or(true, |b: usize| dist[k] < dist[b]) {
                best = Some(k);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        let (ux, uy) = ((u % w) as i64, (u / w) as i64);
        if (ux as usize, uy as usize) == goal {
            break;
        }
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (vx, vy) = (ux + dx, uy + dy);
                if vx < 0 || vy < 0 || vx >= w as i64 || vy >= h as i64 {
                    continue;
                }
                let v = vy as usize * w + vx as usize;
                let len = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let step = len * map.resolution * (map.cells[u] + map.cells[v]) / 2.0;
                if dist[u] + step < dist[v] {
                    dist[v] = dist[u] + step;
                }
            }
        }
    }
    dist[goal.1 * w + goal.0]
}

/// Costmap of random size up to `max_side` per axis, costs uniform in [1, 10].
pub fn random_map(rng: &mut ChaCha8Rng, max_side: usize) -> Costmap {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let res = [0.05, 0.1, 0.25, 1.0][rng.gen_range(0..4)];
    let cells = (0..w * h).map(|_| rng.gen_range(1.0..=10.0)).collect();
    Costmap::from_cells(Vec2::new(0.0, 0.0), res, w, h, cells).unwrap()
}

pub fn random_cell(rng: &mut ChaCha8Rng, map: &Costmap) -> Cell {
    (rng.gen_range(0..map.width), rng.gen_range(0..map.height))
}

/// Octile distance between cells: orthogonal steps plus √2 per diagonal step.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0);
    let dy = a.1.abs_diff(b.1);
    let (d, o) = (dx.min(dy), dx.max(dy) - dx.min(dy));
    o as f64 + std::f64::consts::SQRT_2 * d as f64
}
