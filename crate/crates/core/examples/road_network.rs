//! Builds an instance on a small synthetic road grid, where travel costs are
//! shortest-path distances, and solves it.
//!
//! cargo run --release --example road_network

use mvpdp::bnb::{solve, SolveOptions};
use mvpdp::convexify::GammaPolicy;
use mvpdp::graph_core::describe_route;
use mvpdp::instance::{Demand, Edge, Instance, Location, Vehicle};
use mvpdp::model::assemble;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 5x5 grid with slower horizontal streets on odd rows
    let side = 5;
    let id = |r: usize, c: usize| format!("r{r}c{c}");
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                let weight = if r % 2 == 1 { 2.0 } else { 1.0 };
                edges.push(Edge {
                    from: id(r, c),
                    to: id(r, c + 1),
                    weight,
                });
            }
            if r + 1 < side {
                edges.push(Edge {
                    from: id(r, c),
                    to: id(r + 1, c),
                    weight: 1.5,
                });
            }
        }
    }
    let at = |r, c| Location::Node(id(r, c));
    let vehicles = vec![
        Vehicle {
            origin: at(0, 0),
            destination: at(0, 0),
        },
        Vehicle {
            origin: at(4, 4),
            destination: at(4, 4),
        },
    ];
    let demands = vec![
        Demand {
            pickup: at(0, 3),
            delivery: at(3, 0),
            group: 1,
        },
        Demand {
            pickup: at(1, 1),
            delivery: at(4, 2),
            group: 1,
        },
        Demand {
            pickup: at(2, 4),
            delivery: at(0, 1),
            group: 2,
        },
        Demand {
            pickup: at(3, 3),
            delivery: at(4, 0),
            group: 1,
        },
    ];
    let instance = Instance::on_graph(2, vehicles, demands, &edges)?;
    let model = assemble(&instance, GammaPolicy::Auto)?;
    let out = solve(
        &model,
        &SolveOptions {
            gap_target: 0.0,
            ..Default::default()
        },
    )?;
    println!(
        "{:?}: cost {:?}, {} nodes",
        out.stats.termination, out.stats.incumbent, out.stats.nodes
    );
    if let Some(sol) = &out.solution {
        for (j, r) in sol.routes.iter().enumerate() {
            println!(
                "vehicle {}: {}",
                j + 1,
                describe_route(instance.layout(), r)
            );
        }
    }
    Ok(())
}
