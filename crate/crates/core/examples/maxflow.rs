//! The max-flow engine on its own: a 2x2 grid cut.

use curvseg::qpbo::FlowNetwork;

fn main() {
    let mut net = FlowNetwork::new(4);
    net.add_tweights(0, 9, 0);
    net.add_tweights(1, 4, 1);
    net.add_tweights(2, 0, 6);
    net.add_tweights(3, 1, 8);
    for (i, j) in [(0, 1), (2, 3), (0, 2), (1, 3)] {
        net.add_edge(i, j, 3, 3);
    }
    let flow = net.maxflow();
    let side: Vec<&str> = (0..4)
        .map(|i| if net.in_source_set(i) { "S" } else { "T" })
        .collect();
    println!("max flow {flow}, sides {side:?}");
}
