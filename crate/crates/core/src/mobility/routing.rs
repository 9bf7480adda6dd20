use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{directions_at, AgentState, MobilityError, MoverMode};
use crate::geo::{haversine_distance, GeoPolygon};
use crate::parallel::Execution;
use crate::world::World;

/// Waypoint sets up to this size are ordered by exhaustive search.
pub const EXACT_WAYPOINT_LIMIT: usize = 8;

const IMPROVE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Start,
    Intersection,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPosition {
    pub node_id: String,
    pub kind: KeyKind,
    /// Position of this node in [`Route::path`].
    pub path_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub nodes: Vec<String>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub key_positions: Vec<KeyPosition>,
    /// One leg per consecutive pair of key positions.
    pub legs: Vec<Leg>,
    pub path: Vec<String>,
    pub total_length: f64,
    pub transport_mode: String,
}

impl Route {
    pub fn start(&self) -> &str {
        &self.path[0]
    }

    pub fn stop(&self) -> &str {
        &self.path[self.path.len() - 1]
    }

    pub fn intersections(&self) -> impl Iterator<Item = &KeyPosition> {
        self.key_positions
            .iter()
            .filter(|k| k.kind == KeyKind::Intersection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths over all graph edges. Unreached nodes keep
/// `f64::INFINITY`.
pub(crate) fn dijkstra(w: &World, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = w.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem(0.0, src));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for l in w.links(u) {
            let nd = d + l.length;
            if nd < dist[l.to] {
                dist[l.to] = nd;
                prev[l.to] = Some(u);
                heap.push(HeapItem(nd, l.to));
            }
        }
    }
    (dist, prev)
}

fn edge_length(w: &World, a: usize, b: usize) -> f64 {
    w.links(a)
        .iter()
        .filter(|l| l.to == b)
        .map(|l| l.length)
        .fold(f64::INFINITY, f64::min)
}

fn shortest_path(w: &World, a: usize, b: usize) -> Result<Vec<usize>, MobilityError> {
    let (dist, prev) = dijkstra(w, a);
    if !dist[b].is_finite() {
        return Err(MobilityError::Unreachable {
            from: w.node_at(a).id.clone(),
            to: w.node_at(b).id.clone(),
        });
    }
    let mut path = vec![b];
    let mut cur = b;
    while let Some(p) = prev[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    Ok(path)
}

/// Builds a route along an explicit node path. Interior nodes of degree 3 or
/// more become intersection key positions.
pub(crate) fn route_from_path(w: &World, path: &[usize], transport_mode: &str) -> Route {
    let mut keys = vec![KeyPosition {
        node_id: w.node_at(path[0]).id.clone(),
        kind: KeyKind::Start,
        path_index: 0,
    }];
    for (i, &n) in path.iter().enumerate().take(path.len().saturating_sub(1)).skip(1) {
        if w.degree(n) >= 3 {
            keys.push(KeyPosition {
                node_id: w.node_at(n).id.clone(),
                kind: KeyKind::Intersection,
                path_index: i,
            });
        }
    }
    let last = path.len() - 1;
    keys.push(KeyPosition {
        node_id: w.node_at(path[last]).id.clone(),
        kind: KeyKind::Stop,
        path_index: last,
    });
    let legs: Vec<Leg> = keys
        .windows(2)
        .map(|k| {
            let span = &path[k[0].path_index..=k[1].path_index];
            Leg {
                nodes: span.iter().map(|&i| w.node_at(i).id.clone()).collect(),
                length: span.windows(2).map(|e| edge_length(w, e[0], e[1])).sum(),
            }
        })
        .collect();
    Route {
        total_length: legs.iter().map(|l| l.length).sum(),
        key_positions: keys,
        legs,
        path: path.iter().map(|&i| w.node_at(i).id.clone()).collect(),
        transport_mode: transport_mode.to_string(),
    }
}

/// Shortest route from `start` to `goal` over all street edges.
pub fn plan_route(
    w: &World,
    start: &str,
    goal: &str,
    transport_mode: &str,
) -> Result<Route, MobilityError> {
    let a = w.node_idx(start)?;
    let b = w.node_idx(goal)?;
    let path = shortest_path(w, a, b)?;
    Ok(route_from_path(w, &path, transport_mode))
}

/// Shortest route visiting `stops` in the given order.
pub fn plan_route_via(
    w: &World,
    stops: &[&str],
    transport_mode: &str,
) -> Result<Route, MobilityError> {
    let idx = stops
        .iter()
        .map(|s| w.node_idx(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut path = vec![idx[0]];
    for pair in idx.windows(2) {
        let leg = shortest_path(w, pair[0], pair[1])?;
        path.extend_from_slice(&leg[1..]);
    }
    Ok(route_from_path(w, &path, transport_mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelSpeeds(pub BTreeMap<String, f64>);

impl Default for TravelSpeeds {
    fn default() -> Self {
        Self(BTreeMap::from([
            ("walk".to_string(), 1.4),
            ("bicycle".to_string(), 4.2),
            ("drive".to_string(), 8.3),
        ]))
    }
}

/// Seconds needed to cover the route at the mode's speed.
pub fn estimate_travel_time(
    route: &Route,
    transport_mode: &str,
    speeds: &TravelSpeeds,
) -> Result<f64, MobilityError> {
    match speeds.0.get(transport_mode) {
        Some(&v) if v > 0.0 => Ok(route.total_length / v),
        _ => Err(MobilityError::UnknownMode(transport_mode.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub ordering: Vec<String>,
    pub route: Route,
    /// Network length of the chosen ordering.
    pub cost: f64,
    /// Network length of visiting the waypoints as given.
    pub given_order_cost: f64,
    pub exact: bool,
}

fn distance_matrix(
    w: &World,
    nodes: &[usize],
    exec: Execution,
) -> Vec<Vec<f64>> {
    exec.map(nodes, |&a| {
        let (d, _) = dijkstra(w, a);
        nodes.iter().map(|&b| d[b]).collect()
    })
}

fn open_cost(d: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut cost = 0.0;
    let mut cur = 0;
    for &o in order {
        cost += d[cur][o];
        cur = o;
    }
    cost
}

fn best_permutation(d: &[Vec<f64>], n: usize) -> Vec<usize> {
    fn rec(
        d: &[Vec<f64>],
        cur: usize,
        cost: f64,
        used: &mut [bool],
        seq: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if cost >= best.0 + IMPROVE_EPS && !best.1.is_empty() {
            return;
        }
        if seq.len() == used.len() {
            if best.1.is_empty() || cost < best.0 - IMPROVE_EPS {
                *best = (cost, seq.clone());
            }
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                seq.push(i + 1);
                rec(d, i + 1, cost + d[cur][i + 1], used, seq, best);
                seq.pop();
                used[i] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(d, 0, 0.0, &mut vec![false; n], &mut Vec::new(), &mut best);
    best.1
}

/// First-improvement 2-opt on an open path that starts at index 0 of `d`.
fn two_opt_open(d: &[Vec<f64>], order: &mut [usize]) {
    let n = order.len();
    loop {
        let mut improved = false;
        for i in 0..n {
            for j in i + 1..n {
                let a = if i == 0 { 0 } else { order[i - 1] };
                let removed_tail = if j + 1 < n { d[order[j]][order[j + 1]] } else { 0.0 };
                let added_tail = if j + 1 < n { d[order[i]][order[j + 1]] } else { 0.0 };
                let delta = d[a][order[j]] + added_tail - d[a][order[i]] - removed_tail;
                if delta < -IMPROVE_EPS {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return;
        }
    }
}

fn nearest_neighbor_open(d: &[Vec<f64>], n: usize) -> Vec<usize> {
    let mut left: Vec<usize> = (1..=n).collect();
    let mut cur = 0;
    let mut out = Vec::with_capacity(n);
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| d[cur][*a.1].total_cmp(&d[cur][*b.1]).then(a.1.cmp(b.1)))
            .expect("non-empty");
        cur = left.remove(k);
        out.push(cur);
    }
    out
}

/// Visiting order for `waypoints` that minimizes the walk from `start`.
/// Exact for up to [`EXACT_WAYPOINT_LIMIT`] waypoints; otherwise 2-opt from the
/// better of nearest-neighbor and the given order, so never worse than given.
pub fn optimize_waypoint_order(
    w: &World,
    start: &str,
    waypoints: &[String],
    exec: Execution,
) -> Result<WaypointPlan, MobilityError> {
    let mut nodes = vec![w.node_idx(start)?];
    for wp in waypoints {
        nodes.push(w.node_idx(wp)?);
    }
    let d = distance_matrix(w, &nodes, exec);
    for (j, &n) in nodes.iter().enumerate().skip(1) {
        if !d[0][j].is_finite() {
            return Err(MobilityError::Unreachable {
                from: start.to_string(),
                to: w.node_at(n).id.clone(),
            });
        }
    }
    let n = waypoints.len();
    let given: Vec<usize> = (1..=n).collect();
    let given_order_cost = open_cost(&d, &given);
    let exact = n <= EXACT_WAYPOINT_LIMIT;
    let order = if exact {
        best_permutation(&d, n)
    } else {
        let mut nn = nearest_neighbor_open(&d, n);
        two_opt_open(&d, &mut nn);
        let mut from_given = given.clone();
        two_opt_open(&d, &mut from_given);
        if open_cost(&d, &from_given) < open_cost(&d, &nn) - IMPROVE_EPS {
            from_given
        } else {
            nn
        }
    };
    let ordering: Vec<String> = order.iter().map(|&i| waypoints[i - 1].clone()).collect();
    let mut stops: Vec<&str> = vec![start];
    stops.extend(ordering.iter().map(String::as_str));
    let route = plan_route_via(w, &stops, "walk")?;
    Ok(WaypointPlan {
        cost: open_cost(&d, &order),
        given_order_cost,
        ordering,
        route,
        exact,
    })
}

/// Greedy navigator: at each node take the offered direction whose neighbor
/// is closest (by network distance) to the next key position still ahead.
pub fn point_navigate(
    w: &World,
    s: &AgentState,
    route: &Route,
    mode: MoverMode,
) -> Result<AgentState, MobilityError> {
    if s.node_id != route.start() {
        return Err(MobilityError::NotAtStart {
            expected: route.start().to_string(),
            found: s.node_id.clone(),
        });
    }
    let mut state = s.clone();
    let mut cur = w.node_idx(&s.node_id)?;
    for key in &route.key_positions[1..] {
        let target = w.node_idx(&key.node_id)?;
        let (dist, _) = dijkstra(w, target);
        while cur != target {
            let pick = |m: MoverMode| {
                directions_at(w, cur, m)
                    .into_iter()
                    .filter(|d| dist[d.neighbor] < dist[cur])
                    .min_by(|a, b| {
                        dist[a.neighbor]
                            .total_cmp(&dist[b.neighbor])
                            .then(a.heading.total_cmp(&b.heading))
                    })
            };
            let choice = match mode {
                MoverMode::Hybrid => pick(MoverMode::Web).or_else(|| pick(MoverMode::Grid)),
                m => pick(m),
            };
            let Some(d) = choice else {
                return Err(MobilityError::Stuck {
                    node: w.node_at(cur).id.clone(),
                });
            };
            state.advance(&w.node_at(d.neighbor).id, d.heading);
            cur = d.neighbor;
        }
    }
    Ok(state)
}

/// Closed-tour length over a cost matrix.
pub fn tour_cost(d: &[Vec<f64>], tour: &[usize]) -> f64 {
    if tour.len() < 2 {
        return 0.0;
    }
    (0..tour.len())
        .map(|i| d[tour[i]][tour[(i + 1) % tour.len()]])
        .sum()
}

fn nearest_neighbor_tour(d: &[Vec<f64>]) -> Vec<usize> {
    let n = d.len();
    let mut seen = vec![false; n];
    let mut tour = vec![0];
    seen[0] = true;
    let mut cur = 0;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !seen[j])
            .min_by(|&a, &b| d[cur][a].total_cmp(&d[cur][b]).then(a.cmp(&b)))
            .expect("unvisited node left");
        seen[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

fn two_opt_closed(d: &[Vec<f64>], tour: &mut [usize]) {
    let n = tour.len();
    if n < 4 {
        return;
    }
    loop {
        let mut improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let (a, b) = (tour[i - 1], tour[i]);
                let (c, e) = (tour[j], tour[(j + 1) % n]);
                let delta = d[a][c] + d[b][e] - d[a][b] - d[c][e];
                if delta < -IMPROVE_EPS {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return;
        }
    }
}

/// Pairwise cost between region nodes: network distance, or great-circle
/// distance where the network does not connect them.
pub(crate) fn region_costs(w: &World, nodes: &[usize], exec: Execution) -> Vec<Vec<f64>> {
    let mut d = distance_matrix(w, nodes, exec);
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if !v.is_finite() {
                *v = haversine_distance(w.node_at(nodes[i]).coord, w.node_at(nodes[j]).coord);
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    /// Closed tour over every node in the region, starting at the smallest id.
    pub nodes: Vec<String>,
    pub cost: f64,
    pub nearest_neighbor_cost: f64,
}

/// Sweep plan over every street node inside `region`: nearest-neighbor tour
/// from the smallest id, then 2-opt until no swap improves it.
pub fn region_navigate_plan(
    w: &World,
    region: &GeoPolygon,
    exec: Execution,
) -> Result<RegionPlan, MobilityError> {
    let nodes = w.nodes_in(region);
    if nodes.is_empty() {
        return Err(MobilityError::EmptyRegion);
    }
    let d = region_costs(w, &nodes, exec);
    let mut tour = nearest_neighbor_tour(&d);
    let nearest_neighbor_cost = tour_cost(&d, &tour);
    two_opt_closed(&d, &mut tour);
    Ok(RegionPlan {
        cost: tour_cost(&d, &tour),
        nearest_neighbor_cost,
        nodes: tour.iter().map(|&i| w.node_at(nodes[i]).id.clone()).collect(),
    })
}
