//! The static multigraph of one frame and its degree census.
//!
//! Edges come from three sources: a clique per verification team, a cycle
//! per cooperation ring, and links from each verifier to every member of
//! the fractal its team verifies. Verification links are counted at the
//! verifier end only.

use std::collections::{BTreeMap, HashMap};

use lor_analytics::degree::DegreeModel;
use lor_core::ids::TraderId;
use lor_core::model::FractalStatus;
use lor_core::randomness::HashDraw;
use lor_core::Simulation;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<TraderId>,
    pub teams: Vec<Vec<TraderId>>,
    /// Members of each ring in cycle order.
    pub rings: Vec<Vec<TraderId>>,
    /// A team index and the members of the fractal it verifies.
    pub verifications: Vec<(usize, Vec<TraderId>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDegree {
    pub trader: TraderId,
    pub team: u64,
    pub ring: u64,
    pub verification: u64,
}

impl NodeDegree {
    pub fn total(&self) -> u64 {
        self.team + self.ring + self.verification
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeCensus {
    pub nodes: Vec<NodeDegree>,
    pub histogram: BTreeMap<u64, u64>,
    pub mean: f64,
}

enum Edge {
    Team(TraderId, TraderId),
    Ring(TraderId, TraderId),
    Link(TraderId),
}

fn edges(s: &GraphSnapshot) -> Vec<Edge> {
    let mut out = Vec::new();
    for team in &s.teams {
        for (i, &a) in team.iter().enumerate() {
            for &b in &team[i + 1..] {
                out.push(Edge::Team(a, b));
            }
        }
    }
    for ring in s.rings.iter().filter(|r| r.len() >= 2) {
        for (i, &a) in ring.iter().enumerate() {
            out.push(Edge::Ring(a, ring[(i + 1) % ring.len()]));
        }
    }
    for (team, members) in &s.verifications {
        for &v in &s.teams[*team] {
            out.extend(members.iter().map(|_| Edge::Link(v)));
        }
    }
    out
}

/// Per-trader degree by edge counting, split by source.
pub fn degree_census(s: &GraphSnapshot) -> DegreeCensus {
    let index: HashMap<TraderId, usize> = s.nodes.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut nodes: Vec<NodeDegree> =
        s.nodes.iter().map(|&trader| NodeDegree { trader, team: 0, ring: 0, verification: 0 }).collect();
    for e in edges(s) {
        match e {
            Edge::Team(a, b) => {
                nodes[index[&a]].team += 1;
                nodes[index[&b]].team += 1;
            }
            Edge::Ring(a, b) => {
                nodes[index[&a]].ring += 1;
                nodes[index[&b]].ring += 1;
            }
            Edge::Link(v) => nodes[index[&v]].verification += 1,
        }
    }
    let mut histogram = BTreeMap::new();
    for n in &nodes {
        *histogram.entry(n.total()).or_insert(0) += 1;
    }
    let mean = if nodes.is_empty() {
        0.0
    } else {
        nodes.iter().map(|n| n.total() as f64).sum::<f64>() / nodes.len() as f64
    };
    DegreeCensus { nodes, histogram, mean }
}

/// The structure the protocol holds between two checkpoints: teams of
/// submitted fractals, their rings, and rings still in the pool.
pub fn snapshot_of(sim: &Simulation) -> GraphSnapshot {
    let tcb = sim.tcb();
    let members = |ring: &lor_core::model::CooperationRing| -> Vec<TraderId> {
        ring.coin_ids.iter().filter_map(|c| tcb.coin(*c)).map(|c| c.owner).collect()
    };
    let mut s = GraphSnapshot { nodes: tcb.trader_ids(), ..Default::default() };
    for f in tcb.fractals().filter(|f| f.status == FractalStatus::Submitted) {
        let mut fractal_members = Vec::new();
        for r in f.ring_ids.iter().filter_map(|r| tcb.ring(*r)) {
            let m = members(r);
            fractal_members.extend(&m);
            s.rings.push(m);
        }
        s.teams.push(f.team.members().to_vec());
        s.verifications.push((s.teams.len() - 1, fractal_members));
    }
    for r in sim.pooled_rings().iter().filter_map(|r| tcb.ring(*r)) {
        s.rings.push(members(r));
    }
    s
}

/// One sampled frame of the idealised model: ℓ uniform permutations, teams
/// partitioning the traders into groups of κ, and one fractal per team.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub snapshot: GraphSnapshot,
    pub kappa: usize,
    pub ell: usize,
    /// Permutations in which each trader is a fixed point.
    pub fixed: Vec<u32>,
    /// Team of each trader, if any.
    pub team_of: Vec<Option<usize>>,
}

/// Draws a frame. For every ring size i that occurs at least twice among
/// the ℓ permutations, a team's fractal takes each ring of that size with
/// probability ξᵢ.
pub fn sample_frame(n: usize, model: &DegreeModel, state: &mut HashDraw) -> Frame {
    let (kappa, ell) = (model.kappa as usize, model.ell as usize);
    let ids: Vec<TraderId> = (0..n as u64).map(TraderId).collect();
    let mut fixed = vec![0u32; n];
    let mut rings: Vec<Vec<TraderId>> = Vec::new();
    for _ in 0..ell {
        let mut perm: Vec<usize> = (0..n).collect();
        state.shuffle(&mut perm);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(ids[i]);
                i = perm[i];
            }
            if cycle.len() == 1 {
                fixed[start] += 1;
            } else {
                rings.push(cycle);
            }
        }
    }
    let mut by_size: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, ring) in rings.iter().enumerate() {
        by_size.entry(ring.len()).or_default().push(r);
    }

    let mut order = ids.clone();
    state.shuffle(&mut order);
    let mut team_of = vec![None; n];
    let mut teams = Vec::new();
    for chunk in order.chunks_exact(kappa.max(1)) {
        for t in chunk {
            team_of[t.0 as usize] = Some(teams.len());
        }
        teams.push(chunk.to_vec());
    }
    let mut verifications = Vec::with_capacity(teams.len());
    for team in 0..teams.len() {
        let mut members = Vec::new();
        for (&size, class) in by_size.iter().filter(|(_, c)| c.len() >= 2) {
            let xi = model.xi(size as u64);
            for &r in class {
                if state.bernoulli(xi) {
                    members.extend(&rings[r]);
                }
            }
        }
        verifications.push((team, members));
    }
    Frame { snapshot: GraphSnapshot { nodes: ids, teams, rings, verifications }, kappa, ell, fixed, team_of }
}

impl Frame {
    /// (κ−1) + 2(ℓ−s) + μ for trader `i`, where μ is the size of the
    /// fractal its team verifies.
    pub fn formula_degree(&self, i: usize) -> u64 {
        let (team, mu) = match self.team_of[i] {
            Some(t) => (self.kappa as u64 - 1, self.snapshot.verifications[t].1.len() as u64),
            None => (0, 0),
        };
        team + 2 * (self.ell as u64 - self.fixed[i] as u64) + mu
    }

    /// First trader whose counted degree differs from the formula.
    pub fn decomposition_mismatch(&self, census: &DegreeCensus) -> Option<(TraderId, u64, u64)> {
        census
            .nodes
            .iter()
            .enumerate()
            .map(|(i, d)| (d.trader, self.formula_degree(i), d.total()))
            .find(|(_, want, got)| want != got)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: u64) -> TraderId {
        TraderId(i)
    }

    #[test]
    fn lone_trader_has_degree_zero() {
        let s = GraphSnapshot { nodes: vec![t(0)], ..Default::default() };
        let c = degree_census(&s);
        assert_eq!(c.nodes[0].total(), 0);
        assert_eq!(c.histogram, BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn components_add_up() {
        // Trader 0 sits in a team of 5, joins two rings and its team
        // verifies a fractal with 7 members.
        let nodes: Vec<TraderId> = (0..12).map(t).collect();
        let s = GraphSnapshot {
            nodes,
            teams: vec![(0..5).map(t).collect()],
            rings: vec![vec![t(0), t(5)], vec![t(0), t(6), t(7)]],
            verifications: vec![(0, (5..12).map(t).collect())],
        };
        let c = degree_census(&s);
        let d = c.nodes[0];
        assert_eq!((d.team, d.ring, d.verification), (4, 4, 7));
        assert_eq!(d.total(), 15);
        // Verification links count at the verifier only.
        assert_eq!(c.nodes[11].total(), 0);
        assert_eq!(c.nodes[5].total(), 2);
    }

    #[test]
    fn frame_matches_formula() {
        let model = DegreeModel::bounding(5, 3);
        for seed in 0..5 {
            let f = sample_frame(100, &model, &mut HashDraw::from_seed(seed));
            let c = degree_census(&f.snapshot);
            assert_eq!(f.decomposition_mismatch(&c), None);
            assert_eq!(c.histogram.values().sum::<u64>(), 100);
        }
    }
}
