//! Discrete non-tangential accessibility checks on grid masks: corkscrew
//! points for a set and its complement, and Harnack chains of balls.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::PositivityMask;
use crate::error::{Error, Result};
use crate::grid::{dist, GridSpec, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NTAParams {
    /// Corkscrew constant `M ≥ 1`.
    pub m: f64,
    /// Scale cutoff: corkscrews are only requested for `r < r₀`.
    pub r0: f64,
    /// Chains are requested for `|P₁ − P₂| < C ε`.
    pub c_chain: f64,
}

impl NTAParams {
    pub fn new(m: f64, r0: f64, c_chain: f64) -> Result<Self> {
        let p = NTAParams { m, r0, c_chain };
        p.validate()?;
        Ok(p)
    }

    /// `r₀ = M⁻¹ = ρ`.
    pub fn coupled(rho: f64) -> Result<Self> {
        Self::new(1.0 / rho, rho, 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("M = {} must be at least 1", self.m)));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::InvalidParameter(format!("r0 = {} must be positive", self.r0)));
        }
        if !(self.c_chain > 0.0 && self.c_chain.is_finite()) {
            return Err(Error::InvalidParameter("c_chain must be positive".into()));
        }
        Ok(())
    }
}

/// Distance from each node of a set to the nearest node outside it.
///
/// Seeds propagate through 8-neighbours in order of Euclidean distance, so
/// every node records the seed that reached it first. The boundary is put
/// halfway between nodes: clearance is the seed distance minus `h/2`.
#[derive(Clone, Debug)]
struct DistanceMap {
    seed_distance: Vec<f64>,
    half: f64,
}

#[derive(PartialEq)]
struct Item(f64, usize, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];

impl DistanceMap {
    fn new(grid: &GridSpec, member: &[bool]) -> Self {
        let n = grid.len();
        let mut seed_distance = vec![f64::INFINITY; n];
        let mut seed = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for i in 0..n {
            if !member[i] {
                seed_distance[i] = 0.0;
                seed[i] = i;
                heap.push(Item(0.0, i, i));
            }
        }
        let neighbours: &[(isize, isize)] = if grid.dim() == 1 { &NEIGHBOURS[..2] } else { &NEIGHBOURS };
        while let Some(Item(d, i, s)) = heap.pop() {
            if d > seed_distance[i] || seed[i] != s {
                continue;
            }
            for &(di, dj) in neighbours {
                let Some(j) = grid.offset(i, di, dj) else { continue };
                let dn = dist(grid.position(j), grid.position(s));
                if dn < seed_distance[j] {
                    seed_distance[j] = dn;
                    seed[j] = s;
                    heap.push(Item(dn, j, s));
                }
            }
        }
        DistanceMap { seed_distance, half: 0.5 * grid.h() }
    }

    /// Distance from a member node to the set boundary; zero off the set.
    fn clearance(&self, idx: usize) -> f64 {
        (self.seed_distance[idx] - self.half).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Corkscrew {
    Found {
        point: Point,
        distance: f64,
        clearance: f64,
    },
    /// No annulus node clears `r/M`; `best` is the largest clearance seen.
    NotFound {
        best: f64,
    },
    /// The set being tested has no nodes at all.
    NoComplementNodes,
}

impl Corkscrew {
    pub fn found(&self) -> bool {
        matches!(self, Corkscrew::Found { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    /// `dist(B, ∂D)`.
    pub clearance: f64,
    /// `M r > dist(B, ∂D) > r / M`.
    pub admissible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackChain {
    pub balls: Vec<Ball>,
    /// Number of balls: an upper bound for the shortest chain.
    pub length: usize,
    /// Every ball admissible and consecutive balls overlapping.
    pub valid: bool,
}

/// Distance transforms of a mask and of its complement, computed once.
///
/// Nodes outside the grid domain belong to the complement.
#[derive(Clone, Debug)]
pub struct NtaChecker {
    grid: Arc<GridSpec>,
    inside: Vec<bool>,
    domain: DistanceMap,
    complement: DistanceMap,
    complement_nodes: usize,
}

impl NtaChecker {
    pub fn new(mask: &PositivityMask) -> Self {
        Self::from_membership(mask.grid().clone(), mask.inside().to_vec())
    }

    pub fn from_membership(grid: Arc<GridSpec>, inside: Vec<bool>) -> Self {
        let outside: Vec<bool> = inside.iter().map(|v| !v).collect();
        let domain = DistanceMap::new(&grid, &inside);
        let complement = DistanceMap::new(&grid, &outside);
        let complement_nodes = outside.iter().filter(|v| **v).count();
        NtaChecker { grid, inside, domain, complement, complement_nodes }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Discrete `dist(p, ∂D)` for a point of the mask, through its nearest node.
    pub fn clearance_at(&self, p: Point) -> Option<f64> {
        let i = self.grid.nearest_node(p)?;
        self.inside[i].then(|| self.domain.clearance(i))
    }

    fn scan(&self, x0: Point, r: f64, params: &NTAParams, complement: bool) -> Result<Corkscrew> {
        params.validate()?;
        let h = self.grid.h();
        if r < 2.0 * h {
            return Err(Error::InvalidParameter(format!("radius {r} is below 2h = {}", 2.0 * h)));
        }
        if r >= params.r0 {
            return Err(Error::InvalidParameter(format!("radius {r} is not below r0 = {}", params.r0)));
        }
        if complement && self.complement_nodes == 0 {
            return Ok(Corkscrew::NoComplementNodes);
        }
        let map = if complement { &self.complement } else { &self.domain };
        let lo = r / params.m;
        let mut best: Option<(usize, f64)> = None;
        let mut best_any = 0.0f64;
        for i in self.grid.box_nodes(x0, r) {
            if self.inside[i] == complement {
                continue;
            }
            let d = dist(self.grid.position(i), x0);
            if !(d > lo && d < r) {
                continue;
            }
            let c = map.clearance(i);
            best_any = best_any.max(c);
            if c > lo && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((i, c));
            }
        }
        Ok(match best {
            Some((i, c)) => {
                let p = self.grid.position(i);
                Corkscrew::Found { point: p, distance: dist(p, x0), clearance: c }
            }
            None => Corkscrew::NotFound { best: best_any },
        })
    }

    /// Corkscrew point of the mask in `r/M < |P − x₀| < r`.
    pub fn corkscrew(&self, x0: Point, r: f64, params: &NTAParams) -> Result<Corkscrew> {
        self.scan(x0, r, params, false)
    }

    /// Corkscrew point of the complement.
    pub fn corkscrew_complement(&self, x0: Point, r: f64, params: &NTAParams) -> Result<Corkscrew> {
        self.scan(x0, r, params, true)
    }

    /// Chain of balls from `p1` to `p2` along a shortest path in the
    /// quasi-hyperbolic metric `ds / dist(·, ∂D)` over mask nodes.
    pub fn harnack_chain(&self, p1: Point, p2: Point, clearance: f64, params: &NTAParams) -> Result<HarnackChain> {
        params.validate()?;
        let node = |p: Point| -> Result<usize> {
            let i = self.grid.nearest_node(p).ok_or(Error::OutsideDomain { point: p })?;
            if !self.inside[i] {
                return Err(Error::InvalidParameter(format!("point {p:?} is not in the mask")));
            }
            if self.domain.clearance(i) <= clearance {
                return Err(Error::InvalidParameter(format!("point {p:?} does not clear {clearance}")));
            }
            Ok(i)
        };
        let (a, b) = (node(p1)?, node(p2)?);
        if dist(p1, p2) >= params.c_chain * clearance {
            return Err(Error::InvalidParameter(format!(
                "|P1 - P2| = {} is not below C eps = {}",
                dist(p1, p2),
                params.c_chain * clearance
            )));
        }
        let path = self.geodesic(a, b)?;

        let mut pts: Vec<Point> = Vec::with_capacity(path.len() + 2);
        pts.push(p1);
        pts.extend(path.iter().map(|&i| self.grid.position(i)));
        pts.push(p2);
        let clear: Vec<f64> = std::iter::once(self.domain.clearance(a))
            .chain(path.iter().map(|&i| self.domain.clearance(i)))
            .chain(std::iter::once(self.domain.clearance(b)))
            .collect();

        let make = |k: usize| {
            let radius = 0.5 * clear[k];
            let c = clear[k] - radius;
            Ball { center: pts[k], radius, clearance: c, admissible: params.m * radius > c && c > radius / params.m }
        };
        let mut balls = vec![make(0)];
        let mut k = 0;
        let last = pts.len() - 1;
        let mut overlaps = true;
        while dist(pts[k], pts[last]) >= balls.last().unwrap().radius {
            let r = balls.last().unwrap().radius;
            // Farthest path point still inside the current ball.
            let mut next = k + 1;
            while next < last && dist(pts[next + 1], pts[k]) < r {
                next += 1;
            }
            let ball = make(next);
            if dist(pts[next], pts[k]) >= r + ball.radius {
                overlaps = false;
            }
            balls.push(ball);
            k = next;
            if k == last {
                break;
            }
        }
        let valid = overlaps && balls.iter().all(|b| b.admissible);
        Ok(HarnackChain { length: balls.len(), balls, valid })
    }

    fn geodesic(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        let n = self.grid.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        cost[a] = 0.0;
        heap.push(Item(0.0, a, a));
        let neighbours: &[(isize, isize)] = if self.grid.dim() == 1 { &NEIGHBOURS[..2] } else { &NEIGHBOURS };
        let h = self.grid.h();
        while let Some(Item(c, i, _)) = heap.pop() {
            if c > cost[i] {
                continue;
            }
            if i == b {
                break;
            }
            for &(di, dj) in neighbours {
                let Some(j) = self.grid.offset(i, di, dj) else { continue };
                if !self.inside[j] {
                    continue;
                }
                let step = dist(self.grid.position(i), self.grid.position(j));
                let w = step / (0.5 * (self.domain.clearance(i) + self.domain.clearance(j))).max(0.5 * h);
                if c + w < cost[j] {
                    cost[j] = c + w;
                    prev[j] = i;
                    heap.push(Item(c + w, j, j));
                }
            }
        }
        if !cost[b].is_finite() {
            return Err(Error::Disconnected);
        }
        let mut path = vec![b];
        while *path.last().unwrap() != a {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Ok(path)
    }
}

pub fn corkscrew(mask: &PositivityMask, x0: Point, r: f64, params: &NTAParams) -> Result<Corkscrew> {
    NtaChecker::new(mask).corkscrew(x0, r, params)
}

pub fn corkscrew_complement(mask: &PositivityMask, x0: Point, r: f64, params: &NTAParams) -> Result<Corkscrew> {
    NtaChecker::new(mask).corkscrew_complement(x0, r, params)
}

pub fn harnack_chain(
    mask: &PositivityMask,
    p1: Point,
    p2: Point,
    clearance: f64,
    params: &NTAParams,
) -> Result<HarnackChain> {
    NtaChecker::new(mask).harnack_chain(p1, p2, clearance, params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorkscrewRecord {
    pub x0: Point,
    pub r: f64,
    pub result: Corkscrew,
}

/// Corkscrew verdicts for the domain and its complement over a set of
/// boundary points and radii. The Harnack-chain length function is not
/// certified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtaVerdict {
    pub params: NTAParams,
    pub domain: Vec<CorkscrewRecord>,
    pub complement: Vec<CorkscrewRecord>,
    pub domain_ok: bool,
    pub complement_ok: bool,
    pub passed: bool,
}

pub fn check_corkscrews(
    checker: &NtaChecker,
    points: &[Point],
    radii: &[f64],
    params: &NTAParams,
) -> Result<NtaVerdict> {
    let mut domain = Vec::new();
    let mut complement = Vec::new();
    for &x0 in points {
        for &r in radii {
            domain.push(CorkscrewRecord { x0, r, result: checker.corkscrew(x0, r, params)? });
            complement.push(CorkscrewRecord { x0, r, result: checker.corkscrew_complement(x0, r, params)? });
        }
    }
    let domain_ok = domain.iter().all(|c| c.result.found());
    let complement_ok = complement.iter().all(|c| c.result.found());
    Ok(NtaVerdict { params: *params, domain, complement, domain_ok, complement_ok, passed: domain_ok && complement_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{positivity_set, ThresholdRule};
    use crate::oracle::{self, SlitExample};

    fn half_plane(n: usize) -> NtaChecker {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, n).unwrap());
        let inside = (0..g.len()).map(|i| g.position(i)[1] > 0.0).collect();
        NtaChecker::from_membership(g, inside)
    }

    fn params(m: f64) -> NTAParams {
        NTAParams::new(m, 1.0, 4.0).unwrap()
    }

    #[test]
    fn half_plane_corkscrews() {
        let c = half_plane(101);
        match c.corkscrew([0.0, 0.0], 0.5, &params(2.0)).unwrap() {
            Corkscrew::Found { point, clearance, .. } => {
                assert!(point[1] > 0.25 && clearance > 0.25, "{point:?}");
            }
            other => panic!("{other:?}"),
        }
        assert!(c.corkscrew_complement([0.0, 0.0], 0.5, &params(2.0)).unwrap().found());
    }

    #[test]
    fn clearance_is_distance_to_midline() {
        let c = half_plane(101);
        let d = c.clearance_at([0.1, 0.3]).unwrap();
        assert!((d - (0.3 - 0.01)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn small_radius_is_rejected() {
        let c = half_plane(101);
        assert!(c.corkscrew([0.0, 0.0], 0.03, &params(2.0)).is_err());
        assert!(c.corkscrew([0.0, 0.0], 1.5, &params(2.0)).is_err());
    }

    #[test]
    fn full_mask_has_no_complement() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 41).unwrap());
        let c = NtaChecker::from_membership(g.clone(), vec![true; g.len()]);
        assert_eq!(c.corkscrew_complement([0.0, 0.0], 0.3, &params(2.0)).unwrap(), Corkscrew::NoComplementNodes);
    }

    #[test]
    fn disk_mask_corkscrew_on_circle() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 161).unwrap());
        let inside = (0..g.len()).map(|i| dist(g.position(i), [0.0, 0.0]) < 0.6).collect();
        let c = NtaChecker::from_membership(g, inside);
        assert!(c.corkscrew([0.6, 0.0], 0.3, &params(2.0)).unwrap().found());
        assert!(c.corkscrew_complement([0.6, 0.0], 0.3, &params(2.0)).unwrap().found());
    }

    #[test]
    fn slit_complement_has_no_corkscrew() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.2, 241).unwrap());
        let u = oracle::sample(&SlitExample, g);
        let mask = positivity_set(&u, &ThresholdRule::default());
        let c = NtaChecker::new(&mask);
        assert!(!c.corkscrew_complement([-0.5, 0.0], 0.1, &params(2.0)).unwrap().found());
        assert!(c.corkscrew([-0.5, 0.0], 0.1, &params(2.0)).unwrap().found());
    }

    #[test]
    fn half_plane_chain_is_valid() {
        let c = half_plane(201);
        let chain = c.harnack_chain([-0.3, 0.2], [0.3, 0.2], 0.18, &params(2.0)).unwrap();
        assert!(chain.valid, "{chain:?}");
        for w in chain.balls.windows(2) {
            assert!(dist(w[0].center, w[1].center) < w[0].radius + w[1].radius);
        }
    }

    #[test]
    fn slit_chain_routes_around_the_tip() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.2, 241).unwrap());
        let u = oracle::sample(&SlitExample, g);
        let c = NtaChecker::new(&positivity_set(&u, &ThresholdRule::default()));
        let chain = c.harnack_chain([-0.3, 0.05], [-0.3, -0.05], 0.03, &params(2.0)).unwrap();
        assert!(chain.balls.iter().any(|b| b.center[0] > -0.05), "{chain:?}");
        assert!(chain.length > 3);
    }

    #[test]
    fn chain_endpoint_outside_mask_is_an_error() {
        let c = half_plane(101);
        assert!(c.harnack_chain([-0.3, 0.2], [0.3, -0.2], 0.1, &params(2.0)).is_err());
    }

    #[test]
    fn disconnected_points() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 41).unwrap());
        let inside = (0..g.len()).map(|i| g.position(i)[1].abs() > 0.2).collect();
        let c = NtaChecker::from_membership(g, inside);
        let p = NTAParams::new(2.0, 1.0, 100.0).unwrap();
        assert!(matches!(c.harnack_chain([0.0, 0.5], [0.0, -0.5], 0.1, &p), Err(Error::Disconnected)));
    }
}
