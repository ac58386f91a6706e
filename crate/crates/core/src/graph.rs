//! The seven-node upper-body graph and the channel-squeezing schedule.
//!
//! Nodes are 0-based internally (0 = right wrist ... 6 = left wrist) and
//! printed 1-based. The skeleton is a chain through the neck, so graph
//! distance between nodes `i` and `j` is `|i - j|`.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::pose::NODE_COUNT;

/// Weighted neighbor lists used by the locally connected layers.
///
/// `nodes[i]` lists `(j, a_ij)` for every `j` in the receptive field of `i`,
/// in ascending `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub nodes: Vec<Vec<(usize, f64)>>,
}

impl Aggregation {
    /// Keeps the non-zero entries of a dense matrix.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Self {
        Aggregation {
            nodes: matrix
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, &a)| a != 0.0)
                        .map(|(j, &a)| (j, a))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn pair_count(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletalGraph {
    edges: Vec<(usize, usize)>,
    adjacency: [[f64; NODE_COUNT]; NODE_COUNT],
    dist: [[usize; NODE_COUNT]; NODE_COUNT],
    /// Temporal edges between the same joint in consecutive frames. Part of
    /// the graph definition; the layers here are purely spatial and ignore it.
    pub inter_frame_edges: bool,
}

/// Builds the fixed chain RWrist-RElbow-RShoulder-Neck-LShoulder-LElbow-LWrist.
///
/// The adjacency is `D^-1/2 (A + I) D^-1/2` with each row then rescaled to sum to 1.
pub fn build_graph() -> SkeletalGraph {
    let edges: Vec<(usize, usize)> = (0..NODE_COUNT - 1).map(|i| (i, i + 1)).collect();

    let mut a = [[0.0; NODE_COUNT]; NODE_COUNT];
    for i in 0..NODE_COUNT {
        a[i][i] = 1.0;
    }
    for &(i, j) in &edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut adjacency = [[0.0; NODE_COUNT]; NODE_COUNT];
    for i in 0..NODE_COUNT {
        for j in 0..NODE_COUNT {
            adjacency[i][j] = a[i][j] / (deg[i] * deg[j]).sqrt();
        }
        let s: f64 = adjacency[i].iter().sum();
        for v in adjacency[i].iter_mut() {
            *v /= s;
        }
    }

    let mut dist = [[usize::MAX; NODE_COUNT]; NODE_COUNT];
    for (src, row) in dist.iter_mut().enumerate() {
        row[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &(p, q) in &edges {
                let v = if p == u {
                    q
                } else if q == u {
                    p
                } else {
                    continue;
                };
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    SkeletalGraph {
        edges,
        adjacency,
        dist,
        inter_frame_edges: true,
    }
}

impl SkeletalGraph {
    pub fn node_count(&self) -> usize {
        NODE_COUNT
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &[[f64; NODE_COUNT]; NODE_COUNT] {
        &self.adjacency
    }

    pub fn dist(&self, i: usize, j: usize) -> usize {
        self.dist[i][j]
    }

    /// One-hop neighbors plus self, weighted by the normalized adjacency.
    pub fn aggregation(&self) -> Aggregation {
        let dense: Vec<Vec<f64>> = self.adjacency.iter().map(|r| r.to_vec()).collect();
        Aggregation::from_dense(&dense)
    }
}

/// Squeezing ratios: `b` for nodes one or two hops away, `d` per hop beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeRatios {
    pub b: f64,
    pub d: f64,
}

impl SqueezeRatios {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("d", self.d)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("squeeze ratio {name}={v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Output width for a node at graph distance `dist` from the target.
pub fn squeezed_width(dist: usize, c_in: usize, ratios: SqueezeRatios) -> usize {
    let raw = match dist {
        0 => return c_in,
        1 | 2 => ratios.b * c_in as f64,
        _ => ratios.d.powi(dist as i32) * c_in as f64,
    };
    (raw.floor() as usize).clamp(1, c_in)
}

/// Per-node widths for one target node `m` (0-based).
pub fn squeeze_schedule(
    g: &SkeletalGraph,
    m: usize,
    c_in: usize,
    ratios: SqueezeRatios,
) -> Result<[usize; NODE_COUNT]> {
    ratios.validate()?;
    if c_in == 0 {
        return Err(Error::Config("C_in must be at least 1".into()));
    }
    if m >= NODE_COUNT {
        return Err(Error::Config(format!("target node {} out of range", m + 1)));
    }
    let mut row = [0; NODE_COUNT];
    for (k, w) in row.iter_mut().enumerate() {
        *w = squeezed_width(g.dist(m, k), c_in, ratios);
    }
    Ok(row)
}

/// Widths for every target node, plus the fusion order of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeSchedule {
    pub c_in: usize,
    pub ratios: SqueezeRatios,
    pub widths: Vec<[usize; NODE_COUNT]>,
    /// For target `m`: self, then short-range nodes, then long-range nodes,
    /// each group in ascending node order.
    pub order: Vec<Vec<usize>>,
}

impl SqueezeSchedule {
    pub fn new(g: &SkeletalGraph, c_in: usize, ratios: SqueezeRatios) -> Result<Self> {
        let widths = (0..NODE_COUNT)
            .map(|m| squeeze_schedule(g, m, c_in, ratios))
            .collect::<Result<Vec<_>>>()?;
        let order = (0..NODE_COUNT)
            .map(|m| {
                let mut o = vec![m];
                o.extend((0..NODE_COUNT).filter(|&k| matches!(g.dist(m, k), 1 | 2)));
                o.extend((0..NODE_COUNT).filter(|&k| g.dist(m, k) > 2));
                o
            })
            .collect();
        Ok(SqueezeSchedule {
            c_in,
            ratios,
            widths,
            order,
        })
    }

    /// Length of the fused vector for target `m`.
    pub fn fused_width(&self, m: usize) -> usize {
        self.widths[m].iter().sum()
    }

    /// `(node, width, offset)` segments of the fused vector for target `m`.
    pub fn segments(&self, m: usize) -> Vec<(usize, usize, usize)> {
        let mut offset = 0;
        self.order[m]
            .iter()
            .map(|&k| {
                let w = self.widths[m][k];
                let seg = (k, w, offset);
                offset += w;
                seg
            })
            .collect()
    }
}

impl fmt::Display for SqueezeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m")?;
        for k in 1..=NODE_COUNT {
            write!(f, ",k{k}")?;
        }
        writeln!(f, ",fused")?;
        for (m, row) in self.widths.iter().enumerate() {
            write!(f, "{}", m + 1)?;
            for w in row {
                write!(f, ",{w}")?;
            }
            writeln!(f, ",{}", self.fused_width(m))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PAPER: SqueezeRatios = SqueezeRatios { b: 0.9, d: 0.125 };

    #[test]
    fn chain_distances() {
        let g = build_graph();
        assert_eq!(g.dist(0, 1), 1);
        assert_eq!(g.dist(0, 3), 3);
        assert_eq!(g.dist(0, 6), 6);
        for i in 0..7 {
            assert_eq!(g.dist(i, i), 0);
            for j in 0..7 {
                assert_eq!(g.dist(i, j), g.dist(j, i));
            }
        }
    }

    #[test]
    fn adjacency_rows_sum_to_one() {
        let g = build_graph();
        for row in g.adjacency() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&a| a >= 0.0));
        }
        // sparsity pattern is symmetric and mirror-invariant
        let a = g.adjacency();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(a[i][j] > 0.0, a[j][i] > 0.0);
                assert!((a[i][j] - a[6 - i][6 - j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregation_is_one_hop_plus_self() {
        let agg = build_graph().aggregation();
        assert_eq!(agg.nodes[0].iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(agg.nodes[3].iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(agg.pair_count(), 19);
    }

    #[test]
    fn schedule_examples() {
        let g = build_graph();
        assert_eq!(squeeze_schedule(&g, 0, 128, PAPER).unwrap(), [128, 115, 115, 1, 1, 1, 1]);
        assert_eq!(squeeze_schedule(&g, 3, 128, PAPER).unwrap(), [1, 115, 115, 128, 115, 115, 1]);
        let ones = SqueezeRatios { b: 1.0, d: 1.0 };
        for m in 0..7 {
            assert_eq!(squeeze_schedule(&g, m, 37, ones).unwrap(), [37; 7]);
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let g = build_graph();
        for (b, d) in [(0.0, 0.1), (1.2, 0.1), (0.9, -0.1), (0.9, f64::NAN)] {
            assert!(matches!(
                squeeze_schedule(&g, 0, 8, SqueezeRatios { b, d }),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn fusion_order_groups_by_range() {
        let s = SqueezeSchedule::new(&build_graph(), 128, PAPER).unwrap();
        assert_eq!(s.order[0], vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(s.order[3], vec![3, 1, 2, 4, 5, 0, 6]);
        assert_eq!(s.fused_width(0), 362);
        let segs = s.segments(3);
        assert_eq!(segs[0], (3, 128, 0));
        assert_eq!(segs.last().copied(), Some((6, 1, 128 + 4 * 115 + 1)));
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_mirrored_and_positive(
            b in 0.01f64..=1.0, d in 0.01f64..=1.0, c_in in 1usize..300, m in 0usize..7
        ) {
            let g = build_graph();
            let ratios = SqueezeRatios { b, d };
            let row = squeeze_schedule(&g, m, c_in, ratios).unwrap();
            let mirror = squeeze_schedule(&g, 6 - m, c_in, ratios).unwrap();
            for k in 0..7 {
                prop_assert!(row[k] >= 1 && row[k] <= c_in);
                prop_assert_eq!(row[k], mirror[6 - k]);
            }
            if b >= d * d {
                for k1 in 0..7 {
                    for k2 in 0..7 {
                        if g.dist(m, k1) <= g.dist(m, k2) {
                            prop_assert!(row[k1] >= row[k2]);
                        }
                    }
                }
            }
        }
    }
}
