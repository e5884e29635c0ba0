//! Defensive-pressure measurement.
//!
//! For each tracking frame the eleven opponents of the ball-holding team
//! are standardized over position and velocity, joined into a 5-nearest-
//! neighbor graph, and partitioned by k-means in the spectral embedding of
//! the graph Laplacian. Clusters are reported as member counts ordered by
//! how close each cluster sits to the holder, so `z1` counts the opponents
//! applying the most immediate pressure.
//!
//! Frame computations share no mutable state and run data-parallel in
//! [`compute_pressure_table`].

pub mod kmeans;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::match_data::{Frame, PlayerState};
use kmeans::{farthest_first_seeds, lloyd};

/// Neighbors per node in the kNN graph. The neighbor set of a node
/// includes the node itself, leaving four directed edges to other players;
/// this keeps tight groups of five mutually exclusive, which is what lets
/// two well-separated groups of sizes 5 and 6 split into two components.
pub const KNN_K: usize = 5;
/// Eigenvalues below this magnitude count as zero (connected components).
pub const ZERO_EIGEN_TOL: f64 = 1e-5;
/// Opposing outfield players considered per frame.
pub const N_OPPONENTS: usize = 11;
/// Clusters used for the pressure counts.
pub const N_CLUSTERS: usize = 3;

const SEED_COINCIDENCE_TOL: f64 = 1e-9;

// ── Domain types ────────────────────────────────────────────────────────

/// Symmetrized kNN graph over the standardized opponent states.
#[derive(Debug, Clone)]
pub struct KnnGraph {
    /// Standardized (x, y, vx, vy) per opponent, zero mean / unit variance
    /// across the frame (constant dimensions are left unscaled).
    pub nodes: Vec<[f64; 4]>,
    /// Raw pitch positions, kept for holder-distance ordering.
    pub positions: Vec<(f64, f64)>,
    /// Holder pitch position.
    pub holder: (f64, f64),
    /// Symmetric 0/1 adjacency with zero diagonal.
    pub adjacency: Vec<Vec<bool>>,
    pub k: usize,
}

impl KnnGraph {
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|&&e| e).count()
    }

    /// Connected components by breadth-first traversal.
    pub fn component_count(&self) -> usize {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut queue = vec![start];
            seen[start] = true;
            while let Some(i) = queue.pop() {
                for j in 0..n {
                    if self.adjacency[i][j] && !seen[j] {
                        seen[j] = true;
                        queue.push(j);
                    }
                }
            }
        }
        components
    }
}

/// Spectrum of the graph Laplacian L = D − A plus the per-node clustering
/// coordinates selected by the zero-eigenvalue rule or its fallback.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// Eigenvalues of L = D − A, ascending.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues with |λ| below [`ZERO_EIGEN_TOL`]; equals the
    /// number of connected components.
    pub near_zero: usize,
    /// Row per node. With three or more components these are the
    /// near-zero eigenvector columns of L, which indicate components and
    /// cluster perfectly. For better-connected graphs the standardized
    /// node features themselves are used: every node carries four forced
    /// out-edges, so small groups are always wired into their neighbors
    /// and the eigenvectors of a connected graph cannot separate them,
    /// while feature-space proximity still can.
    pub embedding: Vec<Vec<f64>>,
}

/// Opponent counts per pressure cluster; cluster 1 is nearest the holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PressureVector {
    pub z1: usize,
    pub z2: usize,
    pub z3: usize,
}

impl PressureVector {
    pub fn sum(&self) -> usize {
        self.z1 + self.z2 + self.z3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.z1 as f64, self.z2 as f64, self.z3 as f64]
    }
}

// ── Graph construction ──────────────────────────────────────────────────

fn standardize(raw: &[[f64; 4]]) -> Vec<[f64; 4]> {
    let n = raw.len() as f64;
    let mut out = vec![[0.0; 4]; raw.len()];
    for d in 0..4 {
        let mean = raw.iter().map(|v| v[d]).sum::<f64>() / n;
        let var = raw.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let div = if std < 1e-12 { 1.0 } else { std };
        for (o, r) in out.iter_mut().zip(raw) {
            o[d] = (r[d] - mean) / div;
        }
    }
    out
}

fn sq_dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (0..4).map(|d| (a[d] - b[d]) * (a[d] - b[d])).sum()
}

/// Build the standardized, OR-symmetrized kNN graph for one frame's
/// opponents. `holder` anchors the later cluster ordering and seeding.
pub fn build_knn_graph(opponents: &[PlayerState], holder: &PlayerState) -> Result<KnnGraph> {
    if opponents.len() != N_OPPONENTS {
        return Err(Error::Validation(format!(
            "pressure needs exactly {N_OPPONENTS} opponents, got {}",
            opponents.len()
        )));
    }
    let raw: Vec<[f64; 4]> = opponents.iter().map(|p| [p.x, p.y, p.vx, p.vy]).collect();
    if raw.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::Validation("non-finite opponent state".into()));
    }
    let nodes = standardize(&raw);
    let n = nodes.len();

    let mut adjacency = vec![vec![false; n]; n];
    for i in 0..n {
        // Five nearest including the node itself; ties resolved to the
        // lower player index by the sort key.
        let mut order: Vec<(f64, usize)> =
            (0..n).map(|j| (sq_dist4(&nodes[i], &nodes[j]), j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(KNN_K) {
            if j != i {
                adjacency[i][j] = true;
            }
        }
    }
    // Symmetrize by OR.
    for i in 0..n {
        for j in (i + 1)..n {
            let e = adjacency[i][j] || adjacency[j][i];
            adjacency[i][j] = e;
            adjacency[j][i] = e;
        }
    }

    Ok(KnnGraph {
        nodes,
        positions: opponents.iter().map(|p| (p.x, p.y)).collect(),
        holder: (holder.x, holder.y),
        adjacency,
        k: KNN_K,
    })
}

/// Ascending eigendecomposition of a symmetric matrix: (values, columns
/// as per-row coordinate vectors).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|row| order.iter().map(|&col| eig.eigenvectors[(row, col)]).collect())
        .collect();
    (values, rows)
}

/// Eigendecomposition of L = D − A (eigenpairs ascending) and selection of
/// the clustering embedding.
pub fn laplacian_spectrum(g: &KnnGraph) -> SpectralEmbedding {
    let n = g.nodes.len();
    let degrees: Vec<f64> =
        (0..n).map(|i| g.adjacency[i].iter().filter(|&&e| e).count() as f64).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if g.adjacency[i][j] {
                l[(i, j)] = -1.0;
            }
        }
        l[(i, i)] = degrees[i];
    }
    let (eigenvalues, vectors) = sorted_eigen(l);
    let near_zero = eigenvalues.iter().filter(|v| v.abs() < ZERO_EIGEN_TOL).count();

    let embedding = if near_zero >= N_CLUSTERS {
        // Disconnected enough: the zero-eigenvalue columns are component
        // indicators and cluster perfectly.
        vectors.into_iter().map(|row| row[..near_zero].to_vec()).collect()
    } else {
        // Connected (or close to it). Each node carries four out-edges by
        // construction, so a small group is always wired into its
        // neighbors and eigenvectors of the connected graph smear it
        // away. Cluster the standardized features directly instead:
        // separation that the graph cannot express is still plain in
        // feature space.
        g.nodes.iter().map(|n| n.to_vec()).collect()
    };

    SpectralEmbedding { eigenvalues, near_zero, embedding }
}

// ── Clustering ──────────────────────────────────────────────────────────

/// Node indices ordered by physical distance to the holder (ties to the
/// lower index).
fn holder_order(positions: &[(f64, f64)], holder: (f64, f64)) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (positions[a].0 - holder.0).hypot(positions[a].1 - holder.1);
        let db = (positions[b].0 - holder.0).hypot(positions[b].1 - holder.1);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    order
}

/// Holder-anchored k-means: Lloyd's runs once from the coordinates of the
/// k nearest-to-holder nodes and once from a farthest-first spread rooted
/// at the nearest node, and the lower-inertia solution wins (nearest-node
/// seeding preferred on ties). Both seedings are deterministic, so
/// recomputation is bit-stable; the dual run guards against the nearest
/// neighbors all sitting inside one tight group, which would otherwise
/// trap Lloyd's in a split of that group.
fn seeded_lloyd(points: &[Vec<f64>], order: &[usize], k: usize) -> kmeans::KMeansResult {
    let preferred: Vec<Vec<f64>> = order.iter().take(k).map(|&i| points[i].clone()).collect();
    let near = lloyd(points, &preferred);
    let spread = lloyd(points, &farthest_first_seeds(points, order[0], k));
    if spread.inertia + SEED_COINCIDENCE_TOL < near.inertia {
        spread
    } else {
        near
    }
}

/// Cluster the embedding and return counts ordered by ascending mean
/// physical distance of cluster members to the holder.
pub fn cluster_counts_from(g: &KnnGraph, spectrum: &SpectralEmbedding) -> PressureVector {
    let points = &spectrum.embedding;
    let order = holder_order(&g.positions, g.holder);
    let result = seeded_lloyd(points, &order, N_CLUSTERS);

    let mut sizes = [0usize; N_CLUSTERS];
    let mut dist_sum = [0.0f64; N_CLUSTERS];
    for (i, &c) in result.assignments.iter().enumerate() {
        sizes[c] += 1;
        dist_sum[c] +=
            (g.positions[i].0 - g.holder.0).hypot(g.positions[i].1 - g.holder.1);
    }
    let mut ids: Vec<usize> = (0..N_CLUSTERS).collect();
    ids.sort_by(|&a, &b| {
        let ma = if sizes[a] == 0 { f64::INFINITY } else { dist_sum[a] / sizes[a] as f64 };
        let mb = if sizes[b] == 0 { f64::INFINITY } else { dist_sum[b] / sizes[b] as f64 };
        ma.total_cmp(&mb).then(a.cmp(&b))
    });
    PressureVector { z1: sizes[ids[0]], z2: sizes[ids[1]], z3: sizes[ids[2]] }
}

fn frame_opponents<'a>(
    frame: &'a Frame,
    velocities: &'a [PlayerState],
) -> Result<(Vec<PlayerState>, PlayerState)> {
    if frame.players.len() != velocities.len() {
        return Err(Error::Validation(format!(
            "frame has {} players but {} velocity states",
            frame.players.len(),
            velocities.len()
        )));
    }
    let holder_idx = frame.holder_index().ok_or(Error::MissingHolder {
        match_id: frame.match_id.clone(),
        time_s: frame.time_s,
    })?;
    let holder_team = frame.players[holder_idx].team;
    let opponents: Vec<PlayerState> = frame
        .players
        .iter()
        .zip(velocities)
        .filter(|(p, _)| p.team != holder_team)
        .map(|(_, v)| *v)
        .collect();
    Ok((opponents, velocities[holder_idx]))
}

/// Pressure counts for one frame. `velocities` must align 1:1 with
/// `frame.players`.
pub fn pressure_counts(frame: &Frame, velocities: &[PlayerState]) -> Result<PressureVector> {
    let (opponents, holder) = frame_opponents(frame, velocities)?;
    let graph = build_knn_graph(&opponents, &holder)?;
    let spectrum = laplacian_spectrum(&graph);
    Ok(cluster_counts_from(&graph, &spectrum))
}

// ── Elbow diagnostics ───────────────────────────────────────────────────

pub const ELBOW_MIN_FRAMES: usize = 100;
pub const ELBOW_MAX_K: usize = 6;

#[derive(Debug, Clone)]
pub struct ElbowDiagnostics {
    /// Candidate cluster counts, 1..=6.
    pub ks: Vec<usize>,
    /// Per-frame sum of squared point-to-center distances, averaged.
    pub inertia: Vec<f64>,
    /// Inertia normalized by points per frame.
    pub distortion: Vec<f64>,
    pub elbow_k: usize,
    pub confident: bool,
    pub frames_used: usize,
}

/// Sweep k=1..6 over a frame sample and report the elbow of the averaged
/// distortion curve (maximum second difference). The production pipeline
/// keeps k=3 regardless; this is a diagnostic).
pub fn select_cluster_count(
    frames: &[Frame],
    velocities: &[Vec<PlayerState>],
) -> Result<ElbowDiagnostics> {
    if frames.len() < ELBOW_MIN_FRAMES {
        return Err(Error::InsufficientData(format!(
            "elbow analysis needs at least {ELBOW_MIN_FRAMES} frames, got {}",
            frames.len()
        )));
    }
    let mut inertia_sum = [0.0f64; ELBOW_MAX_K];
    for (frame, vel) in frames.iter().zip(velocities) {
        let (opponents, holder) = frame_opponents(frame, vel)?;
        let raw: Vec<[f64; 4]> = opponents.iter().map(|p| [p.x, p.y, p.vx, p.vy]).collect();
        let std_nodes = standardize(&raw);
        let points: Vec<Vec<f64>> = std_nodes.iter().map(|v| v.to_vec()).collect();
        let positions: Vec<(f64, f64)> = opponents.iter().map(|p| (p.x, p.y)).collect();
        let order = holder_order(&positions, (holder.x, holder.y));
        for (ki, slot) in inertia_sum.iter_mut().enumerate() {
            *slot += seeded_lloyd(&points, &order, ki + 1).inertia;
        }
    }
    let n = frames.len() as f64;
    let inertia: Vec<f64> = inertia_sum.iter().map(|s| s / n).collect();
    let distortion: Vec<f64> = inertia.iter().map(|s| s / N_OPPONENTS as f64).collect();

    // Second differences over the interior candidates k = 2..5.
    let mut best_k = 1;
    let mut best_dd = 0.0f64;
    let mut positive_sum = 0.0f64;
    for i in 1..(ELBOW_MAX_K - 1) {
        let dd = distortion[i - 1] - 2.0 * distortion[i] + distortion[i + 1];
        if dd > 0.0 {
            positive_sum += dd;
        }
        if dd > best_dd {
            best_dd = dd;
            best_k = i + 1;
        }
    }
    let flat = distortion[0] < 1e-12 || best_dd < 1e-9;
    let (elbow_k, confident) = if flat {
        (1, false)
    } else {
        (best_k, best_dd / positive_sum >= 0.5)
    };

    Ok(ElbowDiagnostics {
        ks: (1..=ELBOW_MAX_K).collect(),
        inertia,
        distortion,
        elbow_k,
        confident,
        frames_used: frames.len(),
    })
}

// ── Batch computation and file format ───────────────────────────────────

/// One output row: pressure counts for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureRow {
    pub match_id: String,
    pub time_s: f64,
    pub z: PressureVector,
}

/// Compute pressure for every frame in parallel, preserving input order.
pub fn compute_pressure_table(
    frames: &[Frame],
    velocities: &[Vec<PlayerState>],
) -> Result<Vec<PressureRow>> {
    if frames.len() != velocities.len() {
        return Err(Error::Validation(format!(
            "{} frames but {} velocity rows",
            frames.len(),
            velocities.len()
        )));
    }
    frames
        .par_iter()
        .zip(velocities.par_iter())
        .map(|(f, v)| {
            Ok(PressureRow {
                match_id: f.match_id.clone(),
                time_s: f.time_s,
                z: pressure_counts(f, v)?,
            })
        })
        .collect()
}

pub const PRESSURE_HEADER: &str = "match_id,time_s,z1,z2,z3";

pub fn serialize_pressure(rows: &[PressureRow]) -> String {
    let mut out = String::from(PRESSURE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.match_id, r.time_s, r.z.z1, r.z.z2, r.z.z3)
            .expect("write to string");
    }
    out
}

pub fn write_pressure_table(path: &Path, rows: &[PressureRow]) -> Result<()> {
    std::fs::write(path, serialize_pressure(rows))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_pressure_str(text: &str, origin: &str) -> Result<Vec<PressureRow>> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(rows),
        Some((_, header)) if header.trim() == PRESSURE_HEADER => {}
        Some((_, other)) => {
            return Err(Error::parse(origin, 1, format!("bad header: {other:?}")));
        }
    }
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::parse(origin, lineno, format!("expected 5 fields, got {}", parts.len())));
        }
        let time_s: f64 = parts[1]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("bad time: {:?}", parts[1])))?;
        let mut z = [0usize; 3];
        for (slot, raw) in z.iter_mut().zip(&parts[2..5]) {
            *slot = raw
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad count: {raw:?}")))?;
        }
        let v = PressureVector { z1: z[0], z2: z[1], z3: z[2] };
        if v.sum() != N_OPPONENTS {
            return Err(Error::parse(
                origin,
                lineno,
                format!("pressure counts sum to {}, expected {N_OPPONENTS}", v.sum()),
            ));
        }
        rows.push(PressureRow { match_id: parts[0].to_string(), time_s, z: v });
    }
    Ok(rows)
}

pub fn parse_pressure_log(path: &Path) -> Result<Vec<PressureRow>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pressure_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::match_data::{PlayerPos, Team};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ps(x: f64, y: f64, vx: f64, vy: f64) -> PlayerState {
        PlayerState { x, y, vx, vy }
    }

    fn states_on_line() -> Vec<PlayerState> {
        (0..11).map(|i| ps(10.0 + i as f64, 34.0, 0.0, 0.0)).collect()
    }

    /// Independent union-find used as the component oracle.
    fn union_find_components(adj: &[Vec<bool>]) -> usize {
        let n = adj.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in 0..n {
                if adj[i][j] {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        (0..n).map(|i| find(&mut parent, i)).collect::<std::collections::BTreeSet<_>>().len()
    }

    #[test]
    fn line_graph_matches_hand_enumeration() {
        let holder = ps(0.0, 34.0, 0.0, 0.0);
        let g = build_knn_graph(&states_on_line(), &holder).unwrap();
        // Interior nodes keep the two nearest on each side; nodes near the
        // ends reach further inward to fill their five-member sets, which
        // adds (0,3), (0,4), (1,4) and the mirrored (10,7), (10,6), (9,6).
        let mut expected = vec![vec![false; 11]; 11];
        for i in 0..11usize {
            for j in 0..11usize {
                if i != j && i.abs_diff(j) <= 2 {
                    expected[i][j] = true;
                }
            }
        }
        for (a, b) in [(0, 3), (0, 4), (1, 4), (10, 7), (10, 6), (9, 6)] {
            expected[a][b] = true;
            expected[b][a] = true;
        }
        assert_eq!(g.adjacency, expected);
    }

    #[test]
    fn diagonal_zero_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<PlayerState> = (0..11)
            .map(|_| {
                ps(
                    rng.gen_range(0.0..105.0),
                    rng.gen_range(0.0..68.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let g = build_knn_graph(&states, &ps(50.0, 34.0, 0.0, 0.0)).unwrap();
        for i in 0..11 {
            assert!(!g.adjacency[i][i]);
            for j in 0..11 {
                assert_eq!(g.adjacency[i][j], g.adjacency[j][i]);
            }
        }
    }

    #[test]
    fn separated_groups_of_five_and_six_form_two_components() {
        let mut states = Vec::new();
        for i in 0..5 {
            states.push(ps(10.0 + (i as f64) * 0.8, 10.0 + (i % 2) as f64, 1.0, 0.0));
        }
        for i in 0..6 {
            states.push(ps(90.0 + (i as f64) * 0.8, 60.0 + (i % 3) as f64, -1.0, 0.5));
        }
        let g = build_knn_graph(&states, &ps(50.0, 34.0, 0.0, 0.0)).unwrap();
        for i in 0..5 {
            for j in 5..11 {
                assert!(!g.adjacency[i][j], "unexpected cross edge {i}-{j}");
            }
        }
        assert_eq!(union_find_components(&g.adjacency), 2);
        let spectrum = laplacian_spectrum(&g);
        assert_eq!(spectrum.near_zero, 2);
    }

    #[test]
    fn connected_graph_has_single_near_zero_eigenvalue() {
        let holder = ps(0.0, 34.0, 0.0, 0.0);
        let g = build_knn_graph(&states_on_line(), &holder).unwrap();
        assert_eq!(union_find_components(&g.adjacency), 1);
        let spectrum = laplacian_spectrum(&g);
        assert_eq!(spectrum.near_zero, 1);
        assert!(spectrum.eigenvalues.iter().all(|&v| v > -1e-9));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let holder = ps(0.0, 34.0, 0.0, 0.0);
        let g = build_knn_graph(&states_on_line(), &holder).unwrap();
        let n = g.nodes.len();
        for i in 0..n {
            let mut row = g.degree(i) as f64;
            for j in 0..n {
                if g.adjacency[i][j] {
                    row -= 1.0;
                }
            }
            assert!(row.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_multiplicity_matches_union_find_on_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let states: Vec<PlayerState> = (0..11)
                .map(|_| {
                    ps(
                        rng.gen_range(0.0..105.0),
                        rng.gen_range(0.0..68.0),
                        rng.gen_range(-8.0..8.0),
                        rng.gen_range(-8.0..8.0),
                    )
                })
                .collect();
            let g = build_knn_graph(&states, &ps(52.0, 34.0, 0.0, 0.0)).unwrap();
            let spectrum = laplacian_spectrum(&g);
            assert_eq!(spectrum.near_zero, union_find_components(&g.adjacency));
        }
    }

    /// Frame with 11 home players (holder first) and the given away states.
    fn frame_with_opponents(
        opponents: &[PlayerState],
        holder: PlayerState,
    ) -> (Frame, Vec<PlayerState>) {
        let mut players = Vec::new();
        let mut velocities = Vec::new();
        players.push(PlayerPos {
            player_id: "h01".into(),
            team: Team::Home,
            x: holder.x,
            y: holder.y,
        });
        velocities.push(holder);
        for i in 1..11 {
            let x = 5.0 + i as f64 * 3.0;
            players.push(PlayerPos { player_id: format!("h{:02}", i + 1), team: Team::Home, x, y: 5.0 });
            velocities.push(ps(x, 5.0, 0.0, 0.0));
        }
        for (i, o) in opponents.iter().enumerate() {
            players.push(PlayerPos {
                player_id: format!("a{:02}", i + 1),
                team: Team::Away,
                x: o.x,
                y: o.y,
            });
            velocities.push(*o);
        }
        let frame = Frame {
            match_id: "t0001".into(),
            time_s: 10.0,
            players,
            ball_holder: Some("h01".into()),
        };
        (frame, velocities)
    }

    /// Three separated opponent groups of sizes 4/4/3: a press near the
    /// holder, a midfield screen, and a deep trio farthest away. Each
    /// group shares a velocity, so the groups separate in all four
    /// standardized feature dimensions.
    fn grouped_opponents(jitter: &mut ChaCha8Rng, spread: f64) -> Vec<PlayerState> {
        let mut out = Vec::new();
        let groups: [((f64, f64), (f64, f64), usize); 3] = [
            ((88.0, 34.0), (2.0, 0.0), 4),
            ((50.0, 12.0), (-1.5, 1.5), 4),
            ((20.0, 60.0), (0.5, -2.0), 3),
        ];
        for ((cx, cy), (vx, vy), size) in groups {
            for _ in 0..size {
                out.push(ps(
                    cx + jitter.gen_range(-spread..spread),
                    cy + jitter.gen_range(-spread..spread),
                    vx + jitter.gen_range(-0.05..0.05),
                    vy + jitter.gen_range(-0.05..0.05),
                ));
            }
        }
        out
    }

    #[test]
    fn planted_groups_give_four_four_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let holder = ps(94.0, 40.0, 0.0, 0.0);
        for _ in 0..20 {
            let opponents = grouped_opponents(&mut rng, 1.5);
            let (frame, vel) = frame_with_opponents(&opponents, holder);
            let z = pressure_counts(&frame, &vel).unwrap();
            assert_eq!((z.z1, z.z2, z.z3), (4, 4, 3), "got {z:?}");
        }
    }

    #[test]
    fn colocated_opponents_still_sum_to_eleven() {
        let opponents: Vec<PlayerState> = (0..11).map(|_| ps(20.0, 20.0, 0.0, 0.0)).collect();
        let (frame, vel) = frame_with_opponents(&opponents, ps(95.0, 34.0, 0.0, 0.0));
        let z = pressure_counts(&frame, &vel).unwrap();
        assert_eq!(z.sum(), 11);
    }

    #[test]
    fn permuting_opponents_leaves_counts_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let opponents = grouped_opponents(&mut rng, 1.5);
        let holder = ps(94.0, 40.0, 0.0, 0.0);
        let (frame, vel) = frame_with_opponents(&opponents, holder);
        let base = pressure_counts(&frame, &vel).unwrap();

        let mut shuffled = opponents.clone();
        shuffled.rotate_left(4);
        shuffled.swap(0, 7);
        let (frame2, vel2) = frame_with_opponents(&shuffled, holder);
        let permuted = pressure_counts(&frame2, &vel2).unwrap();
        assert_eq!(base, permuted);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let opponents = grouped_opponents(&mut rng, 1.2);
        let holder = ps(94.0, 40.0, 0.0, 0.0);
        let (frame, vel) = frame_with_opponents(&opponents, holder);
        let base = pressure_counts(&frame, &vel).unwrap();

        let shifted: Vec<PlayerState> =
            opponents.iter().map(|p| ps(p.x - 6.0, p.y + 4.0, p.vx, p.vy)).collect();
        let holder2 = ps(94.0 - 6.0, 40.0 + 4.0, 0.0, 0.0);
        let (frame2, vel2) = frame_with_opponents(&shifted, holder2);
        let moved = pressure_counts(&frame2, &vel2).unwrap();
        assert_eq!(base, moved);
    }

    #[test]
    fn missing_holder_is_an_error() {
        let opponents: Vec<PlayerState> = (0..11).map(|i| ps(20.0 + i as f64, 20.0, 0.0, 0.0)).collect();
        let (mut frame, vel) = frame_with_opponents(&opponents, ps(95.0, 34.0, 0.0, 0.0));
        frame.ball_holder = None;
        match pressure_counts(&frame, &vel) {
            Err(Error::MissingHolder { .. }) => {}
            other => panic!("expected MissingHolder, got {other:?}"),
        }
    }

    #[test]
    fn determinism_fresh_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let opponents = grouped_opponents(&mut rng, 2.0);
        let (frame, vel) = frame_with_opponents(&opponents, ps(94.0, 40.0, 0.0, 0.0));
        let a = pressure_counts(&frame, &vel).unwrap();
        let b = pressure_counts(&frame, &vel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn three_zero_columns_used_when_graph_disconnects() {
        // Hand-built graph of three cliques exercises the branch that
        // clusters the near-zero eigenvector columns directly.
        let sizes = [4usize, 4, 3];
        let mut adjacency = vec![vec![false; 11]; 11];
        let mut start = 0;
        let mut positions = Vec::new();
        for (gi, &s) in sizes.iter().enumerate() {
            for i in start..start + s {
                positions.push((gi as f64 * 30.0, 10.0));
                for j in start..start + s {
                    if i != j {
                        adjacency[i][j] = true;
                    }
                }
            }
            start += s;
        }
        let g = KnnGraph {
            nodes: vec![[0.0; 4]; 11],
            positions,
            holder: (0.0, 10.0),
            adjacency,
            k: KNN_K,
        };
        let spectrum = laplacian_spectrum(&g);
        assert_eq!(spectrum.near_zero, 3);
        assert_eq!(spectrum.embedding[0].len(), 3);
        let z = cluster_counts_from(&g, &spectrum);
        assert_eq!((z.z1, z.z2, z.z3), (4, 4, 3));
    }

    #[test]
    fn elbow_finds_three_planted_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let holder = ps(94.0, 40.0, 0.0, 0.0);
        let mut frames = Vec::new();
        let mut vels = Vec::new();
        for _ in 0..120 {
            let opponents = grouped_opponents(&mut rng, 1.5);
            let (f, v) = frame_with_opponents(&opponents, holder);
            frames.push(f);
            vels.push(v);
        }
        let diag = select_cluster_count(&frames, &vels).unwrap();
        assert_eq!(diag.elbow_k, 3);
        assert!(diag.confident);
        for w in diag.inertia.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia not monotone: {:?}", diag.inertia);
        }
    }

    #[test]
    fn elbow_single_blob_reports_one_with_low_confidence() {
        let holder = ps(94.0, 40.0, 0.0, 0.0);
        let mut frames = Vec::new();
        let mut vels = Vec::new();
        for _ in 0..110 {
            let opponents: Vec<PlayerState> =
                (0..11).map(|_| ps(30.0, 30.0, 1.0, 0.0)).collect();
            let (f, v) = frame_with_opponents(&opponents, holder);
            frames.push(f);
            vels.push(v);
        }
        let diag = select_cluster_count(&frames, &vels).unwrap();
        assert_eq!(diag.elbow_k, 1);
        assert!(!diag.confident);
    }

    #[test]
    fn elbow_requires_hundred_frames() {
        match select_cluster_count(&[], &[]) {
            Err(Error::InsufficientData(_)) => {}
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn pressure_table_round_trips() {
        let rows = vec![
            PressureRow { match_id: "m0001".into(), time_s: 12.0, z: PressureVector { z1: 4, z2: 4, z3: 3 } },
            PressureRow { match_id: "m0001".into(), time_s: 13.0, z: PressureVector { z1: 2, z2: 5, z3: 4 } },
        ];
        let text = serialize_pressure(&rows);
        let back = parse_pressure_str(&text, "mem").unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn pressure_table_rejects_bad_sum() {
        let text = "match_id,time_s,z1,z2,z3\nm0001,1,3,3,3\n";
        match parse_pressure_str(text, "mem") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}


