//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sblabel::cure::{cure_cluster, CureParams};
use sblabel::features::{compute_instances, Features, SbInstance};
use sblabel::geometry::{embed, sq_dist};
use sblabel::ingestion::{generate_synthetic, write_bids_csv, SynthConfig};
use sblabel::kmeans::{kmeans, kmeans_with, KMeansParams};
use sblabel::labeling::{decision_line, label_cluster, Summary, SummaryRow};
use sblabel::partitioning::SubsetStats;
use sblabel::pipeline::{run_all, PipelineConfig};
use sblabel::silhouette::optimal_k;
use sblabel::{Point, DIM};

type Outcome = Result<String, String>;

const TAGS: [&str; 5] = ["1d", "3d", "5d", "7d", "10d"];

// Reference per-duration statistics, columns in TAGS order.
const MEANS: [[f64; 5]; DIM] = [
    [0.1434, 0.1394, 0.1419, 0.1455, 0.1162],
    [0.1287, 0.1328, 0.1235, 0.1273, 0.1021],
    [0.0996, 0.1047, 0.0872, 0.1149, 0.0620],
    [0.4624, 0.4511, 0.4676, 0.4678, 0.4746],
    [0.4314, 0.4192, 0.4318, 0.4348, 0.4575],
    [0.3812, 0.3718, 0.3810, 0.3533, 0.3496],
    [0.2120, 0.1936, 0.2403, 0.2567, 0.2926],
    [0.5007, 0.4301, 0.4478, 0.4801, 0.7123],
];
const AVG_MEANS: [f64; 5] = [0.2949, 0.2802, 0.2901, 0.2975, 0.3208];
const STDS: [[f64; 5]; DIM] = [
    [0.1973, 0.1884, 0.1984, 0.2019, 0.1811],
    [0.1246, 0.1330, 0.1243, 0.1377, 0.1165],
    [0.2764, 0.2811, 0.2583, 0.2917, 0.2215],
    [0.3773, 0.3753, 0.3917, 0.3783, 0.3931],
    [0.3775, 0.3742, 0.3921, 0.3802, 0.3968],
    [0.4356, 0.4373, 0.4402, 0.4345, 0.4398],
    [0.2323, 0.2426, 0.2646, 0.2658, 0.2575],
    [0.4931, 0.4831, 0.4863, 0.4908, 0.4510],
];
const AVG_STDS: [f64; 5] = [0.3142, 0.3143, 0.3194, 0.3226, 0.3071];

fn column(table: &[[f64; 5]; DIM], c: usize) -> [f64; DIM] {
    std::array::from_fn(|j| table[j][c])
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, detail: String) -> Outcome {
    check(
        elapsed < budget,
        format!(
            "{detail}; {:.2}s of {:.0}s budget",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

fn decision_lines() -> Outcome {
    let start = Instant::now();
    let expected = [0.4520, 0.4374, 0.4498, 0.4588, 0.4744];
    let mut worst = 0.0f64;
    for c in 0..5 {
        let stats = SubsetStats {
            per_feature_mean: column(&MEANS, c),
            per_feature_std: column(&STDS, c),
            avg_means: AVG_MEANS[c],
            avg_stds: AVG_STDS[c],
        };
        let line = decision_line(&stats);
        let err = (line - expected[c]).abs();
        if err > 5e-4 {
            return Err(format!("{}: {line:.5} vs {}", TAGS[c], expected[c]));
        }
        worst = worst.max(err);
    }
    within(
        start.elapsed(),
        Duration::from_secs(1),
        format!("max error {worst:.1e}"),
    )
}

fn reference_labels() -> Outcome {
    let start = Instant::now();
    let vectors: [[f64; DIM]; 5] = [
        [0.75, 0.3461, 1.0, 0.5667, 0.5409, 0.75, 0.0, 0.0],
        [0.4705, 0.3076, 0.0, 0.1909, 0.1909, 0.4, 0.0, 0.0],
        [0.8333, 0.2, 1.0, 0.0350, 0.0239, 1.0, 0.3333, 0.9935],
        [0.5, 0.3333, 0.0, 0.2199, 0.0043, 0.5, 0.0, 0.0],
        [0.04615, 0.0857, 0.5, 0.2966, 0.2060, 0.0, 0.0526, 0.0],
    ];
    let instances: Vec<SbInstance> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| SbInstance {
            auction_id: format!("a{i}"),
            bidder_id: format!("b{i}"),
            features: Features::from_point(v),
        })
        .collect();
    let stats = SubsetStats::from_features(column(&MEANS, 3), column(&STDS, 3));
    let labels = (0..5)
        .map(|i| label_cluster(&[i], &instances, &stats))
        .collect::<Result<Vec<u8>, _>>()
        .map_err(|e| e.to_string())?;
    if labels != [1, 0, 1, 0, 0] {
        return Err(format!("labels {labels:?}"));
    }
    within(
        start.elapsed(),
        Duration::from_secs(1),
        format!("labels {labels:?}"),
    )
}

fn table_averages() -> Outcome {
    let mut worst = 0.0f64;
    for c in 0..5 {
        let stats = SubsetStats::from_features(column(&MEANS, c), column(&STDS, c));
        for (name, got, want) in [
            ("avg means", stats.avg_means, AVG_MEANS[c]),
            ("avg stds", stats.avg_stds, AVG_STDS[c]),
        ] {
            let err = (got - want).abs();
            if err > 5e-4 {
                return Err(format!("{} {name}: {got:.5} vs {want}", TAGS[c]));
            }
            worst = worst.max(err);
        }
    }
    check(true, format!("max error {worst:.1e}"))
}

fn summary_identity() -> Outcome {
    let reference = [
        ("1d", 166, 1289, 7, 5, 0.05, 1135, 154),
        ("3d", 187, 1408, 7, 5, 0.01, 1303, 105),
        ("5d", 131, 1060, 5, 5, 0.05, 975, 85),
        ("7d", 309, 2427, 8, 10, 0.001, 2098, 329),
        ("10d", 14, 137, 2, 5, 0.1, 135, 2),
    ];
    let rows = reference
        .iter()
        .map(|&(p, a, i, c, rp, al, n, s)| SummaryRow::new(p, a, i, c, Some(rp), Some(al), n, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let total = Summary { rows }.total().map_err(|e| e.to_string())?;
    if (
        total.auctions,
        total.instances,
        total.clusters,
        total.normal,
        total.suspicious,
    ) != (807, 6321, 29, 5646, 675)
    {
        return Err(format!("total {total:?}"));
    }
    // A row that does not add up must be refused.
    if SummaryRow::new("bad", 1, 10, 1, None, None, 6, 5).is_ok() {
        return Err("inconsistent row accepted".into());
    }
    check(true, "5646 + 675 = 6321 over 807 auctions".into())
}

/// Centroid linkage by exhaustive search; ties go to the pair with the
/// smallest (lower, higher) minimum member.
fn naive_centroid_linkage(points: &[Point], k: usize) -> Vec<Vec<usize>> {
    let centroid = |m: &[usize]| -> Point {
        let mut c = [0.0; DIM];
        for &i in m {
            for j in 0..DIM {
                c[j] += points[i][j];
            }
        }
        c.map(|v| v / m.len() as f64)
    };
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let cents: Vec<Point> = clusters.iter().map(|m| centroid(m)).collect();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = sq_dist(&cents[a], &cents[b]);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
    }
    clusters.sort();
    clusters
}

fn cure_matches_centroid_linkage() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 2..=12 {
            // Continuous coordinates, then a coarse grid that forces ties.
            for grid in [false, true] {
                let pts: Vec<Point> = (0..n)
                    .map(|_| {
                        std::array::from_fn(|j| {
                            if j >= 3 {
                                0.0
                            } else if grid {
                                rng.gen_range(0..4) as f64
                            } else {
                                rng.gen::<f64>()
                            }
                        })
                    })
                    .collect();
                for k in 1..=n {
                    let got = cure_cluster(&pts, &CureParams::new(1, 1.0, k), seed)
                        .map_err(|e| e.to_string())?;
                    let mut got: Vec<Vec<usize>> = got.into_iter().map(|c| c.members).collect();
                    got.sort();
                    let want = naive_centroid_linkage(&pts, k);
                    if got != want {
                        return Err(format!(
                            "seed {seed}, n {n}, k {k}, grid {grid}: {got:?} vs {want:?}"
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(10),
        format!("{cases} partitions identical"),
    )
}

/// Best agreement with `truth` over both label permutations.
fn two_way_accuracy(labels: &[usize], truth: &[usize]) -> f64 {
    let same = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    let n = truth.len();
    same.max(n - same) as f64 / n as f64
}

/// Two parallel bars, 10 long and 3 apart, 100 points each.
fn bars(seed: u64) -> (Vec<Point>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (bar, y) in [0.0, 3.0].into_iter().enumerate() {
        for _ in 0..100 {
            let x = rng.gen_range(0.0..10.0);
            pts.push(embed(&[x, y + noise.sample(&mut rng)]));
            truth.push(bar);
        }
    }
    (pts, truth)
}

fn non_spherical_recovery() -> Outcome {
    let mut cure_ok = 0;
    let mut kmeans_miss = 0;
    for seed in 0..20u64 {
        let (pts, truth) = bars(seed);
        let clusters =
            cure_cluster(&pts, &CureParams::new(10, 0.3, 2), seed).map_err(|e| e.to_string())?;
        let labels = sblabel::cure::labels_of(&clusters, pts.len());
        if two_way_accuracy(&labels, &truth) >= 0.95 {
            cure_ok += 1;
        }
        let km = kmeans_with(&pts, &KMeansParams::new(2), seed).map_err(|e| e.to_string())?;
        if two_way_accuracy(&km.labels, &truth) < 0.95 {
            kmeans_miss += 1;
        }
    }
    check(
        cure_ok >= 18 && kmeans_miss >= 10,
        format!("CURE >= 95% in {cure_ok}/20, k-means < 95% in {kmeans_miss}/20"),
    )
}

fn blobs(seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Point> = Vec::new();
    while centers.len() < 5 {
        let c: Point = std::array::from_fn(|_| rng.gen::<f64>());
        if centers.iter().all(|o| sq_dist(o, &c) >= 0.25) {
            centers.push(c);
        }
    }
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    (0..500)
        .map(|i| centers[i % 5].map(|v| v + noise.sample(&mut rng)))
        .collect()
}

fn silhouette_selection() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut picks = BTreeMap::new();
    for seed in 0..20u64 {
        let r = optimal_k(&blobs(seed), 2, 20, seed).map_err(|e| e.to_string())?;
        *picks.entry(r.best_k).or_insert(0) += 1;
        if r.best_k == 5 {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    if hits < 19 {
        return Err(format!("best_k = 5 in {hits}/20; picks {picks:?}"));
    }
    within(
        elapsed,
        Duration::from_secs(30),
        format!("best_k = 5 in {hits}/20"),
    )
}

/// Optimal 2-partition SSE by enumerating every split.
fn brute_force_two_partition(pts: &[Point]) -> (f64, Vec<usize>) {
    let n = pts.len();
    let sse = |mask: u32| -> f64 {
        let mut total = 0.0;
        for side in [0, 1] {
            let idx: Vec<usize> = (0..n).filter(|&i| (mask >> i) & 1 == side).collect();
            let c = sblabel::geometry::mean_of(pts, &idx);
            total += idx.iter().map(|&i| sq_dist(&pts[i], &c)).sum::<f64>();
        }
        total
    };
    let mut best = (f64::INFINITY, 0u32);
    // Point 0 stays on side 0; the other side must be non-empty.
    for mask in (2u32..(1 << n)).step_by(2) {
        let s = sse(mask);
        if s < best.0 {
            best = (s, mask);
        }
    }
    (
        best.0,
        (0..n).map(|i| ((best.1 >> i) & 1) as usize).collect(),
    )
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut map = BTreeMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *map.entry(*x).or_insert(*y) == *y)
        && {
            let mut back = BTreeMap::new();
            b.iter()
                .zip(a)
                .all(|(x, y)| *back.entry(*x).or_insert(*y) == *y)
        }
}

fn kmeans_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<Point> = (0..1000)
        .map(|_| std::array::from_fn(|_| rng.gen::<f64>()))
        .collect();
    for k in [2, 5, 10, 20] {
        let a = kmeans(&pts, k, k as u64, 300, 0.0).map_err(|e| e.to_string())?;
        for w in a.sse_history.windows(2) {
            if w[1] > w[0] + 1e-12 * w[0] {
                return Err(format!("k {k}: SSE rose from {} to {}", w[0], w[1]));
            }
        }
    }

    // Separated two-blob fixtures: every size n <= 12, every split.
    let mut fixtures = 0;
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for sep in [10.0, 5.0, 3.0] {
            for n in 2..=12 {
                for split in 1..n {
                    let dir: Point = std::array::from_fn(|_| rng.gen::<f64>() - 0.5);
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let pts: Vec<Point> = (0..n)
                        .map(|i| {
                            let shift = if i < split { 0.0 } else { sep / norm };
                            dir.map(|d| d * shift + noise.sample(&mut rng))
                        })
                        .collect();
                    let (best, partition) = brute_force_two_partition(&pts);
                    let a = kmeans(&pts, 2, seed, 300, 1e-9).map_err(|e| e.to_string())?;
                    if (a.sse - best).abs() > 1e-9 * best.max(1.0)
                        || !same_partition(&a.labels, &partition)
                    {
                        return Err(format!(
                            "seed {seed}, sep {sep}, n {n}, split {split}: SSE {} vs optimum {best}",
                            a.sse
                        ));
                    }
                    fixtures += 1;
                }
            }
        }
    }
    check(
        true,
        format!("SSE monotone on 1000 points; {fixtures} fixtures optimal"),
    )
}

fn feature_invariants() -> Outcome {
    let cfg = SynthConfig {
        auctions: 12,
        ..SynthConfig::default()
    };
    let mut instances = 0;
    for seed in 0..1000u64 {
        let ds = generate_synthetic(&cfg, seed).map_err(|e| e.to_string())?;
        let set = compute_instances(&ds);
        let mut br_sum: BTreeMap<&str, f64> = BTreeMap::new();
        for inst in &set.instances {
            let f = &inst.features;
            let p = f.to_point();
            let bad = |what: &str| {
                format!(
                    "seed {seed}, {}/{}: {what}",
                    inst.auction_id, inst.bidder_id
                )
            };
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad("feature outside [0, 1]"));
            }
            if ![0.0, 0.5, 1.0].contains(&f.so) {
                return Err(bad("so not in {0, 0.5, 1}"));
            }
            if f.eb > f.lb {
                return Err(bad("eb > lb"));
            }
            *br_sum.entry(&inst.auction_id).or_default() += f.br;
        }
        if let Some((a, s)) = br_sum.iter().find(|(_, s)| (**s - 1.0).abs() > 1e-9) {
            return Err(format!("seed {seed}, auction {a}: sum of br = {s}"));
        }
        instances += set.instances.len();
    }
    check(true, format!("{instances} instances over 1000 seeds"))
}

fn read_tree(root: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .display()
                    .to_string();
                out.insert(rel, std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = generate_synthetic(&SynthConfig::full_scale(), 2019).map_err(|e| e.to_string())?;
    let input = tmp.path().join("bids.csv");
    write_bids_csv(&input, ds.records()).map_err(|e| e.to_string())?;
    let mut slowest = Duration::ZERO;
    let mut trees = Vec::new();
    let mut instances = 0;
    for run in ["a", "b"] {
        let cfg = PipelineConfig {
            input: Some(input.clone()),
            output_dir: Some(tmp.path().join(run)),
            seed: Some(7),
            ..PipelineConfig::default()
        };
        let start = Instant::now();
        let out = run_all(&cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        instances = out.labeled.rows.len();
        trees.push(read_tree(&tmp.path().join(run)).map_err(|e| e.to_string())?);
    }
    if instances != 6321 {
        return Err(format!("{instances} instances, expected 6321"));
    }
    if trees[0] != trees[1] {
        let differing: Vec<&String> = trees[0]
            .iter()
            .filter(|(k, v)| trees[1].get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        return Err(format!("outputs differ: {differing:?}"));
    }
    within(
        slowest,
        Duration::from_secs(60),
        format!(
            "{instances} instances, {} files byte-identical across runs",
            trees[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("decision-line arithmetic", decision_lines),
        ("reference label regression", reference_labels),
        ("statistics table consistency", table_averages),
        ("summary arithmetic identity", summary_identity),
        (
            "CURE equals centroid linkage",
            cure_matches_centroid_linkage,
        ),
        ("CURE non-spherical recovery", non_spherical_recovery),
        ("silhouette model selection", silhouette_selection),
        ("k-means properties", kmeans_properties),
        ("feature invariants", feature_invariants),
        ("end-to-end performance", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({detail}) [{secs:.2}s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} FAIL  {name} ({detail}) [{secs:.2}s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
