use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bananas::benchmark::BenchmarkOracle;
use bananas::experiment::{parse_config, run_experiment, RESULT_CSV_HEADER, SUMMARY_CSV_HEADER};
use bananas::rng::{derive_seed, unit_from_hash};
use bananas::space::{canonical_hash, is_valid, Cell, SpaceParams};
use bananas::Error;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn read_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn single_random_trial_writes_one_row_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "algorithms = random\ntrials = 1\nbenchmark.kind = synthetic\nsearch.budget = 10\n",
    );
    let out = run_experiment(&parse_config(&cfg).unwrap()).unwrap();
    assert_eq!(out.dir, dir.path().join("results"));
    let (header, rows) = read_rows(&out.dir.join("random.csv"));
    assert_eq!(header, RESULT_CSV_HEADER);
    assert_eq!(rows.len(), 10);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], "0");
        assert_eq!(row[1], (i + 1).to_string());
    }
    let (sheader, srows) = read_rows(&out.summary);
    assert_eq!(sheader, SUMMARY_CSV_HEADER);
    assert_eq!(srows.len(), 1);
    assert_eq!(srows[0][..2], ["random".to_string(), "10".to_string()]);
    for f in ["config.resolved", "provenance.txt", "timing.csv", "random-queries.csv", "trials/random-0.csv"] {
        assert!(out.dir.join(f).is_file(), "{f}");
    }
    // the resolved config is itself a valid config
    let again = fs::read_to_string(out.dir.join("config.resolved")).unwrap();
    let reparsed = bananas::experiment::parse_config_str(&again, Path::new("resolved"), dir.path()).unwrap();
    assert_eq!(reparsed, parse_config(&cfg).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = "algorithms = random, evolution, bananas\ntrials = 2\nbase_seed = 5\nbenchmark.kind = synthetic\n\
                search.budget = 30\nsearch.population = 10\nsearch.tournament = 3\npredictor.epochs = 30\n";
    let run = |name: &str| {
        let cfg = write_config(dir.path(), &format!("{body}output = {name}\n"));
        run_experiment(&parse_config(&cfg).unwrap()).unwrap()
    };
    let a = run("a");
    let b = run("b");
    let mut compared = 0;
    for entry in walk(&a.dir) {
        let rel = entry.strip_prefix(&a.dir).unwrap();
        let name = rel.to_string_lossy();
        if name == "timing.csv" || name == "config.resolved" {
            continue;
        }
        assert_eq!(fs::read(&entry).unwrap(), fs::read(b.dir.join(rel)).unwrap(), "{name}");
        compared += 1;
    }
    assert!(compared >= 10);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn summary_recomputes_from_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "algorithms = random, evolution\ntrials = 4\nbenchmark.kind = synthetic\nsearch.budget = 25\n\
         search.population = 8\nsearch.tournament = 3\nworkers = 1\n",
    );
    let out = run_experiment(&parse_config(&cfg).unwrap()).unwrap();
    let mut expected: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for alg in ["random", "evolution"] {
        let (header, rows) = read_rows(&out.dir.join(format!("{alg}.csv")));
        assert_eq!(header, RESULT_CSV_HEADER);
        assert_eq!(rows.len(), 4 * 25);
        // recompute best-so-far from the observed column
        let mut best = f64::INFINITY;
        for row in &rows {
            let query: usize = row[1].parse().unwrap();
            let observed: f64 = row[2].parse().unwrap();
            if query == 1 {
                best = f64::INFINITY;
            }
            best = best.min(observed);
            assert_eq!(row[3].parse::<f64>().unwrap(), best);
            if query % 10 == 0 || query == 25 {
                expected.entry((alg.to_string(), query)).or_default().push(best);
            }
        }
    }
    let (_, srows) = read_rows(&out.summary);
    assert_eq!(srows.len(), expected.len());
    for row in srows {
        let vals = &expected[&(row[0].clone(), row[1].parse().unwrap())];
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((row[2].parse::<f64>().unwrap() - m).abs() < 1e-12);
        assert!((row[3].parse::<f64>().unwrap() - sd).abs() < 1e-12);
        assert_eq!(row[4], "4");
    }
}

/// Every valid cell of the 4-node, 2-op space with metrics derived from its
/// canonical hash, one record per isomorphism class.
fn write_small_table(path: &Path, space: &SpaceParams) -> usize {
    let slots = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut seen = std::collections::HashSet::new();
    let mut text = String::new();
    for mask in 0..64u32 {
        let edges: Vec<_> = (0..6).filter(|s| mask >> s & 1 == 1).map(|s| slots[s]).collect();
        for ops in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let cell = Cell::new(ops.to_vec(), edges.iter().copied()).unwrap();
            if !is_valid(&cell, space) || !seen.insert(canonical_hash(&cell)) {
                continue;
            }
            let h = canonical_hash(&cell);
            let e = |tag: u64| 0.05 + 0.3 * unit_from_hash(derive_seed(h, &[tag]));
            text.push_str(&format!(
                "{{\"cell\": \"{}\", \"val\": [{}, {}, {}], \"test\": {}, \"params\": {}}}\n",
                cell.to_text(space),
                e(1),
                e(2),
                e(3),
                e(4),
                1000 + h % 5000
            ));
        }
    }
    fs::write(path, text).unwrap();
    seen.len()
}

#[test]
fn tabular_benchmark_drives_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let space = SpaceParams::new(4, 2, 6).unwrap().with_op_names(vec!["a".into(), "b".into()]).unwrap();
    let n = write_small_table(&dir.path().join("table.jsonl"), &space);
    let oracle = BenchmarkOracle::load_tabular(&dir.path().join("table.jsonl"), &space).unwrap();
    assert_eq!(oracle.len(), Some(n));

    let cfg = write_config(
        dir.path(),
        "algorithms = bananas, random, evolution, gp-path, bananas-adjacency\n\
         trials = 2\nbenchmark.kind = tabular\nbenchmark.path = table.jsonl\nbenchmark.mode = random\n\
         space.n_nodes = 4\nspace.n_ops = 2\nspace.max_edges = 6\nspace.op_names = a, b\n\
         search.t0 = 4\nsearch.budget = 12\nsearch.candidates = 6\nsearch.n_mutate = 3\nsearch.batch = 4\n\
         search.population = 6\nsearch.tournament = 2\npredictor.layers = 2\npredictor.width = 8\n\
         predictor.epochs = 20\npredictor.ensemble_size = 3\n",
    );
    let parsed = parse_config(&cfg).unwrap();
    let out = run_experiment(&parsed).unwrap();
    assert_eq!(out.result_files.len(), 5);
    for f in &out.result_files {
        let (_, rows) = read_rows(f);
        assert_eq!(rows.len(), 2 * 12, "{}", f.display());
    }
}

#[test]
fn unknown_architecture_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let space = SpaceParams::new(4, 2, 6).unwrap();
    let path = dir.path().join("one.jsonl");
    let cell = Cell::new(vec![0, 0], [(0, 3)]).unwrap();
    fs::write(
        &path,
        format!("{{\"cell\": \"{}\", \"val\": [0.1, 0.2, 0.3], \"test\": 0.2}}\n", cell.to_text(&space)),
    )
    .unwrap();
    let oracle = BenchmarkOracle::load_tabular(&path, &space).unwrap();
    assert!(!oracle.params_available());
    let other = Cell::new(vec![0, 0], [(0, 1), (1, 3)]).unwrap();
    assert!(matches!(oracle.metrics(&other), Err(Error::UnknownArchitecture(_))));
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "algorithms = random\nbenchmark.kind = tabular\nbenchmark.path = nope.jsonl\n");
    let err = parse_config(&cfg).unwrap_err().to_string();
    assert!(err.contains("nope.jsonl"), "{err}");
    let cfg = write_config(dir.path(), "algorithms = random\nbenchmark.kind = synthetic\nsearch.budgett = 3\n");
    let err = parse_config(&cfg).unwrap_err().to_string();
    assert!(err.contains("search.budgett") && err.contains(":3"), "{err}");
}
