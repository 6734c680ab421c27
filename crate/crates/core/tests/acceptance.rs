//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! measured values and runtime; the process exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eam::dataset::{synth_generate, synth_occlude, write_dataset, SynthParams, FILL_PERCENTS};
use eam::eval::{self, RetrievalConfig};
use eam::{sample_triangular, Amr, DiscreteFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Grid(Vec<Vec<bool>>);

impl Grid {
    fn counts(&self) -> Vec<usize> {
        self.0
            .iter()
            .map(|c| c.iter().filter(|&&b| b).count())
            .collect()
    }
}

fn random_register(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> (Amr, Grid) {
    let mut amr = Amr::new(n, rows).unwrap();
    let mut grid = vec![vec![false; rows]; n];
    // A quarter of the registers hold partial functions, leaving some
    // columns empty.
    let partial = rng.random_bool(0.25);
    for _ in 0..rng.random_range(1..=10) {
        let f: Vec<Option<usize>> = (0..n)
            .map(|_| {
                if partial && rng.random_bool(0.4) {
                    None
                } else {
                    Some(rng.random_range(0..rows))
                }
            })
            .collect();
        for (i, v) in f.iter().enumerate() {
            if let Some(v) = v {
                grid[i][*v] = true;
            }
        }
        amr.register(&DiscreteFunction::partial(f)).unwrap();
    }
    (amr, Grid(grid))
}

/// Counts, by exhaustive enumeration over the non-empty columns, the
/// functions whose every cell is on in the grid; checks the register agrees
/// on each candidate.
fn enumerate_contained(amr: &Amr, grid: &Grid) -> Result<u64, String> {
    let n = amr.n();
    let rows = amr.rows();
    let support: Vec<usize> = (0..n).filter(|&i| grid.0[i].iter().any(|&b| b)).collect();
    let total = (rows as u64).pow(support.len() as u32);
    let mut count = 0u64;
    for code in 0..total {
        let mut values = vec![None; n];
        let mut c = code;
        for &i in &support {
            values[i] = Some((c % rows as u64) as usize);
            c /= rows as u64;
        }
        let inside = support.iter().all(|&i| grid.0[i][values[i].unwrap()]);
        let f = DiscreteFunction::partial(values);
        if amr.recognize(&f, 0).unwrap() != inside {
            return Err(format!("recognize disagrees with grid on {f}"));
        }
        count += u64::from(inside);
    }
    Ok(count)
}

fn entropy_oracle() -> Outcome {
    let mut fig = Amr::new(4, 7).unwrap();
    fig.register(&vec![0, 1, 3, 6].into()).unwrap();
    fig.register(&vec![2, 1, 5, 6].into()).unwrap();
    let capacity = (fig.rows() as u64).pow(fig.n() as u32);
    let fig_count = 2f64.powf(fig.pattern_count_log2());
    ensure(fig.entropy() == 0.5, || {
        format!("4x7 example entropy {}", fig.entropy())
    })?;
    ensure(fig_count == 4.0 && capacity == 2401, || {
        format!("4x7 example count {fig_count} of {capacity}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xE27);
    let mut max_err = 0.0f64;
    for k in 0..200 {
        let n = rng.random_range(1..=6);
        let rows = rng.random_range(1..=8);
        let (amr, grid) = random_register(&mut rng, n, rows);
        let expected = grid
            .counts()
            .iter()
            .map(|&mu| if mu == 0 { 0.0 } else { (mu as f64).log2() })
            .sum::<f64>()
            / n as f64;
        let err = (amr.entropy() - expected).abs();
        max_err = max_err.max(err);
        ensure(err <= 1e-9, || {
            format!("register {k}: entropy off by {err}")
        })?;

        let count = enumerate_contained(&amr, &grid)?;
        let from_log = 2f64.powf(amr.pattern_count_log2()).round() as u64;
        ensure(from_log == count, || {
            format!("register {k} ({n}x{rows}): 2^log2 count {from_log}, enumerated {count}")
        })?;
    }
    Ok(format!(
        "4x7 example e=0.5, 4 of 2401; 200 registers, max entropy error {max_err:.1e}"
    ))
}

fn soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50DA);
    let mut retrieved = 0;
    for t in 0..10_000 {
        let n = rng.random_range(1..=8);
        let rows = rng.random_range(1..=16);
        let random_fn = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..n).map(|_| rng.random_range(0..rows)).collect()
        };
        let stored: Vec<Vec<usize>> = (0..rng.random_range(1..=8))
            .map(|_| random_fn(&mut rng))
            .collect();
        let mut amr = Amr::new(n, rows).unwrap();
        for f in &stored {
            amr.register(&f.clone().into()).unwrap();
        }
        for f in &stored {
            ensure(amr.recognize(&f.clone().into(), 0).unwrap(), || {
                format!("trial {t}: registered function not recognized")
            })?;
        }

        let cue: DiscreteFunction = if rng.random_bool(0.5) {
            stored[rng.random_range(0..stored.len())].clone().into()
        } else {
            random_fn(&mut rng).into()
        };
        let tolerance = rng.random_range(0..=2.min(n));

        for k in 0..n {
            if amr.recognize(&cue, k).unwrap() {
                ensure(amr.recognize(&cue, k + 1).unwrap(), || {
                    format!("trial {t}: tolerance monotonicity broken at {k}")
                })?;
            }
        }

        let mut bigger = amr.clone();
        bigger.register(&random_fn(&mut rng).into()).unwrap();
        if amr.recognize(&cue, tolerance).unwrap() {
            ensure(bigger.recognize(&cue, tolerance).unwrap(), || {
                format!("trial {t}: superset monotonicity broken")
            })?;
        }

        let seed = rng.random::<u64>();
        let once = amr
            .retrieve(&cue, tolerance, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        let twice = amr
            .retrieve(&cue, tolerance, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        ensure(once == twice, || {
            format!("trial {t}: retrieval not seed-deterministic")
        })?;
        if let Some(f) = once {
            retrieved += 1;
            ensure(f.is_total() && amr.recognize(&f, 0).unwrap(), || {
                format!("trial {t}: retrieved {f} not recognized")
            })?;
        }
    }
    Ok(format!("10^4 trials, {retrieved} retrievals checked"))
}

fn triangular() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A1);
    for _ in 0..100 {
        ensure(sample_triangular(5, 5, 5, &mut rng) == 5, || {
            "degenerate run drew another value".into()
        })?;
    }
    let mut worst = 0.0f64;
    let mut configs = 0;
    for width in 1..=9usize {
        let lo = 3;
        let hi = lo + width - 1;
        for mode in lo..=hi {
            // Weight w + 1 - |v - mode|, w = max(mode - lo, hi - mode).
            let w = (mode - lo).max(hi - mode) as f64;
            let weights: Vec<f64> = (lo..=hi)
                .map(|v| w + 1.0 - (v as f64 - mode as f64).abs())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut hist = vec![0usize; width];
            for _ in 0..DRAWS {
                let v = sample_triangular(lo, hi, mode, &mut rng);
                ensure((lo..=hi).contains(&v), || {
                    format!("draw {v} outside [{lo}, {hi}]")
                })?;
                hist[v - lo] += 1;
            }
            for (k, &h) in hist.iter().enumerate() {
                let dev = (h as f64 / DRAWS as f64 - weights[k] / total).abs();
                worst = worst.max(dev);
                ensure(dev <= 0.01, || {
                    format!(
                        "run [{lo},{hi}] mode {mode}: value {} off by {dev:.4}",
                        lo + k
                    )
                })?;
            }
            configs += 1;
        }
    }
    Ok(format!(
        "{configs} runs of width <= 9, worst frequency error {worst:.4}"
    ))
}

fn synthetic_trends() -> Outcome {
    let ds = synth_generate(&SynthParams {
        classes: 10,
        per_class: 500,
        n: 64,
        rows_hint: 64,
        separation: 0.02,
        seed: 2024,
    })
    .map_err(|e| e.to_string())?;
    let folds: Vec<usize> = (0..10).collect();
    let m_values: Vec<u32> = (0..=9).collect();
    let rows = eval::experiment_rows_sweep(&ds, &folds, &m_values, 0).map_err(|e| e.to_string())?;
    let m0 = rows.mean_for(0).unwrap();
    let m9 = rows.mean_for(9).unwrap();

    ensure(m0.reg_recall >= 0.99, || {
        format!("register recall at m=0 is {}", m0.reg_recall)
    })?;
    ensure(m9.reg_precision_undefined < 10.0, || {
        "register precision at m=9 undefined for every class".into()
    })?;
    ensure(m9.reg_precision > m0.reg_precision, || {
        format!(
            "precision m=9 {} <= m=0 {}",
            m9.reg_precision, m0.reg_precision
        )
    })?;
    ensure(m0.accepting_avg == 10.0, || {
        format!("accepting set at m=0 is {}", m0.accepting_avg)
    })?;
    ensure(m9.accepting_avg <= 1.5, || {
        format!("accepting set at m=9 is {}", m9.accepting_avg)
    })?;
    for m in 5..9 {
        let (a, b) = (rows.mean_for(m).unwrap(), rows.mean_for(m + 1).unwrap());
        ensure(b.reg_recall <= a.reg_recall, || {
            format!("register recall rises from m={m} to m={}", m + 1)
        })?;
    }

    let fill = eval::experiment_fill_sweep(&ds, &folds, 6, &FILL_PERCENTS, 0)
        .map_err(|e| e.to_string())?;
    let recalls: Vec<f64> = FILL_PERCENTS
        .iter()
        .map(|&p| fill.mean_for(p).unwrap().sys_recall)
        .collect();
    ensure(recalls.windows(2).all(|w| w[0] <= w[1]), || {
        format!("system recall not monotone in fill: {recalls:?}")
    })?;
    Ok(format!(
        "reg recall m=0 {:.3}; reg precision m=0 {:.3} -> m=9 {:.3}; accepting {:.1} -> {:.3}; \
         sys recall by fill {:.3?}",
        m0.reg_recall,
        m0.reg_precision,
        m9.reg_precision,
        m0.accepting_avg,
        m9.accepting_avg,
        recalls
    ))
}

fn occlusion() -> Outcome {
    let ds = synth_generate(&SynthParams {
        classes: 10,
        per_class: 500,
        n: 64,
        rows_hint: 64,
        separation: 0.02,
        seed: 2024,
    })
    .map_err(|e| e.to_string())?;
    let occluded = synth_occlude(&ds, 3, 77).map_err(|e| e.to_string())?;
    let cue_ids = eval::select_cues(&occluded, 0, 10).map_err(|e| e.to_string())?;
    let cfg = RetrievalConfig {
        fold: 0,
        m: 6,
        fills: FILL_PERCENTS.to_vec(),
        tolerances: vec![0, 1, 2, 3],
        seed: 5,
    };
    let rows =
        eval::experiment_retrieval(&ds, &occluded, &cue_ids, &cfg).map_err(|e| e.to_string())?;
    // Rows are sorted by (cue, fill, tolerance): groups of four tolerances.
    for group in rows.chunks(4) {
        for pair in group.windows(2) {
            ensure(!pair[0].accepted() || pair[1].accepted(), || {
                format!(
                    "cue {} fill {}%: accepted at tolerance {} but not {}",
                    pair[0].cue_id, pair[0].fill_pct, pair[0].tolerance, pair[1].tolerance
                )
            })?;
        }
    }
    let counts = eval::acceptance_counts(&rows);
    let at = |tol| -> usize { FILL_PERCENTS.iter().map(|&p| counts[&(p, tol)]).sum() };
    let by_tol: Vec<usize> = (0..=3).map(at).collect();
    ensure(by_tol[3] > by_tol[0], || {
        format!("relaxation recovered nothing: {by_tol:?}")
    })?;
    Ok(format!(
        "{} cues x {} fills; accepted by tolerance 0..3: {by_tol:?}",
        cue_ids.len(),
        FILL_PERCENTS.len()
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("d.csv");
    let ds = synth_generate(&SynthParams {
        classes: 5,
        per_class: 200,
        n: 32,
        rows_hint: 64,
        separation: 0.03,
        seed: 8,
    })
    .map_err(|e| e.to_string())?;
    write_dataset(&ds, &data).map_err(|e| e.to_string())?;
    let data = data.to_str().unwrap();

    let run = |args: &[&str], out: &Path| -> Result<(), String> {
        let argv = ["eam"]
            .iter()
            .chain(args)
            .copied()
            .chain(["--out", out.to_str().unwrap()]);
        match eam::cli::run(argv) {
            0 => Ok(()),
            code => Err(format!("{args:?} exited {code}")),
        }
    };
    let mut checked = Vec::new();
    for (args, file) in [
        (vec!["sweep-rows", "--data", data], "rows_sweep.csv"),
        (
            vec![
                "retrieve",
                "--data",
                data,
                "--cues-per-class",
                "3",
                "--seed",
                "17",
            ],
            "retrieval.csv",
        ),
    ] {
        let a = dir.path().join(format!("first-{}", args[0]));
        let b = dir.path().join(format!("second-{}", args[0]));
        run(&args, &a)?;
        run(&args, &b)?;
        let (x, y) = (
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
        );
        ensure(x == y, || format!("{file} differs between identical runs"))?;
        checked.push(format!("{file} ({} bytes)", x.len()));
    }
    Ok(format!("byte-identical: {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("entropy oracle", Duration::from_secs(5), entropy_oracle),
        ("operation soundness", Duration::from_secs(30), soundness),
        ("triangular sampler", Duration::from_secs(5), triangular),
        (
            "synthetic end-to-end trends",
            Duration::from_secs(300),
            synthetic_trends,
        ),
        (
            "occlusion tolerance monotonicity",
            Duration::from_secs(120),
            occlusion,
        ),
        ("determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
