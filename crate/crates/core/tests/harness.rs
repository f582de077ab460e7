mod common;

use seqbayes::harness::{generate_dataset, run_study_on, Dataset, StudyConfig};
use seqbayes::models::presets;
use seqbayes::prior::PriorConfig;

use common::quartiles;

fn config(methods: &[&str], weeks: &[usize]) -> StudyConfig {
    let mut c = StudyConfig::new("unused", methods.iter().map(|m| m.parse().unwrap()).collect());
    c.weeks = Some(weeks.to_vec());
    c
}

#[test]
fn overspecified_prior_inflates_si_estimates() {
    let ds = Dataset::simulate(&presets::flu1_sir(), 30, 8, 11).unwrap();
    let out = run_study_on(&config(&["seqb:well", "seqb:mis5"], &[6]), &ds).unwrap();
    let si = |m: &str| quartiles(&out.rows_for(m, 6).map(|r| r.si_hat_days).collect::<Vec<_>>()).1;
    assert!(
        si("seqb:mis5") > si("seqb:well"),
        "{} vs {}",
        si("seqb:mis5"),
        si("seqb:well")
    );
}

#[test]
fn study_is_identical_across_thread_counts() {
    let ds = Dataset::simulate(&presets::flu1_seir(), 6, 9, 4).unwrap();
    let mut c = config(&["wp", "seqb", "seqb:mis2"], &[3, 5, 7]);
    c.prior = PriorConfig::default().with_grid(80, 80);
    c.hdr_level = Some(0.9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_study_on(&c, &ds).unwrap())
    };
    let one = run(1);
    assert_eq!(one.rows.len(), 6 * 3 * 3);
    assert_eq!(run(3), one);
    assert_eq!(run(1), one);
}

#[test]
fn dataset_files_are_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate_dataset(&presets::flu1_sir(), 1, 10, 77, &a).unwrap();
    generate_dataset(&presets::flu1_sir(), 1, 10, 77, &b).unwrap();
    for ext in ["csv", "json"] {
        let read = |p: &std::path::Path| std::fs::read(p.with_extension(ext)).unwrap();
        assert_eq!(read(&a), read(&b), "{ext}");
    }
    let back = Dataset::load(&a).unwrap();
    assert_eq!(back.meta.seed, 77);
    assert_eq!(back.series.len(), 1);
}
