//! A small Monte-Carlo study of the illustration: bias, SD, mean standard
//! error and coverage per parameter, plus one point of the correlation curves.
//!
//! `cargo run --release --example replication_study -- 100` sets the number of
//! replications (default 40).

use rcrjoint::harness::{mesh, run_study, StudyConfig};
use rcrjoint::simulate::{Overflow, Scenario};

fn main() -> rcrjoint::Result<()> {
    let mreps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let sc = Scenario::illustration().with_ds(0.005).with_overflow(Overflow::Clip).with_seed(2024);
    let mut cfg = StudyConfig::new(sc, 50, mreps);
    cfg.mesh = mesh(3.0, 7);
    let s = run_study(&cfg)?;

    println!("{} replications, {} failed", s.mreps, s.failures);
    println!("{:16} {:>7} {:>7} {:>6} {:>6} {:>5}", "", "true", "mean", "sd", "ase", "cov");
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    for r in &s.rows {
        println!("{:16} {:>7} {:7.3} {:>6} {:>6} {:>5}", r.name, f(r.truth), r.mean, f(r.sd), f(r.ase), f(r.coverage));
    }

    if let Some(cc) = &s.correlations {
        let k = 3;
        println!("\nmean correlations at s = {}", cc.mesh[k]);
        for a in &cc.labels {
            let row: Vec<String> =
                cc.labels.iter().map(|b| cc.get(k, a, b).map_or("   -  ".into(), |v| format!("{v:6.2}"))).collect();
            println!("{a:>4} {}", row.join(" "));
        }
    }
    Ok(())
}
