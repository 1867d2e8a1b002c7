//! Writes a simulated cohort to a dataset file, reads it back, fits it and
//! stores the result as JSON, then reloads the result and tabulates the
//! baseline survivor of each recurrent type.

use rcrjoint::harness::FitMode;
use rcrjoint::io::result::{settings, sha256_hex};
use rcrjoint::io::{read_dataset, write_baselines_csv, write_dataset, BaselineTable, Dataset, ResultFile};
use rcrjoint::model::EffectiveAgePolicy;
use rcrjoint::semiparam::{fit_semiparametric, FitOptions};
use rcrjoint::simulate::{simulate_cohort, Overflow, Scenario};

fn main() -> rcrjoint::Result<()> {
    let dir = std::env::temp_dir().join("rcrjoint-example");
    std::fs::create_dir_all(&dir)?;
    let data_path = dir.join("cohort.txt");

    let sc = Scenario::illustration().with_overflow(Overflow::Clip).with_seed(8);
    let mut cohort = simulate_cohort(&sc, 40)?;
    cohort.fingerprint = sc.fingerprint();
    write_dataset(&data_path, &Dataset::new(sc.spaces().clone(), cohort))?;

    let d = read_dataset(&data_path)?;
    let age = EffectiveAgePolicy::PerfectRepairOwnType;
    let opts = FitOptions::default();
    let fit = fit_semiparametric(&d.cohort, &d.spaces, age, &opts)?;
    let text = std::fs::read_to_string(&data_path)?;
    let st = settings(FitMode::Semiparametric, age, "log-count-power", &opts.lambda_times);
    let result =
        ResultFile::from_semiparametric(&fit, st, sha256_hex(&text), d.cohort.fingerprint.clone(), d.cohort.len());
    let result_path = dir.join("fit.json");
    std::fs::write(&result_path, result.to_json()?)?;

    let back = ResultFile::read(&result_path)?;
    println!("{} estimates read back from {}", back.estimates.len(), result_path.display());
    for e in back.estimates.iter().take(4) {
        println!("  {:8} {:.4} (p = {:.3e})", e.name, e.value, e.p_value.unwrap_or(f64::NAN));
    }
    let tables: Vec<BaselineTable> = back
        .baselines
        .iter()
        .map(|b| {
            let mut t = b.clone();
            t.cumulative.truncate(3);
            t.survivor.truncate(3);
            t
        })
        .collect();
    write_baselines_csv(std::io::stdout(), &tables)
}
