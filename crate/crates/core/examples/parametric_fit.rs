//! Poisson/Markov special case: occurrence-exposure estimates with their
//! standard errors, and the per-unit information of the recurrent rate
//! against its closed form.

use rcrjoint::parametric::{fit_special_case, theoretical_info_rcr, transient_block};
use rcrjoint::simulate::{simulate_cohort_with, Generator, Scenario};

fn main() -> rcrjoint::Result<()> {
    let sc = Scenario::special_case();
    let n = 2000;
    let c = simulate_cohort_with(&sc, n, 3, Generator::ExactSpecial)?;
    let f = fit_special_case(&c, sc.spaces())?;

    for e in f.lambda.iter().chain(&f.eta_estimates).chain(&f.xi_estimates) {
        println!("{:10} {:8.4}  se {:.4}", e.name, e.value, e.se.unwrap_or(f64::NAN));
    }

    let gamma = transient_block(&sc.params().xi, sc.spaces());
    let (_, p0) = sc.initial.marginals(sc.spaces());
    let nu = sc.censoring.rate().expect("exponential censoring");
    let j = theoretical_info_rcr(1.0, &gamma, &p0, nu)?;
    let observed = f.tally.total_time / n as f64;
    println!("\ninformation per unit: theory {j:.4}, this sample {observed:.4}");
    Ok(())
}
