//! Draws one cohort of the simulated illustration and prints its process
//! statistics and the first lines of the dataset file.

use rcrjoint::harness::summarize_processes;
use rcrjoint::io::{format_dataset, Dataset};
use rcrjoint::simulate::{simulate_cohort, Overflow, Scenario};

fn main() -> rcrjoint::Result<()> {
    let sc = Scenario::illustration().with_overflow(Overflow::Clip).with_seed(17);
    let cohort = simulate_cohort(&sc, 50)?;
    let s = summarize_processes(std::slice::from_ref(&cohort), sc.spaces());

    println!("{} units, {} absorbed", s.units, s.absorbed);
    for r in &s.rcr {
        println!("RCR-{}: {:.2} events per unit, {:.3} time per event", r.risk, r.count.mean, r.time_per_event);
    }
    for h in &s.hs {
        println!("HS {}: occupation {:.3}, sojourn {:.3}", h.label, h.occupation.mean, h.sojourn.mean);
    }

    let text = format_dataset(&Dataset::new(sc.spaces().clone(), cohort));
    println!();
    for line in text.lines().take(15) {
        println!("{line}");
    }
    Ok(())
}
