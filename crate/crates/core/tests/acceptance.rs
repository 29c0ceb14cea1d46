//! Acceptance run: criteria 1-11 at the default configuration, one line each,
//! followed by the genus-2 subset. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use eisdist::config::EngineConfig;
use eisdist::selftest::{run, SelftestOptions};

fn main() -> ExitCode {
    let mut ok = true;

    let start = Instant::now();
    let report = run(&SelftestOptions::new(EngineConfig::default())).expect("default configuration is valid");
    println!("acceptance: genus 1, seed {:#x}", report.seed);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!("genus 1 finished in {:.1}s", start.elapsed().as_secs_f64());
    ok &= report.passed();

    let start = Instant::now();
    let mut opts = SelftestOptions::new(EngineConfig { genus: 2, ..EngineConfig::default() });
    opts.levels = Some(vec![3]);
    let report = run(&opts).expect("genus-2 configuration is valid");
    println!("acceptance: genus 2 subset, levels [3]");
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!("genus 2 finished in {:.1}s", start.elapsed().as_secs_f64());
    ok &= report.passed();

    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
