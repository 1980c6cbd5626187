use vineq::*;

fn main() {
    let manifest = generate_polyhedral_vi(5, 7, 708);
    let problem = manifest.instantiate().expect("instantiates");
    match solve(&problem, &SolverConfig::default()) {
        Ok(report) => println!("OK {} rows {}", report.status, report.trace.len()),
        Err(e) => println!("ERROR {e}"),
    }
}
