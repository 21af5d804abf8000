use std::time::Instant;

use nczeta::integrate::reduce;
use nczeta::oracle::{run_battery, PipelineTerms, Tolerances};
use nczeta::symbolcalc::Calculus;

#[test]
fn hundred_seed_battery() {
    let b2 = Calculus::symbolic().parametrix(2).unwrap().component(-4);
    let r = reduce(&b2).unwrap();
    let terms = PipelineTerms {
        direct: r.all_left_result.clone(),
        modular: r.modular.clone(),
        split_symmetric: r.split_symmetric.clone(),
        split_direct: r.split_direct.clone(),
    };
    let t = Instant::now();
    let rep = run_battery(0, 100, &[3, 4, 5], &terms, &Tolerances::default()).unwrap();
    eprintln!("battery in {:?}", t.elapsed());
    for (name, v) in [
        ("dm_integral", rep.worst(|t| t.dm_integral)),
        ("final", rep.worst(|t| t.final_identity)),
        ("antisymmetry", rep.worst(|t| t.antisymmetry)),
        ("regroup", rep.worst(|t| t.premain_vs_regrouped)),
        ("split", rep.worst(|t| t.split_variants)),
        ("log transport", rep.worst(|t| t.log_transport)),
        ("log delta", rep.worst(|t| t.log_delta)),
        ("trace", rep.worst(|t| t.trace_delta)),
        ("twist", rep.worst(|t| t.twist)),
    ] {
        eprintln!("{name}: {v:e}");
    }
    let failed: Vec<u64> = rep.trials.iter().filter(|t| !t.passed).map(|t| t.seed).collect();
    assert!(rep.passed, "failing seeds {failed:?}");
}
