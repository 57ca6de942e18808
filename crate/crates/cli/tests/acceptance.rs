//! One PASS/FAIL line per acceptance criterion, at the published tolerances.

use std::collections::BTreeMap;

use phasefilter_cli::verify::{run_suite, Check, Suite};

#[test]
fn acceptance() {
    let checks: Vec<Check> = [Suite::Core, Suite::Filters, Suite::Side]
        .into_iter()
        .flat_map(run_suite)
        .collect();
    let mut by_criterion: BTreeMap<u32, Vec<&Check>> = BTreeMap::new();
    for c in &checks {
        by_criterion.entry(c.criterion).or_default().push(c);
    }
    let mut failures = Vec::new();
    for (k, cs) in &by_criterion {
        let pass = cs.iter().all(|c| c.pass);
        let parts: Vec<String> = cs
            .iter()
            .map(|c| {
                if c.informational {
                    format!("{} = {:.3e} (logged)", c.name, c.observed)
                } else {
                    format!("{} = {:.3e} <= {:.1e}", c.name, c.observed, c.tolerance)
                }
            })
            .collect();
        println!(
            "{} criterion {k:>2}: {}",
            if pass { "PASS" } else { "FAIL" },
            parts.join("; ")
        );
        if !pass {
            failures.extend(
                cs.iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("{}: {}", c.name, c.detail)),
            );
        }
    }
    assert_eq!(by_criterion.len(), 11, "every criterion reports");
    assert!(failures.is_empty(), "failed checks: {failures:#?}");
}
