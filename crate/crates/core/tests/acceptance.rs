use shapley_core::verify::{run_criterion, CRITERIA};

fn main() {
    let seed = std::env::var("SHAPLEY_FLOW_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20240501);
    let mut failed = 0;
    for (id, name, _) in CRITERIA {
        let r = run_criterion(id, seed);
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {id:>2} {name} ({:.2}s of {:.0}s)", r.seconds, r.budget_seconds);
        if !r.passed {
            failed += 1;
            let detail = serde_json::to_string(&r.detail).unwrap_or_default();
            let full = std::env::var_os("SHAPLEY_FLOW_VERBOSE").is_some();
            let cut: String = detail.chars().take(if full { usize::MAX } else { 600 }).collect();
            println!("     {cut}");
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
