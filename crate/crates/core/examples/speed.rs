use ropf_core::grid::{build_contingency_set, parse_case, base_profile};
use ropf_core::opf::{build_full_n1_opf, solve_opf, verify_solution};
use std::time::Instant;

fn main() {
    for name in ["case5", "case73"] {
        let text = std::fs::read_to_string(format!("fixtures/{}.json", name)).unwrap();
        let case = parse_case(&text).unwrap();
        let conts = build_contingency_set(&case);
        let load = base_profile(&case);
        let t0 = Instant::now();
        let problem = build_full_n1_opf(&case, &load, &conts).unwrap();
        let build_s = t0.elapsed().as_secs_f64();
        println!(
            "{}: rows={} vars={} ineq={}",
            name,
            problem.lp.n_constraints(),
            problem.lp.n_variables(),
            problem.lp.n_inequalities()
        );
        let t1 = Instant::now();
        let sol = solve_opf(&problem).unwrap();
        let solve_s = t1.elapsed().as_secs_f64();
        let report = verify_solution(&case, &sol, 1e-4);
        println!(
            "  build {:.3}s solve {:.3}s iters={} obj={:.6} violations={}",
            build_s, solve_s, sol.stats.iterations, sol.objective_value, report.count()
        );
    }
}
