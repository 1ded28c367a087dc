use csmfe::bench;
use csmfe::mesh::DofMap;

fn main() {
    for (name, el, steps) in [("cook", 242usize, 100usize), ("inhomog_compression", 96, 100), ("perforated_block", 96, 150)] {
        let t0 = std::time::Instant::now();
        let b = bench::generate(name, el, 1, None, false).unwrap();
        match bench::run(&b, steps, false) {
            Ok(run) => {
                let sys = csmfe::solver::System::new(&b.mesh, &b.model, &b.loads, &b.constraints).unwrap();
                let _ = sys;
                println!(
                    "{name} {} el ({} dofs), {} steps: monitored = {:.4}, reaction = {:.3} N, mean iters {:.2}, {:.1?}",
                    b.mesh.n_triangles(), DofMap::new(&b.mesh).n_total(), steps,
                    run.final_monitored(), run.final_reaction(), run.mean_iters, t0.elapsed()
                );
            }
            Err(e) => println!("{name} failed: {e}"),
        }
    }
}
