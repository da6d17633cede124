// Time solver iterations while doubling the feature count.

use goal::bench::{run_bench, BenchResult, BenchSpec, SweepAxis};

pub fn run_example() -> goal::Result<BenchResult> {
    let spec = BenchSpec {
        axis: SweepAxis::D,
        from: 50,
        to: 800,
        fixed: 200,
        iterations: 5,
        repeats: 3,
        ..BenchSpec::default()
    };
    let result = run_bench(&spec)?;
    for p in &result.points {
        println!("D={:<5} {:.3e} s/iteration", p.d, p.seconds_per_iteration);
    }
    println!("log-log slope {:.2}", result.slope);
    Ok(result)
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
