//! One-dimensional and sliced Wasserstein distances on small samples.

use bbaudio::detect::{sliced_wasserstein, wasserstein_1d, EmpiricalDist};

fn main() -> bbaudio::Result<()> {
    let a = EmpiricalDist::new(vec![0.0, 1.0, 2.0])?;
    let b = EmpiricalDist::new(vec![0.5, 1.5, 2.5, 3.5])?;
    println!("W1(a, b) = {:.4}", wasserstein_1d(&a, &b));
    println!(
        "W1(point 1.0, a) = {:.4}",
        wasserstein_1d(&EmpiricalDist::point(1.0)?, &a)
    );

    let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
    let shifted: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] + 3.0, v[1] - 1.0]).collect();
    println!(
        "sliced, raw       {:.4}",
        sliced_wasserstein(&x, &shifted, 64, 1, false)?
    );
    println!(
        "sliced, centred   {:.4}",
        sliced_wasserstein(&x, &shifted, 64, 1, true)?
    );
    Ok(())
}
