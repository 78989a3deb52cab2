//! HOPC of a single point: a sheared elliptical patch seen at three
//! radii, showing which eigenvector blocks survive pruning.

use hopc::eigen::eigenratios;
use hopc::geom::{icosahedron_axes, neighbor_threshold, Point3};
use hopc::hopc::{hopc_point, DEFAULT_THETA};

fn main() -> hopc::Result<()> {
    let axes = icosahedron_axes(20)?;
    println!("{} axes, neighbour threshold psi = {:.12}", axes.m(), neighbor_threshold(&axes));

    let cloud: Vec<Point3> = (0..40)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .map(|(i, j)| {
            let (x, y) = (-2.0 + 0.1 * i as f64, -0.75 + 0.1 * j as f64);
            Point3::new(x, y, 0.15 * x * x - 0.05 * y)
        })
        .collect();
    let p = Point3::new(0.0, 0.0, 0.0);

    for r in [0.5, 1.0, 2.0] {
        let support: Vec<Point3> = cloud.iter().copied().filter(|q| (q - p).norm() <= r).collect();
        let d = hopc_point(&p, &support, &axes, DEFAULT_THETA)?;
        let ratios = eigenratios(&d.eigen, None);
        println!(
            "r = {r}: {} points, lambda = [{:.4}, {:.4}, {:.4}], d12 = {:.3}, d23 = {:.3}, case {:?}",
            support.len(),
            d.eigen.lambdas[0],
            d.eigen.lambdas[1],
            d.eigen.lambdas[2],
            ratios.d12,
            ratios.d23,
            d.case
        );
        for j in 0..3 {
            let block = d.block(j);
            let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
            let bins: Vec<String> = block.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, v)| format!("{i}:{v:.3}")).collect();
            println!("  h{} norm {norm:.4} bins [{}]", j + 1, bins.join(" "));
        }
    }
    Ok(())
}
