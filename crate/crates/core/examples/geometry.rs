//! Builds the default 16-block array and lists each block with its nominal
//! magnetization.

use halbach_bayes::geometry::{block_center_angle, build_default_array, nominal_angle, nominal_magnetization, GeometryConfig};

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;
    println!(
        "{} blocks, bore radius {} m, outer radius {} m, {} rings of {} m",
        array.blocks.len(),
        array.inner_radius,
        array.outer_radius,
        array.n_rings,
        array.ring_length
    );
    println!("block  centre[deg]  magnetization[deg]  area[mm^2]  |M|[A/m]");
    for i in 1..=array.blocks.len() {
        let m = nominal_magnetization(&array, i)?;
        println!(
            "{i:>5}  {:>11.2}  {:>18.1}  {:>10.1}  {:>8.0}",
            block_center_angle(i)?,
            nominal_angle(i)?,
            array.block(i)?.area() * 1e6,
            m.norm()
        );
    }
    Ok(())
}
