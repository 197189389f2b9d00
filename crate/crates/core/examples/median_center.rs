//! Geometric versus coordinate-wise median of a few building anchors.

use urbanfold::geogroup::{median_center, objective, CenterMethod};

fn main() -> urbanfold::Result<()> {
    let anchors = [
        [391_020.0, 5_811_400.0],
        [391_060.0, 5_811_420.0],
        [391_045.0, 5_811_380.0],
        [391_030.0, 5_811_450.0],
        [391_400.0, 5_811_900.0],
    ];
    for method in [CenterMethod::Geometric, CenterMethod::Coordinate] {
        let c = median_center(&anchors, method)?;
        println!("{method:?}: ({:.4}, {:.4}), sum of distances {:.3} m", c[0], c[1], objective(&anchors, c));
    }
    Ok(())
}
