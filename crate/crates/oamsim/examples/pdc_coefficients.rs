//! Two-photon mode decomposition of a collinear down-conversion source:
//! the overlap coefficients c(l, l') and the exact charge conservation that
//! confines them to the anti-diagonal l' = -l.
//!
//! ```bash
//! cargo run --example pdc_coefficients
//! ```

use oamsim::pdc::{angular_widths, coefficient_table, overlap_coefficient, PdcParams};

fn main() {
    let params = PdcParams::default();
    let widths = angular_widths(&params);
    println!(
        "pump waist {:.0} um, collection waist {:.0} um -> combined width w_tilde = {:.3} um",
        params.pump_waist * 1e6,
        params.collection_waist * 1e6,
        widths.w_tilde * 1e6
    );
    println!(
        "angular width of the emission: delta = lambda / (pi w_tilde) = {:.3} mrad",
        widths.delta_pdc * 1e3
    );

    let table = coefficient_table(3, &params).unwrap();
    let c00 = table.value(0, 0).unwrap().norm();

    // The raw coefficients carry a factor w_tilde^(|l| + |l'|) from the
    // radial integral, so the readable comparison divides it out.
    println!("\n|c(l, l')| / (c(0,0) w_tilde^(|l|+|l'|)) for charges -3 ..= 3:");
    print!("{:>6}", "l\\l'");
    for l_prime in -3..=3 {
        print!("{l_prime:>10}");
    }
    println!();
    for l in -3i32..=3 {
        print!("{l:>6}");
        for l_prime in -3i32..=3 {
            let scale = widths.w_tilde.powi(l.abs() + l_prime.abs());
            let ratio = table.value(l, l_prime).unwrap().norm() / (c00 * scale);
            if ratio > 1e-8 {
                print!("{ratio:>10.3}");
            } else {
                print!("{:>10}", "0");
            }
        }
        println!();
    }
    println!("entries off the anti-diagonal vanish: the pair carries zero net charge.");

    // The radial integral gives c(l, -l) proportional to l! w_tilde^(2l),
    // so consecutive anti-diagonal entries differ by exactly l w_tilde^2.
    println!("\nanti-diagonal ratios c(l, -l) / c(l-1, 1-l) vs l * w_tilde^2:");
    let w_tilde_sq = widths.w_tilde * widths.w_tilde;
    let mut previous = overlap_coefficient(0, 0, &params).unwrap().norm();
    for l in 1..=3 {
        let current = overlap_coefficient(l, -l, &params).unwrap().norm();
        println!(
            "  l = {l}: ratio {:.6e} m^2, expected {:.6e} m^2",
            current / previous,
            l as f64 * w_tilde_sq
        );
        previous = current;
    }
}
