//! Synthetic-truth validation over a few seeds, with the linear update in the
//! 3D layout and pCN in the 2D cross-section. Reports go to a temporary folder.

use halbach_bayes::harness::{run_linear_validation, run_pcn_validation, LinearValidationConfig, PcnValidationConfig};

fn main() -> halbach_bayes::Result<()> {
    let out = std::env::temp_dir().join("halbach-validation-example");
    std::fs::create_dir_all(&out).map_err(|e| halbach_bayes::Error::io(&out, e))?;
    let linear = LinearValidationConfig::default();
    let pcn = PcnValidationConfig::default();
    for seed in 0..3 {
        let o = run_linear_validation(&linear, seed)?;
        let r = run_pcn_validation(&pcn, seed)?;
        println!(
            "seed {seed}: linear q_B {:.1}%  linear q_F {:.1}%  pCN {:.1}% (acceptance {:.2})",
            o.flux_density.reduction_percent,
            o.fourier.reduction_percent,
            r.reduction_percent,
            r.acceptance_rate.unwrap_or(f64::NAN)
        );
        std::fs::write(out.join(format!("linear-{seed}.svg")), o.flux_density.to_svg()).map_err(|e| halbach_bayes::Error::io(&out, e))?;
        r.write_csv(&out.join(format!("pcn-{seed}.csv")))?;
    }
    println!("plots and tables written to {}", out.display());
    Ok(())
}
