//! Saves a prior and an operator, reloads them bit-exactly and shows that a
//! corrupted file is refused.

use halbach_bayes::field::assemble_linear_operator;
use halbach_bayes::geometry::{build_default_array, GeometryConfig, ParameterLayout};
use halbach_bayes::harness::{synthetic_prior, SyntheticPriorConfig};
use halbach_bayes::io::{load_density, load_operator, operator_cache_key, save_density, save_operator};
use halbach_bayes::observables::ObservableSpec;

fn main() -> halbach_bayes::Result<()> {
    let dir = std::env::temp_dir().join("halbach-persistence-example");
    std::fs::create_dir_all(&dir).map_err(|e| halbach_bayes::Error::io(&dir, e))?;
    let array = build_default_array(&GeometryConfig::default())?;
    let layout = ParameterLayout::cross_section();
    let (prior, _) = synthetic_prior(&array, layout, &SyntheticPriorConfig::default())?;

    let json = save_density(&dir, "prior", &prior, Some(layout))?;
    let back = load_density(&json)?;
    println!("prior round trip exact: {}", back.density == prior);

    let spec = ObservableSpec::fourier(0.075, 8, 60, vec![0.0]);
    let op = assemble_linear_operator(&array, &spec, layout)?;
    let key = operator_cache_key(&array, &spec, layout)?;
    save_operator(&dir, &key, &op)?;
    println!("operator round trip exact: {}", load_operator(&dir, &key)?.matrix == op.matrix);

    let path = dir.join(format!("{key}.hbmx"));
    let mut bytes = std::fs::read(&path).map_err(|e| halbach_bayes::Error::io(&path, e))?;
    bytes[40] ^= 0x10;
    std::fs::write(&path, bytes).map_err(|e| halbach_bayes::Error::io(&path, e))?;
    match load_operator(&dir, &key) {
        Err(e) => println!("corrupted operator refused: {e}"),
        Ok(_) => println!("corruption went unnoticed"),
    }
    Ok(())
}
