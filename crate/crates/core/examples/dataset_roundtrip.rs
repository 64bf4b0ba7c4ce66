//! Generates each synthetic setting, writes it as CSV and reads it back.
//!
//! `cargo run --release --example dataset_roundtrip`

use cgd::synth::Setting;
use cgd::GroupDataset;

fn main() -> cgd::Result<()> {
    let dir = std::env::temp_dir().join("cgd_dataset_roundtrip");
    std::fs::create_dir_all(&dir).map_err(|e| cgd::CgdError::Io {
        path: dir.clone(),
        source: e,
    })?;
    for setting in Setting::ALL {
        let data = setting.generate(7, None)?;
        let path = dir.join(format!("{setting}.csv"));
        data.write_csv(&path)?;
        let back = GroupDataset::read_csv(&path)?;
        println!(
            "{setting}: d = {}, train sizes {:?}, val {:?}, test {:?}, identical after round trip: {}",
            data.feature_dim(),
            data.train.counts(),
            data.val.counts(),
            data.test.counts(),
            back == data
        );
    }
    println!("files in {}", dir.display());
    Ok(())
}
