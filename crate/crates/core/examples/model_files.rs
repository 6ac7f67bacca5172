//! Train once, save every model file, reload into a fresh process state and
//! check that the reloaded models evaluate the same.
//!
//! cargo run --release --example model_files -- [dir]

use std::path::PathBuf;

use semrelay::harness::{
    evaluate, load_models, save_models, to_csv, train_models, ExperimentConfig,
};

fn main() -> semrelay::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "models".into()));
    let mut config = ExperimentConfig {
        trials: 100,
        ..Default::default()
    };
    config.ae_schedule.steps = 1000;
    config.sem_schedule.steps = 800;

    let models = train_models(&config)?;
    save_models(&models, &dir)?;
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let entry = entry?;
        files.push((
            entry.file_name().to_string_lossy().into_owned(),
            entry.metadata()?.len(),
        ));
    }
    files.sort();
    for (name, len) in files {
        println!("{name:<32} {len:>8} bytes");
    }

    let reloaded = load_models(&config, &dir)?;
    println!("\nin memory\n{}", to_csv(&evaluate(&config, &models)?));
    println!("reloaded\n{}", to_csv(&evaluate(&config, &reloaded)?));
    println!(
        "the same files work with `semrelay eval --model-dir {}`",
        dir.display()
    );
    Ok(())
}
