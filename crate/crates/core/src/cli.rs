//! Command-line surface of the `semrelay` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    build_knowledge, evaluate, gnuplot_script, load_models, run_placement_sweep, run_snr_sweep, save_models,
    to_csv, train_ae_stage, train_models, train_semantic_stage, ExperimentConfig, Models, SnrAxis, SweepResult,
};
use crate::harness::persist::{load_autoencoder, save_autoencoder, AE_ENCODER_FILE};
use crate::relay::StrategyKind;

#[derive(Debug, Parser)]
#[command(name = "semrelay", version, about = "Semantic relay channel simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the auto-encoder/decoder pair and save it.
    TrainAe(Common),
    /// Train the semantic codecs through the saved auto-encoder.
    TrainSem(Common),
    /// Evaluate every strategy at the configured operating point.
    Eval(Common),
    /// Sweep per-hop SNR.
    SweepSnr {
        #[command(flatten)]
        common: Common,
        /// SNR points in dB, comma separated.
        #[arg(long = "snr-db", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        snr_db: Vec<f64>,
        /// Hold the source→relay hop at this SNR and sweep only the second hop.
        #[arg(long, allow_hyphen_values = true)]
        fixed_hop1_db: Option<f64>,
    },
    /// Sweep the relay position under the configured link budget.
    SweepPlacement {
        #[command(flatten)]
        common: Common,
        /// Relay positions in (0, 1), comma separated.
        #[arg(long = "d", value_delimiter = ',', required = true)]
        d: Vec<f64>,
    },
    /// Write the generated corpora, vocabularies and lexicon.
    GenCorpus(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON); built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path: CSV for evaluations, directory for gen-corpus.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Strategies, comma separated: af, df, df-semantic, sf.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<StrategyKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Directory holding trained model files.
    #[arg(long, default_value = "models")]
    pub model_dir: PathBuf,
    /// Also write a gnuplot script for the CSV to this path.
    #[arg(long)]
    pub gnuplot_script: Option<PathBuf>,
}

impl Common {
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if !self.strategy.is_empty() {
            c.strategies = self.strategy.clone();
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Saved models when present, otherwise trained in memory from the config.
fn models_for(config: &ExperimentConfig, dir: &Path) -> Result<Models> {
    if dir.join(AE_ENCODER_FILE).exists() {
        load_models(config, dir)
    } else {
        eprintln!("no models in {}, training from the config", dir.display());
        train_models(config)
    }
}

fn emit(result: &SweepResult, common: &Common) -> Result<()> {
    let csv = to_csv(result);
    match &common.out {
        Some(p) => std::fs::write(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(script) = &common.gnuplot_script {
        let csv_name = common
            .out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "results.csv".into());
        std::fs::write(script, gnuplot_script(result, &csv_name))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainAe(c) => {
            let config = c.experiment()?;
            let ae = train_ae_stage(&config)?;
            save_autoencoder(&ae, &c.model_dir)?;
            eprintln!("auto-encoder saved to {}", c.model_dir.display());
        }
        Command::TrainSem(c) => {
            let config = c.experiment()?;
            let ae = if c.model_dir.join(AE_ENCODER_FILE).exists() {
                load_autoencoder(&c.model_dir, config.autoencoder)?
            } else {
                return Err(Error::Config(format!(
                    "no auto-encoder in {}; run train-ae first",
                    c.model_dir.display()
                )));
            };
            let models = train_semantic_stage(&config, ae)?;
            save_models(&models, &c.model_dir)?;
            eprintln!("semantic codecs saved to {}", c.model_dir.display());
        }
        Command::Eval(c) => {
            let config = c.experiment()?;
            let models = models_for(&config, &c.model_dir)?;
            emit(&evaluate(&config, &models)?, &c)?;
        }
        Command::SweepSnr {
            common,
            snr_db,
            fixed_hop1_db,
        } => {
            let config = common.experiment()?;
            let axis = match fixed_hop1_db {
                Some(hop1_db) => SnrAxis::FixedHop1 { hop1_db },
                None => SnrAxis::BothHops,
            };
            let models = models_for(&config, &common.model_dir)?;
            emit(&run_snr_sweep(&config, &models, &snr_db, axis)?, &common)?;
        }
        Command::SweepPlacement { common, d } => {
            let config = common.experiment()?;
            if config.link_budget.is_none() {
                return Err(Error::Config("sweep-placement needs link_budget in the config".into()));
            }
            let models = models_for(&config, &common.model_dir)?;
            emit(&run_placement_sweep(&config, &models, &d)?, &common)?;
        }
        Command::GenCorpus(c) => {
            let config = c.experiment()?;
            let corpus = build_knowledge(&config)?;
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
            std::fs::create_dir_all(&dir)?;
            for bk in [&corpus.source, &corpus.destination] {
                let mut text = bk.sentences().join("\n");
                text.push('\n');
                std::fs::write(dir.join(format!("{}.txt", bk.id)), text)?;
                bk.vocab.save(&dir.join(format!("{}_vocab.txt", bk.id)))?;
            }
            corpus.lexicon.save(&dir.join("lexicon.tsv"))?;
            eprintln!(
                "{} sentences, lexicon of {} rules written to {}",
                corpus.source.corpus.len(),
                corpus.lexicon.len(),
                dir.display()
            );
        }
    }
    Ok(())
}
