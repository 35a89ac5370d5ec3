use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgMatches, Command};
use pddpg_core::harness::{self, RunConfig};

fn cli() -> Command {
    let mut train = Command::new("train")
        .about("Train one agent and write its per-epoch CSV")
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value config file; flags override it"),
        );
    for key in RunConfig::KEYS {
        train = train.arg(
            Arg::new(key)
                .long(flag_name(key))
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help(format!("overrides config key `{key}`")),
        );
    }
    Command::new("pddpg")
        .about("DDPG and prioritized DDPG on built-in control tasks")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(train)
        .subcommand(
            Command::new("compare")
                .about("Run two configs over the same seeds and summarize the difference")
                .arg(Arg::new("config-a").long("config-a").value_name("PATH").required(true))
                .arg(Arg::new("config-b").long("config-b").value_name("PATH").required(true))
                .arg(
                    Arg::new("seeds")
                        .long("seeds")
                        .value_name("LIST")
                        .required(true)
                        .help("comma-separated seeds, at least 3"),
                )
                .arg(Arg::new("out").long("out").value_name("DIR").required(true)),
        )
        .subcommand(Command::new("keys").about("Print every config key with its default value"))
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn train(m: &ArgMatches) -> Result<()> {
    let mut config = match m.get_one::<String>("config") {
        Some(path) => RunConfig::from_file(&PathBuf::from(path))?,
        None => RunConfig::default(),
    };
    for key in RunConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            config
                .set(key, v)
                .with_context(|| format!("--{}", flag_name(key)))?;
        }
    }
    let records = harness::run(&config)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.3}"));
    for r in &records {
        println!(
            "epoch {:>4}  steps {:>8}  return {:>10.3}  overall {:>10.3}  eval {:>10}  loss {:>10}  sigma {}",
            r.epoch,
            r.steps,
            r.epoch_return,
            r.overall_reward,
            fmt(r.eval_return),
            fmt(r.critic_loss),
            fmt(r.sigma)
        );
    }
    if let Some(dir) = &config.out_dir {
        println!("wrote {}", dir.join(config.csv_file_name()).display());
    }
    Ok(())
}

fn compare(m: &ArgMatches) -> Result<()> {
    let a = RunConfig::from_file(&PathBuf::from(m.get_one::<String>("config-a").unwrap()))?;
    let b = RunConfig::from_file(&PathBuf::from(m.get_one::<String>("config-b").unwrap()))?;
    let seeds = m
        .get_one::<String>("seeds")
        .unwrap()
        .split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    if seeds.len() < 3 {
        bail!("--seeds needs at least 3 seeds");
    }
    let out = PathBuf::from(m.get_one::<String>("out").unwrap());
    let c = harness::compare(&a, &b, &seeds, Some(&out))?;
    println!("metric                 median_a      median_b      diff(b-a)  wins_a wins_b ties");
    for s in [&c.final_overall_reward, &c.aulc] {
        println!(
            "{:<20} {:>12.3} {:>12.3} {:>12.3} {:>7} {:>6} {:>4}",
            s.metric, s.median_a, s.median_b, s.median_diff, s.wins_a, s.wins_b, s.ties
        );
    }
    println!("wrote {}", out.join("compare_summary.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let result = match matches.subcommand() {
        Some(("train", m)) => train(m),
        Some(("compare", m)) => compare(m),
        Some(("keys", _)) => {
            print!("{}", RunConfig::default().to_text());
            Ok(())
        }
        _ => unreachable!("subcommand required"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
