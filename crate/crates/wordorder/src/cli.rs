//! Command-line front end. Every setting a command accepts is also a
//! `--name value` flag (dashes and underscores are interchangeable) and can
//! be given in a `--config` file; flags win.

use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::commands::{self, CliError, TrainKind};
use crate::config::{Key, Settings};

const TRAIN_KINDS: [TrainKind; 4] = [TrainKind::Ngram, TrainKind::Nplm, TrainKind::Rnnlm, TrainKind::Bag2seq];

fn with_keys(mut cmd: Command, keys: &[Key]) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("settings file of key=value lines"),
    );
    for k in keys {
        let dashed = k.name.replace('_', "-");
        let mut arg = Arg::new(k.name).long(k.name).value_name("VALUE").action(ArgAction::Set);
        if dashed != k.name {
            arg = arg.alias(dashed);
        }
        if let Some(d) = k.default {
            arg = arg.help(format!("default: {d}"));
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

pub fn command() -> Command {
    let train = TRAIN_KINDS.iter().fold(
        Command::new("train")
            .about("Train a language model or bag-to-sequence model")
            .subcommand_required(true),
        |cmd, &kind| cmd.subcommand(with_keys(Command::new(kind.name()), &commands::train_keys(kind))),
    );
    Command::new("wordorder")
        .about("Recover word order from bags of words")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(train)
        .subcommand(with_keys(
            Command::new("shuffle").about("Scramble the tokens of each line"),
            commands::SHUFFLE_KEYS,
        ))
        .subcommand(with_keys(
            Command::new("decode").about("Order bags of words with beam search"),
            &commands::decode_keys(),
        ))
        .subcommand(with_keys(
            Command::new("tune").about("Tune log-linear scorer weights for BLEU"),
            &commands::tune_keys(),
        ))
        .subcommand(with_keys(
            Command::new("eval").about("Corpus BLEU of hypotheses against references"),
            commands::EVAL_KEYS,
        ))
        .subcommand(with_keys(
            Command::new("bench").about("Time decoding across beam sizes and heuristics"),
            &commands::bench_keys(),
        ))
}

fn settings(name: &str, keys: &[Key], m: &ArgMatches) -> Result<Settings, CliError> {
    let overrides: Vec<(String, String)> = keys
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let path = m.get_one::<String>("config").map(PathBuf::from);
    Ok(Settings::load(name, keys, path.as_deref(), &overrides)?)
}

/// Parses `args` and runs the chosen command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wordorder: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<(), CliError> {
    let (name, m) = matches
        .subcommand()
        .ok_or_else(|| CliError::Usage("no command given".into()))?;
    match name {
        "train" => {
            let (kind_name, m) = m
                .subcommand()
                .ok_or_else(|| CliError::Usage("no model kind given".into()))?;
            let kind = TRAIN_KINDS
                .into_iter()
                .find(|k| k.name() == kind_name)
                .ok_or_else(|| CliError::Usage(format!("unknown model kind {kind_name}")))?;
            let keys = commands::train_keys(kind);
            commands::train(kind, settings(&format!("train {kind_name}"), &keys, m)?)
        }
        "shuffle" => commands::shuffle(settings(name, commands::SHUFFLE_KEYS, m)?),
        "decode" => commands::decode(settings(name, &commands::decode_keys(), m)?),
        "tune" => commands::tune(settings(name, &commands::tune_keys(), m)?),
        "eval" => {
            print!("{}", commands::eval(settings(name, commands::EVAL_KEYS, m)?)?);
            Ok(())
        }
        "bench" => commands::bench(settings(name, &commands::bench_keys(), m)?),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}
