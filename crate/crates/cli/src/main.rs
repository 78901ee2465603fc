use std::io;
use std::process::ExitCode;

use clap::Parser;

use examflow::args::{Cli, Command};
use examflow::menu::{self, NotATerminal, Technique};
use examflow::run;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs.filter(|&n| n > 0);
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut out = io::stdout();
    let result = match &cli.command {
        Some(Command::Generate(a)) => run::generate(a, &mut out),
        Some(Command::Split(a)) => run::split(a, &mut out),
        Some(Command::Merge(a)) => run::merge(a, &mut out),
        Some(Command::Scores(a)) => run::scores(a, &mut out),
        None => match menu::choose() {
            Ok(None) => Ok(()),
            Ok(Some(t)) => {
                let m = &cli.menu;
                match t {
                    Technique::Generate => match m.generate() {
                        Some(a) => run::generate(&a, &mut out),
                        None => Err(anyhow::anyhow!("technique 1 needs --template")),
                    },
                    Technique::Split => run::split(&m.split(), &mut out),
                    Technique::Merge => run::merge(&m.merge(), &mut out),
                    Technique::Scores => run::scores(&m.scores(), &mut out),
                }
            }
            Err(e) if e.is::<NotATerminal>() => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            Err(e) => Err(anyhow::anyhow!("terminal error: {e}")),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
