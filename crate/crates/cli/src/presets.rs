//! Named flag bundles and `--config` files, both expanded into plain
//! command-line tokens before clap sees them. Precedence, lowest first:
//! preset, config file, explicit flags.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

pub struct Preset {
    pub name: &'static str,
    pub command: &'static str,
    pub flags: &'static [&'static str],
    pub about: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "newton-classic",
        command: "solve",
        flags: &["--f", "x^3-2*x-5", "--x0", "1", "--digits", "40", "--method", "ici"],
        about: "x^3 - 2x - 5 from x0 = 1 at 40 digits",
    },
    Preset {
        name: "exp-1000",
        command: "order",
        flags: &[
            "--f", "(x^2+x)*exp(-x)-1/3", "--x0", "2.0", "--digits", "1000", "--tol", "1e-590", "--max-iter", "8",
        ],
        about: "(x^2+x)e^-x - 1/3 from x0 = 2, eight steps at 1000 digits",
    },
    Preset {
        name: "exp-1624",
        command: "order",
        flags: &[
            "--f", "(x^2+x)*exp(-x)-1/3", "--x0", "2.0", "--digits", "1624", "--tol", "1e-1620", "--max-iter", "9",
        ],
        about: "the same problem, nine steps at 1624 digits",
    },
    Preset {
        name: "cube-roots",
        command: "basin",
        flags: &[
            "--f", "z^3-1", "--re", "-2", "2", "--im", "-2", "2", "--size", "200", "--max-iter", "13", "--tol", "1e-8",
        ],
        about: "basins of z^3 - 1 on [-2,2]^2",
    },
    Preset {
        name: "cube-roots-zoom",
        command: "basin",
        flags: &[
            "--f", "z^3-1", "--re", "-1.45", "-1.05", "--im", "-0.2", "0.2", "--size", "200", "--max-iter", "13",
            "--tol", "1e-8",
        ],
        about: "zoom on the disconnected components of the z^3 - 1 basins",
    },
    Preset {
        name: "kepler-basin",
        command: "basin",
        flags: &[
            "--f", "z - 0.083*sin(z) - 1", "--re", "-30.5", "-29.5", "--im", "-17.5", "-16.5", "--size", "100",
            "--max-iter", "30", "--tol", "1e-8",
        ],
        about: "basins of Kepler's equation, with NaN regions in white",
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        anyhow!("--preset: unknown preset {name:?} (available: {})", names.join(", "))
    })
}

pub fn help_text() -> String {
    let mut s = String::from(
        "Global options (accepted anywhere on the command line):\n  \
         --preset <NAME>  Prepend a named flag set; it also selects the subcommand if none is given\n  \
         --config <PATH>  Read flags from a TOML file (keys are flag names; optional `command` key)\n\nPresets:\n",
    );
    for p in PRESETS {
        s.push_str(&format!("  {:<16} {} {}\n", p.name, p.command, p.about));
    }
    s.push_str("\nExit status: 0 converged / done, 2 no convergence, 1 usage or input error.");
    s
}

pub const SUBCOMMANDS: &[&str] = &["solve", "order", "basin", "scan", "compare", "help"];

/// Removes every `--name VALUE` / `--name=VALUE` from `args`, returning the
/// last value.
fn take_option(args: &mut Vec<String>, name: &str) -> Result<Option<String>> {
    let mut value = None;
    let mut i = 0;
    let prefix = format!("{name}=");
    while i < args.len() {
        if args[i] == name {
            if i + 1 >= args.len() {
                bail!("{name}: a value is required");
            }
            value = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(v) = args[i].strip_prefix(&prefix) {
            value = Some(v.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(value)
}

/// Turns a TOML table into flag tokens; returns the optional `command` too.
pub fn config_tokens(text: &str) -> Result<(Option<String>, Vec<String>)> {
    let table: toml::Table = text.parse().context("--config: invalid TOML")?;
    let mut command = None;
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "command" {
            command = Some(value.as_str().ok_or_else(|| anyhow!("--config: `command` must be a string"))?.to_string());
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String> {
            Ok(match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => bail!("--config: unsupported value for `{key}`: {other}"),
            })
        };
        match &value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                out.push(flag);
                for item in items {
                    out.push(scalar(item)?);
                }
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok((command, out))
}

/// Expands `--preset` and `--config` into ordinary arguments.
pub fn expand(raw: Vec<String>) -> Result<Vec<String>> {
    let mut iter = raw.into_iter();
    let prog = iter.next().unwrap_or_else(|| "ici".to_string());
    let mut rest: Vec<String> = iter.collect();
    let preset = take_option(&mut rest, "--preset")?;
    let config = take_option(&mut rest, "--config")?;
    let mut command = match rest.first() {
        Some(first) if SUBCOMMANDS.contains(&first.as_str()) => Some(rest.remove(0)),
        _ => None,
    };
    let mut flags = Vec::new();
    if let Some(name) = preset {
        let p = find(&name)?;
        command.get_or_insert_with(|| p.command.to_string());
        flags.extend(p.flags.iter().map(|s| s.to_string()));
    }
    if let Some(path) = config {
        let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("--config: cannot read {path}"))?;
        let (cmd, tokens) = config_tokens(&text)?;
        if command.is_none() {
            command = cmd;
        }
        flags.extend(tokens);
    }
    let mut out = vec![prog];
    out.extend(command);
    out.extend(flags);
    out.extend(rest);
    Ok(out)
}
