//! Plain-text config files: one `flag-name = value` per line.

use clap::Command;

/// Converts config text into command-line arguments for `cmd`. Boolean
/// flags take `true` or `false`.
pub fn config_args(text: &str, cmd: &Command) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            return Err(format!("config line {}: config files cannot include each other", i + 1));
        }
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| format!("config line {}: unknown key `{key}`", i + 1))?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}"));
            out.push(value.to_string());
        } else {
            match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("config line {}: `{key}` takes true or false", i + 1)),
            }
        }
    }
    Ok(out)
}

/// Location of `--config` among the subcommand arguments, if any.
pub fn find_config(args: &[String]) -> Option<(usize, usize, String)> {
    for (i, a) in args.iter().enumerate() {
        if a == "--" {
            return None;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some((i, 1, v.to_string()));
        }
        if a == "--config" {
            return args.get(i + 1).map(|v| (i, 2, v.clone()));
        }
    }
    None
}

/// Splices config-file arguments in front of the explicit ones so that
/// flags given on the command line win.
pub fn expand(argv: Vec<String>, root: &Command) -> Result<Vec<String>, String> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let rest = argv[2..].to_vec();
    let Some((at, width, path)) = find_config(&rest) else {
        return Ok(argv);
    };
    let sub = root
        .find_subcommand(&argv[1])
        .ok_or_else(|| format!("unknown subcommand `{}`", argv[1]))?;
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    let mut out = argv[..2].to_vec();
    out.extend(config_args(&text, sub)?);
    out.extend(rest[..at].iter().cloned());
    out.extend(rest[at + width..].iter().cloned());
    Ok(out)
}
