//! Flat `key = value` config files.
//!
//! A key is `<section>.<flag>` where the section names a subcommand path
//! (`simulate`, `corpus.embed`, ...) and the flag is one of its long options,
//! or a bare global flag such as `threads`. Entries are turned into
//! command-line tokens placed before the user's own, so explicit flags win.

use std::collections::BTreeMap;

use clap::Command;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<ConfigEntry>, String> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", no + 1));
        };
        let key = k.trim().to_string();
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if key.is_empty() {
            return Err(format!("line {}: empty key", no + 1));
        }
        if let Some(prev) = seen.insert(key.clone(), no + 1) {
            return Err(format!("line {}: duplicate key `{key}` (first on line {prev})", no + 1));
        }
        out.push(ConfigEntry {
            line: no + 1,
            key,
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// Tokens split by where they belong: global ones go right after the program
/// name, the rest right after the active subcommand.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Injected {
    pub global: Vec<String>,
    pub command: Vec<String>,
}

const RESERVED: [&str; 3] = ["config", "help", "version"];

fn tokens(cmd: &Command, name: &str, e: &ConfigEntry) -> Result<Vec<String>, String> {
    let arg = cmd
        .get_arguments()
        .find(|a| a.get_long() == Some(name) && !RESERVED.contains(&name))
        .ok_or_else(|| format!("line {}: unknown key `{}`", e.line, e.key))?;
    if arg.get_action().takes_values() {
        Ok(vec![format!("--{name}"), e.value.clone()])
    } else {
        match e.value.as_str() {
            "true" => Ok(vec![format!("--{name}")]),
            "false" => Ok(Vec::new()),
            other => Err(format!("line {}: `{}` expects true or false, got `{other}`", e.line, e.key)),
        }
    }
}

/// Validate every entry against the command tree and collect the tokens for
/// the active subcommand path. `skip_global` lists global flags whose value
/// already comes from the environment.
pub fn inject(root: &Command, entries: &[ConfigEntry], active: &[&str], skip_global: &[&str]) -> Result<Injected, String> {
    let mut inj = Injected::default();
    for e in entries {
        match e.key.rsplit_once('.') {
            None => {
                let is_global = root.get_arguments().any(|a| a.is_global_set() && a.get_long() == Some(e.key.as_str()));
                if !is_global {
                    return Err(format!("line {}: unknown key `{}`", e.line, e.key));
                }
                let t = tokens(root, &e.key, e)?;
                if !skip_global.contains(&e.key.as_str()) {
                    inj.global.extend(t);
                }
            }
            Some((section, name)) => {
                let mut cmd = root;
                for part in section.split('.') {
                    cmd = cmd
                        .find_subcommand(part)
                        .ok_or_else(|| format!("line {}: unknown section `{section}`", e.line))?;
                }
                if cmd.has_subcommands() {
                    return Err(format!("line {}: section `{section}` needs a subaction", e.line));
                }
                let t = tokens(cmd, name, e)?;
                if section.split('.').eq(active.iter().copied()) {
                    inj.command.extend(t);
                }
            }
        }
    }
    Ok(inj)
}

/// Config path and subcommand path from raw argv, without full validation
/// (required flags may still come from the config file). `value_globals`
/// are global options taking a value.
pub fn prescan(argv: &[String], value_globals: &[&str], root: &Command) -> (Option<String>, Vec<String>) {
    let mut config = None;
    let mut path = Vec::new();
    let mut cmd = root;
    let mut i = 1;
    while i < argv.len() {
        let tok = &argv[i];
        i += 1;
        if tok == "--" {
            break;
        }
        if let Some(flag) = tok.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if value_globals.contains(&name) {
                let value = inline.or_else(|| {
                    let v = argv.get(i).cloned();
                    i += 1;
                    v
                });
                if name == "config" {
                    config = value;
                }
            }
            continue;
        }
        if tok.starts_with('-') || !cmd.has_subcommands() {
            continue;
        }
        match cmd.find_subcommand(tok) {
            Some(sub) => {
                path.push(tok.clone());
                cmd = sub;
            }
            None => break,
        }
    }
    (config, path)
}

/// Rebuild argv with injected tokens. `active` is the subcommand path from
/// [`prescan`]; `value_globals` are global options taking a value.
pub fn splice(argv: &[String], active: &[&str], value_globals: &[&str], inj: &Injected) -> Vec<String> {
    let mut out = vec![argv[0].clone()];
    out.extend(inj.global.iter().cloned());
    let mut depth = 0;
    let mut i = 1;
    let mut inserted = false;
    while i < argv.len() {
        let tok = &argv[i];
        out.push(tok.clone());
        i += 1;
        if inserted || tok == "--" {
            continue;
        }
        if let Some(flag) = tok.strip_prefix("--") {
            if value_globals.contains(&flag) && i < argv.len() {
                out.push(argv[i].clone());
                i += 1;
            }
            continue;
        }
        if depth < active.len() && tok == active[depth] {
            depth += 1;
            if depth == active.len() {
                out.extend(inj.command.iter().cloned());
                inserted = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::Cli;
    use clap::CommandFactory;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_comments_quotes_and_rejects_duplicates() {
        let e = parse("# c\n\nsimulate.nu = 0.1\nbounds.variant = \"limited\"\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].value, "limited");
        assert!(parse("a = 1\na = 2\n").is_err());
        assert!(parse("novalue\n").is_err());
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let root = Cli::command();
        for bad in ["simulate.bogus = 1", "nosuch.n = 1", "corpus.k = 3", "bogus = 1", "simulate.config = x"] {
            let e = parse(bad).unwrap();
            assert!(inject(&root, &e, &["simulate"], &[]).is_err(), "{bad}");
        }
    }

    #[test]
    fn only_active_section_injected() {
        let root = Cli::command();
        let e = parse("threads = 2\nsimulate.nu = 0.1\nbounds.n = 5\ncorpus.embed.pca = 4\nattack.normalized = true\n").unwrap();
        let inj = inject(&root, &e, &["corpus", "embed"], &[]).unwrap();
        assert_eq!(inj.global, argv("--threads 2"));
        assert_eq!(inj.command, argv("--pca 4"));
        let inj = inject(&root, &e, &["attack"], &["threads"]).unwrap();
        assert!(inj.global.is_empty());
        assert_eq!(inj.command, argv("--normalized"));
    }

    #[test]
    fn prescan_finds_config_and_path() {
        let root = Cli::command();
        let g = ["threads", "config"];
        let (c, p) = prescan(&argv("prog --threads 2 corpus --config=a.cfg embed --pca 3"), &g, &root);
        assert_eq!(c.as_deref(), Some("a.cfg"));
        assert_eq!(p, argv("corpus embed"));
        let (c, p) = prescan(&argv("prog bounds --config b.cfg --variant limited"), &g, &root);
        assert_eq!(c.as_deref(), Some("b.cfg"));
        assert_eq!(p, argv("bounds"));
        let (c, p) = prescan(&argv("prog --config corpus bounds"), &g, &root);
        assert_eq!(c.as_deref(), Some("corpus"));
        assert_eq!(p, argv("bounds"));
    }

    #[test]
    fn splice_places_tokens_after_subcommand() {
        let inj = Injected {
            global: argv("--threads 2"),
            command: argv("--pca 4"),
        };
        let got = splice(&argv("prog --config f.cfg corpus embed --pca 8"), &["corpus", "embed"], &["threads", "config"], &inj);
        assert_eq!(got, argv("prog --threads 2 --config f.cfg corpus embed --pca 4 --pca 8"));
    }
}
