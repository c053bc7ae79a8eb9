//! A tiny interpreter standing in for the Python worker in tests.
//!
//! It understands one statement per line (or `;`-separated):
//!
//! ```text
//! x = 5                 bind an integer, a 'string', "s" * n, or another name
//! print(expr)           write to stdout
//! eprint(expr)          write to stderr
//! write('p', expr)      create a file relative to the working directory
//! copy('src', 'dst')    copy a file relative to the working directory
//! sleep(ms)
//! raise Name('msg')     fail with `Name: msg`
//! 1/0                   fail with ZeroDivisionError
//! while True: pass      never return
//! exit()                terminate the process without replying
//! ```

use std::collections::HashMap;
use std::fs;
use std::thread;
use std::time::Duration;

#[derive(Debug, Default)]
pub struct Interpreter {
    names: HashMap<String, String>,
}

/// Result of running one code block.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub ok: bool,
    pub stdout: String,
    pub stderr: String,
    pub exit: bool,
}

fn unquote(s: &str) -> Option<&str> {
    let s = s.trim();
    let q = s.chars().next()?;
    (s.len() >= 2 && (q == '\'' || q == '"') && s.ends_with(q)).then(|| &s[1..s.len() - 1])
}

fn call_args<'a>(stmt: &'a str, name: &str) -> Option<&'a str> {
    stmt.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')
}

fn split_pair(args: &str) -> Option<(&str, &str)> {
    // The first argument is always a quoted path without commas.
    let comma = args.find(',')?;
    Some((args[..comma].trim(), args[comma + 1..].trim()))
}

impl Interpreter {
    pub fn reset(&mut self) {
        self.names.clear();
    }

    fn eval(&self, expr: &str) -> Result<String, String> {
        let expr = expr.trim();
        if let Some((lhs, rhs)) = expr.rsplit_once('*') {
            if let (Some(s), Ok(n)) = (unquote(lhs), rhs.trim().parse::<usize>()) {
                return Ok(s.repeat(n));
            }
        }
        if let Some(s) = unquote(expr) {
            return Ok(s.to_string());
        }
        if expr.parse::<i64>().is_ok() {
            return Ok(expr.to_string());
        }
        self.names.get(expr).cloned().ok_or_else(|| format!("NameError: name '{expr}' is not defined"))
    }

    fn statement(&mut self, stmt: &str, out: &mut Outcome) -> Result<(), String> {
        if stmt == "while True: pass" {
            loop {
                thread::sleep(Duration::from_millis(50));
            }
        }
        if stmt == "exit()" {
            out.exit = true;
            return Ok(());
        }
        if stmt.replace(' ', "") == "1/0" {
            return Err("ZeroDivisionError: division by zero".into());
        }
        if let Some(rest) = stmt.strip_prefix("raise ") {
            let (name, args) = rest.split_once('(').ok_or("SyntaxError: invalid syntax")?;
            let msg = unquote(args.trim_end_matches(')')).unwrap_or("");
            return Err(format!("{name}: {msg}"));
        }
        if let Some(args) = call_args(stmt, "print") {
            out.stdout.push_str(&self.eval(args)?);
            out.stdout.push('\n');
            return Ok(());
        }
        if let Some(args) = call_args(stmt, "eprint") {
            out.stderr.push_str(&self.eval(args)?);
            out.stderr.push('\n');
            return Ok(());
        }
        if let Some(args) = call_args(stmt, "sleep") {
            let ms: u64 = args.trim().parse().map_err(|_| "TypeError: sleep expects milliseconds")?;
            thread::sleep(Duration::from_millis(ms));
            return Ok(());
        }
        if let Some(args) = call_args(stmt, "write") {
            let (path, value) = split_pair(args).ok_or("TypeError: write expects two arguments")?;
            let path = unquote(path).ok_or("TypeError: path must be a string")?;
            let value = self.eval(value)?;
            return fs::write(path, value).map_err(|e| format!("OSError: {e}"));
        }
        if let Some(args) = call_args(stmt, "copy") {
            let (src, dst) = split_pair(args).ok_or("TypeError: copy expects two arguments")?;
            let (src, dst) = (unquote(src).ok_or("TypeError")?, unquote(dst).ok_or("TypeError")?);
            return fs::copy(src, dst).map(|_| ()).map_err(|e| format!("FileNotFoundError: {e}"));
        }
        if let Some((name, value)) = stmt.split_once('=') {
            let name = name.trim();
            if !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                let v = self.eval(value)?;
                self.names.insert(name.to_string(), v);
                return Ok(());
            }
        }
        Err(format!("SyntaxError: cannot run `{stmt}`"))
    }

    pub fn run(&mut self, code: &str) -> Outcome {
        let mut out = Outcome { ok: true, ..Outcome::default() };
        for stmt in code.split(['\n', ';']).map(str::trim).filter(|s| !s.is_empty()) {
            if let Err(e) = self.statement(stmt, &mut out) {
                out.ok = false;
                out.stderr.push_str("Traceback (most recent call last):\n");
                out.stderr.push_str(&e);
                out.stderr.push('\n');
                break;
            }
            if out.exit {
                break;
            }
        }
        out
    }
}
