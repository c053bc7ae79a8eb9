//! Client side of the code-execution worker.
//!
//! The worker is a separate process speaking newline-delimited JSON on its
//! standard streams. One request is in flight at a time. A request that runs
//! past the timeout kills the worker; a fresh one is started with an empty
//! namespace and the caller is told so.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRUNCATION_MARKER: &str = "...[truncated]";
pub const TIMEOUT_MESSAGE: &str = "TIMEOUT: session state reset";
pub const CRASH_MESSAGE: &str = "WORKER EXITED: session state reset";

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("sandbox root `{0}` is not a directory")]
    BadRoot(PathBuf),
    #[error("failed to start worker `{program}`: {source}")]
    WorkerSpawnFailed { program: String, source: std::io::Error },
    #[error("worker did not answer the handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("worker session is dead: {0}")]
    SessionDead(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl WorkerCommand {
    pub fn new(program: impl Into<String>) -> Self {
        WorkerCommand { program: program.into(), args: Vec::new() }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionLimits {
    pub exec_timeout: Duration,
    /// Characters of stdout plus stderr kept per exec.
    pub output_limit: usize,
    pub handshake_timeout: Duration,
    pub shutdown_grace: Duration,
}

impl Default for SessionLimits {
    fn default() -> Self {
        SessionLimits {
            exec_timeout: Duration::from_secs(60),
            output_limit: 10_000,
            handshake_timeout: Duration::from_secs(20),
            shutdown_grace: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    pub ok: bool,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
    pub truncated: bool,
}

impl ExecResult {
    /// Text handed back to the agent.
    pub fn render(&self) -> String {
        let mut s = String::new();
        if !self.stdout.is_empty() {
            s.push_str(&self.stdout);
        }
        if !self.stderr.is_empty() {
            if !s.is_empty() && !s.ends_with('\n') {
                s.push('\n');
            }
            s.push_str("[stderr]\n");
            s.push_str(&self.stderr);
        }
        if s.is_empty() {
            s.push_str(if self.ok { "(no output)" } else { "(failed with no output)" });
        }
        s
    }
}

fn take_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Cut stdout and stderr so their combined length, markers included, fits
/// in `limit` characters. Stderr gets at least half the room when both are
/// long.
pub fn truncate_output(stdout: &str, stderr: &str, limit: usize) -> (String, String, bool) {
    let (lo, le) = (stdout.chars().count(), stderr.chars().count());
    if lo + le <= limit {
        return (stdout.to_string(), stderr.to_string(), false);
    }
    let m = TRUNCATION_MARKER.chars().count();
    let split = |avail: usize| {
        let keep_out = lo.min(avail.saturating_sub(le).max(avail / 2));
        (keep_out, le.min(avail - keep_out))
    };
    let mut avail = limit.saturating_sub(m);
    let (mut ko, mut ke) = split(avail);
    if ko < lo && ke < le {
        avail = limit.saturating_sub(2 * m);
        (ko, ke) = split(avail);
    }
    let cut = |s: &str, keep: usize, len: usize| {
        if keep < len {
            format!("{}{TRUNCATION_MARKER}", take_chars(s, keep))
        } else {
            s.to_string()
        }
    };
    (cut(stdout, ko, lo), cut(stderr, ke, le), true)
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

enum Failure {
    Timeout,
    Exited,
}

impl Worker {
    fn spawn(command: &WorkerCommand, root: &Path) -> Result<Worker, SandboxError> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .arg(root)
            .current_dir(root)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SandboxError::WorkerSpawnFailed { program: command.program.clone(), source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker { child, stdin, lines })
    }

    fn request(&mut self, req: &Request, timeout: Duration) -> Result<Response, Failure> {
        let mut line = serde_json::to_string(req).expect("request serializes");
        line.push('\n');
        if self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()).is_err() {
            return Err(Failure::Exited);
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(text) => {
                    // Anything that is not a response to this request is noise.
                    if let Ok(resp) = serde_json::from_str::<Response>(&text) {
                        if resp.id == req.id {
                            return Ok(resp);
                        }
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(Failure::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(Failure::Exited),
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn stop(&mut self, id: u64, grace: Duration) {
        let req = Request { id, op: "shutdown".into(), code: None };
        if let Ok(mut line) = serde_json::to_string(&req) {
            line.push('\n');
            let _ = self.stdin.write_all(line.as_bytes());
            let _ = self.stdin.flush();
        }
        let deadline = Instant::now() + grace;
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
            }
        }
        self.kill();
    }
}

/// A live worker bound to one sandbox directory.
pub struct Session {
    command: WorkerCommand,
    root: PathBuf,
    limits: SessionLimits,
    worker: Option<Worker>,
    next_id: u64,
    execs: u64,
    closed: bool,
}

impl Session {
    pub fn start(command: WorkerCommand, root: impl AsRef<Path>, limits: SessionLimits) -> Result<Session, SandboxError> {
        let root = root.as_ref();
        if !root.is_dir() {
            return Err(SandboxError::BadRoot(root.to_path_buf()));
        }
        let root = root.canonicalize().map_err(|_| SandboxError::BadRoot(root.to_path_buf()))?;
        let mut s = Session { command, root, limits, worker: None, next_id: 1, execs: 0, closed: false };
        s.launch()?;
        Ok(s)
    }

    fn launch(&mut self) -> Result<(), SandboxError> {
        let mut w = Worker::spawn(&self.command, &self.root)?;
        let ping = Request { id: 0, op: "ping".into(), code: None };
        match w.request(&ping, self.limits.handshake_timeout) {
            Ok(_) => {
                self.worker = Some(w);
                Ok(())
            }
            Err(_) => {
                w.kill();
                Err(SandboxError::HandshakeTimeout(self.limits.handshake_timeout))
            }
        }
    }

    fn restart(&mut self) -> Result<(), SandboxError> {
        if let Some(mut w) = self.worker.take() {
            w.kill();
        }
        self.launch().map_err(|e| SandboxError::SessionDead(format!("restart failed: {e}")))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn pid(&self) -> Option<u32> {
        self.worker.as_ref().map(|w| w.child.id())
    }

    pub fn is_alive(&mut self) -> bool {
        match &mut self.worker {
            Some(w) => matches!(w.child.try_wait(), Ok(None)),
            None => false,
        }
    }

    /// Number of exec requests served so far.
    pub fn exec_count(&self) -> u64 {
        self.execs
    }

    fn call(&mut self, op: &str, code: Option<&str>, timeout: Duration) -> Result<ExecResult, SandboxError> {
        if self.closed {
            return Err(SandboxError::SessionDead("session was shut down".into()));
        }
        if self.worker.is_none() {
            self.restart()?;
        }
        let id = self.next_id;
        self.next_id += 1;
        let req = Request { id, op: op.into(), code: code.map(String::from) };
        let start = Instant::now();
        let outcome = self.worker.as_mut().expect("worker running").request(&req, timeout);
        let message = match outcome {
            Ok(resp) => {
                let (stdout, stderr, truncated) = truncate_output(&resp.stdout, &resp.stderr, self.limits.output_limit);
                return Ok(ExecResult { ok: resp.ok, stdout, stderr, duration_ms: resp.duration_ms, truncated });
            }
            Err(Failure::Timeout) => TIMEOUT_MESSAGE,
            Err(Failure::Exited) => CRASH_MESSAGE,
        };
        self.restart()?;
        Ok(ExecResult {
            ok: false,
            stdout: String::new(),
            stderr: message.to_string(),
            duration_ms: start.elapsed().as_millis() as u64,
            truncated: false,
        })
    }

    /// Run `code` in the persistent namespace.
    pub fn exec(&mut self, code: &str) -> Result<ExecResult, SandboxError> {
        self.execs += 1;
        self.call("exec", Some(code), self.limits.exec_timeout)
    }

    /// Clear the namespace without restarting the process.
    pub fn reset(&mut self) -> Result<ExecResult, SandboxError> {
        self.call("reset", None, self.limits.handshake_timeout)
    }

    pub fn ping(&mut self) -> Result<ExecResult, SandboxError> {
        self.call("ping", None, self.limits.handshake_timeout)
    }

    /// Stop the worker, forcibly after the grace period. Calling it again, or
    /// after the worker died on its own, does nothing. Later requests fail
    /// with [`SandboxError::SessionDead`].
    pub fn shutdown(&mut self) {
        self.closed = true;
        if let Some(mut w) = self.worker.take() {
            let id = self.next_id;
            self.next_id += 1;
            w.stop(id, self.limits.shutdown_grace);
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shutdown();
    }
}
