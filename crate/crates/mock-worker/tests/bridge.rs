use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use scrub_core::rng::Substream;
use scrub_core::sandbox::{truncate_output, SandboxError, Session, SessionLimits, WorkerCommand, TIMEOUT_MESSAGE, TRUNCATION_MARKER};

fn worker() -> WorkerCommand {
    WorkerCommand::new(env!("CARGO_BIN_EXE_scrub-mock-worker"))
}

fn limits() -> SessionLimits {
    SessionLimits { exec_timeout: Duration::from_secs(2), ..SessionLimits::default() }
}

fn start(root: &Path) -> Session {
    Session::start(worker(), root, limits()).unwrap()
}

#[test]
fn state_persists_between_execs() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    assert!(s.is_alive());
    assert_eq!(s.exec_count(), 0);
    assert!(s.exec("x=5").unwrap().ok);
    let r = s.exec("print(x)").unwrap();
    assert!(r.ok);
    assert_eq!(r.stdout.trim_end(), "5");
    let hi = s.exec("print('hi')").unwrap();
    assert_eq!((hi.ok, hi.stdout.as_str()), (true, "hi\n"));
}

#[test]
fn hundred_random_names_persist() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let mut rng = Substream::new(11, "names");
    for i in 0..100 {
        let len = 1 + rng.below(8) as usize;
        let name: String = (0..len).map(|_| (b'a' + rng.below(26) as u8) as char).collect();
        let value = rng.below(1_000_000);
        assert!(s.exec(&format!("{name}_{i} = {value}")).unwrap().ok);
        assert_eq!(s.exec(&format!("print({name}_{i})")).unwrap().stdout, format!("{value}\n"));
    }
}

#[test]
fn sessions_have_separate_namespaces() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut s1 = start(a.path());
    let mut s2 = start(b.path());
    s1.exec("only_here = 1").unwrap();
    let r = s2.exec("print(only_here)").unwrap();
    assert!(!r.ok);
    assert!(r.stderr.contains("NameError"));
    assert_ne!(s1.pid(), s2.pid());
}

#[test]
fn exception_keeps_worker_alive() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    s.exec("y = 2").unwrap();
    let pid = s.pid();
    let r = s.exec("1/0").unwrap();
    assert!(!r.ok);
    assert!(r.stderr.contains("ZeroDivisionError"));
    assert_eq!(s.pid(), pid);
    assert_eq!(s.exec("print(y)").unwrap().stdout, "2\n");
}

#[test]
fn timeout_resets_namespace() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    s.exec("x = 5").unwrap();
    let pid = s.pid();
    let t = Instant::now();
    let r = s.exec("while True: pass").unwrap();
    let elapsed = t.elapsed();
    assert!(!r.ok);
    assert!(r.stderr.contains("TIMEOUT"));
    assert_eq!(r.stderr, TIMEOUT_MESSAGE);
    assert!(elapsed >= Duration::from_secs(2) && elapsed < Duration::from_secs(10), "{elapsed:?}");
    assert_ne!(s.pid(), pid);
    let after = s.exec("print(x)").unwrap();
    assert!(!after.ok);
    assert!(after.stderr.contains("NameError"));
}

#[test]
fn ids_match_over_many_exchanges() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let mut rng = Substream::new(5, "exchanges");
    for _ in 0..500 {
        let v = rng.below(1 << 40);
        let r = match rng.below(3) {
            0 => s.exec(&format!("print({v})")).unwrap(),
            1 => s.ping().unwrap(),
            _ => s.exec(&format!("eprint({v})")).unwrap(),
        };
        assert!(r.ok);
        assert!(r.stdout.is_empty() || r.stdout == format!("{v}\n"));
        assert!(r.stderr.is_empty() || r.stderr == format!("{v}\n"));
    }
}

#[test]
fn relative_writes_land_in_the_sandbox() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("train.csv"), "a\n1\n").unwrap();
    let mut s = start(dir.path());
    assert!(s.exec("write('note.txt', 'hello')").unwrap().ok);
    assert!(s.exec("copy('train.csv', 'train_cleaned_v1.csv')").unwrap().ok);
    assert_eq!(std::fs::read_to_string(dir.path().join("note.txt")).unwrap(), "hello");
    assert_eq!(std::fs::read_to_string(dir.path().join("train_cleaned_v1.csv")).unwrap(), "a\n1\n");
}

#[test]
fn large_output_is_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let r = s.exec("print('a' * 20000)").unwrap();
    assert!(r.truncated);
    assert!(r.stdout.ends_with(TRUNCATION_MARKER));
    assert!(r.stdout.chars().count() + r.stderr.chars().count() <= 10_000);
    let small = s.exec("print('a' * 10)").unwrap();
    assert!(!small.truncated);
    assert!(!truncate_output(&small.stdout, "", 10_000).2);
}

#[test]
fn reset_clears_names() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    s.exec("z = 1").unwrap();
    assert!(s.reset().unwrap().ok);
    assert!(!s.exec("print(z)").unwrap().ok);
}

#[test]
fn crash_is_reported_and_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let r = s.exec("exit()").unwrap();
    assert!(!r.ok);
    assert!(r.stderr.contains("session state reset"));
    assert!(s.exec("print('back')").unwrap().ok);
}

fn process_gone(pid: u32) -> bool {
    // A reaped child leaves no /proc entry.
    !Path::new(&format!("/proc/{pid}")).exists()
}

#[test]
fn shutdown_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let pid = s.pid().unwrap();
    s.shutdown();
    assert!(process_gone(pid));
    assert!(!s.is_alive());
    s.shutdown();
}

#[test]
fn shutdown_after_external_kill() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = start(dir.path());
    let pid = s.pid().unwrap();
    Command::new("kill").arg("-9").arg(pid.to_string()).status().unwrap();
    std::thread::sleep(Duration::from_millis(100));
    s.shutdown();
    assert!(process_gone(pid));
}

#[test]
fn spawn_and_handshake_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = Session::start(WorkerCommand::new("/no/such/worker"), dir.path(), limits());
    assert!(matches!(missing, Err(SandboxError::WorkerSpawnFailed { .. })));
    let silent = WorkerCommand::new("sh").arg("-c").arg("sleep 30");
    let quick = SessionLimits { handshake_timeout: Duration::from_millis(300), ..limits() };
    assert!(matches!(Session::start(silent, dir.path(), quick), Err(SandboxError::HandshakeTimeout(_))));
    let bad_root = Session::start(worker(), dir.path().join("absent"), limits());
    assert!(matches!(bad_root, Err(SandboxError::BadRoot(_))));
}
