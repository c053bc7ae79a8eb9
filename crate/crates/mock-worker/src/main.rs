use std::io::{self, BufRead, Write};
use std::time::Instant;

use scrub_mock_worker::Interpreter;
use serde_json::{json, Value};

fn main() {
    // The last argument is the sandbox root; the bridge already made it our cwd.
    let mut interp = Interpreter::default();
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let start = Instant::now();
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                let resp = json!({"id": -1, "ok": false, "stdout": "", "stderr": format!("bad request: {e}"), "duration_ms": 0});
                let _ = writeln!(stdout, "{resp}");
                let _ = stdout.flush();
                continue;
            }
        };
        let id = req.get("id").cloned().unwrap_or(Value::Null);
        let op = req.get("op").and_then(Value::as_str).unwrap_or("");
        let (ok, out, err, stop) = match op {
            "ping" => (true, String::new(), String::new(), false),
            "reset" => {
                interp.reset();
                (true, String::new(), String::new(), false)
            }
            "shutdown" => (true, String::new(), String::new(), true),
            "exec" => {
                let code = req.get("code").and_then(Value::as_str).unwrap_or("");
                let o = interp.run(code);
                if o.exit {
                    std::process::exit(3);
                }
                (o.ok, o.stdout, o.stderr, false)
            }
            other => (false, String::new(), format!("unknown op `{other}`"), false),
        };
        let ms = start.elapsed().as_millis() as u64;
        let resp = json!({"id": id, "ok": ok, "stdout": out, "stderr": err, "duration_ms": ms});
        let _ = writeln!(stdout, "{resp}");
        let _ = stdout.flush();
        if stop {
            break;
        }
    }
}
