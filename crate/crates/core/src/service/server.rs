//! Newline-delimited JSON over TCP, one reply line per request line.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;

use super::Environment;

fn serve_connection(env: &Environment, stream: TcpStream) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut reply = env.handle_line(line);
        reply.push('\n');
        writer.write_all(reply.as_bytes())?;
        writer.flush()?;
    }
}

/// Accepts connections until `stop` is set, serving up to `workers` at once.
pub fn serve(
    env: Arc<Environment>,
    listener: TcpListener,
    workers: usize,
    stop: Arc<AtomicBool>,
) -> std::io::Result<()> {
    let (tx, rx) = mpsc::channel::<TcpStream>();
    let rx = Arc::new(Mutex::new(rx));
    let pool: Vec<_> = (0..workers.max(1))
        .map(|_| {
            let rx = rx.clone();
            let env = env.clone();
            thread::spawn(move || loop {
                let next = rx.lock().expect("queue lock").recv();
                match next {
                    Ok(stream) => {
                        if let Err(e) = serve_connection(&env, stream) {
                            log::debug!("connection closed: {e}");
                        }
                    }
                    Err(_) => return,
                }
            })
        })
        .collect();
    listener.set_nonblocking(true)?;
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                if tx.send(stream).is_err() {
                    break;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(std::time::Duration::from_millis(10));
                env.expire_idle();
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
    drop(tx);
    for h in pool {
        let _ = h.join();
    }
    Ok(())
}
