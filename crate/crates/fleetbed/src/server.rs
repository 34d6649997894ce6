//! The logging server stub.
//!
//! Clients send line-delimited requests (a record minus its time field);
//! the server stamps each accepted request with its clock, optionally
//! appends it to the store, and optionally feeds it to a live detector.
//! The ground-truth label travels with the request for later evaluation
//! but is never passed to the detector interface — detectors see only the
//! time, client id, category, and payload.

use crate::orchestrator::RequestSink;
use crate::record::{parse_record, serialize_record, DataCategory, Label, LogRecord, Payload, RecordError};
use serde::Serialize;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Store batches are flushed once this many bytes of whole lines have
/// accumulated; every write syscall carries complete lines only, so a
/// killed run cannot leave a torn record.
const STORE_FLUSH_BYTES: usize = 64 * 1024;

/// What the server does with accepted records. At least one of `store`
/// and `detect` must be on.
#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// Append every record to `store_path`.
    pub store: bool,
    /// Feed every record to the live detector.
    pub detect: bool,
    pub store_path: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("server needs store mode, detect mode, or both")]
    NoModeActive,
    #[error("store mode requires a store path")]
    MissingStorePath,
    #[error("detect mode requires a detector")]
    DetectorRequired,
    #[error("malformed request: {0}")]
    MalformedRequest(#[from] RecordError),
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
}

/// The server's time source: an externally advanced virtual clock for
/// deterministic in-process runs, or milliseconds since a wall-clock
/// origin for networked ones.
#[derive(Debug, Clone, Copy)]
pub enum ClockSource {
    Virtual(u64),
    Wall(Instant),
}

impl ClockSource {
    pub fn wall_now() -> ClockSource {
        ClockSource::Wall(Instant::now())
    }

    fn now(&self) -> u64 {
        match self {
            ClockSource::Virtual(t) => *t,
            ClockSource::Wall(origin) => origin.elapsed().as_millis() as u64,
        }
    }
}

/// A detector fed record by record as requests arrive. Implementations
/// never see ground-truth labels. An `Err` verdict isolates the record
/// (counted as an abstention) without stopping ingestion.
pub trait LiveDetector: Send {
    fn verdict(
        &mut self,
        vtime: u64,
        client_id: &str,
        category: DataCategory,
        payload: &Payload,
    ) -> Result<Label, String>;
}

/// A live detector's answer for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Normal,
    Intrusion,
    /// The detector failed on this record and was skipped.
    Abstain,
}

/// Ingestion counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub ingested: u64,
    pub rejected: u64,
    pub abstained: u64,
}

/// Whole-line batching append writer for the store file.
struct LogStore {
    file: std::fs::File,
    buf: String,
}

impl LogStore {
    fn create(path: &std::path::Path) -> io::Result<LogStore> {
        Ok(LogStore {
            file: std::fs::File::create(path)?,
            buf: String::with_capacity(2 * STORE_FLUSH_BYTES),
        })
    }

    fn append(&mut self, line: &str) -> io::Result<()> {
        self.buf.push_str(line);
        self.buf.push('\n');
        if self.buf.len() >= STORE_FLUSH_BYTES {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        if !self.buf.is_empty() {
            self.file.write_all(self.buf.as_bytes())?;
            self.buf.clear();
        }
        Ok(())
    }
}

impl Drop for LogStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// The server core: parses requests, stamps them, stores them, and runs
/// the live detector. Shared between transports behind a mutex; all
/// ingestion is serialized, so the stored sequence and the detector's
/// verdict sequence are always identical.
pub struct Server {
    config: ServerConfig,
    clock: ClockSource,
    store: Option<LogStore>,
    detector: Option<Box<dyn LiveDetector>>,
    verdicts: Vec<Verdict>,
    stats: IngestStats,
}

impl Server {
    pub fn new(
        config: ServerConfig,
        detector: Option<Box<dyn LiveDetector>>,
        clock: ClockSource,
    ) -> Result<Server, ServerError> {
        if !config.store && !config.detect {
            return Err(ServerError::NoModeActive);
        }
        let store = if config.store {
            let path = config
                .store_path
                .as_ref()
                .ok_or(ServerError::MissingStorePath)?;
            Some(LogStore::create(path)?)
        } else {
            None
        };
        if config.detect && detector.is_none() {
            return Err(ServerError::DetectorRequired);
        }
        Ok(Server {
            config,
            clock,
            store,
            detector,
            verdicts: Vec::new(),
            stats: IngestStats::default(),
        })
    }

    /// Move the virtual clock forward; ignored under a wall clock.
    pub fn advance_to(&mut self, vtime: u64) {
        if let ClockSource::Virtual(t) = &mut self.clock {
            *t = vtime;
        }
    }

    /// Accept one request line (`client_id\tcategory\tpayload…\tlabel`),
    /// stamp it with the current clock, store it and/or hand it to the
    /// detector. Malformed requests are rejected and counted without
    /// touching the log.
    pub fn ingest_line(&mut self, request: &str) -> Result<LogRecord, ServerError> {
        let stamped = format!("{}\t{}", self.clock.now(), request.trim_end_matches(['\r', '\n']));
        let record = match parse_record(&stamped) {
            Ok(record) => record,
            Err(e) => {
                self.stats.rejected += 1;
                return Err(ServerError::MalformedRequest(e));
            }
        };
        if let Some(store) = &mut self.store {
            store.append(&serialize_record(&record))?;
        }
        if self.config.detect {
            let detector = self.detector.as_mut().expect("detect mode has a detector");
            let verdict = match detector.verdict(
                record.vtime(),
                record.client_id(),
                record.category(),
                record.payload(),
            ) {
                Ok(Label::Normal) => Verdict::Normal,
                Ok(Label::Intrusion) => Verdict::Intrusion,
                Err(_) => {
                    self.stats.abstained += 1;
                    Verdict::Abstain
                }
            };
            self.verdicts.push(verdict);
        }
        self.stats.ingested += 1;
        Ok(record)
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Verdicts in ingestion order (one per accepted record), when detect
    /// mode is on. The order matches the stored log exactly.
    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    /// Flush buffered store lines to disk.
    pub fn finish(&mut self) -> Result<(), ServerError> {
        if let Some(store) = &mut self.store {
            store.flush()?;
        }
        Ok(())
    }
}

/// Adapter driving an in-process server from an orchestrator run: the
/// emission time advances the server's virtual clock before each ingest.
pub struct ServerSink<'a> {
    pub server: &'a mut Server,
}

impl RequestSink for ServerSink<'_> {
    fn submit(&mut self, vtime: u64, line: &str) -> io::Result<()> {
        self.server.advance_to(vtime);
        self.server
            .ingest_line(line)
            .map(|_| ())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

/// Client-side TCP sink: writes request lines to a connected server.
pub struct TcpSink {
    writer: io::BufWriter<TcpStream>,
}

impl TcpSink {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<TcpSink> {
        Ok(TcpSink {
            writer: io::BufWriter::new(TcpStream::connect(addr)?),
        })
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

impl RequestSink for TcpSink {
    fn submit(&mut self, _vtime: u64, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")
    }
}

impl Drop for TcpSink {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

/// Accept connections until `shutdown` is set, reading request lines from
/// each client on its own thread and ingesting them into the shared
/// server. Returns once all connection threads have finished.
pub fn serve(
    listener: TcpListener,
    server: Arc<Mutex<Server>>,
    shutdown: Arc<AtomicBool>,
) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut connections = Vec::new();
    while !shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                let server = Arc::clone(&server);
                connections.push(std::thread::spawn(move || handle_connection(stream, server)));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e),
        }
    }
    for connection in connections {
        let _ = connection.join();
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, server: Arc<Mutex<Server>>) {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) | Err(_) => return,
            Ok(_) => {
                if line.trim().is_empty() {
                    continue;
                }
                // Malformed requests are already counted by the server;
                // a connection is never killed over one bad line.
                let _ = server.lock().expect("server lock").ingest_line(&line);
            }
        }
    }
}
