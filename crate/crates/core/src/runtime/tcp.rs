//! Loopback TCP transport.
//!
//! Party `i` listens on `base_port + i` (or an OS-assigned port when no
//! base is given) and every ordered pair of parties gets its own
//! connection. Frames are a 4-byte big-endian length followed by one JSON
//! record. After the round's messages each party sends a barrier frame on
//! every outgoing link; a party's round is complete once it has seen the
//! barrier from all `N - 1` peers.
//!
//! Links are plaintext. The security model assumes private channels.

use std::io::{BufWriter, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_route, Message, Transport, TransportError, TransportKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Frame {
    Hello { party: usize },
    Message(Message),
    Barrier { round: u64 },
}

fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), TransportError> {
    let body = serde_json::to_vec(frame).map_err(|e| TransportError::Frame(e.to_string()))?;
    let len = u32::try_from(body.len()).map_err(|_| TransportError::Frame("frame too large".into()))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    Ok(())
}

fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, TransportError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| TransportError::Frame(e.to_string()))
}

enum Event {
    Frame(usize, Frame),
    Closed(usize),
}

pub struct TcpTransport {
    n: usize,
    ports: Vec<u16>,
    // links[from - 1][to - 1]
    links: Vec<Vec<Option<BufWriter<TcpStream>>>>,
    inboxes: Vec<Receiver<Event>>,
    readers: Vec<JoinHandle<()>>,
    timeout: Duration,
}

impl TcpTransport {
    /// Binds `n` listeners on localhost and connects every ordered pair.
    /// `base_port = None` lets the OS pick free ports.
    pub fn connect(n: usize, base_port: Option<u16>) -> Result<Self, TransportError> {
        let listeners: Vec<TcpListener> = (1..=n)
            .map(|i| {
                let port = base_port.map_or(0, |b| b + i as u16);
                TcpListener::bind(("127.0.0.1", port))
            })
            .collect::<Result<_, _>>()?;
        let ports = listeners
            .iter()
            .map(|l| l.local_addr().map(|a| a.port()))
            .collect::<Result<Vec<_>, _>>()?;

        let mut inboxes = Vec::with_capacity(n);
        let mut acceptors = Vec::with_capacity(n);
        for listener in listeners {
            let (tx, rx) = channel();
            inboxes.push(rx);
            acceptors.push(std::thread::spawn(move || accept_peers(listener, n - 1, tx)));
        }

        let mut links: Vec<Vec<Option<BufWriter<TcpStream>>>> = Vec::with_capacity(n);
        for from in 1..=n {
            let mut row = Vec::with_capacity(n);
            for to in 1..=n {
                if from == to {
                    row.push(None);
                    continue;
                }
                let stream = TcpStream::connect(("127.0.0.1", ports[to - 1]))?;
                stream.set_nodelay(true)?;
                let mut w = BufWriter::new(stream);
                write_frame(&mut w, &Frame::Hello { party: from })?;
                w.flush()?;
                row.push(Some(w));
            }
            links.push(row);
        }

        let mut readers = Vec::new();
        for a in acceptors {
            readers.extend(
                a.join()
                    .map_err(|_| TransportError::Frame("acceptor panicked".into()))??,
            );
        }
        Ok(Self {
            n,
            ports,
            links,
            inboxes,
            readers,
            timeout: Duration::from_secs(30),
        })
    }

    pub fn ports(&self) -> &[u16] {
        &self.ports
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }
}

fn accept_peers(listener: TcpListener, peers: usize, tx: Sender<Event>) -> Result<Vec<JoinHandle<()>>, TransportError> {
    let mut handles = Vec::with_capacity(peers);
    for _ in 0..peers {
        let (mut stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        let from = match read_frame(&mut stream)? {
            Some(Frame::Hello { party }) => party,
            _ => return Err(TransportError::Frame("expected hello".into())),
        };
        let tx = tx.clone();
        handles.push(std::thread::spawn(move || {
            let mut reader = std::io::BufReader::new(stream);
            loop {
                match read_frame(&mut reader) {
                    Ok(Some(frame)) => {
                        if tx.send(Event::Frame(from, frame)).is_err() {
                            return;
                        }
                    }
                    _ => {
                        let _ = tx.send(Event::Closed(from));
                        return;
                    }
                }
            }
        }));
    }
    Ok(handles)
}

impl Transport for TcpTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::Tcp
    }

    fn parties(&self) -> usize {
        self.n
    }

    fn deliver(&mut self, round: u64, outgoing: Vec<Message>) -> Result<Vec<Vec<Message>>, TransportError> {
        for m in &outgoing {
            check_route(self.n, m)?;
        }
        for m in outgoing {
            let link = self.links[m.from - 1][m.to - 1].as_mut().expect("distinct parties");
            write_frame(link, &Frame::Message(m))?;
        }
        for row in &mut self.links {
            for link in row.iter_mut().flatten() {
                write_frame(link, &Frame::Barrier { round })?;
                link.flush()?;
            }
        }

        let mut inboxes = Vec::with_capacity(self.n);
        for (i, rx) in self.inboxes.iter().enumerate() {
            let party = i + 1;
            let mut barriers = 0;
            let mut inbox = Vec::new();
            while barriers < self.n - 1 {
                match rx.recv_timeout(self.timeout) {
                    Ok(Event::Frame(_, Frame::Barrier { round: r })) if r == round => barriers += 1,
                    Ok(Event::Frame(from, Frame::Message(m))) => {
                        if m.from != from || m.to != party || m.round != round {
                            return Err(TransportError::Frame(format!(
                                "party {party} got misrouted message {}->{} (round {})",
                                m.from, m.to, m.round
                            )));
                        }
                        inbox.push(m);
                    }
                    Ok(Event::Frame(_, other)) => {
                        return Err(TransportError::Frame(format!("unexpected frame {other:?}")));
                    }
                    Ok(Event::Closed(from)) => return Err(TransportError::Disconnected(from)),
                    Err(RecvTimeoutError::Timeout) => return Err(TransportError::Timeout { round, party }),
                    Err(RecvTimeoutError::Disconnected) => return Err(TransportError::Disconnected(party)),
                }
            }
            // stable sort keeps per-link order
            inbox.sort_by_key(|m| m.from);
            inboxes.push(inbox);
        }
        Ok(inboxes)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for row in &mut self.links {
            for link in row.iter_mut().flatten() {
                let _ = link.flush();
                let _ = link.get_ref().shutdown(Shutdown::Both);
            }
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}
