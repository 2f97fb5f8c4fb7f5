use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use compshare_core::model::UserId;
use compshare_protocol::relay::{Action, ConnId, Relay};
use compshare_protocol::frame;
use futures::StreamExt;
use tokio::io::AsyncWriteExt;
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::{mpsc, Notify};
use tokio::task::JoinHandle;
use tokio_util::codec::FramedRead;

use crate::EnvelopeCodec;

enum Out {
    Frame(Vec<u8>),
    Close,
}

struct Conn {
    tx: mpsc::UnboundedSender<Out>,
    stop: Arc<Notify>,
}

struct Shared {
    relay: Relay,
    conns: HashMap<ConnId, Conn>,
}

impl Shared {
    fn dispatch(&mut self, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Send(c, e) => {
                    let Some(conn) = self.conns.get(&c) else {
                        continue;
                    };
                    match frame(&e) {
                        Ok(bytes) => {
                            let _ = conn.tx.send(Out::Frame(bytes));
                        }
                        Err(err) => tracing::warn!("dropping {} for conn {c}: {err}", e.kind),
                    }
                }
                Action::Close(c) => {
                    if let Some(conn) = self.conns.remove(&c) {
                        let _ = conn.tx.send(Out::Close);
                        conn.stop.notify_one();
                        let more = self.relay.close(c);
                        self.dispatch(more);
                    }
                }
            }
        }
    }
}

/// A running relay accepting TCP connections.
pub struct RelayServer {
    addr: SocketAddr,
    shared: Arc<Mutex<Shared>>,
    task: JoinHandle<()>,
}

impl RelayServer {
    /// Binds `addr` and starts accepting connections in the background.
    pub async fn bind(addr: impl ToSocketAddrs, relay: Relay) -> io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Mutex::new(Shared { relay, conns: HashMap::new() }));
        let task = tokio::spawn(accept_loop(listener, shared.clone()));
        Ok(Self { addr, shared, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn online_users(&self) -> Vec<UserId> {
        self.shared.lock().expect("relay lock").relay.online_users().cloned().collect()
    }

    /// Stops accepting and drops every connection.
    pub fn shutdown(self) {
        self.task.abort();
        let mut s = self.shared.lock().expect("relay lock");
        let ids: Vec<ConnId> = s.conns.keys().copied().collect();
        s.dispatch(ids.into_iter().map(Action::Close).collect());
    }

    /// Runs until the task is aborted or the listener fails.
    pub async fn run(self) {
        let _ = self.task.await;
    }
}

async fn accept_loop(listener: TcpListener, shared: Arc<Mutex<Shared>>) {
    let mut next: ConnId = 1;
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tracing::debug!("conn {next} from {peer}");
                let _ = stream.set_nodelay(true);
                tokio::spawn(connection(shared.clone(), stream, next));
                next += 1;
            }
            Err(e) => tracing::warn!("accept failed: {e}"),
        }
    }
}

async fn connection(shared: Arc<Mutex<Shared>>, stream: TcpStream, id: ConnId) {
    let (rd, wr) = stream.into_split();
    let (tx, rx) = mpsc::unbounded_channel();
    let stop = Arc::new(Notify::new());
    {
        let mut s = shared.lock().expect("relay lock");
        s.conns.insert(id, Conn { tx, stop: stop.clone() });
        s.relay.open(id);
    }
    let writer = tokio::spawn(write_loop(wr, rx));
    let mut frames = FramedRead::new(rd, EnvelopeCodec);
    loop {
        let next = tokio::select! {
            f = frames.next() => f,
            _ = stop.notified() => break,
        };
        let mut s = shared.lock().expect("relay lock");
        match next {
            Some(Ok(e)) => {
                let actions = s.relay.receive(id, e);
                s.dispatch(actions);
            }
            Some(Err(err)) => {
                let mut actions = s.relay.malformed(id, &err.to_string());
                actions.push(Action::Close(id));
                s.dispatch(actions);
                break;
            }
            None => break,
        }
    }
    {
        let mut s = shared.lock().expect("relay lock");
        if s.conns.remove(&id).is_some() {
            let actions = s.relay.close(id);
            s.dispatch(actions);
        }
    }
    let _ = writer.await;
}

async fn write_loop(mut wr: OwnedWriteHalf, mut rx: mpsc::UnboundedReceiver<Out>) {
    while let Some(out) = rx.recv().await {
        match out {
            Out::Frame(bytes) => {
                if wr.write_all(&bytes).await.is_err() {
                    break;
                }
            }
            Out::Close => break,
        }
    }
    let _ = wr.shutdown().await;
}
