//! In-process network fault injection around a bot's sockets.
//!
//! The injector wraps the TCP stream and UDP socket a bot uses and imposes a
//! [`NetProfile`] on the traffic: one-way latency plus jitter in both
//! directions, and loss/reordering on outgoing datagrams only. The reliable
//! byte stream is never dropped or reordered, matching what a stream
//! transport guarantees. All randomness comes from a seeded generator, so a
//! given (profile, seed) pair always makes the same drop and reorder
//! decisions.

use std::collections::BinaryHeap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt, DuplexStream};
use tokio::net::{TcpStream, UdpSocket};
use tokio::sync::mpsc;
use tokio::time::{sleep_until, Duration, Instant};

/// One-way latency model, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed(f64),
    Uniform { min: f64, max: f64 },
}

impl LatencyModel {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            LatencyModel::Fixed(ms) => *ms,
            LatencyModel::Uniform { min, max } => {
                if max > min {
                    rng.random_range(*min..*max)
                } else {
                    *min
                }
            }
        }
    }
}

/// Network conditions applied to a bot's traffic. Latency and jitter apply
/// to each direction of both channels; `datagram_loss` and `reorder` apply
/// to outgoing datagrams only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetProfile {
    pub latency_ms: LatencyModel,
    #[serde(default)]
    pub jitter_ms: f64,
    #[serde(default)]
    pub datagram_loss: f64,
    #[serde(default)]
    pub reorder: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("latency range inverted: min {min} > max {max}")]
    InvertedRange { min: f64, max: f64 },
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("negative {name}: {value}")]
    Negative { name: &'static str, value: f64 },
}

impl NetProfile {
    /// No latency, no loss: traffic passes through untouched.
    pub fn identity() -> NetProfile {
        NetProfile {
            latency_ms: LatencyModel::Fixed(0.0),
            jitter_ms: 0.0,
            datagram_loss: 0.0,
            reorder: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if let LatencyModel::Uniform { min, max } = self.latency_ms {
            if min > max {
                return Err(ProfileError::InvertedRange { min, max });
            }
            if min < 0.0 {
                return Err(ProfileError::Negative { name: "latency_ms.min", value: min });
            }
        }
        if let LatencyModel::Fixed(ms) = self.latency_ms {
            if ms < 0.0 {
                return Err(ProfileError::Negative { name: "latency_ms", value: ms });
            }
        }
        if self.jitter_ms < 0.0 {
            return Err(ProfileError::Negative { name: "jitter_ms", value: self.jitter_ms });
        }
        for (name, value) in [("datagram_loss", self.datagram_loss), ("reorder", self.reorder)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::NotAProbability { name, value });
            }
        }
        Ok(())
    }
}

/// Extra delay given to a datagram selected for reordering, enough to let at
/// least one later datagram overtake it at typical pose rates.
const REORDER_BUMP_MS: f64 = 40.0;

/// Active fault injector: hands out shaped wrappers around sockets.
pub struct FaultInjector {
    profile: NetProfile,
    rng: Arc<Mutex<ChaCha8Rng>>,
}

impl FaultInjector {
    pub fn new(profile: NetProfile, seed: u64) -> Result<FaultInjector, ProfileError> {
        profile.validate()?;
        Ok(FaultInjector { profile, rng: Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(seed))) })
    }

    pub fn profile(&self) -> &NetProfile {
        &self.profile
    }

    fn delay(&self) -> Duration {
        let mut rng = self.rng.lock().expect("rng lock");
        let mut ms = self.profile.latency_ms.sample(&mut rng);
        if self.profile.jitter_ms > 0.0 {
            ms += rng.random_range(0.0..self.profile.jitter_ms);
        }
        Duration::from_secs_f64((ms / 1000.0).max(0.0))
    }

    fn egress_verdict(&self) -> DatagramVerdict {
        let mut rng = self.rng.lock().expect("rng lock");
        if self.profile.datagram_loss > 0.0 && rng.random_bool(self.profile.datagram_loss) {
            return DatagramVerdict::Drop;
        }
        if self.profile.reorder > 0.0 && rng.random_bool(self.profile.reorder) {
            return DatagramVerdict::Reorder;
        }
        DatagramVerdict::Deliver
    }

    /// Wrap a TCP stream. Both directions are delayed chunk-by-chunk with
    /// FIFO order preserved; nothing is ever dropped.
    pub fn wrap_stream(self: &Arc<Self>, stream: TcpStream) -> DuplexStream {
        let (client_side, shim) = tokio::io::duplex(256 * 1024);
        let (read_half, write_half) = stream.into_split();
        let (shim_read, shim_write) = tokio::io::split(shim);
        tokio::spawn(pump_stream(self.clone(), shim_read, write_half));
        tokio::spawn(pump_stream(self.clone(), read_half, shim_write));
        client_side
    }

    /// Wrap a UDP socket talking to a fixed peer.
    pub fn wrap_udp(self: &Arc<Self>, socket: UdpSocket, peer: SocketAddr) -> ShapedUdp {
        let socket = Arc::new(socket);
        let (egress_tx, egress_rx) = mpsc::unbounded_channel::<Vec<u8>>();
        let (ingress_tx, ingress_rx) = mpsc::unbounded_channel::<Vec<u8>>();
        tokio::spawn(pump_udp_egress(self.clone(), egress_rx, socket.clone(), peer));
        tokio::spawn(pump_udp_ingress(self.clone(), socket, ingress_tx));
        ShapedUdp { egress: egress_tx, ingress: Mutex::new(ingress_rx) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DatagramVerdict {
    Deliver,
    Reorder,
    Drop,
}

/// UDP socket facade with the profile applied; send never blocks, receive
/// yields datagrams after their ingress delay.
pub struct ShapedUdp {
    egress: mpsc::UnboundedSender<Vec<u8>>,
    ingress: Mutex<mpsc::UnboundedReceiver<Vec<u8>>>,
}

impl ShapedUdp {
    pub fn send(&self, datagram: Vec<u8>) {
        let _ = self.egress.send(datagram);
    }

    pub async fn recv(&self) -> Option<Vec<u8>> {
        self.ingress.lock().expect("ingress lock").recv().await
    }

    /// Non-blocking receive of everything currently deliverable.
    pub fn drain(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut rx = self.ingress.lock().expect("ingress lock");
        while let Ok(d) = rx.try_recv() {
            out.push(d);
        }
        out
    }
}

async fn pump_stream<R, W>(injector: Arc<FaultInjector>, mut from: R, mut to: W)
where
    R: tokio::io::AsyncRead + Unpin,
    W: tokio::io::AsyncWrite + Unpin,
{
    // Eager reads with per-chunk delivery deadlines: FIFO order enforced by
    // carrying the previous deadline forward, and sustained throughput
    // preserved because reading never waits for writing.
    let mut queue: std::collections::VecDeque<(Instant, Vec<u8>)> = Default::default();
    let mut buf = vec![0u8; 64 * 1024];
    let mut last_deadline = Instant::now();
    let mut eof = false;
    loop {
        let next_due = queue.front().map(|(due, _)| *due);
        tokio::select! {
            read = from.read(&mut buf), if !eof => {
                match read {
                    Ok(0) | Err(_) => eof = true,
                    Ok(n) => {
                        let due = (Instant::now() + injector.delay()).max(last_deadline);
                        last_deadline = due;
                        queue.push_back((due, buf[..n].to_vec()));
                    }
                }
            }
            _ = sleep_until(next_due.unwrap_or_else(Instant::now)), if next_due.is_some() => {
                let (_, chunk) = queue.pop_front().expect("queue non-empty");
                if to.write_all(&chunk).await.is_err() {
                    return;
                }
                let _ = to.flush().await;
            }
            else => break,
        }
        if eof && queue.is_empty() {
            break;
        }
    }
    let _ = to.shutdown().await;
}

struct Scheduled {
    due: Instant,
    seq: u64,
    datagram: Vec<u8>,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.seq == other.seq
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert for earliest-deadline-first.
        other.due.cmp(&self.due).then(other.seq.cmp(&self.seq))
    }
}

async fn pump_udp_egress(
    injector: Arc<FaultInjector>,
    mut rx: mpsc::UnboundedReceiver<Vec<u8>>,
    socket: Arc<UdpSocket>,
    peer: SocketAddr,
) {
    let mut heap: BinaryHeap<Scheduled> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut closed = false;
    loop {
        let next_due = heap.peek().map(|s| s.due);
        tokio::select! {
            item = rx.recv(), if !closed => {
                match item {
                    None => closed = true,
                    Some(datagram) => {
                        match injector.egress_verdict() {
                            DatagramVerdict::Drop => {}
                            verdict => {
                                let mut due = Instant::now() + injector.delay();
                                if verdict == DatagramVerdict::Reorder {
                                    due += Duration::from_secs_f64(REORDER_BUMP_MS / 1000.0);
                                }
                                heap.push(Scheduled { due, seq, datagram });
                                seq += 1;
                            }
                        }
                    }
                }
            }
            _ = sleep_until(next_due.unwrap_or_else(Instant::now)), if next_due.is_some() => {
                let item = heap.pop().expect("heap non-empty");
                let _ = socket.send_to(&item.datagram, peer).await;
            }
            else => break,
        }
        if closed && heap.is_empty() {
            break;
        }
    }
}

async fn pump_udp_ingress(
    injector: Arc<FaultInjector>,
    socket: Arc<UdpSocket>,
    tx: mpsc::UnboundedSender<Vec<u8>>,
) {
    let mut heap: BinaryHeap<Scheduled> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut buf = vec![0u8; 2048];
    loop {
        let next_due = heap.peek().map(|s| s.due);
        tokio::select! {
            recv = socket.recv_from(&mut buf) => {
                match recv {
                    Err(_) => return,
                    Ok((n, _)) => {
                        // Ingress: delay only; loss and reordering are egress
                        // concerns so each hop applies them once.
                        let due = Instant::now() + injector.delay();
                        heap.push(Scheduled { due, seq, datagram: buf[..n].to_vec() });
                        seq += 1;
                    }
                }
            }
            _ = sleep_until(next_due.unwrap_or_else(Instant::now)), if next_due.is_some() => {
                let item = heap.pop().expect("heap non-empty");
                if tx.send(item.datagram).is_err() {
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_profile_validates() {
        NetProfile::identity().validate().unwrap();
        assert!(NetProfile::identity().is_identity());
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut p = NetProfile::identity();
        p.datagram_loss = 1.5;
        assert!(matches!(p.validate(), Err(ProfileError::NotAProbability { .. })));

        let p = NetProfile {
            latency_ms: LatencyModel::Uniform { min: 50.0, max: 10.0 },
            jitter_ms: 0.0,
            datagram_loss: 0.0,
            reorder: 0.0,
        };
        assert!(matches!(p.validate(), Err(ProfileError::InvertedRange { .. })));
    }

    #[test]
    fn profile_json_round_trip() {
        let p = NetProfile {
            latency_ms: LatencyModel::Uniform { min: 10.0, max: 87.0 },
            jitter_ms: 2.0,
            datagram_loss: 0.2,
            reorder: 0.05,
        };
        let json = serde_json::to_string(&p).unwrap();
        let back: NetProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn drop_decisions_are_seed_deterministic() {
        let profile = NetProfile {
            latency_ms: LatencyModel::Fixed(0.0),
            jitter_ms: 0.0,
            datagram_loss: 0.3,
            reorder: 0.0,
        };
        let verdicts = |seed: u64| -> Vec<DatagramVerdict> {
            let inj = FaultInjector::new(profile, seed).unwrap();
            (0..64).map(|_| inj.egress_verdict()).collect()
        };
        assert_eq!(verdicts(9), verdicts(9));
        assert_ne!(verdicts(9), verdicts(10));
    }
}
