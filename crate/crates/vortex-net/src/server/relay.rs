//! Latest-wins pose relay. Runs beside the session loop: datagrams from
//! admitted clients are forwarded to every other client immediately, and the
//! server retains only the highest sequence number per sender. The session
//! loop registers clients; everything else is lock-light reads.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::net::UdpSocket;

use crate::protocol::{decode_pose, PoseError};

#[derive(Debug, Default)]
struct Counters {
    received: AtomicU64,
    forwarded: AtomicU64,
    stale_dropped: AtomicU64,
    malformed: AtomicU64,
    unadmitted: AtomicU64,
    version_dropped: AtomicU64,
}

/// Relay counters at one point in time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseRelayStats {
    pub received: u64,
    /// Fresh datagrams accepted and fanned out.
    pub forwarded: u64,
    pub stale_dropped: u64,
    pub malformed: u64,
    pub unadmitted: u64,
    pub version_dropped: u64,
}

struct PeerSlot {
    /// Retained seq + 1; zero means nothing retained yet.
    latest: AtomicU64,
    addr: RwLock<Option<SocketAddr>>,
}

pub(crate) struct Relay {
    socket: Arc<UdpSocket>,
    slots: RwLock<HashMap<u32, Arc<PeerSlot>>>,
    counters: Counters,
}

impl Relay {
    pub fn new(socket: Arc<UdpSocket>) -> Arc<Relay> {
        Arc::new(Relay { socket, slots: RwLock::new(HashMap::new()), counters: Counters::default() })
    }

    /// Admit a client id; its first datagram registers the source address.
    pub fn register(&self, client_id: u32) {
        self.slots.write().expect("slots lock").insert(
            client_id,
            Arc::new(PeerSlot { latest: AtomicU64::new(0), addr: RwLock::new(None) }),
        );
    }

    pub fn stats(&self) -> PoseRelayStats {
        PoseRelayStats {
            received: self.counters.received.load(Ordering::Relaxed),
            forwarded: self.counters.forwarded.load(Ordering::Relaxed),
            stale_dropped: self.counters.stale_dropped.load(Ordering::Relaxed),
            malformed: self.counters.malformed.load(Ordering::Relaxed),
            unadmitted: self.counters.unadmitted.load(Ordering::Relaxed),
            version_dropped: self.counters.version_dropped.load(Ordering::Relaxed),
        }
    }

    /// Retained (latest) seq for a client, if any datagram was accepted.
    pub fn retained_seq(&self, client_id: u32) -> Option<u32> {
        let slots = self.slots.read().expect("slots lock");
        let stored = slots.get(&client_id)?.latest.load(Ordering::Relaxed);
        (stored > 0).then(|| (stored - 1) as u32)
    }

    pub async fn handle_datagram(&self, buf: &[u8], src: SocketAddr) {
        self.counters.received.fetch_add(1, Ordering::Relaxed);
        let pose = match decode_pose(buf) {
            Ok(p) => p,
            Err(PoseError::UnsupportedVersion(_)) => {
                self.counters.version_dropped.fetch_add(1, Ordering::Relaxed);
                return;
            }
            Err(_) => {
                self.counters.malformed.fetch_add(1, Ordering::Relaxed);
                return;
            }
        };

        let (slot, peers) = {
            let slots = self.slots.read().expect("slots lock");
            let Some(slot) = slots.get(&pose.client_id).cloned() else {
                drop(slots);
                self.counters.unadmitted.fetch_add(1, Ordering::Relaxed);
                return;
            };
            let peers: Vec<Arc<PeerSlot>> = slots
                .iter()
                .filter(|(id, _)| **id != pose.client_id)
                .map(|(_, s)| s.clone())
                .collect();
            (slot, peers)
        };

        {
            let mut addr = slot.addr.write().expect("addr lock");
            if *addr != Some(src) {
                *addr = Some(src);
            }
        }

        // Latest-wins: accept only strictly newer sequence numbers.
        let candidate = pose.seq as u64 + 1;
        let mut current = slot.latest.load(Ordering::Relaxed);
        loop {
            if candidate <= current {
                self.counters.stale_dropped.fetch_add(1, Ordering::Relaxed);
                return;
            }
            match slot.latest.compare_exchange_weak(
                current,
                candidate,
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => break,
                Err(seen) => current = seen,
            }
        }

        self.counters.forwarded.fetch_add(1, Ordering::Relaxed);
        for peer in peers {
            let addr = *peer.addr.read().expect("addr lock");
            if let Some(addr) = addr {
                let _ = self.socket.send_to(buf, addr).await;
            }
        }
    }
}

/// Receive loop; runs until the socket is closed or the task is aborted.
pub(crate) async fn run_relay(relay: Arc<Relay>) {
    let mut buf = vec![0u8; 2048];
    loop {
        match relay.socket.recv_from(&mut buf).await {
            Ok((n, src)) => relay.handle_datagram(&buf[..n], src).await,
            Err(_) => return,
        }
    }
}
