use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::mpsc;
use tracing::{debug, info, warn};
use vortex_core::{Role, SessionClock, SessionRoster};
use vortex_sim::{DrugTable, EventActor, Intervention, PatientEngine, ScenarioScript, SimEventKind};

use crate::archive::{
    write_archive, ClientStream, LoggedEvent, RttStats, SessionArchive, StreamAction, StreamGaze,
    StreamUtterance, VersionedEvent,
};
use crate::protocol::{
    encode_frame, AuthoritativeState, FrameDecoder, InterventionAction, JoinAckPayload, MessageBody,
    RejectCode, ReliableEnvelope, SeqCheck, SeqTracker, SessionEndPayload, SessionEvent,
    StateSnapshotPayload, TimeSyncRespPayload, TranscriptUploadPayload,
};

use super::relay::{run_relay, PoseRelayStats, Relay};
use super::wall_us;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub scenario: ScenarioScript,
    pub drug_table: DrugTable,
    pub bind_reliable: std::net::SocketAddr,
    pub bind_pose: std::net::SocketAddr,
    pub duration_s: f64,
    /// Display tick rate; must stay at or above the VR continuity floor of 24.
    pub tick_hz: u32,
    pub max_clients: usize,
    pub archive_dir: PathBuf,
    pub session_id: u64,
    pub upload_timeout: Duration,
    pub rtt_probe_interval: Duration,
}

impl ServerConfig {
    pub fn new(scenario: ScenarioScript, archive_dir: PathBuf) -> ServerConfig {
        ServerConfig {
            scenario,
            drug_table: DrugTable::builtin(),
            bind_reliable: ([127, 0, 0, 1], 0).into(),
            bind_pose: ([127, 0, 0, 1], 0).into(),
            duration_s: 600.0,
            tick_hz: 60,
            max_clients: 3,
            archive_dir,
            session_id: 1,
            upload_timeout: Duration::from_secs(5),
            rtt_probe_interval: Duration::from_secs(1),
        }
    }

    fn validate(&self) -> Result<(), ServerError> {
        if self.tick_hz < 24 {
            return Err(ServerError::Config(format!(
                "tick_hz {} below the 24 Hz continuity floor",
                self.tick_hz
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(ServerError::Config("duration must be positive".into()));
        }
        if self.max_clients > Role::ALL.len() {
            return Err(ServerError::Config(format!(
                "max_clients {} exceeds the {} available roles",
                self.max_clients,
                Role::ALL.len()
            )));
        }
        self.scenario
            .validate(self.duration_s)
            .map_err(|e| ServerError::Config(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid server config: {0}")]
    Config(String),
    #[error("bind failed: {0}")]
    Bind(std::io::Error),
    #[error("archive write failed: {0}")]
    Archive(#[from] crate::archive::ArchiveError),
    #[error("session task failed: {0}")]
    Task(String),
}

/// What the server learned over one session.
#[derive(Debug, Clone)]
pub struct SessionSummary {
    pub archive_dir: PathBuf,
    pub final_version: u64,
    pub ticks: u64,
    pub tick_period: Duration,
    /// 99th percentile of |inter-tick delta - period|.
    pub tick_jitter_p99: Duration,
    pub rtt_stats: BTreeMap<Role, RttStats>,
    pub pose_stats: PoseRelayStats,
    pub incomplete: Vec<Role>,
}

pub struct ServerHandle {
    pub local_reliable: std::net::SocketAddr,
    pub local_pose: std::net::SocketAddr,
    task: tokio::task::JoinHandle<Result<SessionSummary, ServerError>>,
}

impl ServerHandle {
    /// Wait for the session to end and the archive to be written.
    pub async fn finished(self) -> Result<SessionSummary, ServerError> {
        self.task.await.map_err(|e| ServerError::Task(e.to_string()))?
    }
}

/// Bind both sockets and start the session. The session begins its clock
/// immediately and ends after `duration_s` or an explicit SessionEnd.
pub async fn spawn_session(cfg: ServerConfig) -> Result<ServerHandle, ServerError> {
    cfg.validate()?;
    let listener = TcpListener::bind(cfg.bind_reliable).await.map_err(ServerError::Bind)?;
    let udp = UdpSocket::bind(cfg.bind_pose).await.map_err(ServerError::Bind)?;
    let local_reliable = listener.local_addr().map_err(ServerError::Bind)?;
    let local_pose = udp.local_addr().map_err(ServerError::Bind)?;
    info!(%local_reliable, %local_pose, session_id = cfg.session_id, "session listening");

    let relay = Relay::new(Arc::new(udp));
    let task = tokio::spawn(run_session(cfg, listener, relay, local_pose.port()));
    Ok(ServerHandle { local_reliable, local_pose, task })
}

type ConnId = u64;

enum Msg {
    Accepted { conn_id: ConnId, writer: mpsc::UnboundedSender<Vec<u8>> },
    Frame { conn_id: ConnId, env: ReliableEnvelope, recv_us: i64 },
    Disconnected { conn_id: ConnId },
    Tick { at: Instant },
    Probe,
    UploadTimeout,
}

struct Conn {
    writer: mpsc::UnboundedSender<Vec<u8>>,
    out_seq: u64,
    client_id: Option<u32>,
}

struct Client {
    conn_id: ConnId,
    role: Role,
    rtt_samples_us: Vec<i64>,
    upload: Option<TranscriptUploadPayload>,
    connected: bool,
}

struct Session {
    cfg: ServerConfig,
    engine: PatientEngine,
    roster: SessionRoster,
    version: u64,
    clock: SessionClock,
    start: Instant,
    pose_port: u16,
    conns: HashMap<ConnId, Conn>,
    clients: HashMap<u32, Client>,
    next_client_id: u32,
    event_seqs: SeqTracker,
    event_log: Vec<VersionedEvent>,
    tick_instants: Vec<Instant>,
    relay: Arc<Relay>,
    ticker_stop: Arc<AtomicBool>,
    loop_tx: mpsc::UnboundedSender<Msg>,
    ending: bool,
    finalized: bool,
}

async fn run_session(
    cfg: ServerConfig,
    listener: TcpListener,
    relay: Arc<Relay>,
    pose_port: u16,
) -> Result<SessionSummary, ServerError> {
    let engine = PatientEngine::new(&cfg.scenario, cfg.duration_s)
        .map_err(|e| ServerError::Config(e.to_string()))?;
    let clock = SessionClock::new(wall_us(), cfg.duration_s)
        .map_err(|e| ServerError::Config(e.to_string()))?;

    let (tx, mut rx) = mpsc::unbounded_channel::<Msg>();

    let accept_task = tokio::spawn(accept_loop(listener, tx.clone()));
    let relay_task = tokio::spawn(run_relay(relay.clone()));
    let probe_task = tokio::spawn(probe_timer(cfg.rtt_probe_interval, tx.clone()));

    let ticker_stop = Arc::new(AtomicBool::new(false));
    let period = Duration::from_secs_f64(1.0 / cfg.tick_hz as f64);
    let ticker = spawn_ticker(period, ticker_stop.clone(), tx.clone());

    let mut session = Session {
        engine,
        roster: SessionRoster::new(),
        version: 0,
        clock,
        start: Instant::now(),
        pose_port,
        conns: HashMap::new(),
        clients: HashMap::new(),
        next_client_id: 1,
        event_seqs: SeqTracker::new(),
        event_log: Vec::new(),
        tick_instants: Vec::with_capacity((cfg.duration_s * cfg.tick_hz as f64) as usize + 64),
        relay,
        ending: false,
        finalized: false,
        cfg,
    };

    let end_tx = tx.clone();
    let mut summary = None;
    while let Some(msg) = rx.recv().await {
        match msg {
            Msg::Accepted { conn_id, writer } => {
                session.conns.insert(conn_id, Conn { writer, out_seq: 0, client_id: None });
            }
            Msg::Frame { conn_id, env, recv_us } => {
                session.handle_frame(conn_id, env, recv_us);
            }
            Msg::Disconnected { conn_id } => {
                if let Some(conn) = session.conns.remove(&conn_id) {
                    if let Some(id) = conn.client_id {
                        if let Some(client) = session.clients.get_mut(&id) {
                            client.connected = false;
                            warn!(client_id = id, role = %client.role, "client disconnected");
                        }
                    }
                }
            }
            Msg::Tick { at } => {
                if !session.ending {
                    session.tick_instants.push(Instant::now());
                    session.on_tick();
                    let elapsed = at.duration_since(session.start).as_secs_f64();
                    if elapsed >= session.cfg.duration_s {
                        session.begin_end(&ticker_stop, &end_tx);
                    }
                }
            }
            Msg::Probe => {
                if !session.ending {
                    session.send_probes();
                }
            }
            Msg::UploadTimeout => {
                if session.ending && !session.finalized {
                    summary = Some(session.finalize()?);
                    break;
                }
            }
        }
        if session.ending && !session.finalized && session.all_uploads_in() {
            summary = Some(session.finalize()?);
            break;
        }
    }

    ticker_stop.store(true, Ordering::Relaxed);
    accept_task.abort();
    relay_task.abort();
    probe_task.abort();
    let _ = ticker.join();

    summary.ok_or_else(|| ServerError::Task("session loop ended without a summary".into()))
}

impl Session {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64().min(self.cfg.duration_s)
    }

    fn state(&self) -> AuthoritativeState {
        let t = self.engine.time();
        AuthoritativeState {
            version: self.version,
            vitals: self.engine.vitals_at(t).expect("engine state is finite"),
            active_events: self.engine.active_events(),
            roster: self.roster.clone(),
        }
    }

    fn send_to_conn(&mut self, conn_id: ConnId, body: MessageBody) {
        let session_id = self.cfg.session_id;
        if let Some(conn) = self.conns.get_mut(&conn_id) {
            conn.out_seq += 1;
            let env = ReliableEnvelope { session_id, seq: conn.out_seq, body };
            match encode_frame(&env) {
                Ok(bytes) => {
                    let _ = conn.writer.send(bytes);
                }
                Err(e) => warn!("frame encode failed: {e}"),
            }
        }
    }

    fn broadcast(&mut self, body: MessageBody) {
        let targets: Vec<ConnId> = self
            .clients
            .values()
            .filter(|c| c.connected)
            .map(|c| c.conn_id)
            .collect();
        for conn_id in targets {
            self.send_to_conn(conn_id, body.clone());
        }
    }

    fn broadcast_except(&mut self, skip: ConnId, body: MessageBody) {
        let targets: Vec<ConnId> = self
            .clients
            .values()
            .filter(|c| c.connected && c.conn_id != skip)
            .map(|c| c.conn_id)
            .collect();
        for conn_id in targets {
            self.send_to_conn(conn_id, body.clone());
        }
    }

    fn reject(&mut self, conn_id: ConnId, ref_seq: u64, code: RejectCode, detail: impl Into<String>) {
        let detail = detail.into();
        debug!(conn_id, ?code, detail, "rejecting client message");
        self.send_to_conn(
            conn_id,
            MessageBody::Event(SessionEvent::Rejected { ref_seq, code, detail }),
        );
    }

    /// Advance the engine to the current session time, logging and
    /// broadcasting any scripted events that fire.
    fn advance_engine(&mut self) {
        let elapsed = self.elapsed();
        let fired = self.engine.advance_to(elapsed).expect("engine advance");
        for ev in fired {
            self.version += 1;
            let version = self.version;
            self.event_log.push(VersionedEvent {
                version,
                t: ev.t,
                event: LoggedEvent::Scenario { kind: ev.kind, actor: ev.actor },
            });
            info!(version, t = ev.t, kind = ?ev.kind, "scenario event fired");
            self.broadcast(MessageBody::Event(SessionEvent::Scripted { event: ev, version }));
        }
    }

    fn on_tick(&mut self) {
        self.advance_engine();
        // Display snapshot: closed-form vitals at the precise display time,
        // between sim ticks.
        let display_t = self.elapsed().min(self.engine.time() + 0.1);
        self.version += 1;
        let state = AuthoritativeState {
            version: self.version,
            vitals: self.engine.vitals_at(display_t).expect("display vitals"),
            active_events: self.engine.active_events(),
            roster: self.roster.clone(),
        };
        self.broadcast(MessageBody::StateSnapshot(StateSnapshotPayload { state }));
    }

    fn send_probes(&mut self) {
        let targets: Vec<ConnId> = self
            .clients
            .values()
            .filter(|c| c.connected)
            .map(|c| c.conn_id)
            .collect();
        for conn_id in targets {
            let t1 = wall_us();
            self.send_to_conn(
                conn_id,
                MessageBody::TimeSyncReq(crate::protocol::TimeSyncReqPayload { t1 }),
            );
        }
    }

    fn handle_frame(&mut self, conn_id: ConnId, env: ReliableEnvelope, recv_us: i64) {
        match env.body {
            MessageBody::Join(join) => self.handle_join(conn_id, &env_header(&env), join.role),
            MessageBody::Event(event) => self.handle_event(conn_id, env.seq, event),
            MessageBody::TimeSyncReq(req) => {
                self.send_to_conn(
                    conn_id,
                    MessageBody::TimeSyncResp(TimeSyncRespPayload {
                        t1: req.t1,
                        t2: recv_us,
                        t3: wall_us(),
                    }),
                );
            }
            MessageBody::TimeSyncResp(resp) => {
                // Reply to one of our probes: round trip with the client's
                // processing time removed.
                let rtt = (recv_us - resp.t1) - (resp.t3 - resp.t2);
                if let Some(client) = self
                    .conns
                    .get(&conn_id)
                    .and_then(|c| c.client_id)
                    .and_then(|id| self.clients.get_mut(&id))
                {
                    if rtt >= 0 {
                        client.rtt_samples_us.push(rtt);
                    }
                }
            }
            MessageBody::TranscriptUpload(upload) => {
                let Some(client_id) = self.conns.get(&conn_id).and_then(|c| c.client_id) else {
                    self.reject(conn_id, env.seq, RejectCode::RoleViolation, "not joined");
                    return;
                };
                if let Some(client) = self.clients.get_mut(&client_id) {
                    debug!(client_id, role = %upload.role, "stream upload received");
                    client.upload = Some(upload);
                }
            }
            MessageBody::SessionEnd(_) => {
                // Explicit end request from a client; the timer path calls
                // begin_end directly.
                if self.conns.get(&conn_id).and_then(|c| c.client_id).is_some() {
                    self.request_end();
                }
            }
            MessageBody::JoinAck(_) | MessageBody::StateSnapshot(_) => {
                self.reject(conn_id, env.seq, RejectCode::RoleViolation, "server-only message type");
            }
        }
    }

    fn handle_join(&mut self, conn_id: ConnId, header: &EnvHeader, role: Role) {
        if header.session_id != 0 && header.session_id != self.cfg.session_id {
            self.reject(
                conn_id,
                header.seq,
                RejectCode::NoSuchSession,
                format!("no session {}", header.session_id),
            );
            return;
        }
        if self.ending {
            self.reject(conn_id, header.seq, RejectCode::SessionClosed, "session is over");
            return;
        }
        if self.roster.len() >= self.cfg.max_clients {
            self.reject(conn_id, header.seq, RejectCode::SessionFull, "session is full");
            return;
        }
        if self.roster.contains_role(role) {
            self.reject(conn_id, header.seq, RejectCode::RoleTaken, format!("{role} already taken"));
            return;
        }

        let client_id = self.next_client_id;
        self.next_client_id += 1;
        self.roster.add(client_id, role).expect("checked uniqueness");
        self.version += 1;
        let version = self.version;
        self.event_log.push(VersionedEvent {
            version,
            t: self.elapsed(),
            event: LoggedEvent::ClientJoined { role, client_id },
        });
        self.clients.insert(
            client_id,
            Client {
                conn_id,
                role,
                rtt_samples_us: Vec::new(),
                upload: None,
                connected: true,
            },
        );
        if let Some(conn) = self.conns.get_mut(&conn_id) {
            conn.client_id = Some(client_id);
        }
        self.relay.register(client_id);
        info!(client_id, %role, version, "client admitted");

        let ack = JoinAckPayload {
            client_id,
            roster: self.roster.clone(),
            state: self.state(),
            pose_port: self.pose_port,
            clock: self.clock,
            scenario: self.cfg.scenario.name.as_str().to_string(),
        };
        self.send_to_conn(conn_id, MessageBody::JoinAck(ack));
        let roster = self.roster.clone();
        self.broadcast_except(
            conn_id,
            MessageBody::Event(SessionEvent::RosterUpdate { roster, version }),
        );
    }

    fn handle_event(&mut self, conn_id: ConnId, seq: u64, event: SessionEvent) {
        let SessionEvent::Intervention { action, .. } = event else {
            self.reject(conn_id, seq, RejectCode::RoleViolation, "clients send interventions only");
            return;
        };
        let Some(client_id) = self.conns.get(&conn_id).and_then(|c| c.client_id) else {
            self.reject(conn_id, seq, RejectCode::RoleViolation, "not joined");
            return;
        };
        // Reliable-channel retries resend the same seq: idempotent drop, no
        // version bump.
        if self.event_seqs.observe(client_id as u64, seq) == SeqCheck::DuplicateOrStale {
            debug!(client_id, seq, "duplicate event dropped");
            return;
        }
        let sender_role = self.clients[&client_id].role;
        let permitted = action.permitted_role();
        if sender_role != permitted {
            self.reject(
                conn_id,
                seq,
                RejectCode::RoleViolation,
                format!("{:?} is a {permitted}-only action", action),
            );
            return;
        }

        // Land the intervention at the current sim time; scripted events due
        // before it fire first.
        self.advance_engine();
        let intervention = match &action {
            InterventionAction::DrugAdmin { drug, dose } => {
                match self.cfg.drug_table.effect(drug, *dose, self.engine.time()) {
                    Ok(effect) => Intervention::Drug(effect),
                    Err(e) => {
                        self.reject(conn_id, seq, RejectCode::InvalidIntervention, e.to_string());
                        return;
                    }
                }
            }
            other => Intervention::Event {
                kind: intervention_kind(other),
                actor: EventActor::Role(sender_role),
            },
        };
        if let Err(e) = self.engine.apply_intervention(intervention) {
            self.reject(conn_id, seq, RejectCode::InvalidIntervention, e.to_string());
            return;
        }

        self.version += 1;
        let version = self.version;
        let t = self.engine.time();
        self.event_log.push(VersionedEvent {
            version,
            t,
            event: LoggedEvent::Intervention { action: action.clone(), actor: sender_role },
        });
        info!(version, t, actor = %sender_role, "intervention applied: {}", action.describe());
        self.broadcast(MessageBody::Event(SessionEvent::Intervention {
            action,
            actor: sender_role,
            version: Some(version),
            t: Some(t),
        }));
    }

    fn request_end(&mut self) {
        // Deferred: the actual transition happens on the next tick check via
        // begin_end, driven by the loop that owns the ticker stop flag.
        self.ending_requested = true;
    }

    fn begin_end(&mut self, ticker_stop: &AtomicBool, tx: &mpsc::UnboundedSender<Msg>) {
        if self.ending {
            return;
        }
        self.ending = true;
        ticker_stop.store(true, Ordering::Relaxed);
        self.advance_engine();
        self.version += 1;
        let state = AuthoritativeState {
            version: self.version,
            vitals: self.engine.vitals_at(self.engine.time()).expect("final vitals"),
            active_events: self.engine.active_events(),
            roster: self.roster.clone(),
        };
        info!(final_version = self.version, "session ending; awaiting uploads");
        self.broadcast(MessageBody::StateSnapshot(StateSnapshotPayload { state }));
        self.broadcast(MessageBody::SessionEnd(SessionEndPayload {
            final_version: Some(self.version),
        }));
        let timeout = self.cfg.upload_timeout;
        let tx = tx.clone();
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            let _ = tx.send(Msg::UploadTimeout);
        });
    }

    fn all_uploads_in(&self) -> bool {
        !self.clients.is_empty() && self.clients.values().all(|c| c.upload.is_some())
    }

    fn finalize(&mut self) -> Result<SessionSummary, ServerError> {
        self.finalized = true;
        let mut streams: BTreeMap<Role, ClientStream> = BTreeMap::new();
        let mut rtt_stats: BTreeMap<Role, RttStats> = BTreeMap::new();
        let mut incomplete = Vec::new();

        for client in self.clients.values() {
            if let Some(stats) = RttStats::from_samples_us(&client.rtt_samples_us) {
                rtt_stats.insert(client.role, stats);
            }
            match &client.upload {
                Some(upload) => {
                    let offset = upload.offset_us;
                    let convert = |t_us: i64| self.clock.to_session_seconds(t_us, offset);
                    streams.insert(
                        client.role,
                        ClientStream {
                            utterances: upload
                                .records
                                .utterances
                                .iter()
                                .map(|u| StreamUtterance {
                                    t: convert(u.t_us),
                                    text: u.text.clone(),
                                    asr_confidence: u.asr_confidence,
                                })
                                .collect(),
                            actions: upload
                                .records
                                .actions
                                .iter()
                                .map(|a| StreamAction {
                                    t: convert(a.t_us),
                                    description: a.description.clone(),
                                })
                                .collect(),
                            gaze: upload
                                .records
                                .gaze
                                .iter()
                                .map(|g| StreamGaze { t: convert(g.t_us), direction: g.direction })
                                .collect(),
                        },
                    );
                }
                None => {
                    warn!(role = %client.role, "stream upload missing; archiving incomplete");
                    incomplete.push(client.role);
                    streams.insert(client.role, ClientStream::default());
                }
            }
        }
        incomplete.sort();

        let archive = SessionArchive {
            session_id: self.cfg.session_id,
            scenario: self.cfg.scenario.name.as_str().to_string(),
            clock: self.clock,
            roster: self.roster.clone(),
            event_log: std::mem::take(&mut self.event_log),
            streams,
            rtt_stats: rtt_stats.clone(),
            incomplete: incomplete.clone(),
            final_version: self.version,
        };
        write_archive(&self.cfg.archive_dir, &archive)?;
        info!(dir = %self.cfg.archive_dir.display(), "archive written");

        let period = Duration::from_secs_f64(1.0 / self.cfg.tick_hz as f64);
        Ok(SessionSummary {
            archive_dir: self.cfg.archive_dir.clone(),
            final_version: self.version,
            ticks: self.tick_instants.len() as u64,
            tick_period: period,
            tick_jitter_p99: jitter_p99(&self.tick_instants, period),
            rtt_stats,
            pose_stats: self.relay.stats(),
            incomplete,
        })
    }
}

struct EnvHeader {
    session_id: u64,
    seq: u64,
}

fn env_header(env: &ReliableEnvelope) -> EnvHeader {
    EnvHeader { session_id: env.session_id, seq: env.seq }
}

fn intervention_kind(action: &InterventionAction) -> SimEventKind {
    match action {
        InterventionAction::Timeout => SimEventKind::Timeout,
        InterventionAction::EquipmentArrival => SimEventKind::EquipmentArrival,
        InterventionAction::HelpArrives => SimEventKind::HelpArrives,
        InterventionAction::NeedleDecompression => SimEventKind::NeedleDecompression,
        InterventionAction::ConvertToOpen => SimEventKind::ConvertToOpen,
        InterventionAction::DrugAdmin { .. } => unreachable!("drugs handled separately"),
    }
}

/// |inter-tick delta - period| at the 99th percentile.
pub(crate) fn jitter_p99(instants: &[Instant], period: Duration) -> Duration {
    if instants.len() < 2 {
        return Duration::ZERO;
    }
    let mut jitters: Vec<Duration> = instants
        .windows(2)
        .map(|w| {
            let delta = w[1].duration_since(w[0]);
            if delta > period {
                delta - period
            } else {
                period - delta
            }
        })
        .collect();
    jitters.sort_unstable();
    let idx = ((jitters.len() as f64) * 0.99).ceil() as usize;
    jitters[idx.saturating_sub(1).min(jitters.len() - 1)]
}

async fn accept_loop(listener: TcpListener, tx: mpsc::UnboundedSender<Msg>) {
    let mut next_conn: ConnId = 1;
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let conn_id = next_conn;
                next_conn += 1;
                debug!(conn_id, %peer, "connection accepted");
                let _ = stream.set_nodelay(true);
                let (read_half, write_half) = stream.into_split();
                let (writer_tx, writer_rx) = mpsc::unbounded_channel::<Vec<u8>>();
                if tx.send(Msg::Accepted { conn_id, writer: writer_tx }).is_err() {
                    return;
                }
                tokio::spawn(conn_writer(write_half, writer_rx));
                tokio::spawn(conn_reader(conn_id, read_half, tx.clone()));
            }
            Err(_) => return,
        }
    }
}

async fn conn_reader(conn_id: ConnId, mut read: OwnedReadHalf, tx: mpsc::UnboundedSender<Msg>) {
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        match read.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                decoder.feed(&buf[..n]);
                loop {
                    match decoder.next_frame() {
                        Ok(Some(env)) => {
                            let recv_us = wall_us();
                            if tx.send(Msg::Frame { conn_id, env, recv_us }).is_err() {
                                return;
                            }
                        }
                        Ok(None) => break,
                        Err(e) => {
                            warn!(conn_id, "frame error, closing connection: {e}");
                            let _ = tx.send(Msg::Disconnected { conn_id });
                            return;
                        }
                    }
                }
            }
        }
    }
    let _ = tx.send(Msg::Disconnected { conn_id });
}

async fn conn_writer(mut write: OwnedWriteHalf, mut rx: mpsc::UnboundedReceiver<Vec<u8>>) {
    while let Some(bytes) = rx.recv().await {
        if write.write_all(&bytes).await.is_err() {
            return;
        }
    }
    let _ = write.shutdown().await;
}

async fn probe_timer(interval: Duration, tx: mpsc::UnboundedSender<Msg>) {
    let mut timer = tokio::time::interval(interval);
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        timer.tick().await;
        if tx.send(Msg::Probe).is_err() {
            return;
        }
    }
}

/// Dedicated ticker thread with sleep-then-spin precision: sleeps to within
/// a millisecond of each deadline, then spins. Missed deadlines are skipped
/// rather than burst-delivered.
fn spawn_ticker(
    period: Duration,
    stop: Arc<AtomicBool>,
    tx: mpsc::UnboundedSender<Msg>,
) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        let start = Instant::now();
        let spin_window = Duration::from_micros(800);
        let mut n: u64 = 1;
        while !stop.load(Ordering::Relaxed) {
            let next = start + period.mul_f64(n as f64);
            let now = Instant::now();
            if next > now {
                let remaining = next - now;
                if remaining > spin_window {
                    std::thread::sleep(remaining - spin_window);
                }
                while Instant::now() < next {
                    std::hint::spin_loop();
                }
            }
            if tx.send(Msg::Tick { at: Instant::now() }).is_err() {
                return;
            }
            n += 1;
            while start + period.mul_f64(n as f64) < Instant::now() {
                n += 1;
            }
        }
    })
}
