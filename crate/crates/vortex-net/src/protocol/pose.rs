/// Magic bytes opening every pose datagram.
pub const POSE_MAGIC: [u8; 4] = *b"VRTX";
/// Current layout version; receivers silently drop unknown versions.
pub const POSE_VERSION: u8 = 1;
/// Exact datagram length: magic(4) + version(1) + client_id(4) + seq(4) +
/// t_us(8) + 3 body poses (7 f32 each = 28) + gaze (3 f32 = 12).
pub const POSE_LEN: usize = 4 + 1 + 4 + 4 + 8 + 3 * 28 + 12;

const UNIT_NORM_TOLERANCE: f32 = 1e-3;

/// Position plus unit-quaternion orientation of one tracked body part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    /// Meters, world space.
    pub position: [f32; 3],
    /// Unit quaternion (x, y, z, w).
    pub orientation: [f32; 4],
}

impl BodyPose {
    pub const IDENTITY: BodyPose =
        BodyPose { position: [0.0; 3], orientation: [0.0, 0.0, 0.0, 1.0] };
}

/// One high-frequency tracking update: head, hands and gaze vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseUpdate {
    pub client_id: u32,
    pub seq: u32,
    /// Sender-local microseconds.
    pub t_us: u64,
    pub head: BodyPose,
    pub hand_left: BodyPose,
    pub hand_right: BodyPose,
    /// Unit gaze direction.
    pub gaze: [f32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PoseError {
    #[error("datagram does not start with the pose magic")]
    NotAPose,
    #[error("datagram truncated: {0} bytes, need {POSE_LEN}")]
    TruncatedDatagram(usize),
    #[error("datagram has {0} trailing bytes beyond the fixed layout")]
    TrailingBytes(usize),
    #[error("unsupported pose layout version {0}")]
    UnsupportedVersion(u8),
    #[error("quaternion norm {0} outside unit tolerance")]
    NonUnitQuaternion(f32),
    #[error("gaze norm {0} outside unit tolerance")]
    NonUnitGaze(f32),
}

fn check_quat(q: [f32; 4]) -> Result<(), PoseError> {
    let norm = (q.iter().map(|c| c * c).sum::<f32>()).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(PoseError::NonUnitQuaternion(norm));
    }
    Ok(())
}

fn check_gaze(g: [f32; 3]) -> Result<(), PoseError> {
    let norm = (g.iter().map(|c| c * c).sum::<f32>()).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(PoseError::NonUnitGaze(norm));
    }
    Ok(())
}

impl PoseUpdate {
    pub fn validate(&self) -> Result<(), PoseError> {
        for pose in [&self.head, &self.hand_left, &self.hand_right] {
            check_quat(pose.orientation)?;
        }
        check_gaze(self.gaze)
    }
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_body(out: &mut Vec<u8>, b: &BodyPose) {
    for v in b.position {
        put_f32(out, v);
    }
    for v in b.orientation {
        put_f32(out, v);
    }
}

/// Encode to the fixed 117-byte big-endian layout, fields in declaration
/// order. Fails if the invariants do not hold.
pub fn encode_pose(p: &PoseUpdate) -> Result<Vec<u8>, PoseError> {
    p.validate()?;
    let mut out = Vec::with_capacity(POSE_LEN);
    out.extend_from_slice(&POSE_MAGIC);
    out.push(POSE_VERSION);
    out.extend_from_slice(&p.client_id.to_be_bytes());
    out.extend_from_slice(&p.seq.to_be_bytes());
    out.extend_from_slice(&p.t_us.to_be_bytes());
    put_body(&mut out, &p.head);
    put_body(&mut out, &p.hand_left);
    put_body(&mut out, &p.hand_right);
    for v in p.gaze {
        put_f32(&mut out, v);
    }
    debug_assert_eq!(out.len(), POSE_LEN);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.at..self.at + N]);
        self.at += N;
        out
    }

    fn f32(&mut self) -> f32 {
        f32::from_be_bytes(self.take::<4>())
    }

    fn body(&mut self) -> BodyPose {
        BodyPose {
            position: [self.f32(), self.f32(), self.f32()],
            orientation: [self.f32(), self.f32(), self.f32(), self.f32()],
        }
    }
}

/// Decode and validate one pose datagram. Rejects wrong magic, wrong length,
/// unknown versions and out-of-tolerance unit vectors; never panics on
/// arbitrary input.
pub fn decode_pose(buf: &[u8]) -> Result<PoseUpdate, PoseError> {
    if buf.len() < 4 {
        return Err(PoseError::TruncatedDatagram(buf.len()));
    }
    if buf[..4] != POSE_MAGIC {
        return Err(PoseError::NotAPose);
    }
    if buf.len() < POSE_LEN {
        return Err(PoseError::TruncatedDatagram(buf.len()));
    }
    if buf.len() > POSE_LEN {
        return Err(PoseError::TrailingBytes(buf.len() - POSE_LEN));
    }
    if buf[4] != POSE_VERSION {
        return Err(PoseError::UnsupportedVersion(buf[4]));
    }
    let mut r = Reader { buf, at: 5 };
    let pose = PoseUpdate {
        client_id: u32::from_be_bytes(r.take::<4>()),
        seq: u32::from_be_bytes(r.take::<4>()),
        t_us: u64::from_be_bytes(r.take::<8>()),
        head: r.body(),
        hand_left: r.body(),
        hand_right: r.body(),
        gaze: [r.f32(), r.f32(), r.f32()],
    };
    pose.validate()?;
    Ok(pose)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_pose() -> PoseUpdate {
        PoseUpdate {
            client_id: 3,
            seq: 128,
            t_us: 1_700_000_000_000,
            head: BodyPose { position: [0.1, 1.7, -0.4], orientation: [0.0, 0.0, 0.0, 1.0] },
            hand_left: BodyPose { position: [-0.3, 1.1, -0.2], orientation: [0.5, 0.5, 0.5, 0.5] },
            hand_right: BodyPose::IDENTITY,
            gaze: [0.0, 0.0, -1.0],
        }
    }

    #[test]
    fn encoding_opens_with_the_magic_bytes() {
        let bytes = encode_pose(&sample_pose()).unwrap();
        assert_eq!(&bytes[..4], &[0x56, 0x52, 0x54, 0x58]);
        assert_eq!(bytes.len(), POSE_LEN);
        assert_eq!(POSE_LEN, 117);
    }

    #[test]
    fn round_trip_identity() {
        let pose = sample_pose();
        let back = decode_pose(&encode_pose(&pose).unwrap()).unwrap();
        assert_eq!(back, pose);
    }

    #[test]
    fn short_datagram_is_truncated() {
        let bytes = encode_pose(&sample_pose()).unwrap();
        assert_eq!(decode_pose(&bytes[..20]), Err(PoseError::TruncatedDatagram(20)));
        assert_eq!(decode_pose(&bytes[..3]), Err(PoseError::TruncatedDatagram(3)));
    }

    #[test]
    fn wrong_magic_is_not_a_pose() {
        let mut bytes = encode_pose(&sample_pose()).unwrap();
        bytes[0] = b'X';
        assert_eq!(decode_pose(&bytes), Err(PoseError::NotAPose));
    }

    #[test]
    fn oversize_datagram_is_rejected() {
        let mut bytes = encode_pose(&sample_pose()).unwrap();
        bytes.push(0);
        assert_eq!(decode_pose(&bytes), Err(PoseError::TrailingBytes(1)));
    }

    #[test]
    fn unknown_version_is_reported_for_silent_drop() {
        let mut bytes = encode_pose(&sample_pose()).unwrap();
        bytes[4] = 9;
        assert_eq!(decode_pose(&bytes), Err(PoseError::UnsupportedVersion(9)));
    }

    #[test]
    fn non_unit_quaternion_fails_validation() {
        let mut pose = sample_pose();
        pose.head.orientation = [0.0, 0.0, 0.0, 1.01];
        assert!(matches!(encode_pose(&pose), Err(PoseError::NonUnitQuaternion(_))));
    }

    #[test]
    fn non_unit_gaze_fails_validation() {
        let mut pose = sample_pose();
        pose.gaze = [0.0, 0.5, 0.0];
        assert!(matches!(encode_pose(&pose), Err(PoseError::NonUnitGaze(_))));
    }
}
