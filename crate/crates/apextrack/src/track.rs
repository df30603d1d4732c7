//! Identity-carrying object state: tracklets and the table that owns them.

use crate::detection::Detection;

/// One recorded frame of a tracklet: where the object was and how confident
/// the detector was about it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub frame: u64,
    pub center: (f64, f64),
    pub confidence: f64,
}

/// A single object's identity with its time-ordered detection history.
#[derive(Clone, Debug)]
pub struct Tracklet {
    id: u64,
    last_detection: Detection,
    last_frame: u64,
    history: Vec<TrackPoint>,
}

impl Tracklet {
    pub(crate) fn open(id: u64, detection: Detection, frame: u64) -> Self {
        let point = TrackPoint {
            frame,
            center: detection.center(),
            confidence: detection.confidence(),
        };
        Self {
            id,
            last_detection: detection,
            last_frame: frame,
            history: vec![point],
        }
    }

    pub(crate) fn from_history(id: u64, history: Vec<TrackPoint>) -> Self {
        debug_assert!(!history.is_empty());
        debug_assert!(history.windows(2).all(|w| w[0].frame < w[1].frame));
        let last = *history.last().expect("non-empty history");
        Self {
            id,
            last_detection: Detection::unchecked(last.center, (0.0, 0.0), last.confidence, 0),
            last_frame: last.frame,
            history,
        }
    }

    pub(crate) fn extend(&mut self, detection: Detection, frame: u64) {
        debug_assert!(frame > self.last_frame);
        self.history.push(TrackPoint {
            frame,
            center: detection.center(),
            confidence: detection.confidence(),
        });
        self.last_detection = detection;
        self.last_frame = frame;
    }

    /// Unique id, allocated starting at 1 and never reused.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn last_detection(&self) -> &Detection {
        &self.last_detection
    }

    pub fn last_frame(&self) -> u64 {
        self.last_frame
    }

    pub fn last_center(&self) -> (f64, f64) {
        self.last_detection.center()
    }

    /// Time-ordered history, one point per frame the object was seen in.
    pub fn history(&self) -> &[TrackPoint] {
        &self.history
    }
}

/// All tracklets of one sequence: those still eligible for matching and
/// those retired after going unseen too long.
#[derive(Clone, Debug)]
pub struct TrackTable {
    active: Vec<Tracklet>,
    retired: Vec<Tracklet>,
    next_id: u64,
}

impl Default for TrackTable {
    fn default() -> Self {
        Self::new()
    }
}

impl TrackTable {
    pub fn new() -> Self {
        Self {
            active: Vec::new(),
            retired: Vec::new(),
            next_id: 1,
        }
    }

    pub(crate) fn from_parts(active: Vec<Tracklet>, retired: Vec<Tracklet>, next_id: u64) -> Self {
        debug_assert!(active
            .iter()
            .chain(&retired)
            .all(|t| t.id() >= 1 && t.id() < next_id));
        Self {
            active,
            retired,
            next_id,
        }
    }

    pub fn active(&self) -> &[Tracklet] {
        &self.active
    }

    pub fn retired(&self) -> &[Tracklet] {
        &self.retired
    }

    /// Next id that will be allocated; greater than every existing id.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// All tracklets, active then retired.
    pub fn all_tracklets(&self) -> impl Iterator<Item = &Tracklet> {
        self.active.iter().chain(self.retired.iter())
    }

    pub fn len(&self) -> usize {
        self.active.len() + self.retired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty() && self.retired.is_empty()
    }

    pub(crate) fn open_tracklet(&mut self, detection: Detection, frame: u64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.active.push(Tracklet::open(id, detection, frame));
        id
    }

    pub(crate) fn active_mut(&mut self) -> &mut [Tracklet] {
        &mut self.active
    }

    /// Moves active tracklets unseen for more than `memory_frames` frames
    /// (relative to `frame`) into the retired list.
    pub(crate) fn retire_stale(&mut self, frame: u64, memory_frames: u64) {
        let mut i = 0;
        while i < self.active.len() {
            if frame.saturating_sub(self.active[i].last_frame()) > memory_frames {
                let t = self.active.remove(i);
                self.retired.push(t);
            } else {
                i += 1;
            }
        }
    }
}
